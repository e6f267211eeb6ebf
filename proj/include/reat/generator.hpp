#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reat/corpus.hpp"
#include "reat/nn/layers.hpp"
#include "reat/rng.hpp"

namespace reat {

struct GeneratorConfig {
    size_t vocab_size = 0;
    size_t emb_dim = 32;        // paper profile: 300
    size_t hidden = 64;         // paper profile: 500
    size_t att_hidden = 64;     // scorer q hidden width
    size_t n_candidates = 2;
    size_t beam = 5;
    size_t max_decode_len = 30;
};

// Encoder states for one (message, candidates) pair. Candidate states come
// from one candidate bi-LSTM shared across all N candidates; the message has
// its own bi-LSTM. Every position is 2*hidden wide.
struct EncoderOutputs {
    std::vector<std::vector<nn::Var>> candidate_states;  // N x T_k
    std::vector<nn::Var> message_states;                 // T_x
};

// Word-level weights per candidate, sentence-level weights across candidates,
// and the doubly weighted context vector.
struct CandidateAttention {
    nn::Var context;                      // [2d]
    std::vector<nn::Var> word_weights;    // N entries, each [T_k]
    nn::Var sentence_weights;             // [N]
};

struct GenStepResult {
    nn::LstmState state;
    nn::Var distribution;  // [V], sums to 1
};

// Everything a teacher-forced pass produces, kept for loss computation and
// for checking the attention normalizations step by step.
struct DecodeTrace {
    std::vector<nn::LstmState> states;
    std::vector<nn::Var> distributions;
    std::vector<CandidateAttention> candidate_attention;
    std::vector<nn::AttentionResult> message_attention;
    std::vector<int> targets;  // y_1..y_T, EOS
};

struct SampleResult {
    Utterance response;     // body tokens, EOS not stored
    nn::Var log_prob;       // sum of ln p over all sampled steps
    bool ended_with_eos = false;
};

struct BeamResult {
    Utterance response;
    double log_prob = 0.0;
};

// Multi-source encoder-decoder: the response distribution is conditioned on
// the message and on N retrieved candidates through a two-level attention
// (word weights inside each candidate, sentence weights across candidates).
class Generator {
public:
    Generator(GeneratorConfig cfg, uint64_t seed);

    const GeneratorConfig& config() const { return cfg_; }
    nn::ParameterSet& params() { return params_; }
    const nn::ParameterSet& params() const { return params_; }

    EncoderOutputs encode(nn::Tape& t, const Utterance& message,
                          const std::vector<Utterance>& candidates);

    CandidateAttention candidate_context(nn::Tape& t, nn::Var s_prev, const EncoderOutputs& enc);
    nn::AttentionResult message_context(nn::Tape& t, nn::Var s_prev, const EncoderOutputs& enc);

    // Decoder input is [embedding(y_prev); a_c; a_x]; the distribution is
    // softmax(W_out s_j + b_out).
    GenStepResult decode_step(nn::Tape& t, int y_prev, const nn::LstmState& s_prev,
                              nn::Var a_c, nn::Var a_x);

    // Convenience: contexts from s_prev, then one decoder step.
    GenStepResult full_step(nn::Tape& t, const EncoderOutputs& enc, const nn::LstmState& s_prev,
                            int y_prev);

    nn::LstmState initial_state(nn::Tape& t);

    // Teacher-forced pass with BOS prepended and EOS appended.
    DecodeTrace run_teacher_forced(nn::Tape& t, const Utterance& message,
                                   const std::vector<Utterance>& candidates,
                                   const Utterance& response);

    // Mean per-token negative log-likelihood over the teacher-forced pass.
    nn::Var mle_loss(nn::Tape& t, const Utterance& message,
                     const std::vector<Utterance>& candidates, const Utterance& response);

    // Ancestral sampling at temperature 1 until EOS or max_decode_len.
    SampleResult sample(nn::Tape& t, const Utterance& message,
                        const std::vector<Utterance>& candidates, Rng& rng);

    // Beam over summed log-probs, no length normalization. EOS is not allowed
    // as the first token. Ties break toward the earlier-completed hypothesis,
    // then the lexicographically smaller token sequence.
    BeamResult beam_search(const Utterance& message, const std::vector<Utterance>& candidates,
                           size_t beam_width);

private:
    std::vector<nn::Var> embed_sequence(nn::Tape& t, const Utterance& u, const std::string& what);
    nn::Var embed_token(nn::Tape& t, int id);

    GeneratorConfig cfg_;
    nn::ParameterSet params_;
};

} // namespace reat
