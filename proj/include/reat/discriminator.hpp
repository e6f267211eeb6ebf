#pragma once

#include <cstdint>
#include <vector>

#include "reat/corpus.hpp"
#include "reat/nn/layers.hpp"
#include "reat/rng.hpp"

namespace reat {

struct DiscriminatorConfig {
    size_t vocab_size = 0;
    size_t emb_dim = 32;
    size_t hidden = 64;       // paper profile: 500
    size_t mlp_hidden = 64;
    size_t n_candidates = 2;
    // When false the classifier sees only the message-aware representation,
    // mirroring adversarial setups without retrieval conditioning.
    bool use_candidates = true;
};

// One classification input: is `response` human-written given the message and
// the retrieved candidates?
struct DiscExample {
    const Utterance* message;
    const Utterance* response;
    const std::vector<Utterance>* candidates;
};

// Binary classifier over (response | message, candidates). Candidate and
// message encoders are unidirectional LSTMs; their final hidden states seed a
// shared response LSTM whose last hidden state is the interaction summary.
class Discriminator {
public:
    Discriminator(DiscriminatorConfig cfg, uint64_t seed);

    const DiscriminatorConfig& config() const { return cfg_; }
    nn::ParameterSet& params() { return params_; }
    const nn::ParameterSet& params() const { return params_; }

    // z^c: mean over candidates of the response encoding seeded by each
    // candidate's final state.
    nn::Var candidate_aware(nn::Tape& t, const Utterance& response,
                            const std::vector<Utterance>& candidates);

    // z^x: response encoding seeded by the message encoder's final state,
    // through the same response LSTM.
    nn::Var message_aware(nn::Tape& t, const Utterance& response, const Utterance& message);

    // sigma(MLP([z^x ; z^c])), in (0, 1).
    nn::Var classify_prob(nn::Tape& t, const Utterance& response, const Utterance& message,
                          const std::vector<Utterance>& candidates);

    // Forward-only convenience on a throwaway tape.
    double classify(const Utterance& response, const Utterance& message,
                    const std::vector<Utterance>& candidates);

    // mean(-ln p) over positives + mean(-ln(1-p)) over negatives. When given,
    // negative_probs receives each negative's classification probability.
    nn::Var loss(nn::Tape& t, const std::vector<DiscExample>& positives,
                 const std::vector<DiscExample>& negatives,
                 std::vector<double>* negative_probs = nullptr);

private:
    std::vector<nn::Var> embed_sequence(nn::Tape& t, const Utterance& u, const std::string& what);
    // Runs the response LSTM over y with the given initial hidden state.
    nn::Var response_encoding(nn::Tape& t, const Utterance& response, nn::Var h0,
                              const std::string& what);

    DiscriminatorConfig cfg_;
    nn::ParameterSet params_;
};

} // namespace reat
