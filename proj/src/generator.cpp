#include "reat/generator.hpp"

#include <algorithm>
#include <cmath>

namespace reat {

using nn::Var;

Generator::Generator(GeneratorConfig cfg, uint64_t seed) : cfg_(cfg) {
    if (cfg_.vocab_size <= kReservedTokens) throw ConfigError("generator vocab_size too small");
    Rng rng(seed);
    const size_t e = cfg_.emb_dim, d = cfg_.hidden;
    params_.create("emb", {cfg_.vocab_size, e}, rng);
    nn::create_lstm_params(params_, "cand_fwd", e, d, rng);
    nn::create_lstm_params(params_, "cand_bwd", e, d, rng);
    nn::create_lstm_params(params_, "msg_fwd", e, d, rng);
    nn::create_lstm_params(params_, "msg_bwd", e, d, rng);
    // Scorers share one architecture; word/sentence/message attention each
    // get their own weights (input widths differ only by key type).
    nn::create_mlp_params(params_, "word_att", d + 2 * d, cfg_.att_hidden, rng);
    nn::create_mlp_params(params_, "sent_att", d + 2 * d, cfg_.att_hidden, rng);
    nn::create_mlp_params(params_, "msg_att", d + 2 * d, cfg_.att_hidden, rng);
    nn::create_lstm_params(params_, "dec", e + 4 * d, d, rng);
    params_.create("out.w", {cfg_.vocab_size, d}, rng);
    params_.create("out.b", {cfg_.vocab_size}, rng);
}

Var Generator::embed_token(nn::Tape& t, int id) {
    if (id < 0 || static_cast<size_t>(id) >= cfg_.vocab_size) {
        throw NumericError("token id out of vocabulary range: " + std::to_string(id));
    }
    Var emb = t.param(params_, "emb");
    return nn::slice(emb, static_cast<size_t>(id) * cfg_.emb_dim, cfg_.emb_dim);
}

std::vector<Var> Generator::embed_sequence(nn::Tape& t, const Utterance& u, const std::string& what) {
    if (u.empty()) throw NumericError("empty utterance: " + what);
    std::vector<Var> out;
    out.reserve(u.length());
    for (int id : u.ids) out.push_back(embed_token(t, id));
    return out;
}

EncoderOutputs Generator::encode(nn::Tape& t, const Utterance& message,
                                 const std::vector<Utterance>& candidates) {
    if (candidates.size() != cfg_.n_candidates) {
        throw ConfigError("expected " + std::to_string(cfg_.n_candidates) + " candidates, got " +
                          std::to_string(candidates.size()));
    }
    EncoderOutputs enc;
    for (size_t k = 0; k < candidates.size(); ++k) {
        auto inputs = embed_sequence(t, candidates[k], "candidate " + std::to_string(k));
        enc.candidate_states.push_back(nn::bilstm(t, params_, "cand_fwd", "cand_bwd", inputs, cfg_.hidden));
    }
    auto msg_inputs = embed_sequence(t, message, "message");
    enc.message_states = nn::bilstm(t, params_, "msg_fwd", "msg_bwd", msg_inputs, cfg_.hidden);
    return enc;
}

CandidateAttention Generator::candidate_context(nn::Tape& t, Var s_prev, const EncoderOutputs& enc) {
    CandidateAttention out;
    std::vector<Var> summaries;  // a^{c^k}, one per candidate
    summaries.reserve(enc.candidate_states.size());
    for (const auto& keys : enc.candidate_states) {
        nn::AttentionResult word = nn::attention(t, params_, "word_att", s_prev, keys);
        out.word_weights.push_back(word.weights);
        summaries.push_back(word.context);
    }
    // Sentence-level weights over the per-candidate summaries, then one
    // weighted sum: sum_k beta_k sum_i alpha_ki h_ki == sum_k beta_k a^{c^k}.
    std::vector<Var> scores;
    scores.reserve(summaries.size());
    for (const Var& summary : summaries) {
        scores.push_back(nn::mlp(t, params_, "sent_att", nn::concat({s_prev, summary})));
    }
    out.sentence_weights = nn::softmax(nn::concat(scores));
    out.context = nn::weighted_sum(summaries, out.sentence_weights);
    return out;
}

nn::AttentionResult Generator::message_context(nn::Tape& t, Var s_prev, const EncoderOutputs& enc) {
    return nn::attention(t, params_, "msg_att", s_prev, enc.message_states);
}

GenStepResult Generator::decode_step(nn::Tape& t, int y_prev, const nn::LstmState& s_prev,
                                     Var a_c, Var a_x) {
    Var input = nn::concat({embed_token(t, y_prev), a_c, a_x});
    nn::LstmState s = nn::lstm_step(t, params_, "dec", input, s_prev.h, s_prev.c);
    Var logits = nn::add(nn::matvec(t.param(params_, "out.w"), s.h), t.param(params_, "out.b"));
    return {s, nn::softmax(logits)};
}

GenStepResult Generator::full_step(nn::Tape& t, const EncoderOutputs& enc,
                                   const nn::LstmState& s_prev, int y_prev) {
    CandidateAttention cand = candidate_context(t, s_prev.h, enc);
    nn::AttentionResult msg = message_context(t, s_prev.h, enc);
    return decode_step(t, y_prev, s_prev, cand.context, msg.context);
}

nn::LstmState Generator::initial_state(nn::Tape& t) {
    return nn::lstm_zero_state(t, cfg_.hidden);
}

DecodeTrace Generator::run_teacher_forced(nn::Tape& t, const Utterance& message,
                                          const std::vector<Utterance>& candidates,
                                          const Utterance& response) {
    if (response.empty()) throw NumericError("empty response in teacher-forced pass");
    EncoderOutputs enc = encode(t, message, candidates);

    DecodeTrace trace;
    trace.targets = response.ids;
    trace.targets.push_back(kEosId);

    nn::LstmState s = initial_state(t);
    int y_prev = kBosId;
    for (size_t j = 0; j < trace.targets.size(); ++j) {
        CandidateAttention cand = candidate_context(t, s.h, enc);
        nn::AttentionResult msg = message_context(t, s.h, enc);
        GenStepResult step = decode_step(t, y_prev, s, cand.context, msg.context);
        trace.candidate_attention.push_back(std::move(cand));
        trace.message_attention.push_back(std::move(msg));
        trace.states.push_back(step.state);
        trace.distributions.push_back(step.distribution);
        s = step.state;
        y_prev = trace.targets[j];
    }
    return trace;
}

Var Generator::mle_loss(nn::Tape& t, const Utterance& message,
                        const std::vector<Utterance>& candidates, const Utterance& response) {
    DecodeTrace trace = run_teacher_forced(t, message, candidates, response);
    return nn::cross_entropy(nn::stack_rows(trace.distributions), trace.targets, kPadId);
}

SampleResult Generator::sample(nn::Tape& t, const Utterance& message,
                               const std::vector<Utterance>& candidates, Rng& rng) {
    EncoderOutputs enc = encode(t, message, candidates);
    nn::LstmState s = initial_state(t);
    int y_prev = kBosId;

    SampleResult out;
    std::vector<Var> step_log_probs;
    for (size_t j = 0; j < cfg_.max_decode_len; ++j) {
        GenStepResult step = full_step(t, enc, s, y_prev);
        const nn::Array& dist = t.val(step.distribution);
        double u = rng.uniform();
        size_t tok = dist.size() - 1;
        double acc = 0.0;
        for (size_t i = 0; i < dist.size(); ++i) {
            acc += dist[i];
            if (u < acc) {
                tok = i;
                break;
            }
        }
        step_log_probs.push_back(nn::pick_log(step.distribution, tok));
        if (static_cast<int>(tok) == kEosId) {
            out.ended_with_eos = true;
            break;
        }
        out.response.ids.push_back(static_cast<int>(tok));
        s = step.state;
        y_prev = static_cast<int>(tok);
    }
    out.log_prob = nn::add_n(step_log_probs);
    return out;
}

namespace {

struct BeamHypothesis {
    std::vector<int> tokens;
    double score = 0.0;
    nn::LstmState state;
};

struct FinishedHypothesis {
    std::vector<int> tokens;
    double score;
    size_t finish_step;
};

// Final selection order: best score, then earlier completion, then smaller
// token sequence.
bool better_finished(const FinishedHypothesis& a, const FinishedHypothesis& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.finish_step != b.finish_step) return a.finish_step < b.finish_step;
    return a.tokens < b.tokens;
}

} // namespace

BeamResult Generator::beam_search(const Utterance& message, const std::vector<Utterance>& candidates,
                                  size_t beam_width) {
    if (beam_width < 1) throw ConfigError("beam width must be at least 1");
    nn::Tape t;
    EncoderOutputs enc = encode(t, message, candidates);

    std::vector<BeamHypothesis> live;
    live.push_back({{}, 0.0, initial_state(t)});

    std::vector<FinishedHypothesis> finished;

    for (size_t step_no = 1; step_no <= cfg_.max_decode_len && !live.empty(); ++step_no) {
        struct Expansion {
            double score;
            size_t parent;
            int token;
        };
        std::vector<Expansion> expansions;
        std::vector<GenStepResult> steps;
        steps.reserve(live.size());
        for (size_t p = 0; p < live.size(); ++p) {
            int y_prev = live[p].tokens.empty() ? kBosId : live[p].tokens.back();
            GenStepResult step = full_step(t, enc, live[p].state, y_prev);
            const nn::Array& dist = t.val(step.distribution);
            for (size_t tok = 0; tok < dist.size(); ++tok) {
                if (step_no == 1 && static_cast<int>(tok) == kEosId) continue;  // min length 1
                if (dist[tok] <= 0.0) continue;
                expansions.push_back({live[p].score + std::log(dist[tok]), p, static_cast<int>(tok)});
            }
            steps.push_back(std::move(step));
        }
        std::sort(expansions.begin(), expansions.end(), [](const Expansion& a, const Expansion& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.parent != b.parent) return a.parent < b.parent;
            return a.token < b.token;
        });
        if (expansions.size() > beam_width) expansions.resize(beam_width);

        std::vector<BeamHypothesis> next;
        for (const Expansion& e : expansions) {
            if (e.token == kEosId) {
                finished.push_back({live[e.parent].tokens, e.score, step_no});
                continue;
            }
            BeamHypothesis h;
            h.tokens = live[e.parent].tokens;
            h.tokens.push_back(e.token);
            h.score = e.score;
            h.state = steps[e.parent].state;
            next.push_back(std::move(h));
        }
        if (step_no == cfg_.max_decode_len) {
            for (BeamHypothesis& h : next) {
                finished.push_back({std::move(h.tokens), h.score, step_no});
            }
            next.clear();
        }
        live = std::move(next);
    }

    if (finished.empty()) throw NumericError("beam search produced no hypothesis");
    const FinishedHypothesis* best = &finished[0];
    for (const FinishedHypothesis& f : finished) {
        if (better_finished(f, *best)) best = &f;
    }
    BeamResult out;
    out.response.ids = best->tokens;
    out.log_prob = best->score;
    return out;
}

} // namespace reat
