#include "reat/discriminator.hpp"

namespace reat {

using nn::Var;

Discriminator::Discriminator(DiscriminatorConfig cfg, uint64_t seed) : cfg_(cfg) {
    if (cfg_.vocab_size <= kReservedTokens) throw ConfigError("discriminator vocab_size too small");
    Rng rng(seed);
    const size_t e = cfg_.emb_dim, d = cfg_.hidden;
    params_.create("emb", {cfg_.vocab_size, e}, rng);
    nn::create_lstm_params(params_, "msg_lstm", e, d, rng);
    nn::create_lstm_params(params_, "resp_lstm", e, d, rng);
    if (cfg_.use_candidates) {
        nn::create_lstm_params(params_, "cand_lstm", e, d, rng);
        nn::create_mlp_params(params_, "mlp", 2 * d, cfg_.mlp_hidden, rng);
    } else {
        nn::create_mlp_params(params_, "mlp", d, cfg_.mlp_hidden, rng);
    }
}

std::vector<Var> Discriminator::embed_sequence(nn::Tape& t, const Utterance& u, const std::string& what) {
    if (u.empty()) throw NumericError("empty utterance: " + what);
    Var emb = t.param(params_, "emb");
    std::vector<Var> out;
    out.reserve(u.length());
    for (int id : u.ids) {
        if (id < 0 || static_cast<size_t>(id) >= cfg_.vocab_size) {
            throw NumericError("token id out of vocabulary range: " + std::to_string(id));
        }
        out.push_back(nn::slice(emb, static_cast<size_t>(id) * cfg_.emb_dim, cfg_.emb_dim));
    }
    return out;
}

Var Discriminator::response_encoding(nn::Tape& t, const Utterance& response, Var h0,
                                     const std::string& what) {
    auto inputs = embed_sequence(t, response, what);
    // Initial hidden state comes from the conditioning encoder; the cell
    // state starts at zero.
    nn::LstmState s{h0, t.leaf(nn::Array({cfg_.hidden}))};
    for (const Var& x : inputs) {
        s = nn::lstm_step(t, params_, "resp_lstm", x, s.h, s.c);
    }
    return s.h;
}

Var Discriminator::candidate_aware(nn::Tape& t, const Utterance& response,
                                   const std::vector<Utterance>& candidates) {
    if (!cfg_.use_candidates) throw ConfigError("discriminator built without candidate conditioning");
    if (candidates.size() != cfg_.n_candidates) {
        throw ConfigError("expected " + std::to_string(cfg_.n_candidates) + " candidates, got " +
                          std::to_string(candidates.size()));
    }
    std::vector<Var> locals;
    locals.reserve(candidates.size());
    for (size_t k = 0; k < candidates.size(); ++k) {
        auto inputs = embed_sequence(t, candidates[k], "candidate " + std::to_string(k));
        nn::LstmState s = nn::lstm_zero_state(t, cfg_.hidden);
        for (const Var& x : inputs) {
            s = nn::lstm_step(t, params_, "cand_lstm", x, s.h, s.c);
        }
        locals.push_back(response_encoding(t, response, s.h, "response"));
    }
    return nn::scale(nn::add_n(locals), 1.0 / static_cast<double>(locals.size()));
}

Var Discriminator::message_aware(nn::Tape& t, const Utterance& response, const Utterance& message) {
    auto inputs = embed_sequence(t, message, "message");
    nn::LstmState s = nn::lstm_zero_state(t, cfg_.hidden);
    for (const Var& x : inputs) {
        s = nn::lstm_step(t, params_, "msg_lstm", x, s.h, s.c);
    }
    return response_encoding(t, response, s.h, "response");
}

Var Discriminator::classify_prob(nn::Tape& t, const Utterance& response, const Utterance& message,
                                 const std::vector<Utterance>& candidates) {
    Var zx = message_aware(t, response, message);
    Var features = cfg_.use_candidates ? nn::concat({zx, candidate_aware(t, response, candidates)})
                                       : zx;
    return nn::sigmoid(nn::mlp(t, params_, "mlp", features));
}

double Discriminator::classify(const Utterance& response, const Utterance& message,
                               const std::vector<Utterance>& candidates) {
    nn::Tape t;
    return t.scalar(classify_prob(t, response, message, candidates));
}

Var Discriminator::loss(nn::Tape& t, const std::vector<DiscExample>& positives,
                        const std::vector<DiscExample>& negatives,
                        std::vector<double>* negative_probs) {
    if (positives.empty() || negatives.empty()) {
        throw NumericError("discriminator loss needs non-empty positive and negative batches");
    }
    std::vector<Var> pos_terms, neg_terms;
    pos_terms.reserve(positives.size());
    neg_terms.reserve(negatives.size());
    for (const DiscExample& ex : positives) {
        Var p = classify_prob(t, *ex.response, *ex.message, *ex.candidates);
        pos_terms.push_back(nn::log_op(p));
    }
    for (const DiscExample& ex : negatives) {
        Var p = classify_prob(t, *ex.response, *ex.message, *ex.candidates);
        if (negative_probs) negative_probs->push_back(t.scalar(p));
        neg_terms.push_back(nn::log_op(nn::rsub_const(1.0, p)));
    }
    Var pos_mean = nn::scale(nn::add_n(pos_terms), -1.0 / static_cast<double>(pos_terms.size()));
    Var neg_mean = nn::scale(nn::add_n(neg_terms), -1.0 / static_cast<double>(neg_terms.size()));
    return nn::add(pos_mean, neg_mean);
}

} // namespace reat
