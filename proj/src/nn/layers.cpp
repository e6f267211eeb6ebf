#include "reat/nn/layers.hpp"

#include "reat/errors.hpp"

namespace reat::nn {

void create_lstm_params(ParameterSet& ps, const std::string& prefix, size_t d_in, size_t d, Rng& rng) {
    ps.create(prefix + ".w", {4 * d, d_in + d}, rng);
    ps.create(prefix + ".b", {4 * d}, rng);
}

LstmState lstm_step(Tape& t, ParameterSet& ps, const std::string& prefix,
                    Var x, Var h_prev, Var c_prev) {
    const Array& w = ps.at(prefix + ".w").value;
    const size_t d4 = w.rows();
    const size_t d = d4 / 4;
    const size_t d_in = w.cols() - d;
    if (t.val(x).size() != d_in) {
        throw NumericError(prefix + ".w: input width " + std::to_string(t.val(x).size()) +
                           " does not match expected " + std::to_string(d_in));
    }
    if (t.val(h_prev).size() != d || t.val(c_prev).size() != d) {
        throw NumericError(prefix + ".w: state width mismatch, expected " + std::to_string(d));
    }

    Var z = concat({x, h_prev});
    Var gates = add(matvec(t.param(ps, prefix + ".w"), z), t.param(ps, prefix + ".b"));
    Var i = sigmoid(slice(gates, 0, d));
    Var f = sigmoid(slice(gates, d, d));
    Var o = sigmoid(slice(gates, 2 * d, d));
    Var g = tanh_op(slice(gates, 3 * d, d));
    Var c = add(mul(f, c_prev), mul(i, g));
    Var h = mul(o, tanh_op(c));
    return {h, c};
}

LstmState lstm_zero_state(Tape& t, size_t d) {
    return {t.leaf(Array({d})), t.leaf(Array({d}))};
}

std::vector<Var> lstm_run(Tape& t, ParameterSet& ps, const std::string& prefix,
                          const std::vector<Var>& inputs, size_t d) {
    if (inputs.empty()) throw NumericError(prefix + ": empty input sequence");
    LstmState s = lstm_zero_state(t, d);
    std::vector<Var> hs;
    hs.reserve(inputs.size());
    for (const Var& x : inputs) {
        s = lstm_step(t, ps, prefix, x, s.h, s.c);
        hs.push_back(s.h);
    }
    return hs;
}

std::vector<Var> bilstm(Tape& t, ParameterSet& ps, const std::string& fwd_prefix,
                        const std::string& bwd_prefix, const std::vector<Var>& inputs, size_t d) {
    if (inputs.empty()) throw NumericError("bilstm: empty input sequence");
    std::vector<Var> fwd = lstm_run(t, ps, fwd_prefix, inputs, d);
    std::vector<Var> rev(inputs.rbegin(), inputs.rend());
    std::vector<Var> bwd = lstm_run(t, ps, bwd_prefix, rev, d);
    const size_t n = inputs.size();
    std::vector<Var> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        out.push_back(concat({fwd[i], bwd[n - 1 - i]}));
    }
    return out;
}

void create_mlp_params(ParameterSet& ps, const std::string& prefix, size_t d_in, size_t hidden, Rng& rng) {
    ps.create(prefix + ".w1", {hidden, d_in}, rng);
    ps.create(prefix + ".b1", {hidden}, rng);
    ps.create(prefix + ".w2", {1, hidden}, rng);
    ps.create(prefix + ".b2", {1}, rng);
}

Var mlp(Tape& t, ParameterSet& ps, const std::string& prefix, Var input) {
    const Array& w1 = ps.at(prefix + ".w1").value;
    if (t.val(input).size() != w1.cols()) {
        throw NumericError(prefix + ".w1: input width " + std::to_string(t.val(input).size()) +
                           " does not match expected " + std::to_string(w1.cols()));
    }
    Var h = tanh_op(add(matvec(t.param(ps, prefix + ".w1"), input), t.param(ps, prefix + ".b1")));
    return add(matvec(t.param(ps, prefix + ".w2"), h), t.param(ps, prefix + ".b2"));
}

AttentionResult attention(Tape& t, ParameterSet& ps, const std::string& prefix,
                          Var state, const std::vector<Var>& keys,
                          const std::vector<char>& mask) {
    if (keys.empty()) throw NumericError("attention: empty key sequence");
    std::vector<Var> scores;
    scores.reserve(keys.size());
    for (const Var& key : keys) {
        scores.push_back(mlp(t, ps, prefix, concat({state, key})));
    }
    Var score_vec = concat(scores);
    std::vector<char> m = mask.empty() ? std::vector<char>(keys.size(), 1) : mask;
    Var weights = masked_softmax(score_vec, std::move(m));
    Var context = weighted_sum(keys, weights);
    return {weights, context};
}

} // namespace reat::nn
