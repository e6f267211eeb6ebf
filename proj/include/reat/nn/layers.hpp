#pragma once

#include <string>
#include <vector>

#include "reat/nn/tape.hpp"

namespace reat::nn {

// Weight layout of one LSTM cell under a parameter name prefix:
//   <prefix>.w : [4d x (d_in + d)]   gate blocks ordered input, forget, output, candidate
//   <prefix>.b : [4d]
void create_lstm_params(ParameterSet& ps, const std::string& prefix, size_t d_in, size_t d, Rng& rng);

struct LstmState {
    Var h;
    Var c;
};

// One step of the standard LSTM recurrence:
//   [i f o] = sigmoid(W [x; h_prev] + b),  g = tanh(...)
//   c = f * c_prev + i * g,  h = o * tanh(c)
LstmState lstm_step(Tape& t, ParameterSet& ps, const std::string& prefix,
                    Var x, Var h_prev, Var c_prev);

// Zero initial state for a cell of width d.
LstmState lstm_zero_state(Tape& t, size_t d);

// Runs a unidirectional LSTM from the zero state; returns the hidden state at
// every position.
std::vector<Var> lstm_run(Tape& t, ParameterSet& ps, const std::string& prefix,
                          const std::vector<Var>& inputs, size_t d);

// Bi-directional encoding: position i holds [forward_i ; backward_i], each of
// width d, so outputs are 2d wide. Forward and backward cells have their own
// parameter prefixes.
std::vector<Var> bilstm(Tape& t, ParameterSet& ps, const std::string& fwd_prefix,
                        const std::string& bwd_prefix, const std::vector<Var>& inputs, size_t d);

// One-hidden-layer feed-forward net with tanh and scalar output:
//   <prefix>.w1 : [hidden x d_in], <prefix>.b1 : [hidden]
//   <prefix>.w2 : [1 x hidden],    <prefix>.b2 : [1]
void create_mlp_params(ParameterSet& ps, const std::string& prefix, size_t d_in, size_t hidden, Rng& rng);

Var mlp(Tape& t, ParameterSet& ps, const std::string& prefix, Var input);

struct AttentionResult {
    Var weights;  // [T], masked positions exactly 0
    Var context;  // [d_k]
};

// Additive attention: scores_i = q([state; key_i]) through the mlp scorer
// under `prefix`, softmax over unmasked positions, context = sum w_i key_i.
// An empty mask means all positions are valid.
AttentionResult attention(Tape& t, ParameterSet& ps, const std::string& prefix,
                          Var state, const std::vector<Var>& keys,
                          const std::vector<char>& mask = {});

} // namespace reat::nn
