#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "reat/nn/array.hpp"
#include "reat/nn/param_set.hpp"

namespace reat::nn {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
    Tape* tape = nullptr;
    uint32_t id = 0;
};

// Records one forward pass as a flat list of nodes. Node creation order is a
// topological order, so the backward pass is a single reverse sweep; it runs
// exactly once per tape and accumulates parameter gradients into the bound
// ParameterSet slots.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // Constant input; receives no gradient accumulation outside the tape.
    Var leaf(Array value);

    // Parameter leaf. The value is shared, not copied; after backward() the
    // node gradient is added to the parameter's grad slot.
    Var param(ParameterSet& ps, const std::string& name);

    const Array& val(Var v) const { return *nodes_[v.id].value; }
    const Array& grad(Var v) const { return nodes_[v.id].grad; }
    double scalar(Var v) const;

    // Seeds d(root)/d(root) = 1 and sweeps the tape in reverse. `root` must
    // be a scalar. May be called once per tape.
    void backward(Var root);

    size_t node_count() const { return nodes_.size(); }

    // --- internal surface used by the op implementations ---
    // The backward callback receives the id of the node it belongs to, whose
    // grad slot holds d(root)/d(output).
    using BackwardFn = std::function<void(Tape&, uint32_t self)>;
    Var make_node(Array value, BackwardFn back, const char* what);
    Array& grad_mut(uint32_t id) { return nodes_[id].grad; }
    const Array& val_at(uint32_t id) const { return *nodes_[id].value; }

private:
    struct Node {
        std::shared_ptr<const Array> value;
        Array grad;
        BackwardFn back;
    };
    std::vector<Node> nodes_;
    std::vector<std::pair<uint32_t, Param*>> param_binds_;
    bool backward_done_ = false;
};

// --- elementwise and linear-algebra ops ---
Var add(Var a, Var b);
Var add_n(const std::vector<Var>& xs);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var rsub_const(double c, Var a);  // c - a
Var matvec(Var w, Var x);         // w: [m x n], x: [n] -> [m]
Var concat(const std::vector<Var>& parts);
Var slice(Var a, size_t offset, size_t len);
Var sigmoid(Var a);
Var tanh_op(Var a);
Var log_op(Var a);
Var sum(Var a);
Var mean(Var a);

// Numerically stable softmax over a vector.
Var softmax(Var a);

// Softmax in which positions with mask[i] == 0 get weight exactly 0 and no
// gradient. Throws NumericError when every position is masked.
Var masked_softmax(Var a, std::vector<char> mask);

// ln(a[idx]); the building block for sampled-sequence log-likelihoods.
Var pick_log(Var a, size_t idx);

// context = sum_i weights[i] * keys[i]; keys are same-shape vectors.
Var weighted_sum(const std::vector<Var>& keys, Var weights);

// Stacks T equal-length vectors into a [T x V] matrix node.
Var stack_rows(const std::vector<Var>& rows);

// Mean over non-excluded positions of -ln probs[t, targets[t]]. Rows must sum
// to 1 (validated to 1e-6). Positions whose target equals `exclude_id` are
// skipped; pass a negative exclude_id to keep everything.
Var cross_entropy(Var probs, const std::vector<int>& targets, int exclude_id);

} // namespace reat::nn
