#include "reat/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "reat/errors.hpp"

namespace reat::nn {

Var Tape::leaf(Array value) {
    value.check_finite("leaf");
    Node n;
    n.value = std::make_shared<Array>(std::move(value));
    nodes_.push_back(std::move(n));
    return {this, static_cast<uint32_t>(nodes_.size() - 1)};
}

Var Tape::param(ParameterSet& ps, const std::string& name) {
    Param& p = ps.at(name);
    Node n;
    // Aliasing constructor: shares the parameter storage without owning it.
    // Parameter values must stay put while the tape is alive.
    n.value = std::shared_ptr<const Array>(std::shared_ptr<void>(), &p.value);
    nodes_.push_back(std::move(n));
    uint32_t id = static_cast<uint32_t>(nodes_.size() - 1);
    param_binds_.emplace_back(id, &p);
    return {this, id};
}

double Tape::scalar(Var v) const {
    const Array& a = val(v);
    if (a.size() != 1) throw NumericError("scalar() on non-scalar node");
    return a[0];
}

Var Tape::make_node(Array value, BackwardFn back, const char* what) {
    value.check_finite(what);
    Node n;
    n.value = std::make_shared<Array>(std::move(value));
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return {this, static_cast<uint32_t>(nodes_.size() - 1)};
}

void Tape::backward(Var root) {
    if (backward_done_) throw NumericError("backward() called twice on one tape");
    backward_done_ = true;
    if (val(root).size() != 1) throw NumericError("backward root must be scalar");

    for (uint32_t i = 0; i <= root.id; ++i) {
        nodes_[i].grad = Array(nodes_[i].value->shape);
    }
    nodes_[root.id].grad[0] = 1.0;

    for (uint32_t i = root.id + 1; i-- > 0;) {
        if (nodes_[i].back) nodes_[i].back(*this, i);
    }

    for (auto& [id, p] : param_binds_) {
        if (id > root.id) continue;
        const Array& g = nodes_[id].grad;
        for (size_t k = 0; k < g.size(); ++k) p->grad[k] += g[k];
    }
}

namespace {

Tape& same_tape(Var a, Var b) {
    if (a.tape != b.tape) throw NumericError("ops across different tapes");
    return *a.tape;
}

} // namespace

Var add(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Array& av = t.val(a);
    const Array& bv = t.val(b);
    if (!av.same_shape(bv)) {
        throw NumericError("add: shape mismatch " + shape_str(av.shape) + " vs " + shape_str(bv.shape));
    }
    Array out = av;
    for (size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    const uint32_t ia = a.id, ib = b.id;
    return t.make_node(std::move(out), [ia, ib](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        Array& ga = tp.grad_mut(ia);
        Array& gb = tp.grad_mut(ib);
        for (size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    }, "add");
}

Var add_n(const std::vector<Var>& xs) {
    if (xs.empty()) throw NumericError("add_n: empty input");
    Tape& t = *xs[0].tape;
    Array out = t.val(xs[0]);
    std::vector<uint32_t> ids{xs[0].id};
    ids.reserve(xs.size());
    for (size_t k = 1; k < xs.size(); ++k) {
        same_tape(xs[0], xs[k]);
        const Array& v = t.val(xs[k]);
        if (!v.same_shape(out)) throw NumericError("add_n: shape mismatch");
        for (size_t i = 0; i < out.size(); ++i) out[i] += v[i];
        ids.push_back(xs[k].id);
    }
    return t.make_node(std::move(out), [ids](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        for (uint32_t id : ids) {
            Array& gi = tp.grad_mut(id);
            for (size_t i = 0; i < g.size(); ++i) gi[i] += g[i];
        }
    }, "add_n");
}

Var mul(Var a, Var b) {
    Tape& t = same_tape(a, b);
    const Array& av = t.val(a);
    const Array& bv = t.val(b);
    if (!av.same_shape(bv)) throw NumericError("mul: shape mismatch");
    Array out = av;
    for (size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
    const uint32_t ia = a.id, ib = b.id;
    return t.make_node(std::move(out), [ia, ib](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        const Array& av2 = tp.val_at(ia);
        const Array& bv2 = tp.val_at(ib);
        Array& ga = tp.grad_mut(ia);
        Array& gb = tp.grad_mut(ib);
        for (size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * bv2[i];
            gb[i] += g[i] * av2[i];
        }
    }, "mul");
}

Var scale(Var a, double c) {
    Tape& t = *a.tape;
    Array out = t.val(a);
    for (double& v : out.data) v *= c;
    const uint32_t ia = a.id;
    return t.make_node(std::move(out), [ia, c](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        Array& ga = tp.grad_mut(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
    }, "scale");
}

Var rsub_const(double c, Var a) {
    Tape& t = *a.tape;
    Array out = t.val(a);
    for (double& v : out.data) v = c - v;
    const uint32_t ia = a.id;
    return t.make_node(std::move(out), [ia](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        Array& ga = tp.grad_mut(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
    }, "rsub_const");
}

Var matvec(Var w, Var x) {
    Tape& t = same_tape(w, x);
    const Array& wv = t.val(w);
    const Array& xv = t.val(x);
    if (wv.shape.size() != 2 || xv.size() != wv.cols()) {
        throw NumericError("matvec: shape mismatch " + shape_str(wv.shape) + " * " + shape_str(xv.shape));
    }
    const size_t m = wv.rows(), n = wv.cols();
    Array out({m});
    for (size_t i = 0; i < m; ++i) {
        double acc = 0.0;
        const double* row = wv.data.data() + i * n;
        for (size_t j = 0; j < n; ++j) acc += row[j] * xv[j];
        out[i] = acc;
    }
    const uint32_t iw = w.id, ix = x.id;
    return t.make_node(std::move(out), [iw, ix, m, n](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        const Array& wv2 = tp.val_at(iw);
        const Array& xv2 = tp.val_at(ix);
        Array& gw = tp.grad_mut(iw);
        Array& gx = tp.grad_mut(ix);
        for (size_t i = 0; i < m; ++i) {
            const double gi = g[i];
            const double* wrow = wv2.data.data() + i * n;
            double* gwrow = gw.data.data() + i * n;
            for (size_t j = 0; j < n; ++j) {
                gwrow[j] += gi * xv2[j];
                gx[j] += gi * wrow[j];
            }
        }
    }, "matvec");
}

Var concat(const std::vector<Var>& parts) {
    if (parts.empty()) throw NumericError("concat: empty input");
    Tape& t = *parts[0].tape;
    size_t total = 0;
    std::vector<uint32_t> ids;
    std::vector<size_t> lens;
    for (const Var& p : parts) {
        same_tape(parts[0], p);
        size_t len = t.val(p).size();
        ids.push_back(p.id);
        lens.push_back(len);
        total += len;
    }
    Array out({total});
    size_t off = 0;
    for (size_t k = 0; k < parts.size(); ++k) {
        const Array& v = t.val(parts[k]);
        std::copy(v.data.begin(), v.data.end(), out.data.begin() + static_cast<ptrdiff_t>(off));
        off += lens[k];
    }
    return t.make_node(std::move(out), [ids, lens](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        size_t off2 = 0;
        for (size_t k = 0; k < ids.size(); ++k) {
            Array& gk = tp.grad_mut(ids[k]);
            for (size_t i = 0; i < lens[k]; ++i) gk[i] += g[off2 + i];
            off2 += lens[k];
        }
    }, "concat");
}

Var slice(Var a, size_t offset, size_t len) {
    Tape& t = *a.tape;
    const Array& av = t.val(a);
    if (offset + len > av.size()) throw NumericError("slice: out of range");
    Array out({len});
    std::copy(av.data.begin() + static_cast<ptrdiff_t>(offset),
              av.data.begin() + static_cast<ptrdiff_t>(offset + len), out.data.begin());
    const uint32_t ia = a.id;
    return t.make_node(std::move(out), [ia, offset, len](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        Array& ga = tp.grad_mut(ia);
        for (size_t i = 0; i < len; ++i) ga[offset + i] += g[i];
    }, "slice");
}

Var sigmoid(Var a) {
    Tape& t = *a.tape;
    Array out = t.val(a);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    const uint32_t ia = a.id;
    return t.make_node(std::move(out), [ia](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        const Array& s = tp.val_at(self);
        Array& ga = tp.grad_mut(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s[i] * (1.0 - s[i]);
    }, "sigmoid");
}

Var tanh_op(Var a) {
    Tape& t = *a.tape;
    Array out = t.val(a);
    for (double& v : out.data) v = std::tanh(v);
    const uint32_t ia = a.id;
    return t.make_node(std::move(out), [ia](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        const Array& y = tp.val_at(self);
        Array& ga = tp.grad_mut(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
    }, "tanh");
}

Var log_op(Var a) {
    Tape& t = *a.tape;
    Array out = t.val(a);
    for (double& v : out.data) {
        if (v <= 0.0) throw NumericError("log of non-positive value");
        v = std::log(v);
    }
    const uint32_t ia = a.id;
    return t.make_node(std::move(out), [ia](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        const Array& x = tp.val_at(ia);
        Array& ga = tp.grad_mut(ia);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / x[i];
    }, "log");
}

Var sum(Var a) {
    Tape& t = *a.tape;
    double acc = 0.0;
    for (double v : t.val(a).data) acc += v;
    const uint32_t ia = a.id;
    return t.make_node(Array::scalar(acc), [ia](Tape& tp, uint32_t self) {
        const double g = tp.grad_mut(self)[0];
        Array& ga = tp.grad_mut(ia);
        for (double& v : ga.data) v += g;
    }, "sum");
}

Var mean(Var a) {
    size_t n = a.tape->val(a).size();
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var softmax(Var a) {
    std::vector<char> mask(a.tape->val(a).size(), 1);
    return masked_softmax(a, std::move(mask));
}

Var masked_softmax(Var a, std::vector<char> mask) {
    Tape& t = *a.tape;
    const Array& av = t.val(a);
    if (mask.size() != av.size()) throw NumericError("masked_softmax: mask size mismatch");
    double hi = -std::numeric_limits<double>::infinity();
    size_t valid = 0;
    for (size_t i = 0; i < av.size(); ++i) {
        if (!mask[i]) continue;
        ++valid;
        hi = std::max(hi, av[i]);
    }
    if (valid == 0) throw NumericError("masked_softmax: all positions masked");
    Array out(av.shape);
    double z = 0.0;
    for (size_t i = 0; i < av.size(); ++i) {
        if (!mask[i]) continue;
        out[i] = std::exp(av[i] - hi);
        z += out[i];
    }
    for (size_t i = 0; i < av.size(); ++i) {
        if (mask[i]) out[i] /= z;
    }
    const uint32_t ia = a.id;
    return t.make_node(std::move(out), [ia, mask](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        const Array& y = tp.val_at(self);
        Array& ga = tp.grad_mut(ia);
        double dot = 0.0;
        for (size_t i = 0; i < g.size(); ++i) {
            if (mask[i]) dot += g[i] * y[i];
        }
        for (size_t i = 0; i < g.size(); ++i) {
            if (mask[i]) ga[i] += y[i] * (g[i] - dot);
        }
    }, "masked_softmax");
}

Var pick_log(Var a, size_t idx) {
    Tape& t = *a.tape;
    const Array& av = t.val(a);
    if (idx >= av.size()) throw NumericError("pick_log: index out of range");
    if (av[idx] <= 0.0) throw NumericError("pick_log: non-positive probability");
    const uint32_t ia = a.id;
    return t.make_node(Array::scalar(std::log(av[idx])), [ia, idx](Tape& tp, uint32_t self) {
        const double g = tp.grad_mut(self)[0];
        tp.grad_mut(ia)[idx] += g / tp.val_at(ia)[idx];
    }, "pick_log");
}

Var weighted_sum(const std::vector<Var>& keys, Var weights) {
    if (keys.empty()) throw NumericError("weighted_sum: empty keys");
    Tape& t = *weights.tape;
    const Array& wv = t.val(weights);
    if (wv.size() != keys.size()) throw NumericError("weighted_sum: weight count mismatch");
    const size_t d = t.val(keys[0]).size();
    Array out({d});
    std::vector<uint32_t> ids;
    for (size_t k = 0; k < keys.size(); ++k) {
        same_tape(weights, keys[k]);
        const Array& kv = t.val(keys[k]);
        if (kv.size() != d) throw NumericError("weighted_sum: key shape mismatch");
        for (size_t i = 0; i < d; ++i) out[i] += wv[k] * kv[i];
        ids.push_back(keys[k].id);
    }
    const uint32_t iw = weights.id;
    return t.make_node(std::move(out), [ids, iw, d](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        const Array& w = tp.val_at(iw);
        Array& gw = tp.grad_mut(iw);
        for (size_t k = 0; k < ids.size(); ++k) {
            const Array& kv = tp.val_at(ids[k]);
            Array& gk = tp.grad_mut(ids[k]);
            double dot = 0.0;
            for (size_t i = 0; i < d; ++i) {
                gk[i] += w[k] * g[i];
                dot += g[i] * kv[i];
            }
            gw[k] += dot;
        }
    }, "weighted_sum");
}

Var stack_rows(const std::vector<Var>& rows) {
    if (rows.empty()) throw NumericError("stack_rows: empty input");
    Tape& t = *rows[0].tape;
    const size_t v = t.val(rows[0]).size();
    Array out({rows.size(), v});
    std::vector<uint32_t> ids;
    for (size_t r = 0; r < rows.size(); ++r) {
        same_tape(rows[0], rows[r]);
        const Array& rv = t.val(rows[r]);
        if (rv.size() != v) throw NumericError("stack_rows: row length mismatch");
        std::copy(rv.data.begin(), rv.data.end(), out.data.begin() + static_cast<ptrdiff_t>(r * v));
        ids.push_back(rows[r].id);
    }
    return t.make_node(std::move(out), [ids, v](Tape& tp, uint32_t self) {
        const Array& g = tp.grad_mut(self);
        for (size_t r = 0; r < ids.size(); ++r) {
            Array& gr = tp.grad_mut(ids[r]);
            for (size_t i = 0; i < v; ++i) gr[i] += g[r * v + i];
        }
    }, "stack_rows");
}

Var cross_entropy(Var probs, const std::vector<int>& targets, int exclude_id) {
    Tape& t = *probs.tape;
    const Array& p = t.val(probs);
    if (p.shape.size() != 2 || p.rows() != targets.size()) {
        throw NumericError("cross_entropy: probs must be [T x V] with T == |targets|");
    }
    const size_t rows = p.rows(), v = p.cols();
    std::vector<size_t> active;
    double loss = 0.0;
    for (size_t r = 0; r < rows; ++r) {
        int y = targets[r];
        if (y == exclude_id) continue;
        if (y < 0 || static_cast<size_t>(y) >= v) {
            throw NumericError("cross_entropy: target id " + std::to_string(y) + " out of range");
        }
        double row_sum = 0.0;
        for (size_t c = 0; c < v; ++c) row_sum += p.at(r, c);
        if (std::abs(row_sum - 1.0) > 1e-6) {
            throw NumericError("cross_entropy: probability row does not sum to 1");
        }
        double py = p.at(r, static_cast<size_t>(y));
        if (py <= 0.0) throw NumericError("cross_entropy: zero probability at target");
        loss -= std::log(py);
        active.push_back(r);
    }
    if (active.empty()) throw NumericError("cross_entropy: no unexcluded targets");
    const double inv_m = 1.0 / static_cast<double>(active.size());
    loss *= inv_m;
    const uint32_t ip = probs.id;
    std::vector<int> tgt = targets;
    return t.make_node(Array::scalar(loss), [ip, tgt, active, inv_m, v](Tape& tp, uint32_t self) {
        const double g = tp.grad_mut(self)[0];
        const Array& p2 = tp.val_at(ip);
        Array& gp = tp.grad_mut(ip);
        for (size_t r : active) {
            size_t y = static_cast<size_t>(tgt[r]);
            gp.data[r * v + y] -= g * inv_m / p2.data[r * v + y];
        }
    }, "cross_entropy");
}

} // namespace reat::nn
