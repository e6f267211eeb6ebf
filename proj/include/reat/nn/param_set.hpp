#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "reat/nn/array.hpp"
#include "reat/rng.hpp"

namespace reat::nn {

// One trainable array plus its gradient slot and Adam moment estimates.
struct Param {
    Array value;
    Array grad;
    Array adam_m;
    Array adam_v;
};

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Named map of trainable parameters. Iteration order is the lexicographic
// name order of std::map, which keeps every pass over the set (updates,
// checkpoints, norm computations) deterministic.
class ParameterSet {
public:
    // Creates a parameter initialized uniformly in [-range, range].
    Param& create(const std::string& name, Shape shape, Rng& rng, double range = 0.08);

    // Creates a zero-initialized parameter.
    Param& create_zeros(const std::string& name, Shape shape);

    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) > 0; }

    size_t count() const { return params_.size(); }
    size_t value_count() const;

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

    void zero_grad();

    // L2 norm over all gradient slots.
    double grad_norm() const;

    // Scales all gradients so the global norm does not exceed max_norm.
    void clip_grad_norm(double max_norm);

    // Standard Adam update with bias correction; zeroes gradients afterward.
    // Throws NumericError("non-finite gradient in <name>") on bad gradients.
    void adam_step(const AdamConfig& cfg = {});

    uint64_t adam_t() const { return adam_t_; }
    void restore_adam_t(uint64_t t) { adam_t_ = t; }

    // Copies values and optimizer state from another set with identical layout.
    void copy_from(const ParameterSet& other);

    bool same_layout(const ParameterSet& other) const;

private:
    std::map<std::string, Param> params_;
    uint64_t adam_t_ = 0;
};

// Versioned binary checkpoint holding one or more named parameter sets
// ("generator", "discriminator", ...). Little-endian, magic "REATCKPT1".
struct Checkpoint {
    std::vector<std::pair<std::string, ParameterSet>> sets;

    void add(const std::string& tag, const ParameterSet& ps);
    bool has(const std::string& tag) const;

    // Copies the tagged set into `dst`, validating that every name and shape
    // matches the model the caller constructed. Throws ConfigError otherwise.
    void load_into(const std::string& tag, ParameterSet& dst) const;

    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

} // namespace reat::nn
