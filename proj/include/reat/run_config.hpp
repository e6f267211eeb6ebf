#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "reat/discriminator.hpp"
#include "reat/generator.hpp"
#include "reat/training.hpp"

namespace reat {

// Every knob of the pipeline in one place. The "paper" profile pins the
// full-scale reference settings; "desk" shrinks model dimensions only so
// everything runs on one CPU core.
struct RunConfig {
    std::string profile = "desk";
    uint64_t seed = 7;

    // corpus
    bool lowercase = true;
    size_t max_len = 50;
    size_t min_response_len = 5;
    size_t vocab_size = 2000;
    size_t n_valid = 10;
    size_t n_test = 10;

    // retrieval
    size_t retrieval_k = 10;
    size_t n_candidates = 2;
    double lambda = 0.5;

    // model dims
    size_t emb_dim = 32;
    size_t hidden = 64;
    size_t att_hidden = 64;
    size_t mlp_hidden = 64;

    // decoding
    size_t beam = 5;
    size_t max_decode_len = 30;

    // training
    size_t batch_size = 64;
    double lr = 1e-4;
    size_t g_steps = 10;
    size_t d_steps = 20;
    size_t epochs = 5;
    size_t pretrain_epochs = 50;
    size_t d_pretrain_epochs = 3;
    size_t patience = 3;
    double clip_norm = 5.0;
    bool reward_baseline = false;

    // Applies profile presets ("paper" or "desk"). Throws ConfigError on an
    // unknown name.
    void apply_profile(const std::string& name);

    // Applies one "key = value" assignment. Throws ConfigError on unknown
    // keys or unparsable values.
    void set(const std::string& key, const std::string& value);

    // Reads a key-value file ('#' comments, blank lines allowed). A profile
    // key is applied before the other keys in the file.
    static RunConfig from_file(const std::string& path, const std::vector<std::string>& overrides = {});

    // Defaults plus overrides, no file.
    static RunConfig from_overrides(const std::vector<std::string>& overrides);

    GeneratorConfig generator_config() const;
    DiscriminatorConfig discriminator_config(bool use_candidates = true) const;
    TrainConfig train_config() const;

    std::string to_string() const;
};

} // namespace reat
