#include "reat/run_config.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace reat {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

size_t parse_size(const std::string& key, const std::string& v) {
    try {
        long long n = std::stoll(v);
        if (n < 0) throw ConfigError(key + " must be non-negative");
        return static_cast<size_t>(n);
    } catch (const std::logic_error&) {
        throw ConfigError("cannot parse integer for " + key + ": '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        return std::stod(v);
    } catch (const std::logic_error&) {
        throw ConfigError("cannot parse number for " + key + ": '" + v + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("cannot parse boolean for " + key + ": '" + v + "'");
}

} // namespace

void RunConfig::apply_profile(const std::string& name) {
    if (name == "paper") {
        profile = "paper";
        vocab_size = 30000;
        emb_dim = 300;
        hidden = 500;
        att_hidden = 500;
        mlp_hidden = 500;
        batch_size = 64;
        lr = 1e-4;
        beam = 5;
        retrieval_k = 10;
        n_candidates = 2;
        n_valid = 10000;
        n_test = 10000;
    } else if (name == "desk") {
        profile = "desk";
        vocab_size = 2000;
        emb_dim = 32;
        hidden = 64;
        att_hidden = 64;
        mlp_hidden = 64;
        batch_size = 64;
        lr = 1e-4;
        beam = 5;
        retrieval_k = 10;
        n_candidates = 2;
        n_valid = 10;
        n_test = 10;
    } else {
        throw ConfigError("invalid profile: '" + name + "' (expected 'paper' or 'desk')");
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "profile") apply_profile(v);
    else if (key == "seed") seed = parse_size(key, v);
    else if (key == "lowercase") lowercase = parse_bool(key, v);
    else if (key == "max_len") max_len = parse_size(key, v);
    else if (key == "min_response_len") min_response_len = parse_size(key, v);
    else if (key == "vocab_size") vocab_size = parse_size(key, v);
    else if (key == "n_valid") n_valid = parse_size(key, v);
    else if (key == "n_test") n_test = parse_size(key, v);
    else if (key == "retrieval_k") retrieval_k = parse_size(key, v);
    else if (key == "n_candidates") n_candidates = parse_size(key, v);
    else if (key == "lambda") lambda = parse_double(key, v);
    else if (key == "emb_dim") emb_dim = parse_size(key, v);
    else if (key == "hidden") hidden = parse_size(key, v);
    else if (key == "att_hidden") att_hidden = parse_size(key, v);
    else if (key == "mlp_hidden") mlp_hidden = parse_size(key, v);
    else if (key == "beam") beam = parse_size(key, v);
    else if (key == "max_decode_len") max_decode_len = parse_size(key, v);
    else if (key == "batch_size") batch_size = parse_size(key, v);
    else if (key == "lr") lr = parse_double(key, v);
    else if (key == "g_steps") g_steps = parse_size(key, v);
    else if (key == "d_steps") d_steps = parse_size(key, v);
    else if (key == "epochs") epochs = parse_size(key, v);
    else if (key == "pretrain_epochs") pretrain_epochs = parse_size(key, v);
    else if (key == "d_pretrain_epochs") d_pretrain_epochs = parse_size(key, v);
    else if (key == "patience") patience = parse_size(key, v);
    else if (key == "clip_norm") clip_norm = parse_double(key, v);
    else if (key == "reward_baseline") reward_baseline = parse_bool(key, v);
    else throw ConfigError("unknown config key: '" + key + "'");
}

namespace {

void apply_assignment(RunConfig& cfg, const std::string& text, const std::string& where) {
    size_t eq = text.find('=');
    if (eq == std::string::npos) {
        throw ConfigError(where + ": expected key=value, got '" + text + "'");
    }
    cfg.set(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
}

} // namespace

RunConfig RunConfig::from_file(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream is(path);
    if (!is) throw MissingInputError("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        entries.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }

    RunConfig cfg;
    // Profile first so explicit keys in the same file override its presets.
    for (const auto& [k, v] : entries) {
        if (k == "profile") cfg.apply_profile(v);
    }
    for (const auto& [k, v] : entries) {
        if (k != "profile") cfg.set(k, v);
    }
    for (const std::string& o : overrides) apply_assignment(cfg, o, "--set");
    return cfg;
}

RunConfig RunConfig::from_overrides(const std::vector<std::string>& overrides) {
    RunConfig cfg;
    for (const std::string& o : overrides) apply_assignment(cfg, o, "--set");
    return cfg;
}

GeneratorConfig RunConfig::generator_config() const {
    GeneratorConfig g;
    g.vocab_size = vocab_size;
    g.emb_dim = emb_dim;
    g.hidden = hidden;
    g.att_hidden = att_hidden;
    g.n_candidates = n_candidates;
    g.beam = beam;
    g.max_decode_len = max_decode_len;
    return g;
}

DiscriminatorConfig RunConfig::discriminator_config(bool use_candidates) const {
    DiscriminatorConfig d;
    d.vocab_size = vocab_size;
    d.emb_dim = emb_dim;
    d.hidden = hidden;
    d.mlp_hidden = mlp_hidden;
    d.n_candidates = n_candidates;
    d.use_candidates = use_candidates;
    return d;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig t;
    t.batch_size = batch_size;
    t.lr = lr;
    t.g_steps = g_steps;
    t.d_steps = d_steps;
    t.epochs = epochs;
    t.pretrain_epochs = pretrain_epochs;
    t.d_pretrain_epochs = d_pretrain_epochs;
    t.patience = patience;
    t.seed = seed;
    t.clip_norm = clip_norm;
    t.reward_baseline = reward_baseline;
    return t;
}

std::string RunConfig::to_string() const {
    std::ostringstream os;
    os << "profile = " << profile << "\n"
       << "seed = " << seed << "\n"
       << "lowercase = " << (lowercase ? "true" : "false") << "\n"
       << "max_len = " << max_len << "\n"
       << "min_response_len = " << min_response_len << "\n"
       << "vocab_size = " << vocab_size << "\n"
       << "n_valid = " << n_valid << "\n"
       << "n_test = " << n_test << "\n"
       << "retrieval_k = " << retrieval_k << "\n"
       << "n_candidates = " << n_candidates << "\n"
       << "lambda = " << lambda << "\n"
       << "emb_dim = " << emb_dim << "\n"
       << "hidden = " << hidden << "\n"
       << "att_hidden = " << att_hidden << "\n"
       << "mlp_hidden = " << mlp_hidden << "\n"
       << "beam = " << beam << "\n"
       << "max_decode_len = " << max_decode_len << "\n"
       << "batch_size = " << batch_size << "\n"
       << "lr = " << lr << "\n"
       << "g_steps = " << g_steps << "\n"
       << "d_steps = " << d_steps << "\n"
       << "epochs = " << epochs << "\n"
       << "pretrain_epochs = " << pretrain_epochs << "\n"
       << "d_pretrain_epochs = " << d_pretrain_epochs << "\n"
       << "patience = " << patience << "\n"
       << "clip_norm = " << clip_norm << "\n"
       << "reward_baseline = " << (reward_baseline ? "true" : "false") << "\n";
    return os.str();
}

} // namespace reat
