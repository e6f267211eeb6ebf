#include "reat/nn/param_set.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "reat/errors.hpp"

namespace reat::nn {

Param& ParameterSet::create(const std::string& name, Shape shape, Rng& rng, double range) {
    if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Param p;
    p.value = Array(shape);
    for (double& v : p.value.data) v = rng.uniform(-range, range);
    p.grad = Array(shape);
    p.adam_m = Array(shape);
    p.adam_v = Array(std::move(shape));
    return params_.emplace(name, std::move(p)).first->second;
}

Param& ParameterSet::create_zeros(const std::string& name, Shape shape) {
    if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Param p;
    p.value = Array(shape);
    p.grad = Array(shape);
    p.adam_m = Array(shape);
    p.adam_v = Array(std::move(shape));
    return params_.emplace(name, std::move(p)).first->second;
}

Param& ParameterSet::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

const Param& ParameterSet::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second;
}

size_t ParameterSet::value_count() const {
    size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
}

void ParameterSet::zero_grad() {
    for (auto& [name, p] : params_) p.grad.fill(0.0);
}

double ParameterSet::grad_norm() const {
    double sq = 0.0;
    for (const auto& [name, p] : params_)
        for (double g : p.grad.data) sq += g * g;
    return std::sqrt(sq);
}

void ParameterSet::clip_grad_norm(double max_norm) {
    double norm = grad_norm();
    if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
    if (norm <= max_norm || norm == 0.0) return;
    double scale = max_norm / norm;
    for (auto& [name, p] : params_)
        for (double& g : p.grad.data) g *= scale;
}

void ParameterSet::adam_step(const AdamConfig& cfg) {
    for (const auto& [name, p] : params_)
        for (double g : p.grad.data)
            if (!std::isfinite(g)) throw NumericError("non-finite gradient in " + name);

    ++adam_t_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam_t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam_t_));
    for (auto& [name, p] : params_) {
        for (size_t i = 0; i < p.value.size(); ++i) {
            double g = p.grad[i];
            p.adam_m[i] = cfg.beta1 * p.adam_m[i] + (1.0 - cfg.beta1) * g;
            p.adam_v[i] = cfg.beta2 * p.adam_v[i] + (1.0 - cfg.beta2) * g * g;
            double m_hat = p.adam_m[i] / bc1;
            double v_hat = p.adam_v[i] / bc2;
            p.value[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
        }
        p.grad.fill(0.0);
    }
}

void ParameterSet::copy_from(const ParameterSet& other) {
    if (!same_layout(other)) throw ConfigError("parameter set layout mismatch in copy_from");
    auto it = params_.begin();
    for (const auto& [name, p] : other.params_) {
        it->second = p;
        ++it;
    }
    adam_t_ = other.adam_t_;
}

bool ParameterSet::same_layout(const ParameterSet& other) const {
    if (params_.size() != other.params_.size()) return false;
    auto a = params_.begin();
    auto b = other.params_.begin();
    for (; a != params_.end(); ++a, ++b) {
        if (a->first != b->first || a->second.value.shape != b->second.value.shape) return false;
    }
    return true;
}

namespace {

constexpr char kMagic[9] = "REATCKPT";  // followed by '1' version byte

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    write_u64(os, v);
}

void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

double read_f64(std::istream& is) {
    uint64_t v = read_u64(is);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
}

std::string read_str(std::istream& is) {
    uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    return s;
}

void write_array(std::ostream& os, const Array& a) {
    write_u32(os, static_cast<uint32_t>(a.shape.size()));
    for (size_t d : a.shape) write_u64(os, d);
    for (double v : a.data) write_f64(os, v);
}

Array read_array(std::istream& is) {
    uint32_t ndim = read_u32(is);
    Shape shape(ndim);
    for (auto& d : shape) d = read_u64(is);
    Array a(shape);
    for (double& v : a.data) v = read_f64(is);
    return a;
}

} // namespace

void Checkpoint::add(const std::string& tag, const ParameterSet& ps) {
    sets.emplace_back(tag, ps);
}

bool Checkpoint::has(const std::string& tag) const {
    for (const auto& [t, ps] : sets)
        if (t == tag) return true;
    return false;
}

void Checkpoint::load_into(const std::string& tag, ParameterSet& dst) const {
    for (const auto& [t, ps] : sets) {
        if (t != tag) continue;
        if (!dst.same_layout(ps)) {
            throw ConfigError("checkpoint set '" + tag + "' does not match the model configuration");
        }
        dst.copy_from(ps);
        return;
    }
    throw ConfigError("checkpoint has no parameter set tagged '" + tag + "'");
}

void Checkpoint::save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw MissingInputError("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 8);
    os.put('1');
    write_u32(os, static_cast<uint32_t>(sets.size()));
    for (const auto& [tag, ps] : sets) {
        write_str(os, tag);
        write_u64(os, ps.adam_t());
        write_u32(os, static_cast<uint32_t>(ps.count()));
        for (const auto& [name, p] : ps) {
            write_str(os, name);
            write_array(os, p.value);
            write_array(os, p.adam_m);
            write_array(os, p.adam_v);
        }
    }
    if (!os) throw MissingInputError("failed writing checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingInputError("cannot open checkpoint: " + path);
    char magic[9] = {};
    is.read(magic, 9);
    if (!is || std::memcmp(magic, "REATCKPT1", 9) != 0) {
        throw ConfigError("bad checkpoint magic in " + path);
    }
    Checkpoint ck;
    uint32_t n_sets = read_u32(is);
    for (uint32_t s = 0; s < n_sets; ++s) {
        std::string tag = read_str(is);
        uint64_t adam_t = read_u64(is);
        uint32_t n_params = read_u32(is);
        ParameterSet ps;
        for (uint32_t i = 0; i < n_params; ++i) {
            std::string name = read_str(is);
            Array value = read_array(is);
            Array m = read_array(is);
            Array v = read_array(is);
            Param& p = ps.create_zeros(name, value.shape);
            p.value = std::move(value);
            p.adam_m = std::move(m);
            p.adam_v = std::move(v);
        }
        if (!is) throw ConfigError("truncated checkpoint: " + path);
        ps.restore_adam_t(adam_t);
        ck.sets.emplace_back(std::move(tag), std::move(ps));
    }
    return ck;
}

} // namespace reat::nn
