#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace reat {

// Deterministic random source. mt19937_64 output is fixed by the standard and
// all derived draws below use plain arithmetic, so streams are reproducible
// across compilers and standard libraries (std::shuffle and the distribution
// classes are not).
class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform index in [0, n). n must be > 0.
    size_t index(size_t n) { return static_cast<size_t>(eng_() % n); }

    // Fisher-Yates permutation of 0..n-1.
    std::vector<size_t> permutation(size_t n) {
        std::vector<size_t> p(n);
        for (size_t i = 0; i < n; ++i) p[i] = i;
        for (size_t i = n; i > 1; --i) {
            size_t j = index(i);
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

} // namespace reat
