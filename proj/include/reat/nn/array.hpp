#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "reat/errors.hpp"

namespace reat::nn {

using Shape = std::vector<size_t>;

inline size_t shape_size(const Shape& s) {
    size_t n = 1;
    for (size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Dense row-major array of doubles. Small and value-semantic; everything in
// the numeric core passes these around by value or const reference.
struct Array {
    Shape shape;
    std::vector<double> data;

    Array() = default;
    Array(Shape s, double fill = 0.0) : shape(std::move(s)), data(shape_size(shape), fill) {}

    static Array zeros(Shape s) { return Array(std::move(s)); }

    static Array scalar(double v) {
        Array a({1});
        a.data[0] = v;
        return a;
    }

    static Array from(std::vector<double> values) {
        Array a;
        a.shape = {values.size()};
        a.data = std::move(values);
        return a;
    }

    size_t size() const { return data.size(); }
    size_t rows() const { return shape.empty() ? 0 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    double& operator[](size_t i) { return data[i]; }
    double operator[](size_t i) const { return data[i]; }

    double& at(size_t r, size_t c) { return data[r * cols() + c]; }
    double at(size_t r, size_t c) const { return data[r * cols() + c]; }

    bool same_shape(const Array& o) const { return shape == o.shape; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    void check_finite(const std::string& what) const {
        for (double v : data) {
            if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
        }
    }
};

} // namespace reat::nn
