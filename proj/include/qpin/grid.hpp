#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "qpin/error.hpp"

namespace qpin {

/// n equally spaced points from lo to hi inclusive.
class UniformGrid {
public:
    UniformGrid(double lo, double hi, std::size_t n) : lo_(lo), hi_(hi), n_(n) {
        if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
            throw ConfigError("UniformGrid: need finite lo < hi");
        }
        if (n < 2) throw ConfigError("UniformGrid: need at least two points");
    }

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    std::size_t size() const noexcept { return n_; }
    double step() const noexcept { return (hi_ - lo_) / static_cast<double>(n_ - 1); }
    double at(std::size_t i) const noexcept {
        return i + 1 == n_ ? hi_ : lo_ + step() * static_cast<double>(i);
    }

private:
    double lo_;
    double hi_;
    std::size_t n_;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    const UniformGrid g(lo, hi, n);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = g.at(i);
    return out;
}

/// n points equally spaced in log between lo > 0 and hi.
inline std::vector<double> logspace(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0)) throw ConfigError("logspace: lo must be positive");
    std::vector<double> out = linspace(std::log(lo), std::log(hi), n);
    for (auto& v : out) v = std::exp(v);
    out.front() = lo;
    out.back() = hi;
    return out;
}

}  // namespace qpin
