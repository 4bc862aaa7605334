#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>

#include "qpin/error.hpp"
#include "qpin/roots.hpp"

namespace qpin {

/// Probability threshold strictly inside (0, 1).
class Alpha {
public:
    explicit Alpha(double value) : value_(value) {
        if (!(value > 0.0 && value < 1.0)) {
            throw DomainError("alpha must lie in the open interval (0,1), got " +
                              std::to_string(value));
        }
    }

    double value() const noexcept { return value_; }
    /// C = alpha / (1 - alpha).
    double odds() const noexcept { return value_ / (1.0 - value_); }

private:
    double value_;
};

inline double std_normal_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double std_normal_cdf(double x) {
    if (!std::isfinite(x)) throw DomainError("std_normal_cdf: argument must be finite");
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

namespace detail {

// Acklam's rational approximation (relative error ~1e-9).
inline double acklam_quantile(double p) noexcept {
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

/// Inverse of std_normal_cdf: rational initial guess polished by Halley steps.
inline double std_normal_quantile(Alpha alpha) {
    const double p = alpha.value();
    if (p == 0.5) return 0.0;
    double x = detail::acklam_quantile(p);
    for (int i = 0; i < 3; ++i) {
        const double err = std_normal_cdf(x) - p;
        const double u = err / std_normal_pdf(x);
        const double step = u / (1.0 + 0.5 * x * u);
        x -= step;
        if (std::abs(step) <= 1e-17 * std::max(1.0, std::abs(x))) break;
    }
    return x;
}

inline double log_gamma(double p) {
    if (!(p > 0.0) || !std::isfinite(p)) {
        throw DomainError("log_gamma: argument must be positive and finite");
    }
    return std::lgamma(p);
}

/*
 * Regularized lower incomplete gamma E_p(x), the CDF of Ga(p, 1).
 * Series for x < p + 1, Lentz continued fraction for the complement otherwise.
 */
inline double reg_gamma_cdf(double p, double x) {
    if (!(p > 0.0) || !std::isfinite(p)) {
        throw DomainError("reg_gamma_cdf: shape must be positive and finite");
    }
    if (!(x >= 0.0)) throw DomainError("reg_gamma_cdf: argument must be nonnegative");
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return 1.0;

    constexpr double rel_tol = 1e-15;
    constexpr int max_terms = 100000;
    const double log_prefactor = p * std::log(x) - x - std::lgamma(p);

    if (x < p + 1.0) {
        double term = 1.0 / p;
        double sum = term;
        for (int n = 1; n < max_terms; ++n) {
            term *= x / (p + n);
            sum += term;
            if (std::abs(term) < std::abs(sum) * rel_tol) {
                return std::min(1.0, std::exp(log_prefactor) * sum);
            }
        }
        throw NumericFailure("reg_gamma_cdf: series did not converge");
    }

    constexpr double tiny = 1e-300;
    double b = x + 1.0 - p;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < max_terms; ++i) {
        const double an = -i * (i - p);
        b += 2.0;
        d = an * d + b;
        if (std::abs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::abs(delta - 1.0) < rel_tol) {
            return std::max(0.0, 1.0 - std::exp(log_prefactor) * h);
        }
    }
    throw NumericFailure("reg_gamma_cdf: continued fraction did not converge");
}

struct PStarResult {
    double p_star = 0.0;
    double residual = 0.0;  // |E_p(a) - alpha|
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
    std::size_t iterations = 0;  // doublings + root-finder steps
};

struct PStarOptions {
    double width_tol = 1e-13;
    double residual_tol = 1e-12;
    std::size_t max_doublings = 200;
};

/*
 * Shape p solving E_p(a) = alpha. E_p(a) falls strictly from 1 (p -> 0) to 0
 * (p -> inf); Markov gives 1 - E_p(a) <= p/a, so any p < a(1 - alpha) sits
 * below the root.
 */
inline PStarResult solve_p_star(Alpha alpha, double a, const PStarOptions& opts = {}) {
    if (!(a > 0.0) || !std::isfinite(a)) {
        throw DomainError("p_star: a must be positive and finite");
    }
    const double target = alpha.value();
    auto g = [&](double p) { return reg_gamma_cdf(p, a) - target; };

    double lo = std::min(1e-8, 0.5 * a * (1.0 - target));
    double hi = 1.0;
    std::size_t doublings = 0;
    while (g(hi) >= 0.0) {
        if (++doublings > opts.max_doublings) {
            throw NumericFailure("p_star: no upper bracket within the doubling budget", hi);
        }
        lo = hi;
        hi *= 2.0;
    }
    if (g(lo) <= 0.0) {
        throw NumericFailure("p_star: lower bracket does not hold", lo);
    }
    const double bracket_lo = lo;
    const double bracket_hi = hi;
    const RootResult r = brent_root(g, lo, hi, opts.width_tol, 0.1 * opts.residual_tol);
    const double residual = std::abs(g(r.root));
    if (residual > opts.residual_tol) {
        throw NumericFailure("p_star: residual above tolerance", r.root);
    }
    return {r.root, residual, bracket_lo, bracket_hi, doublings + r.iterations};
}

inline double p_star(Alpha alpha, double a) { return solve_p_star(alpha, a).p_star; }

/// Mean of the Gaussian law pinned at the alpha-quantile b + t: b - Phi^{-1}(alpha).
inline double m_star(Alpha alpha, double b) {
    if (!std::isfinite(b)) throw DomainError("m_star: b must be finite");
    return b - std_normal_quantile(alpha);
}

}  // namespace qpin
