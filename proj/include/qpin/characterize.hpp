#pragma once

// Convolution kernels whose nonnegative fixed points pin the quantiles.
//
// Additive (location side, b = 0):
//   H(x) = e^{m^2/2} / (1 + C) * abs_C(x) * e^{-(x + m)^2 / 2},  m = -Phi^{-1}(alpha)
// Multiplicative (scale side, a = 1):
//   K(y) = e / (1 + C) * abs_C(1 - y) * e^{-y} * y^{p* - 1},     E_{p*}(1) = alpha
// with C = alpha / (1 - alpha) and abs_C(x) = -C x for x < 0, x for x > 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include "qpin/error.hpp"
#include "qpin/grid.hpp"
#include "qpin/quadrature.hpp"
#include "qpin/roots.hpp"
#include "qpin/specfun.hpp"

namespace qpin {

inline double abs_c(double c, double x) noexcept { return x < 0.0 ? -c * x : (x > 0.0 ? x : 0.0); }

class AdditiveKernel {
public:
    explicit AdditiveKernel(Alpha alpha)
        : alpha_(alpha), c_(alpha.odds()), m_(m_star(alpha, 0.0)) {}

    Alpha alpha() const noexcept { return alpha_; }
    double odds() const noexcept { return c_; }
    /// Location of the nontrivial root of the MGF equation.
    double m() const noexcept { return m_; }

    double density(double x) const noexcept {
        // e^{m^2/2} e^{-(x+m)^2/2} = e^{-x^2/2 - m x}
        return abs_c(c_, x) * std::exp(-0.5 * x * x - m_ * x) / (1.0 + c_);
    }

private:
    Alpha alpha_;
    double c_;
    double m_;
};

class MultiplicativeKernel {
public:
    explicit MultiplicativeKernel(Alpha alpha)
        : alpha_(alpha), c_(alpha.odds()), p_star_(qpin::p_star(alpha, 1.0)) {}

    Alpha alpha() const noexcept { return alpha_; }
    double odds() const noexcept { return c_; }
    double p_star() const noexcept { return p_star_; }
    /// Location 1 - p* of the nontrivial root of the Mellin equation.
    double root() const noexcept { return 1.0 - p_star_; }

    double density(double y) const {
        if (!(y > 0.0)) throw DomainError("multiplicative kernel: y must be positive");
        const double w = abs_c(c_, 1.0 - y);
        if (w == 0.0) return 0.0;
        return w * std::exp(1.0 - y + (p_star_ - 1.0) * std::log(y)) / (1.0 + c_);
    }

    /// K(e^z) e^z: the kernel as a probability density in z = log y.
    double log_density(double z) const noexcept {
        const double y = std::exp(z);
        const double w = abs_c(c_, 1.0 - y);
        if (w == 0.0 || std::isinf(y)) return 0.0;
        return w * std::exp(1.0 - y + p_star_ * z) / (1.0 + c_);
    }

private:
    Alpha alpha_;
    double c_;
    double p_star_;
};

inline double additive_kernel_density(const AdditiveKernel& k, double x) noexcept {
    return k.density(x);
}

inline double multiplicative_kernel_density(const MultiplicativeKernel& k, double y) {
    return k.density(y);
}

/// MGF of H minus one: sqrt(2 pi) e^{(s-m)^2/2} (s - m) (Phi(s - m) - alpha).
/// Computed directly so that roots keep their relative accuracy.
inline double additive_kernel_mgf_excess(const AdditiveKernel& k, double s) {
    if (!std::isfinite(s)) throw DomainError("additive_kernel_mgf: s must be finite");
    const double d = s - k.m();
    return std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * d * d) * d *
           (std_normal_cdf(d) - k.alpha().value());
}

inline double additive_kernel_mgf(const AdditiveKernel& k, double s) {
    return 1.0 + additive_kernel_mgf_excess(k, s);
}

/// Mellin transform of K minus one: e Gamma(p*+u) (p*+u-1) (alpha - E_{p*+u}(1)).
inline double multiplicative_kernel_mellin_excess(const MultiplicativeKernel& k, double u) {
    const double q = k.p_star() + u;
    if (!(q > 0.0) || !std::isfinite(u)) {
        throw DomainError("multiplicative_kernel_mellin: need u > -p* (u = " + std::to_string(u) + ")");
    }
    if (u == 0.0) return 0.0;
    return std::numbers::e * std::tgamma(q) * (q - 1.0) * (k.alpha().value() - reg_gamma_cdf(q, 1.0));
}

inline double multiplicative_kernel_mellin(const MultiplicativeKernel& k, double u) {
    return 1.0 + multiplicative_kernel_mellin_excess(k, u);
}

namespace detail {

inline QuadOptions kernel_quad_options() {
    QuadOptions opts;
    opts.abs_tol = 1e-14;
    opts.rel_tol = 1e-13;
    return opts;
}

}  // namespace detail

/// Integral of e^{sx} H(x) by adaptive quadrature on a +-15 window about the tilted centre.
inline double additive_kernel_mgf_quadrature(const AdditiveKernel& k, double s) {
    const double centre = s - k.m();  // e^{sx} H(x) is Gaussian-shaped about s - m
    const double lo = std::min(centre, 0.0) - 15.0;
    const double hi = std::max(centre, 0.0) + 15.0;
    auto f = [&](double x) {
        const double w = abs_c(k.odds(), x);
        if (w == 0.0) return 0.0;
        return w * std::exp(s * x - 0.5 * x * x - k.m() * x) / (1.0 + k.odds());
    };
    const auto opts = detail::kernel_quad_options();
    return integrate(f, Interval(lo, 0.0), opts).value + integrate(f, Interval(0.0, hi), opts).value;
}

/// Integral of y^u K(y) over (0, p* + u + 60] by adaptive quadrature.
inline double multiplicative_kernel_mellin_quadrature(const MultiplicativeKernel& k, double u) {
    const double q = k.p_star() + u;
    if (!(q > 0.0)) throw DomainError("multiplicative_kernel_mellin_quadrature: need u > -p*");
    auto f = [&](double y) {
        if (!(y > 0.0)) return 0.0;
        const double w = abs_c(k.odds(), 1.0 - y);
        if (w == 0.0) return 0.0;
        return w * std::exp(1.0 - y + (q - 1.0) * std::log(y)) / (1.0 + k.odds());
    };
    const auto opts = detail::kernel_quad_options();
    const double hi = std::max(k.p_star(), q) + 60.0;
    return integrate(f, Interval(0.0, 1.0), opts).value + integrate(f, Interval(1.0, hi), opts).value;
}

inline double additive_kernel_mass(const AdditiveKernel& k) { return additive_kernel_mgf_quadrature(k, 0.0); }

inline double multiplicative_kernel_mass(const MultiplicativeKernel& k) {
    return multiplicative_kernel_mellin_quadrature(k, 0.0);
}

enum class RootKind { simple, tangent };

struct TransformRoot {
    double location = 0.0;
    RootKind kind = RootKind::simple;
};

struct RootScan {
    std::vector<TransformRoot> roots;
    std::vector<double> expected;  // {0, nontrivial} or {0} in the degenerate case
    bool degenerate = false;       // expected root at 0 is a double (tangent) root
    bool complete = true;          // scan range covered every expected root

    /// Same number of roots as expected, each within tol, tangent iff degenerate.
    bool matches_expected(double tol) const {
        if (roots.size() != expected.size()) return false;
        for (double e : expected) {
            const auto hit = std::find_if(roots.begin(), roots.end(), [&](const TransformRoot& r) {
                return std::abs(r.location - e) <= tol;
            });
            if (hit == roots.end()) return false;
            if ((hit->kind == RootKind::tangent) != degenerate) return false;
        }
        return true;
    }
};

/// Nontrivial roots closer to 0 than this are treated as merged with the root at 0.
inline constexpr double degenerate_root_tol = 1e-9;

namespace detail {

inline constexpr double root_width = 1e-12;
inline constexpr double tangent_tol = 1e-10;

// Golden-section minimum of |g| on [a, b].
template <class G>
double golden_min_abs(G& g, double a, double b, double width) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - r * (b - a), x2 = a + r * (b - a);
    double f1 = std::abs(g(x1)), f2 = std::abs(g(x2));
    while (b - a > width) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = std::abs(g(x1));
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = std::abs(g(x2));
        }
    }
    return 0.5 * (a + b);
}

template <class G>
std::vector<TransformRoot> scan_roots(G&& g, double lo, double hi, std::size_t n) {
    const std::vector<double> xs = linspace(lo, hi, n);
    std::vector<double> gs(n);
    for (std::size_t i = 0; i < n; ++i) gs[i] = g(xs[i]);
    auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };

    std::vector<TransformRoot> roots;
    for (std::size_t i = 0; i < n; ++i) {
        if (gs[i] == 0.0) {
            const bool interior = i > 0 && i + 1 < n;
            const bool touch = interior && sign(gs[i - 1]) == sign(gs[i + 1]) && gs[i - 1] != 0.0;
            roots.push_back({xs[i], touch ? RootKind::tangent : RootKind::simple});
            continue;
        }
        if (i + 1 < n && gs[i + 1] != 0.0 && sign(gs[i]) != sign(gs[i + 1])) {
            roots.push_back({bisect_root(g, xs[i], xs[i + 1], root_width).root, RootKind::simple});
            continue;
        }
        if (i > 0 && i + 1 < n && sign(gs[i - 1]) == sign(gs[i]) && sign(gs[i]) == sign(gs[i + 1]) &&
            std::abs(gs[i]) <= std::abs(gs[i - 1]) && std::abs(gs[i]) <= std::abs(gs[i + 1])) {
            const double x = golden_min_abs(g, xs[i - 1], xs[i + 1], root_width);
            if (std::abs(g(x)) <= tangent_tol) roots.push_back({x, RootKind::tangent});
        }
    }
    // Near-double roots can be reported from neighbouring cells; keep one.
    std::vector<TransformRoot> merged;
    for (const auto& r : roots) {
        if (!merged.empty() && std::abs(r.location - merged.back().location) <= degenerate_root_tol) {
            merged.back().kind = RootKind::tangent;
            continue;
        }
        merged.push_back(r);
    }
    return merged;
}

inline RootScan finish_scan(std::vector<TransformRoot> roots, double nontrivial, double lo, double hi) {
    RootScan scan;
    scan.roots = std::move(roots);
    scan.degenerate = std::abs(nontrivial) <= degenerate_root_tol;
    scan.expected = {0.0};
    if (!scan.degenerate) {
        scan.expected.push_back(nontrivial);
        std::sort(scan.expected.begin(), scan.expected.end());
    }
    for (double e : scan.expected) scan.complete = scan.complete && e >= lo && e <= hi;
    return scan;
}

inline void check_scan_args(double lo, double hi, std::size_t n) {
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
        throw DomainError("transform_root_scan: need a finite range lo < hi");
    }
    if (n < 3) throw DomainError("transform_root_scan: need at least 3 scan points");
}

}  // namespace detail

/*
 * Roots of transform - 1 over [lo, hi]: sign changes are bisected to 1e-12;
 * grid minima of |transform - 1| without a sign change are refined by golden
 * section and reported as tangent roots when the minimum is below 1e-10.
 */
inline RootScan transform_root_scan(const AdditiveKernel& k, double lo, double hi, std::size_t n) {
    detail::check_scan_args(lo, hi, n);
    auto g = [&](double s) { return additive_kernel_mgf_excess(k, s); };
    return detail::finish_scan(detail::scan_roots(g, lo, hi, n), k.m(), lo, hi);
}

inline RootScan transform_root_scan(const MultiplicativeKernel& k, double lo, double hi, std::size_t n) {
    detail::check_scan_args(lo, hi, n);
    if (!(lo > -k.p_star())) throw DomainError("transform_root_scan: Mellin range must satisfy u > -p*");
    auto g = [&](double u) { return multiplicative_kernel_mellin_excess(k, u); };
    return detail::finish_scan(detail::scan_roots(g, lo, hi, n), k.root(), lo, hi);
}

/// Smallest second difference of log(transform) over n equally spaced points.
template <class Kernel>
double min_log_second_difference(const Kernel& k, double lo, double hi, std::size_t n) {
    const std::vector<double> xs = linspace(lo, hi, n);
    std::vector<double> logs(n);
    for (std::size_t i = 0; i < n; ++i) {
        if constexpr (std::is_same_v<Kernel, AdditiveKernel>) {
            logs[i] = std::log(additive_kernel_mgf(k, xs[i]));
        } else {
            logs[i] = std::log(multiplicative_kernel_mellin(k, xs[i]));
        }
    }
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < n; ++i) worst = std::min(worst, logs[i - 1] - 2.0 * logs[i] + logs[i + 1]);
    return worst;
}

/*
 * Mixture w N(m, 1) + (1 - w) N(0, 1), m = m*(alpha, 0): its CDF at 0 minus
 * alpha. Only w = 1 (or alpha = 1/2) pins the quantile.
 */
inline double gaussian_mixture_quantile_gap(Alpha alpha, double w) {
    if (!(w >= 0.0 && w <= 1.0)) throw DomainError("gaussian_mixture_quantile_gap: weight must be in [0,1]");
    return (1.0 - w) * (0.5 - alpha.value());
}

/// Same gap from adaptive quadrature of the mixture density over (-inf, 0].
inline double gaussian_mixture_quantile_gap_numeric(Alpha alpha, double w) {
    if (!(w >= 0.0 && w <= 1.0)) throw DomainError("gaussian_mixture_quantile_gap: weight must be in [0,1]");
    const double m = m_star(alpha, 0.0);
    auto density = [&](double x) { return w * std_normal_pdf(x - m) + (1.0 - w) * std_normal_pdf(x); };
    QuadOptions opts;
    opts.abs_tol = 1e-15;
    opts.rel_tol = 5e-14;
    return integrate(density, Interval::up_to(0.0), opts).value - alpha.value();
}

/// Pin defect at t = 1 of q(y) = c0 y^{p*-1} + c1: c1 (1 - (1 + C)/e).
inline double gamma_mixture_gap(Alpha alpha, double c1) {
    if (!(c1 >= 0.0)) throw DomainError("gamma_mixture_gap: c1 must be nonnegative");
    return c1 * (1.0 - (1.0 + alpha.odds()) / std::numbers::e);
}

/*
 * Same defect by quadrature: integral_0^1 e^{-y} q - C integral_1^inf e^{-y} q
 * for q(y) = c0 y^{p*-1} + c1 with p* solving E_p(1) = alpha.
 */
inline double gamma_mixture_gap_numeric(Alpha alpha, double c1, double c0 = 1.0) {
    if (!(c1 >= 0.0) || !(c0 >= 0.0)) throw DomainError("gamma_mixture_gap: coefficients must be nonnegative");
    const double p = p_star(alpha, 1.0);
    auto q = [&](double y) {
        if (!(y > 0.0)) return 0.0;
        return (c0 * std::exp((p - 1.0) * std::log(y)) + c1) * std::exp(-y);
    };
    const auto opts = detail::kernel_quad_options();
    const double below = integrate(q, Interval(0.0, 1.0), opts).value;
    const double above = integrate(q, Interval::from(1.0), opts).value;
    return below - alpha.odds() * above;
}

}  // namespace qpin
