#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "qpin/error.hpp"

namespace qpin {

/// Integration domain; either endpoint may be infinite.
class Interval {
public:
    Interval(double lo, double hi) : lo_(lo), hi_(hi) {
        if (std::isnan(lo) || std::isnan(hi) || !(lo < hi)) {
            throw DomainError("Interval: need lo < hi");
        }
    }

    static Interval whole_line() {
        constexpr double inf = std::numeric_limits<double>::infinity();
        return {-inf, inf};
    }
    static Interval from(double lo) { return {lo, std::numeric_limits<double>::infinity()}; }
    static Interval up_to(double hi) { return {-std::numeric_limits<double>::infinity(), hi}; }

    double lo() const noexcept { return lo_; }
    double hi() const noexcept { return hi_; }
    bool finite() const noexcept { return std::isfinite(lo_) && std::isfinite(hi_); }

private:
    double lo_;
    double hi_;
};

struct QuadResult {
    double value = 0.0;
    double err_estimate = 0.0;
    std::size_t evaluations = 0;
};

struct QuadOptions {
    double abs_tol = 1e-12;
    double rel_tol = 0.0;
    std::size_t max_evaluations = 1'000'000;
    // Length scale of the infinite-endpoint map x = lo + scale*u/(1-u).
    // Roughly the distance over which the integrand decays.
    double scale = 1.0;
};

namespace detail {

// 21-point Gauss-Kronrod pair (QUADPACK qk21). Abscissae are on [0, 1) of the
// symmetric rule; odd indices are the embedded 10-point Gauss nodes.
inline constexpr std::array<double, 11> gk21_x = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};
inline constexpr std::array<double, 11> gk21_wk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525724080, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
inline constexpr std::array<double, 5> g10_w = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Panel {
    double a, b;
    double value, error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class G>
Panel gk21(G& g, double a, double b) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = g(center);
    double resk = fc * gk21_wk[10];
    double resg = 0.0;
    double resabs = std::abs(resk);
    std::array<double, 10> f1{}, f2{};
    for (int j = 0; j < 10; ++j) {
        const double dx = half * gk21_x[j];
        f1[j] = g(center - dx);
        f2[j] = g(center + dx);
        const double s = f1[j] + f2[j];
        resk += gk21_wk[j] * s;
        resabs += gk21_wk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
        if (j % 2 == 1) resg += g10_w[j / 2] * s;
    }
    const double mean = 0.5 * resk;
    double resasc = gk21_wk[10] * std::abs(fc - mean);
    for (int j = 0; j < 10; ++j) {
        resasc += gk21_wk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
    }
    resk *= half;
    resabs *= std::abs(half);
    resasc *= std::abs(half);
    double err = std::abs((resk - resg * half));
    if (resasc != 0.0 && err != 0.0) {
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    }
    if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) {
        err = std::max(50.0 * eps * resabs, err);
    }
    return {a, b, resk, err};
}

}  // namespace detail

/*
 * Globally adaptive Gauss-Kronrod (10/21) integration. Infinite endpoints are
 * mapped onto a finite u-interval first:
 *   [lo, inf)   x = lo + s*u/(1-u)
 *   (-inf, hi]  x = hi - s*u/(1-u)
 *   (-inf, inf) x = s*u/(1-u^2)
 * Converged when the summed panel error is below max(abs_tol, rel_tol*|I|).
 */
template <class F>
QuadResult integrate(F&& f, const Interval& domain, const QuadOptions& opts) {
    if (!(opts.abs_tol > 0.0 || opts.rel_tol > 0.0)) {
        throw DomainError("integrate: tolerance must be positive");
    }
    const double lo = domain.lo();
    const double hi = domain.hi();
    const double s = opts.scale;
    std::size_t evals = 0;

    auto eval = [&](double x, double jac) {
        ++evals;
        if (jac == 0.0 || std::isinf(x)) return 0.0;
        const double fx = f(x);
        if (fx == 0.0) return 0.0;
        const double v = fx * jac;
        if (!std::isfinite(v)) {
            throw NumericFailure("integrate: integrand not finite at x = " + std::to_string(x));
        }
        return v;
    };

    double ua, ub;
    auto mapped = [&](double u) -> double {
        if (std::isfinite(lo) && std::isfinite(hi)) return eval(u, 1.0);
        if (std::isfinite(lo)) {
            const double w = 1.0 - u;
            return eval(lo + s * u / w, s / (w * w));
        }
        if (std::isfinite(hi)) {
            const double w = 1.0 - u;
            return eval(hi - s * u / w, s / (w * w));
        }
        const double w = 1.0 - u * u;
        return eval(s * u / w, s * (1.0 + u * u) / (w * w));
    };
    if (std::isfinite(lo) && std::isfinite(hi)) {
        ua = lo;
        ub = hi;
    } else if (std::isfinite(lo) || std::isfinite(hi)) {
        ua = 0.0;
        ub = 1.0;
    } else {
        ua = -1.0;
        ub = 1.0;
    }

    std::priority_queue<detail::Panel> heap;
    std::vector<detail::Panel> frozen;  // too narrow to split further
    double total = 0.0;
    double total_err = 0.0;
    constexpr int initial_panels = 4;
    for (int i = 0; i < initial_panels; ++i) {
        const double a = ua + (ub - ua) * i / initial_panels;
        const double b = (i + 1 == initial_panels) ? ub : ua + (ub - ua) * (i + 1) / initial_panels;
        detail::Panel p = detail::gk21(mapped, a, b);
        total += p.value;
        total_err += p.error;
        heap.push(p);
    }

    auto converged = [&] {
        return total_err <= std::max(opts.abs_tol, opts.rel_tol * std::abs(total));
    };
    while (!converged()) {
        if (heap.empty()) {
            throw NumericFailure("integrate: panels cannot be refined further", total);
        }
        if (evals + 42 > opts.max_evaluations) {
            throw NumericFailure("integrate: evaluation budget exhausted (error estimate " +
                                     std::to_string(total_err) + ")",
                                 total);
        }
        const detail::Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            frozen.push_back(worst);
            continue;
        }
        const detail::Panel left = detail::gk21(mapped, worst.a, mid);
        const detail::Panel right = detail::gk21(mapped, mid, worst.b);
        total += left.value + right.value - worst.value;
        total_err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    // Re-sum from the panels to drop drift from incremental updates.
    double value = 0.0, err = 0.0;
    for (const auto& p : frozen) {
        value += p.value;
        err += p.error;
    }
    while (!heap.empty()) {
        value += heap.top().value;
        err += heap.top().error;
        heap.pop();
    }
    return {value, err, evals};
}

template <class F>
QuadResult integrate(F&& f, const Interval& domain, double tol) {
    QuadOptions opts;
    opts.abs_tol = tol;
    return integrate(std::forward<F>(f), domain, opts);
}

}  // namespace qpin
