#pragma once

// Base measures, exponential tilting and the quantile-pinning residuals.
//
// Line-supported bases P0 generate P_t(dx) = e^{tx} P0(dx) / M(t), t real.
// Half-line bases Q generate Q_{-t}(dy) = e^{-ty} Q(dy) / L(t), t > 0.
// Residuals are ratios or CDFs, so tabulated inputs need not be normalized.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "qpin/error.hpp"
#include "qpin/grid.hpp"
#include "qpin/quadrature.hpp"
#include "qpin/specfun.hpp"

namespace qpin {

/// Density phi(x - m) on the real line.
class GaussianLocation {
public:
    explicit GaussianLocation(double m) : m_(m) {
        if (!std::isfinite(m)) throw DomainError("GaussianLocation: mean must be finite");
    }
    double mean() const noexcept { return m_; }
    double density(double x) const noexcept { return std_normal_pdf(x - m_); }

private:
    double m_;
};

/// Weight y^{p-1} / Gamma(p) on (0, inf).
class GammaWeight {
public:
    explicit GammaWeight(double p) : p_(p) {
        if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("GammaWeight: shape must be positive");
    }
    double shape() const noexcept { return p_; }
    double density(double y) const {
        if (!(y > 0.0)) return 0.0;
        return std::exp((p_ - 1.0) * std::log(y) - std::lgamma(p_));
    }

private:
    double p_;
};

namespace detail {

// Relative tail mass beyond the grid ends tolerated inside the validity range.
inline constexpr double tabulated_tail_tol = 1e-10;

inline void check_table(const UniformGrid& grid, const std::vector<double>& values, const char* who) {
    if (values.size() != grid.size()) {
        throw ConfigError(std::string(who) + ": grid and value counts differ");
    }
    if (grid.size() < 3) throw ConfigError(std::string(who) + ": need at least three points");
    bool any_positive = false;
    for (double v : values) {
        if (!std::isfinite(v) || v < 0.0) {
            throw ConfigError(std::string(who) + ": values must be finite and nonnegative");
        }
        any_positive = any_positive || v > 0.0;
    }
    if (!any_positive) throw ConfigError(std::string(who) + ": density is identically zero");
}

inline double safe_log(double v) noexcept {
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

// Tail mass past a grid end estimated from the decay rate of the last cell:
// value / rate, infinite when the integrand is not decaying.
inline double end_tail(double value, double rate) noexcept {
    if (value == 0.0) return 0.0;
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return value / rate;
}

}  // namespace detail

/*
 * Density tabulated on a uniform grid over the real line. Transforms use the
 * trapezoid rule on the stored samples; CDFs accumulate trapezoids with linear
 * interpolation of the tilted integrand inside the last cell. The tilts for
 * which the estimated tail mass outside the grid stays below 1e-10 of the
 * transform form the validity range; other tilts are rejected.
 */
class TabulatedLine {
public:
    TabulatedLine(UniformGrid grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        detail::check_table(grid_, values_, "TabulatedLine");
        log_values_.resize(values_.size());
        std::transform(values_.begin(), values_.end(), log_values_.begin(), detail::safe_log);
        if (!valid(0.0)) {
            throw ConfigError("TabulatedLine: tails at the grid ends are too heavy even without tilt");
        }
        tilt_max_ = search_edge(+1.0);
        tilt_min_ = search_edge(-1.0);
    }

    const UniformGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }
    double tilt_min() const noexcept { return tilt_min_; }
    double tilt_max() const noexcept { return tilt_max_; }

    double density(double x) const noexcept {
        if (x < grid_.lo() || x > grid_.hi()) return 0.0;
        const double pos = (x - grid_.lo()) / grid_.step();
        const auto k = std::min(static_cast<std::size_t>(pos), grid_.size() - 2);
        const double w = pos - static_cast<double>(k);
        return (1.0 - w) * values_[k] + w * values_[k + 1];
    }

    double transform(double t) const {
        check_tilt(t);
        return raw_transform(t);
    }

    double cdf(double t, double x) const {
        check_tilt(t);
        if (std::isnan(x)) throw DomainError("tilted_cdf: x is NaN");
        if (x <= grid_.lo()) return 0.0;
        if (x >= grid_.hi()) return 1.0;
        const double h = grid_.step();
        const double pos = (x - grid_.lo()) / h;
        const auto k = std::min(static_cast<std::size_t>(pos), grid_.size() - 2);
        double acc = 0.0;
        for (std::size_t i = 0; i < k; ++i) acc += 0.5 * (sample(t, i) + sample(t, i + 1));
        acc *= h;
        const double dx = x - grid_.at(k);
        const double gk = sample(t, k);
        const double gx = gk + (sample(t, k + 1) - gk) * (dx / h);
        acc += 0.5 * dx * (gk + gx);
        return std::clamp(acc / raw_transform(t), 0.0, 1.0);
    }

private:
    double sample(double t, std::size_t i) const {
        if (values_[i] == 0.0) return 0.0;
        return std::exp(t * grid_.at(i) + log_values_[i]);
    }

    double raw_transform(double t) const {
        const std::size_t n = grid_.size();
        double acc = 0.5 * (sample(t, 0) + sample(t, n - 1));
        for (std::size_t i = 1; i + 1 < n; ++i) acc += sample(t, i);
        acc *= grid_.step();
        if (!std::isfinite(acc)) throw NumericFailure("TabulatedLine: transform overflow");
        return acc;
    }

    double tail_ratio(double t) const {
        const std::size_t n = grid_.size();
        const double h = grid_.step();
        const double rate_hi = (log_values_[n - 2] - log_values_[n - 1]) / h - t;
        const double rate_lo = (log_values_[1] - log_values_[0]) / h + t;
        const double tails = detail::end_tail(sample(t, n - 1), rate_hi) +
                             detail::end_tail(sample(t, 0), rate_lo);
        return tails / raw_transform(t);
    }

    bool valid(double t) const {
        try {
            return tail_ratio(t) <= detail::tabulated_tail_tol;
        } catch (const NumericFailure&) {
            return false;
        }
    }

    // Farthest valid tilt in the given direction, starting from the valid t = 0.
    double search_edge(double direction) const {
        constexpr double cap = 1e6;
        double good = 0.0;
        double step = 0.5;
        while (valid(direction * (good + step))) {
            good += step;
            step *= 2.0;
            if (good >= cap) return direction * std::numeric_limits<double>::infinity();
        }
        double bad = good + step;
        for (int i = 0; i < 60 && bad - good > 1e-12 * std::max(1.0, good); ++i) {
            const double mid = 0.5 * (good + bad);
            (valid(direction * mid) ? good : bad) = mid;
        }
        return direction * good;
    }

    void check_tilt(double t) const {
        if (!(t >= tilt_min_ && t <= tilt_max_)) {
            throw DomainError("tilt " + std::to_string(t) + " outside the validity range [" +
                              std::to_string(tilt_min_) + ", " + std::to_string(tilt_max_) +
                              "] of the tabulated density");
        }
    }

    UniformGrid grid_;
    std::vector<double> values_;
    std::vector<double> log_values_;
    double tilt_min_ = 0.0;
    double tilt_max_ = 0.0;
};

/*
 * Weight tabulated on a uniform grid over [lo, hi], lo >= 0. Between
 * positive samples the weight is interpolated as a power law (exact for
 * y^{p-1}); cells touching a zero sample or y = 0 are linear. When lo > 0
 * the first cell's power law is extended down to 0. Cell integrals use
 * 10-point Gauss-Legendre.
 */
class TabulatedHalfline {
public:
    TabulatedHalfline(UniformGrid grid, std::vector<double> values)
        : grid_(grid), values_(std::move(values)) {
        detail::check_table(grid_, values_, "TabulatedHalfline");
        if (grid_.lo() < 0.0) throw ConfigError("TabulatedHalfline: grid must start at y >= 0");
        log_values_.resize(values_.size());
        std::transform(values_.begin(), values_.end(), log_values_.begin(), detail::safe_log);

        const std::size_t cells = grid_.size() - 1;
        exponent_.assign(cells, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i = 0; i < cells; ++i) {
            if (grid_.at(i) > 0.0 && values_[i] > 0.0 && values_[i + 1] > 0.0) {
                exponent_[i] = (log_values_[i + 1] - log_values_[i]) /
                               (std::log(grid_.at(i + 1)) - std::log(grid_.at(i)));
            }
        }
        if (grid_.lo() > 0.0 && values_[0] > 0.0) {
            head_exponent_ = std::isnan(exponent_[0]) ? 0.0 : exponent_[0];
            if (!(head_exponent_ > -1.0)) {
                throw ConfigError("TabulatedHalfline: weight is not integrable at 0");
            }
        }

        nodes_.reserve(cells * 10);
        log_weights_.reserve(cells * 10);
        for (std::size_t i = 0; i < cells; ++i) {
            gauss_nodes(i, grid_.at(i), grid_.at(i + 1), [&](double y, double w) {
                nodes_.push_back(y);
                log_weights_.push_back(detail::safe_log(w * interpolate(i, y)));
            });
        }

        if (valid(1.0)) {
            double good = 1.0;
            while (good > 1e-12 && valid(0.5 * good)) good *= 0.5;
            if (good <= 1e-12) {
                tilt_min_ = 0.0;
            } else {
                double bad = 0.5 * good;
                for (int i = 0; i < 60 && good - bad > 1e-12 * good; ++i) {
                    const double mid = std::sqrt(good * bad);
                    (valid(mid) ? good : bad) = mid;
                }
                tilt_min_ = good;
            }
        } else {
            double bad = 1.0;
            while (!valid(2.0 * bad)) {
                bad *= 2.0;
                if (bad > 1e6) throw ConfigError("TabulatedHalfline: no tilt resolves the grid tail");
            }
            double good = 2.0 * bad;
            for (int i = 0; i < 60 && good - bad > 1e-12 * good; ++i) {
                const double mid = std::sqrt(good * bad);
                (valid(mid) ? good : bad) = mid;
            }
            tilt_min_ = good;
        }
    }

    const UniformGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }
    /// Smallest valid tilt; all t >= tilt_min() (and t > 0) are accepted.
    double tilt_min() const noexcept { return tilt_min_; }

    double density(double y) const {
        if (y <= 0.0 || y > grid_.hi()) return 0.0;
        if (y < grid_.lo()) return head_value(y);
        const double pos = (y - grid_.lo()) / grid_.step();
        const auto k = std::min(static_cast<std::size_t>(pos), grid_.size() - 2);
        return interpolate(k, y);
    }

    double transform(double t) const {
        check_tilt(t);
        return raw_transform(t);
    }

    double cdf(double t, double y) const {
        check_tilt(t);
        if (std::isnan(y)) throw DomainError("tilted_cdf: y is NaN");
        if (y <= 0.0) return 0.0;
        if (y >= grid_.hi()) return 1.0;
        double acc = 0.0;
        if (y <= grid_.lo()) {
            acc = head_integral(t, y);
        } else {
            acc = head_integral(t, grid_.lo());
            const double pos = (y - grid_.lo()) / grid_.step();
            const auto k = std::min(static_cast<std::size_t>(pos), grid_.size() - 2);
            for (std::size_t j = 0; j < 10 * k; ++j) acc += std::exp(log_weights_[j] - t * nodes_[j]);
            gauss_nodes(k, grid_.at(k), y, [&](double x, double w) {
                acc += w * interpolate(k, x) * std::exp(-t * x);
            });
        }
        return std::clamp(acc / raw_transform(t), 0.0, 1.0);
    }

private:
    template <class Sink>
    static void gauss_nodes(std::size_t, double a, double b, Sink&& sink) {
        const double c = 0.5 * (a + b);
        const double half = 0.5 * (b - a);
        for (int j = 0; j < 5; ++j) {
            const double dx = half * detail::gk21_x[2 * j + 1];
            const double w = half * detail::g10_w[j];
            sink(c - dx, w);
            sink(c + dx, w);
        }
    }

    double interpolate(std::size_t k, double y) const {
        if (!std::isnan(exponent_[k])) {
            return std::exp(log_values_[k] + exponent_[k] * std::log(y / grid_.at(k)));
        }
        const double w = (y - grid_.at(k)) / grid_.step();
        return (1.0 - w) * values_[k] + w * values_[k + 1];
    }

    double head_value(double y) const {
        if (grid_.lo() == 0.0 || values_[0] == 0.0) return 0.0;
        return values_[0] * std::pow(y / grid_.lo(), head_exponent_);
    }

    // Integral of e^{-ty} times the extended power law over (0, y], y <= lo.
    double head_integral(double t, double y) const {
        if (grid_.lo() == 0.0 || values_[0] == 0.0 || y <= 0.0) return 0.0;
        const double q = head_exponent_ + 1.0;
        const double log_scale = log_values_[0] - head_exponent_ * std::log(grid_.lo());
        const double e = reg_gamma_cdf(q, t * y);
        if (e == 0.0) return 0.0;
        return std::exp(log_scale + std::lgamma(q) - q * std::log(t) + std::log(e));
    }

    double raw_transform(double t) const {
        double acc = head_integral(t, grid_.lo());
        for (std::size_t j = 0; j < nodes_.size(); ++j) acc += std::exp(log_weights_[j] - t * nodes_[j]);
        if (!std::isfinite(acc)) throw NumericFailure("TabulatedHalfline: transform overflow");
        return acc;
    }

    // Trapezoid estimate is enough to locate where the grid tail stops mattering.
    bool valid(double t) const {
        const std::size_t n = grid_.size();
        const double h = grid_.step();
        double approx = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (values_[i] == 0.0) continue;
            const double w = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
            approx += w * std::exp(log_values_[i] - t * grid_.at(i));
        }
        approx = approx * h + head_integral(t, grid_.lo());
        const double rate = (log_values_[n - 2] - log_values_[n - 1]) / h + t;
        const double tail = detail::end_tail(values_[n - 1] * std::exp(-t * grid_.hi()), rate);
        return std::isfinite(approx) && approx > 0.0 && tail <= detail::tabulated_tail_tol * approx;
    }

    void check_tilt(double t) const {
        if (!(t > 0.0) || !(t >= tilt_min_) || !std::isfinite(t)) {
            throw DomainError("tilt " + std::to_string(t) + " outside the validity range [" +
                              std::to_string(tilt_min_) + ", inf) of the tabulated weight");
        }
    }

    UniformGrid grid_;
    std::vector<double> values_;
    std::vector<double> log_values_;
    std::vector<double> exponent_;  // per cell; NaN marks linear cells
    double head_exponent_ = 0.0;
    std::vector<double> nodes_;
    std::vector<double> log_weights_;
    double tilt_min_ = 0.0;
};

using BaseMeasure = std::variant<GaussianLocation, GammaWeight, TabulatedLine, TabulatedHalfline>;

enum class Support { line, half_line };

inline Support support_of(const BaseMeasure& base) noexcept {
    return (std::holds_alternative<GaussianLocation>(base) ||
            std::holds_alternative<TabulatedLine>(base))
               ? Support::line
               : Support::half_line;
}

/// How analytic bases evaluate transforms; tabulated bases always use their grid.
enum class Route { closed_form, quadrature };

template <class... Ts>
struct Overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

namespace detail {

inline QuadOptions transform_quad_options() {
    QuadOptions opts;
    opts.abs_tol = 1e-300;
    opts.rel_tol = 1e-13;
    return opts;
}

[[noreturn]] inline void wrong_support(const char* op, Support needed) {
    throw DomainError(std::string(op) + ": requires a " +
                      (needed == Support::line ? "line" : "half-line") + "-supported base");
}

}  // namespace detail

/// M(t) = integral of e^{tx} P0(dx).
inline double mgf(const BaseMeasure& base, double t, Route route = Route::closed_form) {
    if (!std::isfinite(t)) throw DomainError("mgf: tilt must be finite");
    return std::visit(
        Overloaded{
            [&](const GaussianLocation& g) {
                if (route == Route::closed_form) return std::exp(t * g.mean() + 0.5 * t * t);
                const double m = g.mean();
                return integrate(
                           [&](double x) {
                               return std::exp(t * x - 0.5 * (x - m) * (x - m)) /
                                      std::sqrt(2.0 * std::numbers::pi);
                           },
                                 Interval::whole_line(), detail::transform_quad_options())
                    .value;
            },
            [&](const TabulatedLine& tab) { return tab.transform(t); },
            [&](const auto&) -> double { detail::wrong_support("mgf", Support::line); },
        },
        base);
}

/// L(t) = integral of e^{-ty} Q(dy), t > 0.
inline double laplace(const BaseMeasure& base, double t, Route route = Route::closed_form) {
    if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("laplace: t must be positive");
    return std::visit(
        Overloaded{
            [&](const GammaWeight& g) {
                if (route == Route::closed_form) return std::pow(t, -g.shape());
                const double p = g.shape();
                const double lg = std::lgamma(p);
                return integrate(
                           [&](double y) {
                               if (!(y > 0.0)) return 0.0;
                               return std::exp(-t * y + (p - 1.0) * std::log(y) - lg);
                           },
                                 Interval::from(0.0), detail::transform_quad_options())
                    .value;
            },
            [&](const TabulatedHalfline& tab) { return tab.transform(t); },
            [&](const auto&) -> double { detail::wrong_support("laplace", Support::half_line); },
        },
        base);
}

/// P_t((-inf, x]) for line bases, Q_{-t}((0, x]) for half-line bases.
inline double tilted_cdf(const BaseMeasure& base, double t, double x) {
    if (std::isnan(x) || !std::isfinite(t)) throw DomainError("tilted_cdf: bad argument");
    return std::visit(
        Overloaded{
            [&](const GaussianLocation& g) {
                if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
                return std_normal_cdf(x - g.mean() - t);
            },
            [&](const GammaWeight& g) {
                if (!(t > 0.0)) throw DomainError("tilted_cdf: half-line tilt must be positive");
                if (x <= 0.0) return 0.0;
                return reg_gamma_cdf(g.shape(), t * x);
            },
            [&](const TabulatedLine& tab) { return tab.cdf(t, x); },
            [&](const TabulatedHalfline& tab) { return tab.cdf(t, x); },
        },
        base);
}

/// P_t((-inf, b + t]) - alpha; identically zero in t iff b + t is the pinned alpha-quantile.
inline double location_pin_residual(const BaseMeasure& base, Alpha alpha, double b, double t) {
    if (support_of(base) != Support::line) detail::wrong_support("location_pin_residual", Support::line);
    if (!std::isfinite(b)) throw DomainError("location_pin_residual: b must be finite");
    return tilted_cdf(base, t, b + t) - alpha.value();
}

/// Q_{-t}((0, a/t]) - alpha.
inline double scale_pin_residual(const BaseMeasure& base, Alpha alpha, double a, double t) {
    if (support_of(base) != Support::half_line) {
        detail::wrong_support("scale_pin_residual", Support::half_line);
    }
    if (!(a > 0.0) || !std::isfinite(a)) throw DomainError("scale_pin_residual: a must be positive");
    if (!(t > 0.0)) throw DomainError("scale_pin_residual: t must be positive");
    return tilted_cdf(base, t, a / t) - alpha.value();
}

struct ResidualEntry {
    double parameter = 0.0;
    double residual = std::numeric_limits<double>::quiet_NaN();
    std::string failure;  // empty when the evaluation succeeded

    bool ok() const noexcept { return failure.empty(); }
};

struct ResidualReport {
    std::vector<ResidualEntry> entries;
    double max_abs = 0.0;  // over successful entries
    std::size_t failures = 0;
};

/*
 * Pin residuals over a list of tilts. The shift is b for line bases and a for
 * half-line bases. Failed evaluations are kept as entries with a message.
 */
inline ResidualReport scan_pin_residuals(const BaseMeasure& base, Alpha alpha, double shift,
                                         std::span<const double> t_values) {
    if (t_values.empty()) throw DomainError("scan_pin_residuals: no tilt values");
    const bool line = support_of(base) == Support::line;
    ResidualReport report;
    report.entries.reserve(t_values.size());
    for (double t : t_values) {
        ResidualEntry e;
        e.parameter = t;
        try {
            e.residual = line ? location_pin_residual(base, alpha, shift, t)
                              : scale_pin_residual(base, alpha, shift, t);
            report.max_abs = std::max(report.max_abs, std::abs(e.residual));
        } catch (const std::exception& ex) {
            e.failure = ex.what();
            ++report.failures;
        }
        report.entries.push_back(std::move(e));
    }
    return report;
}

/// M(t+s) - M(t) M(s) e^{ts}, with M normalized so that M(0) = 1.
inline double location_identity_residual(const BaseMeasure& base, double s, double t) {
    const double m0 = mgf(base, 0.0);
    const double lhs = mgf(base, t + s) / m0;
    return lhs - (mgf(base, t) / m0) * (mgf(base, s) / m0) * std::exp(t * s);
}

/// L(t + ts)/L(t) - L(1 + s)/L(1).
inline double scale_identity_residual(const BaseMeasure& base, double s, double t) {
    if (!(s > 0.0) || !(t > 0.0)) throw DomainError("scale_identity_residual: s and t must be positive");
    return laplace(base, t + t * s) / laplace(base, t) - laplace(base, 1.0 + s) / laplace(base, 1.0);
}

/// u c''(u) + c'(u) for c = log L, by central differences with step h.
inline double log_transform_ode_residual(const BaseMeasure& base, double u, double h) {
    if (!(h > 0.0) || !(u > h)) throw DomainError("log_transform_ode_residual: need u > h > 0");
    const double cm = std::log(laplace(base, u - h));
    const double c0 = std::log(laplace(base, u));
    const double cp = std::log(laplace(base, u + h));
    const double d1 = (cp - cm) / (2.0 * h);
    const double d2 = (cp - 2.0 * c0 + cm) / (h * h);
    return u * d2 + d1;
}

}  // namespace qpin
