#pragma once

// Discretized Deny convolution operators and their fixed-point structure.
//
// Additive:       (Tf)(x) = integral H(x - y) f(y) dy on a uniform x-grid.
// Multiplicative: (Sg)(t) = integral K(t/y) g(y) dy/y, handled on a uniform
//                 grid in v = log t. With G(v) = e^v g(e^v) it becomes the
//                 additive convolution of G with the density K(e^z) e^z.
//
// Both kernels have density coordinates in which they integrate to one, a
// single kink at z = 0 with unit jump in slope, and a two-dimensional cone of
// nonnegative fixed points spanned by 1 and e^{-r z} (r = m resp. 1 - p*).
// Values outside the grid are taken as zero; accuracy claims hold only on the
// interior, where the kernel window is fully covered.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qpin/characterize.hpp"
#include "qpin/error.hpp"
#include "qpin/grid.hpp"
#include "qpin/quadrature.hpp"
#include "qpin/table_io.hpp"

namespace qpin {

/// Real function sampled on a uniform grid (x, or v = log t for the multiplicative operator).
class GridFunction {
public:
    GridFunction(UniformGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (grid_.size() < 16) throw ConfigError("GridFunction: need at least 16 grid points");
        if (values_.size() != grid_.size()) throw ConfigError("GridFunction: value count differs from grid");
        for (double v : values_) {
            if (!std::isfinite(v)) throw ConfigError("GridFunction: values must be finite");
        }
    }

    template <class F>
    static GridFunction sample(UniformGrid grid, F&& f) {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid.at(i));
        return {grid, std::move(v)};
    }

    const UniformGrid& grid() const noexcept { return grid_; }
    const std::vector<double>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const noexcept { return values_[i]; }

    bool nonnegative() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v >= 0.0; });
    }

private:
    UniformGrid grid_;
    std::vector<double> values_;
};

inline GridFunction read_grid_function(const std::string& path) {
    Table t = read_table_file(path);
    return {t.grid, std::move(t.values)};
}

inline void write_grid_function(std::ostream& out, const GridFunction& f) {
    write_table(out, f.grid(), f.values());
}

enum class DenyKind { additive, multiplicative };

/// How to treat a nontrivial root that (nearly) coincides with the root at 0.
enum class BasisMode { automatic, full, collapsed };

/// Inclusive index range on a grid.
struct IndexRange {
    std::size_t first = 0;
    std::size_t last = 0;
    std::size_t size() const noexcept { return last - first + 1; }
};

struct Projection {
    double c0 = 0.0;  // coefficient of 1 (additive) or t^{-1} (multiplicative)
    double c1 = 0.0;  // coefficient of e^{-mx} or t^{p*-2}
    double orthogonal_residual = 0.0;
    bool collapsed = false;
};

struct OperatorReport {
    double interior_lo = 0.0;  // trusted range after the last step
    double interior_hi = 0.0;
    IndexRange interior;
    double sup_residual = 0.0;               // max over iterations
    std::vector<double> iterations;          // |T f_k - f_k| / envelope, k = 0..n
    std::vector<double> orthogonal;          // per-iteration projection residuals, if requested
    std::optional<GridFunction> final_state;  // f_n
};

struct IterateOptions {
    // Points where some iterated basis function has drifted by more than this
    // (relative) are dropped from the measured window: truncation has reached them.
    double leak_tol = 1e-7;
    bool project_each = false;
};

namespace detail {

inline constexpr double kernel_tail_mass = 1e-10;

// Smallest R with integral_R^inf f <= target (f decaying beyond its mode).
template <class F>
double tail_reach(F&& f, double target) {
    QuadOptions opts;
    opts.abs_tol = 1e-15;
    opts.rel_tol = 1e-10;
    auto tail = [&](double r) { return integrate(f, Interval::from(r), opts).value; };
    double hi = 1.0;
    while (tail(hi) > target) {
        hi *= 2.0;
        if (hi > 4096.0) throw ConfigError("kernel tail does not decay within a radius of 4096");
    }
    double lo = 0.0;
    if (tail(lo) <= target) return 0.0;
    while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        (tail(mid) > target ? lo : hi) = mid;
    }
    return hi;
}

inline double nontrivial_root(double r, BasisMode mode, bool& collapsed) {
    constexpr double ill_conditioned = 1e-6;
    collapsed = mode == BasisMode::collapsed;
    if (collapsed) return 0.0;
    if (mode == BasisMode::automatic && std::abs(r) <= degenerate_root_tol) {
        collapsed = true;
        return 0.0;
    }
    if (std::abs(r) < ill_conditioned) {
        throw ConfigError("solution basis is ill-conditioned: nontrivial root " + std::to_string(r) +
                          " is within 1e-6 of 0; use the collapsed basis");
    }
    return r;
}

}  // namespace detail

/*
 * Truncated trapezoid discretization of a Deny operator on a fixed grid. The
 * trapezoid sum gets the first Euler-Maclaurin correction for the kernel's
 * kink at z = 0, h^2/12 * f(x), so the rule stays fourth order.
 */
class DenyOperator {
public:
    DenyOperator(const AdditiveKernel& k, UniformGrid grid, BasisMode mode = BasisMode::automatic)
        : kind_(DenyKind::additive), grid_(grid) {
        root_ = detail::nontrivial_root(k.m(), mode, collapsed_);
        build([&k](double z) { return k.density(z); });
    }

    DenyOperator(const MultiplicativeKernel& k, UniformGrid log_grid, BasisMode mode = BasisMode::automatic)
        : kind_(DenyKind::multiplicative), grid_(log_grid) {
        root_ = detail::nontrivial_root(k.root(), mode, collapsed_);
        build([&k](double z) { return k.log_density(z); });
    }

    DenyKind kind() const noexcept { return kind_; }
    const UniformGrid& grid() const noexcept { return grid_; }
    bool collapsed() const noexcept { return collapsed_; }
    /// Nontrivial root r (0 when collapsed); the second solution is e^{-r z} in density coordinates.
    double root() const noexcept { return root_; }
    /// Kernel reach below / above z = 0 capturing all but 1e-10 of the mass (also under the root tilt).
    double reach_below() const noexcept { return reach_below_; }
    double reach_above() const noexcept { return reach_above_; }
    IndexRange interior() const noexcept { return interior_; }

    /// Basis of the fixed-point cone in native coordinates (1, e^{-mx}) or (t^{-1}, t^{p*-2}).
    std::vector<GridFunction> basis() const {
        std::vector<GridFunction> out;
        for (std::size_t j = 0; j < basis_count(); ++j) out.push_back(to_native(density_basis(j)));
        return out;
    }

    GridFunction apply(const GridFunction& f) const {
        check_grid(f);
        std::vector<double> d = to_density(f.values());
        return to_native(convolve(d));
    }

    OperatorReport iterate(const GridFunction& f0, std::size_t n_iters, const IterateOptions& opts = {}) const {
        if (n_iters < 1) throw ConfigError("iterate: need at least one iteration");
        check_grid(f0);
        std::vector<double> f = to_density(f0.values());
        std::vector<std::vector<double>> b0, b;
        for (std::size_t j = 0; j < basis_count(); ++j) b0.push_back(density_basis(j));
        b = b0;
        const std::vector<double> env = envelope();

        OperatorReport report;
        for (std::size_t k = 0; k <= n_iters; ++k) {
            std::vector<double> tf = convolve(f);
            for (auto& bj : b) bj = convolve(bj);
            for (double v : tf) {
                if (!std::isfinite(v)) {
                    throw NumericFailure("iterate: overflow at iteration " + std::to_string(k));
                }
            }
            const IndexRange window = trusted_window(b, b0, opts.leak_tol, k + 1);
            double res = 0.0;
            for (std::size_t i = window.first; i <= window.last; ++i) {
                res = std::max(res, std::abs(tf[i] - f[i]) / env[i]);
            }
            report.iterations.push_back(res);
            if (opts.project_each) report.orthogonal.push_back(project_density(f, window).orthogonal_residual);
            report.interior = window;
            if (k < n_iters) f = std::move(tf);
        }
        report.sup_residual = *std::max_element(report.iterations.begin(), report.iterations.end());
        report.interior_lo = grid_.at(report.interior.first);
        report.interior_hi = grid_.at(report.interior.last);
        report.final_state = to_native(f);
        return report;
    }

    /*
     * Nonnegative least-squares fit onto the fixed-point cone over `range`
     * (default: the interior), weighted by the envelope 1/(sum of basis
     * functions). The orthogonal residual is the weighted sup-norm of the
     * remainder.
     */
    Projection project(const GridFunction& f, std::optional<IndexRange> range = std::nullopt) const {
        check_grid(f);
        const IndexRange r = range.value_or(interior_);
        if (r.first > r.last || r.last >= grid_.size()) throw ConfigError("project: bad index range");
        return project_density(to_density(f.values()), r);
    }

private:
    template <class Density>
    void build(Density&& density) {
        const double target = 0.5 * detail::kernel_tail_mass;
        auto reach = [&](double sign) {
            double r = detail::tail_reach([&](double z) { return density(sign * z); }, target);
            if (root_ != 0.0) {
                // Tilted kernel density(z) e^{root z}: the kernel seen by e^{-root x}.
                const double t = root_;
                r = std::max(r, detail::tail_reach(
                                    [&](double z) {
                                        const double d = density(sign * z);
                                        return d == 0.0 ? 0.0 : d * std::exp(t * sign * z);
                                    },
                                    target));
            }
            return r;
        };
        reach_above_ = reach(+1.0);
        reach_below_ = reach(-1.0);

        const double h = grid_.step();
        k_lo_ = -static_cast<long>(std::ceil(reach_below_ / h));
        k_hi_ = static_cast<long>(std::ceil(reach_above_ / h));
        weights_.resize(static_cast<std::size_t>(k_hi_ - k_lo_ + 1));
        for (long k = k_lo_; k <= k_hi_; ++k) {
            weights_[static_cast<std::size_t>(k - k_lo_)] = h * density(static_cast<double>(k) * h);
        }
        kink_correction_ = h * h / 12.0;  // unit slope jump at z = 0

        const long n = static_cast<long>(grid_.size());
        const long first = k_hi_;
        const long last = n - 1 + k_lo_;
        if (first > last) {
            throw ConfigError("grid [" + std::to_string(grid_.lo()) + ", " + std::to_string(grid_.hi()) +
                              "] too narrow for the kernel: need a margin of " +
                              std::to_string(reach_above_) + " at the low end and " +
                              std::to_string(reach_below_) + " at the high end (width > " +
                              std::to_string(reach_above_ + reach_below_) + ")");
        }
        interior_ = {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
    }

    void check_grid(const GridFunction& f) const {
        const auto& g = f.grid();
        if (g.size() != grid_.size() || g.lo() != grid_.lo() || g.hi() != grid_.hi()) {
            throw ConfigError("grid function does not live on the operator grid");
        }
    }

    std::size_t basis_count() const noexcept { return collapsed_ ? 1 : 2; }

    std::vector<double> density_basis(std::size_t j) const {
        std::vector<double> out(grid_.size(), 1.0);
        if (j == 1) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(-root_ * grid_.at(i));
        }
        return out;
    }

    std::vector<double> envelope() const {
        std::vector<double> env(grid_.size(), 0.0);
        for (std::size_t j = 0; j < basis_count(); ++j) {
            const auto bj = density_basis(j);
            for (std::size_t i = 0; i < env.size(); ++i) env[i] += bj[i];
        }
        return env;
    }

    std::vector<double> to_density(const std::vector<double>& native) const {
        std::vector<double> out(native);
        if (kind_ == DenyKind::multiplicative) {
            for (std::size_t i = 0; i < out.size(); ++i) out[i] *= std::exp(grid_.at(i));
        }
        return out;
    }

    GridFunction to_native(std::vector<double> d) const {
        if (kind_ == DenyKind::multiplicative) {
            for (std::size_t i = 0; i < d.size(); ++i) d[i] *= std::exp(-grid_.at(i));
        }
        return {grid_, std::move(d)};
    }

    std::vector<double> convolve(const std::vector<double>& f) const {
        const long n = static_cast<long>(f.size());
        std::vector<double> out(f.size(), 0.0);
        for (long k = k_lo_; k <= k_hi_; ++k) {
            const double w = weights_[static_cast<std::size_t>(k - k_lo_)];
            if (w == 0.0) continue;
            // out[i] += w f[i - k] for 0 <= i - k < n
            const long i0 = std::max(0L, k);
            const long i1 = std::min(n - 1, n - 1 + k);
            double* o = out.data();
            const double* src = f.data() - k;
            for (long i = i0; i <= i1; ++i) o[i] += w * src[i];
        }
        for (long i = 0; i < n; ++i) out[i] += kink_correction_ * f[i];
        return out;
    }

    IndexRange trusted_window(const std::vector<std::vector<double>>& iterated,
                              const std::vector<std::vector<double>>& exact, double tol,
                              std::size_t steps) const {
        auto ok = [&](std::size_t i) {
            for (std::size_t j = 0; j < iterated.size(); ++j) {
                if (std::abs(iterated[j][i] - exact[j][i]) > tol * exact[j][i]) return false;
            }
            return true;
        };
        IndexRange best{1, 0};
        std::size_t best_len = 0;
        std::size_t i = interior_.first;
        while (i <= interior_.last) {
            if (!ok(i)) {
                ++i;
                continue;
            }
            std::size_t j = i;
            while (j + 1 <= interior_.last && ok(j + 1)) ++j;
            if (j - i + 1 > best_len) {
                best = {i, j};
                best_len = j - i + 1;
            }
            i = j + 1;
        }
        if (best_len == 0) {
            throw ConfigError("truncation at the grid ends has reached the whole interior after " +
                              std::to_string(steps) + " applications; widen the grid");
        }
        return best;
    }

    Projection project_density(const std::vector<double>& f, IndexRange r) const {
        const std::vector<double> env = envelope();
        const std::vector<double> b0 = density_basis(0);
        const std::vector<double> b1 = collapsed_ ? std::vector<double>{} : density_basis(1);

        // Weighted normal equations on columns b_j / env.
        double s00 = 0, s01 = 0, s11 = 0, t0 = 0, t1 = 0;
        for (std::size_t i = r.first; i <= r.last; ++i) {
            const double a = b0[i] / env[i];
            const double y = f[i] / env[i];
            s00 += a * a;
            t0 += a * y;
            if (!collapsed_) {
                const double c = b1[i] / env[i];
                s01 += a * c;
                s11 += c * c;
                t1 += c * y;
            }
        }
        auto residual = [&](double c0, double c1) {
            double worst = 0.0;
            for (std::size_t i = r.first; i <= r.last; ++i) {
                const double fit = c0 * b0[i] + (collapsed_ ? 0.0 : c1 * b1[i]);
                worst = std::max(worst, std::abs(f[i] - fit) / env[i]);
            }
            return worst;
        };
        auto objective = [&](double c0, double c1) {
            double acc = 0.0;
            for (std::size_t i = r.first; i <= r.last; ++i) {
                const double fit = c0 * b0[i] + (collapsed_ ? 0.0 : c1 * b1[i]);
                const double d = (f[i] - fit) / env[i];
                acc += d * d;
            }
            return acc;
        };

        Projection p;
        p.collapsed = collapsed_;
        if (collapsed_) {
            p.c0 = std::max(0.0, t0 / s00);
        } else {
            const double det = s00 * s11 - s01 * s01;
            double c0 = (t0 * s11 - t1 * s01) / det;
            double c1 = (t1 * s00 - t0 * s01) / det;
            if (!(det > 0.0) || c0 < 0.0 || c1 < 0.0) {
                // Best fit on the boundary of the cone.
                const double only0 = std::max(0.0, t0 / s00);
                const double only1 = std::max(0.0, t1 / s11);
                if (objective(only0, 0.0) <= objective(0.0, only1)) {
                    c0 = only0;
                    c1 = 0.0;
                } else {
                    c0 = 0.0;
                    c1 = only1;
                }
            }
            p.c0 = c0;
            p.c1 = c1;
        }
        p.orthogonal_residual = residual(p.c0, p.c1);
        return p;
    }

    DenyKind kind_;
    UniformGrid grid_;
    bool collapsed_ = false;
    double root_ = 0.0;
    double reach_below_ = 0.0;
    double reach_above_ = 0.0;
    long k_lo_ = 0;
    long k_hi_ = 0;
    std::vector<double> weights_;
    double kink_correction_ = 0.0;
    IndexRange interior_;
};

/// Standard grids: x in [-20, 20] (spacing 0.01) and v = log t in [-10, 40] (spacing 0.01).
inline UniformGrid standard_additive_grid() { return {-20.0, 20.0, 4001}; }
inline UniformGrid standard_log_grid() { return {-10.0, 40.0, 5001}; }

inline GridFunction apply_additive(const AdditiveKernel& k, const GridFunction& f) {
    return DenyOperator(k, f.grid()).apply(f);
}

/// g given as v -> g(e^v); returns v -> (Sg)(e^v) on the same grid.
inline GridFunction apply_multiplicative(const MultiplicativeKernel& k, const GridFunction& g) {
    return DenyOperator(k, g.grid()).apply(g);
}

inline OperatorReport iterate(const DenyOperator& op, const GridFunction& f0, std::size_t n_iters,
                              const IterateOptions& opts = {}) {
    return op.iterate(f0, n_iters, opts);
}

inline Projection project_solution_space(const DenyOperator& op, const GridFunction& f,
                                         std::optional<IndexRange> range = std::nullopt) {
    return op.project(f, range);
}

}  // namespace qpin
