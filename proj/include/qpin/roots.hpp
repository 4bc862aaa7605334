#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>

#include "qpin/error.hpp"

namespace qpin {

struct RootResult {
    double root = 0.0;
    double residual = 0.0;  // f(root)
    double lo = 0.0;        // final bracket
    double hi = 0.0;
    std::size_t iterations = 0;
};

/*
 * Brent-Dekker zero finder on a sign-changing bracket [lo, hi].
 * Stops when the bracket is narrower than x_tol or |f| <= f_tol.
 */
template <class F>
RootResult brent_root(F&& f, double lo, double hi, double x_tol, double f_tol,
                      std::size_t max_iters = 500) {
    double a = lo, b = hi;
    double fa = f(a), fb = f(b);
    if (fa == 0.0) return {a, fa, a, a, 0};
    if (fb == 0.0) return {b, fb, b, b, 0};
    if ((fa > 0.0) == (fb > 0.0)) {
        throw NumericFailure("brent_root: interval does not bracket a sign change");
    }
    double c = a, fc = fa;
    double d = b - a, e = d;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        const double tol = 2.0 * 2.220446049250313e-16 * std::abs(b) + 0.5 * x_tol;
        const double half = 0.5 * (c - b);
        if (std::abs(half) <= tol || std::abs(fb) <= f_tol) {
            return {b, fb, std::min(b, c), std::max(b, c), it};
        }
        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            double p, q;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * half * s;
                q = 1.0 - s;
            } else {
                const double qq = fa / fc;
                const double r = fb / fc;
                p = s * (2.0 * half * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q;
            p = std::abs(p);
            if (2.0 * p < std::min(3.0 * half * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = half;
                e = d;
            }
        } else {
            d = half;
            e = d;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol) ? d : (half > 0.0 ? tol : -tol);
        fb = f(b);
    }
    throw NumericFailure("brent_root: iteration budget exhausted", b);
}

/// Plain bisection down to an absolute bracket width.
template <class F>
RootResult bisect_root(F&& f, double lo, double hi, double width, std::size_t max_iters = 2000) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return {lo, flo, lo, lo, 0};
    if (fhi == 0.0) return {hi, fhi, hi, hi, 0};
    if ((flo > 0.0) == (fhi > 0.0)) {
        throw NumericFailure("bisect_root: interval does not bracket a sign change");
    }
    std::size_t it = 0;
    while (hi - lo > width && it < max_iters) {
        ++it;
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        const double fm = f(mid);
        if (fm == 0.0) return {mid, fm, mid, mid, it};
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    const bool take_lo = std::abs(flo) <= std::abs(fhi);
    return {take_lo ? lo : hi, take_lo ? flo : fhi, lo, hi, it};
}

}  // namespace qpin
