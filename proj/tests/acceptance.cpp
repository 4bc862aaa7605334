// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "qpin/characterize.hpp"
#include "qpin/deny.hpp"
#include "qpin/grid.hpp"
#include "qpin/nef.hpp"
#include "qpin/specfun.hpp"

using namespace qpin;

namespace {

const double alpha_one = 1.0 - std::exp(-1.0);

struct Verdict {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

Verdict gaussian_pinning() {
    const auto start = std::chrono::steady_clock::now();
    const auto ts = linspace(-5.0, 5.0, 41);
    double worst = 0.0;
    for (double a : {0.1, 0.3, 0.5, alpha_one, 0.9}) {
        for (double b : {-1.0, 0.0, 2.0}) {
            const Alpha alpha(a);
            const auto r = scan_pin_residuals(GaussianLocation(m_star(alpha, b)), alpha, b, ts);
            worst = std::max(worst, r.failures ? INFINITY : r.max_abs);
        }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {worst <= 1e-10 && secs < 1.0, "max |F_t(b+t) - alpha| = " + fmt("%.3e", worst) + ", " + fmt("%.4f", secs) + " s"};
}

Verdict gamma_pinning() {
    const auto ts = logspace(0.1, 10.0, 41);
    double worst = 0.0;
    for (double a : {0.1, 0.5, alpha_one, 0.9}) {
        for (double s : {0.5, 1.0, 3.0}) {
            const Alpha alpha(a);
            const auto r = scan_pin_residuals(GammaWeight(p_star(alpha, s)), alpha, s, ts);
            worst = std::max(worst, r.failures ? INFINITY : r.max_abs);
        }
    }
    return {worst <= 1e-10, "max |G_t(a/t) - alpha| = " + fmt("%.3e", worst)};
}

Verdict pstar_round_trip() {
    double worst = 0.0;
    for (double a : {0.1, 0.5, alpha_one, 0.9}) {
        for (double s : {0.5, 1.0, 3.0}) {
            worst = std::max(worst, std::abs(reg_gamma_cdf(p_star(Alpha(a), s), s) - a));
        }
    }
    const double one = std::abs(p_star(Alpha(alpha_one), 1.0) - 1.0);
    return {worst <= 1e-12 && one <= 1e-9,
            "max |E_p*(a) - alpha| = " + fmt("%.3e", worst) + ", |p*(1-1/e, 1) - 1| = " + fmt("%.3e", one)};
}

const std::vector<double> kernel_alphas = {0.2, 0.5, alpha_one, 0.8};

Verdict kernel_normalization() {
    double worst = 0.0;
    for (double a : kernel_alphas) {
        worst = std::max(worst, std::abs(additive_kernel_mass(AdditiveKernel(Alpha(a))) - 1.0));
        worst = std::max(worst, std::abs(multiplicative_kernel_mass(MultiplicativeKernel(Alpha(a))) - 1.0));
    }
    return {worst <= 1e-8, "max |mass - 1| = " + fmt("%.3e", worst)};
}

Verdict transform_agreement() {
    double mgf_worst = 0.0, mellin_worst = 0.0;
    for (double a : kernel_alphas) {
        const AdditiveKernel h{Alpha(a)};
        const MultiplicativeKernel k{Alpha(a)};
        for (double s : linspace(h.m() - 3.0, h.m() + 3.0, 21)) {
            mgf_worst = std::max(mgf_worst, std::abs(additive_kernel_mgf(h, s) - additive_kernel_mgf_quadrature(h, s)));
        }
        for (double u : linspace(-k.p_star() + 0.1, 4.0, 21)) {
            mellin_worst = std::max(mellin_worst, std::abs(multiplicative_kernel_mellin(k, u) -
                                                           multiplicative_kernel_mellin_quadrature(k, u)));
        }
    }
    return {mgf_worst <= 1e-7 && mellin_worst <= 1e-7,
            "MGF " + fmt("%.3e", mgf_worst) + ", Mellin " + fmt("%.3e", mellin_worst)};
}

Verdict root_structure() {
    bool ok = true;
    double convex = INFINITY;
    std::string shapes;
    for (double a : kernel_alphas) {
        const AdditiveKernel h{Alpha(a)};
        const MultiplicativeKernel k{Alpha(a)};
        const RootScan rh = transform_root_scan(h, h.m() - 3.0, h.m() + 3.0, 401);
        const RootScan rk = transform_root_scan(k, -k.p_star() + 0.1, 4.0, 401);
        ok = ok && rh.complete && rk.complete && rh.matches_expected(1e-9) && rk.matches_expected(1e-9);
        ok = ok && rh.degenerate == (a == 0.5) && rk.degenerate == (a == alpha_one);
        shapes += " " + std::to_string(rh.roots.size()) + "/" + std::to_string(rk.roots.size());
        convex = std::min({convex, min_log_second_difference(h, h.m() - 3.0, h.m() + 3.0, 201),
                           min_log_second_difference(k, -k.p_star() + 0.1, 4.0, 201)});
    }
    ok = ok && convex >= -1e-9;
    return {ok, "root counts (additive/multiplicative):" + shapes + ", min log second difference " + fmt("%.3e", convex)};
}

double fixed_point_gap(const DenyOperator& op, const GridFunction& f) {
    const GridFunction tf = op.apply(f);
    double worst = 0.0;
    for (std::size_t i = op.interior().first; i <= op.interior().last; ++i) {
        worst = std::max(worst, std::abs(tf[i] - f[i]) / f[i]);
    }
    return worst;
}

Verdict deny_fixed_points() {
    double worst = 0.0;
    for (double a : {0.3, alpha_one, 0.7}) {
        const AdditiveKernel h{Alpha(a)};
        const DenyOperator add(h, standard_additive_grid());
        worst = std::max(worst, fixed_point_gap(add, GridFunction::sample(add.grid(), [](double) { return 1.0; })));
        worst = std::max(worst, fixed_point_gap(add, GridFunction::sample(add.grid(), [&](double x) {
                                                    return std::exp(-h.m() * x);
                                                })));
        const MultiplicativeKernel k{Alpha(a)};
        const DenyOperator mul(k, standard_log_grid());
        worst = std::max(worst, fixed_point_gap(mul, GridFunction::sample(mul.grid(), [](double v) {
                                                    return std::exp(-v);
                                                })));
        worst = std::max(worst, fixed_point_gap(mul, GridFunction::sample(mul.grid(), [&](double v) {
                                                    return std::exp((k.p_star() - 2.0) * v);
                                                })));
    }
    return {worst <= 1e-6, "max interior |Tf - f| / f = " + fmt("%.3e", worst)};
}

// Ratio of orthogonal residuals after / before 50 steps from (b0 + b1)(1 + sin(x)/2).
template <class Kernel>
double contraction_ratio(const Kernel& k) {
    const DenyOperator op(k, UniformGrid(-100.0, 100.0, 10001));
    std::vector<double> v(op.grid().size(), 0.0);
    for (const auto& b : op.basis()) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] += b[i];
    }
    for (std::size_t i = 0; i < v.size(); ++i) v[i] *= 1.0 + 0.5 * std::sin(op.grid().at(i));
    const GridFunction f0(op.grid(), v);
    const OperatorReport r = iterate(op, f0, 50);
    return op.project(*r.final_state, r.interior).orthogonal_residual /
           op.project(f0, r.interior).orthogonal_residual;
}

Verdict deny_contraction() {
    struct Case {
        const char* name;
        double alpha;
        bool additive;
        double baseline;  // measured ratio of the first run
    };
    const Case cases[] = {
        {"add 0.3", 0.3, true, BASELINE_ADD_03},    {"add 1-1/e", alpha_one, true, BASELINE_ADD_E},
        {"add 0.7", 0.7, true, BASELINE_ADD_07},    {"mul 0.3", 0.3, false, BASELINE_MUL_03},
        {"mul 1-1/e", alpha_one, false, BASELINE_MUL_E}, {"mul 0.7", 0.7, false, BASELINE_MUL_07},
    };
    bool ok = true;
    std::string detail;
    for (const Case& c : cases) {
        const double ratio = c.additive ? contraction_ratio(AdditiveKernel(Alpha(c.alpha)))
                                        : contraction_ratio(MultiplicativeKernel(Alpha(c.alpha)));
        const double limit = std::min(0.1, 1.2 * c.baseline);
        ok = ok && ratio <= limit;
        detail += std::string(detail.empty() ? "" : ", ") + c.name + " " + fmt("%.3e", ratio);
    }
    return {ok, "orthogonal residual ratio after 50 steps: " + detail};
}

Verdict counterexample_gaps() {
    double g_worst = 0.0, c_worst = 0.0;
    for (double a : {0.1, 0.3, 0.5, 0.8}) {
        for (double w : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double closed = gaussian_mixture_quantile_gap(Alpha(a), w);
            g_worst = std::max(g_worst, std::abs(closed - (1.0 - w) * (0.5 - a)));
            g_worst = std::max(g_worst, std::abs(closed - gaussian_mixture_quantile_gap_numeric(Alpha(a), w)));
        }
    }
    for (double a : {0.1, 0.5, alpha_one, 0.9}) {
        for (double c1 : {0.0, 0.5, 1.0, 3.0}) {
            c_worst = std::max(c_worst, std::abs(gamma_mixture_gap(Alpha(a), c1) - gamma_mixture_gap_numeric(Alpha(a), c1)));
        }
    }
    const double g_degenerate = std::abs(gaussian_mixture_quantile_gap(Alpha(0.5), 0.3));
    const double c_degenerate = std::abs(gamma_mixture_gap(Alpha(alpha_one), 5.0));
    return {g_worst <= 1e-12 && c_worst <= 1e-10 && g_degenerate == 0.0 && c_degenerate == 0.0,
            "gaussian " + fmt("%.3e", g_worst) + ", gamma " + fmt("%.3e", c_worst) + ", degenerate gaps " +
                fmt("%.1e", g_degenerate) + " / " + fmt("%.1e", c_degenerate)};
}

Verdict functional_identities() {
    const std::vector<double> st = {-1.0, -0.5, 0.0, 0.5, 1.0};
    const std::vector<double> pos = {0.25, 0.5, 1.0, 2.0, 4.0};
    double loc = 0.0, scale = 0.0, ode = 0.0;
    for (double m : {-0.8, 0.0, 1.3}) {
        for (double s : st) {
            for (double t : st) loc = std::max(loc, std::abs(location_identity_residual(GaussianLocation(m), s, t)));
        }
    }
    for (double p : {0.5, 1.0, 2.5}) {
        for (double s : pos) {
            for (double t : pos) scale = std::max(scale, std::abs(scale_identity_residual(GammaWeight(p), s, t)));
        }
        for (double u : {0.5, 1.0, 2.0, 4.0}) {
            ode = std::max(ode, std::abs(log_transform_ode_residual(GammaWeight(p), u, 1e-4)));
        }
    }
    return {loc <= 1e-12 && scale <= 1e-12 && ode <= 1e-6,
            "location " + fmt("%.3e", loc) + ", scale " + fmt("%.3e", scale) + ", ODE " + fmt("%.3e", ode)};
}

struct CliRun {
    int code = -1;
    std::string out;
};

CliRun run_cli(const std::string& args) {
    const std::string cmd = std::string(QPIN_CLI) + " " + args + " 2>/dev/null";
    CliRun r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

Verdict determinism() {
    const std::vector<std::string> commands = {
        "pstar --alpha 0.3 --a 2",
        "mstar --alpha 0.3 --b 1",
        "verify --kind location --alpha 0.3 --b 1",
        "verify --kind scale --alpha 0.7 --a 3",
        "kernel --kind mgf --alpha 0.3",
        "kernel --kind mellin --alpha 0.632120559",
        "deny --kind additive --alpha 0.3 --init mixture --iters 3 --lo -20 --hi 20 --n 4001",
        "counterexample --kind gamma --alpha 0.5 --c1 1",
    };
    for (const auto& c : commands) {
        const CliRun a = run_cli(c), b = run_cli(c);
        if (a.code != 0 || b.code != 0) return {false, "'" + c + "' exited with " + std::to_string(a.code)};
        if (a.out.empty() || a.out != b.out) return {false, "'" + c + "' output differs between runs"};
    }
    return {true, std::to_string(commands.size()) + " commands, byte-identical JSON on repeat"};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
        {"Gaussian pinning", gaussian_pinning},
        {"Gamma pinning", gamma_pinning},
        {"p* round trip", pstar_round_trip},
        {"Kernel normalization", kernel_normalization},
        {"Closed-form transform agreement", transform_agreement},
        {"Root structure", root_structure},
        {"Deny fixed points", deny_fixed_points},
        {"Deny contraction", deny_contraction},
        {"Counterexample gaps", counterexample_gaps},
        {"Functional identities", functional_identities},
        {"Determinism", determinism},
    };
    int failed = 0;
    int index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        Verdict v;
        try {
            v = check();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %2d %s: %s\n", v.pass ? "PASS" : "FAIL", index, name, v.detail.c_str());
        std::fflush(stdout);
        failed += v.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
