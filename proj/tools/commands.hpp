#pragma once

// Command implementations behind the qpin executable. Each command validates
// its parameters, runs, and returns both renderings of its report plus the
// exit code it implies.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "qpin/characterize.hpp"
#include "qpin/deny.hpp"
#include "qpin/grid.hpp"
#include "qpin/nef.hpp"
#include "qpin/specfun.hpp"
#include "qpin/table_io.hpp"
#include "report.hpp"

namespace qpin::cli {

enum Exit : int { ok = 0, tolerance_exceeded = 1, usage = 2, numeric = 3 };

struct Outcome {
    report::Json json;
    std::string csv;
    int exit_code = ok;
};

using report::number;

// pstar / mstar ------------------------------------------------------------

struct PStarArgs {
    double alpha = 0.5;
    double a = 1.0;
    double tol = 1e-12;
};

inline Outcome cmd_pstar(const PStarArgs& args) {
    const Alpha alpha(args.alpha);
    const PStarResult r = solve_p_star(alpha, args.a);
    Outcome o;
    o.json = {{"command", "pstar"},
              {"alpha", args.alpha},
              {"a", args.a},
              {"p_star", r.p_star},
              {"residual", r.residual},
              {"bracket", {r.bracket_lo, r.bracket_hi}},
              {"iterations", r.iterations}};
    report::Csv csv({"alpha", "a", "p_star", "residual", "bracket_lo", "bracket_hi", "iterations"});
    csv.row({number(args.alpha), number(args.a), number(r.p_star), number(r.residual), number(r.bracket_lo),
             number(r.bracket_hi), std::to_string(r.iterations)});
    o.csv = csv.str();
    o.exit_code = r.residual <= args.tol ? ok : tolerance_exceeded;
    return o;
}

struct MStarArgs {
    double alpha = 0.5;
    double b = 0.0;
    double tol = 1e-12;
};

inline Outcome cmd_mstar(const MStarArgs& args) {
    const Alpha alpha(args.alpha);
    if (!std::isfinite(args.b)) throw DomainError("b must be finite");
    const double m = m_star(alpha, args.b);
    const double q = std_normal_quantile(alpha);
    const double residual = std::abs(std_normal_cdf(args.b - m) - args.alpha);
    Outcome o;
    o.json = {{"command", "mstar"}, {"alpha", args.alpha}, {"b", args.b},
              {"m_star", m},        {"quantile", q},       {"residual", residual}};
    report::Csv csv({"alpha", "b", "m_star", "quantile", "residual"});
    csv.row({number(args.alpha), number(args.b), number(m), number(q), number(residual)});
    o.csv = csv.str();
    o.exit_code = residual <= args.tol ? ok : tolerance_exceeded;
    return o;
}

// verify -------------------------------------------------------------------

struct VerifyArgs {
    std::string kind = "location";  // location | scale
    double alpha = 0.5;
    std::optional<double> shift;    // b (location) or a (scale); defaults 0 resp. 1
    std::string base = "characterized";  // characterized | perturbed | file
    double perturb = 0.2;
    std::string file;
    std::optional<double> t_min, t_max;
    std::size_t t_count = 41;
    double tol = 1e-9;
};

inline Outcome cmd_verify(const VerifyArgs& args) {
    const Alpha alpha(args.alpha);
    const bool location = args.kind == "location";
    if (!location && args.kind != "scale") throw ConfigError("verify: kind must be location or scale");
    const double shift = args.shift.value_or(location ? 0.0 : 1.0);
    if (!std::isfinite(shift) || (!location && !(shift > 0.0))) {
        throw DomainError(location ? "verify: b must be finite" : "verify: a must be positive");
    }
    if (args.t_count < 2) throw ConfigError("verify: need at least 2 tilt values");

    std::vector<double> ts;
    if (location) {
        const double lo = args.t_min.value_or(-5.0), hi = args.t_max.value_or(5.0);
        ts = linspace(lo, hi, args.t_count);
    } else {
        const double lo = args.t_min.value_or(0.1), hi = args.t_max.value_or(10.0);
        if (!(lo > 0.0)) throw DomainError("verify: scale tilts must be positive");
        ts = logspace(lo, hi, args.t_count);
    }

    report::Json base_json;
    std::optional<BaseMeasure> base;
    if (args.base == "characterized" || args.base == "perturbed") {
        const double delta = args.base == "perturbed" ? args.perturb : 0.0;
        if (!std::isfinite(delta)) throw DomainError("verify: perturbation must be finite");
        if (location) {
            const double m = m_star(alpha, shift) + delta;
            base = GaussianLocation(m);
            base_json = {{"type", "gaussian"}, {"mean", m}, {"perturbation", delta}};
        } else {
            const double p = p_star(alpha, shift) + delta;
            base = GammaWeight(p);
            base_json = {{"type", "gamma"}, {"shape", p}, {"perturbation", delta}};
        }
    } else if (args.base == "file") {
        if (args.file.empty()) throw ConfigError("verify: --base file needs --file");
        Table t = read_table_file(args.file);
        if (location) {
            base = TabulatedLine(t.grid, std::move(t.values));
        } else {
            base = TabulatedHalfline(t.grid, std::move(t.values));
        }
        base_json = {{"type", "tabulated"}, {"file", args.file}};
    } else {
        throw ConfigError("verify: base must be characterized, perturbed or file");
    }

    const ResidualReport r = scan_pin_residuals(*base, alpha, shift, ts);
    Outcome o;
    report::Json entries = report::Json::array();
    report::Csv csv({"t", "residual", "error"});
    for (const auto& e : r.entries) {
        report::Json j = {{"t", e.parameter}};
        if (e.ok()) {
            j["residual"] = e.residual;
            csv.row({number(e.parameter), number(e.residual), ""});
        } else {
            j["residual"] = nullptr;
            j["error"] = e.failure;
            csv.row({number(e.parameter), "", "\"" + e.failure + "\""});
        }
        entries.push_back(std::move(j));
    }
    csv.comment("max_abs," + number(r.max_abs));
    o.json = {{"command", "verify"},
              {"kind", args.kind},
              {"alpha", args.alpha},
              {location ? "b" : "a", shift},
              {"base", base_json},
              {"tol", args.tol},
              {"max_abs", r.max_abs},
              {"failures", r.failures},
              {"entries", entries}};
    o.csv = csv.str();
    if (r.failures > 0) {
        o.exit_code = numeric;
    } else {
        o.exit_code = r.max_abs <= args.tol ? ok : tolerance_exceeded;
    }
    return o;
}

// kernel -------------------------------------------------------------------

struct KernelArgs {
    std::string kind = "mgf";  // mgf | mellin
    double alpha = 0.5;
    std::optional<double> lo, hi;
    std::size_t steps = 21;
    std::size_t root_points = 401;
    double tol = 1e-7;
};

inline Outcome cmd_kernel(const KernelArgs& args) {
    const Alpha alpha(args.alpha);
    const bool mgf_kind = args.kind == "mgf";
    if (!mgf_kind && args.kind != "mellin") throw ConfigError("kernel: kind must be mgf or mellin");
    if (args.steps < 2) throw ConfigError("kernel: need at least 2 steps");

    const char* var = mgf_kind ? "s" : "u";
    report::Json points = report::Json::array();
    report::Csv csv({var, "closed_form", "quadrature", "diff"});
    double max_diff = 0.0;
    RootScan scan;
    report::Json header;

    auto sweep = [&](auto closed, auto quad, double lo, double hi) {
        if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi)) {
            throw DomainError("kernel: need a finite range lo < hi");
        }
        for (double x : linspace(lo, hi, args.steps)) {
            const double c = closed(x), q = quad(x), d = c - q;
            max_diff = std::max(max_diff, std::abs(d));
            points.push_back({{var, x}, {"closed_form", c}, {"quadrature", q}, {"diff", d}});
            csv.row({number(x), number(c), number(q), number(d)});
        }
    };

    double lo = 0.0, hi = 0.0;
    if (mgf_kind) {
        const AdditiveKernel k(alpha);
        lo = args.lo.value_or(k.m() - 3.0);
        hi = args.hi.value_or(k.m() + 3.0);
        sweep([&](double s) { return additive_kernel_mgf(k, s); },
              [&](double s) { return additive_kernel_mgf_quadrature(k, s); }, lo, hi);
        scan = transform_root_scan(k, lo, hi, args.root_points);
        header = {{"m", k.m()}};
    } else {
        const MultiplicativeKernel k(alpha);
        lo = args.lo.value_or(-k.p_star() + 0.1);
        hi = args.hi.value_or(4.0);
        if (!(lo > -k.p_star())) throw DomainError("kernel: Mellin range must satisfy u > -p*");
        sweep([&](double u) { return multiplicative_kernel_mellin(k, u); },
              [&](double u) { return multiplicative_kernel_mellin_quadrature(k, u); }, lo, hi);
        scan = transform_root_scan(k, lo, hi, args.root_points);
        header = {{"p_star", k.p_star()}};
    }

    report::Json roots = report::Json::array();
    for (const auto& r : scan.roots) {
        const char* kind = r.kind == RootKind::tangent ? "tangent" : "simple";
        roots.push_back({{"location", r.location}, {"kind", kind}});
        csv.comment(std::string("root,") + number(r.location) + "," + kind);
    }
    const bool match = scan.matches_expected(1e-9);
    csv.comment("max_abs_diff," + number(max_diff));

    Outcome o;
    o.json = {{"command", "kernel"}, {"kind", args.kind}, {"alpha", args.alpha}};
    for (auto it = header.begin(); it != header.end(); ++it) o.json[it.key()] = it.value();
    o.json["range"] = {lo, hi};
    o.json["steps"] = args.steps;
    o.json["tol"] = args.tol;
    o.json["points"] = points;
    o.json["max_abs_diff"] = max_diff;
    o.json["roots"] = roots;
    o.json["expected_roots"] = scan.expected;
    o.json["degenerate"] = scan.degenerate;
    o.json["scan_complete"] = scan.complete;
    o.json["roots_match"] = match;
    o.csv = csv.str();
    const bool roots_bad = scan.complete && !match;
    o.exit_code = (max_diff <= args.tol && !roots_bad) ? ok : tolerance_exceeded;
    return o;
}

// deny ---------------------------------------------------------------------

struct DenyArgs {
    std::string kind = "additive";  // additive | multiplicative
    double alpha = 0.5;
    std::string init = "const";     // const | exp | power | mixture | file
    std::string file;
    std::optional<double> exponent;  // power init, default p* - 2
    std::optional<double> perturb;   // sine amplitude, default 0.5 for mixture, 0 otherwise
    double omega = 1.0;
    std::size_t iters = 50;
    double lo = -100.0;
    double hi = 100.0;
    std::size_t n = 10001;
    double leak_tol = 1e-7;
    std::optional<double> tol;
};

inline Outcome cmd_deny(const DenyArgs& args) {
    const Alpha alpha(args.alpha);
    const bool additive = args.kind == "additive";
    if (!additive && args.kind != "multiplicative") {
        throw ConfigError("deny: kind must be additive or multiplicative");
    }
    if (args.iters < 1) throw ConfigError("deny: need at least one iteration");
    if (!(args.leak_tol > 0.0)) throw ConfigError("deny: leak tolerance must be positive");

    std::optional<GridFunction> start;
    UniformGrid grid(args.lo, args.hi, args.n);
    if (args.init == "file") {
        if (args.file.empty()) throw ConfigError("deny: --init file needs --file");
        Table t = read_table_file(args.file);
        grid = t.grid;
        start.emplace(t.grid, std::move(t.values));
    }

    const std::optional<DenyOperator> op = additive
        ? std::optional<DenyOperator>(std::in_place, AdditiveKernel(alpha), grid)
        : std::optional<DenyOperator>(std::in_place, MultiplicativeKernel(alpha), grid);

    const double amplitude = args.perturb.value_or(args.init == "mixture" ? 0.5 : 0.0);
    if (!std::isfinite(amplitude) || !std::isfinite(args.omega)) {
        throw ConfigError("deny: perturbation must be finite");
    }
    if (!start) {
        std::vector<double> v(grid.size());
        if (args.init == "const") {
            if (!additive) throw ConfigError("deny: init const applies to the additive kind; use power");
            std::fill(v.begin(), v.end(), 1.0);
        } else if (args.init == "exp") {
            if (!additive) throw ConfigError("deny: init exp applies to the additive kind; use power");
            const double m = AdditiveKernel(alpha).m();
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(-m * grid.at(i));
        } else if (args.init == "power") {
            if (additive) throw ConfigError("deny: init power applies to the multiplicative kind");
            const double e = args.exponent.value_or(MultiplicativeKernel(alpha).p_star() - 2.0);
            for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::exp(e * grid.at(i));
        } else if (args.init == "mixture") {
            for (const auto& b : op->basis()) {
                for (std::size_t i = 0; i < v.size(); ++i) v[i] += b[i];
            }
        } else {
            throw ConfigError("deny: init must be const, exp, power, mixture or file");
        }
        if (amplitude != 0.0) {
            for (std::size_t i = 0; i < v.size(); ++i) v[i] *= 1.0 + amplitude * std::sin(args.omega * grid.at(i));
        }
        start.emplace(grid, std::move(v));
    }

    IterateOptions opts;
    opts.leak_tol = args.leak_tol;
    opts.project_each = true;
    const OperatorReport rep = op->iterate(*start, args.iters, opts);
    const Projection initial = op->project(*start, rep.interior);
    const Projection final = op->project(*rep.final_state, rep.interior);

    report::Json trace = report::Json::array();
    report::Csv csv({"iteration", "residual", "orthogonal_residual"});
    for (std::size_t k = 0; k < rep.iterations.size(); ++k) {
        trace.push_back({{"iteration", k}, {"residual", rep.iterations[k]}, {"orthogonal_residual", rep.orthogonal[k]}});
        csv.row({std::to_string(k), number(rep.iterations[k]), number(rep.orthogonal[k])});
    }
    csv.comment("projection,c0," + number(final.c0) + ",c1," + number(final.c1) + ",orthogonal_residual," +
                number(final.orthogonal_residual) + ",initial_orthogonal_residual," +
                number(initial.orthogonal_residual));

    Outcome o;
    o.json = {{"command", "deny"},
              {"kind", args.kind},
              {"alpha", args.alpha},
              {"root", op->root()},
              {"collapsed", op->collapsed()},
              {"grid", {{"lo", grid.lo()}, {"hi", grid.hi()}, {"n", grid.size()}}},
              {"reach", {{"below", op->reach_below()}, {"above", op->reach_above()}}},
              {"interior", {grid.at(op->interior().first), grid.at(op->interior().last)}},
              {"init", args.init},
              {"perturb", amplitude},
              {"iters", args.iters},
              {"leak_tol", args.leak_tol},
              {"interior_range", {rep.interior_lo, rep.interior_hi}},
              {"sup_residual", rep.sup_residual},
              {"iterations", trace},
              {"projection",
               {{"c0", final.c0},
                {"c1", final.c1},
                {"orthogonal_residual", final.orthogonal_residual},
                {"initial_orthogonal_residual", initial.orthogonal_residual}}}};
    if (args.tol) o.json["tol"] = *args.tol;
    o.csv = csv.str();
    o.exit_code = (!args.tol || rep.sup_residual <= *args.tol) ? ok : tolerance_exceeded;
    return o;
}

// counterexample -----------------------------------------------------------

struct CounterexampleArgs {
    std::string kind = "gaussian";  // gaussian | gamma
    double alpha = 0.5;
    double weight = 0.5;
    double c1 = 1.0;
    double tol = 1e-10;
};

inline Outcome cmd_counterexample(const CounterexampleArgs& args) {
    const Alpha alpha(args.alpha);
    double gap = 0.0, numeric_gap = 0.0;
    Outcome o;
    o.json = {{"command", "counterexample"}, {"kind", args.kind}, {"alpha", args.alpha}};
    if (args.kind == "gaussian") {
        gap = gaussian_mixture_quantile_gap(alpha, args.weight);
        numeric_gap = gaussian_mixture_quantile_gap_numeric(alpha, args.weight);
        o.json["weight"] = args.weight;
    } else if (args.kind == "gamma") {
        gap = gamma_mixture_gap(alpha, args.c1);
        numeric_gap = gamma_mixture_gap_numeric(alpha, args.c1);
        o.json["c1"] = args.c1;
    } else {
        throw ConfigError("counterexample: kind must be gaussian or gamma");
    }
    const double agreement = std::abs(gap - numeric_gap);
    o.json["gap"] = gap;
    o.json["numeric"] = numeric_gap;
    o.json["agreement"] = agreement;
    o.json["tol"] = args.tol;
    report::Csv csv({"kind", "alpha", args.kind == "gaussian" ? "weight" : "c1", "gap", "numeric", "agreement"});
    csv.row({args.kind, number(args.alpha), number(args.kind == "gaussian" ? args.weight : args.c1), number(gap),
             number(numeric_gap), number(agreement)});
    o.csv = csv.str();
    o.exit_code = agreement <= args.tol ? ok : tolerance_exceeded;
    return o;
}

}  // namespace qpin::cli
