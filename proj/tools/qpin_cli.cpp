// qpin: quantile pinning checks from the command line.
//
//   qpin <command> [--flags]
//
// Exit codes: 0 ok, 1 tolerance exceeded, 2 usage or configuration error,
// 3 numeric failure.

#include <exception>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"

namespace {

using namespace qpin::cli;

struct Common {
    std::string format = "json";
    std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--format", c.format, "Report format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    cmd->add_option("--out", c.out, "Output file (default: standard output)");
}

template <class T>
void add_optional(CLI::App* cmd, const std::string& name, std::optional<T>& target, const std::string& help) {
    cmd->add_option_function<T>(name, [&target](const T& v) { target = v; }, help);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exponential-family quantile pinning: characterization, transforms and Deny equations", "qpin"};
    app.require_subcommand(1);

    Common common;
    std::function<Outcome()> run;

    PStarArgs pstar;
    auto* c_pstar = app.add_subcommand("pstar", "Gamma shape p* with E_p(a) = alpha");
    c_pstar->add_option("--alpha", pstar.alpha, "Quantile level in (0,1)")->required();
    c_pstar->add_option("--a", pstar.a, "Scale quantile point a > 0")->capture_default_str();
    c_pstar->add_option("--tol", pstar.tol, "Residual tolerance")->capture_default_str();
    add_common(c_pstar, common);
    c_pstar->callback([&] { run = [&] { return cmd_pstar(pstar); }; });

    MStarArgs mstar;
    auto* c_mstar = app.add_subcommand("mstar", "Gaussian mean m* = b - Phi^{-1}(alpha)");
    c_mstar->add_option("--alpha", mstar.alpha, "Quantile level in (0,1)")->required();
    c_mstar->add_option("--b", mstar.b, "Location quantile point")->capture_default_str();
    c_mstar->add_option("--tol", mstar.tol, "Residual tolerance")->capture_default_str();
    add_common(c_mstar, common);
    c_mstar->callback([&] { run = [&] { return cmd_mstar(mstar); }; });

    VerifyArgs verify;
    auto* c_verify = app.add_subcommand("verify", "Scan pin residuals of a tilted family");
    c_verify->add_option("--kind", verify.kind, "location or scale")
        ->check(CLI::IsMember({"location", "scale"}))
        ->capture_default_str();
    c_verify->add_option("--alpha", verify.alpha, "Quantile level in (0,1)")->required();
    add_optional(c_verify, "--b", verify.shift, "Location quantile point (default 0)");
    add_optional(c_verify, "--a", verify.shift, "Scale quantile point (default 1)");
    c_verify->add_option("--base", verify.base, "characterized, perturbed or file")
        ->check(CLI::IsMember({"characterized", "perturbed", "file"}))
        ->capture_default_str();
    c_verify->add_option("--perturb", verify.perturb, "Shift of m* or p* for the perturbed base")
        ->capture_default_str();
    c_verify->add_option("--file", verify.file, "Tabulated base density (two columns)");
    add_optional(c_verify, "--t-min", verify.t_min, "Smallest tilt (default -5, scale 0.1)");
    add_optional(c_verify, "--t-max", verify.t_max, "Largest tilt (default 5, scale 10)");
    c_verify->add_option("--t-count", verify.t_count, "Number of tilts")->capture_default_str();
    c_verify->add_option("--tol", verify.tol, "Max residual for exit 0")->capture_default_str();
    add_common(c_verify, common);
    c_verify->callback([&] { run = [&] { return cmd_verify(verify); }; });

    KernelArgs kernel;
    auto* c_kernel = app.add_subcommand("kernel", "Kernel transform: closed form vs quadrature, root scan");
    c_kernel->add_option("--kind", kernel.kind, "mgf or mellin")
        ->check(CLI::IsMember({"mgf", "mellin"}))
        ->capture_default_str();
    c_kernel->add_option("--alpha", kernel.alpha, "Quantile level in (0,1)")->required();
    add_optional(c_kernel, "--lo", kernel.lo, "Scan start (default m-3, or -p*+0.1)");
    add_optional(c_kernel, "--hi", kernel.hi, "Scan end (default m+3, or 4)");
    c_kernel->add_option("--steps", kernel.steps, "Number of scan points")->capture_default_str();
    c_kernel->add_option("--root-points", kernel.root_points, "Sampling points of the root scan")
        ->capture_default_str();
    c_kernel->add_option("--tol", kernel.tol, "Max |closed - quadrature| for exit 0")->capture_default_str();
    add_common(c_kernel, common);
    c_kernel->callback([&] { run = [&] { return cmd_kernel(kernel); }; });

    DenyArgs deny;
    auto* c_deny = app.add_subcommand("deny", "Iterate a discretized Deny operator and project onto its solutions");
    c_deny->add_option("--kind", deny.kind, "additive or multiplicative")
        ->check(CLI::IsMember({"additive", "multiplicative"}))
        ->capture_default_str();
    c_deny->add_option("--alpha", deny.alpha, "Quantile level in (0,1)")->required();
    c_deny->add_option("--init", deny.init, "const, exp, power, mixture or file")
        ->check(CLI::IsMember({"const", "exp", "power", "mixture", "file"}))
        ->capture_default_str();
    c_deny->add_option("--file", deny.file, "Starting function table (x or log t, value)");
    add_optional(c_deny, "--exponent", deny.exponent, "Exponent of the power start (default p*-2)");
    add_optional(c_deny, "--perturb", deny.perturb, "Amplitude of the sine perturbation");
    c_deny->add_option("--omega", deny.omega, "Frequency of the sine perturbation")->capture_default_str();
    c_deny->add_option("--iters", deny.iters, "Number of iterations")->capture_default_str();
    c_deny->add_option("--lo", deny.lo, "Grid start (x or log t)")->capture_default_str();
    c_deny->add_option("--hi", deny.hi, "Grid end")->capture_default_str();
    c_deny->add_option("--n", deny.n, "Grid points")->capture_default_str();
    c_deny->add_option("--leak-tol", deny.leak_tol, "Relative drift of the basis that ends the trusted window")
        ->capture_default_str();
    add_optional(c_deny, "--tol", deny.tol, "Max residual for exit 0 (default: no check)");
    add_common(c_deny, common);
    c_deny->callback([&] { run = [&] { return cmd_deny(deny); }; });

    CounterexampleArgs cx;
    auto* c_cx = app.add_subcommand("counterexample", "Quantile defect of mixtures outside the characterized family");
    c_cx->add_option("--kind", cx.kind, "gaussian or gamma")
        ->check(CLI::IsMember({"gaussian", "gamma"}))
        ->capture_default_str();
    c_cx->add_option("--alpha", cx.alpha, "Quantile level in (0,1)")->required();
    c_cx->add_option("--weight", cx.weight, "Weight of N(m*,1) in the Gaussian mixture")->capture_default_str();
    c_cx->add_option("--c1", cx.c1, "Constant added to the gamma weight")->capture_default_str();
    c_cx->add_option("--tol", cx.tol, "Max |closed - numeric| for exit 0")->capture_default_str();
    add_common(c_cx, common);
    c_cx->callback([&] { run = [&] { return cmd_counterexample(cx); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : usage;
    }

    try {
        const Outcome o = run();
        try {
            qpin::report::emit(common.format == "csv" ? o.csv : qpin::report::to_json(o.json), common.out);
        } catch (const std::exception& e) {
            std::cerr << "qpin: " << e.what() << "\n";
            return usage;
        }
        return o.exit_code;
    } catch (const qpin::NumericFailure& e) {
        std::cerr << "qpin: numeric failure: " << e.what() << " (best estimate " << qpin::report::number(e.best_estimate())
                  << ")\n";
        return numeric;
    } catch (const std::domain_error& e) {
        std::cerr << "qpin: " << e.what() << "\n";
        return usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "qpin: " << e.what() << "\n";
        return usage;
    } catch (const std::exception& e) {
        std::cerr << "qpin: " << e.what() << "\n";
        return numeric;
    }
}
