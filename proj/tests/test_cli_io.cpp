#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "commands.hpp"
#include "report.hpp"

using namespace qpin;
using namespace qpin::cli;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace {

struct Run {
    int code = -1;
    std::string out;
};

Run run_cli(const std::string& args) {
    const std::string cmd = std::string(QPIN_CLI) + " " + args + " 2>/dev/null";
    Run r;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

report::Json parse(const std::string& s) { return report::Json::parse(s); }

std::filesystem::path scratch(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("qpin_test_" + name);
}

}  // namespace

TEST_CASE("JSON numbers carry 17 significant digits and keep field order", "[cli]") {
    report::Json j = {{"zeta", 0.1}, {"alpha", 1.0 / 3.0}, {"n", 3}, {"list", {1.5, 2.0}}, {"flag", true}};
    const std::string s = report::to_json(j);
    CHECK_THAT(s, ContainsSubstring("0.10000000000000001"));
    CHECK_THAT(s, ContainsSubstring("0.33333333333333331"));
    CHECK(s.find("zeta") < s.find("alpha"));
    CHECK(parse(s)["n"] == 3);
    CHECK(parse(s)["alpha"].get<double>() == 1.0 / 3.0);
    report::Json nan = {{"x", std::nan("")}};
    CHECK(parse(report::to_json(nan))["x"].is_null());
    CHECK(report::to_json(j) == s);
}

TEST_CASE("emit writes the whole file or nothing", "[cli]") {
    const auto path = scratch("emit.json");
    report::emit("{\"a\": 1}\n", path.string());
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "{\"a\": 1}\n");
    CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
    std::filesystem::remove(path);
    CHECK_THROWS(report::emit("x", "/nonexistent-dir/out.json"));
}

TEST_CASE("pstar and mstar commands", "[cli]") {
    const Outcome p = cmd_pstar({1.0 - std::exp(-1.0), 1.0, 1e-12});
    CHECK_THAT(p.json["p_star"].get<double>(), WithinAbs(1.0, 1e-9));
    CHECK(p.exit_code == ok);
    const Outcome half = cmd_pstar({0.5, 1.0, 1e-12});
    CHECK(half.json["residual"].get<double>() <= 1e-12);
    CHECK_THROWS_AS(cmd_pstar({1.2, 1.0, 1e-12}), DomainError);

    CHECK(cmd_mstar({0.5, 0.0, 1e-12}).json["m_star"].get<double>() == 0.0);
    CHECK(cmd_mstar({0.5, 1.5, 1e-12}).json["m_star"].get<double>() == 1.5);
    const Outcome m = cmd_mstar({0.3, 0.0, 1e-12});
    CHECK_THAT(m.json["m_star"].get<double>(), WithinAbs(0.5244005127080407840382893250251225543254, 1e-14));
    CHECK(m.json["residual"].get<double>() <= 1e-12);
    CHECK_THAT(m.csv, ContainsSubstring("alpha,b,m_star"));
}

TEST_CASE("verify command", "[cli]") {
    VerifyArgs loc;
    loc.alpha = 0.3;
    loc.shift = 1.0;
    const Outcome a = cmd_verify(loc);
    CHECK(a.exit_code == ok);
    CHECK(a.json["entries"].size() == 41);
    CHECK(a.json["max_abs"].get<double>() <= 1e-9);

    VerifyArgs sc;
    sc.kind = "scale";
    sc.alpha = 0.4;
    sc.base = "perturbed";
    const Outcome b = cmd_verify(sc);
    CHECK(b.exit_code == tolerance_exceeded);
    CHECK(b.json["max_abs"].get<double>() > 1e-3);

    const auto file = scratch("normal.txt");
    {
        std::ofstream out(file);
        out << "# standard normal density\n";
        for (int i = 0; i <= 8000; ++i) {
            const double x = -10.0 + 0.0025 * i;
            out << report::number(x) << ' ' << report::number(std_normal_pdf(x)) << '\n';
        }
    }
    VerifyArgs tab;
    tab.alpha = 0.5;
    tab.base = "file";
    tab.file = file.string();
    tab.t_min = -2.0;
    tab.t_max = 2.0;
    tab.tol = 1e-6;
    const Outcome c = cmd_verify(tab);
    CHECK(c.exit_code == ok);
    tab.t_max = 40.0;
    CHECK(cmd_verify(tab).exit_code == numeric);
    std::filesystem::remove(file);

    tab.file = "/nonexistent/table.txt";
    CHECK_THROWS_AS(cmd_verify(tab), ConfigError);
}

TEST_CASE("kernel command", "[cli]") {
    KernelArgs k;
    k.kind = "mgf";
    k.alpha = 0.3;
    const Outcome o = cmd_kernel(k);
    CHECK(o.exit_code == ok);
    CHECK(o.json["points"].size() == 21);
    CHECK(o.json["max_abs_diff"].get<double>() <= 1e-7);
    REQUIRE(o.json["roots"].size() == 2);
    CHECK(std::abs(o.json["roots"][0]["location"].get<double>()) <= 1e-9);
    CHECK_THAT(o.json["roots"][1]["location"].get<double>(), WithinAbs(AdditiveKernel(Alpha(0.3)).m(), 1e-9));

    k.kind = "mellin";
    k.alpha = 1.0 - std::exp(-1.0);
    const Outcome m = cmd_kernel(k);
    CHECK(m.exit_code == ok);
    REQUIRE(m.json["roots"].size() == 1);
    CHECK(m.json["roots"][0]["kind"] == "tangent");
    CHECK_THAT(m.csv, ContainsSubstring("u,closed_form,quadrature,diff"));
    CHECK_THAT(m.csv, ContainsSubstring("# root,"));

    k.lo = -5.0;
    CHECK_THROWS_AS(cmd_kernel(k), DomainError);
}

TEST_CASE("deny command", "[cli]") {
    DenyArgs d;
    d.alpha = 0.3;
    d.init = "const";
    d.iters = 3;
    d.lo = -20.0;
    d.hi = 20.0;
    d.n = 4001;
    d.tol = 1e-6;
    const Outcome c = cmd_deny(d);
    CHECK(c.exit_code == ok);
    CHECK(c.json["iterations"].size() == 4);
    CHECK(c.json["sup_residual"].get<double>() <= 1e-6);
    CHECK_THAT(c.json["projection"]["c0"].get<double>(), WithinAbs(1.0, 1e-6));

    d.kind = "multiplicative";
    d.init = "power";
    d.lo = -10.0;
    d.hi = 40.0;
    d.n = 5001;
    const Outcome p = cmd_deny(d);
    CHECK(p.exit_code == ok);
    CHECK_THAT(p.json["projection"]["c1"].get<double>(), WithinAbs(1.0, 1e-6));

    d.init = "exp";
    CHECK_THROWS_AS(cmd_deny(d), ConfigError);
    d.kind = "additive";
    d.init = "power";
    CHECK_THROWS_AS(cmd_deny(d), ConfigError);
    d.init = "const";
    d.lo = -3.0;
    d.hi = 3.0;
    d.n = 601;
    try {
        cmd_deny(d);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK_THAT(e.what(), ContainsSubstring("margin"));
    }
}

TEST_CASE("counterexample command", "[cli]") {
    CounterexampleArgs g;
    g.kind = "gamma";
    g.alpha = 1.0 - std::exp(-1.0);
    g.c1 = 5.0;
    CHECK(std::abs(cmd_counterexample(g).json["gap"].get<double>()) <= 1e-15);
    g.alpha = 0.5;
    g.c1 = 1.0;
    const Outcome o = cmd_counterexample(g);
    CHECK_THAT(o.json["gap"].get<double>(), WithinAbs(0.2642411176571153568089524596770782651084, 1e-15));
    CHECK(o.json["agreement"].get<double>() <= 1e-10);
    CHECK(o.exit_code == ok);

    CounterexampleArgs n;
    n.alpha = 0.3;
    n.weight = 1.0;
    CHECK(cmd_counterexample(n).json["gap"].get<double>() == 0.0);
    n.weight = 2.0;
    CHECK_THROWS_AS(cmd_counterexample(n), DomainError);
}

TEST_CASE("executable exit codes", "[cli]") {
    CHECK(run_cli("pstar --alpha 0.5 --a 1").code == 0);
    CHECK(run_cli("pstar --alpha 1.2").code == 2);
    CHECK(run_cli("pstar").code == 2);
    CHECK(run_cli("nosuchcommand").code == 2);
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("verify --kind scale --alpha 0.4 --base perturbed").code == 1);

    const auto bad = scratch("malformed.txt");
    {
        std::ofstream out(bad);
        out << "0 1\n0.5 abc\n";
    }
    CHECK(run_cli("verify --kind location --alpha 0.5 --base file --file " + bad.string()).code == 2);
    std::filesystem::remove(bad);

    CHECK(run_cli("deny --kind additive --alpha 0.3 --lo -3 --hi 3 --n 601").code == 2);
    CHECK(run_cli("deny --kind multiplicative --alpha 0.3 --init exp").code == 2);
}

TEST_CASE("executable output formats and files", "[cli]") {
    const Run j = run_cli("mstar --alpha 0.3 --b 0");
    REQUIRE(j.code == 0);
    CHECK_THAT(parse(j.out)["m_star"].get<double>(), WithinAbs(0.5244005127080407840382893250251225543254, 1e-14));
    const Run c = run_cli("mstar --alpha 0.3 --b 0 --format csv");
    CHECK_THAT(c.out, ContainsSubstring("alpha,b,m_star,quantile,residual\n"));

    const auto path = scratch("cx.json");
    REQUIRE(run_cli("counterexample --kind gamma --alpha 0.5 --c1 1 --out " + path.string()).code == 0);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK_THAT(parse(ss.str())["gap"].get<double>(), WithinAbs(1.0 - 2.0 / std::exp(1.0), 1e-15));
    std::filesystem::remove(path);

    CHECK(run_cli("kernel --kind mgf --alpha 0.3").out == run_cli("kernel --kind mgf --alpha 0.3").out);
}
