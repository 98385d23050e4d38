// Batch front end: reproduce the product tables, emit payout-curve and
// figure data as CSV, run cash-flow simulations, and check the theorem
// property grids.
//
// Exit codes: 0 success, 2 input validation, 3 numerical failure,
// 4 invariant failure.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tontine/csv.hpp"
#include "tontine/mortality.hpp"
#include "tontine/pool_math.hpp"
#include "tontine/products.hpp"
#include "tontine/quadrature.hpp"
#include "tontine/scenario.hpp"
#include "tontine/simulator.hpp"
#include "tontine/verify.hpp"

namespace {

constexpr std::uint64_t kDefaultSeed = 1693;

struct Options {
    std::string scenario_path;
    std::optional<std::uint64_t> seed;
    double tol = tontine::kDefaultRelTol;
    std::string out = "-";
    std::string grid = "full";
    std::string inject_fault;

    // parameter flags mirroring scenario keys; flag > file > default
    std::optional<double> m, b, l, x;
    std::optional<int> n;
    std::optional<double> gamma;
    std::optional<double> r, loading;
    std::optional<double> step;

    std::optional<std::string> product;
    std::optional<int> runs;
    std::optional<double> w;
    std::optional<int> omega;
    std::optional<double> annuity_rate;
    std::optional<double> valuation_rate;
};

tontine::Scenario load_scenario(const Options& opt) {
    tontine::Scenario sc;
    if (!opt.scenario_path.empty()) {
        std::ifstream in(opt.scenario_path, std::ios::binary);
        if (!in)
            throw std::domain_error("cannot open scenario file: " + opt.scenario_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        sc = tontine::parse_scenario_text(buf.str());
    }
    if (opt.step) {
        sc.grid_step = *opt.step;
        if (!(sc.grid_step > 0.0) || !(sc.grid_step <= 5.0))
            throw std::domain_error("--step must lie in (0, 5]");
    }
    if (opt.product) {
        sc.product = *opt.product;
        if (sc.product != "tontine" && sc.product != "annuity")
            throw std::domain_error("--product must be tontine or annuity");
    }
    if (opt.runs) {
        sc.runs = *opt.runs;
        if (sc.runs < 1) throw std::domain_error("--runs must be >= 1");
    }
    if (opt.w) {
        sc.w = *opt.w;
        if (!(sc.w > 0.0)) throw std::domain_error("--w must be > 0");
    }
    if (opt.omega) {
        sc.omega = *opt.omega;
        if (sc.omega < 1 || sc.omega > static_cast<int>(tontine::kMaxAge))
            throw std::domain_error("--omega must lie in [1, 130]");
    }
    if (opt.annuity_rate) {
        sc.annuity_rate = *opt.annuity_rate;
        if (!(sc.annuity_rate >= 0.0)) throw std::domain_error("--annuity-rate must be >= 0");
    }
    if (opt.valuation_rate) {
        sc.valuation_rate = *opt.valuation_rate;
        if (!(sc.valuation_rate > -1.0)) throw std::domain_error("--valuation-rate must exceed -1");
    }
    return sc;
}

tontine::MortalityBasis resolve_mortality(const tontine::Scenario& sc, const Options& opt) {
    const bool have = sc.mortality.has_value();
    const double m = opt.m.value_or(have ? sc.mortality->m : 88.72);
    const double b = opt.b.value_or(have ? sc.mortality->b : 10.0);
    const double l = opt.l.value_or(have ? sc.mortality->makeham : 0.0);
    const double x = opt.x.value_or(have ? sc.mortality->x : 65.0);
    return tontine::MortalityBasis(m, b, l, x);
}

tontine::PoolSpec resolve_pool(const tontine::Scenario& sc, const Options& opt) {
    const bool have = sc.pool.has_value();
    const int n = opt.n.value_or(have ? sc.pool->n : 25);
    const double gamma = opt.gamma.value_or(have ? sc.pool->gamma : 1.0);
    return tontine::PoolSpec(n, gamma);
}

tontine::EconomicBasis resolve_econ(const tontine::Scenario& sc, const Options& opt) {
    const bool have = sc.economic.has_value();
    const double r = opt.r.value_or(have ? sc.economic->r : 0.04);
    const double loading = opt.loading.value_or(have ? sc.economic->loading : 0.0);
    return tontine::EconomicBasis(r, loading);
}

std::uint64_t resolve_seed(const tontine::Scenario& sc, const Options& opt) {
    if (opt.seed) return *opt.seed;
    if (sc.seed) return *sc.seed;
    if (const char* env = std::getenv("TONTINE_SEED")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0') return static_cast<std::uint64_t>(v);
        throw std::domain_error("TONTINE_SEED must be an unsigned integer");
    }
    return kDefaultSeed;
}

void write_output(const std::string& path, const std::string& payload) {
    if (path == "-") {
        std::fwrite(payload.data(), 1, payload.size(), stdout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::domain_error("cannot open output file: " + path);
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
}

using tontine::format_number;

int cmd_payout(const Options& opt) {
    const auto sc = load_scenario(opt);
    const auto basis = resolve_mortality(sc, opt);
    const auto pool = resolve_pool(sc, opt);
    const auto econ = resolve_econ(sc, opt);
    const auto grid = tontine::default_grid(basis, econ, sc.grid_step);

    const auto optimal = tontine::tontine_payout_curve(tontine::PayoutKind::optimal, pool, basis, econ, grid, opt.tol);
    const auto natural = tontine::tontine_payout_curve(tontine::PayoutKind::natural, std::nullopt, basis, econ, grid, opt.tol);
    const auto flat = tontine::tontine_payout_curve(tontine::PayoutKind::flat, std::nullopt, basis, econ, grid, opt.tol);

    const tontine::PayoutCurve& env_curve =
        sc.envelope_for == "natural" ? natural : (sc.envelope_for == "flat" ? flat : optimal);
    const auto band = tontine::payout_envelope(pool, env_curve, {sc.percentile_lo, sc.percentile_hi});

    tontine::CsvWriter csv("t,age,survival,d_optimal,d_natural,d_flat,envelope_lo,envelope_hi");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double t = grid[i];
        csv.row({format_number(t), format_number(basis.x + t),
                 format_number(tontine::survival_probability(basis, t)),
                 format_number(optimal.rates[i]), format_number(natural.rates[i]),
                 format_number(flat.rates[i]), format_number(band.lo[i]), format_number(band.hi[i])});
    }

    bool budgets_ok = true;
    std::string diag = "budget:";
    for (const auto* curve : {&optimal, &natural, &flat}) {
        const double bud = tontine::budget_integral(*curve, opt.tol);
        budgets_ok = budgets_ok && std::fabs(bud - 1.0) < 1e-6;
        diag += std::string(" ") + tontine::to_string(curve->kind) + "=" + format_number(bud);
    }
    diag += budgets_ok ? " OK\n" : " FAIL\n";
    std::fputs(diag.c_str(), stderr);
    if (!budgets_ok) {
        std::fputs("error: a payout curve violates the budget constraint\n", stderr);
        return 3;
    }
    write_output(opt.out, csv.str());
    return 0;
}

int cmd_compare(const Options& opt) {
    const auto sc = load_scenario(opt);
    const auto basis = resolve_mortality(sc, opt);
    const auto base_pool = resolve_pool(sc, opt);
    const auto econ = resolve_econ(sc, opt);

    const std::vector<int> ns = sc.pool_sizes.empty() ? std::vector<int>{base_pool.n} : sc.pool_sizes;
    const std::vector<double> gammas = sc.gammas.empty() ? std::vector<double>{base_pool.gamma} : sc.gammas;

    tontine::CsvWriter csv("n,gamma,u_annuity,u_loaded_annuity,u_optimal_tontine,u_natural_tontine,loading_bp,ce_ratio");
    for (int n : ns) {
        for (double gamma : gammas) {
            const tontine::PoolSpec pool(n, gamma);
            const auto report = tontine::utility_report(pool, basis, econ, opt.tol);
            const double delta_bp = tontine::indifference_loading(pool, basis, econ, opt.tol) * 1e4;
            std::string u_nat = "diverges";
            std::string ce = "diverges";
            if (gamma <= 2.0) {
                u_nat = format_number(*report.u_natural_tontine);
                ce = format_number(tontine::certainty_equivalent_ratio(pool, basis, econ, opt.tol));
            }
            csv.row({format_number(n), format_number(gamma), format_number(report.u_annuity),
                     format_number(report.u_loaded_annuity), format_number(report.u_optimal_tontine),
                     u_nat, format_number(delta_bp), ce});
        }
    }
    write_output(opt.out, csv.str());
    return 0;
}

tontine::SimulationConfig build_sim_config(const tontine::Scenario& sc, const tontine::MortalityBasis& basis,
                                           std::uint64_t seed) {
    if (basis.x != std::floor(basis.x))
        throw std::domain_error("simulate: entry age x must be a whole number of years");
    tontine::SimulationConfig config{basis};
    config.n = sc.pool ? sc.pool->n : 1000;
    config.w = sc.w;
    config.product = sc.product == "annuity" ? tontine::Product::annuity : tontine::Product::tontine;
    config.payout_rate = [sc](int year) { return sc.schedule_rate(year); };
    config.annuity_rate = sc.annuity_rate;
    config.valuation_rate = sc.valuation_rate;
    config.omega = sc.omega;
    config.runs = sc.runs;
    config.seed = seed;
    config.seven_survivor_cap = sc.seven_survivor_cap;
    config.validate();
    return config;
}

int cmd_simulate(const Options& opt) {
    auto sc = load_scenario(opt);
    const auto basis = resolve_mortality(sc, opt);
    const std::uint64_t seed = resolve_seed(sc, opt);
    if (opt.n)
        sc.pool = tontine::PoolSpec(*opt.n, sc.pool ? sc.pool->gamma : 1.0);
    const auto config = build_sim_config(sc, basis, seed);

    const auto result = tontine::simulate_present_value(config);

    tontine::CsvWriter csv("scenario,apv,sd,skewness,kurtosis,runs,seed");
    csv.row({sc.id, format_number(result.apv), format_number(result.sd),
             format_number(result.skewness), format_number(result.kurtosis),
             std::to_string(result.runs), std::to_string(result.seed)});
    std::fprintf(stderr, "apv standard error: %s\n",
                 format_number(result.sd / std::sqrt(static_cast<double>(result.runs))).c_str());
    write_output(opt.out, csv.str());
    return 0;
}

int cmd_verify(const Options& opt) {
    tontine::VerifyOptions vopt;
    vopt.small_grid = opt.grid == "small";
    vopt.inject_fault = opt.inject_fault;
    const auto suites = tontine::run_verification(vopt);
    bool all_ok = true;
    std::string out;
    for (const auto& s : suites) {
        out += s.passed ? "PASS " : "FAIL ";
        out += s.name + " (" + s.grid + ", " + std::to_string(s.checks) + " checks)";
        if (!s.passed) {
            out += ": " + s.first_failure;
            all_ok = false;
        }
        out += '\n';
    }
    write_output(opt.out, out);
    return all_ok ? 0 : 4;
}

int cmd_tables(const Options& opt) {
    const std::string dir = opt.out == "-" ? "." : opt.out;
    const std::uint64_t seed = opt.seed.value_or(kDefaultSeed);

    // Tables 4-5: the 1693 cash-flow simulations, entry age 11, omega 105.
    {
        const std::vector<double> rates = {0.04, 0.06, 0.08};
        const std::vector<std::tuple<double, double, double>> bases = {
            {0.0104, 69.5, 13.8}, {0.0, 50.0, 10.0}};
        for (const auto product : {tontine::Product::tontine, tontine::Product::annuity}) {
            tontine::CsvWriter csv("interest,l,m,b,apv,sd,skewness,kurtosis,runs,seed");
            for (double rate : rates) {
                for (const auto& [l, m, b] : bases) {
                    tontine::SimulationConfig config{tontine::MortalityBasis(m, b, l, 11.0)};
                    config.n = 1000;
                    config.w = 100.0;
                    config.product = product;
                    config.payout_rate = [](int year) { return year <= 7 ? 0.10 : 0.07; };
                    config.annuity_rate = 0.14;
                    config.valuation_rate = rate;
                    config.omega = 105;
                    config.runs = 10000;
                    config.seed = seed;
                    const auto res = tontine::simulate_present_value(config);
                    csv.row({format_number(rate), format_number(l), format_number(m), format_number(b),
                             format_number(res.apv), format_number(res.sd), format_number(res.skewness),
                             format_number(res.kurtosis), std::to_string(res.runs), std::to_string(res.seed)});
                }
            }
            write_output(dir + (product == tontine::Product::tontine ? "/table4.csv" : "/table5.csv"), csv.str());
        }
    }

    // Table 6: optimal tontine payout rates, n=25, r=4%.
    {
        const tontine::MortalityBasis basis(88.72, 10.0, 0.0, 65.0);
        const tontine::EconomicBasis econ(0.04);
        tontine::CsvWriter csv("gamma,payout_age_65,payout_age_80,payout_age_95,survival_65,survival_80,survival_95");
        const double p15 = tontine::survival_probability(basis, 15.0);
        const double p30 = tontine::survival_probability(basis, 30.0);
        for (double gamma : {0.5, 1.0, 1.5, 2.0, 4.0, 9.0}) {
            const tontine::PoolSpec pool(25, gamma);
            const double d1 = tontine::optimal_tontine_initial_rate(pool, basis, econ, opt.tol);
            const tontine::PoolFunctionals pf(pool);
            csv.row({format_number(gamma), format_number(d1),
                     format_number(d1 * pf.beta_root(p15)), format_number(d1 * pf.beta_root(p30)),
                     format_number(1.0), format_number(p15), format_number(p30)});
        }
        write_output(dir + "/table6.csv", csv.str());
    }

    // Table 7: indifference loadings in basis points, age 60, r=3%.
    {
        const tontine::MortalityBasis basis(87.25, 9.5, 0.0, 60.0);
        const tontine::EconomicBasis econ(0.03);
        tontine::CsvWriter csv("gamma,n20,n100,n500,n1000,n5000");
        for (double gamma : {0.5, 1.0, 1.5, 2.0, 3.0, 9.0}) {
            std::vector<std::string> cells{format_number(gamma)};
            for (int n : {20, 100, 500, 1000, 5000}) {
                const double bp = tontine::indifference_loading(tontine::PoolSpec(n, gamma), basis, econ, opt.tol) * 1e4;
                cells.push_back(format_number(bp));
            }
            csv.row(cells);
        }
        write_output(dir + "/table7.csv", csv.str());
    }

    // Table 8: natural/optimal certainty-equivalent ratios, n=100, r=3%.
    {
        const tontine::EconomicBasis econ(0.03);
        tontine::CsvWriter csv("age,gamma_05,gamma_1,gamma_2");
        for (double age : {30.0, 40.0, 50.0, 60.0, 70.0, 80.0}) {
            const tontine::MortalityBasis basis(87.25, 9.5, 0.0, age);
            std::vector<std::string> cells{format_number(age)};
            for (double gamma : {0.5, 1.0, 2.0}) {
                cells.push_back(format_number(
                    tontine::certainty_equivalent_ratio(tontine::PoolSpec(100, gamma), basis, econ, opt.tol)));
            }
            csv.row(cells);
        }
        write_output(dir + "/table8.csv", csv.str());
    }
    return 0;
}

void add_common_flags(CLI::App* cmd, Options& opt, bool with_params = true) {
    cmd->add_option("--scenario", opt.scenario_path, "scenario JSON file");
    cmd->add_option("--seed", opt.seed, "RNG seed (overrides scenario file and TONTINE_SEED)");
    cmd->add_option("--tol", opt.tol, "quadrature relative tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--out", opt.out, "output path, - for stdout");
    if (with_params) {
        cmd->add_option("--m", opt.m, "modal age");
        cmd->add_option("--b", opt.b, "dispersion");
        cmd->add_option("--l", opt.l, "makeham add-on");
        cmd->add_option("--x", opt.x, "entry age");
        cmd->add_option("--n", opt.n, "pool size");
        cmd->add_option("--gamma", opt.gamma, "longevity risk aversion");
        cmd->add_option("--r", opt.r, "risk-free rate");
        cmd->add_option("--loading", opt.loading, "annuity loading");
        cmd->add_option("--step", opt.step, "grid step in years");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"optimal retirement tontine toolkit"};
    app.require_subcommand(1);

    Options opt;
    auto* payout = app.add_subcommand("payout", "emit payout curves and dividend envelope as CSV");
    add_common_flags(payout, opt);
    auto* compare = app.add_subcommand("compare", "utilities, indifference loadings and certainty equivalents");
    add_common_flags(compare, opt);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo present values of tontine/annuity cash flows");
    add_common_flags(simulate, opt);
    simulate->add_option("--product", opt.product, "tontine or annuity");
    simulate->add_option("--runs", opt.runs, "number of Monte Carlo runs");
    simulate->add_option("--w", opt.w, "per-share contribution");
    simulate->add_option("--omega", opt.omega, "maximum lifespan age");
    simulate->add_option("--annuity-rate", opt.annuity_rate, "annuity payment rate");
    simulate->add_option("--valuation-rate", opt.valuation_rate, "valuation rate R");
    auto* verify = app.add_subcommand("verify", "run the theorem property-grid suites");
    verify->add_option("--out", opt.out, "output path, - for stdout");
    verify->add_option("--grid", opt.grid, "grid size: small or full")
          ->check(CLI::IsMember({"small", "full"}));
    verify->add_option("--inject-fault", opt.inject_fault,
                       "test-only: invert the named suite to exercise the failure path");
    auto* tables = app.add_subcommand("tables", "regenerate the product tables into --out directory");
    tables->add_option("--out", opt.out, "output directory");
    tables->add_option("--seed", opt.seed, "RNG seed for the simulated tables");
    tables->add_option("--tol", opt.tol, "quadrature relative tolerance")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (payout->parsed()) return cmd_payout(opt);
        if (compare->parsed()) return cmd_compare(opt);
        if (simulate->parsed()) return cmd_simulate(opt);
        if (verify->parsed()) return cmd_verify(opt);
        if (tables->parsed()) return cmd_tables(opt);
        std::fputs("error: no command\n", stderr);
        return 2;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const tontine::quadrature_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const tontine::divergence_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (...) {
        std::fputs("numerical error: unknown failure\n", stderr);
        return 3;
    }
}
