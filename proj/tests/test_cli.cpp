// Behavioral tests against the built CLI binary: exit codes, CSV contracts,
// determinism, and the verify self-test.

#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace {

struct RunResult {
    int exit_code;
    std::string out;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

int decode_exit(int status) {
#ifdef _WIN32
    return status;
#else
    return WEXITSTATUS(status);
#endif
}

RunResult run_cli(const std::string& args, const std::string& tag, const std::string& env = "") {
    const std::string out_path = std::string("/tmp/tontine_cli_") + tag + ".out";
    const std::string cmd = env + std::string(TONTINE_CLI_PATH) + " " + args +
                            " > " + out_path + " 2>/tmp/tontine_cli_stderr.log";
    const int status = std::system(cmd.c_str());
    return {decode_exit(status), slurp(out_path)};
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ','))
        cells.push_back(cell);
    return cells;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line))
        rows.push_back(split_csv_line(line));
    return rows;
}

} // namespace

TEST_CASE("payout emits the fixed header and consistent curves") {
    const auto res = run_cli("payout --n 25 --gamma 1 --r 0.04 --m 88.72 --b 10 --x 65 --step 1", "payout");
    REQUIRE(res.exit_code == 0);
    const auto rows = parse_csv(res.out);
    REQUIRE(rows.size() > 30);
    CHECK(rows[0] == std::vector<std::string>{"t", "age", "survival", "d_optimal", "d_natural",
                                              "d_flat", "envelope_lo", "envelope_hi"});
    // gamma = 1: optimal column equals natural column, flat column is r
    for (std::size_t i = 1; i < rows.size(); ++i) {
        REQUIRE(rows[i].size() == 8);
        CHECK(rows[i][3] == rows[i][4]);
        CHECK(rows[i][5] == "0.04");
    }
    // first row: t = 0, survival 1, both envelope bounds equal d(0)
    CHECK(rows[1][0] == "0");
    CHECK(rows[1][2] == "1");
    CHECK(rows[1][6] == rows[1][3]);
    CHECK(rows[1][7] == rows[1][3]);
    // payout-table rows at ages 65/80/95 (step 1: t = 0, 15, 30)
    CHECK(std::stod(rows[1][3]) == Catch::Approx(0.07520).margin(1e-4));
    CHECK(std::stod(rows[16][3]) == Catch::Approx(0.05435).margin(1e-4));
    CHECK(std::stod(rows[31][3]) == Catch::Approx(0.01268).margin(1e-4));
}

TEST_CASE("compare reproduces the loading table anchor and flags divergence") {
    write_file("/tmp/tontine_compare.json", R"({
        "mortality": {"m": 87.25, "b": 9.5, "x": 60},
        "economic": {"r": 0.03},
        "pool": {"n": 100, "gamma": 1.0},
        "compare": {"gammas": [1.0, 2.5], "pool_sizes": [100]}
    })");
    const auto res = run_cli("compare --scenario /tmp/tontine_compare.json", "compare");
    REQUIRE(res.exit_code == 0);
    const auto rows = parse_csv(res.out);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0][0] == "n");
    // gamma = 1 row: loading 27.4 bp, ce exactly 1
    CHECK(std::stod(rows[1][6]) == Catch::Approx(27.4).margin(0.3));
    CHECK(rows[1][7] == "1");
    // gamma = 2.5 row: natural utility and ce column carry the divergence marker
    CHECK(rows[2][5] == "diverges");
    CHECK(rows[2][7] == "diverges");
}

TEST_CASE("simulate is byte-identical for a fixed seed") {
    write_file("/tmp/tontine_sim.json", R"({
        "id": "anchor",
        "mortality": {"m": 69.5, "b": 13.8, "l": 0.0104, "x": 10},
        "pool": {"n": 1000, "gamma": 1.0},
        "simulate": {"runs": 4000, "valuation_rate": 0.06},
        "seed": 777
    })");
    const auto a = run_cli("simulate --scenario /tmp/tontine_sim.json", "sim_a");
    const auto b = run_cli("simulate --scenario /tmp/tontine_sim.json", "sim_b");
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(a.out == b.out);
    const auto rows = parse_csv(a.out);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == std::vector<std::string>{"scenario", "apv", "sd", "skewness", "kurtosis", "runs", "seed"});
    CHECK(rows[1][0] == "anchor");
    CHECK(rows[1][5] == "4000");
    CHECK(rows[1][6] == "777");
    // flag overrides the file seed
    const auto c = run_cli("simulate --scenario /tmp/tontine_sim.json --seed 9", "sim_c");
    const auto crows = parse_csv(c.out);
    CHECK(crows[1][6] == "9");
    CHECK(c.out != a.out);
}

TEST_CASE("verify passes on the small grid and fails under fault injection") {
    const auto start = std::chrono::steady_clock::now();
    const auto ok = run_cli("verify --grid small", "verify_ok");
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(ok.exit_code == 0);
    CHECK(elapsed < 10.0);
    CHECK(ok.out.find("PASS beta-bound") != std::string::npos);
    CHECK(ok.out.find("FAIL") == std::string::npos);

    const auto bad = run_cli("verify --grid small --inject-fault loading-bound", "verify_bad");
    CHECK(bad.exit_code == 4);
    CHECK(bad.out.find("FAIL loading-bound") != std::string::npos);
}

TEST_CASE("seed falls back to the environment variable") {
    write_file("/tmp/tontine_env.json", R"({
        "mortality": {"m": 69.5, "b": 13.8, "l": 0.0104, "x": 10},
        "pool": {"n": 50, "gamma": 1.0},
        "simulate": {"runs": 200, "valuation_rate": 0.06}
    })");
    const auto res = run_cli("simulate --scenario /tmp/tontine_env.json",
                             "env_seed", "TONTINE_SEED=555 ");
    REQUIRE(res.exit_code == 0);
    const auto rows = parse_csv(res.out);
    CHECK(rows[1][6] == "555");
    // an explicit flag still wins over the environment
    const auto flag = run_cli("simulate --scenario /tmp/tontine_env.json --seed 6",
                              "env_seed_flag", "TONTINE_SEED=555 ");
    CHECK(parse_csv(flag.out)[1][6] == "6");
}

TEST_CASE("validation failures exit with code 2") {
    write_file("/tmp/tontine_bad.json", R"({"mortality": {"m": 88, "b": 10, "x": 65}, "extra": true})");
    CHECK(run_cli("payout --scenario /tmp/tontine_bad.json", "bad_key").exit_code == 2);
    CHECK(run_cli("payout --scenario /tmp/does_not_exist.json", "bad_file").exit_code == 2);
    CHECK(run_cli("payout --b -1", "bad_b").exit_code == 2);
    CHECK(run_cli("frobnicate", "bad_cmd").exit_code == 2);
    CHECK(run_cli("simulate --x 10.5", "bad_x").exit_code == 2);
}

TEST_CASE("shipped scenario files run end to end") {
    const std::string dir = TONTINE_SCENARIO_DIR;
    const auto payout = run_cli("payout --scenario " + dir + "/table6_payout.json --step 1", "sc_payout");
    REQUIRE(payout.exit_code == 0);
    const auto prows = parse_csv(payout.out);
    CHECK(std::stod(prows[1][3]) == Catch::Approx(0.07520).margin(1e-4));

    // identical inputs give byte-identical CSV
    const auto payout2 = run_cli("payout --scenario " + dir + "/table6_payout.json --step 1", "sc_payout2");
    CHECK(payout.out == payout2.out);

    const auto ton = run_cli("simulate --scenario " + dir + "/king_william_tontine.json", "sc_ton");
    REQUIRE(ton.exit_code == 0);
    CHECK(std::stod(parse_csv(ton.out)[1][1]) == Catch::Approx(132.57).margin(2.0));

    const auto ann = run_cli("simulate --scenario " + dir + "/king_william_annuity.json", "sc_ann");
    REQUIRE(ann.exit_code == 0);
    CHECK(std::stod(parse_csv(ann.out)[1][1]) == Catch::Approx(185.35).margin(2.0));
}

TEST_CASE("tables regenerates all five product tables") {
    REQUIRE(std::system("rm -rf /tmp/tontine_tables && mkdir -p /tmp/tontine_tables") == 0);
    const auto res = run_cli("tables --out /tmp/tontine_tables --seed 4242", "tables");
    REQUIRE(res.exit_code == 0);
    for (const char* name : {"table4.csv", "table5.csv", "table6.csv", "table7.csv", "table8.csv"}) {
        const std::string text = slurp(std::string("/tmp/tontine_tables/") + name);
        INFO(name);
        CHECK(!text.empty());
    }
    // table6: gamma = 0.5 initial payout 7.565%
    const auto t6 = parse_csv(slurp("/tmp/tontine_tables/table6.csv"));
    REQUIRE(t6.size() == 7);
    CHECK(std::stod(t6[1][1]) == Catch::Approx(0.07565).margin(1e-4));
    // table7: gamma = 1, n = 100 loading 27.4 bp
    const auto t7 = parse_csv(slurp("/tmp/tontine_tables/table7.csv"));
    CHECK(std::stod(t7[2][2]) == Catch::Approx(27.4).margin(0.3));
    // table8: gamma = 1 column is exactly 1
    const auto t8 = parse_csv(slurp("/tmp/tontine_tables/table8.csv"));
    for (std::size_t i = 1; i < t8.size(); ++i)
        CHECK(t8[i][2] == "1");
    // table4/5: APV column within the printed ballpark
    const auto t4 = parse_csv(slurp("/tmp/tontine_tables/table4.csv"));
    REQUIRE(t4.size() == 7);
    CHECK(std::stod(t4[3][4]) == Catch::Approx(133.02).margin(3.0));
    const auto t5 = parse_csv(slurp("/tmp/tontine_tables/table5.csv"));
    CHECK(std::stod(t5[3][4]) == Catch::Approx(184.53).margin(3.0));
}
