#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <json.hpp>

#include "helpers.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef CLI_PATH
#error "CLI_PATH must be defined"
#endif
#ifndef DATA_DIR
#error "DATA_DIR must be defined"
#endif

namespace {

const fs::path work = fs::temp_directory_path() / "icop_cli_tests";

int run(const std::string& args) {
    std::string cmd = std::string(CLI_PATH) + " " + args + " 2>/dev/null";
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(bool(f));
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::vector<std::vector<double>> read_csv_rows(const fs::path& p) {
    std::ifstream f(p);
    REQUIRE(bool(f));
    std::string line;
    std::getline(f, line); // header
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

struct Setup {
    Setup() {
        fs::remove_all(work);
        fs::create_directories(work);
    }
} setup_once;

} // namespace

TEST_CASE("fit ucsv smoke: artifacts present, summary parses") {
    fs::path out = work / "fit_ucsv";
    int rc = run("fit --family ucsv --input " + std::string(DATA_DIR) +
                 "/synthetic_inflation.csv --out " + out.string() +
                 " --iters 200 --seed 11");
    CHECK(rc == 0);
    for (const char* f : {"chain.csv", "summary.json", "margin.json",
                          "manifest.json", "params.json"})
        CHECK(fs::exists(out / f));
    json summary = json::parse(slurp(out / "summary.json"));
    for (const char* k : {"rho_mu", "sigma2_mu", "rho_zeta", "sigma2_zeta"}) {
        CHECK(summary["params"].contains(k));
        CHECK(summary["params"][k].contains("q05"));
        CHECK(summary["params"][k].contains("q95"));
    }
    json manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["config"]["seed"] == 11);
}

TEST_CASE("fit regression: summary schema has all betas with intervals") {
    fs::path out = work / "fit_reg";
    int rc = run("fit --family regression --input " + std::string(DATA_DIR) +
                 "/synthetic_regression.csv --out " + out.string() +
                 " --iters 400 --seed 11");
    CHECK(rc == 0);
    json summary = json::parse(slurp(out / "summary.json"));
    for (int j = 1; j <= 5; ++j) {
        std::string b = "beta_" + std::to_string(j);
        REQUIRE(summary["params"].contains(b));
        CHECK(summary["params"][b].contains("mean"));
        CHECK(summary["params"][b].contains("q025"));
        CHECK(summary["params"][b].contains("q975"));
    }
    CHECK(!summary["acceptance_rates"].empty());
    // medians stored for the sweep mode
    json manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest["covariate_medians"].size() == 5);
}

TEST_CASE("missing input: nonzero exit, no partial artifacts") {
    fs::path out = work / "missing";
    int rc = run("fit --family ucsv --input " + (work / "no_such.csv").string() +
                 " --out " + out.string());
    CHECK(rc == 3);
    CHECK(!fs::exists(out));
}

TEST_CASE("config errors exit with code 2") {
    CHECK(run("fit --family nosuch --input " + std::string(DATA_DIR) +
              "/synthetic_inflation.csv --out " + (work / "x1").string() +
              " --iters 10") == 2);
    CHECK(run("fit --input " + std::string(DATA_DIR) +
              "/synthetic_inflation.csv --out " + (work / "x2").string()) == 2);
    CHECK(run("nosuchcommand") == 2);
    CHECK(!fs::exists(work / "x1"));
    CHECK(!fs::exists(work / "x2"));
}

TEST_CASE("simulate gaussian reproduces the spearman value") {
    std::ofstream(work / "gauss.json")
        << R"({"correlation": [[1.0, 0.5], [0.5, 1.0]]})";
    fs::path out = work / "sim_g";
    int rc = run("simulate --family gaussian --params " +
                 (work / "gauss.json").string() + " --n 100000 --seed 5 --out " +
                 out.string());
    CHECK(rc == 0);
    auto rows = read_csv_rows(out / "draws.csv");
    REQUIRE(rows.size() == 100000);
    std::vector<double> a, b;
    for (const auto& r : rows) {
        a.push_back(r[0]);
        b.push_back(r[1]);
    }
    CHECK(spearman(a, b) == doctest::Approx(0.4825837395309974).epsilon(0.025));
    CHECK(ks_uniform(a) < ks_crit01(a.size()));
}

TEST_CASE("simulate n = 0 gives a header-only file") {
    fs::path out = work / "sim_0";
    int rc = run("simulate --family gaussian --params " +
                 (work / "gauss.json").string() + " --n 0 --out " + out.string());
    CHECK(rc == 0);
    std::string text = slurp(out / "draws.csv");
    CHECK(text == "u1,u2\n");
}

TEST_CASE("same seed twice: identical draw files") {
    fs::path o1 = work / "det_1", o2 = work / "det_2";
    CHECK(run("simulate --family gaussian --params " +
              (work / "gauss.json").string() + " --n 500 --seed 77 --out " +
              o1.string()) == 0);
    CHECK(run("simulate --family gaussian --params " +
              (work / "gauss.json").string() + " --n 500 --seed 77 --out " +
              o2.string()) == 0);
    CHECK(slurp(o1 / "draws.csv") == slurp(o2 / "draws.csv"));
}

TEST_CASE("toml config with command-line override") {
    std::ofstream(work / "run.toml") << "# simulation settings\n"
                                        "family = \"gaussian\"\n"
                                        "params = \"" +
                                            (work / "gauss.json").string() +
                                            "\"\n"
                                            "n = 500\n"
                                            "seed = 77\n";
    fs::path o1 = work / "conf_1", o2 = work / "conf_2";
    CHECK(run("simulate --config " + (work / "run.toml").string() + " --out " +
              o1.string()) == 0);
    // identical to the flag-based run with the same seed
    CHECK(slurp(o1 / "draws.csv") == slurp(work / "det_1" / "draws.csv"));
    // --seed on the command line overrides the config value
    CHECK(run("simulate --config " + (work / "run.toml").string() +
              " --seed 78 --out " + o2.string()) == 0);
    CHECK(slurp(o2 / "draws.csv") != slurp(o1 / "draws.csv"));
    CHECK(run("simulate --config " + (work / "no.toml").string()) == 2);
}

TEST_CASE("density-grid: independence limit and corner spikes") {
    std::ofstream(work / "indep.json")
        << R"({"rho_mu": 0.0, "rho_zeta": 0.0, "sigma2_mu": 1e-8, "sigma2_zeta": 1e-8})";
    fs::path out = work / "dg_indep";
    CHECK(run("density-grid --params " + (work / "indep.json").string() +
              " --grid-n 8 --out " + out.string()) == 0);
    auto rows = read_csv_rows(out / "density_grid.csv");
    REQUIRE(rows.size() == 64);
    for (const auto& r : rows) {
        CHECK(r[2] == doctest::Approx(1.0).epsilon(1e-3));
        CHECK(r[3] == doctest::Approx(std::log(r[2])).epsilon(1e-10));
    }

    // strong volatility dependence concentrates mass at the corners
    std::ofstream(work / "strong.json")
        << R"({"rho_mu": 0.5, "rho_zeta": 0.95, "sigma2_mu": 0.2, "sigma2_zeta": 1.0})";
    fs::path out2 = work / "dg_strong";
    CHECK(run("density-grid --params " + (work / "strong.json").string() +
              " --grid-n 50 --out " + out2.string()) == 0);
    auto rows2 = read_csv_rows(out2 / "density_grid.csv");
    double corner = rows2.front()[2];            // (0.01, 0.01)
    double center = rows2[24 * 50 + 24][2];      // (0.49, 0.49)
    CHECK(corner > center);

    // grid-n = 2 emits exactly 4 rows
    fs::path out3 = work / "dg_4";
    CHECK(run("density-grid --params " + (work / "indep.json").string() +
              " --grid-n 2 --out " + out3.string()) == 0);
    CHECK(read_csv_rows(out3 / "density_grid.csv").size() == 4);
}

TEST_CASE("predict: zero-shrunk chain equals the margin density") {
    // hand-built artifact: one draw with beta = 0 and tiny lambda
    fs::path art = work / "art_zero";
    fs::create_directories(art);
    std::ofstream(art / "chain.csv")
        << "beta_1,beta_2,lambda_1,lambda_2,tau\n0,0,1e-14,1e-14,1\n";
    std::ofstream(art / "margin.json")
        << R"({"family": "normal", "params": [0.0, 1.0]})";
    std::ofstream(art / "manifest.json") << R"({"covariate_medians": [0, 0]})";
    fs::path out = work / "pred_zero";
    CHECK(run("predict --family regression --params " + art.string() +
              " --x-new 1.0,2.0 --out " + out.string()) == 0);
    auto rows = read_csv_rows(out / "predictive.csv");
    REQUIRE(rows.size() > 100);
    double total = 0.0;
    for (size_t i = 0; i < rows.size(); ++i) {
        double y = rows[i][0];
        double phi = std::exp(-0.5 * y * y) / std::sqrt(2.0 * 3.14159265358979324);
        CHECK(rows[i][1] == doctest::Approx(phi).epsilon(1e-6));
        CHECK(rows[i][2] == doctest::Approx(phi).epsilon(1e-6));
        if (i) total += 0.5 * (rows[i][1] + rows[i - 1][1]) *
                        (rows[i][0] - rows[i - 1][0]);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("predict sweep mode emits one labeled block per value") {
    fs::path art = work / "fit_reg"; // from the fit test above
    REQUIRE(fs::exists(art / "chain.csv"));
    fs::path out = work / "sweep";
    CHECK(run("predict --family regression --params " + art.string() +
              " --sweep-col x3 --sweep-values -2,-1,0,1,2 --out " +
              out.string()) == 0);
    auto rows = read_csv_rows(out / "predictive.csv");
    std::vector<double> labels;
    for (const auto& r : rows)
        if (labels.empty() || r[0] != labels.back()) labels.push_back(r[0]);
    CHECK(labels == std::vector<double>{-2, -1, 0, 1, 2});
    CHECK(rows.size() % 5 == 0);

    // each bayes curve integrates to one
    size_t block = rows.size() / 5;
    for (int b = 0; b < 5; ++b) {
        double total = 0.0;
        for (size_t i = 1; i < block; ++i) {
            const auto& r0 = rows[b * block + i - 1];
            const auto& r1 = rows[b * block + i];
            total += 0.5 * (r0[2] + r1[2]) * (r1[1] - r0[1]);
        }
        CHECK(total == doctest::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("margin-fit writes a loadable margin") {
    fs::path out = work / "marg";
    CHECK(run("margin-fit --input " + std::string(DATA_DIR) +
              "/synthetic_inflation.csv --margin asym_laplace --out " +
              out.string()) == 0);
    json m = json::parse(slurp(out / "margin.json"));
    CHECK(m.contains("family"));
}

TEST_CASE("ar fit then predict round trip") {
    // simulate an AR series via the cli, fit, then predict from the artifact
    std::ofstream(work / "ar.json") << R"({"rho": [0.7]})";
    fs::path sim = work / "sim_ar";
    CHECK(run("simulate --family ar --params " + (work / "ar.json").string() +
              " --n 2000 --seed 21 --out " + sim.string()) == 0);
    fs::path fit = work / "fit_ar";
    CHECK(run("fit --family ar --input " + (sim / "draws.csv").string() +
              " --margin uniform --p 1 --out " + fit.string()) == 0);
    json params = json::parse(slurp(fit / "params.json"));
    CHECK(params["rho"][0].get<double>() == doctest::Approx(0.7).epsilon(0.1));

    // margin-free history on (0,1): reuse the draws as a y series with a
    // normal margin fitted on the fly
    fs::path out = work / "pred_ar";
    CHECK(run("predict --family ar --params " + (fit / "params.json").string() +
              " --input " + (sim / "draws.csv").string() +
              " --margin normal --out " + out.string()) == 0);
    auto rows = read_csv_rows(out / "predictive.csv");
    double total = 0.0;
    for (size_t i = 1; i < rows.size(); ++i)
        total += 0.5 * (rows[i][1] + rows[i - 1][1]) *
                 (rows[i][0] - rows[i - 1][0]);
    CHECK(total == doctest::Approx(1.0).epsilon(0.02));
}
