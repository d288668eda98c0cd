// Batch front door: fit, simulate, density-grid, predict, margin-fit.
// Exit codes: 0 success, 2 config error, 3 data error, 4 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include "icop/copula_core.hpp"
#include "icop/factor.hpp"
#include "icop/margins.hpp"
#include "icop/mcmc.hpp"
#include "icop/regression.hpp"
#include "icop/rng.hpp"
#include "icop/skewt.hpp"
#include "icop/special.hpp"
#include "icop/timeseries.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace icop;

namespace {

constexpr const char* VERSION = "icop 1.0.0";

struct CliError : std::runtime_error {
    int code;
    CliError(int c, const std::string& msg) : std::runtime_error(msg), code(c) {}
};

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// ---- CSV ----

struct Csv {
    std::vector<std::string> header;
    Eigen::MatrixXd values;
};

Csv read_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CliError(3, "cannot open input file: " + path);
    std::string line;
    std::vector<std::vector<double>> rows;
    Csv out;
    bool first = true;
    while (std::getline(f, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (first) {
            first = false;
            bool numeric = true;
            for (const auto& c : cells) {
                char* end = nullptr;
                std::strtod(c.c_str(), &end);
                if (end == c.c_str() || *end != '\0') numeric = false;
            }
            if (!numeric) {
                out.header = cells;
                continue;
            }
        }
        std::vector<double> row;
        for (const auto& c : cells) {
            char* end = nullptr;
            double v = std::strtod(c.c_str(), &end);
            if (end == c.c_str() || *end != '\0')
                throw CliError(3, "non-numeric cell '" + c + "' in " + path);
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw CliError(3, "ragged rows in " + path);
        rows.push_back(std::move(row));
    }
    int n = static_cast<int>(rows.size());
    int m = n ? static_cast<int>(rows.front().size()) : 0;
    out.values.resize(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j) out.values(i, j) = rows[i][j];
    if (out.header.empty())
        for (int j = 0; j < m; ++j) out.header.push_back("c" + std::to_string(j + 1));
    return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& values) {
    std::ofstream f(path);
    if (!f) throw CliError(3, "cannot open output file: " + path);
    for (size_t j = 0; j < header.size(); ++j) f << (j ? "," : "") << header[j];
    f << "\n";
    for (int i = 0; i < values.rows(); ++i) {
        for (int j = 0; j < values.cols(); ++j)
            f << (j ? "," : "") << fmt17(values(i, j));
        f << "\n";
    }
}

// ---- options ----

struct Options {
    std::string command;
    std::string family;
    std::string input;
    std::string out = ".";
    std::string config;
    std::string params;       // inline-params file or fitted-artifact directory
    std::string margin_family = "kde";
    std::string x_new;        // comma list
    std::string sweep_col;    // covariate name or 1-based index
    std::string sweep_values; // comma list
    int iters = 10000;
    double burnin = 0.2;
    std::uint64_t seed = 20240901;
    int chains = 1;
    int grid_n = 100;
    int n = 1000;     // simulate draws / series length
    int p_lag = 1;    // AR / VAR lag order
    int factors = 1;  // factor count
    int quad_nodes = 50;
};

std::vector<double> parse_list(const std::string& s, const std::string& what) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        char* end = nullptr;
        double v = std::strtod(cell.c_str(), &end);
        if (end == cell.c_str() || *end != '\0')
            throw CliError(2, "bad numeric list for " + what + ": " + s);
        out.push_back(v);
    }
    if (out.empty()) throw CliError(2, "empty list for " + what);
    return out;
}

// minimal TOML subset: `key = value` lines, strings quoted, # comments,
// section headers ignored (keys are flat)
std::map<std::string, std::string> parse_toml(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw CliError(2, "cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t");
        size_t b = s.find_last_not_of(" \t");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    while (std::getline(f, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']') continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw CliError(2, path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"')
            val = val.substr(1, val.size() - 2);
        if (key.empty() || val.empty())
            throw CliError(2, path + ":" + std::to_string(lineno) +
                                  ": empty key or value");
        kv[key] = val;
    }
    return kv;
}

json options_json(const Options& o) {
    return json{{"command", o.command},     {"family", o.family},
                {"input", o.input},         {"out", o.out},
                {"config", o.config},       {"params", o.params},
                {"margin", o.margin_family},{"x_new", o.x_new},
                {"sweep_col", o.sweep_col}, {"sweep_values", o.sweep_values},
                {"iters", o.iters},         {"burnin", o.burnin},
                {"seed", o.seed},           {"chains", o.chains},
                {"grid_n", o.grid_n},       {"n", o.n},
                {"p", o.p_lag},             {"factors", o.factors},
                {"quad_nodes", o.quad_nodes}};
}

void write_manifest(const Options& o, const fs::path& dir, double wall_ms,
                    json extra = json::object()) {
    json man;
    man["version"] = VERSION;
    man["command"] = o.command;
    man["config"] = options_json(o);
    man["wall_ms"] = wall_ms;
    for (auto& [k, v] : extra.items()) man[k] = v;
    std::ofstream f(dir / "manifest.json");
    f << man.dump(2) << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw CliError(3, "cannot open output file: " + path.string());
    f << text;
    if (text.empty() || text.back() != '\n') f << "\n";
}

std::string read_text(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw CliError(3, "cannot open file: " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw CliError(3, path.string() + ": " + e.what());
    }
}

// ---- margins ----

Margin fit_margin(const std::string& family, const std::vector<double>& data) {
    if (family == "kde") return fit_kde(data);
    if (family == "asym_laplace") return fit_asym_laplace(data);
    if (family == "normal") {
        double m = 0.0, v = 0.0;
        for (double x : data) m += x;
        m /= data.size();
        for (double x : data) v += (x - m) * (x - m);
        v /= data.size() - 1;
        return Margin::normal(m, std::sqrt(v));
    }
    throw CliError(2, "unknown margin family: " + family);
}

// columns of raw data to copula data; "uniform" asserts it already is
std::pair<Eigen::MatrixXd, std::vector<Margin>>
to_uniform(const Eigen::MatrixXd& y, const std::string& margin_family) {
    const int n = static_cast<int>(y.rows()), m = static_cast<int>(y.cols());
    Eigen::MatrixXd u(n, m);
    std::vector<Margin> margins;
    if (margin_family == "uniform") {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                if (!(y(i, j) > 0.0 && y(i, j) < 1.0))
                    throw CliError(3, "--margin uniform requires data in (0,1)");
                u(i, j) = y(i, j);
            }
        return {u, margins};
    }
    for (int j = 0; j < m; ++j) {
        std::vector<double> col(y.col(j).data(), y.col(j).data() + n);
        Margin g = fit_margin(margin_family, col);
        for (int i = 0; i < n; ++i)
            u(i, j) = std::min(1.0 - 1e-12, std::max(1e-12, g.cdf(y(i, j))));
        margins.push_back(std::move(g));
    }
    return {u, margins};
}

void write_margins(const std::vector<Margin>& margins, const fs::path& dir) {
    if (margins.empty()) return;
    if (margins.size() == 1) {
        write_text(dir / "margin.json", margins[0].to_json());
        return;
    }
    json arr = json::array();
    for (const auto& g : margins) arr.push_back(json::parse(g.to_json()));
    write_text(dir / "margin.json", arr.dump(2));
}

// ---- chains ----

// pooled summary with both 90% and 95% intervals
std::string cli_summary_json(const std::vector<Chain>& chains) {
    const Chain& c0 = chains.front();
    int total = 0;
    for (const auto& c : chains) total += c.n_draws();
    Chain pooled;
    pooled.names = c0.names;
    pooled.burn_in = c0.burn_in;
    pooled.seed = c0.seed;
    pooled.draws.resize(total, c0.draws.cols());
    int row = 0;
    for (const auto& c : chains) {
        pooled.draws.middleRows(row, c.n_draws()) = c.draws;
        row += c.n_draws();
    }
    for (const auto& [k, v] : c0.acceptance_rates) {
        double acc = 0.0;
        for (const auto& c : chains) acc += c.acceptance_rates.at(k);
        pooled.acceptance_rates[k] = acc / chains.size();
    }
    json out = json::parse(summary_json(pooled));
    for (size_t j = 0; j < pooled.names.size(); ++j) {
        std::vector<double> col(pooled.draws.col(j).data(),
                                pooled.draws.col(j).data() + total);
        std::sort(col.begin(), col.end());
        auto q = [&](double p) {
            double idx = p * (col.size() - 1);
            int lo = static_cast<int>(idx);
            int hi = std::min(lo + 1, static_cast<int>(col.size()) - 1);
            return col[lo] + (idx - lo) * (col[hi] - col[lo]);
        };
        out["params"][pooled.names[j]]["q025"] = q(0.025);
        out["params"][pooled.names[j]]["q975"] = q(0.975);
    }
    out["n_chains"] = chains.size();
    return out.dump(2);
}

void write_chains(const std::vector<Chain>& chains, const fs::path& dir) {
    if (chains.size() == 1) {
        write_chain_csv(chains[0], (dir / "chain.csv").string());
    } else {
        for (size_t k = 0; k < chains.size(); ++k)
            write_chain_csv(chains[k],
                            (dir / ("chain_" + std::to_string(k + 1) + ".csv"))
                                .string());
    }
    write_text(dir / "summary.json", cli_summary_json(chains));
}

Chain read_chain_csv(const fs::path& path) {
    Csv csv = read_csv(path.string());
    Chain chain;
    chain.names = csv.header;
    chain.draws = csv.values;
    return chain;
}

// run fn(seed + k) for k chains, in parallel
std::vector<Chain> run_chains(int n_chains, std::uint64_t seed,
                              const std::function<Chain(std::uint64_t)>& fn) {
    std::vector<Chain> chains(n_chains);
    std::vector<std::exception_ptr> errs(n_chains);
    std::vector<std::thread> threads;
    for (int k = 0; k < n_chains; ++k)
        threads.emplace_back([&, k] {
            try {
                chains[k] = fn(seed + k);
                chains[k].seed = seed + k;
            } catch (...) {
                errs[k] = std::current_exception();
            }
        });
    for (auto& t : threads) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return chains;
}

// ---- parameter loading (inline JSON file or fitted-artifact directory) ----

json load_params(const Options& o) {
    if (o.params.empty()) throw CliError(2, "--params is required");
    fs::path p(o.params);
    if (fs::is_directory(p)) {
        if (fs::exists(p / "params.json")) return read_json_file(p / "params.json");
        throw CliError(3, "no params.json in artifact directory " + o.params);
    }
    if (!fs::exists(p)) throw CliError(3, "params file not found: " + o.params);
    return read_json_file(p);
}

Eigen::MatrixXd json_matrix(const json& j, const std::string& what) {
    auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw CliError(3, what + ": empty matrix");
    Eigen::MatrixXd out(rows.size(), rows.front().size());
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size())
            throw CliError(3, what + ": ragged matrix");
        for (size_t k = 0; k < rows[i].size(); ++k) out(i, k) = rows[i][k];
    }
    return out;
}

std::vector<std::vector<double>> matrix_json(const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> out(m.rows());
    for (int i = 0; i < m.rows(); ++i)
        out[i] = std::vector<double>(m.row(i).begin(), m.row(i).end());
    return out;
}

UcsvParams ucsv_from_json(const json& j) {
    UcsvParams p;
    p.rho_mu = j.at("rho_mu").get<double>();
    p.rho_zeta = j.at("rho_zeta").get<double>();
    p.sigma2_mu = j.at("sigma2_mu").get<double>();
    p.sigma2_zeta = j.at("sigma2_zeta").get<double>();
    return p;
}

UcsvParams ucsv_posterior_mean(const json& summary) {
    UcsvParams p;
    p.rho_mu = summary.at("params").at("rho_mu").at("mean").get<double>();
    p.rho_zeta = summary.at("params").at("rho_zeta").at("mean").get<double>();
    p.sigma2_mu = summary.at("params").at("sigma2_mu").at("mean").get<double>();
    p.sigma2_zeta = summary.at("params").at("sigma2_zeta").at("mean").get<double>();
    return p;
}

UcsvParams load_ucsv_params(const Options& o) {
    fs::path p(o.params);
    if (fs::is_directory(p) && fs::exists(p / "summary.json"))
        return ucsv_posterior_mean(read_json_file(p / "summary.json"));
    return ucsv_from_json(load_params(o));
}

// ---- commands ----

int cmd_margin_fit(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    Csv csv = read_csv(o.input);
    if (csv.values.cols() < 1 || csv.values.rows() < 3)
        throw CliError(3, "margin-fit needs at least one column and three rows");
    fs::path dir(o.out);
    fs::create_directories(dir);
    std::vector<Margin> margins;
    for (int j = 0; j < csv.values.cols(); ++j) {
        std::vector<double> col(csv.values.col(j).data(),
                                csv.values.col(j).data() + csv.values.rows());
        margins.push_back(fit_margin(o.margin_family, col));
    }
    write_margins(margins, dir);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    write_manifest(o, dir, ms);
    return 0;
}

int cmd_fit(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    if (o.family.empty()) throw CliError(2, "fit requires --family");
    Csv csv = read_csv(o.input);
    if (csv.values.rows() == 0) throw CliError(3, "empty input: " + o.input);

    // regression: first column is the response, the rest are covariates
    Eigen::MatrixXd raw = csv.values;
    json extra = json::object();
    std::vector<Margin> margins;
    Eigen::MatrixXd u;
    if (o.family == "regression") {
        if (raw.cols() < 2)
            throw CliError(3, "regression input needs y plus covariates");
        std::vector<double> yv(raw.col(0).data(), raw.col(0).data() + raw.rows());
        margins.push_back(fit_margin(o.margin_family, yv));
    } else {
        std::tie(u, margins) = to_uniform(raw, o.margin_family);
    }

    fs::path dir(o.out);
    std::vector<Chain> chains;
    std::string params_out;

    if (o.family == "gaussian") {
        const int n = static_cast<int>(u.rows()), m = static_cast<int>(u.cols());
        Eigen::MatrixXd z(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) z(i, j) = norm_quantile(u(i, j));
        CorrelationMatrix R =
            CorrelationMatrix::from_covariance(z.transpose() * z / double(n));
        params_out = json{{"family", "gaussian"},
                          {"correlation", matrix_json(R.values())}}
                         .dump(2);
    } else if (o.family == "t" || o.family == "skewt") {
        SkewTPrior prior;
        prior.fix_delta_zero = (o.family == "t");
        chains = run_chains(o.chains, o.seed, [&](std::uint64_t s) {
            Rng rng(s);
            return skewt_mcmc_fit(u, prior, o.iters, rng, o.burnin);
        });
    } else if (o.family == "factor") {
        const int n = static_cast<int>(u.rows()), m = static_cast<int>(u.cols());
        Eigen::MatrixXd z(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) z(i, j) = norm_quantile(u(i, j));
        FactorFit fit = factor_fit_em(z, o.factors);
        json j = json::parse(fit.params.to_json());
        j["family"] = "factor";
        j["converged"] = fit.converged;
        j["iterations"] = fit.iterations;
        params_out = j.dump(2);
    } else if (o.family == "ar") {
        if (u.cols() != 1) throw CliError(3, "ar fit expects a single series");
        std::vector<double> us(u.col(0).data(), u.col(0).data() + u.rows());
        ArCopulaParams fit = ar_fit(us, o.p_lag);
        params_out = json{{"family", "ar"},
                          {"rho", std::vector<double>(fit.rho.begin(),
                                                      fit.rho.end())},
                          {"projected", fit.projected}}
                         .dump(2);
    } else if (o.family == "var") {
        VarCopulaParams fit = var_fit(u, o.p_lag);
        json bs = json::array();
        for (const auto& b : fit.b) bs.push_back(matrix_json(b));
        params_out = json{{"family", "var"},
                          {"b", bs},
                          {"sigma", matrix_json(fit.sigma)},
                          {"projected", fit.projected}}
                         .dump(2);
    } else if (o.family == "ucsv") {
        if (u.cols() != 1) throw CliError(3, "ucsv fit expects a single series");
        std::vector<double> us(u.col(0).data(), u.col(0).data() + u.rows());
        chains = run_chains(o.chains, o.seed, [&](std::uint64_t s) {
            Rng rng(s);
            return ucsv_mcmc_fit(us, UcsvPrior{}, o.iters, rng, o.burnin);
        });
    } else if (o.family == "regression") {
        RegressionData data{raw.rightCols(raw.cols() - 1), raw.col(0),
                            margins.front()};
        chains = run_chains(o.chains, o.seed, [&](std::uint64_t s) {
            Rng rng(s);
            return reg_mcmc_fit(data, o.iters, rng, o.burnin);
        });
        // training medians, used by predict's covariate sweep
        std::vector<double> med;
        for (int j = 1; j < raw.cols(); ++j) {
            std::vector<double> col(raw.col(j).data(),
                                    raw.col(j).data() + raw.rows());
            std::sort(col.begin(), col.end());
            med.push_back(col[col.size() / 2]);
        }
        extra["covariate_medians"] = med;
        extra["covariate_names"] = std::vector<std::string>(
            csv.header.begin() + 1, csv.header.end());
    } else {
        throw CliError(2, "unknown family: " + o.family);
    }

    // all computation done; only now touch the output directory
    fs::create_directories(dir);
    if (!chains.empty()) {
        write_chains(chains, dir);
        if (o.family == "ucsv") {
            UcsvParams mean = ucsv_posterior_mean(
                json::parse(cli_summary_json(chains)));
            params_out = json{{"family", "ucsv"},
                              {"rho_mu", mean.rho_mu},
                              {"rho_zeta", mean.rho_zeta},
                              {"sigma2_mu", mean.sigma2_mu},
                              {"sigma2_zeta", mean.sigma2_zeta}}
                             .dump(2);
        }
    }
    if (!params_out.empty()) write_text(dir / "params.json", params_out);
    write_margins(margins, dir);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    write_manifest(o, dir, ms, extra);
    return 0;
}

int cmd_simulate(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    if (o.family.empty()) throw CliError(2, "simulate requires --family");
    if (o.n < 0) throw CliError(2, "--n must be nonnegative");
    Rng rng(o.seed);
    Eigen::MatrixXd u;

    if (o.family == "gaussian" || o.family == "t" || o.family == "skewt" ||
        o.family == "factor") {
        json j = load_params(o);
        CopulaSimulator sim;
        if (o.family == "gaussian") {
            CorrelationMatrix R{json_matrix(j.at("correlation"), "correlation")};
            sim = make_gaussian_simulator(R);
        } else if (o.family == "t") {
            CorrelationMatrix R{json_matrix(j.at("correlation"), "correlation")};
            sim = make_t_simulator({R, j.at("nu").get<double>()});
        } else if (o.family == "skewt") {
            CorrelationMatrix R{json_matrix(j.at("gamma"), "gamma")};
            auto dv = j.at("delta").get<std::vector<double>>();
            SkewTCopulaParams p{R,
                                Eigen::Map<Eigen::VectorXd>(dv.data(), dv.size()),
                                j.at("nu").get<double>()};
            sim = make_skewt_simulator(p);
        } else {
            sim = make_factor_simulator(FactorParams::from_json(j.dump()));
        }
        u = simulate_copula_u(sim, o.n, rng);
    } else if (o.family == "ar") {
        json j = load_params(o);
        auto rv = j.at("rho").get<std::vector<double>>();
        Eigen::VectorXd rho = Eigen::Map<Eigen::VectorXd>(rv.data(), rv.size());
        Eigen::VectorXd g = ar_autocovariances(rho, 0);
        int p = static_cast<int>(rho.size());
        std::vector<double> z(std::max(p, 1), 0.0);
        u.resize(o.n, 1);
        int burn = 500;
        for (int t = -burn; t < o.n; ++t) {
            double next = rng.normal();
            for (int k = 0; k < p; ++k) next += rho(k) * z[k];
            for (int k = p - 1; k > 0; --k) z[k] = z[k - 1];
            z[0] = next;
            if (t >= 0) u(t, 0) = norm_cdf(next / std::sqrt(g(0)));
        }
    } else if (o.family == "var") {
        json j = load_params(o);
        VarCopulaParams p;
        for (const auto& bj : j.at("b")) p.b.push_back(json_matrix(bj, "b"));
        p.sigma = json_matrix(j.at("sigma"), "sigma");
        int d = p.dim(), lags = p.lags();
        Eigen::LLT<Eigen::MatrixXd> llt(p.sigma);
        if (llt.info() != Eigen::Success)
            throw CliError(3, "sigma is not positive definite");
        std::vector<Eigen::VectorXd> hist(lags, Eigen::VectorXd::Zero(d));
        u.resize(o.n, d);
        int burn = 500;
        for (int t = -burn; t < o.n; ++t) {
            Eigen::VectorXd e(d);
            for (int k = 0; k < d; ++k) e(k) = rng.normal();
            Eigen::VectorXd next = Eigen::MatrixXd(llt.matrixL()) * e;
            for (int k = 0; k < lags; ++k) next += p.b[k] * hist[k];
            for (int k = lags - 1; k > 0; --k) hist[k] = hist[k - 1];
            if (lags) hist[0] = next;
            if (t >= 0)
                for (int k = 0; k < d; ++k) u(t, k) = norm_cdf(next(k));
        }
    } else if (o.family == "ucsv") {
        UcsvParams p = load_ucsv_params(o);
        auto [z, states] = ucsv_simulate_z(p, o.n, rng);
        InterpTable marg = ucsv_margin(p, 100, o.quad_nodes);
        u.resize(o.n, 1);
        for (int t = 0; t < o.n; ++t) u(t, 0) = marg.cdf(z(t));
    } else {
        throw CliError(2, "unknown family: " + o.family);
    }

    fs::path dir(o.out);
    fs::create_directories(dir);
    std::vector<std::string> header;
    for (int j = 0; j < std::max<int>(u.cols(), 1); ++j)
        header.push_back("u" + std::to_string(j + 1));
    write_csv((dir / "draws.csv").string(), header, u);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    write_manifest(o, dir, ms);
    return 0;
}

int cmd_density_grid(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    if (!o.family.empty() && o.family != "ucsv")
        throw CliError(2, "density-grid supports --family ucsv only");
    UcsvParams p = load_ucsv_params(o);
    DensityGrid grid = ucsv_bivariate_density_grid(p, o.grid_n);
    Eigen::MatrixXd rows(o.grid_n * o.grid_n, 4);
    int r = 0;
    for (int i = 0; i < o.grid_n; ++i)
        for (int j = 0; j < o.grid_n; ++j, ++r) {
            rows(r, 0) = grid.u(i);
            rows(r, 1) = grid.u(j);
            rows(r, 2) = grid.values(i, j);
            rows(r, 3) = std::log(grid.values(i, j));
        }
    fs::path dir(o.out);
    fs::create_directories(dir);
    write_csv((dir / "density_grid.csv").string(), {"u1", "u2", "c", "log_c"},
              rows);
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    write_manifest(o, dir, ms);
    return 0;
}

Margin artifact_margin(const fs::path& dir) {
    if (!fs::exists(dir / "margin.json"))
        throw CliError(3, "no margin.json in " + dir.string());
    return Margin::from_json(read_text(dir / "margin.json"));
}

int cmd_predict(const Options& o) {
    auto t0 = std::chrono::steady_clock::now();
    fs::path dir(o.out);

    if (o.family == "regression" || o.family.empty()) {
        fs::path art(o.params);
        if (!fs::is_directory(art))
            throw CliError(2, "predict needs --params <fitted artifact directory>");
        Chain chain = read_chain_csv(art / "chain.csv");
        Margin margin = artifact_margin(art);
        json man = read_json_file(art / "manifest.json");
        std::vector<double> med =
            man.value("covariate_medians", std::vector<double>{});
        int p = (static_cast<int>(chain.names.size()) - 1) / 2;
        std::vector<double> grid = default_y_grid(margin, o.grid_n > 2 ? 512 : 512);

        Eigen::MatrixXd rows;
        std::vector<std::string> header;
        if (!o.sweep_col.empty()) {
            if (med.empty())
                throw CliError(3, "artifact manifest lacks covariate medians");
            std::vector<std::string> names = man.value(
                "covariate_names", std::vector<std::string>{});
            int col = -1;
            for (size_t j = 0; j < names.size(); ++j)
                if (names[j] == o.sweep_col) col = static_cast<int>(j);
            if (col < 0) {
                char* end = nullptr;
                long idx = std::strtol(o.sweep_col.c_str(), &end, 10);
                if (end != o.sweep_col.c_str() && *end == '\0' && idx >= 1 &&
                    idx <= p)
                    col = static_cast<int>(idx - 1);
            }
            if (col < 0)
                throw CliError(2, "unknown sweep covariate: " + o.sweep_col);
            std::vector<double> sweep =
                parse_list(o.sweep_values, "--sweep-values");
            rows.resize(sweep.size() * grid.size(), 4);
            header = {"x_value", "y", "f_bayes", "f_point"};
            int r = 0;
            for (double v : sweep) {
                Eigen::VectorXd x =
                    Eigen::Map<Eigen::VectorXd>(med.data(), med.size());
                x(col) = v;
                PredictiveCurves c = reg_predict_density(x, chain, margin, grid);
                for (size_t g = 0; g < grid.size(); ++g, ++r) {
                    rows(r, 0) = v;
                    rows(r, 1) = grid[g];
                    rows(r, 2) = c.bayes[g];
                    rows(r, 3) = c.point[g];
                }
            }
        } else {
            if (o.x_new.empty())
                throw CliError(2, "predict requires --x-new or --sweep-col");
            std::vector<double> xv = parse_list(o.x_new, "--x-new");
            if (static_cast<int>(xv.size()) != p)
                throw CliError(2, "--x-new length does not match the fit");
            Eigen::VectorXd x = Eigen::Map<Eigen::VectorXd>(xv.data(), xv.size());
            PredictiveCurves c = reg_predict_density(x, chain, margin, grid);
            rows.resize(grid.size(), 3);
            header = {"y", "f_bayes", "f_point"};
            for (size_t g = 0; g < grid.size(); ++g) {
                rows(g, 0) = grid[g];
                rows(g, 1) = c.bayes[g];
                rows(g, 2) = c.point[g];
            }
        }
        fs::create_directories(dir);
        write_csv((dir / "predictive.csv").string(), header, rows);
    } else if (o.family == "ar" || o.family == "ucsv") {
        TsModel model;
        fs::path art(o.params);
        Margin margin = fs::is_directory(art)
                            ? artifact_margin(art)
                            : fit_margin(o.margin_family, [&] {
                                  Csv c = read_csv(o.input);
                                  return std::vector<double>(
                                      c.values.col(0).data(),
                                      c.values.col(0).data() + c.values.rows());
                              }());
        if (o.family == "ar") {
            model.kind = TsModel::Kind::ar;
            json j = load_params(o);
            auto rv = j.at("rho").get<std::vector<double>>();
            model.rho = Eigen::Map<Eigen::VectorXd>(rv.data(), rv.size());
        } else {
            model.kind = TsModel::Kind::ucsv;
            model.ucsv = load_ucsv_params(o);
        }
        Csv csv = read_csv(o.input);
        if (csv.values.cols() != 1)
            throw CliError(3, "time-series predict expects a single series");
        std::vector<double> hist;
        for (int t = 0; t < csv.values.rows(); ++t) {
            double u = margin.cdf(csv.values(t, 0));
            hist.push_back(std::min(1.0 - 1e-12, std::max(1e-12, u)));
        }
        std::vector<double> grid = default_y_grid(margin, 512);
        Rng rng(o.seed);
        std::vector<double> dens =
            ts_predictive_density(model, hist, margin, grid, rng);
        Eigen::MatrixXd rows(grid.size(), 2);
        for (size_t g = 0; g < grid.size(); ++g) {
            rows(g, 0) = grid[g];
            rows(g, 1) = dens[g];
        }
        fs::create_directories(dir);
        write_csv((dir / "predictive.csv").string(), {"y", "f"}, rows);
    } else {
        throw CliError(2, "predict supports regression, ar, and ucsv families");
    }
    double ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
    write_manifest(o, dir, ms);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    Options o;
    CLI::App app{"implicit copula models: fitting, simulation, prediction"};
    app.require_subcommand(1);

    std::map<std::string, CLI::App*> subs;
    for (const char* name :
         {"fit", "simulate", "density-grid", "predict", "margin-fit"}) {
        CLI::App* s = app.add_subcommand(name);
        s->add_option("--family", o.family,
                      "gaussian|t|skewt|factor|ar|var|ucsv|regression");
        s->add_option("--input", o.input, "input CSV");
        s->add_option("--out", o.out, "output directory");
        s->add_option("--config", o.config, "TOML config file");
        s->add_option("--params", o.params,
                      "params JSON file or fitted-artifact directory");
        s->add_option("--margin", o.margin_family,
                      "kde|asym_laplace|normal|uniform");
        s->add_option("--iters", o.iters, "MCMC iterations");
        s->add_option("--burnin", o.burnin, "burn-in fraction");
        s->add_option("--seed", o.seed, "RNG seed");
        s->add_option("--chains", o.chains, "number of chains");
        s->add_option("--grid-n", o.grid_n, "grid size");
        s->add_option("--n", o.n, "draw count / series length");
        s->add_option("--p", o.p_lag, "AR/VAR lag order");
        s->add_option("--factors", o.factors, "factor count");
        s->add_option("--quad-nodes", o.quad_nodes, "quadrature nodes");
        s->add_option("--x-new", o.x_new, "covariate vector, comma separated");
        s->add_option("--sweep-col", o.sweep_col, "covariate to sweep");
        s->add_option("--sweep-values", o.sweep_values,
                      "sweep values, comma separated");
        subs[name] = s;
    }

    try {
        // config file values act as defaults; command-line flags override
        for (int i = 1; i < argc - 1; ++i)
            if (std::string(argv[i]) == "--config") o.config = argv[i + 1];
        std::map<std::string, std::string> conf;
        if (!o.config.empty()) conf = parse_toml(o.config);
        auto conf_num = [&](const std::string& k, auto& field) {
            auto it = conf.find(k);
            if (it == conf.end()) return;
            char* end = nullptr;
            double v = std::strtod(it->second.c_str(), &end);
            if (end == it->second.c_str() || *end != '\0')
                throw CliError(2, "config: bad number for " + k);
            field = static_cast<std::remove_reference_t<decltype(field)>>(v);
        };
        auto conf_str = [&](const std::string& k, std::string& field) {
            auto it = conf.find(k);
            if (it != conf.end()) field = it->second;
        };
        conf_str("family", o.family);
        conf_str("input", o.input);
        conf_str("out", o.out);
        conf_str("params", o.params);
        conf_str("margin", o.margin_family);
        conf_str("x_new", o.x_new);
        conf_str("sweep_col", o.sweep_col);
        conf_str("sweep_values", o.sweep_values);
        conf_num("iters", o.iters);
        conf_num("burnin", o.burnin);
        conf_num("seed", o.seed);
        conf_num("chains", o.chains);
        conf_num("grid_n", o.grid_n);
        conf_num("n", o.n);
        conf_num("p", o.p_lag);
        conf_num("factors", o.factors);
        conf_num("quad_nodes", o.quad_nodes);

        try {
            app.parse(argc, argv);
        } catch (const CLI::CallForHelp& e) {
            return app.exit(e);
        } catch (const CLI::ParseError& e) {
            app.exit(e);
            return 2;
        }

        for (const auto& [name, s] : subs)
            if (s->parsed()) o.command = name;
        if (o.iters < 0) throw CliError(2, "--iters must be nonnegative");
        if (o.chains < 1) throw CliError(2, "--chains must be positive");
        if ((o.command == "fit" || o.command == "margin-fit") &&
            o.input.empty())
            throw CliError(2, o.command + " requires --input");

        if (o.command == "fit") return cmd_fit(o);
        if (o.command == "simulate") return cmd_simulate(o);
        if (o.command == "density-grid") return cmd_density_grid(o);
        if (o.command == "predict") return cmd_predict(o);
        if (o.command == "margin-fit") return cmd_margin_fit(o);
        throw CliError(2, "unknown command");
    } catch (const CliError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.code;
    } catch (const std::domain_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::length_error& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 4;
    }
}
