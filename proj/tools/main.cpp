// Command-line harness for the distributed one-sample mean tests.
//
// Subcommands:
//   hotelling-sim  Monte Carlo size/power cells for the Hotelling tests
//   sign-sim       Monte Carlo size/power cells for the spatial-sign tests
//   power-curve    (c, k) sweep with the analytic power overlay
//   comm-cost      closed-form communication ledger
//   test-csv       one-sample test on an ingested CSV dataset
//   paired-test    paired-difference pipeline over two CSV datasets
//
// Exit codes: 0 success, 1 usage/config error, 2 numerical/precondition
// error, 3 I/O error.

#include <CLI11.hpp>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "distmean/distmean.hpp"

using namespace distmean;

namespace {

struct usage_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    return parts;
}

std::vector<long> parse_longs(const std::string& s, const char* what) {
    std::vector<long> out;
    for (const auto& tok : split(s, ',')) {
        try {
            std::size_t used = 0;
            const long v = std::stol(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw usage_error(std::string("invalid ") + what + " list: '" + s + "'");
        }
    }
    if (out.empty()) throw usage_error(std::string("empty ") + what + " list");
    return out;
}

std::vector<double> parse_doubles(const std::string& s, const char* what) {
    std::vector<double> out;
    for (const auto& tok : split(s, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw usage_error(std::string("invalid ") + what + " list: '" + s + "'");
        }
    }
    if (out.empty()) throw usage_error(std::string("empty ") + what + " list");
    return out;
}

sampler::CovSpec parse_cov(const std::string& s) {
    try {
        if (s == "identity") return sampler::CovSpec::identity();
        if (s.rfind("ar:", 0) == 0) return sampler::CovSpec::ar(std::stod(s.substr(3)));
        if (s.rfind("cs:", 0) == 0)
            return sampler::CovSpec::compound_symmetry(std::stod(s.substr(3)));
    } catch (const std::domain_error&) {
        throw;  // SPD violations are numerical errors, not usage errors
    } catch (const std::exception&) {
    }
    throw usage_error("invalid --cov '" + s + "' (expected identity, ar:RHO or cs:OFFDIAG)");
}

sampler::MeanSpec parse_mean(const std::string& s, double c) {
    try {
        if (s == "const") return sampler::MeanSpec::constant(c);
        if (s.rfind("spike:", 0) == 0) return sampler::MeanSpec::spike(std::stol(s.substr(6)), c);
    } catch (const std::exception&) {
    }
    throw usage_error("invalid --mean '" + s + "' (expected const or spike:M)");
}

sampler::DistFamily parse_family(const std::string& s) {
    try {
        if (s == "gaussian") return sampler::DistFamily::gaussian();
        if (s.rfind("t:", 0) == 0) return sampler::DistFamily::student_t(std::stol(s.substr(2)));
    } catch (const std::exception&) {
    }
    throw usage_error("invalid --family '" + s + "' (expected gaussian or t:NU)");
}

std::vector<Method> parse_methods(const std::string& s) {
    std::vector<Method> out;
    for (const auto& tok : split(s, ',')) {
        try {
            out.push_back(method_from_name(tok));
        } catch (const std::exception&) {
            throw usage_error("invalid method '" + tok + "'");
        }
    }
    if (out.empty()) throw usage_error("empty method list");
    return out;
}

cluster::ShardPolicy parse_policy(const std::string& s) {
    if (s == "require-divisible") return cluster::ShardPolicy::RequireDivisible;
    if (s == "drop-remainder") return cluster::ShardPolicy::DropRemainder;
    throw usage_error("invalid --policy '" + s +
                      "' (expected require-divisible or drop-remainder)");
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// Applies a flat key=value config file to a subcommand's options. Options
// already given on the command line keep their values.
void apply_flat_config(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in.is_open()) throw io_error("cannot open config file " + path);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw usage_error("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr)
            throw usage_error("config line " + std::to_string(line_no) + ": unknown key '" + key +
                              "'");
        if (opt->count() > 0) continue;  // flags override file values
        opt->add_result(val);
        opt->run_callback();
    }
}

Eigen::VectorXd parse_mu0(const std::string& s, long p) {
    if (s.empty()) return Eigen::VectorXd::Zero(p);
    const std::vector<double> vals = parse_doubles(s, "--mu0");
    if (vals.size() == 1) return Eigen::VectorXd::Constant(p, vals[0]);
    if (static_cast<long>(vals.size()) != p)
        throw usage_error("--mu0 has " + std::to_string(vals.size()) + " entries but data has " +
                          std::to_string(p) + " columns");
    Eigen::VectorXd mu0(p);
    for (long i = 0; i < p; ++i) mu0(i) = vals[static_cast<std::size_t>(i)];
    return mu0;
}

// Options shared by the simulation subcommands.
struct SimOptions {
    std::string n = "1000";
    std::string p = "50";
    std::string k = "10";
    double c = 0.0;
    std::string cov = "identity";
    std::string mean = "spike:2";
    std::string family = "gaussian";
    std::string methods;
    double alpha = 0.05;
    long replicas = 500;
    std::uint64_t seed = 1;
    bool analytic = false;
    long oracle_reps = 100000;
    std::string out = "report.csv";
    std::string config;
};

void add_sim_options(CLI::App* cmd, SimOptions& opt) {
    cmd->add_option("--n", opt.n, "sample sizes (comma list)");
    cmd->add_option("--p", opt.p, "dimensions (comma list)");
    cmd->add_option("--k", opt.k, "machine counts (comma list)");
    cmd->add_option("--c", opt.c, "signal magnitude");
    cmd->add_option("--cov", opt.cov, "covariance: identity, ar:RHO, cs:OFFDIAG");
    cmd->add_option("--mean", opt.mean, "mean pattern: const or spike:M");
    cmd->add_option("--family", opt.family, "distribution: gaussian or t:NU");
    cmd->add_option("--methods", opt.methods, "comma list of test methods");
    cmd->add_option("--alpha", opt.alpha, "significance level");
    cmd->add_option("--replicas", opt.replicas, "Monte Carlo replicas per cell");
    cmd->add_option("--seed", opt.seed, "master seed");
    cmd->add_flag("--analytic", opt.analytic, "add the Monte Carlo eta_p power overlay");
    cmd->add_option("--oracle-reps", opt.oracle_reps, "replications for the eta_p oracle");
    cmd->add_option("--out", opt.out, "output report CSV path");
    cmd->add_option("--config", opt.config, "flat key=value config file (flags override)");
}

harness::ScenarioSpec base_spec(const SimOptions& opt, long n, long p, long k) {
    harness::ScenarioSpec spec;
    spec.family = parse_family(opt.family);
    spec.mean_spec = parse_mean(opt.mean, opt.c);
    spec.cov_spec = parse_cov(opt.cov);
    spec.n = n;
    spec.p = p;
    spec.k = k;
    spec.alpha = opt.alpha;
    spec.methods = parse_methods(opt.methods);
    spec.replicas = opt.replicas;
    spec.master_seed = opt.seed;
    spec.analytic_overlay = opt.analytic;
    spec.oracle_reps = opt.oracle_reps;
    return spec;
}

int run_sim(const SimOptions& opt) {
    harness::ExperimentReport all;
    for (long n : parse_longs(opt.n, "--n")) {
        for (long p : parse_longs(opt.p, "--p")) {
            for (long k : parse_longs(opt.k, "--k")) {
                const harness::ExperimentReport cell =
                    harness::run_experiment(base_spec(opt, n, p, k));
                for (const auto& row : cell.rows) {
                    if (row.replicas_run > 0) {
                        std::printf("%-28s %-14s reject_rate=%.4f mc_se=%.4f\n",
                                    row.scenario.c_str(), method_name(row.method),
                                    row.reject_rate, row.mc_se);
                    } else {
                        std::printf("%-28s %-14s NA (%s)\n", row.scenario.c_str(),
                                    method_name(row.method), row.note.c_str());
                    }
                }
                all.rows.insert(all.rows.end(), cell.rows.begin(), cell.rows.end());
            }
        }
    }
    harness::emit_report(all, opt.out);
    std::printf("report written to %s\n", opt.out.c_str());
    return 0;
}

int run_power_curve(const SimOptions& opt, const std::string& c_grid_s,
                    const std::string& k_grid_s) {
    const std::vector<long> ns = parse_longs(opt.n, "--n");
    const std::vector<long> ps = parse_longs(opt.p, "--p");
    if (ns.size() != 1 || ps.size() != 1)
        throw usage_error("power-curve expects a single --n and --p");
    const std::vector<double> c_grid = parse_doubles(c_grid_s, "--c-grid");
    const std::vector<long> k_grid = parse_longs(k_grid_s, "--k-grid");

    const harness::ScenarioSpec spec = base_spec(opt, ns[0], ps[0], k_grid[0]);
    const auto rows = harness::power_curve(spec, c_grid, k_grid);
    harness::emit_power_curve(rows, opt.out);
    for (const auto& row : rows) {
        std::printf("c=%-8g k=%-5ld %-14s empirical=%-10s analytic=%s\n", row.c, row.k,
                    method_name(row.method),
                    std::isnan(row.empirical_power)
                        ? "NA"
                        : harness::detail::fmt6(row.empirical_power).c_str(),
                    std::isnan(row.analytic_power)
                        ? "NA"
                        : harness::detail::fmt6(row.analytic_power).c_str());
    }
    std::printf("power curve written to %s\n", opt.out.c_str());
    return 0;
}

void print_decisions(const Eigen::MatrixXd& data, const Eigen::VectorXd& mu0,
                     const std::vector<Method>& methods, long k, double alpha,
                     cluster::ShardPolicy policy, std::uint64_t seed) {
    const cluster::ShardedDataset sd = cluster::shard(data, k, RngStream{seed, 0}, policy);
    if (sd.dropped_rows > 0)
        std::printf("note: dropped %ld trailing rows to equalize shard sizes\n", sd.dropped_rows);
    for (Method m : methods) {
        const auto [dec, ledger] = cluster::run_protocol(sd, mu0, m, alpha);
        std::printf("method=%s n=%ld p=%ld k=%ld statistic=%.6g normalized=%.6g threshold=%.6g "
                    "p_value=%.6g reject=%s scalars_sent=%llu\n",
                    method_name(m), sd.used_rows(), sd.p(), k, dec.statistic, dec.normalized,
                    dec.threshold, dec.p_value, dec.reject ? "yes" : "no",
                    static_cast<unsigned long long>(ledger.scalars_sent));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed one-sample mean tests: simulation harness and CSV pipeline"};
    app.require_subcommand(1);

    SimOptions hot_opt;
    hot_opt.methods = "cen-hotelling,dis-hotelling";
    hot_opt.out = "hotelling_report.csv";
    CLI::App* hot =
        app.add_subcommand("hotelling-sim", "Monte Carlo cells for the Hotelling tests");
    add_sim_options(hot, hot_opt);

    SimOptions sign_opt;
    sign_opt.n = "900";
    sign_opt.p = "1000";
    sign_opt.k = "10";
    sign_opt.cov = "ar:0.8";
    sign_opt.mean = "spike:20";
    sign_opt.methods = "cen-sign,dis-sign";
    sign_opt.out = "sign_report.csv";
    CLI::App* sgn = app.add_subcommand("sign-sim", "Monte Carlo cells for the spatial-sign tests");
    add_sim_options(sgn, sign_opt);

    SimOptions curve_opt;
    curve_opt.methods = "dis-hotelling";
    curve_opt.out = "power_curve.csv";
    std::string c_grid = "0,0.05,0.1";
    std::string k_grid = "10,20,50";
    CLI::App* curve = app.add_subcommand("power-curve", "(c, k) sweep with analytic overlay");
    add_sim_options(curve, curve_opt);
    curve->add_option("--c-grid", c_grid, "signal grid (comma list)");
    curve->add_option("--k-grid", k_grid, "machine count grid (comma list)");

    long cc_k = 10, cc_p = 100;
    std::string cc_method;
    CLI::App* cc = app.add_subcommand("comm-cost", "closed-form communication ledger");
    cc->add_option("--k", cc_k, "machine count");
    cc->add_option("--p", cc_p, "dimension");
    cc->add_option("--method", cc_method, "restrict to one method");
    std::string cc_config;
    cc->add_option("--config", cc_config, "flat key=value config file (flags override)");

    std::string tc_input, tc_mu0, tc_methods = "cen-hotelling", tc_policy = "drop-remainder";
    bool tc_header = false;
    long tc_k = 1;
    double tc_alpha = 0.05;
    std::uint64_t tc_seed = 1;
    CLI::App* tc = app.add_subcommand("test-csv", "one-sample test on an ingested CSV dataset");
    tc->add_option("--input", tc_input, "numeric CSV path")->required();
    tc->add_flag("--header", tc_header, "skip one header line");
    tc->add_option("--mu0", tc_mu0, "null mean: scalar or comma list (default zeros)");
    tc->add_option("--method", tc_methods, "comma list of test methods");
    tc->add_option("--k", tc_k, "machine count");
    tc->add_option("--alpha", tc_alpha, "significance level");
    tc->add_option("--policy", tc_policy, "require-divisible or drop-remainder");
    tc->add_option("--seed", tc_seed, "seed for the random shard permutation");
    std::string tc_config;
    tc->add_option("--config", tc_config, "flat key=value config file (flags override)");

    std::string pt_a, pt_b, pt_shift_a, pt_shift_b, pt_methods = "cen-hotelling",
                                                    pt_policy = "drop-remainder";
    bool pt_header = false;
    long pt_k = 1;
    double pt_alpha = 0.05, pt_delta = 0.0;
    std::uint64_t pt_seed = 1;
    CLI::App* pt =
        app.add_subcommand("paired-test", "paired-difference test over two CSV datasets");
    pt->add_option("--a", pt_a, "first sample CSV")->required();
    pt->add_option("--b", pt_b, "second sample CSV")->required();
    pt->add_flag("--header", pt_header, "skip one header line in each file");
    pt->add_option("--method", pt_methods, "comma list of test methods");
    pt->add_option("--k", pt_k, "machine count");
    pt->add_option("--alpha", pt_alpha, "significance level");
    pt->add_option("--policy", pt_policy, "require-divisible or drop-remainder");
    pt->add_option("--seed", pt_seed, "seed for the random shard permutation");
    pt->add_option("--delta", pt_delta, "mean shift multiplier toward the null");
    pt->add_option("--shift-a", pt_shift_a, "CSV whose column means estimate the first mean");
    pt->add_option("--shift-b", pt_shift_b, "CSV whose column means estimate the second mean");
    std::string pt_config;
    pt->add_option("--config", pt_config, "flat key=value config file (flags override)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (hot->parsed()) {
            apply_flat_config(hot, hot_opt.config);
            return run_sim(hot_opt);
        }
        if (sgn->parsed()) {
            apply_flat_config(sgn, sign_opt.config);
            return run_sim(sign_opt);
        }
        if (curve->parsed()) {
            apply_flat_config(curve, curve_opt.config);
            return run_power_curve(curve_opt, c_grid, k_grid);
        }
        if (cc->parsed()) {
            apply_flat_config(cc, cc_config);
            std::printf("method,k,p,scalars_sent,bytes_sent\n");
            const std::vector<Method> selected =
                cc_method.empty() ? std::vector<Method>(all_methods.begin(), all_methods.end())
                                  : parse_methods(cc_method);
            for (Method m : selected) {
                const auto ledger = cluster::comm_cost(m, cc_k, cc_p);
                std::printf("%s,%ld,%ld,%llu,%llu\n", method_name(m), cc_k, cc_p,
                            static_cast<unsigned long long>(ledger.scalars_sent),
                            static_cast<unsigned long long>(ledger.bytes_sent));
            }
            return 0;
        }
        if (tc->parsed()) {
            apply_flat_config(tc, tc_config);
            const Eigen::MatrixXd data = harness::load_csv(tc_input, tc_header);
            std::printf("loaded %ld rows x %ld columns from %s\n", data.rows(), data.cols(),
                        tc_input.c_str());
            print_decisions(data, parse_mu0(tc_mu0, data.cols()), parse_methods(tc_methods), tc_k,
                            tc_alpha, parse_policy(tc_policy), tc_seed);
            return 0;
        }
        if (pt->parsed()) {
            apply_flat_config(pt, pt_config);
            const Eigen::MatrixXd a = harness::load_csv(pt_a, pt_header);
            const Eigen::MatrixXd b = harness::load_csv(pt_b, pt_header);
            Eigen::MatrixXd z = harness::paired_diff(a, b);
            std::printf("paired differences: %ld rows x %ld columns\n", z.rows(), z.cols());
            if (!pt_shift_a.empty() || !pt_shift_b.empty() || pt_delta != 0.0) {
                if (pt_shift_a.empty() || pt_shift_b.empty())
                    throw usage_error("--delta needs both --shift-a and --shift-b");
                const Eigen::MatrixXd sa = harness::load_csv(pt_shift_a, pt_header);
                const Eigen::MatrixXd sb = harness::load_csv(pt_shift_b, pt_header);
                if (sa.cols() != z.cols() || sb.cols() != z.cols())
                    throw usage_error("shift datasets must match the paired data columns");
                const Eigen::VectorXd shift =
                    sa.colwise().mean().transpose() - sb.colwise().mean().transpose();
                z = harness::shift_rows(z, shift, pt_delta);
                std::printf("applied shift with delta=%g\n", pt_delta);
            }
            print_decisions(z, Eigen::VectorXd::Zero(z.cols()), parse_methods(pt_methods), pt_k,
                            pt_alpha, parse_policy(pt_policy), pt_seed);
            return 0;
        }
    } catch (const usage_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const io_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
