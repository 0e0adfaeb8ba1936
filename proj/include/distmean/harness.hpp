#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "distmean/cluster.hpp"
#include "distmean/hotelling.hpp"
#include "distmean/rng.hpp"
#include "distmean/sampler.hpp"
#include "distmean/signtest.hpp"
#include "distmean/statdist.hpp"
#include "distmean/types.hpp"

namespace distmean::harness {

/// One Monte Carlo simulation cell: the generative model, the test
/// configuration, and the replication plan.
struct ScenarioSpec {
    std::string label;  // auto-generated from the parameters when empty
    sampler::DistFamily family = sampler::DistFamily::gaussian();
    sampler::MeanSpec mean_spec = sampler::MeanSpec::constant(0.0);
    sampler::CovSpec cov_spec = sampler::CovSpec::identity();
    Eigen::VectorXd mu0;  // empty means the zero vector
    long n = 0;
    long p = 0;
    long k = 1;
    double alpha = 0.05;
    std::vector<Method> methods;
    long replicas = 500;
    std::uint64_t master_seed = 0;
    bool analytic_overlay = false;  // Monte Carlo eta_p oracle for the sign tests
    long oracle_reps = 100000;
};

/// One report line: the empirical rejection frequency of one method in one
/// scenario, with the Monte Carlo standard error and bookkeeping columns.
/// Degenerate cells keep NaN rates and replicas_run = 0.
struct ReportRow {
    std::string scenario;
    Method method = Method::CenHotelling;
    long n = 0, p = 0, k = 1;
    double c = 0.0;
    double alpha = 0.05;
    long replicas_run = 0;
    double reject_rate = std::numeric_limits<double>::quiet_NaN();
    double mc_se = std::numeric_limits<double>::quiet_NaN();
    double mean_statistic = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t comm_bytes = 0;
    double analytic_power = std::numeric_limits<double>::quiet_NaN();
    double wall_time_s = 0.0;
    std::string note;  // reason for an NA row
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
};

struct PowerCurveRow {
    double c = 0.0;
    long k = 1;
    Method method = Method::CenHotelling;
    double empirical_power = std::numeric_limits<double>::quiet_NaN();
    double analytic_power = std::numeric_limits<double>::quiet_NaN();
    double mc_se = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------
// worker pool
// ---------------------------------------------------------------------------

/// Worker count: DISTMEAN_THREADS when set and positive, otherwise the
/// hardware concurrency; always clamped to [1, jobs].
inline long resolve_workers(long jobs) {
    long w = 0;
    if (const char* env = std::getenv("DISTMEAN_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) w = v;
    }
    if (w <= 0) w = static_cast<long>(std::thread::hardware_concurrency());
    if (w <= 0) w = 1;
    return std::clamp(w, 1L, std::max(jobs, 1L));
}

/// Runs body(0..count-1) on the worker pool. The body must not throw.
template <class Fn>
inline void parallel_for(long count, Fn&& body) {
    const long workers = resolve_workers(count);
    if (workers <= 1) {
        for (long i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<long> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (long w = 0; w < workers; ++w) {
        pool.emplace_back([&next, count, &body] {
            for (long i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// replicas
// ---------------------------------------------------------------------------

namespace detail {

// Substream tags: replica results must not depend on execution order, so
// every consumer derives its stream id from (tag, replica_index).
inline constexpr std::uint64_t kDataStreamTag = 0x646174;
inline constexpr std::uint64_t kShardStreamTag = 0x736864;
inline constexpr std::uint64_t kOracleStreamTag = 0x6f7263;

inline std::string default_label(const ScenarioSpec& spec) {
    std::ostringstream os;
    os << "n" << spec.n << "_p" << spec.p << "_k" << spec.k << "_c" << spec.mean_spec.c << "_"
       << (spec.family.kind == sampler::DistFamily::Kind::Gaussian
               ? "gaussian"
               : "t" + std::to_string(spec.family.nu));
    return os.str();
}

}  // namespace detail

/// Validated, precomputed scenario state shared by all replicas: the mean
/// and covariance are built once and the covariance is factored once.
struct ScenarioContext {
    ScenarioSpec spec;
    std::vector<Method> methods;  // deduplicated, canonical order
    Eigen::VectorXd mean;
    Eigen::VectorXd mu0;
    Eigen::MatrixXd cov;
    Eigen::MatrixXd chol_lower;
};

inline ScenarioContext make_context(const ScenarioSpec& spec_in) {
    ScenarioContext ctx;
    ctx.spec = spec_in;
    auto& spec = ctx.spec;
    if (spec.n < 1 || spec.p < 1 || spec.k < 1)
        throw std::invalid_argument("scenario: n, p, k must be positive");
    if (spec.n < spec.k) throw std::invalid_argument("scenario: fewer observations than machines");
    if (spec.replicas < 1) throw std::invalid_argument("scenario: replicas must be >= 1");
    if (!(spec.alpha > 0.0 && spec.alpha < 1.0))
        throw std::invalid_argument("scenario: alpha must be in (0,1)");
    if (spec.label.empty()) spec.label = detail::default_label(spec);

    for (Method m : all_methods)
        if (std::find(spec.methods.begin(), spec.methods.end(), m) != spec.methods.end())
            ctx.methods.push_back(m);

    ctx.mean = sampler::build_mean(spec.mean_spec, spec.p);
    ctx.cov = sampler::build_cov(spec.cov_spec, spec.p);
    ctx.chol_lower = sampler::cholesky_lower(ctx.cov);
    if (spec.mu0.size() == 0)
        ctx.mu0 = Eigen::VectorXd::Zero(spec.p);
    else if (spec.mu0.size() == spec.p)
        ctx.mu0 = spec.mu0;
    else
        throw std::invalid_argument("scenario: mu0 dimension mismatch");
    return ctx;
}

/// Outcome of one method in one replica. A failed method run carries the
/// error message instead of being silently skipped.
struct ReplicaOutcome {
    Method method = Method::CenHotelling;
    bool ok = false;
    bool reject = false;
    double statistic = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

/// Runs one replica: draws the dataset from the scenario's generative model
/// with a replica-indexed substream, re-shards it with an independent
/// substream, and runs every requested method on the same sharded data.
/// Deterministic in (spec, replica_index).
inline std::vector<ReplicaOutcome> run_replica(const ScenarioContext& ctx, long replica_index) {
    const ScenarioSpec& spec = ctx.spec;
    std::vector<ReplicaOutcome> out;
    out.reserve(ctx.methods.size());

    Eigen::MatrixXd x;
    cluster::ShardedDataset sd;
    std::string setup_error;
    try {
        const RngStream data_stream{
            spec.master_seed,
            hash64(detail::kDataStreamTag, static_cast<std::uint64_t>(replica_index))};
        // Student-t scenarios apply the radial factor to the shifted row:
        // the reference size/power tables behave as if the heavy-tail mixing
        // scales the whole observation, leaving the spatial signs Gaussian.
        x = (spec.family.kind == sampler::DistFamily::Kind::StudentT)
                ? sampler::sample_mvt_scaled_shift_chol(spec.n, ctx.mean, ctx.chol_lower,
                                                        spec.family.nu, data_stream)
                : sampler::sample_mvn_chol(spec.n, ctx.mean, ctx.chol_lower, data_stream);
        const RngStream shard_stream{
            spec.master_seed,
            hash64(detail::kShardStreamTag, static_cast<std::uint64_t>(replica_index))};
        sd = cluster::shard(x, spec.k, shard_stream, cluster::ShardPolicy::DropRemainder);
    } catch (const std::exception& e) {
        setup_error = e.what();
    }

    for (Method m : ctx.methods) {
        ReplicaOutcome ro;
        ro.method = m;
        if (!setup_error.empty()) {
            ro.error = setup_error;
        } else {
            try {
                auto [dec, ledger] = cluster::run_protocol(sd, ctx.mu0, m, spec.alpha);
                (void)ledger;
                ro.ok = true;
                ro.reject = dec.reject;
                ro.statistic = dec.statistic;
            } catch (const std::exception& e) {
                ro.error = e.what();
            }
        }
        out.push_back(std::move(ro));
    }
    return out;
}

inline std::vector<ReplicaOutcome> run_replica(const ScenarioSpec& spec, long replica_index) {
    return run_replica(make_context(spec), replica_index);
}

namespace detail {

// Structural feasibility of a method for the effective shape; returns an
// empty string when the method can run.
inline std::string precondition_violation(Method m, long used_rows, long shard_size, long p) {
    switch (m) {
        case Method::CenHotelling:
            if (p >= used_rows) return "requires p < n";
            break;
        case Method::DisHotelling:
            if (shard_size <= p + 2) return "requires n/k > p+2";
            break;
        case Method::CenSign:
        case Method::DisSign:
            if (shard_size <= 2) return "requires n/k > 2";
            break;
    }
    return {};
}

}  // namespace detail

/// Runs the full Monte Carlo experiment for one scenario. Rejection counts
/// are integers reduced in replica order, so the report is a pure function
/// of the scenario and identical at any worker count. Methods whose structural
/// preconditions fail are reported as NA rows; unexpected runtime failures
/// above 1% of replicas abort with a diagnostic.
inline ExperimentReport run_experiment(const ScenarioSpec& spec_in) {
    ScenarioContext ctx = make_context(spec_in);
    const ScenarioSpec& spec = ctx.spec;
    const long shard_size = spec.n / spec.k;
    const long used = shard_size * spec.k;

    std::vector<Method> runnable;
    std::vector<std::pair<Method, std::string>> degenerate;
    for (Method m : ctx.methods) {
        std::string why = detail::precondition_violation(m, used, shard_size, spec.p);
        if (why.empty())
            runnable.push_back(m);
        else
            degenerate.emplace_back(m, std::move(why));
    }

    ScenarioContext run_ctx = ctx;
    run_ctx.methods = runnable;
    const long reps = spec.replicas;
    const std::size_t n_methods = runnable.size();

    std::vector<std::uint8_t> ok(static_cast<std::size_t>(reps) * n_methods, 0);
    std::vector<std::uint8_t> rej(static_cast<std::size_t>(reps) * n_methods, 0);
    std::vector<double> stat(static_cast<std::size_t>(reps) * n_methods,
                             std::numeric_limits<double>::quiet_NaN());
    std::mutex err_mutex;
    std::string first_error;

    const auto t_start = std::chrono::steady_clock::now();
    if (n_methods > 0) {
        parallel_for(reps, [&](long r) {
            const auto outcomes = run_replica(run_ctx, r);
            for (std::size_t j = 0; j < n_methods; ++j) {
                const auto& ro = outcomes[j];
                const std::size_t slot = static_cast<std::size_t>(r) * n_methods + j;
                ok[slot] = ro.ok ? 1 : 0;
                rej[slot] = ro.reject ? 1 : 0;
                stat[slot] = ro.statistic;
                if (!ro.ok) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (first_error.empty())
                        first_error = std::string(method_name(ro.method)) + ": " + ro.error;
                }
            }
        });
    }
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();

    long failed_replicas = 0;
    for (long r = 0; r < reps; ++r) {
        bool any_fail = false;
        for (std::size_t j = 0; j < n_methods; ++j)
            if (!ok[static_cast<std::size_t>(r) * n_methods + j]) any_fail = true;
        if (any_fail) ++failed_replicas;
    }
    if (n_methods > 0 && static_cast<double>(failed_replicas) > 0.01 * static_cast<double>(reps))
        throw std::runtime_error("run_experiment: " + std::to_string(failed_replicas) + "/" +
                                 std::to_string(reps) + " replicas failed; first error: " +
                                 first_error);

    // analytic overlays
    const double delta = hotelling::mahalanobis_delta(ctx.mean, ctx.mu0, ctx.cov);
    std::optional<signtest::SignPopulationMoments> sign_moments;
    const bool want_sign_overlay =
        spec.analytic_overlay &&
        std::any_of(runnable.begin(), runnable.end(), [](Method m) {
            return m == Method::CenSign || m == Method::DisSign;
        });
    if (want_sign_overlay) {
        const RngStream oracle_stream{spec.master_seed, hash64(detail::kOracleStreamTag, 0)};
        // Under the scaled-shift Student-t generator the signs (and hence the
        // drift) are those of the Gaussian with the same covariance pattern.
        sign_moments = signtest::estimate_population_moments(
            sampler::DistFamily::gaussian(), ctx.mean, ctx.mu0, ctx.cov, spec.oracle_reps,
            oracle_stream);
    }

    ExperimentReport report;
    for (Method m : ctx.methods) {
        ReportRow row;
        row.scenario = spec.label;
        row.method = m;
        row.n = spec.n;
        row.p = spec.p;
        row.k = spec.k;
        row.c = spec.mean_spec.c;
        row.alpha = spec.alpha;
        row.comm_bytes = cluster::comm_cost(m, spec.k, spec.p).bytes_sent;
        row.wall_time_s = wall;

        const auto deg = std::find_if(degenerate.begin(), degenerate.end(),
                                      [m](const auto& pr) { return pr.first == m; });
        if (deg != degenerate.end()) {
            row.note = deg->second;
            report.rows.push_back(std::move(row));
            continue;
        }

        const std::size_t j = static_cast<std::size_t>(
            std::find(runnable.begin(), runnable.end(), m) - runnable.begin());
        long run = 0, rejects = 0;
        double stat_sum = 0.0;
        for (long r = 0; r < reps; ++r) {
            const std::size_t slot = static_cast<std::size_t>(r) * n_methods + j;
            if (!ok[slot]) continue;
            ++run;
            rejects += rej[slot];
            stat_sum += stat[slot];
        }
        row.replicas_run = run;
        if (run > 0) {
            row.reject_rate = static_cast<double>(rejects) / static_cast<double>(run);
            row.mc_se =
                std::sqrt(row.reject_rate * (1.0 - row.reject_rate) / static_cast<double>(run));
            row.mean_statistic = stat_sum / static_cast<double>(run);
        }

        if (m == Method::DisHotelling) {
            row.analytic_power =
                hotelling::power_phi(delta, hotelling::HotellingShape(used, spec.k, spec.p),
                                     spec.alpha);
        } else if (sign_moments && (m == Method::CenSign || m == Method::DisSign)) {
            const long k_eff = (m == Method::CenSign) ? 1 : spec.k;
            row.analytic_power = signtest::sign_power(sign_moments->eta_p,
                                                      static_cast<double>(used), k_eff,
                                                      spec.alpha);
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

/// Sweeps a (c, k) grid around a template scenario, pairing the empirical
/// power with the analytic overlay for each method.
inline std::vector<PowerCurveRow> power_curve(const ScenarioSpec& spec_template,
                                              const std::vector<double>& c_grid,
                                              const std::vector<long>& k_grid) {
    if (c_grid.empty() || k_grid.empty())
        throw std::invalid_argument("power_curve: grids must be nonempty");
    std::vector<PowerCurveRow> rows;
    for (double c : c_grid) {
        for (long k : k_grid) {
            ScenarioSpec spec = spec_template;
            spec.mean_spec.c = c;
            spec.k = k;
            spec.label.clear();
            const ExperimentReport report = run_experiment(spec);
            for (const auto& row : report.rows) {
                PowerCurveRow pc;
                pc.c = c;
                pc.k = k;
                pc.method = row.method;
                pc.empirical_power = row.reject_rate;
                pc.analytic_power = row.analytic_power;
                pc.mc_se = row.mc_se;
                rows.push_back(pc);
            }
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// CSV ingestion and the paired-difference pipeline
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace detail

/// Reads a rectangular numeric CSV (optional single header line, LF or CRLF)
/// into a row-major observation matrix. Ragged rows and non-numeric cells
/// raise an io_error naming the offending line.
inline Eigen::MatrixXd load_csv(const std::string& path, bool has_header = false) {
    std::ifstream in(path);
    if (!in.is_open()) throw io_error("load_csv: cannot open " + path);

    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    bool header_pending = has_header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        if (header_pending) {
            header_pending = false;
            continue;
        }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            const std::string t = detail::trim(cell);
            if (t.empty())
                throw io_error("load_csv: line " + std::to_string(line_no) + ": empty cell");
            char* end = nullptr;
            const double v = std::strtod(t.c_str(), &end);
            if (end != t.c_str() + t.size())
                throw io_error("load_csv: line " + std::to_string(line_no) +
                               ": non-numeric cell '" + t + "'");
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw io_error("load_csv: line " + std::to_string(line_no) + ": expected " +
                           std::to_string(rows.front().size()) + " fields, got " +
                           std::to_string(row.size()));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw io_error("load_csv: no data rows in " + path);

    Eigen::MatrixXd out(static_cast<long>(rows.size()), static_cast<long>(rows.front().size()));
    for (long i = 0; i < out.rows(); ++i)
        for (long j = 0; j < out.cols(); ++j)
            out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return out;
}

/// Elementwise row differences a_i - b_i of two equally shaped matrices.
inline Eigen::MatrixXd paired_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("paired_diff: shape mismatch");
    return a - b;
}

/// Subtracts delta * shift from every row.
inline Eigen::MatrixXd shift_rows(const Eigen::MatrixXd& z, const Eigen::VectorXd& shift,
                                  double delta) {
    if (shift.size() != z.cols()) throw std::invalid_argument("shift_rows: shape mismatch");
    return z.rowwise() - (delta * shift).transpose();
}

// ---------------------------------------------------------------------------
// report emission
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt6(double v) {
    if (std::isnan(v)) return "NA";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

}  // namespace detail

/// Writes the report as CSV with 6-significant-digit floats and a
/// deterministic row order (the rows are emitted as stored: scenario, then
/// method in canonical order). Re-running the same seeded experiment yields
/// a byte-identical file.
inline void emit_report(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) throw io_error("emit_report: cannot open " + path);
    out << "scenario,method,n,p,k,c,alpha,replicas,reject_rate,mc_se,comm_bytes,analytic_power\n";
    for (const auto& row : report.rows) {
        out << row.scenario << ',' << method_name(row.method) << ',' << row.n << ',' << row.p
            << ',' << row.k << ',' << detail::fmt6(row.c) << ',' << detail::fmt6(row.alpha) << ','
            << row.replicas_run << ',' << detail::fmt6(row.reject_rate) << ','
            << detail::fmt6(row.mc_se) << ',' << row.comm_bytes << ','
            << detail::fmt6(row.analytic_power) << '\n';
    }
    if (!out) throw io_error("emit_report: write failed for " + path);
}

/// Writes a power-curve table suitable for external plotting.
inline void emit_power_curve(const std::vector<PowerCurveRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out.is_open()) throw io_error("emit_power_curve: cannot open " + path);
    out << "c,k,method,empirical_power,analytic_power,mc_se\n";
    for (const auto& row : rows) {
        out << detail::fmt6(row.c) << ',' << row.k << ',' << method_name(row.method) << ','
            << detail::fmt6(row.empirical_power) << ',' << detail::fmt6(row.analytic_power) << ','
            << detail::fmt6(row.mc_se) << '\n';
    }
    if (!out) throw io_error("emit_power_curve: write failed for " + path);
}

}  // namespace distmean::harness
