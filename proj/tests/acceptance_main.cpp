// Acceptance suite: end-to-end statistical checks of the library against
// frozen reference values and closed-form identities. Each criterion prints
// one PASS/FAIL line; the process exits with the number of failures.
//
// Run all criteria:              ./acceptance
// Run a subset by number:        ./acceptance 4 8 9

#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "distmean/distmean.hpp"

using namespace distmean;

namespace {

struct Result {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

harness::ScenarioSpec sign_cell(long k, double c, const sampler::CovSpec& cov,
                                const sampler::DistFamily& fam, std::uint64_t seed) {
    harness::ScenarioSpec spec;
    spec.family = fam;
    spec.mean_spec = sampler::MeanSpec::spike(20, c);
    spec.cov_spec = cov;
    spec.n = 900;
    spec.p = 1000;
    spec.k = k;
    spec.alpha = 0.05;
    spec.replicas = 500;
    spec.master_seed = seed;
    return spec;
}

double rate_of(const harness::ExperimentReport& report, Method m) {
    for (const auto& row : report.rows)
        if (row.method == m) return row.reject_rate;
    return std::numeric_limits<double>::quiet_NaN();
}

// 1. distributed Hotelling size at the n=5000, p=50, k=30 identity cell
Result size_dis_hotelling() {
    harness::ScenarioSpec spec;
    spec.cov_spec = sampler::CovSpec::identity();
    spec.mean_spec = sampler::MeanSpec::constant(0.0);
    spec.n = 5000;
    spec.p = 50;
    spec.k = 30;
    spec.alpha = 0.05;
    spec.methods = {Method::DisHotelling};
    spec.replicas = 500;
    spec.master_seed = 20260801;
    const double rate = rate_of(harness::run_experiment(spec), Method::DisHotelling);
    return {std::fabs(rate - 0.05) <= 0.03,
            fmt("reject_rate=%.3f target=0.05 +/- 0.03", rate)};
}

// 2. distributed sign power across k at the AR(0.8), c=0.25 Gaussian cell
Result power_dis_sign_ar() {
    const sampler::CovSpec cov = sampler::CovSpec::ar(0.8);
    const sampler::DistFamily fam = sampler::DistFamily::gaussian();

    harness::ScenarioSpec k10 = sign_cell(10, 0.25, cov, fam, 101);
    k10.methods = {Method::CenSign, Method::DisSign};
    const auto r10 = harness::run_experiment(k10);
    const double cen = rate_of(r10, Method::CenSign);
    const double d10 = rate_of(r10, Method::DisSign);

    harness::ScenarioSpec k20 = sign_cell(20, 0.25, cov, fam, 102);
    k20.methods = {Method::DisSign};
    const double d20 = rate_of(harness::run_experiment(k20), Method::DisSign);

    harness::ScenarioSpec k30 = sign_cell(30, 0.25, cov, fam, 103);
    k30.methods = {Method::DisSign};
    const double d30 = rate_of(harness::run_experiment(k30), Method::DisSign);

    const bool pass = std::fabs(d10 - 0.926) <= 0.05 && std::fabs(d20 - 0.718) <= 0.05 &&
                      std::fabs(d30 - 0.538) <= 0.05 && cen >= 0.998;
    return {pass, fmt("power k10=%.3f (0.926) k20=%.3f (0.718) k30=%.3f (0.538) cen=%.3f (1.000)",
                      d10, d20, d30, cen)};
}

// 3. distributed sign power under t3 tails, compound symmetry, c=0.35
Result power_dis_sign_t3() {
    const sampler::CovSpec cov = sampler::CovSpec::compound_symmetry(0.2);
    const sampler::DistFamily fam = sampler::DistFamily::student_t(3);

    harness::ScenarioSpec k10 = sign_cell(10, 0.35, cov, fam, 201);
    k10.methods = {Method::DisSign};
    const double d10 = rate_of(harness::run_experiment(k10), Method::DisSign);

    harness::ScenarioSpec k30 = sign_cell(30, 0.35, cov, fam, 202);
    k30.methods = {Method::DisSign};
    const double d30 = rate_of(harness::run_experiment(k30), Method::DisSign);

    const bool pass = std::fabs(d10 - 0.876) <= 0.06 && std::fabs(d30 - 0.380) <= 0.06;
    return {pass, fmt("power k10=%.3f (0.876) k30=%.3f (0.380)", d10, d30)};
}

// 4. analytic power functions hit alpha exactly at zero signal
Result analytic_null() {
    const hotelling::HotellingShape shape(1000, 10, 5);
    double worst = 0.0;
    for (double alpha : {0.01, 0.05, 0.10}) {
        worst = std::max(worst, std::fabs(hotelling::power_phi(0.0, shape, alpha) - alpha));
        worst = std::max(worst, std::fabs(signtest::sign_power(0.0, 100.0, 5, alpha) - alpha));
    }
    return {worst <= 1e-12, fmt("max |power(0) - alpha| = %.3g (tol 1e-12)", worst)};
}

// 5. empirical distributed Hotelling power tracks the closed form
Result power_formula_consistency() {
    const long n = 10000, p = 50, k = 50;
    const Eigen::MatrixXd cov_mat = sampler::build_cov(sampler::CovSpec::ar(0.5), p);
    const hotelling::HotellingShape shape(n, k, p);
    std::string detail;
    bool pass = true;
    double phi_min = 1.0, phi_max = 0.0;
    for (double c : {0.0775, 0.1095, 0.127}) {
        harness::ScenarioSpec spec;
        spec.cov_spec = sampler::CovSpec::ar(0.5);
        spec.mean_spec = sampler::MeanSpec::spike(2, c);
        spec.n = n;
        spec.p = p;
        spec.k = k;
        spec.alpha = 0.05;
        spec.methods = {Method::DisHotelling};
        spec.replicas = 1000;
        spec.master_seed = 300 + static_cast<std::uint64_t>(c * 10000);
        const double emp = rate_of(harness::run_experiment(spec), Method::DisHotelling);
        const double delta = hotelling::mahalanobis_delta(
            sampler::build_mean(spec.mean_spec, p), Eigen::VectorXd::Zero(p), cov_mat);
        const double phi = hotelling::power_phi(delta, shape, 0.05);
        phi_min = std::min(phi_min, phi);
        phi_max = std::max(phi_max, phi);
        if (std::fabs(emp - phi) > 0.05) pass = false;
        detail += fmt("c=%.4f emp=%.3f phi=%.3f | ", c, emp, phi);
    }
    if (!(phi_min <= 0.3 && phi_max >= 0.8)) pass = false;  // grid spans the 0.2-0.9 range
    return {pass, detail + "tol 0.05"};
}

// 6. appendix moment formulas against simulated local statistics
Result local_moment_oracle() {
    const long n_l = 100, p = 5, reps = 10000;
    const Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(p);
    const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(p, p);
    double sum = 0.0, sumsq = 0.0;
    const double sqrt_p = std::sqrt(static_cast<double>(p));
    for (long r = 0; r < reps; ++r) {
        const Eigen::MatrixXd x =
            sampler::sample_mvn(n_l, mu0, cov, RngStream{600, static_cast<std::uint64_t>(r)});
        const auto lm = hotelling::local_moments(x);
        const double t2 = hotelling::hotelling_t2(
            lm.mean, lm.second_moment - lm.mean * lm.mean.transpose(), n_l, mu0);
        sum += t2 / sqrt_p;
        sumsq += (t2 / sqrt_p) * (t2 / sqrt_p);
    }
    const double mean = sum / reps;
    const double var = sumsq / reps - mean * mean;
    const auto mm = hotelling::t2_moments_h0(n_l, p);
    const double se = std::sqrt(mm.variance / static_cast<double>(reps));
    const bool pass =
        std::fabs(mean - mm.mean) <= 4.0 * se && std::fabs(var - mm.variance) <= 0.10 * mm.variance;
    return {pass, fmt("mean=%.5f (%.5f +/- %.5f) var=%.5f (%.5f +/- 10%%)", mean, mm.mean,
                      4.0 * se, var, mm.variance)};
}

// 7. exact aggregation identities over random partitions and sign sets
Result aggregation_identities() {
    std::mt19937_64 eng(7001);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(0.0, 1.0);

    const long n = 120, p = 6;
    Eigen::MatrixXd x(n, p);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < p; ++j) x(i, j) = nd(eng);
    const auto direct = hotelling::merge_centralized({hotelling::local_moments(x)});

    double worst_merge = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<long> perm(n);
        std::iota(perm.begin(), perm.end(), 0L);
        std::shuffle(perm.begin(), perm.end(), eng);
        const long k = 2 + static_cast<long>(eng() % 7);
        std::vector<hotelling::LocalMoments> parts;
        long start = 0;
        for (long l = 0; l < k; ++l) {
            const long size = (l == k - 1) ? n - start : n / k;
            Eigen::MatrixXd shard(size, p);
            for (long i = 0; i < size; ++i) shard.row(i) = x.row(perm[start + i]);
            parts.push_back(hotelling::local_moments(shard));
            start += size;
        }
        const auto merged = hotelling::merge_centralized(parts);
        worst_merge = std::max(worst_merge,
                               (merged.first - direct.first).norm() / direct.first.norm());
        worst_merge = std::max(worst_merge,
                               (merged.second - direct.second).norm() / direct.second.norm());
    }

    double worst_sign = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const long ns = 3 + static_cast<long>(eng() % 60);
        const long ps = 1 + static_cast<long>(eng() % 12);
        Eigen::MatrixXd z(ns, ps);
        for (long i = 0; i < ns; ++i) {
            if (u(eng) < 0.1) {
                z.row(i).setZero();  // degenerate sign
                continue;
            }
            for (long j = 0; j < ps; ++j) z(i, j) = nd(eng);
            z.row(i) /= z.row(i).norm();
        }
        const long k = 1 + static_cast<long>(eng() % 4);
        std::vector<Eigen::VectorXd> sums;
        double sum_sq = 0.0;
        long start = 0;
        for (long l = 0; l < k; ++l) {
            const long size = (l == k - 1) ? ns - start : ns / k;
            const auto block = z.middleRows(start, size);
            sums.push_back(block.colwise().sum());
            sum_sq += block.rowwise().squaredNorm().sum();
            start += size;
        }
        worst_sign = std::max(worst_sign,
                              std::fabs(signtest::g_aggregated(sums, sum_sq) -
                                        signtest::g_direct(z)) /
                                  static_cast<double>(ns));
    }
    const bool pass = worst_merge <= 1e-12 && worst_sign <= 1e-9;
    return {pass, fmt("merge rel err=%.2e (tol 1e-12), sign abs err/n=%.2e (tol 1e-9)",
                      worst_merge, worst_sign)};
}

// 8. F quantile machinery
Result f_machinery() {
    const double q95 = statdist::f_quantile(0.95, {1, 2});
    bool pass = std::fabs(q95 - 18.513) <= 0.01;
    double worst_median = 0.0;
    for (long d : {1L, 5L, 50L}) {
        worst_median = std::max(worst_median, std::fabs(statdist::f_quantile(0.5, {d, d}) - 1.0));
    }
    pass = pass && worst_median <= 1e-8;
    return {pass, fmt("F_{0.95}(1,2)=%.4f (18.513 +/- 0.01); max |median(F(d,d))-1|=%.2e", q95,
                      worst_median)};
}

// 9. communication ledger closed forms
Result comm_ledger() {
    for (long k : {1L, 3L, 10L, 64L}) {
        for (long p : {1L, 2L, 17L, 256L}) {
            const auto ku = static_cast<std::uint64_t>(k);
            const auto pu = static_cast<std::uint64_t>(p);
            if (cluster::comm_cost(Method::CenHotelling, k, p).scalars_sent != ku * (pu * pu + pu))
                return {false, fmt("cen-hotelling mismatch at k=%ld p=%ld", k, p)};
            if (cluster::comm_cost(Method::DisHotelling, k, p).scalars_sent != ku)
                return {false, fmt("dis-hotelling mismatch at k=%ld p=%ld", k, p)};
            if (cluster::comm_cost(Method::CenSign, k, p).scalars_sent != ku * pu)
                return {false, fmt("cen-sign mismatch at k=%ld p=%ld", k, p)};
            if (cluster::comm_cost(Method::DisSign, k, p).scalars_sent != ku)
                return {false, fmt("dis-sign mismatch at k=%ld p=%ld", k, p)};
        }
    }
    return {true, "scalar counts match k(p^2+p), k, kp, k over the sweep"};
}

// 10. trace plug-in recovers 1/p under spherical symmetry
Result trace_plugin() {
    const long n1 = 200, p = 100;
    const Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(p);
    const Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(p, p);
    std::vector<double> est;
    for (int rep = 0; rep < 20; ++rep) {
        const Eigen::MatrixXd x = sampler::sample_mvn(
            n1, mu0, cov, RngStream{1000, static_cast<std::uint64_t>(rep)});
        est.push_back(signtest::trace_b2_estimator(signtest::sign_rows(x, mu0)));
    }
    std::sort(est.begin(), est.end());
    const double median = 0.5 * (est[9] + est[10]);
    return {std::fabs(median - 0.01) <= 0.001, fmt("median=%.5f target=0.01 +/- 10%%", median)};
}

// 11. relative efficiency: 1/sqrt(k) from both tests
Result relative_efficiency() {
    bool pass = true;
    std::string detail;
    const double n = 10000.0;
    for (long k : {4L, 16L}) {
        const double eta = statdist::normal_quantile(0.975) /
                           std::sqrt(n * (n / static_cast<double>(k) - 1.0));
        const double target = signtest::sign_power(eta, n, k, 0.05);
        double lo = 2.0, hi = n;
        for (int i = 0; i < 200; ++i) {
            const double mid = 0.5 * (lo + hi);
            if (signtest::sign_power(eta, mid, 1, 0.05) < target)
                lo = mid;
            else
                hi = mid;
        }
        const double ratio = 0.5 * (lo + hi) / n;
        const double expect = 1.0 / std::sqrt(static_cast<double>(k));
        if (std::fabs(ratio / expect - 1.0) > 0.01) pass = false;
        detail += fmt("k=%ld N/n=%.4f (%.4f) ", k, ratio, expect);
    }
    for (long k : {1L, 4L, 16L, 100L}) {
        if (hotelling::relative_efficiency_hotelling(k) != 1.0 / std::sqrt(static_cast<double>(k)))
            pass = false;
    }
    return {pass, detail + "| hotelling ratio exact"};
}

// 12. byte-identical reports at 1 and 8 worker threads
Result determinism() {
    harness::ScenarioSpec spec;
    spec.n = 400;
    spec.p = 20;
    spec.k = 4;
    spec.alpha = 0.05;
    spec.methods = {Method::CenHotelling, Method::DisHotelling, Method::CenSign, Method::DisSign};
    spec.replicas = 100;
    spec.master_seed = 777;

    auto emit_to_string = [&]() {
        const std::string path = "acceptance_determinism_tmp.csv";
        harness::emit_report(harness::run_experiment(spec), path);
        std::ifstream in(path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        std::remove(path.c_str());
        return ss.str();
    };

    setenv("DISTMEAN_THREADS", "1", 1);
    const std::string csv1 = emit_to_string();
    setenv("DISTMEAN_THREADS", "8", 1);
    const std::string csv8 = emit_to_string();
    const std::string csv8b = emit_to_string();
    unsetenv("DISTMEAN_THREADS");

    const bool pass = !csv1.empty() && csv1 == csv8 && csv8 == csv8b;
    return {pass, pass ? "reports byte-identical at 1 and 8 workers"
                       : "reports differ across worker counts"};
}

struct Criterion {
    int id;
    const char* name;
    Result (*run)();
};

const Criterion criteria[] = {
    {1, "size: distributed hotelling, gaussian identity", size_dis_hotelling},
    {2, "power: distributed sign, ar(0.8) gaussian", power_dis_sign_ar},
    {3, "power: distributed sign, t3 compound symmetry", power_dis_sign_t3},
    {4, "analytic power equals alpha at zero signal", analytic_null},
    {5, "empirical power tracks the closed form", power_formula_consistency},
    {6, "local statistic moment formulas", local_moment_oracle},
    {7, "exact aggregation identities", aggregation_identities},
    {8, "F quantile machinery", f_machinery},
    {9, "communication ledger closed forms", comm_ledger},
    {10, "trace plug-in under spherical symmetry", trace_plugin},
    {11, "relative efficiency 1/sqrt(k)", relative_efficiency},
    {12, "deterministic reports across worker counts", determinism},
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    int ran = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && selected.count(c.id) == 0) continue;
        ++ran;
        const Result r = c.run();
        std::printf("[%2d] %s  %-48s %s\n", c.id, r.pass ? "PASS" : "FAIL", c.name,
                    r.detail.c_str());
        std::fflush(stdout);
        if (!r.pass) ++failures;
    }
    std::printf("%d/%d criteria passed\n", ran - failures, ran);
    return failures;
}
