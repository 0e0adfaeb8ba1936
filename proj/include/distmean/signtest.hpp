#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "distmean/rng.hpp"
#include "distmean/sampler.hpp"
#include "distmean/statdist.hpp"
#include "distmean/types.hpp"

namespace distmean::signtest {

/// Spatial sign of x about mu0: the unit vector (x-mu0)/||x-mu0||, or the
/// zero vector when x equals mu0 exactly.
inline Eigen::VectorXd spatial_sign(const Eigen::VectorXd& x, const Eigen::VectorXd& mu0) {
    if (x.size() != mu0.size()) throw std::invalid_argument("spatial_sign: dimension mismatch");
    Eigen::VectorXd d = x - mu0;
    const double nrm = d.norm();
    if (nrm == 0.0) return Eigen::VectorXd::Zero(x.size());
    return d / nrm;
}

/// Row-wise sign transform of an observation matrix.
inline Eigen::MatrixXd sign_rows(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                 const Eigen::VectorXd& mu0) {
    if (x.cols() != mu0.size()) throw std::invalid_argument("sign_rows: dimension mismatch");
    Eigen::MatrixXd z = x.rowwise() - mu0.transpose();
    for (long i = 0; i < z.rows(); ++i) {
        const double nrm = z.row(i).norm();
        if (nrm != 0.0) z.row(i) /= nrm;
    }
    return z;
}

/// G = sum_{i>j} Z_i^T Z_j over the rows of `signs`, accumulated in row
/// order (j < i).
inline double g_direct(const Eigen::Ref<const Eigen::MatrixXd>& signs) {
    double g = 0.0;
    for (long i = 1; i < signs.rows(); ++i)
        for (long j = 0; j < i; ++j) g += signs.row(i).dot(signs.row(j));
    return g;
}

/// Aggregated form of the centralized statistic from per-machine sign sums:
/// G = [ (sum B_l)^T (sum B_l) - sum ||Z_i||^2 ] / 2. Subtracting the sum
/// of squared norms instead of n keeps the identity with g_direct exact
/// even when some signs are degenerate.
inline double g_aggregated(const std::vector<Eigen::VectorXd>& local_sums, double sum_sq_norms) {
    if (local_sums.empty()) throw std::invalid_argument("g_aggregated: no local sums");
    const long p = local_sums.front().size();
    Eigen::VectorXd total = Eigen::VectorXd::Zero(p);
    for (const auto& b : local_sums) {
        if (b.size() != p) throw std::invalid_argument("g_aggregated: dimension mismatch");
        total += b;
    }
    return 0.5 * (total.squaredNorm() - sum_sq_norms);
}

/// Distributed statistic: the sum of within-shard pair statistics G_l.
/// Only these k scalars cross the (simulated) wire.
inline double g_distributed(const std::vector<Eigen::MatrixXd>& shard_signs) {
    if (shard_signs.empty()) throw std::invalid_argument("g_distributed: no shards");
    double g = 0.0;
    for (const auto& shard : shard_signs) {
        if (shard.cols() != shard_signs.front().cols())
            throw std::invalid_argument("g_distributed: dimension mismatch");
        g += g_direct(shard);
    }
    return g;
}

/// Plug-in estimator of Tr(B^2) from the signs of a single machine:
///   -n1/(n1-2)^2
///   + (n1-1)/(n1 (n1-2)^2) Tr(M^2)
///   + (1-2n1)/(n1 (n1-1)) Zbar*^T M Zbar*
///   + (2/n1) ||Zbar*||^2
///   + (n1-2)^2/(n1 (n1-1)) ||Zbar*||^4
/// with M = sum_j Z_j Z_j^T and Zbar* = (n1-2)^-1 sum_j Z_j. Evaluated via
/// the n1 x n1 Gram matrix, so the cost is O(n1^2 p) rather than O(n1 p^2).
inline double trace_b2_estimator(const Eigen::Ref<const Eigen::MatrixXd>& signs) {
    const long n1 = signs.rows();
    if (n1 <= 2) throw std::invalid_argument("trace_b2_estimator: requires n1 > 2");
    const double n = static_cast<double>(n1);

    const Eigen::MatrixXd gram = signs * signs.transpose();
    const double tr_m2 = gram.squaredNorm();  // Tr(M^2) = sum_{i,j} (Z_i^T Z_j)^2
    const Eigen::VectorXd zbar = signs.colwise().sum() / (n - 2.0);
    const double quad = (signs * zbar).squaredNorm();  // Zbar*^T M Zbar*
    const double nrm2 = zbar.squaredNorm();

    const double nm2 = (n - 2.0) * (n - 2.0);
    return -n / nm2 + (n - 1.0) / (n * nm2) * tr_m2 +
           (1.0 - 2.0 * n) / (n * (n - 1.0)) * quad + 2.0 / n * nrm2 +
           nm2 / (n * (n - 1.0)) * nrm2 * nrm2;
}

/// Studentized sign decision: G / sqrt(n (n/k - 1) tr_hat / 2) against the
/// two-sided normal quantile. k = 1 recovers the centralized n(n-1)
/// normalization.
inline TestDecision sign_decision(double g, long n, long k, double trace_b2_hat, double alpha) {
    if (k < 1 || n <= k) throw std::invalid_argument("sign_decision: requires n/k > 1");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("sign_decision: alpha must be in (0,1)");
    if (!(trace_b2_hat > 0.0))
        throw std::domain_error("sign_decision: nonpositive trace estimate");
    const double nd = static_cast<double>(n);
    const double var = nd * (nd / static_cast<double>(k) - 1.0) * trace_b2_hat / 2.0;
    TestDecision dec;
    dec.method = (k == 1) ? Method::CenSign : Method::DisSign;
    dec.alpha = alpha;
    dec.statistic = g;
    dec.normalized = g / std::sqrt(var);
    dec.threshold = statdist::normal_quantile(1.0 - 0.5 * alpha);
    dec.p_value = 2.0 * (1.0 - statdist::normal_cdf(std::fabs(dec.normalized)));
    dec.reject = dec.p_value < alpha;
    return dec;
}

/// Population sign moments estimated by Monte Carlo: Tr(B^2) from
/// independent sign pairs, and eta_p = ||A d||^2 / sqrt(2 Tr(B^2)) with
/// A d approximated by the sample mean of (d - z z^T d)/||eps||.
struct SignPopulationMoments {
    double trace_b2 = 0.0;
    double eta_p = 0.0;
    long mc_reps = 0;
    double mc_se = 0.0;  // standard error of the trace estimate
};

/// Monte Carlo oracle for the population quantities of the sign test.
/// Draws mc_reps centered vectors from the family with the given
/// scale/covariance; Tr(B^2) = E[(z_1^T z_2)^2] is averaged over disjoint
/// draw pairs so the cost stays O(mc_reps * p).
inline SignPopulationMoments estimate_population_moments(const sampler::DistFamily& fam,
                                                         const Eigen::VectorXd& mean,
                                                         const Eigen::VectorXd& mu0,
                                                         const Eigen::MatrixXd& cov, long mc_reps,
                                                         const RngStream& rng) {
    if (mc_reps < 1000)
        throw std::invalid_argument("estimate_population_moments: mc_reps must be >= 1000");
    if (mean.size() != mu0.size())
        throw std::invalid_argument("estimate_population_moments: dimension mismatch");
    const long p = mean.size();
    const Eigen::MatrixXd chol = sampler::cholesky_lower(cov);
    const Eigen::VectorXd d = mean - mu0;
    const bool null_case = d.isZero(0.0);

    auto eng = rng.make_engine();
    std::normal_distribution<double> nd;
    std::chi_squared_distribution<double> chi2(
        fam.kind == sampler::DistFamily::Kind::StudentT ? static_cast<double>(fam.nu) : 1.0);

    Eigen::VectorXd w(p), eps(p);
    Eigen::VectorXd prev_z = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd a_acc = Eigen::VectorXd::Zero(p);
    double tr_sum = 0.0, tr_sumsq = 0.0;
    long pairs = 0;

    for (long r = 0; r < mc_reps; ++r) {
        for (long j = 0; j < p; ++j) w(j) = nd(eng);
        eps.noalias() = chol.triangularView<Eigen::Lower>() * w;
        if (fam.kind == sampler::DistFamily::Kind::StudentT) {
            const double g = chi2(eng);
            eps *= std::sqrt(static_cast<double>(fam.nu) / g);
        }
        const double nrm = eps.norm();
        if (nrm == 0.0) continue;  // probability zero under continuous models
        const Eigen::VectorXd z = eps / nrm;
        if (!null_case) a_acc += (d - z * z.dot(d)) / nrm;
        if (r % 2 == 1) {
            const double v = prev_z.dot(z);
            const double v2 = v * v;
            tr_sum += v2;
            tr_sumsq += v2 * v2;
            ++pairs;
        }
        prev_z = z;
    }

    SignPopulationMoments out;
    out.mc_reps = mc_reps;
    out.trace_b2 = tr_sum / static_cast<double>(pairs);
    const double var = tr_sumsq / static_cast<double>(pairs) - out.trace_b2 * out.trace_b2;
    out.mc_se = std::sqrt(std::max(var, 0.0) / static_cast<double>(pairs));
    if (!null_case) {
        const Eigen::VectorXd ad = a_acc / static_cast<double>(mc_reps);
        out.eta_p = ad.squaredNorm() / std::sqrt(2.0 * out.trace_b2);
    }
    return out;
}

/// Asymptotic power of the sign test at drift eta_p:
///   1 - Phi(z_{1-a/2} - m eta) + Phi(z_{a/2} - m eta),  m = sqrt(n(n/k-1)).
/// k = 1 gives the centralized test with sample size n. Equals alpha exactly
/// at eta_p = 0.
inline double sign_power(double eta_p, double n, long k, double alpha) {
    if (k < 1 || !(n > static_cast<double>(k)))
        throw std::invalid_argument("sign_power: requires n/k > 1");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("sign_power: alpha must be in (0,1)");
    const double m = std::sqrt(n * (n / static_cast<double>(k) - 1.0));
    const double z_hi = statdist::normal_quantile(1.0 - 0.5 * alpha);
    const double z_lo = statdist::normal_quantile(0.5 * alpha);
    return 1.0 - statdist::normal_cdf(z_hi - m * eta_p) + statdist::normal_cdf(z_lo - m * eta_p);
}

}  // namespace distmean::signtest
