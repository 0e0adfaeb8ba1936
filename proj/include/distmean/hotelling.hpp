#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "distmean/statdist.hpp"
#include "distmean/types.hpp"

namespace distmean::hotelling {

/// Per-machine summary transmitted by the centralized protocol: the local
/// sample mean, the local second moment A_l = n_l^-1 sum x x^T, and the
/// local count.
struct LocalMoments {
    Eigen::VectorXd mean;
    Eigen::MatrixXd second_moment;
    long count = 0;
};

/// Shape of a distributed Hotelling problem. Requires k | n so that every
/// machine holds exactly n/k rows; gamma_n = p*k/n is the finite-sample
/// plug-in for the limit ratio appearing in the rejection region.
struct HotellingShape {
    long n = 0;
    long k = 1;
    long p = 1;
    double gamma_n = 0.0;

    HotellingShape(long n_, long k_, long p_) : n(n_), k(k_), p(p_) {
        if (n < 1 || k < 1 || p < 1)
            throw std::invalid_argument("HotellingShape: n, k, p must be positive");
        if (n % k != 0)
            throw std::invalid_argument("HotellingShape: k must divide n");
        gamma_n = static_cast<double>(p) * static_cast<double>(k) / static_cast<double>(n);
    }

    long shard_size() const { return n / k; }
};

inline LocalMoments local_moments(const Eigen::Ref<const Eigen::MatrixXd>& shard) {
    if (shard.rows() == 0) throw std::invalid_argument("local_moments: empty shard");
    LocalMoments lm;
    lm.count = shard.rows();
    lm.mean = shard.colwise().mean();
    lm.second_moment = (shard.transpose() * shard) / static_cast<double>(shard.rows());
    return lm;
}

/// Pools per-machine moments into the global sample mean and the biased
/// (divide-by-n) sample covariance. Accumulation runs in ascending machine
/// order for reproducibility.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> merge_centralized(
    const std::vector<LocalMoments>& parts) {
    if (parts.empty()) throw std::invalid_argument("merge_centralized: no parts");
    const long p = parts.front().mean.size();
    long n = 0;
    Eigen::VectorXd mean_acc = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd mom_acc = Eigen::MatrixXd::Zero(p, p);
    for (const auto& part : parts) {
        if (part.mean.size() != p || part.second_moment.rows() != p ||
            part.second_moment.cols() != p)
            throw std::invalid_argument("merge_centralized: dimension mismatch");
        const double w = static_cast<double>(part.count);
        mean_acc += w * part.mean;
        mom_acc += w * part.second_moment;
        n += part.count;
    }
    Eigen::VectorXd xbar = mean_acc / static_cast<double>(n);
    Eigen::MatrixXd sigma = mom_acc / static_cast<double>(n) - xbar * xbar.transpose();
    return {std::move(xbar), std::move(sigma)};
}

/// T^2 = (n-1)(xbar - mu0)^T Sigma^-1 (xbar - mu0) via an SPD solve; a
/// Cholesky failure signals p >= n or degenerate data.
inline double hotelling_t2(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov, long n,
                           const Eigen::VectorXd& mu0) {
    if (mean.size() != mu0.size() || cov.rows() != mean.size() || cov.cols() != mean.size())
        throw std::invalid_argument("hotelling_t2: dimension mismatch");
    if (n < 2) throw std::invalid_argument("hotelling_t2: need n >= 2");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::domain_error("hotelling_t2: covariance is rank deficient");
    const Eigen::VectorXd d = mean - mu0;
    return static_cast<double>(n - 1) * d.dot(llt.solve(d));
}

/// Centralized decision: (n-p)/((n-1)p) T^2 against the F(p, n-p) quantile.
inline TestDecision centralized_decision(double t2, long n, long p, double alpha) {
    if (p >= n) throw std::invalid_argument("centralized_decision: requires p < n");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("centralized_decision: alpha must be in (0,1)");
    const statdist::FParams fp{p, n - p};
    TestDecision dec;
    dec.method = Method::CenHotelling;
    dec.alpha = alpha;
    dec.statistic = t2;
    dec.normalized = t2 * static_cast<double>(n - p) /
                     (static_cast<double>(n - 1) * static_cast<double>(p));
    dec.threshold = statdist::f_quantile(1.0 - alpha, fp);
    dec.p_value = 1.0 - statdist::f_cdf(dec.normalized, fp);
    dec.reject = dec.p_value < alpha;
    return dec;
}

/// T^2_dis = (k sqrt(p))^-1 sum of local T^2 statistics.
inline double distributed_t2(const std::vector<double>& local_t2s, long p) {
    if (local_t2s.empty()) throw std::invalid_argument("distributed_t2: no local statistics");
    if (p < 1) throw std::invalid_argument("distributed_t2: p must be positive");
    double sum = 0.0;
    for (double t : local_t2s) {
        if (!(t >= 0.0) || !std::isfinite(t))
            throw std::invalid_argument("distributed_t2: local statistics must be finite and >= 0");
        sum += t;
    }
    return sum / (static_cast<double>(local_t2s.size()) * std::sqrt(static_cast<double>(p)));
}

/// Distributed decision: sqrt((1-gamma)^3 k / 2) |T^2_dis - center| against
/// the two-sided normal quantile, with center (n/k-1) sqrt(p) / (n/k-p-2).
inline TestDecision distributed_decision(double t2_dis, const HotellingShape& shape,
                                         double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("distributed_decision: alpha must be in (0,1)");
    if (!(shape.gamma_n < 1.0))
        throw std::domain_error("distributed_decision: gamma_n = pk/n must be < 1");
    const long nl = shape.shard_size();
    if (nl <= shape.p + 2)
        throw std::domain_error("distributed_decision: requires n/k > p + 2");
    const double center = static_cast<double>(nl - 1) * std::sqrt(static_cast<double>(shape.p)) /
                          static_cast<double>(nl - shape.p - 2);
    const double scale =
        std::sqrt(std::pow(1.0 - shape.gamma_n, 3) * static_cast<double>(shape.k) / 2.0);
    TestDecision dec;
    dec.method = Method::DisHotelling;
    dec.alpha = alpha;
    dec.statistic = t2_dis;
    dec.normalized = scale * std::fabs(t2_dis - center);
    dec.threshold = statdist::normal_quantile(1.0 - 0.5 * alpha);
    dec.p_value = 2.0 * (1.0 - statdist::normal_cdf(dec.normalized));
    dec.reject = dec.p_value < alpha;
    return dec;
}

struct MomentPair {
    double mean = 0.0;
    double variance = 0.0;
};

/// Null mean and variance of T_l^2 / sqrt(p) for one machine of size n_l.
inline MomentPair t2_moments_h0(long n_l, long p) {
    if (n_l - p - 4 <= 0)
        throw std::domain_error("t2_moments_h0: requires n_l - p - 4 > 0");
    const double nl = static_cast<double>(n_l);
    const double pd = static_cast<double>(p);
    MomentPair mm;
    mm.mean = (nl - 1.0) * std::sqrt(pd) / (nl - pd - 2.0);
    mm.variance = 2.0 * (nl - 1.0) * (nl - 1.0) * (nl - 2.0) /
                  ((nl - pd - 2.0) * (nl - pd - 2.0) * (nl - pd - 4.0));
    return mm;
}

/// Mean and variance of T_l^2 under a mean shift with Mahalanobis signal
/// delta (noncentral moments; delta = 0 reduces to the null case scaled by
/// sqrt(p) and p respectively).
inline MomentPair t2_moments_h1(long n_l, long p, double delta) {
    if (n_l - p - 4 <= 0)
        throw std::domain_error("t2_moments_h1: requires n_l - p - 4 > 0");
    if (!(delta >= 0.0)) throw std::invalid_argument("t2_moments_h1: delta must be >= 0");
    const double nl = static_cast<double>(n_l);
    const double pd = static_cast<double>(p);
    const double ncp = pd + nl * delta;
    MomentPair mm;
    mm.mean = (nl - 1.0) * ncp / (nl - pd - 2.0);
    mm.variance = 2.0 * (nl - 1.0) * (nl - 1.0) *
                  (ncp * ncp + (pd + 2.0 * nl * delta) * (nl - pd - 2.0)) /
                  ((nl - pd - 2.0) * (nl - pd - 2.0) * (nl - pd - 4.0));
    return mm;
}

/// Mahalanobis signal (mu - mu0)^T Sigma^-1 (mu - mu0).
inline double mahalanobis_delta(const Eigen::VectorXd& mu, const Eigen::VectorXd& mu0,
                                const Eigen::MatrixXd& cov) {
    if (mu.size() != mu0.size() || cov.rows() != mu.size() || cov.cols() != mu.size())
        throw std::invalid_argument("mahalanobis_delta: dimension mismatch");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::domain_error("mahalanobis_delta: covariance not SPD");
    const Eigen::VectorXd d = mu - mu0;
    return d.dot(llt.solve(d));
}

/// Asymptotic power of the distributed test at Mahalanobis signal delta:
///   1 - Phi(A1 z_{1-a/2} - A2 s) + Phi(A1 z_{a/2} - A2 s)
/// with A1 = sqrt(gamma/(gamma+2d+d^2)), A2 = sqrt(n d^2/(gamma+2d+d^2)),
/// s = sqrt((1-gamma)/2). Equals alpha exactly at delta = 0.
inline double power_phi(double delta, const HotellingShape& shape, double alpha) {
    if (!(shape.gamma_n > 0.0 && shape.gamma_n < 1.0))
        throw std::domain_error("power_phi: gamma_n must be in (0,1)");
    if (!(delta >= 0.0)) throw std::invalid_argument("power_phi: delta must be >= 0");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("power_phi: alpha must be in (0,1)");
    const double gamma = shape.gamma_n;
    const double denom = gamma + 2.0 * delta + delta * delta;
    const double a1 = std::sqrt(gamma / denom);
    const double a2 = std::sqrt(static_cast<double>(shape.n) * delta * delta / denom);
    const double s = std::sqrt((1.0 - gamma) / 2.0);
    const double z_hi = statdist::normal_quantile(1.0 - 0.5 * alpha);
    const double z_lo = statdist::normal_quantile(0.5 * alpha);
    return 1.0 - statdist::normal_cdf(a1 * z_hi - a2 * s) +
           statdist::normal_cdf(a1 * z_lo - a2 * s);
}

/// Asymptotic relative efficiency of the distributed Hotelling test to the
/// centralized one: the detection-threshold ratio sqrt(1/k).
inline double relative_efficiency_hotelling(long k) {
    if (k < 1) throw std::invalid_argument("relative_efficiency_hotelling: k must be >= 1");
    return 1.0 / std::sqrt(static_cast<double>(k));
}

}  // namespace distmean::hotelling
