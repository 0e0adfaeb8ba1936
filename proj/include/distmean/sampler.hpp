#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>

#include "distmean/rng.hpp"

namespace distmean::sampler {

/// Covariance patterns used by the simulation scenarios: identity,
/// AR(1)-style decay rho^|i-j|, and compound symmetry (unit diagonal,
/// constant off-diagonal).
struct CovSpec {
    enum class Kind { Identity, Ar, CompoundSymmetry };
    Kind kind = Kind::Identity;
    double param = 0.0;  // rho for Ar, off-diagonal value for CompoundSymmetry

    static CovSpec identity() { return {Kind::Identity, 0.0}; }
    static CovSpec ar(double rho) { return {Kind::Ar, rho}; }
    static CovSpec compound_symmetry(double offdiag) { return {Kind::CompoundSymmetry, offdiag}; }
};

/// Mean patterns: a spike of m leading entries equal to c, or the constant
/// vector c*1_p.
struct MeanSpec {
    enum class Kind { Spike, Constant };
    Kind kind = Kind::Constant;
    long spike_count = 0;
    double c = 0.0;

    static MeanSpec spike(long m, double c) { return {Kind::Spike, m, c}; }
    static MeanSpec constant(double c) { return {Kind::Constant, 0, c}; }
};

/// Sampling family: multivariate normal, or multivariate t with integer
/// degrees of freedom (scale-matrix convention).
struct DistFamily {
    enum class Kind { Gaussian, StudentT };
    Kind kind = Kind::Gaussian;
    long nu = 0;

    static DistFamily gaussian() { return {Kind::Gaussian, 0}; }
    static DistFamily student_t(long nu) { return {Kind::StudentT, nu}; }
};

/// Builds the p x p covariance matrix described by `spec`.
/// Throws if the parameters cannot produce a symmetric positive definite
/// matrix (e.g. compound symmetry with offdiag <= -1/(p-1)).
inline Eigen::MatrixXd build_cov(const CovSpec& spec, long p) {
    if (p < 1) throw std::invalid_argument("build_cov: p must be positive");
    switch (spec.kind) {
        case CovSpec::Kind::Identity:
            return Eigen::MatrixXd::Identity(p, p);
        case CovSpec::Kind::Ar: {
            const double rho = spec.param;
            if (!(rho > -1.0 && rho < 1.0))
                throw std::domain_error("build_cov: AR parameter must lie in (-1,1)");
            Eigen::MatrixXd cov(p, p);
            for (long i = 0; i < p; ++i)
                for (long j = 0; j < p; ++j) cov(i, j) = std::pow(rho, std::abs(i - j));
            return cov;
        }
        case CovSpec::Kind::CompoundSymmetry: {
            const double off = spec.param;
            // eigenvalues are 1-off (multiplicity p-1) and 1+(p-1)*off
            if (!(off < 1.0) || (p > 1 && !(off > -1.0 / static_cast<double>(p - 1))))
                throw std::domain_error("build_cov: compound symmetry parameters are not SPD");
            Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(p, p, off);
            cov.diagonal().setOnes();
            return cov;
        }
    }
    throw std::invalid_argument("build_cov: unknown covariance kind");
}

/// Builds the p-vector described by `spec`.
inline Eigen::VectorXd build_mean(const MeanSpec& spec, long p) {
    if (p < 1) throw std::invalid_argument("build_mean: p must be positive");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    switch (spec.kind) {
        case MeanSpec::Kind::Spike:
            if (spec.spike_count < 0 || spec.spike_count > p)
                throw std::invalid_argument("build_mean: spike count exceeds dimension");
            mean.head(spec.spike_count).setConstant(spec.c);
            break;
        case MeanSpec::Kind::Constant:
            mean.setConstant(spec.c);
            break;
    }
    return mean;
}

/// Lower Cholesky factor of an SPD matrix. A factorization failure is
/// surfaced as an error rather than silently regularized.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& cov) {
    if (cov.rows() != cov.cols()) throw std::invalid_argument("cholesky_lower: matrix not square");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::domain_error("cholesky_lower: matrix is not positive definite");
    return llt.matrixL();
}

namespace detail {

// Fills an n x p matrix with standard normals in row-major draw order.
inline Eigen::MatrixXd standard_normal(long n, long p, std::mt19937_64& eng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd z(n, p);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < p; ++j) z(i, j) = nd(eng);
    return z;
}

}  // namespace detail

/// Draws n i.i.d. rows from N(mean, L L^T) given the lower Cholesky factor L.
inline Eigen::MatrixXd sample_mvn_chol(long n, const Eigen::VectorXd& mean,
                                       const Eigen::MatrixXd& chol_lower, const RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_mvn: n must be positive");
    const long p = mean.size();
    if (chol_lower.rows() != p || chol_lower.cols() != p)
        throw std::invalid_argument("sample_mvn: factor/mean dimension mismatch");
    auto eng = rng.make_engine();
    Eigen::MatrixXd x = detail::standard_normal(n, p, eng);
    x = x * chol_lower.transpose().triangularView<Eigen::Upper>();
    x.rowwise() += mean.transpose();
    return x;
}

/// Draws n i.i.d. rows from N(mean, cov). Deterministic in the stream.
inline Eigen::MatrixXd sample_mvn(long n, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                                  const RngStream& rng) {
    return sample_mvn_chol(n, mean, cholesky_lower(cov), rng);
}

/// Multivariate t rows given the lower Cholesky factor of the scale matrix:
/// each row is mean + L w * sqrt(nu/g) with w standard normal and g a
/// chi-square(nu) draw, independent across rows. The scale convention means
/// cov = nu/(nu-2) * scale for nu > 2.
inline Eigen::MatrixXd sample_mvt_chol(long n, const Eigen::VectorXd& mean,
                                       const Eigen::MatrixXd& chol_lower, long nu,
                                       const RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_mvt: n must be positive");
    if (nu < 1) throw std::invalid_argument("sample_mvt: nu must be >= 1");
    const long p = mean.size();
    if (chol_lower.rows() != p || chol_lower.cols() != p)
        throw std::invalid_argument("sample_mvt: factor/mean dimension mismatch");
    auto eng = rng.make_engine();
    Eigen::MatrixXd x = detail::standard_normal(n, p, eng);
    x = x * chol_lower.transpose().triangularView<Eigen::Upper>();
    std::chi_squared_distribution<double> chi2(static_cast<double>(nu));
    for (long i = 0; i < n; ++i) {
        const double g = chi2(eng);
        x.row(i) *= std::sqrt(static_cast<double>(nu) / g);
    }
    x.rowwise() += mean.transpose();
    return x;
}

inline Eigen::MatrixXd sample_mvt(long n, const Eigen::VectorXd& mean,
                                  const Eigen::MatrixXd& scale, long nu, const RngStream& rng) {
    return sample_mvt_chol(n, mean, cholesky_lower(scale), nu, rng);
}

/// Heavy-tailed rows with the radial factor applied to the shifted vector:
/// each row is (mean + L w) * sqrt(nu/g). Unlike sample_mvt, the location
/// enters the chi-square scale mixture, so the spatial signs about zero
/// coincide with those of the shifted Gaussian and the location response of
/// sign statistics matches the Gaussian case. Identical to sample_mvt when
/// mean is zero (same draw order).
inline Eigen::MatrixXd sample_mvt_scaled_shift_chol(long n, const Eigen::VectorXd& mean,
                                                    const Eigen::MatrixXd& chol_lower, long nu,
                                                    const RngStream& rng) {
    if (n < 1) throw std::invalid_argument("sample_mvt: n must be positive");
    if (nu < 1) throw std::invalid_argument("sample_mvt: nu must be >= 1");
    const long p = mean.size();
    if (chol_lower.rows() != p || chol_lower.cols() != p)
        throw std::invalid_argument("sample_mvt: factor/mean dimension mismatch");
    auto eng = rng.make_engine();
    Eigen::MatrixXd x = detail::standard_normal(n, p, eng);
    x = x * chol_lower.transpose().triangularView<Eigen::Upper>();
    x.rowwise() += mean.transpose();
    std::chi_squared_distribution<double> chi2(static_cast<double>(nu));
    for (long i = 0; i < n; ++i) {
        const double g = chi2(eng);
        x.row(i) *= std::sqrt(static_cast<double>(nu) / g);
    }
    return x;
}

/// Family dispatch over a prefactored scale/covariance matrix.
inline Eigen::MatrixXd sample_family_chol(const DistFamily& fam, long n,
                                          const Eigen::VectorXd& mean,
                                          const Eigen::MatrixXd& chol_lower,
                                          const RngStream& rng) {
    switch (fam.kind) {
        case DistFamily::Kind::Gaussian:
            return sample_mvn_chol(n, mean, chol_lower, rng);
        case DistFamily::Kind::StudentT:
            return sample_mvt_chol(n, mean, chol_lower, fam.nu, rng);
    }
    throw std::invalid_argument("sample_family: unknown family");
}

}  // namespace distmean::sampler
