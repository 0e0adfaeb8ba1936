#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "distmean/hotelling.hpp"
#include "distmean/rng.hpp"
#include "distmean/signtest.hpp"
#include "distmean/types.hpp"

namespace distmean::cluster {

enum class ShardPolicy { RequireDivisible, DropRemainder };

/// An n x p observation matrix together with a disjoint assignment of row
/// indices to k equal-size machines. Under DropRemainder the trailing
/// n mod k rows of the permutation are discarded and counted in
/// dropped_rows.
struct ShardedDataset {
    Eigen::MatrixXd data;
    std::vector<std::vector<long>> assignment;
    long shard_size = 0;
    long dropped_rows = 0;

    long k() const { return static_cast<long>(assignment.size()); }
    long p() const { return data.cols(); }
    long used_rows() const { return k() * shard_size; }

    Eigen::MatrixXd shard_rows(long l) const {
        const auto& idx = assignment.at(static_cast<std::size_t>(l));
        Eigen::MatrixXd out(static_cast<long>(idx.size()), data.cols());
        for (long i = 0; i < out.rows(); ++i) out.row(i) = data.row(idx[static_cast<std::size_t>(i)]);
        return out;
    }
};

/// Randomly and evenly distributes rows over k machines: a uniformly random
/// permutation split into k consecutive equal blocks.
inline ShardedDataset shard(const Eigen::MatrixXd& data, long k, const RngStream& rng,
                            ShardPolicy policy) {
    const long n = data.rows();
    if (k < 1) throw std::invalid_argument("shard: k must be >= 1");
    if (n < k) throw std::invalid_argument("shard: fewer rows than machines");
    if (policy == ShardPolicy::RequireDivisible && n % k != 0)
        throw std::invalid_argument("shard: k does not divide n under RequireDivisible");

    std::vector<long> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0L);
    auto eng = rng.make_engine();
    std::shuffle(perm.begin(), perm.end(), eng);

    ShardedDataset sd;
    sd.data = data;
    sd.shard_size = n / k;
    sd.dropped_rows = n % k;
    sd.assignment.resize(static_cast<std::size_t>(k));
    for (long l = 0; l < k; ++l) {
        auto& block = sd.assignment[static_cast<std::size_t>(l)];
        block.assign(perm.begin() + l * sd.shard_size, perm.begin() + (l + 1) * sd.shard_size);
    }
    return sd;
}

/// Exact count of scalars a protocol ships to the hub (8 bytes per double).
struct CommLedger {
    Method protocol = Method::CenHotelling;
    std::uint64_t scalars_sent = 0;
    std::uint64_t bytes_sent = 0;
};

inline CommLedger comm_cost(Method method, long k, long p) {
    if (k < 1 || p < 1) throw std::invalid_argument("comm_cost: k and p must be >= 1");
    const auto ku = static_cast<std::uint64_t>(k);
    const auto pu = static_cast<std::uint64_t>(p);
    CommLedger ledger;
    ledger.protocol = method;
    switch (method) {
        case Method::CenHotelling: ledger.scalars_sent = ku * (pu * pu + pu); break;
        case Method::DisHotelling: ledger.scalars_sent = ku; break;
        case Method::CenSign: ledger.scalars_sent = ku * pu; break;
        case Method::DisSign: ledger.scalars_sent = ku; break;
    }
    ledger.bytes_sent = 8 * ledger.scalars_sent;
    return ledger;
}

/// Runs one of the four protocols over the sharded data: per-machine
/// summaries computed in ascending machine order, combined at the hub, and
/// the decision plus the exact communication ledger returned. The first
/// machine is the canonical source of the Tr(B^2) plug-in for the sign
/// tests.
inline std::pair<TestDecision, CommLedger> run_protocol(const ShardedDataset& sd,
                                                        const Eigen::VectorXd& mu0, Method method,
                                                        double alpha) {
    const long k = sd.k();
    const long p = sd.p();
    const long n = sd.used_rows();
    if (mu0.size() != p) throw std::invalid_argument("run_protocol: mu0 dimension mismatch");
    const CommLedger ledger = comm_cost(method, k, p);

    switch (method) {
        case Method::CenHotelling: {
            std::vector<hotelling::LocalMoments> parts;
            parts.reserve(static_cast<std::size_t>(k));
            for (long l = 0; l < k; ++l) parts.push_back(hotelling::local_moments(sd.shard_rows(l)));
            auto [xbar, sigma] = hotelling::merge_centralized(parts);
            const double t2 = hotelling::hotelling_t2(xbar, sigma, n, mu0);
            return {hotelling::centralized_decision(t2, n, p, alpha), ledger};
        }
        case Method::DisHotelling: {
            std::vector<double> local;
            local.reserve(static_cast<std::size_t>(k));
            for (long l = 0; l < k; ++l) {
                const hotelling::LocalMoments lm = hotelling::local_moments(sd.shard_rows(l));
                const Eigen::MatrixXd sigma_l =
                    lm.second_moment - lm.mean * lm.mean.transpose();
                local.push_back(hotelling::hotelling_t2(lm.mean, sigma_l, lm.count, mu0));
            }
            const double t2_dis = hotelling::distributed_t2(local, p);
            return {hotelling::distributed_decision(t2_dis, hotelling::HotellingShape(n, k, p),
                                                    alpha),
                    ledger};
        }
        case Method::CenSign: {
            std::vector<Eigen::VectorXd> sums;
            sums.reserve(static_cast<std::size_t>(k));
            double sum_sq = 0.0;
            double trace_hat = 0.0;
            for (long l = 0; l < k; ++l) {
                const Eigen::MatrixXd z = signtest::sign_rows(sd.shard_rows(l), mu0);
                sums.push_back(z.colwise().sum());
                sum_sq += z.rowwise().squaredNorm().sum();
                if (l == 0) trace_hat = signtest::trace_b2_estimator(z);
            }
            const double g = signtest::g_aggregated(sums, sum_sq);
            return {signtest::sign_decision(g, n, 1, trace_hat, alpha), ledger};
        }
        case Method::DisSign: {
            std::vector<Eigen::MatrixXd> shard_signs;
            shard_signs.reserve(static_cast<std::size_t>(k));
            for (long l = 0; l < k; ++l)
                shard_signs.push_back(signtest::sign_rows(sd.shard_rows(l), mu0));
            const double g = signtest::g_distributed(shard_signs);
            const double trace_hat = signtest::trace_b2_estimator(shard_signs.front());
            return {signtest::sign_decision(g, n, k, trace_hat, alpha), ledger};
        }
    }
    throw std::invalid_argument("run_protocol: unknown method");
}

}  // namespace distmean::cluster
