#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "distmean/cluster.hpp"
#include "distmean/sampler.hpp"
#include "oracles.hpp"

using Catch::Approx;
using namespace distmean;
using namespace distmean::cluster;

namespace {

Eigen::MatrixXd gaussian_data(long n, long p, std::uint64_t seed) {
    return sampler::sample_mvn(n, Eigen::VectorXd::Zero(p), Eigen::MatrixXd::Identity(p, p),
                               RngStream{seed, 0});
}

}  // namespace

TEST_CASE("shard: equal blocks, disjoint, covering") {
    const Eigen::MatrixXd x = gaussian_data(6, 2, 1);
    const ShardedDataset sd = shard(x, 3, RngStream{2, 0}, ShardPolicy::RequireDivisible);
    CHECK(sd.k() == 3);
    CHECK(sd.shard_size == 2);
    CHECK(sd.dropped_rows == 0);
    std::vector<long> seen;
    for (const auto& block : sd.assignment) {
        CHECK(block.size() == 2);
        seen.insert(seen.end(), block.begin(), block.end());
    }
    std::sort(seen.begin(), seen.end());
    CHECK(seen == std::vector<long>{0, 1, 2, 3, 4, 5});

    // the multiset of rows across shards is exactly the input rows
    Eigen::MatrixXd gathered(6, 2);
    long at = 0;
    for (long l = 0; l < 3; ++l) {
        const Eigen::MatrixXd rows = sd.shard_rows(l);
        gathered.middleRows(at, rows.rows()) = rows;
        at += rows.rows();
    }
    Eigen::MatrixXd sorted_in = x, sorted_out = gathered;
    auto row_less = [](const Eigen::MatrixXd& m, long a, long b) {
        for (long j = 0; j < m.cols(); ++j) {
            if (m(a, j) != m(b, j)) return m(a, j) < m(b, j);
        }
        return false;
    };
    std::vector<long> ia{0, 1, 2, 3, 4, 5}, ib = ia;
    std::sort(ia.begin(), ia.end(), [&](long a, long b) { return row_less(sorted_in, a, b); });
    std::sort(ib.begin(), ib.end(), [&](long a, long b) { return row_less(sorted_out, a, b); });
    for (long i = 0; i < 6; ++i) CHECK(sorted_in.row(ia[i]) == sorted_out.row(ib[i]));
}

TEST_CASE("shard: divisibility policies") {
    const Eigen::MatrixXd x = gaussian_data(7, 2, 3);
    CHECK_THROWS_AS(shard(x, 3, RngStream{4, 0}, ShardPolicy::RequireDivisible),
                    std::invalid_argument);
    const ShardedDataset sd = shard(x, 3, RngStream{4, 0}, ShardPolicy::DropRemainder);
    CHECK(sd.shard_size == 2);
    CHECK(sd.dropped_rows == 1);
    CHECK(sd.used_rows() == 6);

    CHECK_THROWS_AS(shard(x, 0, RngStream{}, ShardPolicy::DropRemainder), std::invalid_argument);
    CHECK_THROWS_AS(shard(x, 8, RngStream{}, ShardPolicy::DropRemainder), std::invalid_argument);

    // deterministic for a fixed stream
    const ShardedDataset a = shard(x, 2, RngStream{9, 1}, ShardPolicy::DropRemainder);
    const ShardedDataset b = shard(x, 2, RngStream{9, 1}, ShardPolicy::DropRemainder);
    CHECK(a.assignment == b.assignment);
}

TEST_CASE("comm_cost: closed forms and property sweep") {
    const CommLedger dis_sign = comm_cost(Method::DisSign, 20, 1000);
    CHECK(dis_sign.scalars_sent == 20);
    CHECK(dis_sign.bytes_sent == 160);
    CHECK(comm_cost(Method::CenSign, 20, 1000).scalars_sent == 20000);

    for (long k : {1L, 2L, 7L, 30L, 64L}) {
        for (long p : {1L, 2L, 17L, 256L, 1000L}) {
            const auto ku = static_cast<std::uint64_t>(k);
            const auto pu = static_cast<std::uint64_t>(p);
            CHECK(comm_cost(Method::CenHotelling, k, p).scalars_sent == ku * (pu * pu + pu));
            CHECK(comm_cost(Method::DisHotelling, k, p).scalars_sent == ku);
            CHECK(comm_cost(Method::CenSign, k, p).scalars_sent == ku * pu);
            CHECK(comm_cost(Method::DisSign, k, p).scalars_sent == ku);
            CHECK(comm_cost(Method::CenHotelling, k, p).scalars_sent /
                      comm_cost(Method::DisHotelling, k, p).scalars_sent ==
                  pu * pu + pu);
            for (Method m : all_methods)
                CHECK(comm_cost(m, k, p).bytes_sent == 8 * comm_cost(m, k, p).scalars_sent);
        }
    }
    CHECK(comm_cost(Method::CenHotelling, 30, 50).scalars_sent == 76500);
    CHECK_THROWS_AS(comm_cost(Method::DisSign, 0, 5), std::invalid_argument);
}

TEST_CASE("run_protocol: centralized Hotelling equals the unsharded computation") {
    const long n = 60, p = 4, k = 3;
    const Eigen::MatrixXd x = gaussian_data(n, p, 55);
    const Eigen::VectorXd mu0 = Eigen::VectorXd::Constant(p, 0.05);
    const ShardedDataset sd = shard(x, k, RngStream{56, 0}, ShardPolicy::RequireDivisible);

    const auto [dec, ledger] = run_protocol(sd, mu0, Method::CenHotelling, 0.05);
    CHECK(ledger.scalars_sent == static_cast<std::uint64_t>(k) * (p * p + p));

    const auto [om, oc] = oracles::pooled_moments(x);
    const double t2_direct = hotelling::hotelling_t2(om, oc, n, mu0);
    CHECK(dec.statistic == Approx(t2_direct).epsilon(1e-10));
    const TestDecision direct = hotelling::centralized_decision(t2_direct, n, p, 0.05);
    CHECK(dec.p_value == Approx(direct.p_value).margin(1e-12));
    CHECK(dec.reject == direct.reject);
}

TEST_CASE("run_protocol: distributed Hotelling equals per-shard module calls") {
    const long n = 120, p = 5, k = 4;
    const Eigen::MatrixXd x = gaussian_data(n, p, 66);
    const Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(p);
    const ShardedDataset sd = shard(x, k, RngStream{67, 0}, ShardPolicy::RequireDivisible);

    std::vector<double> locals;
    for (long l = 0; l < k; ++l) {
        const auto lm = hotelling::local_moments(sd.shard_rows(l));
        locals.push_back(hotelling::hotelling_t2(
            lm.mean, lm.second_moment - lm.mean * lm.mean.transpose(), lm.count, mu0));
    }
    const double t2_dis = hotelling::distributed_t2(locals, p);
    const auto [dec, ledger] = run_protocol(sd, mu0, Method::DisHotelling, 0.05);
    CHECK(ledger.scalars_sent == static_cast<std::uint64_t>(k));
    CHECK(dec.statistic == Approx(t2_dis).epsilon(1e-12));
    const TestDecision direct =
        hotelling::distributed_decision(t2_dis, hotelling::HotellingShape(n, k, p), 0.05);
    CHECK(dec.normalized == Approx(direct.normalized).margin(1e-12));
    CHECK(dec.reject == direct.reject);
}

TEST_CASE("run_protocol: sign protocols equal direct module calls") {
    const long n = 45, p = 30, k = 3;
    const Eigen::MatrixXd x = gaussian_data(n, p, 77);
    const Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(p);
    const ShardedDataset sd = shard(x, k, RngStream{78, 0}, ShardPolicy::RequireDivisible);

    std::vector<Eigen::MatrixXd> signs;
    for (long l = 0; l < k; ++l) signs.push_back(signtest::sign_rows(sd.shard_rows(l), mu0));
    const double trace_hat = signtest::trace_b2_estimator(signs.front());

    // centralized: aggregated statistic over all machines, k = 1 normalization
    double sum_sq = 0.0;
    std::vector<Eigen::VectorXd> sums;
    for (const auto& z : signs) {
        sums.push_back(z.colwise().sum());
        sum_sq += z.rowwise().squaredNorm().sum();
    }
    const double g_cen = signtest::g_aggregated(sums, sum_sq);
    const auto [cen, cen_ledger] = run_protocol(sd, mu0, Method::CenSign, 0.05);
    CHECK(cen_ledger.scalars_sent == static_cast<std::uint64_t>(k * p));
    CHECK(cen.statistic == Approx(g_cen).margin(1e-12));
    const TestDecision cen_direct = signtest::sign_decision(g_cen, n, 1, trace_hat, 0.05);
    CHECK(cen.normalized == Approx(cen_direct.normalized).margin(1e-12));

    // the aggregated centralized statistic also equals the full pair sum
    const Eigen::MatrixXd all_signs = signtest::sign_rows(x, mu0);
    CHECK(g_cen == Approx(oracles::pair_sum(all_signs)).margin(1e-9 * static_cast<double>(n)));

    const double g_dis = signtest::g_distributed(signs);
    const auto [dis, dis_ledger] = run_protocol(sd, mu0, Method::DisSign, 0.05);
    CHECK(dis_ledger.scalars_sent == static_cast<std::uint64_t>(k));
    CHECK(dis.statistic == Approx(g_dis).margin(1e-12));
    const TestDecision dis_direct = signtest::sign_decision(g_dis, n, k, trace_hat, 0.05);
    CHECK(dis.normalized == Approx(dis_direct.normalized).margin(1e-12));
}

TEST_CASE("run_protocol: dimension mismatch is rejected") {
    const Eigen::MatrixXd x = gaussian_data(12, 3, 88);
    const ShardedDataset sd = shard(x, 2, RngStream{89, 0}, ShardPolicy::RequireDivisible);
    CHECK_THROWS_AS(run_protocol(sd, Eigen::VectorXd::Zero(4), Method::DisSign, 0.05),
                    std::invalid_argument);
}
