#include <gtest/gtest.h>

#include <numeric>
#include <random>
#include <vector>

#include "walkclip/rng.hpp"
#include "walkclip/safe.hpp"

using namespace walkclip;

namespace {

std::vector<GeoCoord> random_coords(int n, std::uint64_t seed, double extent) {
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> u(0.0, extent);
    std::vector<GeoCoord> coords;
    for (int i = 0; i < n; ++i) coords.push_back({40.0 + u(rng), -90.0 + u(rng)});
    return coords;
}

Eigen::MatrixXd random_features(int n, int d, std::uint64_t seed) {
    auto rng = make_rng(seed, 1);
    std::normal_distribution<double> g(0.0, 1.0);
    return Eigen::MatrixXd::NullaryExpr(n, d, [&] { return g(rng); });
}

} // namespace

TEST(IdwWeight, SelfWeightIsOneOverEpsilon) {
    SafeConfig cfg;
    EXPECT_DOUBLE_EQ(idw_weight(0.0, cfg), 10000.0);
}

TEST(IdwWeight, DirectEvaluation) {
    SafeConfig cfg;
    EXPECT_NEAR(idw_weight(0.005, cfg), 196.0784314, 1e-6);
}

TEST(IdwWeight, MonotoneDecreasing) {
    SafeConfig cfg;
    double prev = idw_weight(0.0, cfg);
    for (double d : {1e-4, 1e-3, 5e-3, 1e-2, 0.1}) {
        const double w = idw_weight(d, cfg);
        EXPECT_LT(w, prev);
        EXPECT_GT(w, 0.0);
        prev = w;
    }
}

TEST(IdwWeight, PowerParameter) {
    SafeConfig cfg;
    cfg.power = 2.0;
    EXPECT_DOUBLE_EQ(idw_weight(0.1, cfg), 1.0 / (0.01 + 1e-4));
}

TEST(SafeAggregate, IsolatedPointUnchanged) {
    const std::vector<GeoCoord> coords{{0, 0}, {5, 5}};
    const Eigen::MatrixXd f = random_features(2, 4, 3);
    SafeConfig cfg;
    const SpatialIndex idx = build_index_for_radius(coords, cfg.radius);
    const Eigen::MatrixXd out = safe_aggregate(f, idx, cfg);
    EXPECT_LT((out - f).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SafeAggregate, CoincidentPairAverages) {
    const std::vector<GeoCoord> coords{{1, 1}, {1, 1}};
    Eigen::MatrixXd f(2, 3);
    f << 1, 2, 3, 5, 6, 7;
    SafeConfig cfg;
    const SpatialIndex idx = build_index_for_radius(coords, cfg.radius);
    const Eigen::MatrixXd out = safe_aggregate(f, idx, cfg);
    const Eigen::RowVector3d mean(3, 4, 5);
    EXPECT_LT((out.row(0) - mean).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((out.row(1) - mean).cwiseAbs().maxCoeff(), 1e-12);
}

// 3-point line: A and B interact, C sits outside the radius.
TEST(SafeAggregate, HandComputedThreePointFixture) {
    const std::vector<GeoCoord> coords{{0, 0}, {0, 0.005}, {0, 0.02}};
    Eigen::MatrixXd f(3, 2);
    f << 1.0, -2.0, 3.0, 0.5, 100.0, 100.0;
    SafeConfig cfg; // radius 0.01, epsilon 1e-4
    const SpatialIndex idx = build_index_for_radius(coords, cfg.radius);
    const Eigen::MatrixXd out = safe_aggregate(f, idx, cfg);

    const double w_self = 10000.0;
    const double w_ab = 1.0 / (0.005 + 1e-4);
    const Eigen::RowVector2d expect_a =
        (w_self * f.row(0) + w_ab * f.row(1)) / (w_self + w_ab);
    EXPECT_LT((out.row(0) - expect_a).cwiseAbs().maxCoeff() / expect_a.cwiseAbs().maxCoeff(),
              1e-9);
    // C has no neighbors
    EXPECT_LT((out.row(2) - f.row(2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(SafeAggregate, DimensionMismatchRejected) {
    const std::vector<GeoCoord> coords{{0, 0}, {0, 0.001}};
    SafeConfig cfg;
    const SpatialIndex idx = build_index_for_radius(coords, cfg.radius);
    EXPECT_THROW(safe_aggregate(random_features(3, 2, 0), idx, cfg),
                 std::invalid_argument);
    EXPECT_THROW(
        safe_aggregate_bruteforce(random_features(3, 2, 0), coords, cfg),
        std::invalid_argument);
}

TEST(SafeAggregate, SinglePointIdentity) {
    const std::vector<GeoCoord> coords{{2, 2}};
    const Eigen::MatrixXd f = random_features(1, 5, 8);
    SafeConfig cfg;
    EXPECT_LT((safe_aggregate_bruteforce(f, coords, cfg) - f).cwiseAbs().maxCoeff(),
              1e-15);
}

TEST(SafeAggregate, OracleEquivalenceFiftySeeds) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const int n = 50 + static_cast<int>(seed % 10) * 45; // up to 455
        const auto coords = random_coords(n, seed, 0.08);
        const Eigen::MatrixXd f = random_features(n, 6, seed);
        SafeConfig cfg;
        const SpatialIndex idx = build_index_for_radius(coords, cfg.radius);
        const Eigen::MatrixXd fast = safe_aggregate(f, idx, cfg);
        const Eigen::MatrixXd slow = safe_aggregate_bruteforce(f, coords, cfg);
        ASSERT_LT((fast - slow).cwiseAbs().maxCoeff(), 1e-12) << "seed " << seed;
    }
}

// Each output row is a convex combination: per-dimension range never expands.
TEST(SafeAggregate, RangePreservation) {
    const auto coords = random_coords(200, 21, 0.03);
    const Eigen::MatrixXd f = random_features(200, 4, 21);
    SafeConfig cfg;
    const SpatialIndex idx = build_index_for_radius(coords, cfg.radius);
    const Eigen::MatrixXd out = safe_aggregate(f, idx, cfg);
    for (int c = 0; c < 4; ++c) {
        EXPECT_GE(out.col(c).minCoeff(), f.col(c).minCoeff() - 1e-12);
        EXPECT_LE(out.col(c).maxCoeff(), f.col(c).maxCoeff() + 1e-12);
    }
}

TEST(SafeAggregate, PermutationEquivariance) {
    const int n = 60;
    auto coords = random_coords(n, 31, 0.02);
    const Eigen::MatrixXd f = random_features(n, 3, 31);
    SafeConfig cfg;
    const Eigen::MatrixXd base = safe_aggregate_bruteforce(f, coords, cfg);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = make_rng(99);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<GeoCoord> pcoords(n);
    Eigen::MatrixXd pf(n, 3);
    for (int i = 0; i < n; ++i) {
        pcoords[static_cast<std::size_t>(i)] = coords[static_cast<std::size_t>(perm[i])];
        pf.row(i) = f.row(perm[i]);
    }
    const Eigen::MatrixXd permuted = safe_aggregate_bruteforce(pf, pcoords, cfg);
    for (int i = 0; i < n; ++i)
        EXPECT_LT((permuted.row(i) - base.row(perm[i])).cwiseAbs().maxCoeff(), 1e-12);
}

// Perturbing f_k only moves rows whose neighborhood contains k.
TEST(SafeAggregate, Locality) {
    const auto coords = random_coords(80, 41, 0.03);
    const Eigen::MatrixXd f = random_features(80, 3, 41);
    SafeConfig cfg;
    const SpatialIndex idx = build_index_for_radius(coords, cfg.radius);
    const Eigen::MatrixXd base = safe_aggregate(f, idx, cfg);

    const int k = 17;
    Eigen::MatrixXd bumped = f;
    bumped.row(k).array() += 10.0;
    const Eigen::MatrixXd out = safe_aggregate(bumped, idx, cfg);
    const auto affected = idx.radius_query(k, cfg.radius);
    for (int i = 0; i < 80; ++i) {
        const bool expects_change =
            i == k || std::find(affected.begin(), affected.end(), i) != affected.end();
        const double delta = (out.row(i) - base.row(i)).cwiseAbs().maxCoeff();
        if (expects_change)
            EXPECT_GT(delta, 0.0) << "row " << i;
        else
            EXPECT_EQ(delta, 0.0) << "row " << i;
    }
}

TEST(SafeConfigChecks, RejectsBadValues) {
    SafeConfig cfg;
    cfg.radius = 0;
    EXPECT_THROW(cfg.check(), std::invalid_argument);
    cfg = SafeConfig{};
    cfg.epsilon = -1;
    EXPECT_THROW(cfg.check(), std::invalid_argument);
    cfg = SafeConfig{};
    cfg.power = 0;
    EXPECT_THROW(cfg.check(), std::invalid_argument);
}
