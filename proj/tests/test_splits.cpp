#include <gtest/gtest.h>

#include <set>
#include <unordered_set>

#include "walkclip/splits.hpp"
#include "walkclip/synth.hpp"

using namespace walkclip;

namespace {

// Minimal dataset with one record per listed (group, score).
Dataset dataset_from_scores(const std::vector<double>& scores) {
    Dataset ds;
    ds.dims = {1, 1, 1};
    for (std::size_t i = 0; i < scores.size(); ++i) {
        LocationRecord r;
        r.record_id = "r" + std::to_string(i);
        r.group_id = "g" + std::to_string(i);
        r.coord = {0.0, static_cast<double>(i) * 0.001};
        r.sat_emb = Eigen::VectorXd::Ones(1);
        r.street_emb = Eigen::VectorXd::Ones(1);
        r.pdfm_emb = Eigen::VectorXd::Ones(1);
        r.walk_score = scores[i];
        ds.records.push_back(std::move(r));
    }
    return ds;
}

} // namespace

TEST(QuartileBins, PercentileArithmetic) {
    auto ds = dataset_from_scores({10, 20, 30, 40});
    auto groups = collect_groups(ds);
    const auto bins = quartile_bins(groups);
    EXPECT_DOUBLE_EQ(bins.edges[0], 17.5);
    EXPECT_DOUBLE_EQ(bins.edges[1], 25.0);
    EXPECT_DOUBLE_EQ(bins.edges[2], 32.5);
    std::multiset<int> assigned;
    for (const auto& g : groups) assigned.insert(g.bin);
    EXPECT_EQ(assigned, (std::multiset<int>{0, 1, 2, 3}));
}

TEST(QuartileBins, DegenerateConstantScores) {
    auto ds = dataset_from_scores({50, 50, 50, 50, 50});
    auto groups = collect_groups(ds);
    const auto bins = quartile_bins(groups);
    EXPECT_TRUE(bins.degenerate);
    for (const auto& g : groups) EXPECT_EQ(g.bin, 0);
}

TEST(QuartileBins, UniformScoresSplitEvenly) {
    std::vector<double> scores;
    for (int i = 0; i < 100; ++i) scores.push_back(static_cast<double>(i));
    auto ds = dataset_from_scores(scores);
    auto groups = collect_groups(ds);
    quartile_bins(groups);
    std::array<int, 4> counts{};
    for (const auto& g : groups) ++counts[static_cast<std::size_t>(g.bin)];
    for (int b = 0; b < 4; ++b) EXPECT_EQ(counts[static_cast<std::size_t>(b)], 25);
}

TEST(QuartileBins, TooFewGroupsRejected) {
    auto ds = dataset_from_scores({1, 2, 3});
    auto groups = collect_groups(ds);
    EXPECT_THROW(quartile_bins(groups), std::invalid_argument);
}

TEST(GroupShuffle, EqualSizeGroupsHitExactFraction) {
    std::vector<double> scores;
    for (int i = 0; i < 100; ++i) scores.push_back(static_cast<double>(i % 90));
    auto ds = dataset_from_scores(scores);
    // scores collide but group ids are unique, one record each
    const auto split = group_shuffle_split(ds, 0.15, 3);
    EXPECT_EQ(split.test_groups.size(), 15u);
    EXPECT_EQ(split.train_groups.size(), 85u);
}

TEST(GroupShuffle, DeterministicGivenSeed) {
    SynthConfig cfg;
    cfg.n_locations = 40;
    cfg.augment_copies = 1;
    cfg.seed = 5;
    const Dataset ds = synthesize_dataset(cfg);
    const auto a = group_shuffle_split(ds, 0.15, 9);
    const auto b = group_shuffle_split(ds, 0.15, 9);
    EXPECT_EQ(a.test_groups, b.test_groups);
    EXPECT_EQ(a.train_groups, b.train_groups);
}

TEST(GroupShuffle, InvalidFractionRejected) {
    auto ds = dataset_from_scores({1, 2, 3, 4});
    EXPECT_THROW(group_shuffle_split(ds, 0.0, 1), std::invalid_argument);
    EXPECT_THROW(group_shuffle_split(ds, 1.0, 1), std::invalid_argument);
}

// Augmented copies never straddle the hold-out boundary.
TEST(GroupShuffle, NoLeakageOverHundredDatasets) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthConfig cfg;
        cfg.n_locations = 30;
        cfg.augment_copies = static_cast<int>(seed % 4);
        cfg.seed = seed;
        const Dataset ds = synthesize_dataset(cfg);
        const auto split = group_shuffle_split(ds, 0.15, seed + 1);
        std::unordered_set<std::string> test(split.test_groups.begin(),
                                             split.test_groups.end());
        std::unordered_set<std::string> train(split.train_groups.begin(),
                                              split.train_groups.end());
        for (const auto& g : test) ASSERT_FALSE(train.count(g));
        // coverage
        ASSERT_EQ(test.size() + train.size(), static_cast<std::size_t>(cfg.n_locations));
        // realized fraction within one group of the request
        const std::size_t group_size = static_cast<std::size_t>(cfg.augment_copies) + 1;
        const double want = 0.15 * static_cast<double>(ds.records.size());
        ASSERT_GE(static_cast<double>(split.test_records), want);
        ASSERT_LT(static_cast<double>(split.test_records),
                  want + static_cast<double>(group_size));
    }
}

TEST(StratifiedKfold, ExactBalanceWhenAchievable) {
    // 20 singleton groups, 5 per bin
    std::vector<GroupInfo> groups;
    for (int b = 0; b < 4; ++b)
        for (int i = 0; i < 5; ++i)
            groups.push_back({"g" + std::to_string(b * 5 + i), 0.0, 1, b});
    const auto folds = stratified_group_kfold(groups, 5);
    ASSERT_EQ(folds.size(), 5u);
    for (const auto& fold : folds) {
        ASSERT_EQ(fold.size(), 4u);
        std::set<int> bins;
        for (const auto& id : fold) {
            for (const auto& g : groups)
                if (g.group_id == id) bins.insert(g.bin);
        }
        EXPECT_EQ(bins.size(), 4u) << "fold misses a bin";
    }
}

TEST(StratifiedKfold, OneGroupPerFoldWhenKEqualsGroups) {
    std::vector<GroupInfo> groups;
    for (int i = 0; i < 6; ++i)
        groups.push_back({"g" + std::to_string(i), 0.0, 1, i % 2});
    const auto folds = stratified_group_kfold(groups, 6);
    for (const auto& fold : folds) EXPECT_EQ(fold.size(), 1u);
}

TEST(StratifiedKfold, KExceedingGroupsRejected) {
    std::vector<GroupInfo> groups = {{"a", 0, 1, 0}, {"b", 0, 1, 1}};
    EXPECT_THROW(stratified_group_kfold(groups, 3), std::invalid_argument);
    EXPECT_THROW(stratified_group_kfold(groups, 1), std::invalid_argument);
}

// Per-fold bin proportions within one group of the global per-fold share.
TEST(StratifiedKfold, BalancePropertyOverSeeds) {
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        SynthConfig cfg;
        cfg.n_locations = 200;
        cfg.seed = seed + 1000;
        const Dataset ds = synthesize_dataset(cfg);
        auto groups = collect_groups(ds);
        quartile_bins(groups);
        std::array<double, 4> totals{};
        for (const auto& g : groups) ++totals[static_cast<std::size_t>(g.bin)];

        const int k = 5;
        const auto folds = stratified_group_kfold(groups, k);
        std::unordered_map<std::string, int> bin_of;
        for (const auto& g : groups) bin_of[g.group_id] = g.bin;
        for (const auto& fold : folds) {
            std::array<double, 4> counts{};
            for (const auto& id : fold) ++counts[static_cast<std::size_t>(bin_of[id])];
            for (std::size_t b = 0; b < 4; ++b)
                ASSERT_LE(std::abs(counts[b] - totals[b] / k), 1.0 + 1e-9)
                    << "seed " << seed;
        }
    }
}

TEST(SplitPlan, DisjointCoverageAndDeterminism) {
    SynthConfig cfg;
    cfg.n_locations = 60;
    cfg.augment_copies = 2;
    cfg.seed = 17;
    const Dataset ds = synthesize_dataset(cfg);
    const SplitPlan a = make_split_plan(ds, 0.15, 5, 4);
    const SplitPlan b = make_split_plan(ds, 0.15, 5, 4);
    EXPECT_EQ(a.test_group_ids, b.test_group_ids);
    EXPECT_EQ(a.folds, b.folds);

    std::set<std::string> seen(a.test_group_ids.begin(), a.test_group_ids.end());
    std::size_t total = seen.size();
    for (const auto& fold : a.folds) {
        for (const auto& g : fold) {
            EXPECT_FALSE(seen.count(g)) << "group in two partitions: " << g;
            seen.insert(g);
        }
        total += fold.size();
    }
    EXPECT_EQ(total, 60u);
    EXPECT_EQ(seen.size(), 60u);
}

TEST(SplitPlan, SerializationListsEveryGroup) {
    SynthConfig cfg;
    cfg.n_locations = 12;
    cfg.seed = 2;
    const Dataset ds = synthesize_dataset(cfg);
    const SplitPlan plan = make_split_plan(ds, 0.2, 3, 8);
    std::ostringstream out;
    write_split_plan(plan, out);
    const std::string text = out.str();
    EXPECT_NE(text.find("seed=8"), std::string::npos);
    EXPECT_NE(text.find("bin_edges="), std::string::npos);
    for (int i = 0; i < 12; ++i) {
        char buf[16];
        std::snprintf(buf, sizeof(buf), "g%05d|", i);
        EXPECT_NE(text.find(buf), std::string::npos) << buf;
    }
}
