#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dataset.hpp"
#include "rng.hpp"

namespace walkclip {

struct GroupInfo {
    std::string group_id;
    double walk_score = 0.0;
    int record_count = 0;
    int bin = -1; // quartile bin, 0..3
};

// Unique groups in order of first appearance, with record multiplicities.
inline std::vector<GroupInfo> collect_groups(const Dataset& ds) {
    std::vector<GroupInfo> groups;
    std::unordered_map<std::string, std::size_t> pos;
    for (const auto& r : ds.records) {
        auto [it, inserted] = pos.try_emplace(r.group_id, groups.size());
        if (inserted) groups.push_back({r.group_id, r.walk_score, 1, -1});
        else ++groups[it->second].record_count;
    }
    return groups;
}

struct QuartileBins {
    std::array<double, 3> edges{}; // 25/50/75th percentiles of group scores
    bool degenerate = false;       // all edges equal (constant scores)
};

namespace detail {

// Linear-interpolation percentile over sorted values (rank = p*(m-1)).
inline double percentile(const std::vector<double>& sorted, double p) {
    const double rank = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(rank);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

} // namespace detail

// Quartile binning over unique group scores (not records), right-closed
// edges. Mutates the bin field of each group.
inline QuartileBins quartile_bins(std::vector<GroupInfo>& groups) {
    if (groups.size() < 4)
        throw std::invalid_argument("quartile_bins: needs >= 4 groups");
    std::vector<double> scores;
    scores.reserve(groups.size());
    for (const auto& g : groups) scores.push_back(g.walk_score);
    std::sort(scores.begin(), scores.end());
    QuartileBins bins;
    bins.edges = {detail::percentile(scores, 0.25), detail::percentile(scores, 0.50),
                  detail::percentile(scores, 0.75)};
    bins.degenerate = bins.edges[0] == bins.edges[2];
    for (auto& g : groups) {
        if (g.walk_score <= bins.edges[0]) g.bin = 0;
        else if (g.walk_score <= bins.edges[1]) g.bin = 1;
        else if (g.walk_score <= bins.edges[2]) g.bin = 2;
        else g.bin = 3;
    }
    return bins;
}

struct GroupShuffleSplit {
    std::vector<std::string> train_groups;
    std::vector<std::string> test_groups;
    std::size_t test_records = 0;
    std::size_t total_records = 0;
};

// Seeded shuffle of group ids; groups accumulate into the test side until
// the test record count first reaches the requested fraction.
inline GroupShuffleSplit group_shuffle_split(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("test_fraction must be in (0, 1)");
    auto groups = collect_groups(ds);
    if (groups.empty()) throw std::invalid_argument("group_shuffle_split: empty dataset");

    auto rng = make_rng(seed, 11);
    std::vector<std::size_t> order(groups.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    GroupShuffleSplit split;
    split.total_records = ds.records.size();
    const double want = test_fraction * static_cast<double>(split.total_records);
    for (std::size_t gi : order) {
        if (static_cast<double>(split.test_records) < want) {
            split.test_groups.push_back(groups[gi].group_id);
            split.test_records += static_cast<std::size_t>(groups[gi].record_count);
        } else {
            split.train_groups.push_back(groups[gi].group_id);
        }
    }
    return split;
}

// Greedy stratified grouped k-fold: groups sorted by (record count desc,
// group_id asc), each placed on the fold where the assignment least
// increases the total squared deviation of bin counts from the per-fold
// target. Only the candidate fold's term changes, so the marginal cost is
// (c+1-t)^2 - (c-t)^2 for the group's bin. Ties go to the fold with fewer
// records, then the lowest index, so no fold is left empty when
// k <= group count.
inline std::vector<std::vector<std::string>> stratified_group_kfold(
    std::vector<GroupInfo> groups, int k) {
    if (k < 2) throw std::invalid_argument("stratified_group_kfold: k must be >= 2");
    if (static_cast<std::size_t>(k) > groups.size())
        throw std::invalid_argument("stratified_group_kfold: k exceeds group count");
    for (const auto& g : groups)
        if (g.bin < 0 || g.bin > 3)
            throw std::invalid_argument("stratified_group_kfold: groups must be binned");

    std::sort(groups.begin(), groups.end(), [](const GroupInfo& a, const GroupInfo& b) {
        if (a.record_count != b.record_count) return a.record_count > b.record_count;
        return a.group_id < b.group_id;
    });

    std::array<double, 4> totals{};
    for (const auto& g : groups) totals[static_cast<std::size_t>(g.bin)] += 1.0;
    std::array<double, 4> target{};
    for (std::size_t b = 0; b < 4; ++b) target[b] = totals[b] / k;

    std::vector<std::array<double, 4>> fold_bins(static_cast<std::size_t>(k),
                                                 std::array<double, 4>{});
    std::vector<int> fold_records(static_cast<std::size_t>(k), 0);
    std::vector<std::vector<std::string>> folds(static_cast<std::size_t>(k));

    for (const auto& g : groups) {
        int best = 0;
        double best_cost = 0.0;
        for (int f = 0; f < k; ++f) {
            const double c = fold_bins[static_cast<std::size_t>(f)][static_cast<std::size_t>(g.bin)];
            const double t = target[static_cast<std::size_t>(g.bin)];
            const double cost = (c + 1.0 - t) * (c + 1.0 - t) - (c - t) * (c - t);
            const bool better =
                f == 0 || cost < best_cost ||
                (cost == best_cost &&
                 fold_records[static_cast<std::size_t>(f)] <
                     fold_records[static_cast<std::size_t>(best)]);
            if (better) {
                best = f;
                best_cost = cost;
            }
        }
        fold_bins[static_cast<std::size_t>(best)][static_cast<std::size_t>(g.bin)] += 1.0;
        fold_records[static_cast<std::size_t>(best)] += g.record_count;
        folds[static_cast<std::size_t>(best)].push_back(g.group_id);
    }
    return folds;
}

struct SplitPlan {
    std::vector<std::string> test_group_ids;
    std::vector<std::vector<std::string>> folds;
    std::uint64_t seed = 0;
    std::array<double, 3> bin_edges{};
};

// Full two-stage plan: grouped hold-out, then stratified folds over the
// training groups.
inline SplitPlan make_split_plan(const Dataset& ds, double test_fraction, int k,
                                 std::uint64_t seed) {
    SplitPlan plan;
    plan.seed = seed;
    const auto holdout = group_shuffle_split(ds, test_fraction, seed);
    plan.test_group_ids = holdout.test_groups;

    auto groups = collect_groups(ds);
    const auto bins = quartile_bins(groups);
    plan.bin_edges = bins.edges;

    std::unordered_set<std::string> test_set(holdout.test_groups.begin(),
                                             holdout.test_groups.end());
    std::vector<GroupInfo> train_groups;
    for (const auto& g : groups)
        if (!test_set.count(g.group_id)) train_groups.push_back(g);
    plan.folds = stratified_group_kfold(std::move(train_groups), k);
    return plan;
}

inline void write_split_plan(const SplitPlan& plan, std::ostream& out) {
    out << "seed=" << plan.seed << '\n';
    out << "bin_edges=" << detail::format_double(plan.bin_edges[0]) << ','
        << detail::format_double(plan.bin_edges[1]) << ','
        << detail::format_double(plan.bin_edges[2]) << '\n';
    for (const auto& g : plan.test_group_ids) out << g << "|test\n";
    for (std::size_t f = 0; f < plan.folds.size(); ++f)
        for (const auto& g : plan.folds[f]) out << g << "|fold" << f << '\n';
}

inline void write_split_plan(const SplitPlan& plan, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DatasetError("cannot write split plan '" + path + "'");
    write_split_plan(plan, out);
}

} // namespace walkclip
