#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "walkclip/dataset.hpp"
#include "walkclip/synth.hpp"

using namespace walkclip;

namespace {

Dataset small_dataset() {
    SynthConfig cfg;
    cfg.n_locations = 5;
    cfg.dims = {4, 3, 6};
    cfg.seed = 42;
    return synthesize_dataset(cfg);
}

} // namespace

TEST(Dataset, ParseThreeValidRecords) {
    std::istringstream in(
        "dims=2,2,3\n"
        "a|g1|44.9|-93.1|1,2|3,4|5,6,7|50\n"
        "b|g2|44.8|-93.2|0.5,0.25|1,1|0,0,1|10\n"
        "c|g2|44.8|-93.2|9,9|8,8|7,7,7|10\n");
    const Dataset ds = parse_dataset(in, "mem");
    EXPECT_EQ(ds.records.size(), 3u);
    EXPECT_EQ(ds.dims.sat, 2);
    EXPECT_EQ(ds.dims.pdfm, 3);
    EXPECT_EQ(ds.records[0].record_id, "a");
    EXPECT_DOUBLE_EQ(ds.records[1].walk_score, 10.0);
}

TEST(Dataset, ScoreOutOfRangeNamesRecord) {
    std::istringstream in(
        "dims=1,1,1\n"
        "bad|g1|0|0|1|1|1|105\n");
    try {
        parse_dataset(in, "mem");
        FAIL() << "expected DatasetError";
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("105"), std::string::npos);
    }
}

TEST(Dataset, MalformedLineReportsLineNumber) {
    std::istringstream in(
        "dims=1,1,1\n"
        "a|g1|0|0|1|1|1|50\n"
        "oops\n");
    try {
        parse_dataset(in, "mem");
        FAIL() << "expected DatasetError";
    } catch (const DatasetError& e) {
        EXPECT_NE(std::string(e.what()).find("mem:3"), std::string::npos);
    }
}

TEST(Dataset, DuplicateRecordIdRejected) {
    std::istringstream in(
        "dims=1,1,1\n"
        "a|g1|0|0|1|1|1|50\n"
        "a|g2|1|1|2|2|2|60\n");
    EXPECT_THROW(parse_dataset(in, "mem"), DatasetError);
}

TEST(Dataset, GroupCoherenceEnforced) {
    std::istringstream in(
        "dims=1,1,1\n"
        "a|g1|0|0|1|1|1|50\n"
        "b|g1|0|0.5|2|2|2|50\n");
    EXPECT_THROW(parse_dataset(in, "mem"), DatasetError);
}

TEST(Dataset, DimensionMismatchRejected) {
    std::istringstream in(
        "dims=2,1,1\n"
        "a|g1|0|0|1|1|1|50\n");
    EXPECT_THROW(parse_dataset(in, "mem"), DatasetError);
}

TEST(Dataset, EmptyDatasetWritesHeaderOnly) {
    Dataset ds;
    ds.dims = {3, 4, 5};
    std::ostringstream out;
    write_dataset(ds, out);
    EXPECT_EQ(out.str(), "dims=3,4,5\n");
}

TEST(Dataset, SingleRecordCanonicalOrder) {
    Dataset ds = small_dataset();
    ds.records.resize(1);
    std::ostringstream out;
    write_dataset(ds, out);
    const std::string text = out.str();
    ASSERT_EQ(text.rfind("dims=4,3,6\n", 0), 0u);
    const std::string line = text.substr(text.find('\n') + 1);
    EXPECT_EQ(line.rfind("loc00000|g00000|", 0), 0u);
}

// Round-trip: parse(write(ds)) == ds over 100 seeded random datasets.
TEST(Dataset, RoundTripProperty) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        SynthConfig cfg;
        cfg.n_locations = 8;
        cfg.dims = {3, 2, 4};
        cfg.augment_copies = static_cast<int>(seed % 3);
        cfg.seed = seed;
        const Dataset ds = synthesize_dataset(cfg);
        std::ostringstream out;
        write_dataset(ds, out);
        std::istringstream in(out.str());
        const Dataset back = parse_dataset(in, "mem");
        ASSERT_TRUE(datasets_equal(ds, back)) << "seed " << seed;
    }
}

TEST(Dataset, WriteIsDeterministic) {
    const Dataset ds = small_dataset();
    std::ostringstream a, b;
    write_dataset(ds, a);
    write_dataset(ds, b);
    EXPECT_EQ(a.str(), b.str());
}

TEST(Synth, CountsAndGroups) {
    SynthConfig cfg;
    cfg.n_locations = 10;
    cfg.seed = 7;
    Dataset ds = synthesize_dataset(cfg);
    EXPECT_EQ(ds.records.size(), 10u);

    cfg.augment_copies = 2;
    ds = synthesize_dataset(cfg);
    EXPECT_EQ(ds.records.size(), 30u);
    std::set<std::string> groups;
    for (const auto& r : ds.records) groups.insert(r.group_id);
    EXPECT_EQ(groups.size(), 10u);
}

TEST(Synth, DeterministicGivenSeed) {
    SynthConfig cfg;
    cfg.n_locations = 20;
    cfg.augment_copies = 1;
    cfg.seed = 123;
    EXPECT_TRUE(datasets_equal(synthesize_dataset(cfg), synthesize_dataset(cfg)));
}

TEST(Synth, ScoresInRangeAndGroupsCoherent) {
    SynthConfig cfg;
    cfg.n_locations = 50;
    cfg.augment_copies = 2;
    cfg.seed = 9;
    const Dataset ds = synthesize_dataset(cfg);
    EXPECT_NO_THROW(validate_dataset(ds));
    for (const auto& r : ds.records) {
        EXPECT_GE(r.walk_score, 0.0);
        EXPECT_LE(r.walk_score, 100.0);
    }
}

TEST(Synth, InvalidConfigRejected) {
    SynthConfig cfg;
    cfg.autocorrelation_length = 0.0;
    EXPECT_THROW(synthesize_dataset(cfg), std::invalid_argument);
}

TEST(Diagnostics, CollectsMultipleProblems) {
    std::istringstream in(
        "dims=1,1,1\n"
        "a|g1|0|0|1|1|1|50\n"
        "a|g1|0|0|1|1|1|50\n"
        "b|g1|0|1|1|1|1|50\n");
    const auto diags = collect_diagnostics(in, "mem");
    ASSERT_EQ(diags.size(), 2u);
    EXPECT_NE(diags[0].find("duplicate"), std::string::npos);
    EXPECT_NE(diags[1].find("leakage"), std::string::npos);
}
