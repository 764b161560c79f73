#include <gtest/gtest.h>

#include <set>

#include "rhyme_mimic/gmm.hpp"
#include "rhyme_mimic/peripherals.hpp"
#include "rhyme_mimic/synthetic.hpp"

using namespace rhyme_mimic;

TEST(Synthetic, EightGesturesThirtyEach) {
    const auto d = generate_dataset({});
    EXPECT_EQ(d.labels.size(), 8u);
    for (auto n : d.class_counts()) EXPECT_EQ(n, 30u);
    std::set<std::string> labels(d.labels.begin(), d.labels.end());
    EXPECT_TRUE(labels.count("spin_the_hands"));
}

TEST(Synthetic, SeedDeterminism) {
    SyntheticDatasetConfig a;
    a.seed = 9;
    EXPECT_EQ(save_model(train(generate_dataset(a), {})), save_model(train(generate_dataset(a), {})));
    const auto x = generate_dataset(a);
    a.seed = 10;
    const auto y = generate_dataset(a);
    EXPECT_NE(x.records[0].features, y.records[0].features);
}

TEST(Synthetic, ZeroSpreadMeansNoWithinClassVariance) {
    SyntheticDatasetConfig cfg;
    cfg.spread_px = 0.0;
    const auto d = generate_dataset(cfg);
    // Placement still moves and rescales the body, which the features ignore.
    for (std::size_t i = 1; i < d.records.size(); ++i) {
        if (d.records[i].label != d.records[i - 1].label) continue;
        for (std::size_t k = 0; k < 16; ++k) EXPECT_NEAR(d.records[i].features[k], d.records[i - 1].features[k], 1e-9);
    }
    auto [tr, te] = split(d, 2.0 / 3.0, 1);
    EXPECT_DOUBLE_EQ(evaluate(train(tr, {}), te).accuracy, 1.0);
}

TEST(Synthetic, ClassCountOption) {
    SyntheticDatasetConfig cfg;
    cfg.classes = 3;
    cfg.per_class = 5;
    const auto d = generate_dataset(cfg);
    EXPECT_EQ(d.labels.size(), 3u);
    EXPECT_EQ(d.records.size(), 15u);
    cfg.classes = 9;
    EXPECT_THROW(generate_dataset(cfg), std::invalid_argument);
}

TEST(Synthetic, DefaultScriptMatchesAnchors) {
    const auto s = default_rhyme_script();
    ASSERT_EQ(s.lines.size(), 8u);
    const auto& anchors = rhyme_anchor_poses();
    std::vector<std::string> labels;
    for (const auto& a : anchors) labels.push_back(a.label);
    EXPECT_NO_THROW(s.validate(labels));
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(s.lines[i].pose_class, anchors[i].label);
}

TEST(Synthetic, SessionStreamHoldsTargetsOnlyForImitatedLines) {
    const auto script = default_rhyme_script();
    SessionStreamConfig cfg;
    cfg.imitated = {true, false, true, false, true, true, false, true};
    const auto stream = generate_session_stream(script, LatencyModel{}, cfg);
    ASSERT_EQ(stream.predicted_wait_start_ms.size(), 8u);
    for (std::size_t i = 1; i < stream.frames.size(); ++i) {
        EXPECT_EQ(stream.frames[i].timestamp_ms - stream.frames[i - 1].timestamp_ms, 33);
    }
    // Wait windows are ordered and the first one opens after the first sing round.
    EXPECT_EQ(stream.predicted_wait_start_ms[0], 3000);
    for (std::size_t i = 1; i < 8; ++i) EXPECT_GT(stream.predicted_wait_start_ms[i], stream.predicted_wait_start_ms[i - 1]);
    std::size_t with_people = 0;
    for (const auto& f : stream.frames) with_people += f.people.empty() ? 0 : 1;
    EXPECT_GT(with_people, 8u * 60u);
    cfg.imitated.pop_back();
    EXPECT_THROW(generate_session_stream(script, LatencyModel{}, cfg), std::invalid_argument);
}
