#include <gtest/gtest.h>

#include <fstream>

#include "oracles.hpp"
#include "rhyme_mimic/gmm.hpp"
#include "rhyme_mimic/peripherals.hpp"
#include "rhyme_mimic/synthetic.hpp"

using namespace rhyme_mimic;

namespace {

nlohmann::json command_json(PeripheralKind kind, std::string ref, std::uint64_t id, std::int64_t duration = 0) {
    return to_json(PeripheralCommand{kind, std::move(ref), id, 0, duration, false});
}

}  // namespace

TEST(Latency, DurationsPerKind) {
    const LatencyModel m;
    EXPECT_EQ(m.duration_for({PeripheralKind::display, "i", 1, 0, 0, false}), 200);
    EXPECT_EQ(m.duration_for({PeripheralKind::tts, "hi", 1, 0, 0, false}), 1500);
    EXPECT_EQ(m.duration_for({PeripheralKind::motion, "g", 1, 0, 0, false}), 2000);
    EXPECT_EQ(m.duration_for({PeripheralKind::motion, "g", 1, 0, 700, false}), 700);
    EXPECT_EQ(m.duration_for({PeripheralKind::audio, "a", 1, 0, 3100, false}), 3100);
}

TEST(PeripheralNode, AcksOncePerCommandInArrivalOrder) {
    EventLoop loop(ClockMode::virtual_time);
    MessageBus bus(loop.clock());
    PeripheralNode display(PeripheralKind::display, bus, loop, {}, std::set<std::string>{"img/a", "img/b"});
    loop.add_node(display);
    auto game = bus.connect("game");
    game.subscribe(topics::peripheral_ack);
    game.publish(topics::peripheral_display, command_json(PeripheralKind::display, "img/a", 1));
    game.publish(topics::peripheral_display, command_json(PeripheralKind::display, "img/missing", 2));
    game.publish(topics::peripheral_display, command_json(PeripheralKind::display, "img/b", 3));
    game.publish(topics::peripheral_display, {{"junk", true}});
    loop.run_until([] { return false; });
    const auto acks = game.drain();
    ASSERT_EQ(acks.size(), 3u);
    std::vector<std::int64_t> at;
    for (std::size_t i = 0; i < 3; ++i) {
        const auto ack = peripheral_ack_from_json(acks[i].payload);
        EXPECT_EQ(ack.command_id, i + 1);
        EXPECT_EQ(ack.kind, PeripheralKind::display);
        EXPECT_EQ(ack.ok, i != 1);
        at.push_back(acks[i].timestamp_ms);
    }
    // Served one at a time, 200 ms each.
    EXPECT_EQ(at, (std::vector<std::int64_t>{200, 400, 600}));
    EXPECT_EQ(display.acks_sent(), 3u);
    EXPECT_EQ(display.received().size(), 3u);
}

TEST(PeripheralNode, TtsTextIsNeverCheckedAgainstResources) {
    EventLoop loop(ClockMode::virtual_time);
    MessageBus bus(loop.clock());
    PeripheralNode tts(PeripheralKind::tts, bus, loop, {}, std::set<std::string>{});
    loop.add_node(tts);
    auto game = bus.connect("game");
    game.subscribe(topics::peripheral_ack);
    game.publish(topics::peripheral_tts, command_json(PeripheralKind::tts, "Well done!", 5));
    loop.run_until([] { return false; });
    const auto ack = peripheral_ack_from_json(game.drain().at(0).payload);
    EXPECT_TRUE(ack.ok);
    EXPECT_EQ(ack.simulated_duration_ms, 1500);
}

TEST(AckJson, RoundTrip) {
    const PeripheralAck a{9, PeripheralKind::motion, false, 123, "unknown resource 'x'"};
    const auto b = peripheral_ack_from_json(to_json(a));
    EXPECT_EQ(b.command_id, 9u);
    EXPECT_EQ(b.kind, PeripheralKind::motion);
    EXPECT_FALSE(b.ok);
    EXPECT_EQ(b.simulated_duration_ms, 123);
    EXPECT_EQ(b.detail, a.detail);
}

namespace {

std::vector<StreamFrame> numbered_frames(std::size_t n) {
    std::vector<StreamFrame> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i].timestamp_ms = static_cast<std::int64_t>(i) * 33;
    return out;
}

}  // namespace

TEST(ReplayNode, RealTimeRateKeepsRecordedPace) {
    EventLoop loop(ClockMode::real);
    MessageBus bus(loop.clock());
    auto cam = bus.connect("sink");
    cam.subscribe(topics::pose_frames);
    ReplayNode replay(numbered_frames(300), {1.0, false, 0}, bus, loop);
    replay.start();
    const auto t0 = std::chrono::steady_clock::now();
    loop.run_until([&] { return replay.finished(); }, loop.now_ms() + 30000);
    const double elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const double expected = 299.0 * 33.0;
    EXPECT_NEAR(elapsed, expected, 0.05 * expected);
    const auto frames = cam.drain();
    ASSERT_EQ(frames.size(), 300u);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        EXPECT_EQ(frames[i].payload["timestamp_ms"], static_cast<std::int64_t>(i) * 33);
    }
}

TEST(ReplayNode, RateZeroPublishesBackToBack) {
    EventLoop loop(ClockMode::real);
    MessageBus bus(loop.clock(), 4096);
    auto cam = bus.connect("sink");
    cam.subscribe(topics::pose_frames);
    ReplayNode replay(numbered_frames(300), {0.0, false, 0}, bus, loop);
    replay.start();
    const auto start = loop.now_ms();
    loop.run_until([&] { return replay.finished(); }, start + 5000);
    EXPECT_LT(loop.now_ms() - start, 1000);
    EXPECT_EQ(cam.drain().size(), 300u);
}

TEST(ReplayNode, LoopRepeatsUntilStopped) {
    EventLoop loop(ClockMode::virtual_time);
    MessageBus bus(loop.clock(), 4096);
    auto cam = bus.connect("sink");
    cam.subscribe(topics::pose_frames);
    ReplayNode replay(numbered_frames(10), {1.0, true, 0}, bus, loop);
    replay.start();
    loop.run_until([&] { return replay.passes() == 3; });
    replay.stop();
    loop.run_until([] { return false; });
    EXPECT_EQ(replay.published(), 30u);
    const auto frames = cam.drain();
    ASSERT_EQ(frames.size(), 30u);
    // Second pass starts one frame period after the first ends.
    EXPECT_EQ(frames[10].timestamp_ms - frames[9].timestamp_ms, 33);
}

TEST(ReplayNode, NegativeRateRejected) {
    EventLoop loop(ClockMode::virtual_time);
    MessageBus bus(loop.clock());
    EXPECT_THROW(ReplayNode({}, {-1.0, false, 0}, bus, loop), std::invalid_argument);
}

TEST(PoseNode, MatchesDirectPipelineAndCountsSkips) {
    const auto classifier = train(generate_dataset({}), {});
    const auto frames = read_stream_file(oracle::fixture_path("session_stream.jsonl"));
    EventLoop loop(ClockMode::virtual_time);
    MessageBus bus(loop.clock(), 8192);
    PoseNode pose(bus, classifier);
    loop.add_node(pose);
    auto sink = bus.connect("sink");
    sink.subscribe(topics::pose_classified);
    auto cam = bus.connect("cam");
    cam.publish(topics::pose_frames, {{"people", "nope"}});  // malformed

    std::vector<std::string> expected;
    std::size_t no_person = 0;
    for (const auto& f : frames) {
        const auto r = classify_frame(f.people, classifier, {});
        if (r.outcome == FrameClassification::Outcome::classified) expected.push_back(r.label);
        if (r.outcome == FrameClassification::Outcome::no_person) ++no_person;
    }
    std::vector<std::string> got;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        cam.publish(topics::pose_frames, frame_document(frames[i].people, frames[i].timestamp_ms));
        if (i % 500 == 0) loop.run_until([] { return false; });
        for (const auto& m : sink.drain()) got.push_back(m.payload["label"].get<std::string>());
    }
    loop.run_until([] { return false; });
    for (const auto& m : sink.drain()) got.push_back(m.payload["label"].get<std::string>());
    EXPECT_EQ(got, expected);
    EXPECT_EQ(pose.stats().frames, frames.size() + 1);
    EXPECT_EQ(pose.stats().malformed, 1u);
    EXPECT_EQ(pose.stats().no_person, no_person);
    EXPECT_EQ(pose.stats().classified, expected.size());
    EXPECT_EQ(pose.stats().classified + pose.stats().skipped(), pose.stats().frames);
}

TEST(PoseNode, RejectsLowConfidenceFrames) {
    const auto classifier = train(generate_dataset({}), {});
    const auto people = parse_frame(oracle::read_file(oracle::fixture_path("frame_confidence_boundary.json")));
    const auto r = classify_frame(people, classifier, {});
    EXPECT_EQ(r.outcome, FrameClassification::Outcome::rejected_confidence);
    EXPECT_GE(r.rejected_joint, 1);
    EXPECT_LE(r.rejected_joint, 8);
}
