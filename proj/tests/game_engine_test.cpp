#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "oracles.hpp"
#include "rhyme_mimic/game_engine.hpp"
#include "trace_cases.hpp"

using namespace rhyme_mimic;

class TraceSuite : public ::testing::TestWithParam<traces::TraceCase> {};

TEST_P(TraceSuite, MatchesHandWrittenTrace) {
    const std::string failures = traces::check_case(GetParam());
    EXPECT_TRUE(failures.empty()) << failures;
}

INSTANTIATE_TEST_SUITE_P(Engine, TraceSuite, ::testing::ValuesIn(traces::all_cases()),
                         [](const auto& info) { return info.param.name; });

TEST(TraceSuiteSize, AtLeastTwelveCases) { EXPECT_GE(traces::all_cases().size(), 12u); }

TEST(StartSession, FiveLineScriptEmitsThreeCommands) {
    RhymeScript s = traces::three_line_script();
    s.lines.resize(2);
    for (std::size_t i = 2; i < 5; ++i) {
        RhymeLine l = s.lines[0];
        l.index = i;
        s.lines.push_back(l);
    }
    GameSession session(s, "x");
    const auto cmds = session.start(0);
    EXPECT_EQ(session.state().phase, Phase::singing);
    EXPECT_EQ(session.state().line, 0u);
    EXPECT_EQ(cmds.size(), 3u);
}

TEST(StartSession, EmptyScriptFinishes) {
    RhymeScript s;
    GameSession session(s, "x");
    EXPECT_TRUE(session.start(0).empty());
    EXPECT_EQ(session.state().phase, Phase::finished);
}

TEST(StartSession, StartWhileActiveThrows) {
    GameSession session(traces::three_line_script(), "x");
    session.start(0);
    try {
        session.start(1);
        FAIL();
    } catch (const SessionError& e) {
        EXPECT_EQ(e.kind(), SessionError::Kind::session_active);
    }
}

TEST(Summary, IncompleteSessionThrows) {
    GameSession session(traces::three_line_script(), "x");
    session.start(0);
    try {
        session_summary(session.log(), 3);
        FAIL();
    } catch (const SessionError& e) {
        EXPECT_EQ(e.kind(), SessionError::Kind::incomplete_session);
    }
}

TEST(Summary, AllImitatedFirstTry) {
    const auto s = traces::three_line_script();
    GameSession session(s, "x");
    std::int64_t t = 0;
    session.start(t);
    for (std::size_t l = 0; l < 3; ++l) {
        session.handle(GameEvent::singing_done(l, t += 1000));
        for (int k = 0; k < 3; ++k) session.handle(GameEvent::pose_observed("p" + std::to_string(l), 0.0, t += 33));
        session.handle(GameEvent::encourage_done(l, t += 1500));
    }
    const auto sum = session_summary(session.log(), 3);
    EXPECT_EQ(sum.lines_imitated, 3u);
    EXPECT_EQ(sum.lines_attempted, 3u);
    for (const auto& o : sum.outcomes) EXPECT_EQ(o.repeats_used, 0u);
    EXPECT_EQ(sum.woz_interventions, 0u);
    EXPECT_FALSE(sum.aborted);
}

// Ten events, aggregated by hand below.
TEST(Summary, MixedTraceMatchesHandAggregate) {
    const auto s = traces::three_line_script();
    GameSession session(s, "x");
    session.start(0);                                                   // 1: line 0 starts at 0
    session.handle(GameEvent::singing_done(0, 1000));                    // 2
    session.handle(GameEvent::timeout(0, 6000));                         // 3: repeat
    session.handle(GameEvent::singing_done(0, 7000));                    // 4
    session.handle(GameEvent::woz_command(WozCommand::mark_success, 8000));  // 5: line 0 ok, latency 8000
    session.handle(GameEvent::encourage_done(0, 9500));                  // 6: line 1 starts at 9500
    session.handle(GameEvent::singing_done(1, 10500));                   // 7
    session.handle(GameEvent::woz_command(WozCommand::next_line, 11000));    // 8: line 1 failed by operator
    session.handle(GameEvent::singing_done(2, 12000));                   // 9: line 2 started at 11000
    session.handle(GameEvent::woz_command(WozCommand::abort, 12500));    // 10
    const auto sum = session_summary(session.log(), 3);
    EXPECT_EQ(sum.total_lines, 3u);
    EXPECT_EQ(sum.lines_attempted, 3u);
    EXPECT_EQ(sum.lines_imitated, 1u);
    EXPECT_DOUBLE_EQ(sum.mean_latency_ms, 8000.0);
    EXPECT_EQ(sum.woz_interventions, 3u);
    EXPECT_TRUE(sum.aborted);
    ASSERT_EQ(sum.outcomes.size(), 2u);
    EXPECT_EQ(sum.outcomes[0], (LineOutcome{0, true, 8000, 1, true}));
    EXPECT_EQ(sum.outcomes[1], (LineOutcome{1, false, 1500, 0, true}));
}

TEST(Progress, ExhaustingEveryLineFinishesInBoundedCycles) {
    const auto s = traces::three_line_script();
    GameSession session(s, "x");
    std::int64_t t = 0;
    session.start(t);
    std::size_t sing_cycles = 1;
    while (session.state().phase != Phase::finished) {
        ASSERT_LE(sing_cycles, s.lines.size() * (s.repeat_limit + 1));
        session.handle(GameEvent::singing_done(session.state().line, t += 1000));
        session.handle(GameEvent::timeout(session.state().line, t += 5000));
        if (session.state().phase == Phase::singing) ++sing_cycles;
    }
    EXPECT_EQ(sing_cycles, s.lines.size() * (s.repeat_limit + 1));
}

TEST(Serialization, LogRoundTripsThroughJson) {
    for (const auto& c : traces::all_cases()) {
        GameSession session(c.script, "json");
        for (const auto& e : c.events) session.handle(e);
        const nlohmann::json j = to_json(session.log());
        const SessionLog back = session_log_from_json(nlohmann::json::parse(j.dump()));
        EXPECT_EQ(back.records, session.log().records) << c.name;
    }
}

TEST(Script, FixtureLoadsAndValidates) {
    const auto s = load_script_file(oracle::fixture_path("rhyme_script.json"));
    EXPECT_EQ(s.lines.size(), 8u);
    EXPECT_EQ(s.repeat_limit, 1u);
    EXPECT_EQ(s.match_streak, 5u);
    EXPECT_EQ(s.lines[0].pose_class, "spin_the_hands");
    EXPECT_EQ(parse_script(script_to_json(s)).lines.size(), 8u);
}

TEST(Script, DefaultsBlockAndValidation) {
    const auto s = parse_script(R"({"title":"t","defaults":{"wait_timeout_ms":4000},
        "lines":[{"pose_class":"a","lyric_text":"x"},{"pose_class":"b","wait_timeout_ms":100}]})");
    EXPECT_EQ(s.lines[0].wait_timeout_ms, 4000);
    EXPECT_EQ(s.lines[1].wait_timeout_ms, 100);
    EXPECT_EQ(s.lines[1].index, 1u);
    const std::vector<std::string> labels{"a"};
    EXPECT_THROW(s.validate(labels), ScriptError);
    EXPECT_THROW(parse_script(R"({"lines":[{"pose_class":"a","sing_duration_ms":0}]})"), ScriptError);
    EXPECT_THROW(parse_script(R"({"lines":[{"pose_class":"a","index":3}]})"), ScriptError);
    EXPECT_THROW(parse_script("nope"), ScriptError);
}
