#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "rhyme_mimic/config.hpp"

using namespace rhyme_mimic;

namespace {

std::string write_temp(const std::string& name, const std::string& text) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream(path) << text;
    return path.string();
}

}  // namespace

TEST(Config, DefaultsThenFileOverlay) {
    const RunConfig d;
    EXPECT_EQ(d.clock, ClockMode::real);
    EXPECT_DOUBLE_EQ(d.threshold.value(), 0.5);
    const auto c = merge_config(d, nlohmann::json::parse(R"({
        "model": "m.json", "confidence_threshold": 0.3, "clock": "virtual", "seed": 12,
        "latency_ms": {"tts": 900}, "rejection_log_density": -50.0, "replay_loop": true})"));
    EXPECT_EQ(c.model_path, "m.json");
    EXPECT_DOUBLE_EQ(c.threshold.value(), 0.3);
    EXPECT_EQ(c.clock, ClockMode::virtual_time);
    EXPECT_EQ(c.seed, 12u);
    EXPECT_EQ(c.latency.tts_ms, 900);
    EXPECT_EQ(c.latency.display_ms, LatencyModel{}.display_ms);
    EXPECT_EQ(c.rejection_log_density, -50.0);
    EXPECT_TRUE(c.replay_loop);
    EXPECT_EQ(c.script_path, "");
}

TEST(Config, LaterLayersWin) {
    auto c = merge_config({}, {{"seed", 1}, {"stream", "a"}});
    c = merge_config(c, {{"seed", 2}});
    EXPECT_EQ(c.seed, 2u);
    EXPECT_EQ(c.stream_path, "a");
}

TEST(Config, RejectsUnknownAndIllTyped) {
    for (const char* bad : {R"({"modle": "x"})", R"({"seed": "one"})", R"({"confidence_threshold": 1.5})",
                            R"({"clock": "sundial"})", R"({"latency_ms": {"smell": 3}})",
                            R"({"latency_ms": {"tts": -1}})", R"({"replay_rate": -2})", "[]"}) {
        EXPECT_THROW(merge_config({}, nlohmann::json::parse(bad)), ConfigError) << bad;
    }
}

TEST(Config, FileAndEnvironment) {
    const auto path = write_temp("rhyme_mimic_config_test.json", R"({"dataset":"d.jsonl","bus_addr":"127.0.0.1:9100"})");
    EXPECT_EQ(load_config_file(path).dataset_path, "d.jsonl");
    ::setenv(config_env_var, path.c_str(), 1);
    const auto c = config_from_environment();
    ::unsetenv(config_env_var);
    EXPECT_EQ(c.bus_address, "127.0.0.1:9100");
    EXPECT_EQ(config_from_environment().bus_address, RunConfig{}.bus_address);
    EXPECT_THROW(load_config_file("/nonexistent/cfg.json"), ConfigError);
    EXPECT_THROW(load_config_file(write_temp("rhyme_mimic_bad_config.json", "{oops")), ConfigError);
}

TEST(Config, JsonRoundTrip) {
    const auto c = merge_config({}, {{"seed", 5}, {"clock", "virtual"}, {"latency_ms", {{"motion", 1200}}}});
    const auto back = merge_config({}, to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
}
