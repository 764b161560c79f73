#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "rhyme_mimic/config.hpp"
#include "rhyme_mimic/dataset.hpp"
#include "rhyme_mimic/peripherals.hpp"
#include "rhyme_mimic/runtime.hpp"
#include "rhyme_mimic/synthetic.hpp"

using namespace rhyme_mimic;
namespace fs = std::filesystem;

namespace {

struct Cli {
    fs::path dir;

    Cli() {
        dir = fs::temp_directory_path() / ("rhyme_mimic_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~Cli() {
        std::error_code ignored;
        fs::remove_all(dir, ignored);
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    /// Runs the tool with stdout sent to `out` (relative to dir) and returns the exit status.
    int run(const std::string& args, const std::string& out = "stdout.txt") const {
        const std::string cmd = std::string("env -u ") + config_env_var + " " + RHYME_MIMIC_CLI + " " + args + " > " +
                                path(out) + " 2> " + path("stderr.txt");
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }

    std::string read(const std::string& name) const { return oracle::read_file(path(name)); }
};

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
    Cli cli;
    EXPECT_EQ(cli.run(""), 2);
    EXPECT_EQ(cli.run("frobnicate"), 2);
    EXPECT_EQ(cli.run("train --dataset " + cli.path("missing.jsonl") + " --model " + cli.path("m.json")), 2);
    EXPECT_EQ(cli.run("classify --model " + cli.path("missing.json") + " --stream x"), 2);
    EXPECT_EQ(cli.run("train --covariance spherical"), 2);
    EXPECT_EQ(cli.run("--help"), 0);
}

TEST(Cli, SameSeedSameModelBytes) {
    Cli cli;
    ASSERT_EQ(cli.run("gen-synthetic --seed 4 --dataset " + cli.path("d.jsonl")), 0);
    ASSERT_EQ(cli.run("train --seed 4 --dataset " + cli.path("d.jsonl") + " --model " + cli.path("a.json")), 0);
    ASSERT_EQ(cli.run("train --seed 4 --dataset " + cli.path("d.jsonl") + " --model " + cli.path("b.json")), 0);
    EXPECT_EQ(cli.read("a.json"), cli.read("b.json"));
    const auto report = nlohmann::json::parse(cli.read("stdout.txt"));
    EXPECT_EQ(report["schema"], "rhyme_mimic.train_report");
    EXPECT_EQ(report["version"], 1);

    const auto data = read_dataset_file(cli.path("d.jsonl")).dataset;
    TrainingConfig tc;
    tc.rng_seed = 4;
    EXPECT_EQ(cli.read("a.json"), save_model(train(data, tc)));
}

TEST(Cli, EvalReportMatchesLibrary) {
    Cli cli;
    ASSERT_EQ(cli.run("gen-synthetic --seed 2 --dataset " + cli.path("d.jsonl")), 0);
    ASSERT_EQ(cli.run("eval --seed 2 --split 0.6667 --json --dataset " + cli.path("d.jsonl")), 0);
    const auto report = nlohmann::json::parse(cli.read("stdout.txt"));
    const auto data = read_dataset_file(cli.path("d.jsonl")).dataset;
    auto [tr, te] = split(data, 0.6667, 2);
    TrainingConfig tc;
    tc.rng_seed = 2;
    const auto expected = evaluate(train(tr, tc), te);
    EXPECT_DOUBLE_EQ(report["accuracy"].get<double>(), expected.accuracy);
    EXPECT_EQ(report["test"]["correct"].get<std::size_t>(), expected.correct);
}

TEST(Cli, ClassifyMatchesDirectPipeline) {
    Cli cli;
    const auto model = train(generate_dataset({}), {});
    save_model_file(model, cli.path("m.json"));
    const auto stream = oracle::fixture_path("session_stream.jsonl");
    ASSERT_EQ(cli.run("classify --model " + cli.path("m.json") + " --stream " + stream), 0);
    std::vector<std::string> expected;
    for (const auto& f : read_stream_file(stream)) {
        const auto r = classify_frame(f.people, model, {});
        if (r.outcome == FrameClassification::Outcome::classified) expected.push_back(r.label);
    }
    std::vector<std::string> got;
    std::istringstream lines(cli.read("stdout.txt"));
    for (std::string line; std::getline(lines, line);) got.push_back(nlohmann::json::parse(line)["label"]);
    EXPECT_EQ(got, expected);
}

TEST(Cli, PlaySummaryMatchesLibrary) {
    Cli cli;
    const auto model = train(generate_dataset({}), {});
    save_model_file(model, cli.path("m.json"));
    const auto script = oracle::fixture_path("rhyme_script.json");
    const auto stream = oracle::fixture_path("session_stream.jsonl");
    ASSERT_EQ(cli.run("play --clock virtual --model " + cli.path("m.json") + " --script " + script + " --stream " +
                      stream + " --log " + cli.path("log.json")),
              0);
    const auto report = nlohmann::json::parse(cli.read("stdout.txt"));
    EXPECT_EQ(report["schema"], "rhyme_mimic.session_summary");

    RuntimeOptions o;
    o.game.session_id = "session-0";  // the tool names sessions after the seed
    GameRuntime rt(model, load_script_file(script), read_stream_file(stream), o);
    rt.start();
    rt.run_until_finished();
    const auto expected = session_summary(rt.game().session().log(), 8);
    EXPECT_EQ(report["summary"], to_json(expected));

    const auto log = nlohmann::json::parse(cli.read("log.json"))["log"];
    EXPECT_EQ(log, to_json(rt.game().session().log()));
    EXPECT_TRUE(session_log_from_json(log).records == rt.game().session().log().records);
}

TEST(Cli, ConfigFileFromEnvironment) {
    Cli cli;
    ASSERT_EQ(cli.run("gen-synthetic --seed 3 --dataset " + cli.path("d.jsonl")), 0);
    std::ofstream(cli.path("cfg.json")) << nlohmann::json{{"dataset", cli.path("d.jsonl")}, {"seed", 3}}.dump();
    const std::string cmd = std::string(config_env_var) + "=" + cli.path("cfg.json") + " " + RHYME_MIMIC_CLI +
                            " eval --split 0.5 --json > " + cli.path("out.json");
    ASSERT_EQ(std::system(cmd.c_str()), 0);
    EXPECT_EQ(nlohmann::json::parse(cli.read("out.json"))["seed"], 3);
    std::ofstream(cli.path("bad.json")) << R"({"sede": 3})";
    const std::string bad = std::string(config_env_var) + "=" + cli.path("bad.json") + " " + RHYME_MIMIC_CLI +
                            " eval --split 0.5 2>/dev/null >/dev/null";
    const int status = std::system(bad.c_str());
    EXPECT_EQ(WEXITSTATUS(status), 2);
}
