// rhyme_mimic: train, evaluate, generate data, classify streams, play and serve sessions.
#include <csignal>
#include <filesystem>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "rhyme_mimic/config.hpp"
#include "rhyme_mimic/dataset.hpp"
#include "rhyme_mimic/gmm.hpp"
#include "rhyme_mimic/runtime.hpp"
#include "rhyme_mimic/synthetic.hpp"

namespace rm = rhyme_mimic;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_domain = 1;
constexpr int exit_usage = 2;

constexpr int report_version = 1;

// Usage or I/O problem detected by the tool itself.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json report_header(std::string_view schema) {
    return json{{"schema", std::string("rhyme_mimic.") + std::string(schema)}, {"version", report_version}};
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write " + path);
    out << text;
    if (!out) throw UsageError("write failed: " + path);
}

void emit_report(const json& report, const std::string& path) {
    const std::string text = report.dump(2) + "\n";
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text_file(path, text);
    }
}

void require(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

void require_file(const std::string& path, const char* flag) {
    require(path, flag);
    if (!std::filesystem::is_regular_file(path)) throw UsageError(std::string(flag) + ": no such file " + path);
}

json evaluation_json(const rm::EvaluationReport& r) {
    json per_class = json::array();
    for (std::size_t i = 0; i < r.labels.size(); ++i) {
        per_class.push_back({{"label", r.labels[i]}, {"support", r.support[i]}, {"recall", r.per_class_recall[i]}});
    }
    return json{{"total", r.total},
                {"correct", r.correct},
                {"accuracy", r.accuracy},
                {"per_class", per_class},
                {"confusion", r.confusion}};
}

void print_evaluation(std::ostream& os, const std::string& name, const rm::EvaluationReport& r) {
    os << name << ": accuracy " << r.accuracy * 100.0 << "% (" << r.correct << "/" << r.total << ")\n";
}

rm::LabeledDataset load_dataset(const rm::RunConfig& config) {
    require_file(config.dataset_path, "--dataset");
    rm::DatasetLoadOptions options;
    options.threshold = config.threshold;
    const auto result = rm::read_dataset_file(config.dataset_path, options);
    if (result.skipped_rejected + result.skipped_degenerate > 0) {
        std::cerr << "dataset: skipped " << result.skipped_rejected << " low-confidence and "
                  << result.skipped_degenerate << " degenerate records\n";
    }
    return result.dataset;
}

// Options shared by training-like commands.
struct TrainFlags {
    std::size_t components = 1;
    std::string covariance = "diag";
    std::size_t max_iterations = 200;

    rm::TrainingConfig to_config(std::uint64_t seed) const {
        rm::TrainingConfig c;
        c.components_per_class = components;
        c.covariance_kind = rm::parse_covariance_kind(covariance);
        c.max_iterations = max_iterations;
        c.rng_seed = seed;
        return c;
    }
};

void add_train_flags(CLI::App* cmd, TrainFlags& flags) {
    cmd->add_option("--components", flags.components, "Mixture components per class")->check(CLI::PositiveNumber);
    cmd->add_option("--covariance", flags.covariance, "Covariance kind")->check(CLI::IsMember({"diag", "full"}));
    cmd->add_option("--max-iterations", flags.max_iterations, "EM iteration cap")->check(CLI::PositiveNumber);
}

json training_json(const rm::TrainingReport& report, const rm::TrainingConfig& config) {
    json classes = json::array();
    for (std::size_t i = 0; i < report.labels.size(); ++i) {
        const auto& t = report.traces[i];
        classes.push_back({{"label", report.labels[i]},
                           {"iterations", t.iterations},
                           {"converged", t.converged},
                           {"log_likelihood", t.log_likelihood}});
    }
    return json{{"components_per_class", config.components_per_class},
                {"covariance_kind", std::string(rm::to_string(config.covariance_kind))},
                {"seed", config.rng_seed},
                {"classes", classes}};
}

std::vector<bool> parse_truth(const std::string& text) {
    std::vector<bool> out;
    for (char ch : text) {
        if (ch == '1' || ch == 'y') out.push_back(true);
        else if (ch == '0' || ch == 'n') out.push_back(false);
        else if (ch != ',' && ch != ' ') throw UsageError("--imitated expects a list of 1/0 flags");
    }
    return out;
}

rm::GameRuntime* g_runtime = nullptr;

extern "C" void on_interrupt(int) {
    if (g_runtime != nullptr) g_runtime->request_abort();
}

struct SessionFlags {
    std::string log_path;
    std::string summary_path;
};

rm::RuntimeOptions runtime_options(const rm::RunConfig& config) {
    rm::RuntimeOptions o;
    o.clock = config.clock;
    o.latency = config.latency;
    o.threshold = config.threshold;
    o.replay.rate = config.replay_rate;
    o.replay.loop = config.replay_loop;
    o.game.state_publish_interval_ms = config.state_publish_interval_ms;
    o.game.session_id = "session-" + std::to_string(config.seed);
    return o;
}

int run_session(const rm::RunConfig& config, rm::RuntimeOptions options, const SessionFlags& flags) {
    require_file(config.model_path, "--model");
    require_file(config.script_path, "--script");
    rm::GmmClassifier model = rm::load_model_file(config.model_path);
    if (config.rejection_log_density) model.rejection_log_density = config.rejection_log_density;
    rm::RhymeScript script = rm::load_script_file(config.script_path);
    std::vector<std::string> labels;
    for (const auto& c : model.classes) labels.push_back(c.label);
    script.validate(labels);
    std::vector<rm::StreamFrame> frames;
    if (!config.stream_path.empty()) {
        require_file(config.stream_path, "--stream");
        frames = rm::read_stream_file(config.stream_path);
    }

    const std::size_t total_lines = script.lines.size();
    rm::GameRuntime runtime(std::move(model), std::move(script), std::move(frames), std::move(options));
    if (runtime.tcp_server() != nullptr) {
        std::cerr << "bus listening on 127.0.0.1:" << runtime.tcp_server()->port() << "\n";
    }
    if (runtime.bridge() != nullptr) {
        std::cerr << "console bridge listening on 127.0.0.1:" << runtime.bridge()->port() << "\n";
    }

    g_runtime = &runtime;
    std::signal(SIGINT, on_interrupt);
    std::signal(SIGTERM, on_interrupt);
    runtime.start();
    runtime.run_until_finished();
    std::signal(SIGINT, SIG_DFL);
    std::signal(SIGTERM, SIG_DFL);
    g_runtime = nullptr;

    const rm::SessionLog& log = runtime.game().session().log();
    json log_doc = report_header("session_log");
    log_doc["seed"] = config.seed;
    log_doc["clock"] = std::string(rm::to_string(config.clock));
    log_doc["log"] = rm::to_json(log);
    if (!flags.log_path.empty()) write_text_file(flags.log_path, log_doc.dump(2) + "\n");

    if (!runtime.game().finished()) {
        std::cerr << "session stopped before finishing\n";
        return exit_domain;
    }
    const rm::SessionSummary summary = rm::session_summary(log, total_lines);
    json report = report_header("session_summary");
    report["seed"] = config.seed;
    report["summary"] = rm::to_json(summary);
    const auto& ps = runtime.pose().stats();
    report["pose"] = {{"frames", ps.frames}, {"classified", ps.classified}, {"skipped", ps.skipped()}};
    emit_report(report, flags.summary_path);
    return exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Nursery-rhyme imitation game: pose classifier training and session runtime"};
    app.require_subcommand(1);

    rm::RunConfig config;
    try {
        config = rm::config_from_environment();
    } catch (const rm::ConfigError& e) {
        std::cerr << "config: " << e.what() << "\n";
        return exit_usage;
    }

    // Flag targets; applied over the config only when given.
    std::string model, script, stream, dataset, bus_addr, ws_addr, clock;
    std::uint64_t seed = 0;
    double threshold = 0.5;
    auto common = [&](CLI::App* cmd, std::initializer_list<const char*> which) {
        std::vector<CLI::Option*> opts;
        for (std::string_view w : which) {
            if (w == "model") opts.push_back(cmd->add_option("--model", model, "Model file"));
            if (w == "script") opts.push_back(cmd->add_option("--script", script, "Rhyme script file"));
            if (w == "stream") opts.push_back(cmd->add_option("--stream", stream, "Keypoint stream file"));
            if (w == "dataset") opts.push_back(cmd->add_option("--dataset", dataset, "Dataset file"));
            if (w == "seed") opts.push_back(cmd->add_option("--seed", seed, "RNG seed"));
            if (w == "clock") {
                opts.push_back(cmd->add_option("--clock", clock, "Clock mode")->check(CLI::IsMember({"real", "virtual"})));
            }
            if (w == "bus") opts.push_back(cmd->add_option("--bus-addr", bus_addr, "Bus TCP address host:port"));
            if (w == "ws") opts.push_back(cmd->add_option("--ws-addr", ws_addr, "Console websocket address host:port"));
            if (w == "threshold") {
                opts.push_back(cmd->add_option("--threshold", threshold, "Joint confidence threshold")
                                   ->check(CLI::Range(0.0, 1.0)));
            }
        }
        return opts;
    };
    auto given = [&](CLI::App* cmd, const char* name) {
        try {
            return cmd->get_option(name)->count() > 0;
        } catch (const CLI::OptionNotFound&) {
            return false;
        }
    };
    auto apply_flags = [&](CLI::App* cmd) {
        if (given(cmd, "--model")) config.model_path = model;
        if (given(cmd, "--script")) config.script_path = script;
        if (given(cmd, "--stream")) config.stream_path = stream;
        if (given(cmd, "--dataset")) config.dataset_path = dataset;
        if (given(cmd, "--seed")) config.seed = seed;
        if (given(cmd, "--clock")) config.clock = rm::parse_clock_mode(clock);
        if (given(cmd, "--bus-addr")) config.bus_address = bus_addr;
        if (given(cmd, "--ws-addr")) config.ws_address = ws_addr;
        if (given(cmd, "--threshold")) config.threshold = rm::ConfidenceThreshold(threshold);
    };

    // train
    auto* train_cmd = app.add_subcommand("train", "Fit one Gaussian mixture per class");
    common(train_cmd, {"dataset", "model", "seed", "threshold"});
    TrainFlags train_flags;
    add_train_flags(train_cmd, train_flags);
    std::string train_report;
    train_cmd->add_option("--report", train_report, "Training report path (default stdout)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Report accuracy; with --split, train and test side by side");
    common(eval_cmd, {"dataset", "model", "seed", "threshold"});
    TrainFlags eval_flags;
    add_train_flags(eval_cmd, eval_flags);
    double split_fraction = 0.0;
    eval_cmd->add_option("--split", split_fraction, "Stratified train fraction, e.g. 0.6667")
        ->check(CLI::Range(0.0, 1.0));
    std::string eval_report;
    bool eval_json = false;
    eval_cmd->add_option("--report", eval_report, "Write the JSON report here");
    eval_cmd->add_flag("--json", eval_json, "Print the JSON report instead of text");

    // gen-synthetic
    auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a synthetic pose dataset and/or session stream");
    common(gen_cmd, {"dataset", "seed"});
    rm::SyntheticDatasetConfig gen;
    bool gen_raw = false;
    std::string gen_stream, gen_script, gen_truth;
    gen_cmd->add_option("--classes", gen.classes, "Number of classes (max 8)")->check(CLI::Range(1, 8));
    gen_cmd->add_option("--per-class", gen.per_class, "Samples per class")->check(CLI::PositiveNumber);
    gen_cmd->add_option("--spread", gen.spread_px, "Joint jitter in pixels")->check(CLI::NonNegativeNumber);
    gen_cmd->add_flag("--raw", gen_raw, "Write raw joints instead of features");
    gen_cmd->add_option("--stream-out", gen_stream, "Also write a session stream for the default script");
    gen_cmd->add_option("--script-out", gen_script, "Also write the default eight-line script");
    gen_cmd->add_option("--imitated", gen_truth, "Per-line ground truth for --stream-out, e.g. 1,1,0,1,1,1,0,1");

    // classify
    auto* classify_cmd = app.add_subcommand("classify", "Label every frame of a keypoint stream");
    common(classify_cmd, {"model", "stream", "threshold"});
    std::string classify_out;
    classify_cmd->add_option("--out", classify_out, "Label stream path (default stdout)");

    // play
    auto* play_cmd = app.add_subcommand("play", "Run one session against a recorded stream");
    common(play_cmd, {"model", "script", "stream", "seed", "clock", "bus", "threshold"});
    SessionFlags play_flags;
    play_cmd->add_option("--log", play_flags.log_path, "Session log path");
    play_cmd->add_option("--summary", play_flags.summary_path, "Summary path (default stdout)");
    bool play_listen = false;
    play_cmd->add_flag("--listen", play_listen, "Accept remote camera nodes on --bus-addr");

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "Host the node graph, TCP bus and console bridge");
    common(serve_cmd, {"model", "script", "stream", "seed", "clock", "bus", "ws", "threshold"});
    SessionFlags serve_flags;
    serve_cmd->add_option("--log", serve_flags.log_path, "Session log path");
    serve_cmd->add_option("--summary", serve_flags.summary_path, "Summary path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_usage;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        apply_flags(cmd);

        if (cmd == train_cmd) {
            const rm::LabeledDataset data = load_dataset(config);
            require(config.model_path, "--model");
            const rm::TrainingConfig tc = train_flags.to_config(config.seed);
            rm::TrainingReport report;
            rm::GmmClassifier classifier = rm::train(data, tc, &report);
            classifier.rejection_log_density = config.rejection_log_density;
            rm::save_model_file(classifier, config.model_path);
            json out = report_header("train_report");
            out["model"] = config.model_path;
            out["samples"] = data.records.size();
            out["training"] = training_json(report, tc);
            out["train_accuracy"] = rm::evaluate(classifier, data).accuracy;
            emit_report(out, train_report);
            return exit_ok;
        }

        if (cmd == eval_cmd) {
            const rm::LabeledDataset data = load_dataset(config);
            json out = report_header("eval_report");
            out["seed"] = config.seed;
            std::ostringstream text;
            if (split_fraction > 0.0) {
                auto [train_set, test_set] = rm::split(data, split_fraction, config.seed);
                rm::GmmClassifier classifier;
                if (config.model_path.empty()) {
                    const rm::TrainingConfig tc = eval_flags.to_config(config.seed);
                    classifier = rm::train(train_set, tc);
                    out["training"] = {{"components_per_class", tc.components_per_class},
                                       {"covariance_kind", std::string(rm::to_string(tc.covariance_kind))}};
                } else {
                    require_file(config.model_path, "--model");
                    classifier = rm::load_model_file(config.model_path);
                }
                const auto train_eval = rm::evaluate(classifier, train_set);
                const auto test_eval = rm::evaluate(classifier, test_set);
                out["split"] = split_fraction;
                out["train"] = evaluation_json(train_eval);
                out["test"] = evaluation_json(test_eval);
                out["accuracy"] = test_eval.accuracy;
                print_evaluation(text, "train", train_eval);
                print_evaluation(text, "test ", test_eval);
            } else {
                require_file(config.model_path, "--model (or --split to train in place)");
                const rm::GmmClassifier classifier = rm::load_model_file(config.model_path);
                const auto result = rm::evaluate(classifier, data);
                out["all"] = evaluation_json(result);
                out["accuracy"] = result.accuracy;
                print_evaluation(text, "all", result);
            }
            if (!eval_report.empty()) emit_report(out, eval_report);
            if (eval_json) {
                emit_report(out, "-");
            } else {
                std::cout << text.str();
            }
            return exit_ok;
        }

        if (cmd == gen_cmd) {
            gen.seed = config.seed;
            if (config.dataset_path.empty() && gen_stream.empty() && gen_script.empty()) {
                throw UsageError("nothing to do: give --dataset, --stream-out or --script-out");
            }
            if (!config.dataset_path.empty()) {
                if (gen_raw) {
                    std::ofstream out(config.dataset_path);
                    if (!out) throw UsageError("cannot write " + config.dataset_path);
                    for (const auto& [label, frame] : rm::generate_raw_samples(gen)) {
                        json joints = json::array();
                        for (const auto& kp : frame.joints) joints.push_back({kp.x, kp.y, kp.confidence});
                        out << json{{"label", label}, {"joints", joints}}.dump() << "\n";
                    }
                } else {
                    rm::write_dataset_file(config.dataset_path, rm::generate_dataset(gen));
                }
            }
            const rm::RhymeScript script = rm::default_rhyme_script();
            if (!gen_script.empty()) write_text_file(gen_script, rm::script_to_json(script) + "\n");
            if (!gen_stream.empty()) {
                rm::SessionStreamConfig sc;
                sc.seed = config.seed;
                sc.imitated = gen_truth.empty() ? std::vector<bool>(script.lines.size(), true) : parse_truth(gen_truth);
                if (sc.imitated.size() != script.lines.size()) {
                    throw UsageError("--imitated needs " + std::to_string(script.lines.size()) + " flags");
                }
                const rm::SessionStream s = rm::generate_session_stream(script, config.latency, sc);
                std::ofstream out(gen_stream);
                if (!out) throw UsageError("cannot write " + gen_stream);
                rm::write_stream(out, s.frames);
            }
            return exit_ok;
        }

        if (cmd == classify_cmd) {
            require_file(config.model_path, "--model");
            require_file(config.stream_path, "--stream");
            rm::GmmClassifier classifier = rm::load_model_file(config.model_path);
            if (config.rejection_log_density) classifier.rejection_log_density = config.rejection_log_density;
            const auto frames = rm::read_stream_file(config.stream_path);
            std::ofstream file;
            if (!classify_out.empty()) {
                file.open(classify_out);
                if (!file) throw UsageError("cannot write " + classify_out);
            }
            std::ostream& out = classify_out.empty() ? std::cout : file;
            rm::PoseNodeStats stats;
            for (const auto& frame : frames) {
                ++stats.frames;
                const auto r = rm::classify_frame(frame.people, classifier, config.threshold);
                using O = rm::FrameClassification::Outcome;
                switch (r.outcome) {
                case O::classified:
                    ++stats.classified;
                    out << json{{"timestamp_ms", frame.timestamp_ms},
                                {"label", r.label},
                                {"class_index", r.class_index},
                                {"score", r.score}}
                               .dump()
                        << "\n";
                    break;
                case O::no_person: ++stats.no_person; break;
                case O::rejected_confidence: ++stats.rejected_confidence; break;
                case O::degenerate: ++stats.degenerate; break;
                case O::rejected_density: ++stats.rejected_density; break;
                }
            }
            json summary = report_header("classify_summary");
            summary["frames"] = stats.frames;
            summary["classified"] = stats.classified;
            summary["skipped"] = {{"no_person", stats.no_person},
                                  {"low_confidence", stats.rejected_confidence},
                                  {"degenerate", stats.degenerate},
                                  {"rejected", stats.rejected_density}};
            std::cerr << summary.dump() << "\n";
            return exit_ok;
        }

        if (cmd == play_cmd) {
            rm::RuntimeOptions options = runtime_options(config);
            if (play_listen) options.bus_endpoint = rm::Endpoint::parse(config.bus_address);
            else if (config.stream_path.empty()) throw UsageError("--stream is required (or --listen for a live source)");
            return run_session(config, std::move(options), play_flags);
        }

        if (cmd == serve_cmd) {
            rm::RuntimeOptions options = runtime_options(config);
            options.bus_endpoint = rm::Endpoint::parse(config.bus_address);
            options.ws_endpoint = rm::Endpoint::parse(config.ws_address);
            return run_session(config, std::move(options), serve_flags);
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const rm::ConfigError& e) {
        std::cerr << "config: " << e.what() << "\n";
        return exit_usage;
    } catch (const rm::DatasetError& e) {
        std::cerr << "dataset: " << e.what() << "\n";
        return exit_usage;
    } catch (const rm::IngestError& e) {
        std::cerr << "stream: " << e.what() << "\n";
        return exit_usage;
    } catch (const rm::ScriptError& e) {
        std::cerr << "script: " << e.what() << "\n";
        return exit_usage;
    } catch (const rm::GmmError& e) {
        // A model that fails to load is an input problem; a fit that fails is a domain failure.
        const bool io = e.kind() == rm::GmmError::Kind::corrupt_model || e.kind() == rm::GmmError::Kind::version_mismatch;
        std::cerr << "model: " << e.what() << "\n";
        return io ? exit_usage : exit_domain;
    } catch (const rm::BusError& e) {
        std::cerr << "bus: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_domain;
    }
    return exit_usage;
}
