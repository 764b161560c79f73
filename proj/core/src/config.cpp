#include "rhyme_mimic/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace rhyme_mimic {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config field '") + key + "' has the wrong type");
    }
}

}  // namespace

RunConfig merge_config(RunConfig c, const json& j) {
    if (!j.is_object()) throw ConfigError("config must be an object");
    for (const auto& [key, value] : j.items()) {
        const char* k = key.c_str();
        if (key == "model") c.model_path = field<std::string>(j, k);
        else if (key == "script") c.script_path = field<std::string>(j, k);
        else if (key == "stream") c.stream_path = field<std::string>(j, k);
        else if (key == "dataset") c.dataset_path = field<std::string>(j, k);
        else if (key == "bus_addr") c.bus_address = field<std::string>(j, k);
        else if (key == "ws_addr") c.ws_address = field<std::string>(j, k);
        else if (key == "confidence_threshold") {
            try {
                c.threshold = ConfidenceThreshold(field<double>(j, k));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        } else if (key == "rejection_log_density") {
            if (value.is_null()) c.rejection_log_density.reset();
            else c.rejection_log_density = field<double>(j, k);
        } else if (key == "seed") c.seed = field<std::uint64_t>(j, k);
        else if (key == "clock") {
            try {
                c.clock = parse_clock_mode(field<std::string>(j, k));
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        } else if (key == "replay_rate") c.replay_rate = field<double>(j, k);
        else if (key == "replay_loop") c.replay_loop = field<bool>(j, k);
        else if (key == "state_publish_interval_ms") c.state_publish_interval_ms = field<std::int64_t>(j, k);
        else if (key == "latency_ms") {
            if (!value.is_object()) throw ConfigError("latency_ms must be an object");
            for (const auto& [kind, ms] : value.items()) {
                if (!ms.is_number_integer() || ms.get<std::int64_t>() < 0) {
                    throw ConfigError("latency_ms." + kind + " must be a nonnegative integer");
                }
                const auto v = ms.get<std::int64_t>();
                if (kind == "display") c.latency.display_ms = v;
                else if (kind == "tts") c.latency.tts_ms = v;
                else if (kind == "motion") c.latency.motion_default_ms = v;
                else if (kind == "audio") c.latency.audio_default_ms = v;
                else throw ConfigError("unknown latency kind '" + kind + "'");
            }
        } else {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    if (!(c.replay_rate >= 0.0)) throw ConfigError("replay_rate must be >= 0");
    if (c.state_publish_interval_ms < 0) throw ConfigError("state_publish_interval_ms must be >= 0");
    return c;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    json j;
    try {
        j = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path + ": " + e.what());
    }
    return merge_config(std::move(base), j);
}

RunConfig config_from_environment() {
    const char* path = std::getenv(config_env_var);
    if (path == nullptr || *path == '\0') return {};
    return load_config_file(path);
}

json to_json(const RunConfig& c) {
    return json{
        {"model", c.model_path},
        {"script", c.script_path},
        {"stream", c.stream_path},
        {"dataset", c.dataset_path},
        {"bus_addr", c.bus_address},
        {"ws_addr", c.ws_address},
        {"confidence_threshold", c.threshold.value()},
        {"rejection_log_density", c.rejection_log_density ? json(*c.rejection_log_density) : json(nullptr)},
        {"seed", c.seed},
        {"clock", std::string(to_string(c.clock))},
        {"replay_rate", c.replay_rate},
        {"replay_loop", c.replay_loop},
        {"state_publish_interval_ms", c.state_publish_interval_ms},
        {"latency_ms",
         {{"display", c.latency.display_ms},
          {"tts", c.latency.tts_ms},
          {"motion", c.latency.motion_default_ms},
          {"audio", c.latency.audio_default_ms}}},
    };
}

}  // namespace rhyme_mimic
