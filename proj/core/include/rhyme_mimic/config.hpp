#ifndef RHYME_MIMIC_CONFIG_HPP
#define RHYME_MIMIC_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "rhyme_mimic/event_loop.hpp"
#include "rhyme_mimic/peripherals.hpp"
#include "rhyme_mimic/skeleton.hpp"

namespace rhyme_mimic {

inline constexpr const char* config_env_var = "RHYME_MIMIC_CONFIG";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Settings shared by the command-line tools. Built from defaults, then a
/// config file, then flags, each layer overriding the one before.
struct RunConfig {
    std::string model_path;
    std::string script_path;
    std::string stream_path;
    std::string dataset_path;
    std::string bus_address = "127.0.0.1:7001";
    std::string ws_address = "127.0.0.1:7002";
    ConfidenceThreshold threshold{};
    std::optional<double> rejection_log_density;
    std::uint64_t seed = 0;
    ClockMode clock = ClockMode::real;
    LatencyModel latency{};
    double replay_rate = 1.0;
    bool replay_loop = false;
    std::int64_t state_publish_interval_ms = 1000;
};

/// Overlays the fields present in `j` onto `base`. Unknown keys are errors.
RunConfig merge_config(RunConfig base, const nlohmann::json& j);
RunConfig load_config_file(const std::string& path, RunConfig base = {});
/// Defaults overlaid with the file named by RHYME_MIMIC_CONFIG, if set.
RunConfig config_from_environment();

nlohmann::json to_json(const RunConfig& config);

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_CONFIG_HPP
