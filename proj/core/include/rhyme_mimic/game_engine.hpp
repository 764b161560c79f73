#ifndef RHYME_MIMIC_GAME_ENGINE_HPP
#define RHYME_MIMIC_GAME_ENGINE_HPP

#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace rhyme_mimic {

struct RhymeLine {
    std::size_t index = 0;
    std::string lyric_text;
    std::string pose_class;
    std::string audio_ref;
    std::string image_ref;
    std::string gesture_ref;             // defaults to pose_class
    std::int64_t sing_duration_ms = 3000;
    std::int64_t gesture_duration_ms = 0;  // 0: motion peripheral default
    std::int64_t wait_timeout_ms = 10000;
    std::string encourage_text = "Bravo!";
};

struct RhymeScript {
    std::string title;
    std::vector<RhymeLine> lines;
    std::size_t repeat_limit = 1;
    std::size_t match_streak = 5;
    bool mobile_robot = false;     // forwarded to every motion command
    bool announce_lyrics = false;  // also speak the lyric while singing

    /// Throws ScriptError on broken invariants. When `labels` is non-empty,
    /// every line's pose class must be one of them.
    void validate(std::span<const std::string> labels = {}) const;
};

class ScriptError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

RhymeScript parse_script(std::string_view text);
RhymeScript load_script_file(const std::string& path);
std::string script_to_json(const RhymeScript& script);

enum class Phase { idle, singing, waiting_for_imitation, encouraging, finished };
std::string_view to_string(Phase phase) noexcept;

struct GameState {
    Phase phase = Phase::idle;
    std::size_t line = 0;
    std::size_t repeats_used = 0;
    std::size_t streak = 0;
    bool paused = false;
    std::int64_t line_started_ms = 0;
    std::uint64_t next_command_id = 1;
    std::string session_id;
    std::int64_t started_at_ms = 0;

    bool active() const noexcept { return phase != Phase::idle && phase != Phase::finished; }

    friend bool operator==(const GameState&, const GameState&) = default;
};

enum class WozCommand { repeat_line, next_line, mark_success, pause, resume, abort };
std::string_view to_string(WozCommand command) noexcept;
std::optional<WozCommand> parse_woz_command(std::string_view text) noexcept;

struct GameEvent {
    enum class Kind { start, singing_done, pose_observed, timeout, encourage_done, woz };

    Kind kind = Kind::start;
    std::int64_t timestamp_ms = 0;
    std::size_t line = 0;  // singing_done, timeout, encourage_done
    std::string label;     // pose_observed
    double score = 0.0;    // pose_observed
    WozCommand woz = WozCommand::abort;

    static GameEvent start(std::int64_t ts) { return {Kind::start, ts, 0, {}, 0.0, WozCommand::abort}; }
    static GameEvent singing_done(std::size_t line, std::int64_t ts) { return {Kind::singing_done, ts, line, {}, 0.0, WozCommand::abort}; }
    static GameEvent pose_observed(std::string label, double score, std::int64_t ts) {
        return {Kind::pose_observed, ts, 0, std::move(label), score, WozCommand::abort};
    }
    static GameEvent timeout(std::size_t line, std::int64_t ts) { return {Kind::timeout, ts, line, {}, 0.0, WozCommand::abort}; }
    static GameEvent encourage_done(std::size_t line, std::int64_t ts) { return {Kind::encourage_done, ts, line, {}, 0.0, WozCommand::abort}; }
    static GameEvent woz_command(WozCommand cmd, std::int64_t ts) { return {Kind::woz, ts, 0, {}, 0.0, cmd}; }

    friend bool operator==(const GameEvent&, const GameEvent&) = default;
};

std::string_view to_string(GameEvent::Kind kind) noexcept;

enum class PeripheralKind { display, audio, tts, motion };
std::string_view to_string(PeripheralKind kind) noexcept;
std::optional<PeripheralKind> parse_peripheral_kind(std::string_view text) noexcept;

struct PeripheralCommand {
    PeripheralKind kind = PeripheralKind::display;
    std::string ref;  // resource id, or the text for tts
    std::uint64_t command_id = 0;
    std::size_t line = 0;
    std::int64_t duration_ms = 0;  // 0: peripheral default
    bool mobile = false;

    friend bool operator==(const PeripheralCommand&, const PeripheralCommand&) = default;
};

/// Resolution of one line. Latency runs from the line's first presentation.
struct LineOutcome {
    std::size_t line = 0;
    bool imitated = false;
    std::int64_t latency_ms = 0;
    std::size_t repeats_used = 0;
    bool by_woz = false;

    friend bool operator==(const LineOutcome&, const LineOutcome&) = default;
};

struct LogRecord {
    std::int64_t timestamp_ms = 0;
    GameState before;
    GameEvent event;
    GameState after;
    std::vector<PeripheralCommand> commands;
    bool applied = true;  // false: event was illegal in `before` and ignored
    std::string note;
    std::optional<LineOutcome> outcome;

    friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

struct StepResult {
    GameState state;
    std::vector<PeripheralCommand> commands;
    LogRecord record;
};

/// The whole transition table. Total: illegal events come back unapplied with
/// the state unchanged.
StepResult step(const GameState& state, const GameEvent& event, const RhymeScript& script);

struct SessionLog {
    std::string session_id;
    std::string script_title;
    std::vector<LogRecord> records;

    const GameState* final_state() const { return records.empty() ? nullptr : &records.back().after; }
};

class SessionError : public std::runtime_error {
public:
    enum class Kind { session_active, incomplete_session };

    SessionError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// A live session: state plus its append-only log.
class GameSession {
public:
    GameSession(RhymeScript script, std::string session_id);

    /// Throws SessionError(session_active) unless the session is still idle.
    std::vector<PeripheralCommand> start(std::int64_t timestamp_ms);
    std::vector<PeripheralCommand> handle(const GameEvent& event);

    const GameState& state() const noexcept { return state_; }
    const SessionLog& log() const noexcept { return log_; }
    const RhymeScript& script() const noexcept { return script_; }

private:
    RhymeScript script_;
    GameState state_;
    SessionLog log_;
};

struct ReplayResult {
    std::vector<GameState> states;  // state after every record
    std::vector<PeripheralCommand> commands;
};

/// Re-runs the logged events from a fresh idle state.
ReplayResult replay(const SessionLog& log, const RhymeScript& script);

struct SessionSummary {
    std::size_t total_lines = 0;
    std::size_t lines_attempted = 0;
    std::size_t lines_imitated = 0;
    double mean_latency_ms = 0.0;  // over imitated lines; 0 when none
    std::vector<LineOutcome> outcomes;  // last outcome per resolved line, by line index
    std::size_t woz_interventions = 0;
    bool aborted = false;
};

/// Throws SessionError(incomplete_session) unless the log ends Finished.
SessionSummary session_summary(const SessionLog& log, std::size_t total_lines);

nlohmann::json to_json(const GameState& state);
nlohmann::json to_json(const GameEvent& event);
nlohmann::json to_json(const PeripheralCommand& command);
nlohmann::json to_json(const LogRecord& record);
nlohmann::json to_json(const SessionLog& log);
nlohmann::json to_json(const SessionSummary& summary);
GameState game_state_from_json(const nlohmann::json& j);
GameEvent game_event_from_json(const nlohmann::json& j);
PeripheralCommand peripheral_command_from_json(const nlohmann::json& j);
SessionLog session_log_from_json(const nlohmann::json& j);

}  // namespace rhyme_mimic

#endif  // RHYME_MIMIC_GAME_ENGINE_HPP
