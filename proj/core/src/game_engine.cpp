#include "rhyme_mimic/game_engine.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rhyme_mimic {

namespace {

using json = nlohmann::json;

class Transition {
public:
    Transition(const GameState& state, const GameEvent& event, const RhymeScript& script)
        : script_(script), event_(event) {
        result_.state = state;
        result_.record.timestamp_ms = event.timestamp_ms;
        result_.record.before = state;
        result_.record.event = event;
    }

    GameState& state() { return result_.state; }

    void ignore(std::string why) {
        result_.record.applied = false;
        result_.record.note = std::move(why);
    }

    void emit(PeripheralKind kind, std::string ref, std::int64_t duration_ms = 0) {
        auto& s = result_.state;
        const RhymeLine& line = script_.lines[s.line];
        result_.commands.push_back({kind, std::move(ref), s.next_command_id++, line.index, duration_ms,
                                    kind == PeripheralKind::motion && script_.mobile_robot});
    }

    void sing(std::size_t line_index) {
        auto& s = result_.state;
        if (s.phase == Phase::idle || line_index != s.line || s.phase == Phase::finished) {
            s.repeats_used = 0;
            s.line_started_ms = event_.timestamp_ms;
        }
        s.phase = Phase::singing;
        s.line = line_index;
        s.streak = 0;
        const RhymeLine& line = script_.lines[line_index];
        emit(PeripheralKind::display, line.image_ref);
        emit(PeripheralKind::audio, line.audio_ref, line.sing_duration_ms);
        emit(PeripheralKind::motion, line.gesture_ref.empty() ? line.pose_class : line.gesture_ref,
             line.gesture_duration_ms);
        if (script_.announce_lyrics) emit(PeripheralKind::tts, line.lyric_text);
    }

    void encourage() {
        auto& s = result_.state;
        s.phase = Phase::encouraging;
        s.streak = 0;
        emit(PeripheralKind::tts, script_.lines[s.line].encourage_text);
    }

    void advance() {
        auto& s = result_.state;
        if (s.line + 1 < script_.lines.size()) {
            s.repeats_used = 0;
            s.line_started_ms = event_.timestamp_ms;
            s.line += 1;
            sing(s.line);
        } else {
            finish();
        }
    }

    void finish() {
        auto& s = result_.state;
        s.phase = Phase::finished;
        s.streak = 0;
        s.paused = false;
    }

    void resolve(bool imitated, bool by_woz) {
        const auto& s = result_.state;
        result_.record.outcome =
            LineOutcome{s.line, imitated, event_.timestamp_ms - s.line_started_ms, s.repeats_used, by_woz};
    }

    StepResult done() && {
        result_.record.after = result_.state;
        result_.record.commands = result_.commands;
        return std::move(result_);
    }

private:
    const RhymeScript& script_;
    const GameEvent& event_;
    StepResult result_;
};

void on_woz(Transition& t, WozCommand cmd) {
    GameState& s = t.state();
    if (!s.active()) {
        t.ignore("operator command outside an active session");
        return;
    }
    switch (cmd) {
    case WozCommand::repeat_line:
        t.sing(s.line);  // same line: repeat budget untouched
        return;
    case WozCommand::next_line:
        if (s.phase != Phase::encouraging) t.resolve(false, true);
        t.advance();
        return;
    case WozCommand::mark_success:
        if (s.phase == Phase::encouraging) {
            t.ignore("line already marked successful");
            return;
        }
        t.resolve(true, true);
        t.encourage();
        return;
    case WozCommand::pause:
        if (s.paused) {
            t.ignore("already paused");
            return;
        }
        s.paused = true;
        return;
    case WozCommand::resume:
        if (!s.paused) {
            t.ignore("not paused");
            return;
        }
        s.paused = false;
        return;
    case WozCommand::abort:
        t.finish();
        return;
    }
}

}  // namespace

std::string_view to_string(Phase phase) noexcept {
    switch (phase) {
    case Phase::idle: return "Idle";
    case Phase::singing: return "Singing";
    case Phase::waiting_for_imitation: return "WaitingForImitation";
    case Phase::encouraging: return "Encouraging";
    case Phase::finished: return "Finished";
    }
    return "?";
}

std::string_view to_string(WozCommand command) noexcept {
    switch (command) {
    case WozCommand::repeat_line: return "RepeatLine";
    case WozCommand::next_line: return "NextLine";
    case WozCommand::mark_success: return "MarkSuccess";
    case WozCommand::pause: return "Pause";
    case WozCommand::resume: return "Resume";
    case WozCommand::abort: return "Abort";
    }
    return "?";
}

std::optional<WozCommand> parse_woz_command(std::string_view text) noexcept {
    for (auto cmd : {WozCommand::repeat_line, WozCommand::next_line, WozCommand::mark_success, WozCommand::pause,
                     WozCommand::resume, WozCommand::abort}) {
        if (to_string(cmd) == text) return cmd;
    }
    return std::nullopt;
}

std::string_view to_string(GameEvent::Kind kind) noexcept {
    switch (kind) {
    case GameEvent::Kind::start: return "Start";
    case GameEvent::Kind::singing_done: return "SingingDone";
    case GameEvent::Kind::pose_observed: return "PoseObserved";
    case GameEvent::Kind::timeout: return "Timeout";
    case GameEvent::Kind::encourage_done: return "EncourageDone";
    case GameEvent::Kind::woz: return "Woz";
    }
    return "?";
}

std::string_view to_string(PeripheralKind kind) noexcept {
    switch (kind) {
    case PeripheralKind::display: return "display";
    case PeripheralKind::audio: return "audio";
    case PeripheralKind::tts: return "tts";
    case PeripheralKind::motion: return "motion";
    }
    return "?";
}

std::optional<PeripheralKind> parse_peripheral_kind(std::string_view text) noexcept {
    for (auto k : {PeripheralKind::display, PeripheralKind::audio, PeripheralKind::tts, PeripheralKind::motion}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

void RhymeScript::validate(std::span<const std::string> labels) const {
    if (match_streak < 1) throw ScriptError("match_streak must be at least 1");
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const RhymeLine& line = lines[i];
        const std::string where = "line " + std::to_string(i) + ": ";
        if (line.index != i) throw ScriptError(where + "indices must be contiguous from 0");
        if (line.sing_duration_ms <= 0 || line.wait_timeout_ms <= 0 || line.gesture_duration_ms < 0) {
            throw ScriptError(where + "durations must be positive");
        }
        if (line.pose_class.empty()) throw ScriptError(where + "missing pose_class");
        if (!labels.empty() && std::find(labels.begin(), labels.end(), line.pose_class) == labels.end()) {
            throw ScriptError(where + "pose class '" + line.pose_class + "' is not a classifier label");
        }
    }
}

RhymeScript parse_script(std::string_view text) {
    const json doc = json::parse(text.begin(), text.end(), nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ScriptError("rhyme script is not a parseable record");
    try {
        RhymeScript script;
        script.title = doc.value("title", std::string{});
        script.repeat_limit = doc.value("repeat_limit", script.repeat_limit);
        script.match_streak = doc.value("match_streak", script.match_streak);
        script.mobile_robot = doc.value("mobile_robot", script.mobile_robot);
        script.announce_lyrics = doc.value("announce_lyrics", script.announce_lyrics);
        const json defaults = doc.value("defaults", json::object());
        std::size_t i = 0;
        for (const auto& l : doc.at("lines")) {
            RhymeLine line;
            auto pick = [&](const char* key, auto fallback) {
                using T = decltype(fallback);
                if (l.contains(key)) return l.at(key).get<T>();
                return defaults.value(key, fallback);
            };
            line.index = l.value("index", i);
            line.lyric_text = pick("lyric_text", std::string{});
            line.pose_class = pick("pose_class", std::string{});
            line.audio_ref = pick("audio_ref", std::string{});
            line.image_ref = pick("image_ref", std::string{});
            line.gesture_ref = pick("gesture_ref", std::string{});
            line.sing_duration_ms = pick("sing_duration_ms", line.sing_duration_ms);
            line.gesture_duration_ms = pick("gesture_duration_ms", line.gesture_duration_ms);
            line.wait_timeout_ms = pick("wait_timeout_ms", line.wait_timeout_ms);
            line.encourage_text = pick("encourage_text", line.encourage_text);
            script.lines.push_back(std::move(line));
            ++i;
        }
        script.validate();
        return script;
    } catch (const ScriptError&) {
        throw;
    } catch (const std::exception& e) {
        throw ScriptError(std::string("rhyme script: ") + e.what());
    }
}

RhymeScript load_script_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open rhyme script " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_script(buf.str());
}

std::string script_to_json(const RhymeScript& script) {
    json lines = json::array();
    for (const auto& l : script.lines) {
        lines.push_back({{"index", l.index},
                         {"lyric_text", l.lyric_text},
                         {"pose_class", l.pose_class},
                         {"audio_ref", l.audio_ref},
                         {"image_ref", l.image_ref},
                         {"gesture_ref", l.gesture_ref},
                         {"sing_duration_ms", l.sing_duration_ms},
                         {"gesture_duration_ms", l.gesture_duration_ms},
                         {"wait_timeout_ms", l.wait_timeout_ms},
                         {"encourage_text", l.encourage_text}});
    }
    return json{{"title", script.title},
                {"repeat_limit", script.repeat_limit},
                {"match_streak", script.match_streak},
                {"mobile_robot", script.mobile_robot},
                {"announce_lyrics", script.announce_lyrics},
                {"lines", lines}}
               .dump(2) +
           "\n";
}

StepResult step(const GameState& state, const GameEvent& event, const RhymeScript& script) {
    Transition t(state, event, script);
    GameState& s = t.state();

    switch (event.kind) {
    case GameEvent::Kind::start:
        if (s.phase != Phase::idle) {
            t.ignore("session already started");
        } else {
            s.started_at_ms = event.timestamp_ms;
            if (script.lines.empty()) {
                t.finish();
            } else {
                t.sing(0);
            }
        }
        break;

    case GameEvent::Kind::singing_done:
        if (s.phase != Phase::singing || event.line != s.line) {
            t.ignore("no singing in progress for this line");
        } else {
            s.phase = Phase::waiting_for_imitation;
            s.streak = 0;
        }
        break;

    case GameEvent::Kind::pose_observed:
        if (s.phase != Phase::waiting_for_imitation) {
            t.ignore("not waiting for an imitation");
        } else if (s.paused) {
            t.ignore("paused");
        } else if (event.label != script.lines[s.line].pose_class) {
            s.streak = 0;
        } else if (++s.streak >= script.match_streak) {
            t.resolve(true, false);
            t.encourage();
        }
        break;

    case GameEvent::Kind::timeout:
        if (s.phase != Phase::waiting_for_imitation || event.line != s.line) {
            t.ignore("no wait in progress for this line");
        } else if (s.paused) {
            t.ignore("paused");
        } else if (s.repeats_used < script.repeat_limit) {
            s.repeats_used += 1;
            t.sing(s.line);
        } else {
            t.resolve(false, false);
            t.advance();
        }
        break;

    case GameEvent::Kind::encourage_done:
        if (s.phase != Phase::encouraging || event.line != s.line) {
            t.ignore("no encouragement in progress for this line");
        } else {
            t.advance();
        }
        break;

    case GameEvent::Kind::woz:
        on_woz(t, event.woz);
        break;
    }
    return std::move(t).done();
}

GameSession::GameSession(RhymeScript script, std::string session_id) : script_(std::move(script)) {
    script_.validate();
    state_.session_id = session_id;
    log_.session_id = std::move(session_id);
    log_.script_title = script_.title;
}

std::vector<PeripheralCommand> GameSession::start(std::int64_t timestamp_ms) {
    if (state_.phase != Phase::idle) {
        throw SessionError(SessionError::Kind::session_active, "session " + state_.session_id + " already started");
    }
    return handle(GameEvent::start(timestamp_ms));
}

std::vector<PeripheralCommand> GameSession::handle(const GameEvent& event) {
    StepResult r = step(state_, event, script_);
    state_ = std::move(r.state);
    log_.records.push_back(std::move(r.record));
    return std::move(r.commands);
}

ReplayResult replay(const SessionLog& log, const RhymeScript& script) {
    ReplayResult out;
    GameState state;
    state.session_id = log.session_id;
    for (const auto& rec : log.records) {
        StepResult r = step(state, rec.event, script);
        state = std::move(r.state);
        out.states.push_back(state);
        out.commands.insert(out.commands.end(), r.commands.begin(), r.commands.end());
    }
    return out;
}

SessionSummary session_summary(const SessionLog& log, std::size_t total_lines) {
    const GameState* last = log.final_state();
    if (!last || last->phase != Phase::finished) {
        throw SessionError(SessionError::Kind::incomplete_session, "session log does not end in Finished");
    }
    SessionSummary out;
    out.total_lines = total_lines;
    std::set<std::size_t> attempted;
    std::map<std::size_t, LineOutcome> outcomes;
    for (const auto& rec : log.records) {
        if (rec.after.phase == Phase::singing) attempted.insert(rec.after.line);
        if (rec.outcome) outcomes[rec.outcome->line] = *rec.outcome;
        if (rec.applied && rec.event.kind == GameEvent::Kind::woz) {
            ++out.woz_interventions;
            if (rec.event.woz == WozCommand::abort) out.aborted = true;
        }
    }
    out.lines_attempted = attempted.size();
    double latency_total = 0.0;
    for (const auto& [line, outcome] : outcomes) {
        out.outcomes.push_back(outcome);
        if (outcome.imitated) {
            ++out.lines_imitated;
            latency_total += static_cast<double>(outcome.latency_ms);
        }
    }
    if (out.lines_imitated > 0) out.mean_latency_ms = latency_total / static_cast<double>(out.lines_imitated);
    return out;
}

json to_json(const GameState& s) {
    return {{"phase", to_string(s.phase)},
            {"line", s.line},
            {"repeats_used", s.repeats_used},
            {"streak", s.streak},
            {"paused", s.paused},
            {"line_started_ms", s.line_started_ms},
            {"next_command_id", s.next_command_id},
            {"session_id", s.session_id},
            {"started_at_ms", s.started_at_ms}};
}

json to_json(const GameEvent& e) {
    json j = {{"kind", to_string(e.kind)}, {"timestamp_ms", e.timestamp_ms}};
    switch (e.kind) {
    case GameEvent::Kind::singing_done:
    case GameEvent::Kind::timeout:
    case GameEvent::Kind::encourage_done: j["line"] = e.line; break;
    case GameEvent::Kind::pose_observed:
        j["label"] = e.label;
        j["score"] = e.score;
        break;
    case GameEvent::Kind::woz: j["command"] = to_string(e.woz); break;
    case GameEvent::Kind::start: break;
    }
    return j;
}

json to_json(const PeripheralCommand& c) {
    return {{"kind", to_string(c.kind)}, {"ref", c.ref},           {"command_id", c.command_id},
            {"line", c.line},            {"duration_ms", c.duration_ms}, {"mobile", c.mobile}};
}

json to_json(const LineOutcome& o) {
    return {{"line", o.line},
            {"imitated", o.imitated},
            {"latency_ms", o.latency_ms},
            {"repeats_used", o.repeats_used},
            {"by_woz", o.by_woz}};
}

json to_json(const LogRecord& r) {
    json commands = json::array();
    for (const auto& c : r.commands) commands.push_back(to_json(c));
    json j = {{"timestamp_ms", r.timestamp_ms}, {"before", to_json(r.before)}, {"event", to_json(r.event)},
              {"after", to_json(r.after)},      {"commands", commands},        {"applied", r.applied}};
    if (!r.note.empty()) j["note"] = r.note;
    if (r.outcome) j["outcome"] = to_json(*r.outcome);
    return j;
}

json to_json(const SessionLog& log) {
    json records = json::array();
    for (const auto& r : log.records) records.push_back(to_json(r));
    return {{"format", "rhyme_mimic.session_log"},
            {"version", 1},
            {"session_id", log.session_id},
            {"script_title", log.script_title},
            {"records", records}};
}

json to_json(const SessionSummary& s) {
    json outcomes = json::array();
    for (const auto& o : s.outcomes) outcomes.push_back(to_json(o));
    return {{"format", "rhyme_mimic.session_summary"},
            {"version", 1},
            {"total_lines", s.total_lines},
            {"lines_attempted", s.lines_attempted},
            {"lines_imitated", s.lines_imitated},
            {"mean_latency_ms", s.mean_latency_ms},
            {"woz_interventions", s.woz_interventions},
            {"aborted", s.aborted},
            {"outcomes", outcomes}};
}

namespace {

Phase parse_phase(const std::string& text) {
    for (auto p : {Phase::idle, Phase::singing, Phase::waiting_for_imitation, Phase::encouraging, Phase::finished}) {
        if (to_string(p) == text) return p;
    }
    throw std::invalid_argument("unknown phase '" + text + "'");
}

GameEvent::Kind parse_event_kind(const std::string& text) {
    using K = GameEvent::Kind;
    for (auto k : {K::start, K::singing_done, K::pose_observed, K::timeout, K::encourage_done, K::woz}) {
        if (to_string(k) == text) return k;
    }
    throw std::invalid_argument("unknown event kind '" + text + "'");
}

}  // namespace

GameState game_state_from_json(const json& j) {
    GameState s;
    s.phase = parse_phase(j.at("phase").get<std::string>());
    s.line = j.at("line").get<std::size_t>();
    s.repeats_used = j.at("repeats_used").get<std::size_t>();
    s.streak = j.at("streak").get<std::size_t>();
    s.paused = j.at("paused").get<bool>();
    s.line_started_ms = j.at("line_started_ms").get<std::int64_t>();
    s.next_command_id = j.at("next_command_id").get<std::uint64_t>();
    s.session_id = j.at("session_id").get<std::string>();
    s.started_at_ms = j.at("started_at_ms").get<std::int64_t>();
    return s;
}

GameEvent game_event_from_json(const json& j) {
    GameEvent e;
    e.kind = parse_event_kind(j.at("kind").get<std::string>());
    e.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
    e.line = j.value("line", std::size_t{0});
    e.label = j.value("label", std::string{});
    e.score = j.value("score", 0.0);
    if (e.kind == GameEvent::Kind::woz) {
        const auto cmd = parse_woz_command(j.at("command").get<std::string>());
        if (!cmd) throw std::invalid_argument("unknown operator command");
        e.woz = *cmd;
    }
    return e;
}

PeripheralCommand peripheral_command_from_json(const json& j) {
    PeripheralCommand c;
    const auto kind = parse_peripheral_kind(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown peripheral kind");
    c.kind = *kind;
    c.ref = j.at("ref").get<std::string>();
    c.command_id = j.at("command_id").get<std::uint64_t>();
    c.line = j.value("line", std::size_t{0});
    c.duration_ms = j.value("duration_ms", std::int64_t{0});
    c.mobile = j.value("mobile", false);
    return c;
}

SessionLog session_log_from_json(const json& j) {
    SessionLog log;
    log.session_id = j.at("session_id").get<std::string>();
    log.script_title = j.value("script_title", std::string{});
    for (const auto& r : j.at("records")) {
        LogRecord rec;
        rec.timestamp_ms = r.at("timestamp_ms").get<std::int64_t>();
        rec.before = game_state_from_json(r.at("before"));
        rec.event = game_event_from_json(r.at("event"));
        rec.after = game_state_from_json(r.at("after"));
        for (const auto& c : r.at("commands")) rec.commands.push_back(peripheral_command_from_json(c));
        rec.applied = r.at("applied").get<bool>();
        rec.note = r.value("note", std::string{});
        if (r.contains("outcome")) {
            const auto& o = r.at("outcome");
            rec.outcome = LineOutcome{o.at("line").get<std::size_t>(), o.at("imitated").get<bool>(),
                                      o.at("latency_ms").get<std::int64_t>(), o.at("repeats_used").get<std::size_t>(),
                                      o.at("by_woz").get<bool>()};
        }
        log.records.push_back(std::move(rec));
    }
    return log;
}

}  // namespace rhyme_mimic
