#ifndef RHYME_MIMIC_TEST_TRACE_CASES_HPP
#define RHYME_MIMIC_TEST_TRACE_CASES_HPP

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "rhyme_mimic/game_engine.hpp"

namespace traces {

struct Cmd {
    rhyme_mimic::PeripheralKind kind;
    std::string ref;
    bool mobile = false;
};

struct Outcome {
    bool imitated;
    bool by_woz;
    std::size_t repeats;
};

/// Hand-written expectation for the record produced by one event.
struct Expect {
    rhyme_mimic::Phase phase;
    std::size_t line = 0;
    std::size_t repeats = 0;
    std::size_t streak = 0;
    bool paused = false;
    bool applied = true;
    std::vector<Cmd> commands;
    std::optional<Outcome> outcome;
};

struct TraceCase {
    std::string name;
    rhyme_mimic::RhymeScript script;
    std::vector<rhyme_mimic::GameEvent> events;
    std::vector<Expect> expected;
};

/// Keeps parameterized test names readable.
inline void PrintTo(const TraceCase& c, std::ostream* os) { *os << c.name; }

/// Small three-line script: pose classes p0..p2, streak 3, one repeat.
rhyme_mimic::RhymeScript three_line_script();

std::vector<TraceCase> all_cases();

/// Runs the events through a session and compares every record, then checks
/// that replaying the log reproduces states and commands. Empty string: pass.
std::string check_case(const TraceCase& c);

}  // namespace traces

#endif
