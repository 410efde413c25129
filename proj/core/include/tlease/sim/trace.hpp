#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tlease/runtime.hpp"

namespace tlease::sim {

enum class TraceKind : std::uint8_t {
  HolderPhase,
  HolderExpired,
  Request,
  FreqCheck,
  Alarm,
  GrantInstalled,
  GrantExtended,
  GrantCleared,
  GrantDenied,
  Submit,
  Claim,        // flag = usable; value = end of the usable window (true ns)
  Effect,       // an externally visible effect was released
  Interrupt,    // value = window length
  ClockAction,  // flag = accepted; detail = set_freq / set_counter
  MsgDrop,      // detail = loss / adversary
  MsgDelay,     // value = extra adversary delay
  AuthDrop,     // channel rejected a datagram; detail = reason
  Summary,      // value = accumulated ns, timer = true in-enclave ns over the same span
};
std::string_view to_string(TraceKind k);
std::optional<TraceKind> trace_kind_from(std::string_view s);
TraceKind trace_kind(EngineEventKind k);

// Times are true (simulator) nanoseconds on the emitting host's cursor, so
// events from different hosts interleave by (time, seq), not by seq alone.
// String fields always point at static storage.
struct TraceEvent {
  std::uint64_t seq = 0;
  Nanos time{0};
  TraceKind kind = TraceKind::Alarm;
  std::uint32_t host = 0;
  std::uint64_t lease = 0;
  Epoch epoch = 0;
  std::string_view phase;
  Nanos timer{0};
  std::uint32_t peer = 0;
  bool flag = false;
  std::int64_t value = 0;
  std::string_view detail;

  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Trace {
  std::vector<TraceEvent> events;

  TraceEvent& add(TraceEvent e) {
    e.seq = events.size();
    events.push_back(e);
    return events.back();
  }
  std::size_t count(TraceKind k) const;
};

// Returns a pointer to a process-lifetime copy of `s` (used for parsed traces).
std::string_view intern(std::string_view s);

std::string to_json_line(const TraceEvent& e);
void write_jsonl(std::ostream& out, const Trace& trace);
// Throws std::invalid_argument on malformed lines.
Trace read_jsonl(std::istream& in);

struct TraceVerdict {
  bool safe = true;
  // First violation in (time, seq) order; the index refers to trace.events.
  std::optional<std::size_t> violation_index;
  Nanos violation_time{0};
  std::string reason;
  std::uint64_t effects = 0;
  std::uint64_t uncovered_effects = 0;
  std::uint64_t violations = 0;
};

// Replays grant records against holder claims and released effects: a holder
// may claim a lease, or release an effect under it, only while the granter's
// record names that holder.
TraceVerdict check_trace(const Trace& trace);

}  // namespace tlease::sim
