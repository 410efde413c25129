#include "tlease/event_log.hpp"

#include <ostream>

#include "json.hpp"

namespace tlease {

std::string event_json(const EngineEvent& e, Nanos time) {
  nlohmann::ordered_json j;
  j["event"] = to_string(e.kind);
  j["time"] = time.count();
  j["host"] = raw(e.host);
  j["lease_id"] = raw(e.lease);
  j["epoch"] = e.epoch;
  j["phase"] = e.phase;
  j["timer_ns"] = e.timer.count();
  switch (e.kind) {
    case EngineEventKind::GrantInstalled:
    case EngineEventKind::GrantExtended:
    case EngineEventKind::GrantCleared:
    case EngineEventKind::GrantDenied:
      j["peer"] = raw(e.peer);
      break;
    case EngineEventKind::RequestSent:
      j["retry"] = e.flag;
      j["ts"] = e.ts.count();
      break;
    case EngineEventKind::FreqCheck:
      j["pass"] = e.flag;
      j["measured"] = e.value;
      break;
    default:
      break;
  }
  if (!e.detail.empty()) j["detail"] = e.detail;
  return j.dump();
}

EngineObserver json_lines_observer(std::ostream& out, std::function<Nanos()> clock) {
  return [&out, clock = std::move(clock)](const EngineEvent& e) {
    out << event_json(e, clock()) << '\n';
    out.flush();
  };
}

}  // namespace tlease
