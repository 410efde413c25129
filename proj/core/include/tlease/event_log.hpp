#pragma once

#include <functional>
#include <iosfwd>
#include <string>

#include "tlease/runtime.hpp"

namespace tlease {

// One JSON object per line: event, time, lease_id, epoch, phase and the
// kind-specific fields.
std::string event_json(const EngineEvent& e, Nanos time);

// Observer writing event_json lines to `out`, stamped by `clock`.
EngineObserver json_lines_observer(std::ostream& out, std::function<Nanos()> clock);

}  // namespace tlease
