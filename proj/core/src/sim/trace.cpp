#include "tlease/sim/trace.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>

#include "json.hpp"

namespace tlease::sim {

namespace {

constexpr TraceKind kAllKinds[] = {
    TraceKind::HolderPhase, TraceKind::HolderExpired, TraceKind::Request,   TraceKind::FreqCheck,
    TraceKind::Alarm,       TraceKind::GrantInstalled, TraceKind::GrantExtended, TraceKind::GrantCleared,
    TraceKind::GrantDenied, TraceKind::Submit,        TraceKind::Claim,     TraceKind::Effect,
    TraceKind::Interrupt,   TraceKind::ClockAction,   TraceKind::MsgDrop,   TraceKind::MsgDelay,
    TraceKind::AuthDrop,    TraceKind::Summary,
};

}  // namespace

std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::HolderPhase: return "holder_phase";
    case TraceKind::HolderExpired: return "holder_expired";
    case TraceKind::Request: return "request";
    case TraceKind::FreqCheck: return "freq_check";
    case TraceKind::Alarm: return "alarm";
    case TraceKind::GrantInstalled: return "grant_installed";
    case TraceKind::GrantExtended: return "grant_extended";
    case TraceKind::GrantCleared: return "grant_cleared";
    case TraceKind::GrantDenied: return "grant_denied";
    case TraceKind::Submit: return "submit";
    case TraceKind::Claim: return "claim";
    case TraceKind::Effect: return "effect";
    case TraceKind::Interrupt: return "interrupt";
    case TraceKind::ClockAction: return "clock_action";
    case TraceKind::MsgDrop: return "msg_drop";
    case TraceKind::MsgDelay: return "msg_delay";
    case TraceKind::AuthDrop: return "auth_drop";
    case TraceKind::Summary: return "summary";
  }
  return "?";
}

std::optional<TraceKind> trace_kind_from(std::string_view s) {
  for (TraceKind k : kAllKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

TraceKind trace_kind(EngineEventKind k) {
  switch (k) {
    case EngineEventKind::HolderPhase: return TraceKind::HolderPhase;
    case EngineEventKind::HolderExpired: return TraceKind::HolderExpired;
    case EngineEventKind::RequestSent: return TraceKind::Request;
    case EngineEventKind::FreqCheck: return TraceKind::FreqCheck;
    case EngineEventKind::Alarm: return TraceKind::Alarm;
    case EngineEventKind::GrantInstalled: return TraceKind::GrantInstalled;
    case EngineEventKind::GrantExtended: return TraceKind::GrantExtended;
    case EngineEventKind::GrantCleared: return TraceKind::GrantCleared;
    case EngineEventKind::GrantDenied: return TraceKind::GrantDenied;
    case EngineEventKind::Submit: return TraceKind::Submit;
  }
  return TraceKind::Alarm;
}

std::size_t Trace::count(TraceKind k) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [k](const TraceEvent& e) { return e.kind == k; }));
}

std::string_view intern(std::string_view s) {
  static std::mutex mu;
  static std::set<std::string, std::less<>> pool;
  std::lock_guard lock(mu);
  auto it = pool.find(s);
  if (it == pool.end()) it = pool.emplace(s).first;
  return *it;
}

std::string to_json_line(const TraceEvent& e) {
  nlohmann::ordered_json j;
  j["seq"] = e.seq;
  j["t"] = e.time.count();
  j["ev"] = to_string(e.kind);
  j["host"] = e.host;
  if (e.lease) j["lease"] = e.lease;
  if (e.epoch) j["epoch"] = e.epoch;
  if (!e.phase.empty()) j["phase"] = e.phase;
  if (e.timer.count()) j["timer"] = e.timer.count();
  if (e.peer) j["peer"] = e.peer;
  if (e.flag) j["flag"] = true;
  if (e.value) j["value"] = e.value;
  if (!e.detail.empty()) j["detail"] = e.detail;
  return j.dump();
}

void write_jsonl(std::ostream& out, const Trace& trace) {
  for (const auto& e : trace.events) out << to_json_line(e) << '\n';
}

Trace read_jsonl(std::istream& in) {
  Trace t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceEvent e;
      e.seq = j.at("seq").get<std::uint64_t>();
      e.time = Nanos(j.at("t").get<std::int64_t>());
      const auto kind = trace_kind_from(j.at("ev").get<std::string>());
      if (!kind) throw std::invalid_argument("unknown event");
      e.kind = *kind;
      e.host = j.at("host").get<std::uint32_t>();
      e.lease = j.value("lease", std::uint64_t{0});
      e.epoch = j.value("epoch", Epoch{0});
      if (j.contains("phase")) e.phase = intern(j["phase"].get<std::string>());
      e.timer = Nanos(j.value("timer", std::int64_t{0}));
      e.peer = j.value("peer", std::uint32_t{0});
      e.flag = j.value("flag", false);
      e.value = j.value("value", std::int64_t{0});
      if (j.contains("detail")) e.detail = intern(j["detail"].get<std::string>());
      t.events.push_back(e);
    } catch (const std::exception& ex) {
      throw std::invalid_argument("trace line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return t;
}

TraceVerdict check_trace(const Trace& trace) {
  const auto& ev = trace.events;
  std::vector<std::size_t> order(ev.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ev[a].time != ev[b].time) return ev[a].time < ev[b].time;
    return ev[a].seq < ev[b].seq;
  });

  TraceVerdict v;
  std::map<std::uint64_t, std::uint32_t> record;  // lease -> holder
  // (lease, holder) -> end of the holder's usable window
  std::map<std::pair<std::uint64_t, std::uint32_t>, Nanos> claims;

  auto violate = [&](std::size_t idx, std::string reason) {
    ++v.violations;
    if (v.safe) {
      v.safe = false;
      v.violation_index = idx;
      v.violation_time = ev[idx].time;
      v.reason = std::move(reason);
    }
  };
  auto check_lease = [&](std::size_t idx, std::uint64_t lease) {
    auto rec = record.find(lease);
    for (auto it = claims.lower_bound({lease, 0}); it != claims.end() && it->first.first == lease; ++it) {
      if (it->second <= ev[idx].time) continue;
      if (rec == record.end() || rec->second != it->first.second) {
        violate(idx, "holder " + std::to_string(it->first.second) + " still claims lease " +
                         std::to_string(lease) + " after the granter dropped it");
      }
    }
  };

  for (std::size_t idx : order) {
    const TraceEvent& e = ev[idx];
    switch (e.kind) {
      case TraceKind::GrantInstalled:
      case TraceKind::GrantExtended:
        record[e.lease] = e.peer;
        check_lease(idx, e.lease);
        break;
      case TraceKind::GrantCleared:
        record.erase(e.lease);
        check_lease(idx, e.lease);
        break;
      case TraceKind::Claim: {
        const Nanos until = e.flag ? Nanos(e.value) : e.time;
        claims[{e.lease, e.host}] = until;
        if (until > e.time) {
          auto rec = record.find(e.lease);
          if (rec == record.end() || rec->second != e.host)
            violate(idx, "holder " + std::to_string(e.host) + " claims lease " + std::to_string(e.lease) +
                             " without a matching grant");
        }
        break;
      }
      case TraceKind::Effect: {
        ++v.effects;
        auto rec = record.find(e.lease);
        if (rec == record.end() || rec->second != e.host) {
          ++v.uncovered_effects;
          violate(idx, "effect from holder " + std::to_string(e.host) + " not covered by a grant");
        }
        break;
      }
      default:
        break;
    }
  }
  return v;
}

}  // namespace tlease::sim
