#include "tlease/sim/metrics.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>

namespace tlease::sim {

RunMetrics compute_metrics(const Trace& trace, const MetricsOptions& opts) {
  RunMetrics m;
  m.name = opts.name;
  m.seed = opts.seed;
  m.horizon_s = std::chrono::duration<double>(opts.horizon).count();

  const TraceVerdict v = check_trace(trace);
  m.safe = v.safe;
  m.violations = v.violations;

  using Key = std::pair<std::uint32_t, std::uint64_t>;  // (host, lease)
  std::map<Key, std::string_view> last_phase;
  struct ClaimSpan {
    Nanos from{0};
    Nanos until{0};
    bool open = false;
  };
  std::map<Key, ClaimSpan> open_claims;
  std::map<Key, Nanos> usable;
  std::set<std::uint32_t> holder_hosts;
  std::uint64_t abort_windows = 0;
  double abort_window_sum = 0.0;
  double accumulated = 0.0;
  double span = 0.0;

  auto close = [&](const Key& k, Nanos at) {
    ClaimSpan& c = open_claims[k];
    if (c.open) {
      const Nanos end = std::min({c.until, at, opts.horizon});
      if (end > c.from) usable[k] += end - c.from;
    }
    c.open = false;
  };

  for (const TraceEvent& e : trace.events) {
    const Key k{e.host, e.lease};
    switch (e.kind) {
      case TraceKind::Request:
        ++m.requests;
        if (e.flag) ++m.retries;
        break;
      case TraceKind::HolderPhase: {
        auto [it, fresh] = last_phase.try_emplace(k, std::string_view{});
        if (e.phase == "validLease" && (fresh || it->second != "validLease")) ++m.renewals;
        it->second = e.phase;
        break;
      }
      case TraceKind::HolderExpired: ++m.holder_lapses; break;
      case TraceKind::GrantInstalled:
      case TraceKind::GrantExtended:
      case TraceKind::GrantDenied: ++m.replies; break;
      case TraceKind::GrantCleared: ++m.grants_cleared; break;
      case TraceKind::Alarm: ++m.alarms; break;
      case TraceKind::FreqCheck:
        ++m.freq_checks;
        if (!e.flag) ++m.freq_failures;
        break;
      case TraceKind::MsgDrop: ++m.msg_drops; break;
      case TraceKind::AuthDrop: ++m.auth_drops; break;
      case TraceKind::Submit:
        ++m.submits;
        if (e.detail == "aborted") {
          ++m.aborts;
          ++abort_windows;
          abort_window_sum += static_cast<double>(e.value);
        }
        break;
      case TraceKind::Effect: ++m.effects; break;
      case TraceKind::Claim: {
        holder_hosts.insert(e.host);
        close(k, e.time);
        if (e.flag) open_claims[k] = {e.time, Nanos(e.value), true};
        break;
      }
      case TraceKind::Summary:
        if (e.detail == "holder") {
          holder_hosts.insert(e.host);
          accumulated += static_cast<double>(e.value);
          span += static_cast<double>(e.timer.count());
        }
        break;
      default: break;
    }
  }
  for (auto& [k, c] : open_claims) close(k, opts.horizon);
  for (const TraceEvent& e : trace.events)
    if (e.kind == TraceKind::Summary && e.detail == "host" && holder_hosts.count(e.host)) m.interrupts += e.value;

  m.holders = static_cast<std::uint32_t>(holder_hosts.size());
  const double per_holder_s = m.horizon_s * std::max<std::uint32_t>(m.holders, 1);
  if (m.horizon_s > 0) {
    m.request_rate_hz = static_cast<double>(m.requests) / per_holder_s;
    m.message_rate_hz = static_cast<double>(m.requests + m.replies) / per_holder_s;
    m.interrupt_rate_hz = static_cast<double>(m.interrupts) / per_holder_s;
    double usable_ns = 0.0;
    for (const auto& [k, t] : usable) usable_ns += static_cast<double>(t.count());
    m.usable_fraction = usable_ns / (per_holder_s * 1e9);
    if (opts.read_cost > Nanos::zero())
      m.check_rate_hz = usable_ns / static_cast<double>(opts.read_cost.count()) / per_holder_s;
  }
  if (m.renewals) m.retries_per_renewal = static_cast<double>(m.retries) / static_cast<double>(m.renewals);
  if (span > 0) m.under_accounting = 1.0 - accumulated / span;
  if (abort_windows) m.mean_abort_window_ns = abort_window_sum / static_cast<double>(abort_windows);
  return m;
}

void write_csv_header(std::ostream& out) {
  out << "name,seed,horizon_s,holders,safe,violations,requests,retries,renewals,replies,grants_cleared,"
         "holder_lapses,interrupts,alarms,freq_checks,freq_failures,msg_drops,auth_drops,submits,aborts,"
         "effects,request_rate_hz,message_rate_hz,retries_per_renewal,usable_fraction,check_rate_hz,"
         "under_accounting,mean_abort_window_ns,interrupt_rate_hz\n";
}

void write_csv_row(std::ostream& out, const RunMetrics& m) {
  out << m.name << ',' << m.seed << ',' << m.horizon_s << ',' << m.holders << ',' << (m.safe ? 1 : 0) << ','
      << m.violations << ',' << m.requests << ',' << m.retries << ',' << m.renewals << ',' << m.replies << ','
      << m.grants_cleared << ',' << m.holder_lapses << ',' << m.interrupts << ',' << m.alarms << ','
      << m.freq_checks << ',' << m.freq_failures << ',' << m.msg_drops << ',' << m.auth_drops << ','
      << m.submits << ',' << m.aborts << ',' << m.effects << ',' << m.request_rate_hz << ','
      << m.message_rate_hz << ',' << m.retries_per_renewal << ',' << m.usable_fraction << ','
      << m.check_rate_hz << ',' << m.under_accounting << ',' << m.mean_abort_window_ns << ','
      << m.interrupt_rate_hz << '\n';
}

}  // namespace tlease::sim
