#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "tlease/sim/trace.hpp"

namespace tlease::sim {

struct MetricsOptions {
  std::string name;
  std::uint64_t seed = 0;
  Nanos horizon{0};
  Nanos read_cost{30};
};

// Aggregates over every holder in the trace unless noted.
struct RunMetrics {
  std::string name;
  std::uint64_t seed = 0;
  double horizon_s = 0.0;
  std::uint32_t holders = 0;

  bool safe = true;
  std::uint64_t violations = 0;

  std::uint64_t requests = 0;
  std::uint64_t retries = 0;        // requests flagged as retries
  std::uint64_t renewals = 0;       // entries into validLease
  std::uint64_t replies = 0;        // grants and denials sent
  std::uint64_t grants_cleared = 0; // granter-side expiries (lost leases)
  std::uint64_t holder_lapses = 0;  // holder timer ran out
  std::uint64_t interrupts = 0;     // on holder hosts
  std::uint64_t alarms = 0;
  std::uint64_t freq_checks = 0;
  std::uint64_t freq_failures = 0;
  std::uint64_t msg_drops = 0;
  std::uint64_t auth_drops = 0;
  std::uint64_t submits = 0;
  std::uint64_t aborts = 0;
  std::uint64_t effects = 0;

  double request_rate_hz = 0.0;      // per holder
  double message_rate_hz = 0.0;      // requests + replies, per holder
  double retries_per_renewal = 0.0;
  double usable_fraction = 0.0;      // mean over holders
  double check_rate_hz = 0.0;        // counter reads per second while usable, per holder
  double under_accounting = 0.0;     // 1 - accumulated / in-enclave span
  double mean_abort_window_ns = 0.0;
  double interrupt_rate_hz = 0.0;    // per holder host
};

RunMetrics compute_metrics(const Trace& trace, const MetricsOptions& opts);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const RunMetrics& m);

}  // namespace tlease::sim
