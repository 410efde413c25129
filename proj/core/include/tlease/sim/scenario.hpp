#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tlease/protocol.hpp"
#include "tlease/trusted_time.hpp"

namespace tlease::sim {

// Hardware and platform constants used as simulator inputs. One virtual tick
// is one nanosecond at nominal counter frequency.
namespace calibration {
inline constexpr Nanos kCounterRead{30};
inline constexpr Nanos kSlowTimerRead{220'000'000};  // TPM-class timer
inline constexpr Nanos kInterruptCost{20'300};
inline constexpr double kEntropyLow = 7000.0;    // ticks for one check sequence
inline constexpr double kEntropyHigh = 10500.0;
inline constexpr Nanos kShortEpoch{15'000'000};
inline constexpr Nanos kLongEpoch{650'000'000};
}  // namespace calibration

enum class ActionKind : std::uint8_t { Interrupt, SetFreq, SetCounter, DelayMsg, DropMsg };
std::string_view to_string(ActionKind k);

// One scripted adversary action. `host` is the host index (0 = granter).
struct Action {
  ActionKind kind = ActionKind::Interrupt;
  Nanos at{0};
  std::uint32_t host = 0;
  Nanos duration{0};          // Interrupt
  double factor = 1.0;        // SetFreq
  std::uint64_t value = 0;    // SetCounter
  // DelayMsg / DropMsg match messages sent in [at, until) of this kind (any
  // when unset) carrying this holder id (any when unset).
  Nanos until{0};
  std::optional<MessageKind> match_kind;
  std::optional<std::uint32_t> match_holder;
  Nanos extra{0};             // DelayMsg
};

struct HardwareParams {
  Nanos read_cost = calibration::kCounterRead;
  double entropy_low = calibration::kEntropyLow;
  double entropy_high = calibration::kEntropyHigh;
  Nanos interrupt_cost = calibration::kInterruptCost;
  double spurious_abort = 0.0;  // per atomic section
};

struct InterruptParams {
  double holder_rate_hz = 0.0;
  double granter_rate_hz = 0.0;
  Nanos min_duration{0};  // on top of interrupt_cost
  Nanos max_duration{0};
};

struct NetworkParams {
  Nanos base_delay{0};
  Nanos jitter_mean{0};  // exponential
  Nanos max_delay{0};    // cap on total delay; zero = uncapped
  double loss = 0.0;
  bool seal = true;      // run frames through the AEAD channel
};

// Random adversary, drawn at every interrupt of the affected host.
struct AdversaryParams {
  bool enabled = false;
  double freq_drift = 0.0;      // admissible factors [1 - d, 1 + d]
  double p_freq = 0.0;          // chance of a frequency rewrite per interrupt
  bool extremes_only = false;   // pick 1 +- d instead of a uniform factor
  double p_counter = 0.0;       // chance of a counter rewrite per interrupt
  Nanos counter_back{0};        // rewrite range [now - back, now + forward]
  Nanos counter_forward{0};
  double p_delay = 0.0;         // per message
  Nanos max_extra_delay{0};
  double p_drop = 0.0;
  bool target_granter = true;   // granter is attacked too
};

struct WorkloadParams {
  Nanos submit_interval{0};  // zero: no protected submissions
  Nanos submit_tail{0};
  bool commit_hint = true;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  Nanos horizon{std::chrono::seconds(1)};
  Nanos poll_interval{std::chrono::microseconds(100)};
  Nanos granter_poll_interval{std::chrono::microseconds(100)};

  LeaseConfig lease;
  std::uint32_t holders = 1;
  bool shared_lease = true;  // every holder contends for lease 1
  Nanos response_timeout{0}; // zero: 2 x max network delay, at least 1 ms
  Nanos denied_backoff{std::chrono::milliseconds(1)};

  HardwareParams hardware;
  InterruptParams interrupts;
  NetworkParams network;
  AdversaryParams adversary;
  WorkloadParams workload;

  FreqCheckConfig freq;
  bool verify_frequency = true;
  bool detect_interrupts = true;  // false: naive accounting (ablation)

  std::vector<Action> actions;

  AccountingMode mode() const {
    return detect_interrupts ? AccountingMode::Verified : AccountingMode::Naive;
  }
  Nanos effective_response_timeout() const;
  void validate() const;
};

// INI-style file: [world] [lease] [holders] [hardware] [network] [interrupts]
// [adversary] [workload] [timer] and any number of [action.N] sections. Keys
// ending in _us / _ms / _ns are durations in that unit. Throws
// std::invalid_argument with the offending key on malformed input.
Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::string& path);

}  // namespace tlease::sim
