#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>

#include "tlease/protocol.hpp"

namespace tlease {

// Counter ticks -> nanoseconds as an exact rational, so repeated conversions
// never accumulate floating point drift.
struct TickConversion {
  std::uint64_t ns_per = 1;     // numerator
  std::uint64_t ticks_per = 1;  // denominator

  // Signed tick difference to nanoseconds, rounding toward zero.
  Nanos to_nanos(std::int64_t ticks) const;
  friend bool operator==(const TickConversion&, const TickConversion&) = default;
};

struct CounterRead {
  std::uint64_t ticks = 0;
  // Sticky: true if an interrupt was delivered since the previous read.
  bool interrupted = false;
};

enum class SectionOutcome : std::uint8_t { Committed, Aborted };

// Emulates a hardware transaction: any interrupt delivered between begin()
// and the commit point forces Aborted.
class AtomicSection {
 public:
  using Token = std::uint64_t;
  virtual ~AtomicSection() = default;

  virtual Token begin() = 0;
  // Moves the commit point to "now". No-op without an active section.
  virtual void commit_early_hint() = 0;
  virtual SectionOutcome commit(Token token) = 0;
  virtual bool active() const = 0;
};

class SectionUnavailable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Everything the adversary can touch. Implementations are confined to the
// thread that owns the EpochAccount reading them.
class HardwareView {
 public:
  virtual ~HardwareView() = default;

  virtual CounterRead read_counter_with_flag() = 0;
  // Counter value without consuming the interrupt flag.
  virtual std::uint64_t peek_counter() = 0;
  // Counter ticks consumed by `n` entropy instructions.
  virtual std::uint64_t entropy_op(unsigned n) = 0;
  virtual TickConversion nominal_conversion() const = 0;
  // Throws SectionUnavailable when the platform has no transaction facility.
  virtual AtomicSection& atomic_section() = 0;
  // Local computation that takes time but touches no shared state.
  virtual void busy_work(Nanos) {}
};

// Counter went backwards without an interrupt: outside the hardware model.
class HardwareViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class AccountingMode : std::uint8_t {
  Verified,  // interrupt-aware enclave-interval timer
  Naive,     // baseline: raw signed counter deltas, interrupt flag ignored
};

struct EpochAccount {
  Nanos accumulated{0};
  std::uint64_t last_ticks = 0;
  Epoch epoch = 1;
  TickConversion conversion;
};

enum class UpdateOutcome : std::uint8_t { Advanced, InterruptDetected };

struct UpdateResult {
  EpochAccount account;
  UpdateOutcome outcome = UpdateOutcome::Advanced;
  // Verified in-enclave time added by this update (zero on interrupt).
  Nanos elapsed{0};
};

// Starts a fresh account at the current counter value; a pending interrupt
// flag is consumed and ignored.
EpochAccount anchor_account(HardwareView& hw, TickConversion conversion, Epoch epoch = 1);

UpdateResult update(const EpochAccount& account, HardwareView& hw,
                    AccountingMode mode = AccountingMode::Verified);

struct FreqCheckConfig {
  unsigned ops_per_check = 6;
  std::uint64_t lower_bound = 7000;
  std::uint64_t upper_bound = 10500;
  unsigned repeats = 1;

  void validate() const;
};

enum class FreqVerdict : std::uint8_t { Pass, Fail };

struct FreqCheckResult {
  FreqVerdict verdict = FreqVerdict::Fail;
  std::uint64_t measured = 0;  // median ticks; 0 when no clean measurement
  unsigned aborted_attempts = 0;
};

// Times cfg.ops_per_check entropy instructions inside an atomic section. A
// measurement raced by an interrupt is retried once before failing.
FreqCheckResult verify_frequency(HardwareView& hw, const FreqCheckConfig& cfg);

// Draws the nominal-frequency latency (ticks) of one ops_per_check sequence.
using LatencySampler = std::function<double()>;

double detection_probability(const FreqCheckConfig& cfg, double freq_factor,
                             const LatencySampler& latency, std::uint64_t samples);

// Monte-Carlo estimate for a uniform latency on [lo, hi] with a seeded PRNG.
double detection_probability_uniform(const FreqCheckConfig& cfg, double freq_factor, double lo,
                                     double hi, std::uint64_t samples, std::uint64_t seed);

// (1 + speedup) / (1 - slowdown): how much longer the granter's term must be
// to absorb rate manipulation that escapes detection.
double required_multiplier(double max_slowdown, double max_speedup);

// Range of frequency factors that can pass verification for a latency range.
struct EscapeWindow {
  double min_factor;
  double max_factor;
};
EscapeWindow escape_window(const FreqCheckConfig& cfg, double min_latency, double max_latency);

// Estimates the tick->ns conversion by reading the counter across a wait;
// `wait` blocks and returns the reference-clock time that actually passed.
TickConversion calibrate_conversion(HardwareView& hw, const std::function<Nanos()>& wait);

}  // namespace tlease
