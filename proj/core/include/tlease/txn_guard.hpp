#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tlease/protocol.hpp"
#include "tlease/trusted_time.hpp"

namespace tlease {

using Effect = std::vector<std::uint8_t>;

// Effects staged inside a section. Released exactly once on commit,
// discarded wholesale on abort.
class EffectBuffer {
 public:
  void stage(Effect e) { pending_.push_back(std::move(e)); }
  std::vector<Effect> release();
  void discard() { pending_.clear(); }
  bool empty() const { return pending_.empty(); }

 private:
  std::vector<Effect> pending_;
};

// Where committed effects become externally visible.
class EffectSink {
 public:
  virtual ~EffectSink() = default;
  virtual void emit(const HolderState& lease, std::span<const std::uint8_t> effect) = 0;
};

enum class SubmitOutcome : std::uint8_t { Submitted, LeaseInvalid, Aborted };
std::string_view to_string(SubmitOutcome o);

struct SubmitOptions {
  AccountingMode mode = AccountingMode::Verified;
  bool commit_hint = true;
  // In-section time after staging (the system call itself).
  Nanos tail{0};
};

struct SubmitReport {
  SubmitOutcome outcome = SubmitOutcome::LeaseInvalid;
  // Time the section stayed exposed to aborts, as seen by the host counter.
  Nanos abort_window{0};
};

// Lease check and effect release as one atomic section. `lease` and `account`
// are advanced in place: the check ages the lease by the verified interval,
// and an interrupt observed by it runs the interrupt/resume path.
SubmitReport protected_submit(HolderState& lease, EpochAccount& account, HardwareView& hw,
                              const Effect& effect, EffectSink& sink,
                              const SubmitOptions& opts = {});

// Ages `lease` by whatever update() reports, handling interrupts. Shared by
// the engine poll loop and protected_submit.
UpdateOutcome advance_lease(HolderState& lease, EpochAccount& account, HardwareView& hw,
                            AccountingMode mode);

}  // namespace tlease
