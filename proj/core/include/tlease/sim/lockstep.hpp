#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tlease/protocol.hpp"
#include "tlease/random.hpp"

namespace tlease::sim {

// Integer-tick simulator that drives protocol_core directly. One tick of true
// time advances an in-enclave host's countdowns by its frequency in percent
// (a lease of LeaseTime ticks is LeaseTime * 100 counter units), so its runs
// line up one to one with the formal model's steps.
struct LockstepParams {
  std::uint32_t holders = 1;
  std::uint32_t lease_time = 2;
  std::uint32_t drift = 0;
  std::uint32_t freq_drift = 50;  // percent
  std::uint32_t multiplier = 1;
  std::uint32_t max_now = 12;
  bool attacker = false;
  bool skip_epoch_increment = false;  // deliberately broken holder, for mutation tests
  std::uint64_t seed = 1;
};

enum class LockstepAction : std::uint8_t {
  Tick,
  Request,
  Receive,
  Abandon,
  HolderInterrupt,
  HolderResume,
  HolderFreq,
  Process,
  GranterInterrupt,
  GranterResume,
  GranterFreq,
};

struct LockstepStep {
  LockstepAction action = LockstepAction::Tick;
  std::uint32_t holder = 0;
  ProtocolMessage msg;   // Receive / Process
  std::uint8_t freq = 1;  // frequency index for *Freq
  bool ignored = false;   // Receive of a reply the holder dropped
};
std::string describe(const LockstepStep& s);

class LockstepSim {
 public:
  explicit LockstepSim(LockstepParams p);

  // Executes one enabled step picked uniformly at random; nullopt when none is.
  std::optional<LockstepStep> step();

  const LockstepParams& params() const { return p_; }
  const LeaseConfig& lease_config() const { return cfg_; }
  std::uint32_t now() const { return now_; }
  const std::vector<HolderState>& holders() const { return holders_; }
  const GranterState& granter() const { return granter_; }
  // Everything ever sent that has not been consumed, in send order.
  const std::vector<ProtocolMessage>& messages() const { return msgs_; }
  std::uint8_t holder_freq(std::size_t i) const { return holder_freq_[i]; }
  std::uint8_t granter_freq() const { return granter_freq_; }
  std::uint32_t holder_interrupted_ticks(std::size_t i) const { return holder_int_[i]; }
  std::uint32_t granter_interrupted_ticks() const { return granter_int_; }

  std::int64_t freq_percent(std::uint8_t index) const;

 private:
  void apply(LockstepStep& s);
  void send(const ProtocolMessage& m);

  LockstepParams p_;
  LeaseConfig cfg_;
  Rng rng_;
  std::uint32_t now_ = 0;
  std::vector<HolderState> holders_;
  GranterState granter_;
  std::vector<ProtocolMessage> msgs_;
  std::vector<std::uint8_t> holder_freq_;
  std::vector<std::uint32_t> holder_int_;
  std::uint8_t granter_freq_ = 1;
  std::uint32_t granter_int_ = 0;
};

}  // namespace tlease::sim
