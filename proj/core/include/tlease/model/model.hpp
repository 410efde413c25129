#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

// Finite-instance formal model of the lease protocol, written independently
// of protocol_core so the two can be checked against each other.
//
// Time is an integer `now`. Countdown timers are kept in hundredths of a tick
// so a clock running at frequency f percent removes f units per Tick.
namespace tlease::model {

inline constexpr std::int16_t kInf = -1;  // timer not running

enum class LH : std::uint8_t { Created, Pending, ValidLease, Blocked, Interrupted };
std::string_view to_string(LH p);

enum class MsgType : std::uint8_t { ReqLease, Granted, NotGranted };
std::string_view to_string(MsgType t);

struct Msg {
  MsgType type = MsgType::ReqLease;
  std::uint8_t h = 0;
  std::uint8_t epoch = 0;
  std::uint8_t ts = 0;
  std::uint8_t send_ts = 0;  // zero for ReqLease
  bool arrived = false;      // reached the receiver's host
  bool processed = false;    // ReqLease handled at least once by the granter

  // Set identity ignores the arrival flag.
  auto key() const { return std::tuple(type, h, epoch, ts, send_ts); }
  friend bool operator==(const Msg&, const Msg&) = default;
};

struct Holder {
  LH phase = LH::Created;
  std::uint8_t epoch = 1;
  std::int16_t expire = kInf;
  // Guaranteed in-enclave ticks before the next interrupt; kInf = none. Picked
  // when the previous epoch ends and counted down only while inside.
  std::int16_t epoch_timer = 0;
  std::uint8_t freq = 1;         // index into {1 - FreqDrift, 1, 1 + FreqDrift}
  std::uint8_t int_ticks = 0;    // ticks spent interrupted
  std::uint8_t req_ts = 0;       // timestamp of the latest ReqLease

  friend bool operator==(const Holder&, const Holder&) = default;
};

struct Granter {
  bool interrupted = false;
  bool granted = false;
  std::uint8_t rec_h = 0;
  std::uint8_t rec_ts = 0;
  std::uint8_t rec_epoch = 0;
  std::int16_t expire = kInf;
  std::int16_t epoch_timer = 0;
  std::uint8_t freq = 1;
  std::uint8_t int_ticks = 0;

  friend bool operator==(const Granter&, const Granter&) = default;
};

struct State {
  std::uint8_t now = 0;
  std::vector<Holder> lh;
  Granter g;
  std::vector<Msg> msgs;  // sorted by key(), unique

  friend bool operator==(const State&, const State&) = default;
};

// Assumptions enforced by pruning Tick (time may not pass while one is
// outstanding). Liveness needs them; safety is always explored with none.
struct Fairness {
  bool delivery_bound = true;       // every message arrives within MsgDeliveryMaxDelay
  bool interrupted_max = true;      // no interrupt lasts longer than InterruptedMaxPeriod
  bool not_interrupted_min = true;  // epochs last at least NotInterruptedMinPeriod
  // Hosts inside the enclave act on new work before time passes: process
  // arrived requests and replies, request when blocked or due for renewal,
  // time out dead requests and free expired grants.
  bool prompt_hosts = true;
};

struct ModelConfig {
  std::uint32_t holders = 1;
  std::uint32_t lease_time = 2;
  std::uint32_t drift = 0;
  std::uint32_t freq_drift = 50;  // percent
  std::uint32_t max_now = 12;
  std::uint32_t msg_delivery_max_delay = 1;
  std::uint32_t interrupted_max_period = 2;
  std::uint32_t not_interrupted_min_period = 4;
  bool attacker = false;
  std::uint32_t multiplier = 1;
  double renew_fraction = 0.2;
  bool symmetry = false;  // canonicalize interchangeable holders
  // Safety only: merge superseded requests and duplicate replies and clear
  // variables no later step reads. Verdicts are unchanged; the space shrinks.
  bool safety_reductions = true;
  // Ablation: the granter extends on any request from the recorded holder,
  // ignoring the (epoch, timestamp) freshness check.
  bool ignore_request_staleness = false;
  Fairness fairness;

  std::int16_t holder_term() const;   // (LeaseTime - Drift) * 100
  std::int16_t granter_term() const;  // multiplier * (LeaseTime + Drift) * 100
  std::int16_t freq_percent(std::uint8_t index) const;
  // Throws std::invalid_argument when the instance is not representable.
  void validate() const;
};

enum class Act : std::uint8_t {
  Tick,
  LHReqLeaseFresh,
  LHReqLeaseToExtend,
  LHReceive,
  LHTimeout,
  LHEnclaveInterrupt,
  LHEnclaveResume,
  AChangeFreq,
  GProcessRequest,
  GLeaseExpires,
  GEnclaveInterrupt,
  GEnclaveResume,
  AChangeFreqGranter,
  Deliver,
};
std::string_view to_string(Act a);

struct Label {
  Act act = Act::Tick;
  std::uint8_t h = 0;
  std::int16_t arg = 0;  // frequency index, next epoch length, or message index in the source state

  friend bool operator==(const Label&, const Label&) = default;
};
std::string describe(const Label& l);

struct Transition {
  Label label;
  State next;
};

// Exploration mode. Safety drops bookkeeping that only liveness reads
// (arrival flags, epoch timers, interrupt lengths) so equivalent states merge.
enum class Mode : std::uint8_t { Safety, Liveness };

std::vector<State> initial_states(const ModelConfig& cfg, Mode mode);
std::vector<Transition> next_states(const State& s, const ModelConfig& cfg, Mode mode);

// Applies message garbage collection and mode normalization; every state the
// model produces is already normalized.
void normalize(State& s, const ModelConfig& cfg, Mode mode);

// True when time may advance: no environment deadline is due.
bool tick_allowed(const State& s, const ModelConfig& cfg);

// Actions that must eventually be taken (weak fairness): protocol steps,
// plus resumes and deliveries while the matching assumption is enforced. A
// horizon state with none enabled ends the run.
bool fair_action_enabled(const State& s, const ModelConfig& cfg, Mode mode);

// Empty when TypeOK holds; otherwise names the violated conjunct.
std::string type_ok(const State& s, const ModelConfig& cfg);

// ValidLease: a holder in validLease with a live timer is the recorded grantee.
bool valid_lease(const State& s);

// HolderAsksForLeaseGranterGrantsLease antecedent / consequent.
bool p1_antecedent(const State& s, const ModelConfig& cfg);
bool p1_consequent(const State& s);
// GranterGrantsLeaseHolderHasValidLease antecedent / consequent.
bool p2_antecedent(const State& s, const ModelConfig& cfg);
bool p2_consequent(const State& s);

std::string encode(const State& s);
State decode(std::string_view bytes);
std::string to_json(const State& s, const ModelConfig& cfg);

}  // namespace tlease::model
