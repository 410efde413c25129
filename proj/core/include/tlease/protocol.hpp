#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string_view>

namespace tlease {

using Nanos = std::chrono::nanoseconds;

enum class HostId : std::uint32_t {};
enum class LeaseId : std::uint64_t {};
using Epoch = std::uint64_t;

constexpr std::uint32_t raw(HostId h) { return static_cast<std::uint32_t>(h); }
constexpr std::uint64_t raw(LeaseId l) { return static_cast<std::uint64_t>(l); }

// Precondition violation of a protocol transition (caller bug, not a network
// condition).
class ProtocolError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class HolderPhase : std::uint8_t { Created, Pending, ValidLease, Blocked, Interrupted };
enum class GranterPhase : std::uint8_t { InsideEnclave, Interrupted };
enum class MessageKind : std::uint8_t { ReqLease = 0x01, Granted = 0x02, NotGranted = 0x03 };

std::string_view to_string(HolderPhase p);
std::string_view to_string(GranterPhase p);
std::string_view to_string(MessageKind k);

struct ProtocolMessage {
  MessageKind kind = MessageKind::ReqLease;
  HostId holder{};
  LeaseId lease_id{};
  Epoch epoch = 0;
  Nanos timestamp{0};       // holder's request send time, mirrored in replies
  Nanos send_timestamp{0};  // granter's reply send time; zero for ReqLease

  friend bool operator==(const ProtocolMessage&, const ProtocolMessage&) = default;
};

struct LeaseConfig {
  Nanos lease_term{std::chrono::milliseconds(50)};
  double granter_multiplier = 2.0;
  double drift = 0.0;
  double renew_fraction = 0.2;

  // Holder-side countdown, shortened by the drift bound.
  Nanos holder_term() const;
  // Granter-side countdown: lengthened by drift and scaled by the multiplier.
  Nanos granter_term() const;
  // Throws std::invalid_argument when a field is out of range.
  void validate() const;
};

struct HolderState {
  HostId holder{};
  LeaseId lease_id{};
  HolderPhase phase = HolderPhase::Created;
  Epoch epoch = 1;
  Nanos expire_timer{0};
  // Timestamp of the most recent ReqLease; replies must mirror it.
  Nanos request_ts{0};

  friend bool operator==(const HolderState&, const HolderState&) = default;
};

struct GrantRecord {
  HostId holder{};
  Nanos timestamp{0};
  Epoch epoch = 0;

  friend bool operator==(const GrantRecord&, const GrantRecord&) = default;
};

struct GranterState {
  LeaseId lease_id{};
  GranterPhase phase = GranterPhase::InsideEnclave;
  std::optional<GrantRecord> grant;
  Nanos expire_timer{0};

  friend bool operator==(const GranterState&, const GranterState&) = default;
};

struct HolderRequest {
  HolderState state;
  ProtocolMessage request;
};

struct GranterReply {
  GranterState state;
  ProtocolMessage reply;
};

HolderState make_holder(HostId holder, LeaseId lease);
GranterState make_granter(LeaseId lease);

// Sends ReqLease and restarts the countdown at the send instant.
HolderRequest holder_request(const HolderState& state, Nanos now, const LeaseConfig& cfg);

GranterReply granter_process(const GranterState& state, const ProtocolMessage& msg, Nanos now,
                             const LeaseConfig& cfg);

HolderState holder_receive(const HolderState& state, const ProtocolMessage& msg);

// Interrupts are latched: a second interrupt before resume is a no-op.
HolderState holder_on_interrupt(const HolderState& state);
HolderState holder_on_resume(const HolderState& state);

// Ages the holder countdown by verified in-enclave time. A ValidLease holder
// whose countdown reaches zero keeps its phase but is no longer usable.
HolderState holder_tick(const HolderState& state, Nanos elapsed_in_enclave);

// Gives up on an outstanding request (response timeout): Pending -> Blocked.
HolderState holder_abandon_request(const HolderState& state);

GranterState granter_tick(const GranterState& state, Nanos elapsed_in_enclave);
GranterState granter_on_interrupt(const GranterState& state);
GranterState granter_on_resume(const GranterState& state);

bool lease_usable(const HolderState& state);
bool needs_renewal(const HolderState& state, const LeaseConfig& cfg);

// Lexicographic (epoch, timestamp) freshness used for extension decisions.
bool not_older(Epoch epoch, Nanos ts, const GrantRecord& saved);

}  // namespace tlease
