#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string_view>

#include "tlease/protocol.hpp"
#include "tlease/transport.hpp"
#include "tlease/trusted_time.hpp"
#include "tlease/txn_guard.hpp"

namespace tlease {

enum class EngineEventKind : std::uint8_t {
  HolderPhase,     // holder phase changed; phase/timer/epoch are the new values
  HolderExpired,   // countdown reached zero while valid or pending
  RequestSent,     // flag = retry within the current acquisition cycle
  FreqCheck,       // value = measured ticks, flag = passed
  Alarm,           // detail names the cause
  GrantInstalled,  // peer = new record holder
  GrantExtended,
  GrantCleared,    // timer ran out
  GrantDenied,     // peer = requester
  Submit,          // detail = outcome
};
std::string_view to_string(EngineEventKind k);

struct EngineEvent {
  EngineEventKind kind = EngineEventKind::Alarm;
  HostId host{};
  LeaseId lease{};
  Epoch epoch = 0;
  std::string_view phase;
  Nanos timer{0};
  HostId peer{};
  Nanos ts{0};
  bool flag = false;
  std::uint64_t value = 0;
  std::string_view detail;
};

using EngineObserver = std::function<void(const EngineEvent&)>;

struct Lease {
  HolderState state;
  LeaseConfig config;
};

// Fresh lease in Created with epoch 1. Ids are unique within the process.
Lease init_lease(Nanos timeout);
Lease init_lease(Nanos timeout, LeaseId id);

struct HolderOptions {
  FreqCheckConfig freq;
  bool verify_frequency = true;
  AccountingMode mode = AccountingMode::Verified;
  // Verified in-enclave time to wait for a reply before re-requesting.
  Nanos response_timeout{std::chrono::milliseconds(2)};
  // Pause after a NotGranted before asking again.
  Nanos denied_backoff{std::chrono::milliseconds(1)};
  unsigned retry_cap = 16;
};

enum class RenewStatus : std::uint8_t { Active, Renewed, Blocked, Failed };
std::string_view to_string(RenewStatus s);

struct HolderCounters {
  std::uint64_t requests = 0;
  std::uint64_t retries = 0;
  std::uint64_t renewals = 0;  // completed acquisition cycles (fresh or extension)
  std::uint64_t timeouts = 0;
  std::uint64_t denied = 0;
  std::uint64_t interrupts = 0;
  std::uint64_t freq_checks = 0;
  std::uint64_t freq_failures = 0;
  std::uint64_t submits = 0;
  std::uint64_t aborted = 0;
};

class HolderEngine {
 public:
  HolderEngine(const Lease& lease, HostId self, HardwareView& hw, Transport& net,
               HolderOptions opts = {}, EngineObserver observer = {});

  // One non-blocking step: account for time, absorb replies, and send a
  // request if the lease needs one.
  RenewStatus poll();

  // Blocking form: polls until the lease is usable or the retry cap is hit.
  // `wait` sleeps for roughly the given time (or until traffic arrives).
  RenewStatus update_renew_lease(const std::function<void(Nanos)>& wait);

  // Ages the lease by the verified interval without ever sending.
  void update_lease_client();

  SubmitReport submit(const Effect& effect, EffectSink& sink, SubmitOptions opts = {});

  // Blocking submit: renew and retry after an abort, up to the retry cap.
  SubmitOutcome submit_with_retry(const Effect& effect, EffectSink& sink,
                                  const std::function<void(Nanos)>& wait, SubmitOptions opts = {});

  const HolderState& state() const { return state_; }
  const EpochAccount& account() const { return account_; }
  const HolderCounters& counters() const { return counters_; }
  const LeaseConfig& config() const { return config_; }
  HostId self() const { return self_; }
  bool usable() const { return lease_usable(state_); }
  // Local clock reading used for request timestamps.
  Nanos local_now();

 private:
  void advance();
  void absorb(const ProtocolMessage& msg);
  void maybe_request();
  void send_request();
  void verify_after_epoch_change();
  void emit(EngineEventKind kind, std::string_view detail = {}, bool flag = false,
            std::uint64_t value = 0);
  void set_state(const HolderState& next, std::string_view cause);

  HolderState state_;
  LeaseConfig config_;
  HostId self_;
  HardwareView& hw_;
  Transport& net_;
  HolderOptions opts_;
  EngineObserver observer_;
  EpochAccount account_;
  HolderCounters counters_;

  bool freq_ok_ = true;
  Nanos last_ts_{-1};
  Nanos pending_since_{0};  // account.accumulated at the last request
  Nanos backoff_until_{0};  // account.accumulated before which no request goes out
  unsigned attempts_ = 0;   // requests in the current acquisition cycle
  bool renewed_this_poll_ = false;
};

struct GranterOptions {
  HostId self{0};
  LeaseConfig lease;
  FreqCheckConfig freq;
  bool verify_frequency = true;
  AccountingMode mode = AccountingMode::Verified;
};

class GranterEngine;
// Consulted for every ReqLease before the protocol decides; false => NotGranted.
using AdmissionPolicy = std::function<bool(const GranterEngine&, const ProtocolMessage&)>;

struct GranterCounters {
  std::uint64_t requests = 0;
  std::uint64_t granted = 0;
  std::uint64_t denied = 0;
  std::uint64_t expired = 0;
  std::uint64_t interrupts = 0;
  std::uint64_t alarms = 0;
};

class GranterEngine {
 public:
  GranterEngine(HardwareView& hw, Transport& net, GranterOptions opts = {},
                EngineObserver observer = {});

  // One loop iteration; returns grants expired during it.
  std::size_t poll();

  // Ages every grant by the verified in-enclave interval since the previous
  // call; returns how many expired.
  std::size_t update_lease_client();

  // Loops until `stop` returns true. `wait` blocks for at most the given time.
  void serve_forever(const std::function<bool()>& stop, const std::function<void(Nanos)>& wait);

  void set_admission(AdmissionPolicy p) { admit_ = std::move(p); }

  const std::map<LeaseId, GranterState>& leases() const { return leases_; }
  const GranterState* lease(LeaseId id) const;
  const GranterCounters& counters() const { return counters_; }
  const GranterOptions& options() const { return opts_; }
  Nanos local_now();

 private:
  void handle(const ProtocolMessage& msg);
  void emit(EngineEventKind kind, LeaseId lease, const GranterState& st, HostId peer = {},
            std::string_view detail = {});

  HardwareView& hw_;
  Transport& net_;
  GranterOptions opts_;
  EngineObserver observer_;
  EpochAccount account_;
  std::map<LeaseId, GranterState> leases_;
  GranterCounters counters_;
  AdmissionPolicy admit_;
};

}  // namespace tlease
