#include "tlease/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace tlease {

std::string_view to_string(HolderPhase p) {
  switch (p) {
    case HolderPhase::Created: return "created";
    case HolderPhase::Pending: return "pending";
    case HolderPhase::ValidLease: return "validLease";
    case HolderPhase::Blocked: return "blocked";
    case HolderPhase::Interrupted: return "interrupted";
  }
  return "?";
}

std::string_view to_string(GranterPhase p) {
  return p == GranterPhase::InsideEnclave ? "insideEnclave" : "interrupted";
}

std::string_view to_string(MessageKind k) {
  switch (k) {
    case MessageKind::ReqLease: return "ReqLease";
    case MessageKind::Granted: return "Granted";
    case MessageKind::NotGranted: return "NotGranted";
  }
  return "?";
}

Nanos LeaseConfig::holder_term() const {
  return Nanos(static_cast<std::int64_t>(std::floor(static_cast<double>(lease_term.count()) * (1.0 - drift))));
}

Nanos LeaseConfig::granter_term() const {
  const double t = static_cast<double>(lease_term.count()) * (1.0 + drift) * granter_multiplier;
  return Nanos(static_cast<std::int64_t>(std::ceil(t)));
}

void LeaseConfig::validate() const {
  if (lease_term <= Nanos::zero()) throw std::invalid_argument("lease term must be positive");
  if (!(granter_multiplier >= 1.0)) throw std::invalid_argument("granter multiplier must be >= 1");
  if (!(drift >= 0.0 && drift < 1.0)) throw std::invalid_argument("drift must be in [0, 1)");
  if (!(renew_fraction > 0.0 && renew_fraction <= 1.0))
    throw std::invalid_argument("renew fraction must be in (0, 1]");
}

HolderState make_holder(HostId holder, LeaseId lease) {
  HolderState s;
  s.holder = holder;
  s.lease_id = lease;
  return s;
}

GranterState make_granter(LeaseId lease) {
  GranterState s;
  s.lease_id = lease;
  return s;
}

HolderRequest holder_request(const HolderState& state, Nanos now, const LeaseConfig& cfg) {
  switch (state.phase) {
    case HolderPhase::Created:
    case HolderPhase::Blocked:
    case HolderPhase::ValidLease:
      break;
    case HolderPhase::Interrupted:
      throw ProtocolError("holder_request: holder is interrupted");
    case HolderPhase::Pending:
      throw ProtocolError("holder_request: a request is already outstanding");
  }
  HolderRequest out{state, {}};
  out.state.phase = HolderPhase::Pending;
  out.state.expire_timer = cfg.holder_term();
  out.state.request_ts = now;
  out.request.kind = MessageKind::ReqLease;
  out.request.holder = state.holder;
  out.request.lease_id = state.lease_id;
  out.request.epoch = state.epoch;
  out.request.timestamp = now;
  out.request.send_timestamp = Nanos::zero();
  return out;
}

bool not_older(Epoch epoch, Nanos ts, const GrantRecord& saved) {
  return std::tie(epoch, ts) >= std::tie(saved.epoch, saved.timestamp);
}

GranterReply granter_process(const GranterState& state, const ProtocolMessage& msg, Nanos now,
                             const LeaseConfig& cfg) {
  if (msg.kind != MessageKind::ReqLease) throw ProtocolError("granter_process: not a ReqLease");
  if (state.phase != GranterPhase::InsideEnclave)
    throw ProtocolError("granter_process: granter is interrupted");

  GranterReply out{state, msg};
  out.reply.send_timestamp = now;
  out.reply.kind = MessageKind::NotGranted;
  if (msg.lease_id != state.lease_id) return out;

  const bool free = !state.grant.has_value();
  const bool extend = !free && state.grant->holder == msg.holder &&
                      not_older(msg.epoch, msg.timestamp, *state.grant);
  if (free || extend) {
    out.state.grant = GrantRecord{msg.holder, msg.timestamp, msg.epoch};
    out.state.expire_timer = cfg.granter_term();
    out.reply.kind = MessageKind::Granted;
  }
  return out;
}

HolderState holder_receive(const HolderState& state, const ProtocolMessage& msg) {
  if (msg.kind == MessageKind::ReqLease) throw ProtocolError("holder_receive: not a reply");
  // Anything that does not answer the outstanding request is dropped: older
  // epochs, earlier requests of this epoch, other holders or leases.
  if (state.phase != HolderPhase::Pending || msg.holder != state.holder ||
      msg.lease_id != state.lease_id || msg.epoch != state.epoch ||
      msg.timestamp != state.request_ts) {
    return state;
  }
  HolderState next = state;
  if (msg.kind == MessageKind::Granted && state.expire_timer > Nanos::zero()) {
    next.phase = HolderPhase::ValidLease;
  } else {
    next.phase = HolderPhase::Blocked;
  }
  return next;
}

HolderState holder_on_interrupt(const HolderState& state) {
  HolderState next = state;
  next.phase = HolderPhase::Interrupted;
  return next;
}

HolderState holder_on_resume(const HolderState& state) {
  if (state.phase != HolderPhase::Interrupted) throw ProtocolError("holder_on_resume: not interrupted");
  HolderState next = state;
  next.phase = HolderPhase::Blocked;
  next.epoch = state.epoch + 1;
  if (next.epoch == 0) throw ProtocolError("epoch counter wrapped");
  return next;
}

HolderState holder_tick(const HolderState& state, Nanos elapsed_in_enclave) {
  if (state.phase != HolderPhase::Pending && state.phase != HolderPhase::ValidLease) return state;
  HolderState next = state;
  next.expire_timer = std::max(Nanos::zero(), state.expire_timer - elapsed_in_enclave);
  return next;
}

HolderState holder_abandon_request(const HolderState& state) {
  if (state.phase != HolderPhase::Pending) return state;
  HolderState next = state;
  next.phase = HolderPhase::Blocked;
  return next;
}

GranterState granter_tick(const GranterState& state, Nanos elapsed_in_enclave) {
  if (state.phase != GranterPhase::InsideEnclave || !state.grant) return state;
  GranterState next = state;
  next.expire_timer = std::max(Nanos::zero(), state.expire_timer - elapsed_in_enclave);
  if (next.expire_timer == Nanos::zero()) next.grant.reset();
  return next;
}

GranterState granter_on_interrupt(const GranterState& state) {
  GranterState next = state;
  next.phase = GranterPhase::Interrupted;
  return next;
}

GranterState granter_on_resume(const GranterState& state) {
  GranterState next = state;
  next.phase = GranterPhase::InsideEnclave;
  return next;
}

bool lease_usable(const HolderState& state) {
  return state.phase == HolderPhase::ValidLease && state.expire_timer > Nanos::zero();
}

bool needs_renewal(const HolderState& state, const LeaseConfig& cfg) {
  if (state.phase != HolderPhase::ValidLease) return false;
  const double threshold = static_cast<double>(cfg.holder_term().count()) * cfg.renew_fraction;
  return static_cast<double>(state.expire_timer.count()) < threshold;
}

}  // namespace tlease
