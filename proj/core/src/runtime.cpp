#include "tlease/runtime.hpp"

#include <algorithm>
#include <atomic>

namespace tlease {

std::string_view to_string(EngineEventKind k) {
  switch (k) {
    case EngineEventKind::HolderPhase: return "holder_phase";
    case EngineEventKind::HolderExpired: return "holder_expired";
    case EngineEventKind::RequestSent: return "request";
    case EngineEventKind::FreqCheck: return "freq_check";
    case EngineEventKind::Alarm: return "alarm";
    case EngineEventKind::GrantInstalled: return "grant_installed";
    case EngineEventKind::GrantExtended: return "grant_extended";
    case EngineEventKind::GrantCleared: return "grant_cleared";
    case EngineEventKind::GrantDenied: return "grant_denied";
    case EngineEventKind::Submit: return "submit";
  }
  return "?";
}

std::string_view to_string(RenewStatus s) {
  switch (s) {
    case RenewStatus::Active: return "active";
    case RenewStatus::Renewed: return "renewed";
    case RenewStatus::Blocked: return "blocked";
    case RenewStatus::Failed: return "failed";
  }
  return "?";
}

namespace {
std::atomic<std::uint64_t> next_lease_id{1};
}

Lease init_lease(Nanos timeout) {
  return init_lease(timeout, LeaseId{next_lease_id.fetch_add(1)});
}

Lease init_lease(Nanos timeout, LeaseId id) {
  if (timeout <= Nanos::zero()) throw std::invalid_argument("lease timeout must be positive");
  Lease l;
  l.config.lease_term = timeout;
  l.state = make_holder(HostId{0}, id);
  return l;
}

// ---------------------------------------------------------------- holder

HolderEngine::HolderEngine(const Lease& lease, HostId self, HardwareView& hw, Transport& net,
                           HolderOptions opts, EngineObserver observer)
    : state_(lease.state),
      config_(lease.config),
      self_(self),
      hw_(hw),
      net_(net),
      opts_(opts),
      observer_(std::move(observer)) {
  config_.validate();
  opts_.freq.validate();
  state_.holder = self;
  account_ = anchor_account(hw_, hw_.nominal_conversion(), state_.epoch);
  if (opts_.verify_frequency) verify_after_epoch_change();
}

Nanos HolderEngine::local_now() {
  return account_.conversion.to_nanos(static_cast<std::int64_t>(hw_.peek_counter()));
}

void HolderEngine::emit(EngineEventKind kind, std::string_view detail, bool flag, std::uint64_t value) {
  if (!observer_) return;
  EngineEvent e;
  e.kind = kind;
  e.host = self_;
  e.lease = state_.lease_id;
  e.epoch = state_.epoch;
  e.phase = to_string(state_.phase);
  e.timer = state_.expire_timer;
  e.ts = state_.request_ts;
  e.flag = flag;
  e.value = value;
  e.detail = detail;
  observer_(e);
}

void HolderEngine::set_state(const HolderState& next, std::string_view cause) {
  const bool phase_changed = next.phase != state_.phase || next.epoch != state_.epoch;
  const bool was_live = state_.expire_timer > Nanos::zero();
  const bool live = next.expire_timer > Nanos::zero();
  state_ = next;
  if (phase_changed || (was_live != live && live)) {
    emit(EngineEventKind::HolderPhase, cause);
  } else if (was_live && !live) {
    emit(EngineEventKind::HolderExpired, cause);
  }
}

void HolderEngine::advance() {
  const UpdateResult r = update(account_, hw_, opts_.mode);
  account_ = r.account;
  if (r.outcome == UpdateOutcome::InterruptDetected) {
    ++counters_.interrupts;
    // An interrupted request keeps its cycle alive; the next send is a retry.
    if (state_.phase != HolderPhase::Pending) attempts_ = 0;
    set_state(holder_on_interrupt(state_), "interrupt");
    set_state(holder_on_resume(state_), "resume");
    if (opts_.verify_frequency) verify_after_epoch_change();
    return;
  }
  set_state(holder_tick(state_, r.elapsed), "tick");
}

void HolderEngine::verify_after_epoch_change() {
  const FreqCheckResult res = verify_frequency(hw_, opts_.freq);
  ++counters_.freq_checks;
  const bool pass = res.verdict == FreqVerdict::Pass;
  emit(EngineEventKind::FreqCheck, {}, pass, res.measured);
  freq_ok_ = pass;
  if (pass) return;
  ++counters_.freq_failures;
  emit(EngineEventKind::Alarm, "frequency_check_failed");
  // The timer cannot be trusted: same treatment as an interrupt.
  account_.epoch += 1;
  if (state_.phase == HolderPhase::Pending) attempts_ = std::max(attempts_, 1u);
  set_state(holder_on_interrupt(state_), "freq_fail");
  set_state(holder_on_resume(state_), "freq_fail");
}

void HolderEngine::absorb(const ProtocolMessage& msg) {
  if (msg.kind == MessageKind::ReqLease) return;
  // Fresh read right before acting on the reply: an interrupt since the last
  // one bumps the epoch and the reply no longer matches.
  advance();
  const HolderState next = holder_receive(state_, msg);
  if (next == state_) return;
  set_state(next, to_string(msg.kind));
  if (state_.phase == HolderPhase::ValidLease) {
    ++counters_.renewals;
    counters_.retries += attempts_ > 0 ? attempts_ - 1 : 0;
    attempts_ = 0;
    renewed_this_poll_ = true;
  } else if (msg.kind == MessageKind::NotGranted) {
    ++counters_.denied;
    backoff_until_ = account_.accumulated + opts_.denied_backoff;
  }
}

void HolderEngine::send_request() {
  if (!freq_ok_) {
    verify_after_epoch_change();
    if (!freq_ok_) return;
  }
  Nanos ts = local_now();
  if (ts <= last_ts_) ts = last_ts_ + Nanos(1);
  last_ts_ = ts;
  const HolderRequest req = holder_request(state_, ts, config_);
  ++attempts_;
  ++counters_.requests;
  set_state(req.state, "request");
  pending_since_ = account_.accumulated;
  emit(EngineEventKind::RequestSent, {}, attempts_ > 1);
  net_.send(req.request);
}

void HolderEngine::maybe_request() {
  switch (state_.phase) {
    case HolderPhase::Pending:
      if (account_.accumulated - pending_since_ < opts_.response_timeout) return;
      ++counters_.timeouts;
      set_state(holder_abandon_request(state_), "timeout");
      send_request();
      return;
    case HolderPhase::Created:
    case HolderPhase::Blocked:
      if (account_.accumulated < backoff_until_) return;
      send_request();
      return;
    case HolderPhase::ValidLease:
      if (needs_renewal(state_, config_)) send_request();
      return;
    case HolderPhase::Interrupted:
      return;
  }
}

RenewStatus HolderEngine::poll() {
  renewed_this_poll_ = false;
  advance();
  while (auto msg = net_.poll()) absorb(*msg);
  maybe_request();
  if (lease_usable(state_)) return renewed_this_poll_ ? RenewStatus::Renewed : RenewStatus::Active;
  if (attempts_ > opts_.retry_cap) return RenewStatus::Failed;
  return RenewStatus::Blocked;
}

RenewStatus HolderEngine::update_renew_lease(const std::function<void(Nanos)>& wait) {
  RenewStatus s = poll();
  bool renewed = s == RenewStatus::Renewed;
  const Nanos step = std::max(Nanos(1000), opts_.response_timeout / 8);
  while (s == RenewStatus::Blocked) {
    wait(step);
    s = poll();
    renewed = renewed || s == RenewStatus::Renewed;
  }
  if (s == RenewStatus::Active && renewed) return RenewStatus::Renewed;
  return s;
}

void HolderEngine::update_lease_client() { advance(); }

SubmitReport HolderEngine::submit(const Effect& effect, EffectSink& sink, SubmitOptions opts) {
  opts.mode = opts_.mode;
  const HolderState before = state_;
  HolderState lease = state_;
  const std::uint64_t interrupts_before = account_.epoch;
  const SubmitReport report = protected_submit(lease, account_, hw_, effect, sink, opts);
  if (account_.epoch != interrupts_before) {
    ++counters_.interrupts;
    if (before.phase != HolderPhase::Pending) attempts_ = 0;
    set_state(holder_on_interrupt(state_), "interrupt");
  }
  set_state(lease, "submit");
  ++counters_.submits;
  if (report.outcome == SubmitOutcome::Aborted) ++counters_.aborted;
  emit(EngineEventKind::Submit, to_string(report.outcome), false, static_cast<std::uint64_t>(report.abort_window.count()));
  if (account_.epoch != interrupts_before && opts_.verify_frequency) verify_after_epoch_change();
  return report;
}

SubmitOutcome HolderEngine::submit_with_retry(const Effect& effect, EffectSink& sink,
                                              const std::function<void(Nanos)>& wait,
                                              SubmitOptions opts) {
  SubmitOutcome last = SubmitOutcome::LeaseInvalid;
  for (unsigned attempt = 0; attempt <= opts_.retry_cap; ++attempt) {
    last = submit(effect, sink, opts).outcome;
    if (last == SubmitOutcome::Submitted) return last;
    if (update_renew_lease(wait) == RenewStatus::Failed) return last;
  }
  return last;
}

// ---------------------------------------------------------------- granter

GranterEngine::GranterEngine(HardwareView& hw, Transport& net, GranterOptions opts,
                             EngineObserver observer)
    : hw_(hw), net_(net), opts_(opts), observer_(std::move(observer)) {
  opts_.lease.validate();
  opts_.freq.validate();
  account_ = anchor_account(hw_, hw_.nominal_conversion());
  if (opts_.verify_frequency && verify_frequency(hw_, opts_.freq).verdict == FreqVerdict::Fail) {
    ++counters_.alarms;
    emit(EngineEventKind::Alarm, LeaseId{0}, GranterState{}, {}, "frequency_check_failed");
  }
}

Nanos GranterEngine::local_now() {
  return account_.conversion.to_nanos(static_cast<std::int64_t>(hw_.peek_counter()));
}

const GranterState* GranterEngine::lease(LeaseId id) const {
  auto it = leases_.find(id);
  return it == leases_.end() ? nullptr : &it->second;
}

void GranterEngine::emit(EngineEventKind kind, LeaseId lease, const GranterState& st, HostId peer,
                         std::string_view detail) {
  if (!observer_) return;
  EngineEvent e;
  e.kind = kind;
  e.host = opts_.self;
  e.lease = lease;
  e.phase = to_string(st.phase);
  e.timer = st.expire_timer;
  if (st.grant) {
    e.epoch = st.grant->epoch;
    e.ts = st.grant->timestamp;
  }
  e.peer = peer;
  e.detail = detail;
  observer_(e);
}

std::size_t GranterEngine::update_lease_client() {
  const UpdateResult r = update(account_, hw_, opts_.mode);
  account_ = r.account;
  if (r.outcome == UpdateOutcome::InterruptDetected) {
    ++counters_.interrupts;
    // The interrupted stretch is not counted: grants live longer in real
    // time, never shorter.
    for (auto& [id, st] : leases_) st = granter_on_resume(granter_on_interrupt(st));
    if (opts_.verify_frequency && verify_frequency(hw_, opts_.freq).verdict == FreqVerdict::Fail) {
      ++counters_.alarms;
      emit(EngineEventKind::Alarm, LeaseId{0}, GranterState{}, {}, "frequency_check_failed");
    }
    return 0;
  }
  std::size_t expired = 0;
  for (auto& [id, st] : leases_) {
    if (!st.grant) continue;
    const HostId holder = st.grant->holder;
    st = granter_tick(st, r.elapsed);
    if (!st.grant) {
      ++expired;
      emit(EngineEventKind::GrantCleared, id, st, holder);
    }
  }
  counters_.expired += expired;
  return expired;
}

void GranterEngine::handle(const ProtocolMessage& msg) {
  if (msg.kind != MessageKind::ReqLease) return;
  ++counters_.requests;
  auto [it, fresh] = leases_.try_emplace(msg.lease_id, make_granter(msg.lease_id));
  GranterState& st = it->second;
  const std::optional<GrantRecord> before = st.grant;

  ProtocolMessage reply = msg;
  reply.kind = MessageKind::NotGranted;
  reply.send_timestamp = local_now();
  if (!admit_ || admit_(*this, msg)) {
    const GranterReply rep = granter_process(st, msg, reply.send_timestamp, opts_.lease);
    st = rep.state;
    reply = rep.reply;
  }
  if (reply.kind == MessageKind::Granted) {
    ++counters_.granted;
    const bool extension = before && before->holder == msg.holder;
    emit(extension ? EngineEventKind::GrantExtended : EngineEventKind::GrantInstalled, msg.lease_id, st,
         msg.holder);
  } else {
    ++counters_.denied;
    emit(EngineEventKind::GrantDenied, msg.lease_id, st, msg.holder);
  }
  net_.send(reply);
}

std::size_t GranterEngine::poll() {
  std::size_t expired = update_lease_client();
  while (auto msg = net_.poll()) {
    handle(*msg);
    expired += update_lease_client();
  }
  return expired;
}

void GranterEngine::serve_forever(const std::function<bool()>& stop,
                                  const std::function<void(Nanos)>& wait) {
  const Nanos step = std::clamp(opts_.lease.lease_term / 50, Nanos(10'000), Nanos(1'000'000));
  while (!stop()) {
    poll();
    wait(step);
  }
}

}  // namespace tlease
