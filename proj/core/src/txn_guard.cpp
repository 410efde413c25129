#include "tlease/txn_guard.hpp"

namespace tlease {

std::vector<Effect> EffectBuffer::release() {
  std::vector<Effect> out;
  out.swap(pending_);
  return out;
}

std::string_view to_string(SubmitOutcome o) {
  switch (o) {
    case SubmitOutcome::Submitted: return "submitted";
    case SubmitOutcome::LeaseInvalid: return "leaseInvalid";
    case SubmitOutcome::Aborted: return "aborted";
  }
  return "?";
}

UpdateOutcome advance_lease(HolderState& lease, EpochAccount& account, HardwareView& hw,
                            AccountingMode mode) {
  const UpdateResult r = update(account, hw, mode);
  account = r.account;
  if (r.outcome == UpdateOutcome::InterruptDetected) {
    lease = holder_on_resume(holder_on_interrupt(lease));
    return r.outcome;
  }
  lease = holder_tick(lease, r.elapsed);
  return r.outcome;
}

SubmitReport protected_submit(HolderState& lease, EpochAccount& account, HardwareView& hw,
                              const Effect& effect, EffectSink& sink, const SubmitOptions& opts) {
  AtomicSection& section = hw.atomic_section();
  SubmitReport report;

  const std::uint64_t begin_ticks = hw.peek_counter();
  const auto token = section.begin();
  const UpdateOutcome seen = advance_lease(lease, account, hw, opts.mode);
  if (seen == UpdateOutcome::InterruptDetected || !lease_usable(lease)) {
    section.commit(token);
    report.outcome = SubmitOutcome::LeaseInvalid;
    return report;
  }

  EffectBuffer buffer;
  buffer.stage(effect);
  // With the hint the section commits as soon as the effect is staged and the
  // system call itself runs outside it; otherwise the call stays exposed.
  if (opts.commit_hint) {
    section.commit_early_hint();
  } else if (opts.tail > Nanos::zero()) {
    hw.busy_work(opts.tail);
  }
  const SectionOutcome outcome = section.commit(token);
  const std::uint64_t exposed_until = hw.peek_counter();
  report.abort_window = account.conversion.to_nanos(static_cast<std::int64_t>(exposed_until - begin_ticks));

  if (outcome == SectionOutcome::Aborted) {
    buffer.discard();
    // The interrupt that killed the section also ends the epoch.
    advance_lease(lease, account, hw, opts.mode);
    report.outcome = SubmitOutcome::Aborted;
    return report;
  }
  for (const auto& e : buffer.release()) sink.emit(lease, e);
  if (opts.commit_hint && opts.tail > Nanos::zero()) hw.busy_work(opts.tail);
  report.outcome = SubmitOutcome::Submitted;
  return report;
}

}  // namespace tlease
