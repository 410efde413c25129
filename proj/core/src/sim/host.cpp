#include "tlease/sim/host.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tlease::sim {

namespace {
constexpr Nanos kNever = Nanos::max();
}

SimHost::SimHost(std::uint32_t index, InterruptSource interrupts, Rng rng, HostEvents events)
    : index_(index), src_(std::move(interrupts)), rng_(std::move(rng)), events_(std::move(events)) {
  std::sort(src_.scripted.begin(), src_.scripted.end(),
            [](const Window& a, const Window& b) { return a.start < b.start; });
  poisson_next_ = src_.rate_hz > 0.0
                      ? Nanos(static_cast<std::int64_t>(rng_.exponential(1e9 / src_.rate_hz)))
                      : kNever;
}

std::uint64_t SimHost::counter_at(Nanos t) const {
  __extension__ using Wide = __int128;
  const Wide dt = static_cast<Wide>((t - anchor_time_).count());
  const Wide ticks = static_cast<Wide>(anchor_ticks_) + dt * freq_ppm_ / 1'000'000;
  return ticks < 0 ? 0 : static_cast<std::uint64_t>(ticks);
}

void SimHost::rebase(Nanos t) {
  anchor_ticks_ = counter_at(t);
  anchor_time_ = t;
}

const Window& SimHost::peek_window() {
  auto next_candidate = [&]() -> Window {
    const Nanos scripted =
        scripted_next_ < src_.scripted.size() ? src_.scripted[scripted_next_].start : kNever;
    if (scripted == kNever && poisson_next_ == kNever) return {kNever, kNever};
    if (scripted <= poisson_next_) {
      Window w = src_.scripted[scripted_next_++];
      if (w.end <= w.start) w.end = w.start + std::max(src_.cost, Nanos(1));
      return w;
    }
    Window w{poisson_next_, poisson_next_ + src_.cost};
    if (src_.max_extra > Nanos::zero()) {
      w.end += Nanos(static_cast<std::int64_t>(
          rng_.uniform(static_cast<double>(src_.min_extra.count()), static_cast<double>(src_.max_extra.count()))));
    }
    if (w.end <= w.start) w.end = w.start + Nanos(1);
    poisson_next_ = w.end + Nanos(static_cast<std::int64_t>(rng_.exponential(1e9 / src_.rate_hz)));
    return w;
  };
  auto next_start = [&]() {
    const Nanos scripted =
        scripted_next_ < src_.scripted.size() ? src_.scripted[scripted_next_].start : kNever;
    return std::min(scripted, poisson_next_);
  };

  if (windows_.empty()) windows_.push_back(next_candidate());
  // Overlapping windows merge into one exit/resume pair.
  while (windows_.back().end != kNever && next_start() < windows_.back().end) {
    const Window w = next_candidate();
    windows_.back().end = std::max(windows_.back().end, w.end);
  }
  return windows_.front();
}

void SimHost::add_clock_action(const ClockAction& a) {
  auto pos = std::upper_bound(clock_actions_.begin() + static_cast<std::ptrdiff_t>(clock_next_),
                              clock_actions_.end(), a,
                              [](const ClockAction& x, const ClockAction& y) { return x.at < y.at; });
  clock_actions_.insert(pos, a);
}

void SimHost::set_freq_bound(double drift) { freq_bound_ = drift; }

void SimHost::apply_clock_actions_before(Nanos t, const Window* inside) {
  while (clock_next_ < clock_actions_.size() && clock_actions_[clock_next_].at < t) {
    const ClockAction a = clock_actions_[clock_next_++];
    bool accepted = inside && a.at >= inside->start && a.at < inside->end;
    if (accepted && a.set_freq) {
      accepted = a.factor > 0.0 && std::abs(a.factor - 1.0) <= freq_bound_ + 1e-12;
    }
    if (accepted) {
      if (a.set_freq) {
        rebase(a.at);
        freq_ppm_ = std::llround(a.factor * 1e6);
      } else {
        anchor_time_ = a.at;
        anchor_ticks_ = a.value;
      }
    }
    if (events_.on_clock) events_.on_clock(a.at, a, accepted);
  }
}

void SimHost::enter_window(const Window& w) {
  ++generation_;
  starts_.push_back(w.start);
  ++interrupt_count_;
  interrupted_total_ += w.end - w.start;
  now_ = w.start;
  if (events_.on_interrupt) events_.on_interrupt(w.start, w);
  if (adversary_) {
    for (const ClockAction& a : adversary_(w, counter_at(w.start))) add_clock_action(a);
  }
  apply_clock_actions_before(w.end, &w);
  now_ = w.end;
}

void SimHost::run_for(Nanos cost) {
  Nanos remaining = std::max(cost, Nanos::zero());
  while (true) {
    const Window& w = peek_window();
    const Nanos end = now_ + remaining;
    if (w.start < end) {
      remaining -= w.start - now_;
      apply_clock_actions_before(w.start, nullptr);
      const Window copy = w;
      windows_.pop_front();
      enter_window(copy);
      continue;
    }
    apply_clock_actions_before(end, nullptr);
    now_ = end;
    return;
  }
}

void SimHost::idle_until(Nanos t) {
  while (true) {
    const Window& w = peek_window();
    if (w.start >= t) break;
    apply_clock_actions_before(w.start, nullptr);
    const Window copy = w;
    windows_.pop_front();
    enter_window(copy);
  }
  apply_clock_actions_before(t, nullptr);
  now_ = std::max(now_, t);
}

// ---------------------------------------------------------------- hardware

SimHardware::SimHardware(SimHost& host, const HardwareParams& params, Rng rng)
    : host_(host), params_(params), rng_(std::move(rng)), seen_gen_(host.generation()), section_(*this) {}

CounterRead SimHardware::read_counter_with_flag() {
  host_.run_for(params_.read_cost);
  CounterRead r;
  r.ticks = host_.counter();
  r.interrupted = host_.generation() != seen_gen_;
  seen_gen_ = host_.generation();
  last_read_enclave_ = host_.enclave_time();
  last_read_time_ = host_.now();
  if (!any_read_) {
    any_read_ = true;
    first_read_enclave_ = last_read_enclave_;
  }
  return r;
}

std::uint64_t SimHardware::peek_counter() {
  host_.run_for(params_.read_cost);
  return host_.counter();
}

std::uint64_t SimHardware::entropy_op(unsigned n) {
  const std::uint64_t before = host_.counter();
  const double latency = rng_.uniform(params_.entropy_low, params_.entropy_high) * n /
                         static_cast<double>(FreqCheckConfig{}.ops_per_check);
  host_.run_for(Nanos(std::llround(latency)));
  const std::uint64_t after = host_.counter();
  return after > before ? after - before : 0;
}

AtomicSection::Token SimHardware::Section::begin() {
  active_ = true;
  hinted_ = false;
  start_gen_ = hw_.host_.generation();
  doomed_ = hw_.params_.spurious_abort > 0.0 && hw_.rng_.bernoulli(hw_.params_.spurious_abort);
  open_ = next_++;
  return open_;
}

void SimHardware::Section::commit_early_hint() {
  if (!active_ || hinted_) return;
  hinted_ = true;
  hint_clean_ = hw_.host_.generation() == start_gen_;
}

SectionOutcome SimHardware::Section::commit(Token token) {
  if (!active_ || token != open_) return SectionOutcome::Aborted;
  active_ = false;
  const bool clean = hinted_ ? hint_clean_ : hw_.host_.generation() == start_gen_;
  return clean && !doomed_ ? SectionOutcome::Committed : SectionOutcome::Aborted;
}

}  // namespace tlease::sim
