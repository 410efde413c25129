#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <vector>

#include "tlease/random.hpp"
#include "tlease/sim/scenario.hpp"
#include "tlease/trusted_time.hpp"

namespace tlease::sim {

struct Window {
  Nanos start{0};
  Nanos end{0};
};

// A clock rewrite the adversary attempts at a given instant. Accepted only if
// the host is inside an interrupt window at that instant.
struct ClockAction {
  Nanos at{0};
  bool set_freq = false;  // else set counter
  double factor = 1.0;
  std::uint64_t value = 0;
};

struct HostEvents {
  // Called on every accepted or rejected clock rewrite and interrupt.
  std::function<void(Nanos at, const Window&)> on_interrupt;
  std::function<void(Nanos at, const ClockAction&, bool accepted)> on_clock;
};

struct InterruptSource {
  double rate_hz = 0.0;
  Nanos cost{0};
  Nanos min_extra{0};
  Nanos max_extra{0};
  std::vector<Window> scripted;  // sorted or not; merged on construction
};

// Decides the adversary's clock rewrites when an interrupt window opens.
using WindowAdversary = std::function<std::vector<ClockAction>(const Window&, std::uint64_t counter_now)>;

// One simulated machine: a true-time cursor, an adversary-controlled counter
// and a stream of interrupt windows during which nothing on the host runs.
class SimHost {
 public:
  SimHost(std::uint32_t index, InterruptSource interrupts, Rng rng, HostEvents events = {});

  std::uint32_t index() const { return index_; }
  Nanos now() const { return now_; }

  // Executes `cost` of in-enclave work; interrupts falling inside stretch it.
  void run_for(Nanos cost);
  // Idles until `t` (or the end of an interrupt covering it).
  void idle_until(Nanos t);

  std::uint64_t counter() const { return counter_at(now_); }
  // Ticks per nanosecond in parts per million.
  std::int64_t freq_ppm() const { return freq_ppm_; }
  std::uint64_t generation() const { return generation_; }

  // Start of the next interrupt window (at or after now()).
  Nanos next_interrupt_start() { return peek_window().start; }

  void add_clock_action(const ClockAction& a);
  // Frequency rewrites must keep the factor within [1 - drift, 1 + drift].
  void set_freq_bound(double drift);
  void set_window_adversary(WindowAdversary adv) { adversary_ = std::move(adv); }

  // True (non-interrupted) time elapsed since time zero.
  Nanos enclave_time() const { return now_ - interrupted_total_; }
  Nanos interrupted_total() const { return interrupted_total_; }
  std::uint64_t interrupt_count() const { return interrupt_count_; }
  // Start of the window that moved the generation from g - 1 to g.
  Nanos interrupt_start(std::uint64_t g) const { return starts_.at(g - 1); }

  bool crashed = false;

 private:
  std::uint64_t counter_at(Nanos t) const;
  void rebase(Nanos t);
  const Window& peek_window();
  void enter_window(const Window& w);
  void apply_clock_actions_before(Nanos t, const Window* inside);

  std::uint32_t index_;
  InterruptSource src_;
  Rng rng_;
  HostEvents events_;
  WindowAdversary adversary_;

  Nanos now_{0};
  Nanos interrupted_total_{0};
  std::uint64_t interrupt_count_ = 0;
  std::uint64_t generation_ = 0;
  std::vector<Nanos> starts_;

  // counter(t) = anchor_ticks_ + (t - anchor_time_) * freq_ppm_ / 1e6
  Nanos anchor_time_{0};
  std::uint64_t anchor_ticks_ = 0;
  std::int64_t freq_ppm_ = 1'000'000;

  std::deque<Window> windows_;   // materialized, in order, disjoint
  std::size_t scripted_next_ = 0;
  Nanos poisson_next_{-1};
  std::vector<ClockAction> clock_actions_;  // sorted by time
  std::size_t clock_next_ = 0;
  double freq_bound_ = 1.0;
};

// Per-reader view of a SimHost. Every reader sees interrupts independently,
// as each enclave thread has its own exit flag.
class SimHardware final : public HardwareView {
 public:
  SimHardware(SimHost& host, const HardwareParams& params, Rng rng);

  CounterRead read_counter_with_flag() override;
  std::uint64_t peek_counter() override;
  std::uint64_t entropy_op(unsigned n) override;
  TickConversion nominal_conversion() const override { return {1, 1}; }
  AtomicSection& atomic_section() override { return section_; }
  void busy_work(Nanos d) override { host_.run_for(d); }

  SimHost& host() { return host_; }
  // Host enclave time at the first and latest flagged read.
  Nanos first_read_enclave() const { return first_read_enclave_; }
  Nanos last_read_enclave() const { return last_read_enclave_; }
  // True time of the latest flagged read.
  Nanos last_read_time() const { return last_read_time_; }
  std::uint64_t seen_generation() const { return seen_gen_; }

 private:
  class Section final : public AtomicSection {
   public:
    explicit Section(SimHardware& hw) : hw_(hw) {}
    Token begin() override;
    void commit_early_hint() override;
    SectionOutcome commit(Token token) override;
    bool active() const override { return active_; }

   private:
    SimHardware& hw_;
    bool active_ = false;
    bool doomed_ = false;
    bool hinted_ = false;
    bool hint_clean_ = false;
    std::uint64_t start_gen_ = 0;
    Token open_ = 0;
    Token next_ = 1;
  };

  SimHost& host_;
  HardwareParams params_;
  Rng rng_;
  std::uint64_t seen_gen_;
  Section section_;
  bool any_read_ = false;
  Nanos first_read_enclave_{0};
  Nanos last_read_enclave_{0};
  Nanos last_read_time_{0};
};

}  // namespace tlease::sim
