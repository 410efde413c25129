#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <stdexcept>

#include "tlease/trusted_time.hpp"

namespace tlease::testing {

// Hardware whose counter, interrupt flag and entropy timings are set by the
// test. Reads return the current counter; an interrupt raised with
// interrupt() is reported by the next read and dooms an open section.
class ScriptedHardware final : public HardwareView {
 public:
  std::uint64_t ticks = 0;
  std::deque<std::uint64_t> entropy;  // popped per entropy_op; empty -> 8000
  bool section_supported = true;
  // Called from busy_work, after the counter moved; lets a test interrupt mid-section.
  std::function<void()> during_work;

  void advance(std::uint64_t n) { ticks += n; }
  void interrupt() {
    flag_ = true;
    if (section_.active()) section_.doomed = true;
  }

  CounterRead read_counter_with_flag() override {
    CounterRead r{ticks, flag_};
    flag_ = false;
    ++reads;
    return r;
  }
  std::uint64_t peek_counter() override { return ticks; }
  std::uint64_t entropy_op(unsigned) override {
    std::uint64_t v = 8000;
    if (!entropy.empty()) {
      v = entropy.front();
      entropy.pop_front();
    }
    ticks += v;
    if (interrupt_during_entropy > 0) {
      --interrupt_during_entropy;
      interrupt();
    }
    return v;
  }
  TickConversion nominal_conversion() const override { return {1, 1}; }
  AtomicSection& atomic_section() override {
    if (!section_supported) throw SectionUnavailable("scripted: no sections");
    return section_;
  }
  void busy_work(Nanos d) override {
    ticks += static_cast<std::uint64_t>(d.count());
    if (during_work) during_work();
  }

  unsigned interrupt_during_entropy = 0;
  std::uint64_t reads = 0;

 private:
  class Section final : public AtomicSection {
   public:
    Token begin() override {
      active_ = true;
      doomed = false;
      return ++next_;
    }
    void commit_early_hint() override {}
    SectionOutcome commit(Token) override {
      active_ = false;
      return doomed ? SectionOutcome::Aborted : SectionOutcome::Committed;
    }
    bool active() const override { return active_; }
    bool doomed = false;

   private:
    bool active_ = false;
    Token next_ = 0;
  };

  bool flag_ = false;
  Section section_;
};

}  // namespace tlease::testing
