#pragma once

#include <cstdint>

#include "tlease/trusted_time.hpp"

namespace tlease {

// Host-process stand-in for the enclave hardware. The counter is the
// monotonic clock in nanoseconds. Preemption (an involuntary context switch
// of the calling thread) plays the role of an enclave exit: it sets the
// read flag and aborts an open section. Voluntary sleeps do not, just as an
// enclave leaving through an ocall is not an asynchronous exit.
class RealHardware final : public HardwareView {
 public:
  RealHardware();

  CounterRead read_counter_with_flag() override;
  std::uint64_t peek_counter() override;
  std::uint64_t entropy_op(unsigned n) override;
  TickConversion nominal_conversion() const override { return {1, 1}; }
  AtomicSection& atomic_section() override { return section_; }
  void busy_work(Nanos d) override;

  static bool has_rdrand();

 private:
  class Section final : public AtomicSection {
   public:
    Token begin() override;
    void commit_early_hint() override;
    SectionOutcome commit(Token token) override;
    bool active() const override { return active_; }

   private:
    std::uint64_t start_switches_ = 0;
    bool active_ = false;
    bool hinted_ = false;
    bool hint_clean_ = false;
    Token next_ = 1;
    Token open_ = 0;
  };

  std::uint64_t last_switches_;
  Section section_;
};

// Involuntary context switches of the calling thread so far.
std::uint64_t involuntary_switches();

}  // namespace tlease
