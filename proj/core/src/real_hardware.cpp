#include "tlease/real_hardware.hpp"

#include <sys/resource.h>

#include <chrono>
#include <random>

#if defined(__x86_64__)
#include <cpuid.h>
#include <immintrin.h>
#endif

namespace tlease {

std::uint64_t involuntary_switches() {
  rusage u{};
  getrusage(RUSAGE_THREAD, &u);
  return static_cast<std::uint64_t>(u.ru_nivcsw);
}

namespace {

std::uint64_t steady_ns() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now().time_since_epoch()).count());
}

#if defined(__x86_64__)
__attribute__((target("rdrnd"))) void rdrand_burst(unsigned n) {
  unsigned long long v = 0;
  for (unsigned i = 0; i < n; ++i) {
    while (!_rdrand64_step(&v)) {
    }
  }
  asm volatile("" : : "r"(v));
}
#endif

}  // namespace

bool RealHardware::has_rdrand() {
#if defined(__x86_64__)
  unsigned a = 0, b = 0, c = 0, d = 0;
  if (!__get_cpuid(1, &a, &b, &c, &d)) return false;
  return (c & bit_RDRND) != 0;
#else
  return false;
#endif
}

RealHardware::RealHardware() : last_switches_(involuntary_switches()) {}

CounterRead RealHardware::read_counter_with_flag() {
  const std::uint64_t sw = involuntary_switches();
  CounterRead r;
  r.ticks = steady_ns();
  r.interrupted = sw != last_switches_;
  last_switches_ = sw;
  return r;
}

std::uint64_t RealHardware::peek_counter() { return steady_ns(); }

std::uint64_t RealHardware::entropy_op(unsigned n) {
  const std::uint64_t t0 = steady_ns();
#if defined(__x86_64__)
  if (has_rdrand()) {
    rdrand_burst(n);
    return steady_ns() - t0;
  }
#endif
  std::random_device rd;
  unsigned sink = 0;
  for (unsigned i = 0; i < n; ++i) sink ^= rd();
  asm volatile("" : : "r"(sink));
  return steady_ns() - t0;
}

void RealHardware::busy_work(Nanos d) {
  const std::uint64_t until = steady_ns() + static_cast<std::uint64_t>(d.count());
  while (steady_ns() < until) {
  }
}

AtomicSection::Token RealHardware::Section::begin() {
  start_switches_ = involuntary_switches();
  active_ = true;
  hinted_ = false;
  open_ = next_++;
  return open_;
}

void RealHardware::Section::commit_early_hint() {
  if (!active_ || hinted_) return;
  hinted_ = true;
  hint_clean_ = involuntary_switches() == start_switches_;
}

SectionOutcome RealHardware::Section::commit(Token token) {
  if (!active_ || token != open_) return SectionOutcome::Aborted;
  active_ = false;
  const bool clean = hinted_ ? hint_clean_ : involuntary_switches() == start_switches_;
  return clean ? SectionOutcome::Committed : SectionOutcome::Aborted;
}

}  // namespace tlease
