#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdint>
#include <string>
#include <vector>

#include "tlease/real_hardware.hpp"

namespace tlease::tools {

inline std::atomic<bool> g_stop{false};

inline void install_stop_handlers() {
  struct sigaction sa {};
  sa.sa_handler = [](int) { g_stop.store(true); };
  sigemptyset(&sa.sa_mask);
  sigaction(SIGINT, &sa, nullptr);
  sigaction(SIGTERM, &sa, nullptr);
}

inline Nanos steady_now() {
  return std::chrono::duration_cast<Nanos>(std::chrono::steady_clock::now().time_since_epoch());
}

// Nonce counters start at the wall clock so a restarted process never reuses
// a nonce under the same key.
inline std::uint64_t first_nonce_counter() {
  return static_cast<std::uint64_t>(
      std::chrono::duration_cast<Nanos>(std::chrono::system_clock::now().time_since_epoch()).count());
}

// Frequency-check bounds for this machine: the spread of clean measurements
// widened by `slack` on both sides.
inline FreqCheckConfig calibrate_freq_check(RealHardware& hw, double slack = 0.5) {
  FreqCheckConfig cfg;
  std::vector<std::uint64_t> samples;
  for (int i = 0; i < 201; ++i) samples.push_back(hw.entropy_op(cfg.ops_per_check));
  std::sort(samples.begin(), samples.end());
  const double lo = static_cast<double>(samples[samples.size() / 20]);
  const double hi = static_cast<double>(samples[samples.size() - 1 - samples.size() / 20]);
  cfg.lower_bound = std::max<std::uint64_t>(1, static_cast<std::uint64_t>(lo * (1.0 - slack)));
  cfg.upper_bound = static_cast<std::uint64_t>(hi * (1.0 + slack)) + 1;
  cfg.repeats = 3;
  return cfg;
}

}  // namespace tlease::tools
