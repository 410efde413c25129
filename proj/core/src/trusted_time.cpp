#include "tlease/trusted_time.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "tlease/random.hpp"

namespace tlease {

Nanos TickConversion::to_nanos(std::int64_t ticks) const {
  __extension__ using Wide = __int128;
  const Wide v = static_cast<Wide>(ticks) * static_cast<Wide>(ns_per) / static_cast<Wide>(ticks_per);
  return Nanos(static_cast<std::int64_t>(v));
}

EpochAccount anchor_account(HardwareView& hw, TickConversion conversion, Epoch epoch) {
  EpochAccount account;
  account.last_ticks = hw.read_counter_with_flag().ticks;
  account.epoch = epoch;
  account.conversion = conversion;
  return account;
}

UpdateResult update(const EpochAccount& account, HardwareView& hw, AccountingMode mode) {
  const CounterRead read = hw.read_counter_with_flag();
  UpdateResult out{account, UpdateOutcome::Advanced, Nanos::zero()};

  if (mode == AccountingMode::Naive) {
    const auto delta = static_cast<std::int64_t>(read.ticks - account.last_ticks);
    out.elapsed = account.conversion.to_nanos(delta);
    out.account.accumulated += out.elapsed;
    out.account.last_ticks = read.ticks;
    return out;
  }

  if (read.interrupted) {
    // The partial interval since last_ticks straddles an interrupt and is
    // dropped; the epoch restarts at the fresh reading.
    out.account.last_ticks = read.ticks;
    out.account.epoch = account.epoch + 1;
    out.outcome = UpdateOutcome::InterruptDetected;
    return out;
  }
  if (read.ticks < account.last_ticks) {
    throw HardwareViolation("counter regressed without an interrupt");
  }
  out.elapsed = account.conversion.to_nanos(static_cast<std::int64_t>(read.ticks - account.last_ticks));
  out.account.accumulated += out.elapsed;
  out.account.last_ticks = read.ticks;
  return out;
}

void FreqCheckConfig::validate() const {
  if (ops_per_check < 1) throw std::invalid_argument("ops_per_check must be >= 1");
  if (lower_bound >= upper_bound) throw std::invalid_argument("lower_bound must be < upper_bound");
  if (repeats < 1) throw std::invalid_argument("repeats must be >= 1");
}

namespace {

template <typename T>
T median_of(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return (v[n / 2 - 1] + v[n / 2]) / 2;
}

}  // namespace

FreqCheckResult verify_frequency(HardwareView& hw, const FreqCheckConfig& cfg) {
  cfg.validate();
  FreqCheckResult result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<std::uint64_t> samples;
    samples.reserve(cfg.repeats);
    bool clean = true;
    for (unsigned i = 0; i < cfg.repeats && clean; ++i) {
      AtomicSection& section = hw.atomic_section();
      const auto token = section.begin();
      const std::uint64_t ticks = hw.entropy_op(cfg.ops_per_check);
      if (section.commit(token) == SectionOutcome::Aborted) {
        clean = false;
      } else {
        samples.push_back(ticks);
      }
    }
    if (!clean) {
      ++result.aborted_attempts;
      continue;
    }
    result.measured = median_of(std::move(samples));
    result.verdict = (result.measured >= cfg.lower_bound && result.measured <= cfg.upper_bound)
                         ? FreqVerdict::Pass
                         : FreqVerdict::Fail;
    return result;
  }
  result.verdict = FreqVerdict::Fail;
  result.measured = 0;
  return result;
}

double detection_probability(const FreqCheckConfig& cfg, double freq_factor,
                             const LatencySampler& latency, std::uint64_t samples) {
  cfg.validate();
  if (samples == 0) throw std::invalid_argument("samples must be positive");
  const double lo = static_cast<double>(cfg.lower_bound);
  const double hi = static_cast<double>(cfg.upper_bound);
  std::vector<double> draws(cfg.repeats);
  std::uint64_t detected = 0;
  for (std::uint64_t s = 0; s < samples; ++s) {
    for (auto& d : draws) d = latency() * freq_factor;
    const double observed = cfg.repeats == 1 ? draws[0] : median_of(draws);
    if (observed < lo || observed > hi) ++detected;
  }
  return static_cast<double>(detected) / static_cast<double>(samples);
}

double detection_probability_uniform(const FreqCheckConfig& cfg, double freq_factor, double lo,
                                     double hi, std::uint64_t samples, std::uint64_t seed) {
  Rng rng(seed);
  return detection_probability(cfg, freq_factor, [&] { return rng.uniform(lo, hi); }, samples);
}

double required_multiplier(double max_slowdown, double max_speedup) {
  if (!(max_slowdown >= 0.0 && max_slowdown < 1.0))
    throw std::invalid_argument("max_slowdown must be in [0, 1)");
  if (!(max_speedup >= 0.0 && max_speedup < 1.0))
    throw std::invalid_argument("max_speedup must be in [0, 1)");
  return (1.0 + max_speedup) / (1.0 - max_slowdown);
}

EscapeWindow escape_window(const FreqCheckConfig& cfg, double min_latency, double max_latency) {
  if (!(min_latency > 0.0 && min_latency <= max_latency))
    throw std::invalid_argument("latency range must be positive and ordered");
  return {static_cast<double>(cfg.lower_bound) / max_latency,
          static_cast<double>(cfg.upper_bound) / min_latency};
}

TickConversion calibrate_conversion(HardwareView& hw, const std::function<Nanos()>& wait) {
  const std::uint64_t t0 = hw.read_counter_with_flag().ticks;
  const Nanos passed = wait();
  const std::uint64_t t1 = hw.read_counter_with_flag().ticks;
  if (t1 <= t0 || passed <= Nanos::zero()) throw HardwareViolation("calibration saw no counter progress");
  TickConversion c{static_cast<std::uint64_t>(passed.count()), t1 - t0};
  const std::uint64_t g = std::gcd(c.ns_per, c.ticks_per);
  c.ns_per /= g;
  c.ticks_per /= g;
  return c;
}

}  // namespace tlease
