#include "tlease/exp/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tlease/random.hpp"
#include "tlease/sim/world.hpp"

namespace tlease::exp {

using namespace std::chrono_literals;
using sim::RunMetrics;
using sim::Scenario;

namespace detail {

Rows::Rows(const ExperimentPlan& plan, std::vector<std::string> metrics)
    : plan_(plan), table_({}), metric_count_(metrics.size()) {
  std::vector<std::string> cols = {"experiment", "row", "rep", "seed"};
  for (const auto& [axis, values] : plan.sweep) cols.push_back(axis);
  for (const auto& [name, value] : plan.params) cols.push_back(name);
  for (auto& m : metrics) cols.push_back(std::move(m));
  table_ = Table(std::move(cols));
}

double Rows::Point::operator[](const std::string& key) const {
  auto it = values.find(key);
  if (it == values.end()) throw std::logic_error("experiment reads undeclared key '" + key + "'");
  return it->second;
}

std::vector<Rows::Point> Rows::points(std::uint64_t seed) const {
  std::vector<Point> out;
  std::size_t row = 0;
  for (const auto& combo : grid(plan_)) {
    for (std::uint32_t rep = 0; rep < plan_.repetitions; ++rep) {
      Point p;
      p.row = row;
      p.rep = rep;
      p.seed = mix_seed(mix_seed(seed, row), rep);
      p.values = plan_.params;
      for (const auto& [k, v] : combo) p.values[k] = v;
      out.push_back(std::move(p));
    }
    ++row;
  }
  return out;
}

void Rows::add(const Point& p, const std::vector<double>& metrics) {
  if (metrics.size() != metric_count_) throw std::logic_error("metric count mismatch");
  std::vector<std::string> cells = {plan_.experiment, std::to_string(p.row), std::to_string(p.rep),
                                    std::to_string(p.seed)};
  for (const auto& [axis, values] : plan_.sweep) cells.push_back(fmt(p[axis]));
  for (const auto& [name, value] : plan_.params) cells.push_back(fmt(p[name]));
  for (double m : metrics) cells.push_back(fmt(m));
  table_.add_row(std::move(cells));
}

}  // namespace detail

using detail::Rows;

sim::RunMetrics checked_metrics(const sim::Trace& trace, const sim::MetricsOptions& opts, bool allow_violations) {
  RunMetrics m = sim::compute_metrics(trace, opts);
  if (!m.safe && !allow_violations)
    throw ViolatedTrace(opts.name + " seed " + std::to_string(opts.seed) + ": trace violates the lease invariant (" +
                        std::to_string(m.violations) + " violations)");
  return m;
}

double expected_request_rate(double rate_hz, double tau_s) {
  if (rate_hz <= 0) return 1.0 / tau_s;
  return rate_hz / -std::expm1(-rate_hz * tau_s);
}

double envelope_request_rate(double rate_hz, double tau_s) { return std::max(1.0 / tau_s, rate_hz); }

namespace {

Nanos ms(double v) { return std::chrono::duration_cast<Nanos>(std::chrono::duration<double, std::milli>(v)); }
Nanos us(double v) { return std::chrono::duration_cast<Nanos>(std::chrono::duration<double, std::micro>(v)); }
double seconds(Nanos d) { return std::chrono::duration<double>(d).count(); }

// One holder on a local or delayed link, with the knobs every sweep shares.
Scenario single_holder(const ExperimentPlan& plan, const Rows::Point& p) {
  Scenario s;
  s.name = plan.experiment;
  s.seed = p.seed;
  s.horizon = plan.horizon;
  s.lease.lease_term = ms(p["term_ms"]);
  s.lease.granter_multiplier = p["multiplier"];
  s.lease.renew_fraction = p.values.count("renew_fraction") ? p["renew_fraction"] : 0.2;
  s.poll_interval = us(p["poll_us"]);
  s.granter_poll_interval = std::min(s.poll_interval, Nanos(100us));
  if (p.values.count("rate_hz")) s.interrupts.holder_rate_hz = p["rate_hz"];
  if (p.values.count("delay_us")) s.network.base_delay = us(p["delay_us"]);
  return s;
}

RunMetrics run(const ExperimentPlan& plan, const Scenario& s) {
  const sim::Trace t = sim::run_scenario(s);
  return checked_metrics(t, {s.name, s.seed, s.horizon, s.hardware.read_cost}, plan.allow_violations);
}

double lost_leases(const RunMetrics& m) { return static_cast<double>(m.grants_cleared + m.holder_lapses); }

}  // namespace

Table exp_check_frequency(const ExperimentPlan& plan, std::uint64_t seed) {
  Rows rows(plan, {"check_rate_hz", "usable_fraction", "renewals", "request_rate_hz", "lost_leases", "safe"});
  for (const auto& p : rows.points(seed)) {
    Scenario s = single_holder(plan, p);
    if (p["delay_us"] > 0) s.network.jitter_mean = us(p["jitter_us"]);
    const RunMetrics m = run(plan, s);
    rows.add(p, {m.check_rate_hz, m.usable_fraction, static_cast<double>(m.renewals), m.request_rate_hz,
                 lost_leases(m), m.safe ? 1.0 : 0.0});
  }
  return rows.take();
}

Table exp_request_rate(const ExperimentPlan& plan, std::uint64_t seed) {
  Rows rows(plan, {"request_rate_hz", "message_rate_hz", "interrupt_rate_hz", "expected_hz", "envelope_hz",
                   "envelope_error", "within_tolerance", "r_tau", "safe"});
  for (const auto& p : rows.points(seed)) {
    const Scenario s = single_holder(plan, p);
    const RunMetrics m = run(plan, s);
    const double tau = seconds(s.lease.holder_term()) * (1.0 - s.lease.renew_fraction);
    const double expected = expected_request_rate(m.interrupt_rate_hz, tau);
    const double envelope = envelope_request_rate(m.interrupt_rate_hz, tau);
    const double err = std::abs(m.request_rate_hz - envelope) / envelope;
    rows.add(p, {m.request_rate_hz, m.message_rate_hz, m.interrupt_rate_hz, expected, envelope, err,
                 err <= p["tolerance"] ? 1.0 : 0.0, m.interrupt_rate_hz * tau, m.safe ? 1.0 : 0.0});
  }
  return rows.take();
}

Table exp_retries_and_losses(const ExperimentPlan& plan, std::uint64_t seed) {
  Rows rows(plan, {"renewals", "retries", "retries_per_renewal", "retries_per_renewal_upper", "grants_cleared",
                   "holder_lapses", "lost_leases_per_s", "interrupt_rate_hz", "safe"});
  for (const auto& p : rows.points(seed)) {
    Scenario s = single_holder(plan, p);
    if (p["timer"] != 0) s.hardware.read_cost = sim::calibration::kSlowTimerRead;
    const RunMetrics m = run(plan, s);
    // With no retry observed, report the 95% one-sided bound 3 / N instead of
    // zero. Retries without a single completed renewal are unbounded.
    const double n = static_cast<double>(m.renewals);
    const double inf = std::numeric_limits<double>::infinity();
    const double per = n > 0 ? m.retries_per_renewal : m.retries > 0 ? inf : 0.0;
    const double upper = m.retries > 0 ? per : n > 0 ? 3.0 / n : inf;
    rows.add(p, {n, static_cast<double>(m.retries), per, upper,
                 static_cast<double>(m.grants_cleared), static_cast<double>(m.holder_lapses),
                 lost_leases(m) / m.horizon_s, m.interrupt_rate_hz, m.safe ? 1.0 : 0.0});
  }
  return rows.take();
}

Table exp_under_accounting(const ExperimentPlan& plan, std::uint64_t seed) {
  Rows rows(plan, {"under_accounting", "envelope", "interrupt_rate_hz", "loop_us", "within_envelope", "safe"});
  for (const auto& p : rows.points(seed)) {
    Scenario s = single_holder(plan, p);
    s.lease.renew_fraction = 0.2;
    const RunMetrics m = run(plan, s);
    // Each interrupt discards at most one loop iteration of verified time.
    const double loop = seconds(s.poll_interval + s.hardware.read_cost);
    const double envelope = m.interrupt_rate_hz * loop;
    rows.add(p, {m.under_accounting, envelope, m.interrupt_rate_hz, loop * 1e6, m.under_accounting <= envelope ? 1.0 : 0.0,
                 m.safe ? 1.0 : 0.0});
  }
  return rows.take();
}

Table exp_soak(const ExperimentPlan& plan, std::uint64_t seed) {
  Rows rows(plan, {"renewals", "grants_cleared", "holder_lapses", "lost_leases", "usable_fraction", "safe"});
  for (const auto& p : rows.points(seed)) {
    const Scenario s = single_holder(plan, p);
    const RunMetrics m = run(plan, s);
    rows.add(p, {static_cast<double>(m.renewals), static_cast<double>(m.grants_cleared),
                 static_cast<double>(m.holder_lapses), lost_leases(m), m.usable_fraction, m.safe ? 1.0 : 0.0});
  }
  return rows.take();
}

const std::vector<std::string_view>& experiment_names() {
  static const std::vector<std::string_view> names = {
      "check_frequency", "request_rate",  "retries_and_losses", "under_accounting",
      "soak",            "farm",          "quorum_leases",      "consistent_cache",
  };
  return names;
}

Table run_experiment(const ExperimentPlan& plan, std::uint64_t seed) {
  const std::string& n = plan.experiment;
  if (n == "check_frequency") return exp_check_frequency(plan, seed);
  if (n == "request_rate") return exp_request_rate(plan, seed);
  if (n == "retries_and_losses") return exp_retries_and_losses(plan, seed);
  if (n == "under_accounting") return exp_under_accounting(plan, seed);
  if (n == "soak") return exp_soak(plan, seed);
  if (n == "farm") return case_farm_failure_detector(plan, seed);
  if (n == "quorum_leases") return case_quorum_leases(plan, seed);
  if (n == "consistent_cache") return case_consistent_cache(plan, seed);
  throw std::invalid_argument("unknown experiment '" + n + "'");
}

}  // namespace tlease::exp
