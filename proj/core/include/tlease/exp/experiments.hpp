#pragma once

#include <cstdint>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "tlease/exp/plan.hpp"
#include "tlease/sim/metrics.hpp"
#include "tlease/sim/trace.hpp"

namespace tlease::exp {

// Metrics were requested for a trace the checker rejects.
class ViolatedTrace : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// compute_metrics, refusing violated traces unless `allow_violations`.
sim::RunMetrics checked_metrics(const sim::Trace& trace, const sim::MetricsOptions& opts, bool allow_violations);

// Request rate of one holder whose lease is renewed every `tau_s` seconds of
// uninterrupted time and restarted by every Poisson interrupt at `rate_hz`.
double expected_request_rate(double rate_hz, double tau_s);
// max(1 / tau, rate): the two asymptotes of the above.
double envelope_request_rate(double rate_hz, double tau_s);

// Every row of every table starts with experiment, row, rep, seed, then one
// column per sweep axis and per parameter.
Table exp_check_frequency(const ExperimentPlan& plan, std::uint64_t seed);
Table exp_request_rate(const ExperimentPlan& plan, std::uint64_t seed);
Table exp_retries_and_losses(const ExperimentPlan& plan, std::uint64_t seed);
Table exp_under_accounting(const ExperimentPlan& plan, std::uint64_t seed);
Table exp_soak(const ExperimentPlan& plan, std::uint64_t seed);
Table case_farm_failure_detector(const ExperimentPlan& plan, std::uint64_t seed);
Table case_quorum_leases(const ExperimentPlan& plan, std::uint64_t seed);
Table case_consistent_cache(const ExperimentPlan& plan, std::uint64_t seed);

const std::vector<std::string_view>& experiment_names();
// Dispatches on plan.experiment.
Table run_experiment(const ExperimentPlan& plan, std::uint64_t seed);

namespace detail {

// Shared row bookkeeping for the experiment drivers.
class Rows {
 public:
  Rows(const ExperimentPlan& plan, std::vector<std::string> metrics);

  struct Point {
    std::size_t row = 0;
    std::uint32_t rep = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> values;  // axes and params
    double operator[](const std::string& key) const;
  };
  std::vector<Point> points(std::uint64_t seed) const;

  void add(const Point& p, const std::vector<double>& metrics);
  Table take() { return std::move(table_); }

 private:
  const ExperimentPlan& plan_;
  Table table_;
  std::size_t metric_count_;
};

}  // namespace detail

}  // namespace tlease::exp
