// tlease-sim run SCENARIO [--seed S] [--trace FILE] [--metrics FILE]
// tlease-sim check TRACE
// tlease-sim metrics TRACE [--horizon-ms T]
// tlease-sim conformance [--traces N] [--holders H] [--attacker] [--mutate]
//
// check exits 1 when the trace violates the lease invariant.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tlease/model/conformance.hpp"
#include "tlease/sim/metrics.hpp"
#include "tlease/sim/world.hpp"

namespace {

tlease::sim::Trace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return tlease::sim::read_jsonl(in);
}

tlease::Nanos last_time(const tlease::sim::Trace& t) {
  tlease::Nanos end{0};
  for (const auto& e : t.events) end = std::max(end, e.time);
  return end;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace tlease;
  using namespace tlease::sim;
  CLI::App app{"Deterministic adversarial simulator"};
  app.require_subcommand(1);

  std::string scenario_path, trace_out, metrics_out;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "run a scenario file");
  run->add_option("scenario", scenario_path)->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("--trace", trace_out, "JSON-lines trace (default: stdout)");
  run->add_option("--metrics", metrics_out, "metrics CSV (default: stderr)");

  std::string trace_in;
  auto* check = app.add_subcommand("check", "check a trace against the lease invariant");
  check->add_option("trace", trace_in)->required()->check(CLI::ExistingFile);

  double horizon_ms = 0;
  auto* metrics = app.add_subcommand("metrics", "metrics CSV for a trace");
  metrics->add_option("trace", trace_in)->required()->check(CLI::ExistingFile);
  metrics->add_option("--horizon-ms", horizon_ms, "run length (default: last event)");

  model::ConformanceOptions conf;
  bool mutate = false;
  auto* conformance = app.add_subcommand("conformance", "replay lockstep runs through the model");
  conformance->add_option("--traces", conf.traces)->capture_default_str();
  conformance->add_option("--steps", conf.max_steps)->capture_default_str();
  conformance->add_option("--seed", conf.seed)->capture_default_str();
  conformance->add_option("--holders", conf.params.holders)->capture_default_str();
  conformance->add_option("--maxnow", conf.params.max_now)->capture_default_str();
  conformance->add_option("--multiplier", conf.params.multiplier)->capture_default_str();
  conformance->add_flag("--attacker", conf.params.attacker);
  conformance->add_flag("--mutate", mutate, "holder skips the epoch increment on resume");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  }
  try {
    if (*run) {
      Scenario s = load_scenario(scenario_path);
      if (seed) s.seed = *seed;
      const Trace t = run_scenario(s);
      if (trace_out.empty()) {
        write_jsonl(std::cout, t);
      } else {
        std::ofstream out(trace_out);
        write_jsonl(out, t);
      }
      const RunMetrics m = compute_metrics(t, {s.name, s.seed, s.horizon, s.hardware.read_cost});
      std::ofstream file;
      if (!metrics_out.empty()) file.open(metrics_out);
      std::ostream& mo = metrics_out.empty() ? std::cerr : file;
      write_csv_header(mo);
      write_csv_row(mo, m);
      return m.safe ? 0 : 1;
    }
    if (*check) {
      const TraceVerdict v = check_trace(read_trace(trace_in));
      if (v.safe) {
        std::cout << "Safe effects=" << v.effects << '\n';
        return 0;
      }
      std::cout << "ViolationAt " << *v.violation_index << " t=" << v.violation_time.count() << "ns " << v.reason
                << " (violations=" << v.violations << ", uncovered effects=" << v.uncovered_effects << ")\n";
      return 1;
    }
    if (*metrics) {
      const Trace t = read_trace(trace_in);
      const Nanos horizon = horizon_ms > 0 ? std::chrono::duration_cast<Nanos>(
                                                 std::chrono::duration<double, std::milli>(horizon_ms))
                                           : last_time(t);
      write_csv_header(std::cout);
      write_csv_row(std::cout, compute_metrics(t, {trace_in, 0, horizon, Nanos(30)}));
      return 0;
    }
    if (*conformance) {
      conf.params.skip_epoch_increment = mutate;
      const model::ConformanceReport r = model::simulate_conformance(conf);
      std::cout << "traces=" << r.traces << " steps=" << r.steps << " divergences=" << r.divergences << '\n';
      if (r.first) std::cout << model::to_json(*r.first, model::model_config(conf.params)) << '\n';
      return r.divergences == 0 ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "tlease-sim: " << e.what() << '\n';
    return 64;
  }
  return 0;
}
