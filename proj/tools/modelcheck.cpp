// Explicit-state check of the lease model. Prints JSON lines: a verdict
// header, then the counterexample trace if there is one.
//
// Exit status: 0 ok, 1 counterexample, 2 budget exceeded, 64 bad usage.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tlease/model/checker.hpp"

int main(int argc, char** argv) {
  using namespace tlease::model;
  ModelConfig cfg;
  CheckOptions opts;
  std::string attacker = "off";
  bool liveness = false;
  std::string out_path;
  std::uint32_t no_fairness = 0;

  CLI::App app{"Explicit-state model checker for the trusted lease protocol"};
  app.add_option("--holders", cfg.holders, "number of lease holders")->capture_default_str();
  app.add_option("--maxnow", cfg.max_now, "time horizon in model ticks")->capture_default_str();
  app.add_option("--attacker", attacker, "frequency attacker")->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  app.add_option("--freq-drift", cfg.freq_drift, "attacker frequency drift, percent")->capture_default_str();
  app.add_option("--multiplier", cfg.multiplier, "granter term multiplier")->capture_default_str();
  app.add_flag("--liveness", liveness, "check the two bounded leads-to properties instead of safety");
  app.add_option("--lease-time", cfg.lease_time, "LeaseTime in ticks")->capture_default_str();
  app.add_option("--drift", cfg.drift, "Drift in ticks")->capture_default_str();
  app.add_option("--delivery-delay", cfg.msg_delivery_max_delay, "MsgDeliveryMaxDelay")->capture_default_str();
  app.add_option("--interrupted-max", cfg.interrupted_max_period, "InterruptedMaxPeriod")->capture_default_str();
  app.add_option("--not-interrupted-min", cfg.not_interrupted_min_period, "NotInterruptedMinPeriod")
      ->capture_default_str();
  auto* unfair = app.add_option("--unfair", no_fairness,
                                "bit mask of assumptions to drop: 1 delivery bound, 2 interrupted max, "
                                "4 not-interrupted min, 8 prompt hosts");
  unfair->check(CLI::Range(0u, 15u));
  app.add_flag("--ignore-staleness", cfg.ignore_request_staleness, "granter skips the request freshness check");
  bool no_reductions = false;
  app.add_flag("--no-reductions", no_reductions, "explore safety without state merging");
  app.add_flag("--symmetry", cfg.symmetry, "canonicalize interchangeable holders");
  app.add_option("--max-states", opts.max_states, "state budget")->capture_default_str();
  app.add_option("--max-seconds", opts.max_seconds, "wall clock budget, 0 = none")->capture_default_str();
  app.add_option("--out", out_path, "write the JSON lines here instead of stdout");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  }
  cfg.attacker = attacker == "on";
  cfg.safety_reductions = !no_reductions;
  cfg.fairness.delivery_bound = !(no_fairness & 1);
  cfg.fairness.interrupted_max = !(no_fairness & 2);
  cfg.fairness.not_interrupted_min = !(no_fairness & 4);
  cfg.fairness.prompt_hosts = !(no_fairness & 8);

  CheckResult r;
  try {
    r = liveness ? check_liveness(cfg, opts) : check_safety(cfg, opts);
  } catch (const std::invalid_argument& e) {
    std::cerr << "modelcheck: " << e.what() << '\n';
    return 64;
  }
  if (out_path.empty()) {
    write_jsonl(std::cout, r, cfg);
  } else {
    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "modelcheck: cannot write " << out_path << '\n';
      return 64;
    }
    write_jsonl(out, r, cfg);
    std::cerr << to_string(r.verdict) << ' ' << r.property << " states=" << r.states << '\n';
  }
  switch (r.verdict) {
    case Verdict::Ok: return 0;
    case Verdict::Counterexample: return 1;
    case Verdict::BudgetExceeded: return 2;
  }
  return 0;
}
