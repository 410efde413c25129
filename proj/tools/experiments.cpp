// experiments run <name> [--plan FILE] [--out DIR] [--seed S]
// experiments list
// experiments plan <name>       prints the default plan as JSON

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "tlease/exp/experiments.hpp"

int main(int argc, char** argv) {
  using namespace tlease::exp;
  CLI::App app{"Evaluation sweeps and case studies"};
  app.require_subcommand(1);

  std::string name, plan_path, out_dir = ".";
  std::uint64_t seed = 1;
  auto* run = app.add_subcommand("run", "run one experiment and write <out>/<name>.csv");
  run->add_option("name", name, "experiment")->required();
  run->add_option("--plan", plan_path, "JSON plan; defaults apply to anything it leaves out");
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--seed", seed, "base seed")->capture_default_str();

  auto* list = app.add_subcommand("list", "list experiment names");
  std::string plan_name;
  auto* show = app.add_subcommand("plan", "print an experiment's default plan");
  show->add_option("name", plan_name)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 64;
  }
  try {
    if (*list) {
      for (auto n : experiment_names()) std::cout << n << '\n';
      return 0;
    }
    if (*show) {
      std::cout << plan_to_json(default_plan(plan_name)) << '\n';
      return 0;
    }
    const ExperimentPlan plan = plan_path.empty() ? default_plan(name) : load_plan(plan_path, name);
    const Table table = run_experiment(plan, seed);
    std::filesystem::create_directories(out_dir);
    const auto path = std::filesystem::path(out_dir) / (plan.experiment + ".csv");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    table.write_csv(out);
    std::cerr << path.string() << ": " << table.size() << " rows\n";
    return 0;
  } catch (const ViolatedTrace& e) {
    std::cerr << "experiments: refusing metrics: " << e.what()
              << "\n(set \"allow_violations\": true in the plan to study violating runs)\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "experiments: " << e.what() << '\n';
    return 64;
  }
}
