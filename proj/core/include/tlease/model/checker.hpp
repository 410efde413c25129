#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tlease/model/model.hpp"

namespace tlease::model {

enum class Verdict : std::uint8_t { Ok, Counterexample, BudgetExceeded };
std::string_view to_string(Verdict v);

struct CheckOptions {
  std::uint64_t max_states = 10'000'000;
  double max_seconds = 0;  // 0 = no wall-clock limit
};

struct TraceStep {
  Label label;  // action that produced `state`; Tick for the initial state
  State state;
};

struct CheckResult {
  Verdict verdict = Verdict::Ok;
  std::string property;  // violated property, or the ones checked when Ok
  std::uint64_t states = 0;
  std::uint64_t transitions = 0;
  std::uint64_t frontier = 0;  // unexplored states when the budget ran out
  std::uint32_t depth = 0;
  double seconds = 0;
  std::vector<TraceStep> trace;  // shortest path to the violation, then its witness
};

// Breadth-first search for ValidLease and TypeOK. No fairness pruning.
CheckResult check_safety(const ModelConfig& cfg, const CheckOptions& opts = {});

// Bounded leads-to for both liveness properties over the pruned state graph.
// A violation is an antecedent state from which some run reaches the horizon
// or a dead end without the consequent ever holding.
CheckResult check_liveness(const ModelConfig& cfg, const CheckOptions& opts = {});

// One JSON object per line: the verdict, then one line per trace step.
void write_jsonl(std::ostream& out, const CheckResult& r, const ModelConfig& cfg);

}  // namespace tlease::model
