#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "tlease/model/model.hpp"
#include "tlease/sim/lockstep.hpp"

namespace tlease::model {

// Model configuration describing the same instance as a lockstep run.
ModelConfig model_config(const sim::LockstepParams& p);

// Abstraction of the implementation state into a normalized safety-mode
// model state.
State abstract_state(const sim::LockstepSim& sim, const ModelConfig& cfg);

struct ConformanceOptions {
  std::size_t traces = 1000;
  std::size_t max_steps = 300;
  std::uint64_t seed = 1;
  sim::LockstepParams params;  // seed is overridden per trace
};

struct Divergence {
  std::size_t trace = 0;
  std::size_t step = 0;
  std::string action;
  std::string reason;
  State before;
  State after;
};

struct ConformanceReport {
  std::size_t traces = 0;
  std::size_t steps = 0;
  std::size_t divergences = 0;
  std::optional<Divergence> first;
};

// Runs random lockstep traces and checks every implementation step against
// the model: it must be a model action (a Tick may be followed by the grant
// expiring), or a stutter when the step touches a message the abstraction
// has already discarded.
ConformanceReport simulate_conformance(const ConformanceOptions& opts);

std::string to_json(const Divergence& d, const ModelConfig& cfg);

}  // namespace tlease::model
