#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tlease/protocol.hpp"

namespace tlease::exp {

// A sweep over named axes plus scalar parameters. Units are part of the key
// (term_ms, delay_us, rate_hz, ...). Rows are the cartesian product of the
// axes in key order, repeated `repetitions` times with distinct seeds.
struct ExperimentPlan {
  std::string experiment;
  std::uint32_t repetitions = 1;
  Nanos horizon{std::chrono::seconds(1)};
  bool allow_violations = false;
  std::map<std::string, std::vector<double>> sweep;
  std::map<std::string, double> params;

  const std::vector<double>& axis(const std::string& name) const;
  double param(const std::string& name) const;
};

// Every experiment has a default plan; it also defines which keys a plan file
// may set. Throws std::invalid_argument for unknown experiments.
ExperimentPlan default_plan(std::string_view experiment);

// JSON object: {"experiment", "repetitions", "horizon_s", "allow_violations",
// "sweep": {axis: [values]}, "params": {name: value}}. Missing fields keep the
// experiment's defaults; unknown axes or params are rejected.
ExperimentPlan parse_plan(std::string_view json, std::string_view experiment = {});
ExperimentPlan load_plan(const std::string& path, std::string_view experiment = {});
std::string plan_to_json(const ExperimentPlan& plan);

// Each combination of axis values, in key order with the last axis varying fastest.
std::vector<std::map<std::string, double>> grid(const ExperimentPlan& plan);

// String-celled result table written as CSV.
class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  // Cells in column order; the count must match.
  void add_row(std::vector<std::string> cells);

  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t size() const { return rows_.size(); }
  const std::string& cell(std::size_t row, std::string_view column) const;
  double number(std::size_t row, std::string_view column) const;
  std::size_t column(std::string_view name) const;

  void write_csv(std::ostream& out) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<std::string>> rows_;
};

// Shortest round-trippable text for a double.
std::string fmt(double v);

}  // namespace tlease::exp
