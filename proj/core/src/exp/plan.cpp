#include "tlease/exp/plan.hpp"

#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace tlease::exp {

using namespace std::chrono_literals;

const std::vector<double>& ExperimentPlan::axis(const std::string& name) const {
  auto it = sweep.find(name);
  if (it == sweep.end()) throw std::invalid_argument(experiment + ": no sweep axis '" + name + "'");
  return it->second;
}

double ExperimentPlan::param(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw std::invalid_argument(experiment + ": no parameter '" + name + "'");
  return it->second;
}

ExperimentPlan default_plan(std::string_view experiment) {
  ExperimentPlan p;
  p.experiment = std::string(experiment);
  if (experiment == "check_frequency") {
    p.horizon = 2s;
    p.sweep["term_ms"] = {1, 2, 5, 10, 12.5, 25, 50, 100, 200};
    p.sweep["delay_us"] = {0, 1000};
    p.params = {{"poll_us", 10}, {"jitter_us", 20}, {"renew_fraction", 0.2}, {"multiplier", 2}};
  } else if (experiment == "request_rate") {
    p.horizon = 4s;
    p.sweep["rate_hz"] = {0, 1, 100, 250, 1000};
    p.sweep["term_ms"] = {1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
    p.params = {{"poll_us", 50}, {"renew_fraction", 0.2}, {"multiplier", 2}, {"tolerance", 0.2}};
  } else if (experiment == "retries_and_losses") {
    p.horizon = 60s;
    p.sweep["timer"] = {0, 1};  // 0 = fast counter, 1 = slow (TPM-class) timer
    p.sweep["term_ms"] = {1, 100, 1000, 5000};
    p.sweep["delay_us"] = {0};
    p.params = {{"rate_hz", 1.54}, {"poll_us", 100}, {"renew_fraction", 0.2}, {"multiplier", 2}};
  } else if (experiment == "under_accounting") {
    p.horizon = 2s;
    p.sweep["rate_hz"] = {100, 250, 1000};
    p.params = {{"term_ms", 100}, {"poll_us", 10}, {"multiplier", 2}};
  } else if (experiment == "soak") {
    p.horizon = 600s;
    p.sweep["term_ms"] = {100};
    p.params = {{"rate_hz", 100}, {"poll_us", 1000}, {"renew_fraction", 0.2}, {"multiplier", 2}};
  } else if (experiment == "farm") {
    p.horizon = 600s;
    p.sweep["term_ms"] = {5, 10, 20, 50, 100};
    p.sweep["delay_us"] = {0, 1000};
    p.sweep["rate_hz"] = {100, 1000};
    p.sweep["detect"] = {0, 1};
    p.params = {{"holders", 4}, {"renew_fraction", 0.8}, {"multiplier", 2}, {"poll_us", 500},
                {"tail_ms", 20}, {"tail_share", 0.001}, {"attack", 0}};
  } else if (experiment == "quorum_leases") {
    p.horizon = 60s;
    p.sweep["term_ms"] = {5, 10, 20, 50, 100, 200, 400};
    p.sweep["detect"] = {0, 1};
    p.params = {{"nodes", 5}, {"rate_hz", 1}, {"delay_us", 500}, {"renew_fraction", 0.2},
                {"multiplier", 2}, {"poll_us", 500}, {"crash_rate_hz", 0.2}, {"crash_ms", 200}};
  } else if (experiment == "consistent_cache") {
    p.horizon = 20s;
    p.sweep["write_share"] = {0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0};
    p.params = {{"term_ms", 50}, {"op_interval_ms", 5}, {"rate_hz", 100}, {"delay_us", 200},
                {"renew_fraction", 0.2}, {"multiplier", 2}, {"poll_us", 500}, {"adversary", 1}};
  } else {
    throw std::invalid_argument("unknown experiment '" + std::string(experiment) + "'");
  }
  return p;
}

ExperimentPlan parse_plan(std::string_view text, std::string_view experiment) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("plan is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw std::invalid_argument("plan must be a JSON object");
  std::string name(experiment);
  if (j.contains("experiment")) {
    const auto named = j["experiment"].get<std::string>();
    if (!name.empty() && named != name)
      throw std::invalid_argument("plan is for '" + named + "', not '" + name + "'");
    name = named;
  }
  if (name.empty()) throw std::invalid_argument("plan names no experiment");
  ExperimentPlan p = default_plan(name);
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "experiment") continue;
      if (key == "repetitions") {
        p.repetitions = value.get<std::uint32_t>();
      } else if (key == "horizon_s") {
        p.horizon = std::chrono::duration_cast<Nanos>(std::chrono::duration<double>(value.get<double>()));
      } else if (key == "allow_violations") {
        p.allow_violations = value.get<bool>();
      } else if (key == "sweep") {
        for (const auto& [axis, values] : value.items()) {
          if (!p.sweep.count(axis)) throw std::invalid_argument(name + ": unknown sweep axis '" + axis + "'");
          p.sweep[axis] = values.get<std::vector<double>>();
          if (p.sweep[axis].empty()) throw std::invalid_argument(name + ": sweep axis '" + axis + "' is empty");
        }
      } else if (key == "params") {
        for (const auto& [param, v] : value.items()) {
          if (!p.params.count(param)) throw std::invalid_argument(name + ": unknown parameter '" + param + "'");
          p.params[param] = v.get<double>();
        }
      } else {
        throw std::invalid_argument("unknown plan field '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("plan field has the wrong type: ") + e.what());
  }
  if (p.repetitions == 0) throw std::invalid_argument("repetitions must be >= 1");
  if (p.horizon <= Nanos::zero()) throw std::invalid_argument("horizon_s must be positive");
  return p;
}

ExperimentPlan load_plan(const std::string& path, std::string_view experiment) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open plan file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str(), experiment);
}

std::string plan_to_json(const ExperimentPlan& p) {
  nlohmann::ordered_json j;
  j["experiment"] = p.experiment;
  j["repetitions"] = p.repetitions;
  j["horizon_s"] = std::chrono::duration<double>(p.horizon).count();
  j["allow_violations"] = p.allow_violations;
  j["sweep"] = p.sweep;
  j["params"] = p.params;
  return j.dump(2);
}

std::vector<std::map<std::string, double>> grid(const ExperimentPlan& plan) {
  std::vector<std::map<std::string, double>> out{{}};
  for (const auto& [axis, values] : plan.sweep) {
    std::vector<std::map<std::string, double>> next;
    for (const auto& partial : out) {
      for (double v : values) {
        auto row = partial;
        row[axis] = v;
        next.push_back(std::move(row));
      }
    }
    out = std::move(next);
  }
  return out;
}

void Table::add_row(std::vector<std::string> cells) {
  if (cells.size() != columns_.size())
    throw std::logic_error("row has " + std::to_string(cells.size()) + " cells, table has " +
                           std::to_string(columns_.size()) + " columns");
  rows_.push_back(std::move(cells));
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i)
    if (columns_[i] == name) return i;
  throw std::out_of_range("no column '" + std::string(name) + "'");
}

const std::string& Table::cell(std::size_t row, std::string_view name) const { return rows_.at(row)[column(name)]; }

double Table::number(std::size_t row, std::string_view name) const {
  const std::string& s = cell(row, name);
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw std::invalid_argument("column '" + std::string(name) + "' is not numeric: " + s);
  return v;
}

void Table::write_csv(std::ostream& out) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
}

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

}  // namespace tlease::exp
