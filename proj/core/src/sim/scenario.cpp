#include "tlease/sim/scenario.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <set>
#include <stdexcept>

namespace tlease::sim {

namespace pt = boost::property_tree;

std::string_view to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Interrupt: return "interrupt";
    case ActionKind::SetFreq: return "set_freq";
    case ActionKind::SetCounter: return "set_counter";
    case ActionKind::DelayMsg: return "delay_msg";
    case ActionKind::DropMsg: return "drop_msg";
  }
  return "?";
}

Nanos Scenario::effective_response_timeout() const {
  if (response_timeout > Nanos::zero()) return response_timeout;
  Nanos worst = network.max_delay;
  if (worst == Nanos::zero()) {
    worst = network.base_delay + 5 * network.jitter_mean;
    if (adversary.enabled) worst += adversary.max_extra_delay;
  }
  return std::max(2 * worst, Nanos(std::chrono::milliseconds(1)));
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("scenario: " + what);
}

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void Scenario::validate() const {
  lease.validate();
  freq.validate();
  require(holders >= 1, "holders.count must be >= 1");
  require(horizon > Nanos::zero(), "world.horizon must be positive");
  require(poll_interval > Nanos::zero() && granter_poll_interval > Nanos::zero(),
          "poll intervals must be positive");
  require(hardware.read_cost >= Nanos::zero(), "hardware.read_cost must be >= 0");
  require(hardware.entropy_low > 0 && hardware.entropy_low <= hardware.entropy_high,
          "hardware entropy range must be positive and ordered");
  require(probability(hardware.spurious_abort), "hardware.spurious_abort must be a probability");
  require(interrupts.holder_rate_hz >= 0 && interrupts.granter_rate_hz >= 0,
          "interrupt rates must be >= 0");
  require(interrupts.min_duration <= interrupts.max_duration, "interrupt durations must be ordered");
  require(probability(network.loss), "network.loss must be a probability");
  require(network.base_delay >= Nanos::zero() && network.jitter_mean >= Nanos::zero(),
          "network delays must be >= 0");
  require(adversary.freq_drift >= 0.0 && adversary.freq_drift < 1.0, "adversary.freq_drift must be in [0,1)");
  for (double p : {adversary.p_freq, adversary.p_counter, adversary.p_delay, adversary.p_drop})
    require(probability(p), "adversary probabilities must be in [0,1]");
  for (const Action& a : actions) {
    require(a.host <= holders, "action host index out of range");
    require(a.at >= Nanos::zero(), "action time must be >= 0");
  }
}

namespace {

// Reads typed keys and remembers which ones were used, so typos fail loudly.
class Reader {
 public:
  explicit Reader(const pt::ptree& root) : root_(root) {}

  template <typename T>
  void get(const std::string& section, const std::string& key, T& out) {
    const auto* sec = section_of(section);
    if (!sec) return;
    if (auto v = sec->get_child_optional(pt::ptree::path_type(key, '\0'))) {
      used_.insert(section + "." + key);
      try {
        out = v->get_value<T>();
      } catch (const pt::ptree_bad_data&) {
        throw std::invalid_argument("scenario: bad value for " + section + "." + key);
      }
    }
  }

  void duration(const std::string& section, const std::string& base, Nanos& out) {
    static const std::pair<const char*, std::int64_t> units[] = {
        {"_ns", 1}, {"_us", 1'000}, {"_ms", 1'000'000}, {"_s", 1'000'000'000}};
    int found = 0;
    for (const auto& [suffix, scale] : units) {
      double v = 0;
      bool present = false;
      const auto* sec = section_of(section);
      if (sec && sec->get_child_optional(pt::ptree::path_type(base + suffix, '\0'))) present = true;
      if (!present) continue;
      get(section, base + suffix, v);
      require(v >= 0, section + "." + base + suffix + " must be >= 0");
      out = Nanos(static_cast<std::int64_t>(v * static_cast<double>(scale) + 0.5));
      ++found;
    }
    require(found <= 1, section + "." + base + " given in more than one unit");
  }

  void check_all_used() const {
    for (const auto& [sec, tree] : root_) {
      for (const auto& [key, val] : tree) {
        (void)val;
        if (!used_.count(sec + "." + key)) throw std::invalid_argument("scenario: unknown key " + sec + "." + key);
      }
    }
  }

 private:
  const pt::ptree* section_of(const std::string& name) const {
    auto it = root_.find(name);
    return it == root_.not_found() ? nullptr : &it->second;
  }

  const pt::ptree& root_;
  std::set<std::string> used_;
};

MessageKind parse_kind(const std::string& s) {
  if (s == "ReqLease") return MessageKind::ReqLease;
  if (s == "Granted") return MessageKind::Granted;
  if (s == "NotGranted") return MessageKind::NotGranted;
  throw std::invalid_argument("scenario: unknown message kind " + s);
}

ActionKind parse_action(const std::string& s) {
  for (auto k : {ActionKind::Interrupt, ActionKind::SetFreq, ActionKind::SetCounter, ActionKind::DelayMsg,
                 ActionKind::DropMsg}) {
    if (s == to_string(k)) return k;
  }
  throw std::invalid_argument("scenario: unknown action kind " + s);
}

}  // namespace

Scenario parse_scenario(std::istream& in) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
  Reader r(root);
  Scenario s;

  r.get("world", "name", s.name);
  r.get("world", "seed", s.seed);
  r.duration("world", "horizon", s.horizon);
  r.duration("world", "poll_interval", s.poll_interval);
  r.duration("world", "granter_poll_interval", s.granter_poll_interval);

  r.duration("lease", "term", s.lease.lease_term);
  r.get("lease", "multiplier", s.lease.granter_multiplier);
  r.get("lease", "drift", s.lease.drift);
  r.get("lease", "renew_fraction", s.lease.renew_fraction);
  r.duration("lease", "response_timeout", s.response_timeout);
  r.duration("lease", "denied_backoff", s.denied_backoff);

  r.get("holders", "count", s.holders);
  r.get("holders", "shared_lease", s.shared_lease);

  r.duration("hardware", "read_cost", s.hardware.read_cost);
  r.get("hardware", "entropy_low", s.hardware.entropy_low);
  r.get("hardware", "entropy_high", s.hardware.entropy_high);
  r.duration("hardware", "interrupt_cost", s.hardware.interrupt_cost);
  r.get("hardware", "spurious_abort", s.hardware.spurious_abort);

  r.get("interrupts", "holder_rate_hz", s.interrupts.holder_rate_hz);
  r.get("interrupts", "granter_rate_hz", s.interrupts.granter_rate_hz);
  r.duration("interrupts", "min_duration", s.interrupts.min_duration);
  r.duration("interrupts", "max_duration", s.interrupts.max_duration);

  r.duration("network", "base_delay", s.network.base_delay);
  r.duration("network", "jitter_mean", s.network.jitter_mean);
  r.duration("network", "max_delay", s.network.max_delay);
  r.get("network", "loss", s.network.loss);
  r.get("network", "seal", s.network.seal);

  r.get("adversary", "enabled", s.adversary.enabled);
  r.get("adversary", "freq_drift", s.adversary.freq_drift);
  r.get("adversary", "p_freq", s.adversary.p_freq);
  r.get("adversary", "extremes_only", s.adversary.extremes_only);
  r.get("adversary", "p_counter", s.adversary.p_counter);
  r.duration("adversary", "counter_back", s.adversary.counter_back);
  r.duration("adversary", "counter_forward", s.adversary.counter_forward);
  r.get("adversary", "p_delay", s.adversary.p_delay);
  r.duration("adversary", "max_extra_delay", s.adversary.max_extra_delay);
  r.get("adversary", "p_drop", s.adversary.p_drop);
  r.get("adversary", "target_granter", s.adversary.target_granter);

  r.duration("workload", "submit_interval", s.workload.submit_interval);
  r.duration("workload", "submit_tail", s.workload.submit_tail);
  r.get("workload", "commit_hint", s.workload.commit_hint);

  r.get("timer", "verify_frequency", s.verify_frequency);
  r.get("timer", "detect_interrupts", s.detect_interrupts);
  r.get("timer", "ops", s.freq.ops_per_check);
  r.get("timer", "lower", s.freq.lower_bound);
  r.get("timer", "upper", s.freq.upper_bound);
  r.get("timer", "repeats", s.freq.repeats);

  for (const auto& [section, tree] : root) {
    (void)tree;
    if (section.rfind("action.", 0) != 0) continue;
    Action a;
    std::string kind = "interrupt";
    r.get(section, "kind", kind);
    a.kind = parse_action(kind);
    r.duration(section, "at", a.at);
    r.get(section, "host", a.host);
    r.duration(section, "duration", a.duration);
    r.get(section, "factor", a.factor);
    r.get(section, "value", a.value);
    r.duration(section, "until", a.until);
    r.duration(section, "extra", a.extra);
    std::string match_kind;
    r.get(section, "match_kind", match_kind);
    if (!match_kind.empty()) a.match_kind = parse_kind(match_kind);
    std::uint32_t holder = 0;
    bool has_holder = tree.get_child_optional(pt::ptree::path_type("match_holder", '\0')).has_value();
    r.get(section, "match_holder", holder);
    if (has_holder) a.match_holder = holder;
    s.actions.push_back(a);
  }

  r.check_all_used();
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("scenario: cannot open " + path);
  return parse_scenario(in);
}

}  // namespace tlease::sim
