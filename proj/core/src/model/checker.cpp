#include "tlease/model/checker.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"

namespace tlease::model {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Ok: return "ok";
    case Verdict::Counterexample: return "counterexample";
    case Verdict::BudgetExceeded: return "budget_exceeded";
  }
  return "?";
}

namespace {

constexpr std::uint32_t kNone = UINT32_MAX;
constexpr const char* kSafetyProps = "TypeOK & ValidLease";
constexpr const char* kP1 = "HolderAsksForLeaseGranterGrantsLease";
constexpr const char* kP2 = "GranterGrantsLeaseHolderHasValidLease";

// Explicit-state store: encoded states, BFS parents and, optionally, the
// forward edge list in CSR form (BFS expands states in id order).
class Explorer {
 public:
  Explorer(const ModelConfig& cfg, Mode mode, const CheckOptions& opts, bool keep_edges)
      : cfg_(cfg), mode_(mode), opts_(opts), keep_edges_(keep_edges), start_(std::chrono::steady_clock::now()) {
    cfg_.validate();
  }

  // Visits states breadth first. `visit` returns false to stop early.
  template <class Visit>
  void run(Visit&& visit) {
    for (State& s : initial_states(cfg_, mode_)) add(std::move(s), kNone, Label{});
    std::size_t next = 0;
    while (next < ids_.size()) {
      if (budget_exhausted()) {
        result.verdict = Verdict::BudgetExceeded;
        result.frontier = ids_.size() - next;
        break;
      }
      const auto id = static_cast<std::uint32_t>(next++);
      const State s = decode(*ids_[id]);
      if (!visit(id, s)) break;
      if (keep_edges_) offsets_.push_back(static_cast<std::uint32_t>(edges_.size()));
      for (Transition& t : next_states(s, cfg_, mode_)) {
        ++result.transitions;
        if (std::string why = type_ok(t.next, cfg_); !why.empty())
          throw std::logic_error("TypeOK violated by " + describe(t.label) + ": " + why);
        const std::uint32_t to = add(std::move(t.next), id, t.label);
        if (keep_edges_) edges_.push_back(to);
      }
    }
    if (keep_edges_) offsets_.push_back(static_cast<std::uint32_t>(edges_.size()));
    result.states = ids_.size();
    result.seconds = elapsed();
  }

  std::vector<TraceStep> path_to(std::uint32_t id) const {
    std::vector<TraceStep> out;
    for (std::uint32_t cur = id; cur != kNone; cur = parent_[cur]) out.push_back({label_[cur], decode(*ids_[cur])});
    std::reverse(out.begin(), out.end());
    return out;
  }

  // Label of the transition from `from` to `to`.
  Label label_between(std::uint32_t from, std::uint32_t to) const {
    const State s = decode(*ids_[from]);
    const std::string& target = *ids_[to];
    for (const Transition& t : next_states(s, cfg_, mode_))
      if (encode(t.next) == target) return t.label;
    throw std::logic_error("no transition between stored states");
  }

  State state(std::uint32_t id) const { return decode(*ids_[id]); }
  std::size_t size() const { return ids_.size(); }
  std::uint32_t depth(std::uint32_t id) const { return depth_[id]; }
  bool fully_expanded() const { return offsets_.size() == ids_.size() + 1; }
  const std::vector<std::uint32_t>& offsets() const { return offsets_; }
  const std::vector<std::uint32_t>& edges() const { return edges_; }

  CheckResult result;

 private:
  std::uint32_t add(State s, std::uint32_t parent, Label label) {
    std::string key = encode(s);
    auto [it, fresh] = seen_.try_emplace(std::move(key), static_cast<std::uint32_t>(ids_.size()));
    if (fresh) {
      ids_.push_back(&it->first);
      parent_.push_back(parent);
      label_.push_back(label);
      const std::uint32_t d = parent == kNone ? 0 : depth_[parent] + 1;
      depth_.push_back(d);
      result.depth = std::max(result.depth, d);
    }
    return it->second;
  }

  bool budget_exhausted() const {
    if (ids_.size() > opts_.max_states) return true;
    return opts_.max_seconds > 0 && elapsed() > opts_.max_seconds;
  }

  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  ModelConfig cfg_;
  Mode mode_;
  CheckOptions opts_;
  bool keep_edges_;
  std::chrono::steady_clock::time_point start_;
  std::unordered_map<std::string, std::uint32_t> seen_;
  std::vector<const std::string*> ids_;
  std::vector<std::uint32_t> parent_;
  std::vector<Label> label_;
  std::vector<std::uint32_t> depth_;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> edges_;
};

}  // namespace

CheckResult check_safety(const ModelConfig& cfg, const CheckOptions& opts) {
  Explorer ex(cfg, Mode::Safety, opts, false);
  ex.result.property = kSafetyProps;
  std::uint32_t bad = kNone;
  ex.run([&](std::uint32_t id, const State& s) {
    if (std::string why = type_ok(s, cfg); !why.empty()) throw std::logic_error("TypeOK violated: " + why);
    if (valid_lease(s)) return true;
    bad = id;
    return false;
  });
  CheckResult r = ex.result;
  if (bad != kNone) {
    r.verdict = Verdict::Counterexample;
    r.property = "ValidLease";
    r.trace = ex.path_to(bad);
    r.frontier = 0;
  }
  return r;
}

CheckResult check_liveness(const ModelConfig& cfg, const CheckOptions& opts) {
  Explorer ex(cfg, Mode::Liveness, opts, true);
  ex.result.property = std::string(kP1) + " & " + kP2;
  ex.run([](std::uint32_t, const State&) { return true; });
  CheckResult r = ex.result;
  if (r.verdict == Verdict::BudgetExceeded || !ex.fully_expanded()) return r;

  const auto n = static_cast<std::uint32_t>(ex.size());
  const auto& off = ex.offsets();
  const auto& edges = ex.edges();

  // Reverse CSR.
  std::vector<std::uint32_t> roff(n + 1, 0);
  for (std::uint32_t to : edges) ++roff[to + 1];
  for (std::uint32_t i = 0; i < n; ++i) roff[i + 1] += roff[i];
  std::vector<std::uint32_t> redges(edges.size());
  {
    std::vector<std::uint32_t> fill(roff.begin(), roff.end() - 1);
    for (std::uint32_t from = 0; from < n; ++from)
      for (std::uint32_t k = off[from]; k < off[from + 1]; ++k) redges[fill[edges[k]]++] = from;
  }

  std::vector<State> states;
  states.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) states.push_back(ex.state(i));

  // A run ends without obligations left: horizon reached with time free to
  // pass and nothing fair to do, or no successor at all.
  std::vector<std::uint8_t> terminal(n, 0);
  for (std::uint32_t i = 0; i < n; ++i) {
    const State& s = states[i];
    terminal[i] = off[i] == off[i + 1] ||
                  (s.now == cfg.max_now && tick_allowed(s, cfg) && !fair_action_enabled(s, cfg, Mode::Liveness));
  }

  struct Prop {
    const char* name;
    bool (*antecedent)(const State&, const ModelConfig&);
    bool (*consequent)(const State&);
  };
  const Prop props[] = {{kP1, p1_antecedent, p1_consequent}, {kP2, p2_antecedent, p2_consequent}};

  for (const Prop& p : props) {
    // dist = steps to a terminal state along states that avoid the consequent.
    std::vector<std::uint32_t> dist(n, kNone);
    std::deque<std::uint32_t> work;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (terminal[i] && !p.consequent(states[i])) {
        dist[i] = 0;
        work.push_back(i);
      }
    }
    while (!work.empty()) {
      const std::uint32_t v = work.front();
      work.pop_front();
      for (std::uint32_t k = roff[v]; k < roff[v + 1]; ++k) {
        const std::uint32_t u = redges[k];
        if (dist[u] != kNone || p.consequent(states[u])) continue;
        dist[u] = dist[v] + 1;
        work.push_back(u);
      }
    }
    std::uint32_t bad = kNone;
    for (std::uint32_t i = 0; i < n && bad == kNone; ++i)
      if (dist[i] != kNone && p.antecedent(states[i], cfg)) bad = i;
    if (bad == kNone) continue;

    r.verdict = Verdict::Counterexample;
    r.property = p.name;
    r.trace = ex.path_to(bad);
    for (std::uint32_t cur = bad; dist[cur] > 0;) {
      std::uint32_t next = kNone;
      for (std::uint32_t k = off[cur]; k < off[cur + 1]; ++k)
        if (dist[edges[k]] == dist[cur] - 1) next = edges[k];
      r.trace.push_back({ex.label_between(cur, next), states[next]});
      cur = next;
    }
    return r;
  }
  return r;
}

void write_jsonl(std::ostream& out, const CheckResult& r, const ModelConfig& cfg) {
  nlohmann::ordered_json head;
  head["verdict"] = to_string(r.verdict);
  head["property"] = r.property;
  head["states"] = r.states;
  head["transitions"] = r.transitions;
  head["depth"] = r.depth;
  if (r.verdict == Verdict::BudgetExceeded) head["frontier"] = r.frontier;
  head["seconds"] = r.seconds;
  head["trace_length"] = r.trace.size();
  out << head.dump() << '\n';
  for (std::size_t i = 0; i < r.trace.size(); ++i) {
    nlohmann::ordered_json step;
    step["step"] = i;
    step["action"] = i == 0 ? "Init" : describe(r.trace[i].label);
    step["state"] = nlohmann::ordered_json::parse(to_json(r.trace[i].state, cfg));
    out << step.dump() << '\n';
  }
}

}  // namespace tlease::model
