#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "tlease/model/checker.hpp"
#include "tlease/model/conformance.hpp"
#include "tlease/model/model.hpp"

using namespace tlease::model;

namespace {

std::set<Act> acts(const std::vector<Transition>& ts) {
  std::set<Act> out;
  for (const auto& t : ts) out.insert(t.label.act);
  return out;
}

const Transition* find(const std::vector<Transition>& ts, Act a) {
  for (const auto& t : ts)
    if (t.label.act == a) return &t;
  return nullptr;
}

ModelConfig small() {
  ModelConfig c;
  c.max_now = 8;
  return c;
}

}  // namespace

TEST(Model, InitialState) {
  const auto init = initial_states(small(), Mode::Safety);
  ASSERT_EQ(init.size(), 1u);
  const State& s = init[0];
  EXPECT_EQ(s.now, 0);
  ASSERT_EQ(s.lh.size(), 1u);
  EXPECT_EQ(s.lh[0].phase, LH::Created);
  EXPECT_EQ(s.lh[0].epoch, 1);
  EXPECT_EQ(s.lh[0].expire, kInf);
  EXPECT_FALSE(s.g.granted);
  EXPECT_TRUE(s.msgs.empty());
  EXPECT_TRUE(type_ok(s, small()).empty());
  EXPECT_TRUE(valid_lease(s));
}

TEST(Model, InitialGuards) {
  const auto next = next_states(initial_states(small(), Mode::Safety)[0], small(), Mode::Safety);
  const auto a = acts(next);
  EXPECT_TRUE(a.count(Act::LHReqLeaseFresh));
  EXPECT_TRUE(a.count(Act::LHEnclaveInterrupt));
  EXPECT_TRUE(a.count(Act::GEnclaveInterrupt));
  EXPECT_FALSE(a.count(Act::LHReqLeaseToExtend));
  EXPECT_FALSE(a.count(Act::LHReceive));
  EXPECT_FALSE(a.count(Act::GProcessRequest));
  EXPECT_FALSE(a.count(Act::AChangeFreq));
  EXPECT_FALSE(a.count(Act::LHEnclaveResume));
}

TEST(Model, RequestThenGrant) {
  const ModelConfig cfg = small();
  State s = initial_states(cfg, Mode::Safety)[0];
  s = find(next_states(s, cfg, Mode::Safety), Act::LHReqLeaseFresh)->next;
  EXPECT_EQ(s.lh[0].phase, LH::Pending);
  EXPECT_EQ(s.lh[0].expire, cfg.holder_term());
  ASSERT_EQ(s.msgs.size(), 1u);
  EXPECT_EQ(s.msgs[0].type, MsgType::ReqLease);
  const auto after_request = next_states(s, cfg, Mode::Safety);
  const Transition* proc = find(after_request, Act::GProcessRequest);
  ASSERT_TRUE(proc);
  s = proc->next;
  EXPECT_TRUE(s.g.granted);
  EXPECT_EQ(s.g.expire, cfg.granter_term());
  s = find(next_states(s, cfg, Mode::Safety), Act::LHReceive)->next;
  EXPECT_EQ(s.lh[0].phase, LH::ValidLease);
  EXPECT_TRUE(valid_lease(s));
}

TEST(Model, AttackerChangesFrequencyOnlyWhileInterrupted) {
  ModelConfig cfg = small();
  cfg.attacker = true;
  State s = initial_states(cfg, Mode::Safety)[0];
  EXPECT_FALSE(find(next_states(s, cfg, Mode::Safety), Act::AChangeFreq));
  s = find(next_states(s, cfg, Mode::Safety), Act::LHEnclaveInterrupt)->next;
  std::set<int> freqs;
  for (const auto& t : next_states(s, cfg, Mode::Safety)) {
    if (t.label.act != Act::AChangeFreq) continue;
    EXPECT_EQ(t.next.lh[0].freq, t.label.arg);
    freqs.insert(t.next.lh[0].freq);
  }
  EXPECT_EQ(freqs, (std::set<int>{0, 2}));
  EXPECT_EQ(cfg.freq_percent(0), 50);
  EXPECT_EQ(cfg.freq_percent(2), 150);
  cfg.attacker = false;
  EXPECT_FALSE(find(next_states(s, cfg, Mode::Safety), Act::AChangeFreq));
}

// Every reachable state is well typed, normalized and survives encoding.
TEST(Model, ReachableStatesAreWellFormed) {
  for (bool attacker : {false, true}) {
    ModelConfig cfg = small();
    cfg.holders = 2;
    cfg.max_now = 5;
    cfg.attacker = attacker;
    cfg.multiplier = 3;
    for (Mode mode : {Mode::Safety, Mode::Liveness}) {
      std::vector<State> frontier = initial_states(cfg, mode);
      std::unordered_set<std::string> seen;
      for (const auto& s : frontier) seen.insert(encode(s));
      std::size_t explored = 0;
      while (!frontier.empty() && explored < 50'000) {
        const State s = frontier.back();
        frontier.pop_back();
        ++explored;
        ASSERT_EQ(type_ok(s, cfg), "");
        ASSERT_TRUE(valid_lease(s)) << to_json(s, cfg);
        ASSERT_EQ(decode(encode(s)), s);
        State n = s;
        normalize(n, cfg, mode);
        ASSERT_EQ(n, s);
        for (auto& t : next_states(s, cfg, mode))
          if (seen.insert(encode(t.next)).second) frontier.push_back(std::move(t.next));
      }
      EXPECT_GT(explored, 1000u);
    }
  }
}

TEST(Model, ConfigTerms) {
  ModelConfig c;
  c.lease_time = 4;
  c.drift = 1;
  c.multiplier = 3;
  EXPECT_EQ(c.holder_term(), 300);
  EXPECT_EQ(c.granter_term(), 1500);
  c.multiplier = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.multiplier = 1;
  c.drift = 5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

// The safety reductions and symmetry only shrink the search.
TEST(Checker, ReductionsPreserveVerdicts) {
  struct Case {
    bool attacker;
    std::uint32_t mult;
    Verdict expected;
  };
  for (const Case& k : {Case{false, 1, Verdict::Ok}, Case{true, 1, Verdict::Counterexample},
                        Case{true, 3, Verdict::Ok}}) {
    ModelConfig cfg;
    cfg.max_now = k.mult == 1 ? 6 : 4;
    cfg.attacker = k.attacker;
    cfg.multiplier = k.mult;
    cfg.safety_reductions = false;
    const CheckResult plain = check_safety(cfg);
    cfg.safety_reductions = true;
    const CheckResult reduced = check_safety(cfg);
    EXPECT_EQ(plain.verdict, k.expected);
    EXPECT_EQ(reduced.verdict, k.expected);
    EXPECT_LE(reduced.states, plain.states);
    if (k.expected == Verdict::Counterexample) EXPECT_EQ(reduced.property, "ValidLease");
  }
  ModelConfig two;
  two.holders = 2;
  two.max_now = 3;
  const CheckResult a = check_safety(two);
  two.symmetry = true;
  const CheckResult b = check_safety(two);
  EXPECT_EQ(a.verdict, Verdict::Ok);
  EXPECT_EQ(b.verdict, Verdict::Ok);
  EXPECT_LT(b.states, a.states);
}

TEST(Checker, BudgetIsReported) {
  ModelConfig cfg;
  const CheckResult r = check_safety(cfg, {100, 0});
  EXPECT_EQ(r.verdict, Verdict::BudgetExceeded);
  EXPECT_GT(r.frontier, 0u);
}

// Extending on a stale request only lengthens the granter's record, and the
// holder drops the reply because it no longer matches its pending request.
// The freshness check is not what keeps the invariant.
TEST(Checker, StaleExtensionIsStillSafe) {
  ModelConfig cfg;
  cfg.ignore_request_staleness = true;
  cfg.max_now = 6;
  EXPECT_EQ(check_safety(cfg).verdict, Verdict::Ok);
  cfg.attacker = true;
  cfg.multiplier = 3;
  cfg.max_now = 4;
  EXPECT_EQ(check_safety(cfg).verdict, Verdict::Ok);
}

TEST(Liveness, HoldsUnderTheFairnessAssumptions) {
  ModelConfig cfg = small();
  EXPECT_EQ(check_liveness(cfg).verdict, Verdict::Ok);
}

TEST(Liveness, UnboundedDeliveryBreaksIt) {
  ModelConfig cfg = small();
  cfg.fairness.delivery_bound = false;
  const CheckResult r = check_liveness(cfg);
  EXPECT_EQ(r.verdict, Verdict::Counterexample);
  EXPECT_FALSE(r.trace.empty());
}

TEST(Liveness, UnboundedInterruptsBreakIt) {
  ModelConfig cfg = small();
  cfg.fairness.interrupted_max = false;
  EXPECT_EQ(check_liveness(cfg).verdict, Verdict::Counterexample);
}

// The stored counterexample is a real path of the current model.
TEST(Checker, FixtureTraceReplays) {
  std::ifstream in(std::string(TLEASE_FIXTURE_DIR) + "/attacker_multiplier1.jsonl");
  ASSERT_TRUE(in);
  ModelConfig cfg;
  cfg.attacker = true;
  cfg.multiplier = 1;
  std::string line;
  std::getline(in, line);
  const auto header = nlohmann::json::parse(line);
  EXPECT_EQ(header["verdict"], "counterexample");
  EXPECT_EQ(header["property"], "ValidLease");
  std::getline(in, line);
  State s = initial_states(cfg, Mode::Safety)[0];
  EXPECT_EQ(nlohmann::json::parse(to_json(s, cfg)), nlohmann::json::parse(line)["state"]);
  std::size_t steps = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    const auto want = j["state"];
    bool matched = false;
    for (const auto& t : next_states(s, cfg, Mode::Safety)) {
      if (describe(t.label) != j["action"].get<std::string>()) continue;
      if (nlohmann::json::parse(to_json(t.next, cfg)) != want) continue;
      s = t.next;
      matched = true;
      break;
    }
    ASSERT_TRUE(matched) << "step " << j["step"];
    ++steps;
  }
  EXPECT_EQ(steps + 1, header["trace_length"].get<std::size_t>());  // length counts the initial state
  EXPECT_FALSE(valid_lease(s));
}

TEST(Conformance, ImplementationRefinesTheModel) {
  ConformanceOptions o;
  o.traces = 200;
  o.params.holders = 2;
  o.params.attacker = true;
  o.params.multiplier = 3;
  const ConformanceReport r = simulate_conformance(o);
  EXPECT_EQ(r.traces, 200u);
  EXPECT_GT(r.steps, 1000u);
  EXPECT_EQ(r.divergences, 0u) << (r.first ? r.first->action + ": " + r.first->reason : "");
}

TEST(Conformance, BrokenHolderIsCaught) {
  ConformanceOptions o;
  o.traces = 200;
  o.params.skip_epoch_increment = true;
  const ConformanceReport r = simulate_conformance(o);
  EXPECT_GT(r.divergences, 0u);
  ASSERT_TRUE(r.first);
  EXPECT_FALSE(r.first->reason.empty());
}
