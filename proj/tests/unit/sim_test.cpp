#include <gtest/gtest.h>

#include <sstream>

#include "tlease/sim/metrics.hpp"
#include "tlease/sim/scenario.hpp"
#include "tlease/sim/trace.hpp"
#include "tlease/sim/world.hpp"

using namespace tlease;
using namespace tlease::sim;
using namespace std::chrono_literals;

namespace {

Scenario base(std::uint64_t seed = 3) {
  Scenario s;
  s.seed = seed;
  s.horizon = 500ms;
  s.lease.lease_term = 10ms;
  s.lease.granter_multiplier = 2;
  s.holders = 2;
  s.interrupts.holder_rate_hz = 200;
  s.interrupts.granter_rate_hz = 50;
  s.network.base_delay = 200us;
  s.network.jitter_mean = 50us;
  return s;
}

std::string jsonl(const Trace& t) {
  std::ostringstream out;
  write_jsonl(out, t);
  return out.str();
}

TraceEvent ev(TraceKind k, std::int64_t t_ns, std::uint32_t host, std::uint32_t peer = 0) {
  TraceEvent e;
  e.kind = k;
  e.time = Nanos(t_ns);
  e.host = host;
  e.lease = 1;
  e.peer = peer;
  return e;
}

TraceEvent claim(std::int64_t t_ns, std::uint32_t host, std::int64_t until) {
  TraceEvent e = ev(TraceKind::Claim, t_ns, host);
  e.flag = true;
  e.value = until;
  return e;
}

}  // namespace

TEST(World, SameSeedSameTrace) {
  const std::string a = jsonl(run_scenario(base()));
  EXPECT_EQ(a, jsonl(run_scenario(base())));
  EXPECT_NE(a, jsonl(run_scenario(base(4))));
}

TEST(World, HonestRunIsSafeAndQuiet) {
  Scenario s = base();
  s.workload.submit_interval = 1ms;
  const Trace t = run_scenario(s);
  const TraceVerdict v = check_trace(t);
  EXPECT_TRUE(v.safe) << v.reason;
  EXPECT_GT(v.effects, 0u);
  EXPECT_EQ(v.uncovered_effects, 0u);
  EXPECT_EQ(t.count(TraceKind::Alarm), 0u);
  EXPECT_GT(t.count(TraceKind::GrantInstalled), 0u);
}

TEST(World, TraceSurvivesJsonlRoundTrip) {
  const Trace t = run_scenario(base());
  std::istringstream in(jsonl(t));
  const Trace back = read_jsonl(in);
  ASSERT_EQ(back.events.size(), t.events.size());
  EXPECT_EQ(jsonl(back), jsonl(t));
  EXPECT_TRUE(check_trace(back).safe);
}

TEST(World, CounterRollbackDuringInterruptStaysSafe) {
  Scenario s = base();
  s.holders = 1;
  s.interrupts = {};
  for (int i = 0; i < 20; ++i) {
    const Nanos at = Nanos(20ms) * (i + 1);
    s.actions.push_back({ActionKind::Interrupt, at, 1, 50us});
    Action back{ActionKind::SetCounter, at + 10us, 1};
    back.value = 1000;  // far in the past
    s.actions.push_back(back);
  }
  const Trace t = run_scenario(s);
  EXPECT_TRUE(check_trace(t).safe);
  std::size_t accepted = 0;
  for (const auto& e : t.events)
    if (e.kind == TraceKind::ClockAction && e.flag) ++accepted;
  EXPECT_EQ(accepted, 20u);
}

TEST(World, ClockActionsOutsideInterruptsAreRejected) {
  Scenario s = base();
  s.interrupts = {};
  Action set{ActionKind::SetCounter, 5ms, 1};
  set.value = 1;
  Action freq{ActionKind::SetFreq, 6ms, 1};
  freq.factor = 0.5;
  s.actions = {set, freq};
  const Trace t = run_scenario(s);
  std::size_t seen = 0;
  for (const auto& e : t.events) {
    if (e.kind != TraceKind::ClockAction) continue;
    ++seen;
    EXPECT_FALSE(e.flag);
  }
  EXPECT_EQ(seen, 2u);
}

TEST(World, AccumulatedTimeNeverExceedsEnclaveTime) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Scenario s = base(seed);
    s.interrupts.holder_rate_hz = 1000;
    const Trace t = run_scenario(s);
    std::size_t holders = 0;
    for (const auto& e : t.events) {
      if (e.kind != TraceKind::Summary || e.detail != "holder") continue;
      ++holders;
      EXPECT_LE(e.value, e.timer.count()) << "seed " << seed;
      EXPECT_GT(e.value, e.timer.count() / 2);
    }
    EXPECT_EQ(holders, 2u);
  }
}

TEST(World, NaiveAccountingUnderAttackIsCaught) {
  Scenario s = base();
  s.detect_interrupts = false;
  s.verify_frequency = false;
  s.holders = 2;
  s.adversary.enabled = true;
  s.adversary.freq_drift = 0.5;
  s.adversary.extremes_only = true;
  s.adversary.p_freq = 0.5;
  s.adversary.p_counter = 0.3;
  s.adversary.counter_back = 30ms;
  s.adversary.counter_forward = 30ms;
  s.interrupts.holder_rate_hz = 200;
  bool caught = false;
  for (std::uint64_t seed = 1; seed <= 50 && !caught; ++seed) {
    s.seed = seed;
    caught = !check_trace(run_scenario(s)).safe;
  }
  EXPECT_TRUE(caught);
}

TEST(World, InactiveHolderNeitherRenewsNorAges) {
  auto w = build_world(base());
  w->run_until(50ms);
  w->set_holder_active(0, false);
  const HolderState before = w->holder(0).state();
  w->run_until(100ms);
  EXPECT_EQ(w->holder(0).state(), before);
  w->finish();
  EXPECT_TRUE(check_trace(w->trace()).safe);
}

TEST(CheckTrace, AcceptsCoveredClaims) {
  Trace t;
  t.add(ev(TraceKind::GrantInstalled, 10, 0, 1));
  t.add(claim(20, 1, 100));
  t.add(ev(TraceKind::Effect, 50, 1));
  t.add(ev(TraceKind::GrantCleared, 150, 0));
  t.add(ev(TraceKind::GrantInstalled, 160, 0, 2));
  t.add(claim(170, 2, 300));
  const TraceVerdict v = check_trace(t);
  EXPECT_TRUE(v.safe) << v.reason;
  EXPECT_EQ(v.effects, 1u);
}

TEST(CheckTrace, ClaimWithoutGrant) {
  Trace t;
  t.add(claim(20, 1, 100));
  const TraceVerdict v = check_trace(t);
  EXPECT_FALSE(v.safe);
  EXPECT_EQ(v.violation_index, 0u);
}

TEST(CheckTrace, ClaimOutlivesTheGrant) {
  Trace t;
  t.add(ev(TraceKind::GrantInstalled, 10, 0, 1));
  t.add(claim(20, 1, 200));
  t.add(ev(TraceKind::GrantCleared, 150, 0));
  const TraceVerdict v = check_trace(t);
  EXPECT_FALSE(v.safe);
  EXPECT_EQ(v.violation_time, Nanos(150));
}

TEST(CheckTrace, GrantMovesWhileOldHolderClaims) {
  Trace t;
  t.add(ev(TraceKind::GrantInstalled, 10, 0, 1));
  t.add(claim(20, 1, 200));
  t.add(ev(TraceKind::GrantInstalled, 100, 0, 2));
  EXPECT_FALSE(check_trace(t).safe);
}

TEST(CheckTrace, UncoveredEffect) {
  Trace t;
  t.add(ev(TraceKind::GrantInstalled, 10, 0, 2));
  t.add(ev(TraceKind::Effect, 20, 1));
  const TraceVerdict v = check_trace(t);
  EXPECT_FALSE(v.safe);
  EXPECT_EQ(v.uncovered_effects, 1u);
}

TEST(CheckTrace, OrdersByTimeNotSequence) {
  Trace t;
  t.add(claim(20, 1, 100));  // recorded first, happens after the grant
  t.add(ev(TraceKind::GrantInstalled, 10, 0, 1));
  EXPECT_TRUE(check_trace(t).safe);
}

TEST(CheckTrace, WithdrawnClaimEndsCoverage) {
  Trace t;
  t.add(ev(TraceKind::GrantInstalled, 10, 0, 1));
  t.add(claim(20, 1, 200));
  TraceEvent off = ev(TraceKind::Claim, 100, 1);
  t.add(off);
  t.add(ev(TraceKind::GrantCleared, 150, 0));
  EXPECT_TRUE(check_trace(t).safe);
}

TEST(Scenario, ParsesEverySection) {
  std::istringstream in(R"(
[world]
name = demo
seed = 9
horizon_ms = 250
[lease]
term_ms = 20
multiplier = 3
[holders]
count = 3
[network]
base_delay_us = 100
[interrupts]
holder_rate_hz = 10
[timer]
detect_interrupts = false
[action.0]
kind = delay_msg
at_ms = 1
until_ms = 5
match_kind = Granted
match_holder = 2
extra_us = 300
)");
  const Scenario s = parse_scenario(in);
  EXPECT_EQ(s.name, "demo");
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.horizon, Nanos(250ms));
  EXPECT_EQ(s.lease.lease_term, Nanos(20ms));
  EXPECT_EQ(s.lease.granter_multiplier, 3);
  EXPECT_EQ(s.holders, 3u);
  EXPECT_EQ(s.network.base_delay, Nanos(100us));
  EXPECT_FALSE(s.detect_interrupts);
  ASSERT_EQ(s.actions.size(), 1u);
  EXPECT_EQ(s.actions[0].kind, ActionKind::DelayMsg);
  EXPECT_EQ(s.actions[0].match_kind, MessageKind::Granted);
  EXPECT_EQ(s.actions[0].match_holder, 2u);
  EXPECT_EQ(s.actions[0].extra, Nanos(300us));
}

TEST(Scenario, RejectsMalformedInput) {
  for (const char* text : {"[world]\nbogus = 1\n", "[lease]\nterm_ms = abc\n", "[action.0]\nkind = teleport\n",
                           "[action.0]\nkind = delay_msg\nmatch_kind = Hello\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_scenario(in), std::invalid_argument) << text;
  }
  EXPECT_THROW(load_scenario("/nonexistent/scenario.ini"), std::invalid_argument);
}

TEST(Metrics, SingleQuietHolder) {
  Scenario s = base();
  s.holders = 1;
  s.interrupts = {};
  s.horizon = 1s;
  const Trace t = run_scenario(s);
  const RunMetrics m = compute_metrics(t, {"quiet", s.seed, s.horizon, s.hardware.read_cost});
  EXPECT_TRUE(m.safe);
  EXPECT_EQ(m.holders, 1u);
  EXPECT_EQ(m.interrupts, 0u);
  EXPECT_EQ(m.retries, 0u);
  EXPECT_EQ(m.requests, m.renewals);
  // Renewal every holder_term * (1 - renew_fraction), about 8 ms.
  const double period = std::chrono::duration<double>(s.lease.holder_term()).count() * (1 - s.lease.renew_fraction);
  EXPECT_NEAR(m.request_rate_hz, 1.0 / period, 0.1 / period);
  EXPECT_GT(m.usable_fraction, 0.9);
  EXPECT_GE(m.under_accounting, 0.0);
  EXPECT_LT(m.under_accounting, 0.01);
  EXPECT_DOUBLE_EQ(m.message_rate_hz, 2 * m.request_rate_hz);
}
