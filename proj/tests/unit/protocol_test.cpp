#include <gtest/gtest.h>

#include <map>
#include <set>
#include <utility>
#include <vector>

#include "tlease/protocol.hpp"
#include "tlease/random.hpp"

using namespace tlease;
using namespace std::chrono_literals;

namespace {

constexpr HostId kA{1};
constexpr HostId kB{2};
constexpr LeaseId kLease{7};

LeaseConfig config(Nanos term = 100us, double multiplier = 2) {
  LeaseConfig c;
  c.lease_term = term;
  c.granter_multiplier = multiplier;
  return c;
}

ProtocolMessage request(HostId h, Epoch epoch, Nanos ts) {
  ProtocolMessage m;
  m.holder = h;
  m.lease_id = kLease;
  m.epoch = epoch;
  m.timestamp = ts;
  return m;
}

}  // namespace

TEST(HolderRequest, CreatedHolderAsksWithEpochOne) {
  const auto [s, msg] = holder_request(make_holder(kA, kLease), 0ns, config());
  EXPECT_EQ(s.phase, HolderPhase::Pending);
  EXPECT_EQ(msg.kind, MessageKind::ReqLease);
  EXPECT_EQ(msg.epoch, 1u);
  EXPECT_EQ(msg.timestamp, 0ns);
  EXPECT_EQ(msg.send_timestamp, 0ns);
}

TEST(HolderRequest, BlockedHolderAsksWithCurrentEpoch) {
  HolderState h = make_holder(kA, kLease);
  h.phase = HolderPhase::Blocked;
  h.epoch = 3;
  const auto [s, msg] = holder_request(h, 1234ns, config());
  EXPECT_EQ(s.phase, HolderPhase::Pending);
  EXPECT_EQ(msg.epoch, 3u);
  EXPECT_EQ(msg.timestamp, 1234ns);
}

TEST(HolderRequest, CountdownStartsAtSend) {
  const LeaseConfig c = config(50ms);
  const auto [s, msg] = holder_request(make_holder(kA, kLease), 5ms, c);
  EXPECT_EQ(s.expire_timer, c.holder_term());
  EXPECT_EQ(s.request_ts, 5ms);
}

TEST(HolderRequest, ExtensionKeepsEpochOnceBelowRenewThreshold) {
  const LeaseConfig c = config(50ms);
  HolderState h = make_holder(kA, kLease);
  h.phase = HolderPhase::ValidLease;
  h.epoch = 4;
  h.expire_timer = 11ms;
  EXPECT_FALSE(needs_renewal(h, c));  // threshold is 50 ms / 5 = 10 ms
  h.expire_timer = 9ms;
  ASSERT_TRUE(needs_renewal(h, c));
  const auto [s, msg] = holder_request(h, 0ns, c);
  EXPECT_EQ(s.phase, HolderPhase::Pending);
  EXPECT_EQ(msg.epoch, 4u);
}

TEST(HolderRequest, RejectedWhileInterruptedOrPending) {
  HolderState h = holder_on_interrupt(make_holder(kA, kLease));
  EXPECT_THROW(holder_request(h, 0ns, config()), ProtocolError);
  h = holder_request(make_holder(kA, kLease), 0ns, config()).state;
  EXPECT_THROW(holder_request(h, 0ns, config()), ProtocolError);
}

TEST(GranterProcess, FreeLeaseIsGranted) {
  const auto [g, reply] = granter_process(make_granter(kLease), request(kA, 1, 10ns), 20ns, config());
  ASSERT_TRUE(g.grant);
  EXPECT_EQ(g.grant->holder, kA);
  EXPECT_EQ(g.grant->epoch, 1u);
  EXPECT_EQ(g.grant->timestamp, 10ns);
  EXPECT_EQ(g.expire_timer, config().granter_term());
  EXPECT_EQ(reply.kind, MessageKind::Granted);
  EXPECT_EQ(reply.timestamp, 10ns);
  EXPECT_EQ(reply.send_timestamp, 20ns);
}

TEST(GranterProcess, HeldLeaseIsRefusedToOthers) {
  GranterState g = make_granter(kLease);
  g.grant = GrantRecord{kA, 0ns, 2};
  g.expire_timer = 1ms;
  const auto [next, reply] = granter_process(g, request(kB, 1, 5ns), 6ns, config());
  EXPECT_EQ(reply.kind, MessageKind::NotGranted);
  EXPECT_EQ(next, g);
}

TEST(GranterProcess, StaleRequestFromHolderIsRefused) {
  GranterState g = make_granter(kLease);
  g.grant = GrantRecord{kA, 50ns, 2};
  g.expire_timer = 1ms;
  EXPECT_EQ(granter_process(g, request(kA, 2, 40ns), 60ns, config()).reply.kind, MessageKind::NotGranted);
  EXPECT_EQ(granter_process(g, request(kA, 1, 90ns), 60ns, config()).reply.kind, MessageKind::NotGranted);
  // Same or newer metadata extends and restarts the countdown.
  const auto ext = granter_process(g, request(kA, 2, 50ns), 60ns, config());
  EXPECT_EQ(ext.reply.kind, MessageKind::Granted);
  EXPECT_EQ(ext.state.expire_timer, config().granter_term());
  const auto newer = granter_process(g, request(kA, 3, 0ns), 60ns, config());
  EXPECT_EQ(newer.reply.kind, MessageKind::Granted);
  EXPECT_EQ(newer.state.grant->epoch, 3u);
}

TEST(GranterProcess, UnknownLeaseIsRefused) {
  ProtocolMessage m = request(kA, 1, 0ns);
  m.lease_id = LeaseId{99};
  const auto [g, reply] = granter_process(make_granter(kLease), m, 0ns, config());
  EXPECT_EQ(reply.kind, MessageKind::NotGranted);
  EXPECT_FALSE(g.grant);
}

TEST(GranterProcess, PreconditionsAreEnforced) {
  ProtocolMessage reply = request(kA, 1, 0ns);
  reply.kind = MessageKind::Granted;
  EXPECT_THROW(granter_process(make_granter(kLease), reply, 0ns, config()), ProtocolError);
  EXPECT_THROW(granter_process(granter_on_interrupt(make_granter(kLease)), request(kA, 1, 0ns), 0ns, config()),
               ProtocolError);
}

namespace {

HolderState pending(Epoch epoch, Nanos ts, Nanos timer) {
  HolderState h = make_holder(kA, kLease);
  h.phase = HolderPhase::Pending;
  h.epoch = epoch;
  h.request_ts = ts;
  h.expire_timer = timer;
  return h;
}

ProtocolMessage reply(MessageKind k, Epoch epoch, Nanos ts) {
  ProtocolMessage m = request(kA, epoch, ts);
  m.kind = k;
  m.send_timestamp = ts + 1ns;
  return m;
}

}  // namespace

TEST(HolderReceive, OlderEpochIsIgnored) {
  const HolderState h = pending(4, 10ns, 1ms);
  EXPECT_EQ(holder_receive(h, reply(MessageKind::Granted, 3, 10ns)), h);
}

TEST(HolderReceive, MatchingGrantValidates) {
  EXPECT_EQ(holder_receive(pending(4, 10ns, 1ms), reply(MessageKind::Granted, 4, 10ns)).phase, HolderPhase::ValidLease);
}

TEST(HolderReceive, GrantAfterCountdownBlocks) {
  EXPECT_EQ(holder_receive(pending(4, 10ns, 0ns), reply(MessageKind::Granted, 4, 10ns)).phase, HolderPhase::Blocked);
}

TEST(HolderReceive, RefusalBlocks) {
  EXPECT_EQ(holder_receive(pending(4, 10ns, 1ms), reply(MessageKind::NotGranted, 4, 10ns)).phase, HolderPhase::Blocked);
}

TEST(HolderReceive, ReplyToAnEarlierRequestOfTheSameEpochIsIgnored) {
  const HolderState h = pending(4, 20ns, 1ms);
  EXPECT_EQ(holder_receive(h, reply(MessageKind::Granted, 4, 10ns)), h);
}

TEST(HolderInterrupt, ResumeBlocksAndBumpsEpoch) {
  HolderState h = make_holder(kA, kLease);
  h.phase = HolderPhase::ValidLease;
  h.epoch = 5;
  h.expire_timer = 1ms;
  const HolderState i = holder_on_interrupt(h);
  EXPECT_EQ(i.phase, HolderPhase::Interrupted);
  EXPECT_FALSE(lease_usable(i));
  const HolderState r = holder_on_resume(i);
  EXPECT_EQ(r.phase, HolderPhase::Blocked);
  EXPECT_EQ(r.epoch, 6u);
}

TEST(HolderInterrupt, CreatedHolderStillHasToAsk) {
  const HolderState r = holder_on_resume(holder_on_interrupt(make_holder(kA, kLease)));
  EXPECT_EQ(r.phase, HolderPhase::Blocked);
  EXPECT_EQ(r.epoch, 2u);
  EXPECT_EQ(holder_request(r, 0ns, config()).request.epoch, 2u);
}

TEST(HolderInterrupt, RepeatedInterruptsCountOnce) {
  const HolderState h = make_holder(kA, kLease);
  const HolderState twice = holder_on_interrupt(holder_on_interrupt(h));
  EXPECT_EQ(twice, holder_on_interrupt(h));
  EXPECT_EQ(holder_on_resume(twice).epoch, 2u);
  EXPECT_THROW(holder_on_resume(h), ProtocolError);
}

TEST(GranterTick, AgesAndExpires) {
  GranterState g = make_granter(kLease);
  g.grant = GrantRecord{kA, 0ns, 1};
  g.expire_timer = 100us;
  const GranterState a = granter_tick(g, 40us);
  EXPECT_EQ(a.expire_timer, 60us);
  EXPECT_TRUE(a.grant);
  g.expire_timer = 30us;
  const GranterState b = granter_tick(g, 40us);
  EXPECT_EQ(b.expire_timer, 0ns);
  EXPECT_FALSE(b.grant);
}

TEST(GranterTick, InterruptedGranterDoesNotAge) {
  GranterState g = make_granter(kLease);
  g.grant = GrantRecord{kA, 0ns, 1};
  g.expire_timer = 100us;
  const GranterState i = granter_on_interrupt(g);
  EXPECT_EQ(granter_tick(i, 40us), i);
  EXPECT_EQ(granter_on_resume(i).phase, GranterPhase::InsideEnclave);
}

TEST(LeaseConfig, Terms) {
  LeaseConfig c = config(100ms, 3);
  c.drift = 0.25;
  EXPECT_EQ(c.holder_term(), 75ms);
  EXPECT_EQ(c.granter_term(), 375ms);
  // Inexact products round toward the safe side.
  c.drift = 0.1;
  EXPECT_LE(c.holder_term(), 90ms);
  EXPECT_GE(c.granter_term(), 330ms);
  EXPECT_GE(config(1ms, 1).granter_term(), config(1ms, 1).holder_term());
  c.granter_multiplier = 0.5;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = config();
  c.renew_fraction = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = config(0ns);
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(NotOlder, LexicographicOnEpochThenTimestamp) {
  const GrantRecord saved{kA, 50ns, 2};
  EXPECT_TRUE(not_older(2, 50ns, saved));
  EXPECT_TRUE(not_older(3, 0ns, saved));
  EXPECT_FALSE(not_older(2, 49ns, saved));
  EXPECT_FALSE(not_older(1, 100ns, saved));
}

// Random interleavings of the pure transitions on an honest network that may
// delay, duplicate and reorder messages. Every clock runs at the same rate;
// the granter only ages while inside the enclave.
TEST(ProtocolProperty, RandomInterleavingsKeepTheLeaseInvariant) {
  const std::set<std::pair<HolderPhase, HolderPhase>> edges = {
      {HolderPhase::Created, HolderPhase::Pending},     {HolderPhase::Pending, HolderPhase::ValidLease},
      {HolderPhase::Pending, HolderPhase::Blocked},     {HolderPhase::ValidLease, HolderPhase::Pending},
      {HolderPhase::Blocked, HolderPhase::Pending},     {HolderPhase::Interrupted, HolderPhase::Blocked},
      {HolderPhase::Created, HolderPhase::Interrupted}, {HolderPhase::Pending, HolderPhase::Interrupted},
      {HolderPhase::ValidLease, HolderPhase::Interrupted}, {HolderPhase::Blocked, HolderPhase::Interrupted},
  };
  std::uint64_t usable_steps = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    Rng rng(seed);
    const LeaseConfig cfg = config(100ns, 1 + static_cast<double>(rng.below(3)));
    std::vector<HolderState> holders = {make_holder(kA, kLease), make_holder(kB, kLease)};
    GranterState granter = make_granter(kLease);
    std::vector<ProtocolMessage> to_granter, to_holders;
    Nanos now{0};
    for (int step = 0; step < 400; ++step) {
      const auto before = holders;
      const std::size_t h = rng.below(holders.size());
      HolderState& x = holders[h];
      switch (rng.below(7)) {
        case 0: {  // time passes for everybody
          const Nanos dt(1 + static_cast<std::int64_t>(rng.below(20)));
          now += dt;
          for (auto& y : holders)
            if (y.phase != HolderPhase::Interrupted) y = holder_tick(y, dt);
          granter = granter_tick(granter, dt);
          break;
        }
        case 1:
          if (x.phase == HolderPhase::Created || x.phase == HolderPhase::Blocked ||
              (x.phase == HolderPhase::ValidLease && needs_renewal(x, cfg))) {
            auto r = holder_request(x, now, cfg);
            x = r.state;
            to_granter.push_back(r.request);
          }
          break;
        case 2:
          if (!to_granter.empty() && granter.phase == GranterPhase::InsideEnclave) {
            const ProtocolMessage m = to_granter[rng.below(to_granter.size())];  // may repeat
            auto r = granter_process(granter, m, now, cfg);
            granter = r.state;
            to_holders.push_back(r.reply);
          }
          break;
        case 3:
          if (!to_holders.empty()) {
            const ProtocolMessage m = to_holders[rng.below(to_holders.size())];
            for (auto& y : holders)
              if (y.holder == m.holder && y.phase != HolderPhase::Interrupted) y = holder_receive(y, m);
          }
          break;
        case 4:
          x = x.phase == HolderPhase::Interrupted ? holder_on_resume(x) : holder_on_interrupt(x);
          break;
        case 5:
          granter = granter.phase == GranterPhase::Interrupted ? granter_on_resume(granter) : granter_on_interrupt(granter);
          break;
        case 6:
          if (x.phase == HolderPhase::Pending && rng.bernoulli(0.2)) x = holder_abandon_request(x);
          break;
      }
      for (std::size_t i = 0; i < holders.size(); ++i) {
        ASSERT_GE(holders[i].epoch, before[i].epoch);
        if (holders[i].phase != before[i].phase) {
          ASSERT_TRUE(edges.count({before[i].phase, holders[i].phase}))
              << to_string(before[i].phase) << " -> " << to_string(holders[i].phase);
          if (before[i].phase == HolderPhase::Interrupted) ASSERT_EQ(holders[i].epoch, before[i].epoch + 1);
        }
        if (lease_usable(holders[i])) {
          ++usable_steps;
          ASSERT_TRUE(granter.grant && granter.grant->holder == holders[i].holder)
              << "seed " << seed << " step " << step;
        }
      }
    }
  }
  EXPECT_GT(usable_steps, 1000u);
}

TEST(ProtocolProperty, TransitionsAreDeterministic) {
  Rng a(9), b(9);
  const auto s1 = holder_request(make_holder(kA, kLease), Nanos(static_cast<std::int64_t>(a.below(1000))), config());
  const auto s2 = holder_request(make_holder(kA, kLease), Nanos(static_cast<std::int64_t>(b.below(1000))), config());
  EXPECT_EQ(s1.state, s2.state);
  EXPECT_EQ(s1.request, s2.request);
  const auto g1 = granter_process(make_granter(kLease), s1.request, 5ns, config());
  const auto g2 = granter_process(make_granter(kLease), s2.request, 5ns, config());
  EXPECT_EQ(g1.state, g2.state);
  EXPECT_EQ(g1.reply, g2.reply);
}
