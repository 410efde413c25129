#include <gtest/gtest.h>

#include <deque>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "scripted_hardware.hpp"
#include "tlease/event_log.hpp"
#include "tlease/runtime.hpp"

using namespace tlease;
using namespace std::chrono_literals;
using tlease::testing::ScriptedHardware;

namespace {

// Two queues joined back to back; nothing is lost unless a test drops it.
struct Wire {
  std::deque<ProtocolMessage> to_granter, to_holder;
};

class End final : public Transport {
 public:
  End(std::deque<ProtocolMessage>& out, std::deque<ProtocolMessage>& in) : out_(out), in_(in) {}
  void send(const ProtocolMessage& m) override { out_.push_back(m); }
  std::optional<ProtocolMessage> poll() override {
    if (in_.empty()) return std::nullopt;
    ProtocolMessage m = in_.front();
    in_.pop_front();
    return m;
  }

 private:
  std::deque<ProtocolMessage>& out_;
  std::deque<ProtocolMessage>& in_;
};

struct Rig {
  Wire wire;
  End holder_end{wire.to_granter, wire.to_holder};
  End granter_end{wire.to_holder, wire.to_granter};
  ScriptedHardware holder_hw, granter_hw;
  std::vector<EngineEvent> events;
  Lease lease = init_lease(Nanos(10ms), LeaseId{7});
  HolderEngine holder{lease, HostId{1}, holder_hw, holder_end, {},
                      [this](const EngineEvent& e) { events.push_back(e); }};
  GranterEngine granter{granter_hw, granter_end, GranterOptions{HostId{0}, lease.config}};

  void step(Nanos d) {
    holder_hw.advance(static_cast<std::uint64_t>(d.count()));
    granter_hw.advance(static_cast<std::uint64_t>(d.count()));
  }
  RenewStatus acquire() {
    holder.poll();
    granter.poll();
    return holder.poll();
  }
};

}  // namespace

TEST(InitLease, FreshIdsAndValidation) {
  std::unordered_set<std::uint64_t> ids;
  for (int i = 0; i < 1000; ++i) {
    const Lease l = init_lease(Nanos(1ms));
    EXPECT_EQ(l.state.phase, HolderPhase::Created);
    EXPECT_EQ(l.state.epoch, 1u);
    ASSERT_TRUE(ids.insert(raw(l.state.lease_id)).second);
  }
  EXPECT_THROW(init_lease(Nanos(0)), std::invalid_argument);
  EXPECT_THROW(init_lease(Nanos(-5), LeaseId{1}), std::invalid_argument);
}

TEST(Engines, AcquireThenStayActiveWithoutTraffic) {
  Rig r;
  EXPECT_EQ(r.holder.poll(), RenewStatus::Blocked);
  ASSERT_EQ(r.wire.to_granter.size(), 1u);
  EXPECT_EQ(r.wire.to_granter.front().kind, MessageKind::ReqLease);
  r.granter.poll();
  EXPECT_EQ(r.holder.poll(), RenewStatus::Renewed);
  EXPECT_TRUE(r.holder.usable());
  EXPECT_EQ(r.holder.state().expire_timer, r.lease.config.holder_term());
  r.step(1ms);
  EXPECT_EQ(r.holder.poll(), RenewStatus::Active);
  EXPECT_TRUE(r.wire.to_granter.empty());
  EXPECT_EQ(r.holder.counters().requests, 1u);
  EXPECT_EQ(r.holder.counters().renewals, 1u);
  EXPECT_EQ(r.granter.counters().granted, 1u);
  ASSERT_TRUE(r.granter.lease(LeaseId{7}));
  EXPECT_EQ(r.granter.lease(LeaseId{7})->grant->holder, HostId{1});
}

TEST(Engines, RenewsBelowTheThreshold) {
  Rig r;
  ASSERT_EQ(r.acquire(), RenewStatus::Renewed);
  const Nanos term = r.lease.config.holder_term();
  r.step(Nanos(static_cast<std::int64_t>(term.count() * (1 - r.lease.config.renew_fraction))) + 1us);
  r.holder.poll();
  ASSERT_EQ(r.wire.to_granter.size(), 1u);
  // An extension is not usable until it is answered.
  EXPECT_FALSE(r.holder.usable());
  EXPECT_EQ(r.holder.state().phase, HolderPhase::Pending);
  r.granter.poll();
  EXPECT_EQ(r.holder.poll(), RenewStatus::Renewed);
  EXPECT_EQ(r.granter.counters().granted, 2u);
}

TEST(Engines, InterruptForcesARenewal) {
  Rig r;
  ASSERT_EQ(r.acquire(), RenewStatus::Renewed);
  const Epoch before = r.holder.state().epoch;
  r.holder_hw.interrupt();
  EXPECT_EQ(r.holder.poll(), RenewStatus::Blocked);
  EXPECT_EQ(r.holder.state().epoch, before + 1);
  EXPECT_EQ(r.holder.state().phase, HolderPhase::Pending);
  ASSERT_EQ(r.wire.to_granter.size(), 1u);
  r.granter.poll();
  EXPECT_EQ(r.holder.poll(), RenewStatus::Renewed);
  EXPECT_EQ(r.holder.counters().interrupts, 1u);
  EXPECT_EQ(r.holder.counters().freq_checks, 2u);  // construction and the new epoch
}

TEST(Engines, ReplyCrossingAnInterruptIsDiscarded) {
  Rig r;
  r.holder.poll();
  r.granter.poll();
  ASSERT_EQ(r.wire.to_holder.size(), 1u);
  r.holder_hw.interrupt();  // lands between the reply and its processing
  EXPECT_EQ(r.holder.poll(), RenewStatus::Blocked);
  EXPECT_FALSE(r.holder.usable());
  EXPECT_EQ(r.holder.counters().renewals, 0u);
  // The fresh request for the new epoch succeeds.
  r.granter.poll();
  EXPECT_EQ(r.holder.poll(), RenewStatus::Renewed);
  EXPECT_EQ(r.holder.state().epoch, 2u);
}

TEST(Engines, UnansweredRequestIsRetriedAfterTheTimeout) {
  Rig r;
  r.holder.poll();
  r.wire.to_granter.clear();
  r.step(1ms);
  r.holder.poll();
  EXPECT_TRUE(r.wire.to_granter.empty());
  r.step(2ms);
  r.holder.poll();
  ASSERT_EQ(r.wire.to_granter.size(), 1u);
  EXPECT_EQ(r.holder.counters().timeouts, 1u);
  r.granter.poll();
  EXPECT_EQ(r.holder.poll(), RenewStatus::Renewed);
  EXPECT_EQ(r.holder.counters().retries, 1u);
}

TEST(Engines, HolderLapsesWithoutRenewalOpportunity) {
  Rig r;
  ASSERT_EQ(r.acquire(), RenewStatus::Renewed);
  r.holder.update_lease_client();
  r.step(r.lease.config.holder_term());
  r.holder.update_lease_client();  // never sends
  EXPECT_TRUE(r.wire.to_granter.empty());
  EXPECT_FALSE(r.holder.usable());
  bool expired = false;
  for (const auto& e : r.events) expired |= e.kind == EngineEventKind::HolderExpired;
  EXPECT_TRUE(expired);
}

TEST(Engines, GranterExpiresOnlyAfterItsLongerTerm) {
  Rig r;
  ASSERT_EQ(r.acquire(), RenewStatus::Renewed);
  r.step(r.lease.config.holder_term());
  EXPECT_EQ(r.granter.update_lease_client(), 0u);
  r.step(r.lease.config.granter_term() - r.lease.config.holder_term());
  EXPECT_EQ(r.granter.update_lease_client(), 1u);
  EXPECT_EQ(r.granter.counters().expired, 1u);
  EXPECT_FALSE(r.granter.lease(LeaseId{7})->grant);
}

TEST(Engines, GranterInterruptDoesNotAgeGrants) {
  Rig r;
  ASSERT_EQ(r.acquire(), RenewStatus::Renewed);
  const Nanos left = r.granter.lease(LeaseId{7})->expire_timer;
  r.granter_hw.advance(1'000'000);
  r.granter_hw.interrupt();
  EXPECT_EQ(r.granter.update_lease_client(), 0u);
  EXPECT_EQ(r.granter.lease(LeaseId{7})->expire_timer, left);
  EXPECT_EQ(r.granter.counters().interrupts, 1u);
}

TEST(Engines, SecondHolderIsDeniedAndBacksOff) {
  Rig r;
  ASSERT_EQ(r.acquire(), RenewStatus::Renewed);
  Wire w2;
  End end2{r.wire.to_granter, w2.to_holder};
  ScriptedHardware hw2;
  HolderEngine other(r.lease, HostId{2}, hw2, end2);
  other.poll();
  r.granter.poll();
  ASSERT_EQ(r.wire.to_holder.size(), 1u);
  w2.to_holder.push_back(r.wire.to_holder.front());
  r.wire.to_holder.clear();
  EXPECT_EQ(other.poll(), RenewStatus::Blocked);
  EXPECT_EQ(other.state().phase, HolderPhase::Blocked);
  EXPECT_EQ(other.counters().denied, 1u);
  other.poll();  // still inside the back-off
  EXPECT_TRUE(r.wire.to_granter.empty());
  hw2.advance(1'000'000);
  other.poll();
  EXPECT_EQ(r.wire.to_granter.size(), 1u);
}

TEST(Engines, AdmissionPolicyCanRefuse) {
  Rig r;
  r.granter.set_admission([](const GranterEngine&, const ProtocolMessage&) { return false; });
  r.holder.poll();
  r.granter.poll();
  ASSERT_EQ(r.wire.to_holder.front().kind, MessageKind::NotGranted);
  EXPECT_EQ(r.granter.counters().denied, 1u);
}

TEST(Engines, FailedFrequencyCheckRaisesAlarmAndBlocksRequests) {
  Rig r;
  ASSERT_EQ(r.acquire(), RenewStatus::Renewed);
  r.holder_hw.entropy.assign(64, 4000);  // counter running at half speed
  r.holder_hw.interrupt();
  r.holder.poll();
  EXPECT_FALSE(r.holder.usable());
  EXPECT_GE(r.holder.counters().freq_failures, 1u);
  EXPECT_TRUE(r.wire.to_granter.empty());
  bool alarm = false;
  for (const auto& e : r.events) alarm |= e.kind == EngineEventKind::Alarm;
  EXPECT_TRUE(alarm);
  r.holder_hw.entropy.clear();
  r.holder.poll();
  EXPECT_EQ(r.wire.to_granter.size(), 1u);
}

TEST(Engines, BlockingRenewalLoopsUntilUsable) {
  Rig r;
  int waits = 0;
  const RenewStatus s = r.holder.update_renew_lease([&](Nanos d) {
    ++waits;
    r.step(d);
    r.granter.poll();
  });
  EXPECT_EQ(s, RenewStatus::Renewed);
  EXPECT_GE(waits, 1);
}

TEST(EventLog, OneJsonObjectPerLine) {
  std::ostringstream out;
  Rig r;
  HolderEngine h(r.lease, HostId{3}, r.holder_hw, r.holder_end, {}, json_lines_observer(out, [] { return Nanos(42); }));
  h.poll();
  std::istringstream in(out.str());
  std::string line;
  bool saw_request = false;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["time"], 42);
    EXPECT_EQ(j["host"], 3);
    EXPECT_EQ(j["lease_id"], 7);
    if (j["event"] == "request") {
      saw_request = true;
      EXPECT_EQ(j["retry"], false);
      EXPECT_EQ(j["phase"], "pending");
    }
  }
  EXPECT_TRUE(saw_request);

  EngineEvent e;
  e.kind = EngineEventKind::GrantDenied;
  e.peer = HostId{9};
  e.lease = LeaseId{4};
  e.epoch = 2;
  e.phase = "valid";
  e.detail = "x";
  EXPECT_EQ(event_json(e, Nanos(5)),
            R"({"event":"grant_denied","time":5,"host":0,"lease_id":4,"epoch":2,"phase":"valid","timer_ns":0,"peer":9,"detail":"x"})");
}
