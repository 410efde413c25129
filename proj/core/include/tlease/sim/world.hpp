#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <vector>

#include "tlease/random.hpp"
#include "tlease/runtime.hpp"
#include "tlease/secure_channel.hpp"
#include "tlease/sim/host.hpp"
#include "tlease/sim/scenario.hpp"
#include "tlease/sim/trace.hpp"

namespace tlease::sim {

struct WorldParams {
  std::uint64_t seed = 1;
  HardwareParams hardware;
  NetworkParams network;
  AdversaryParams adversary;
  std::vector<Action> message_rules;  // scripted DelayMsg / DropMsg
};

// Deterministic discrete-event world. Hosts advance their own true-time
// cursors while they execute; wake-ups (periodic polls and datagram
// arrivals) are dispatched in (time, sequence) order.
class SimWorld {
 public:
  explicit SimWorld(WorldParams params);
  ~SimWorld();
  SimWorld(const SimWorld&) = delete;
  SimWorld& operator=(const SimWorld&) = delete;

  // Host index doubles as the HostId of every engine placed on it.
  std::uint32_t add_host(InterruptSource interrupts, Nanos poll_interval);
  std::size_t add_granter(std::uint32_t host, GranterOptions opts);
  std::size_t add_holder(std::uint32_t host, const Lease& lease, std::size_t granter, HolderOptions opts,
                         WorkloadParams workload = {});

  HolderEngine& holder(std::size_t i) { return *holders_[i].engine; }
  GranterEngine& granter(std::size_t i) { return *granters_[i].engine; }
  std::size_t holder_count() const { return holders_.size(); }
  std::size_t granter_count() const { return granters_.size(); }
  std::uint32_t holder_host(std::size_t i) const { return holders_[i].host; }
  SimHost& host(std::uint32_t i) { return *hosts_[i].host; }
  std::size_t host_count() const { return hosts_.size(); }

  // An inactive holder is not polled: it neither renews nor ages its lease.
  void set_holder_active(std::size_t i, bool active) { holders_[i].active = active; }
  bool holder_active(std::size_t i) const { return holders_[i].active; }
  // Protected submission on holder `i`, released effects go to the trace.
  SubmitReport submit(std::size_t i, const Effect& effect, SubmitOptions opts = {});

  // Runs after the engines of `host` on every wake-up.
  void set_step_hook(std::function<void(std::uint32_t host)> hook) { step_hook_ = std::move(hook); }

  void run_until(Nanos t);
  // Appends per-engine and per-host summaries; call once after the last run.
  void finish();

  Trace& trace() { return trace_; }
  void record(TraceEvent e) { trace_.add(e); }
  Nanos horizon_reached() const { return reached_; }

  // Datagram plumbing used by the per-endpoint transports.
  void send_from(std::size_t endpoint, const ProtocolMessage& msg);
  std::optional<ProtocolMessage> poll_for(std::size_t endpoint);

 private:
  struct Datagram {
    Nanos arrival{0};
    std::uint64_t seq = 0;
    std::size_t from = 0;
    std::optional<wire::Sealed> sealed;
    ProtocolMessage plain;
  };
  struct Endpoint {
    std::uint32_t host = 0;
    std::optional<std::size_t> peer;  // holders talk to one granter
    std::map<std::pair<std::uint32_t, std::uint64_t>, std::size_t> routes;
    std::unique_ptr<wire::SecureChannel> channel;
    std::map<std::pair<Nanos, std::uint64_t>, Datagram> inbox;
  };
  class SimTransport;
  struct HostSlot {
    std::unique_ptr<SimHost> host;
    Nanos poll_interval{0};
    std::vector<std::size_t> granters;
    std::vector<std::size_t> holders;
  };
  struct GranterSlot {
    std::uint32_t host = 0;
    std::size_t endpoint = 0;
    std::unique_ptr<SimHardware> hw;
    std::unique_ptr<SimTransport> net;
    std::unique_ptr<GranterEngine> engine;
  };
  class TraceSink;
  struct HolderSlot {
    std::uint32_t host = 0;
    std::size_t endpoint = 0;
    std::unique_ptr<SimHardware> hw;
    std::unique_ptr<SimTransport> net;
    std::unique_ptr<HolderEngine> engine;
    WorkloadParams workload;
    Nanos next_submit{0};
    std::uint64_t submitted = 0;
    AccountingMode mode = AccountingMode::Verified;
    bool claimed = false;
    Nanos claim_until{0};
    bool active = true;
  };
  struct Wake {
    Nanos t{0};
    std::uint64_t seq = 0;
    std::uint32_t host = 0;
    bool periodic = false;
    bool operator>(const Wake& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
  };

  std::size_t add_endpoint(std::uint32_t host);
  EngineObserver observer_for(std::uint32_t host);
  void step(std::uint32_t host);
  void emit_claim(HolderSlot& slot);
  void schedule(Nanos t, std::uint32_t host, bool periodic);

  WorldParams params_;
  Rng rng_;
  Rng net_rng_;
  wire::Key key_{};
  Trace trace_;
  std::vector<HostSlot> hosts_;
  std::deque<Endpoint> endpoints_;
  std::deque<GranterSlot> granters_;
  std::deque<HolderSlot> holders_;
  std::unique_ptr<TraceSink> sink_;
  std::priority_queue<Wake, std::vector<Wake>, std::greater<>> queue_;
  std::uint64_t wake_seq_ = 0;
  std::uint64_t net_seq_ = 0;
  Nanos reached_{0};
  std::function<void(std::uint32_t)> step_hook_;
  std::uint32_t stepping_host_ = 0;
};

// Builds the standard topology (host 0 = granter, hosts 1..n = holders),
// runs to the horizon and returns the trace.
Trace run_scenario(const Scenario& s);

// Same, keeping the world for inspection.
std::unique_ptr<SimWorld> build_world(const Scenario& s);

}  // namespace tlease::sim
