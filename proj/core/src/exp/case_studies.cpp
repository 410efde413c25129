#include <algorithm>
#include <cmath>
#include <optional>

#include "tlease/exp/experiments.hpp"
#include "tlease/random.hpp"
#include "tlease/sim/world.hpp"

namespace tlease::exp {

using namespace std::chrono_literals;
using detail::Rows;
using sim::RunMetrics;
using sim::Scenario;

namespace {

Nanos ms(double v) { return std::chrono::duration_cast<Nanos>(std::chrono::duration<double, std::milli>(v)); }
Nanos us(double v) { return std::chrono::duration_cast<Nanos>(std::chrono::duration<double, std::micro>(v)); }
double to_ms(Nanos d) { return std::chrono::duration<double, std::milli>(d).count(); }

// Poisson stall windows on [0, horizon) with durations uniform on [lo, hi].
std::vector<sim::Window> stalls(Rng& rng, double rate_hz, Nanos lo, Nanos hi, Nanos horizon) {
  std::vector<sim::Window> out;
  if (rate_hz <= 0) return out;
  double t = 0;
  const double end = static_cast<double>(horizon.count());
  for (;;) {
    t += rng.exponential(1e9 / rate_hz);
    if (t >= end) break;
    const auto len = static_cast<std::int64_t>(rng.uniform(static_cast<double>(lo.count()), static_cast<double>(hi.count())));
    const Nanos start(static_cast<std::int64_t>(t));
    if (!out.empty() && start <= out.back().end) continue;
    out.push_back({start, start + Nanos(len)});
  }
  return out;
}

std::uint64_t message_count(const sim::Trace& t) {
  return t.count(sim::TraceKind::Request) + t.count(sim::TraceKind::GrantInstalled) +
         t.count(sim::TraceKind::GrantExtended) + t.count(sim::TraceKind::GrantDenied);
}

}  // namespace

// Holders keep separate leases on one manager and renew at 1/5 of the term.
// A long-tailed stall process (a small share of interrupts lasting up to
// tail_ms) produces the false suspicions; grants the manager lets lapse are the
// lost leases. attack = 1 rolls holder counters back during interrupts.
Table case_farm_failure_detector(const ExperimentPlan& plan, std::uint64_t seed) {
  Rows rows(plan, {"grants_cleared", "holder_lapses", "lost_per_min", "renewals", "stalls", "violations", "safe"});
  for (const auto& p : rows.points(seed)) {
    Scenario s;
    s.name = plan.experiment;
    s.seed = p.seed;
    s.horizon = plan.horizon;
    s.holders = static_cast<std::uint32_t>(p["holders"]);
    s.shared_lease = false;
    s.lease.lease_term = ms(p["term_ms"]);
    s.lease.granter_multiplier = p["multiplier"];
    s.lease.renew_fraction = p["renew_fraction"];
    s.poll_interval = us(p["poll_us"]);
    s.granter_poll_interval = std::min(s.poll_interval, Nanos(100us));
    s.network.base_delay = us(p["delay_us"]);
    s.network.jitter_mean = us(p["delay_us"]) / 10;
    s.interrupts.holder_rate_hz = p["rate_hz"];
    s.interrupts.granter_rate_hz = p["rate_hz"];
    s.detect_interrupts = p["detect"] != 0;

    Rng stall_rng(mix_seed(p.seed, 0x5a11));
    std::size_t stall_count = 0;
    for (std::uint32_t host = 0; host <= s.holders; ++host) {
      for (const sim::Window& w : stalls(stall_rng, p["rate_hz"] * p["tail_share"], Nanos(0), ms(p["tail_ms"]), s.horizon)) {
        sim::Action a;
        a.kind = sim::ActionKind::Interrupt;
        a.at = w.start;
        a.host = host;
        a.duration = w.end - w.start;
        s.actions.push_back(a);
        ++stall_count;
      }
    }
    if (p["attack"] != 0) {
      s.adversary.enabled = true;
      s.adversary.p_counter = 0.5;
      s.adversary.counter_back = 4 * s.lease.lease_term;
      s.adversary.target_granter = false;
      s.workload.submit_interval = s.lease.lease_term / 10;
    }
    const sim::Trace t = sim::run_scenario(s);
    const RunMetrics m = checked_metrics(t, {s.name, s.seed, s.horizon, s.hardware.read_cost}, plan.allow_violations);
    const double minutes = m.horizon_s / 60.0;
    rows.add(p, {static_cast<double>(m.grants_cleared), static_cast<double>(m.holder_lapses),
                 static_cast<double>(m.grants_cleared) / minutes, static_cast<double>(m.renewals),
                 static_cast<double>(stall_count), static_cast<double>(m.violations), m.safe ? 1.0 : 0.0});
  }
  return rows.take();
}

// Every node is the granter of one lease per peer and holds the lease each
// peer grants it (lease id 100 * (granter + 1) + holder). A node's lease
// configuration is usable while it holds leases from a majority counting
// itself; it becomes active once that has held for a guard interval equal to
// the lease term, and stays active until the majority is lost.
Table case_quorum_leases(const ExperimentPlan& plan, std::uint64_t seed) {
  Rows rows(plan, {"mean_active_ms", "active_intervals", "active_fraction", "requests_per_s", "safe"});
  for (const auto& p : rows.points(seed)) {
    const auto nodes = static_cast<std::uint32_t>(p["nodes"]);
    if (nodes < 3) throw std::invalid_argument("quorum_leases needs at least 3 nodes");
    const std::uint32_t majority = nodes / 2 + 1;
    const Nanos term = ms(p["term_ms"]);
    const Nanos guard = term;
    const AccountingMode mode = p["detect"] != 0 ? AccountingMode::Verified : AccountingMode::Naive;

    sim::WorldParams wp;
    wp.seed = p.seed;
    wp.network.base_delay = us(p["delay_us"]);
    wp.network.jitter_mean = us(p["delay_us"]) / 5;
    sim::SimWorld world(wp);

    LeaseConfig lc;
    lc.lease_term = term;
    lc.granter_multiplier = p["multiplier"];
    lc.renew_fraction = p["renew_fraction"];
    Rng stall_rng(mix_seed(p.seed, 0x9a11));
    for (std::uint32_t i = 0; i < nodes; ++i) {
      sim::InterruptSource src;
      src.rate_hz = p["rate_hz"];
      src.cost = sim::calibration::kInterruptCost;
      const Nanos crash = ms(p["crash_ms"]);
      src.scripted = stalls(stall_rng, p["crash_rate_hz"], crash / 2, crash * 3 / 2, plan.horizon);
      world.add_host(std::move(src), us(p["poll_us"]));
      GranterOptions g;
      g.lease = lc;
      g.mode = mode;
      world.add_granter(i, g);
    }
    std::vector<std::vector<std::size_t>> held(nodes);
    HolderOptions ho;
    ho.mode = mode;
    ho.response_timeout = std::max(Nanos(1ms), 4 * wp.network.base_delay);
    for (std::uint32_t i = 0; i < nodes; ++i) {
      std::uint32_t k = 0;
      for (std::uint32_t j = 0; j < nodes; ++j) {
        if (i == j) continue;
        Lease lease = init_lease(term, LeaseId{100ull * (j + 1) + i});
        lease.config = lc;
        // An extension is unusable until answered, so a node's peer leases
        // renew at staggered points (renew_fraction scaled by (k + 1) / peers)
        // rather than all at once.
        lease.config.renew_fraction = lc.renew_fraction * (++k) / (nodes - 1);
        held[i].push_back(world.add_holder(i, lease, j, ho));
      }
    }

    struct NodeView {
      std::optional<Nanos> quorum_since;
      std::optional<Nanos> active_since;
      Nanos active_total{0};
    };
    std::vector<NodeView> view(nodes);
    std::vector<double> intervals;
    world.set_step_hook([&](std::uint32_t h) {
      std::uint32_t have = 1;
      for (std::size_t k : held[h]) have += world.holder(k).usable() ? 1 : 0;
      const Nanos now = world.host(h).now();
      NodeView& v = view[h];
      if (have >= majority) {
        if (!v.quorum_since) v.quorum_since = now;
        if (!v.active_since && now - *v.quorum_since >= guard) v.active_since = now;
        return;
      }
      if (v.active_since) {
        intervals.push_back(to_ms(now - *v.active_since));
        v.active_total += now - *v.active_since;
      }
      v.active_since.reset();
      v.quorum_since.reset();
    });
    world.run_until(plan.horizon);
    world.finish();
    for (auto& v : view) {
      if (!v.active_since) continue;
      const Nanos end = std::max(plan.horizon, *v.active_since);
      intervals.push_back(to_ms(end - *v.active_since));
      v.active_total += end - *v.active_since;
    }
    const RunMetrics m =
        checked_metrics(world.trace(), {plan.experiment, p.seed, plan.horizon, Nanos(30)}, plan.allow_violations);
    double mean = 0;
    for (double x : intervals) mean += x;
    if (!intervals.empty()) mean /= static_cast<double>(intervals.size());
    Nanos active{0};
    for (const auto& v : view) active += v.active_total;
    const double fraction = to_ms(active) / (to_ms(plan.horizon) * nodes);
    rows.add(p, {mean, static_cast<double>(intervals.size()), fraction,
                 static_cast<double>(m.requests) / m.horizon_s, m.safe ? 1.0 : 0.0});
  }
  return rows.take();
}

// Cache coherence with leases. Node A (host 1) only reads; node B (host 2)
// writes with probability write_share per operation and reads otherwise.
// Each node caches under its own read lease; writes need the write lease.
// The granter grants the write lease only while no other node holds a read
// lease, and while a write waits it refuses new read leases to other nodes,
// so readers drain and the write lease is installed once their grants lapse.
// The writer drops the write lease after its write by no longer renewing it.
//
// A stale read is a read effect released while the write lease is granted
// to another node, or a write effect released while another node's read
// lease is granted; both are counted from the trace.
Table case_consistent_cache(const ExperimentPlan& plan, std::uint64_t seed) {
  Rows rows(plan, {"messages_per_s", "reads", "writes", "stale_reads", "denied", "safe"});
  constexpr std::uint64_t kReadA = 1, kReadB = 2, kWrite = 3;
  for (const auto& p : rows.points(seed)) {
    sim::WorldParams wp;
    wp.seed = p.seed;
    wp.network.base_delay = us(p["delay_us"]);
    wp.network.jitter_mean = us(p["delay_us"]) / 5;
    const bool attacked = p["adversary"] != 0;
    if (attacked) {
      // Within the bounds the multiplier covers: small frequency drift,
      // counter rewrites and bounded extra delay.
      wp.adversary.enabled = true;
      wp.adversary.freq_drift = 0.1;
      wp.adversary.p_freq = 0.3;
      wp.adversary.p_counter = 0.3;
      wp.adversary.counter_back = ms(p["term_ms"]);
      wp.adversary.counter_forward = ms(p["term_ms"]);
      wp.adversary.p_delay = 0.1;
      wp.adversary.max_extra_delay = us(p["delay_us"]);
    }
    sim::SimWorld world(wp);
    LeaseConfig lc;
    lc.lease_term = ms(p["term_ms"]);
    lc.granter_multiplier = p["multiplier"];
    lc.renew_fraction = p["renew_fraction"];

    auto source = [&] {
      sim::InterruptSource src;
      src.rate_hz = p["rate_hz"];
      src.cost = sim::calibration::kInterruptCost;
      return src;
    };
    const Nanos poll = us(p["poll_us"]);
    world.add_host(source(), std::min(poll, Nanos(100us)));
    GranterOptions g;
    g.lease = lc;
    world.add_granter(0, g);
    bool write_waiting = false;
    world.granter(0).set_admission([&](const GranterEngine& ge, const ProtocolMessage& m) {
      auto held_by_other = [&](std::uint64_t id) {
        const GranterState* st = ge.lease(LeaseId{id});
        return st && st->grant && st->grant->holder != m.holder;
      };
      switch (raw(m.lease_id)) {
        case kWrite:
          write_waiting = held_by_other(kReadA);
          return !write_waiting;
        case kReadA: return !write_waiting && !held_by_other(kWrite);
        default: return !held_by_other(kWrite);
      }
    });

    HolderOptions ho;
    ho.response_timeout = std::max(Nanos(1ms), 4 * wp.network.base_delay);
    ho.denied_backoff = lc.lease_term / 5;
    auto add = [&](std::uint32_t host, std::uint64_t id) {
      Lease lease = init_lease(lc.lease_term, LeaseId{id});
      lease.config = lc;
      return world.add_holder(host, lease, 0, ho);
    };
    world.add_host(source(), poll);
    world.add_host(source(), poll);
    const std::size_t read_a = add(1, kReadA);
    const std::size_t read_b = add(2, kReadB);
    const std::size_t write_b = add(2, kWrite);
    world.set_holder_active(write_b, false);

    Rng ops(mix_seed(p.seed, 0xca5e));
    const Nanos op_interval = ms(p["op_interval_ms"]);
    Nanos next_a{0}, next_b{0};
    bool writing = false;
    std::uint64_t reads = 0, writes = 0;
    const Effect payload(8, 0);
    world.set_step_hook([&](std::uint32_t h) {
      const Nanos now = world.host(h).now();
      if (h == 1 && now >= next_a) {
        if (world.submit(read_a, payload).outcome == SubmitOutcome::Submitted) ++reads;
        next_a = now + op_interval;
      } else if (h == 2) {
        if (writing) {
          if (world.holder(write_b).usable() &&
              world.submit(write_b, payload).outcome == SubmitOutcome::Submitted) {
            ++writes;
            writing = false;
            world.set_holder_active(write_b, false);
            next_b = now + op_interval;
          }
        } else if (now >= next_b) {
          if (ops.bernoulli(p["write_share"])) {
            writing = true;
            world.set_holder_active(write_b, true);
          } else {
            if (world.submit(read_b, payload).outcome == SubmitOutcome::Submitted) ++reads;
            next_b = now + op_interval;
          }
        }
      }
    });
    world.run_until(plan.horizon);
    world.finish();
    const sim::Trace& t = world.trace();
    const RunMetrics m =
        checked_metrics(t, {plan.experiment, p.seed, plan.horizon, Nanos(30)}, plan.allow_violations);

    // Granter-side holder of each lease over time, replayed in time order.
    std::vector<const sim::TraceEvent*> events;
    for (const auto& e : t.events) events.push_back(&e);
    std::stable_sort(events.begin(), events.end(), [](auto* a, auto* b) { return a->time < b->time; });
    std::map<std::uint64_t, std::uint32_t> owner;  // lease -> holder host
    std::uint64_t stale = 0;
    for (const sim::TraceEvent* e : events) {
      switch (e->kind) {
        case sim::TraceKind::GrantInstalled:
        case sim::TraceKind::GrantExtended: owner[e->lease] = e->peer; break;
        case sim::TraceKind::GrantCleared: owner.erase(e->lease); break;
        case sim::TraceKind::Effect: {
          const std::uint64_t conflict = e->lease == kWrite ? kReadA : kWrite;
          auto it = owner.find(conflict);
          if (it != owner.end() && it->second != e->host) ++stale;
          break;
        }
        default: break;
      }
    }
    const double secs = m.horizon_s;
    rows.add(p, {static_cast<double>(message_count(t)) / secs, static_cast<double>(reads),
                 static_cast<double>(writes), static_cast<double>(stale),
                 static_cast<double>(t.count(sim::TraceKind::GrantDenied)), m.safe ? 1.0 : 0.0});
  }
  return rows.take();
}

}  // namespace tlease::exp
