#include "tlease/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tlease::sim {

class SimWorld::SimTransport final : public Transport {
 public:
  SimTransport(SimWorld& world, std::size_t endpoint) : world_(world), endpoint_(endpoint) {}
  void send(const ProtocolMessage& msg) override { world_.send_from(endpoint_, msg); }
  std::optional<ProtocolMessage> poll() override { return world_.poll_for(endpoint_); }

 private:
  SimWorld& world_;
  std::size_t endpoint_;
};

class SimWorld::TraceSink final : public EffectSink {
 public:
  explicit TraceSink(SimWorld& world) : world_(world) {}
  void emit(const HolderState& lease, std::span<const std::uint8_t> effect) override {
    const std::uint32_t h = raw(lease.holder);
    TraceEvent e;
    e.time = world_.host(h).now();
    e.kind = TraceKind::Effect;
    e.host = h;
    e.lease = raw(lease.lease_id);
    e.epoch = lease.epoch;
    e.timer = lease.expire_timer;
    e.value = static_cast<std::int64_t>(effect.size());
    world_.record(e);
  }

 private:
  SimWorld& world_;
};

SimWorld::SimWorld(WorldParams params)
    : params_(std::move(params)),
      rng_(mix_seed(params_.seed, 0x5eed)),
      net_rng_(rng_.fork(0xfeed)),
      sink_(std::make_unique<TraceSink>(*this)) {
  Rng key_rng = rng_.fork(0xc0de);
  for (auto& b : key_) b = static_cast<std::uint8_t>(key_rng.next());
}

SimWorld::~SimWorld() = default;

std::uint32_t SimWorld::add_host(InterruptSource interrupts, Nanos poll_interval) {
  if (poll_interval <= Nanos::zero()) throw std::invalid_argument("poll interval must be positive");
  const auto index = static_cast<std::uint32_t>(hosts_.size());
  HostEvents events;
  events.on_interrupt = [this, index](Nanos at, const Window& w) {
    TraceEvent e;
    e.time = at;
    e.kind = TraceKind::Interrupt;
    e.host = index;
    e.value = (w.end - w.start).count();
    trace_.add(e);
  };
  events.on_clock = [this, index](Nanos at, const ClockAction& a, bool accepted) {
    TraceEvent e;
    e.time = at;
    e.kind = TraceKind::ClockAction;
    e.host = index;
    e.flag = accepted;
    e.value = a.set_freq ? std::llround(a.factor * 1e6) : static_cast<std::int64_t>(a.value);
    e.detail = a.set_freq ? "set_freq" : "set_counter";
    trace_.add(e);
  };
  HostSlot slot;
  slot.host = std::make_unique<SimHost>(index, std::move(interrupts), rng_.fork(index), std::move(events));
  slot.poll_interval = poll_interval;

  const AdversaryParams& adv = params_.adversary;
  slot.host->set_freq_bound(adv.freq_drift);
  if (adv.enabled && (adv.p_freq > 0.0 || adv.p_counter > 0.0)) {
    auto arng = std::make_shared<Rng>(rng_.fork(0xad00 + index));
    slot.host->set_window_adversary([arng, adv](const Window& w, std::uint64_t counter_now) {
      std::vector<ClockAction> out;
      if (arng->bernoulli(adv.p_freq)) {
        ClockAction a{w.start, true, 1.0, 0};
        if (adv.extremes_only)
          a.factor = arng->bernoulli(0.5) ? 1.0 - adv.freq_drift : 1.0 + adv.freq_drift;
        else
          a.factor = arng->uniform(1.0 - adv.freq_drift, 1.0 + adv.freq_drift);
        out.push_back(a);
      }
      if (arng->bernoulli(adv.p_counter)) {
        const double lo = -static_cast<double>(adv.counter_back.count());
        const double hi = static_cast<double>(adv.counter_forward.count());
        const double target = static_cast<double>(counter_now) + arng->uniform(lo, hi);
        out.push_back({w.start, false, 1.0, static_cast<std::uint64_t>(std::max(0.0, target))});
      }
      return out;
    });
  }
  hosts_.push_back(std::move(slot));
  schedule(Nanos::zero(), index, true);
  return index;
}

std::size_t SimWorld::add_endpoint(std::uint32_t host) {
  if (host >= hosts_.size()) throw std::invalid_argument("unknown host index");
  Endpoint ep;
  ep.host = host;
  const auto id = static_cast<std::uint32_t>(endpoints_.size() + 1);
  if (params_.network.seal) {
    ep.channel = std::make_unique<wire::SecureChannel>(key_, id);
    ep.channel->set_drop_hook([this, host](wire::OpenError err, std::uint32_t) {
      TraceEvent e;
      e.time = hosts_[host].host->now();
      e.kind = TraceKind::AuthDrop;
      e.host = host;
      e.detail = wire::to_string(err);
      trace_.add(e);
    });
  }
  endpoints_.push_back(std::move(ep));
  return endpoints_.size() - 1;
}

EngineObserver SimWorld::observer_for(std::uint32_t host) {
  return [this, host](const EngineEvent& ev) {
    TraceEvent e;
    e.time = hosts_[host].host->now();
    e.kind = trace_kind(ev.kind);
    e.host = host;
    e.lease = raw(ev.lease);
    e.epoch = ev.epoch;
    e.phase = ev.phase;
    e.timer = ev.timer;
    e.peer = raw(ev.peer);
    e.flag = ev.flag;
    e.value = static_cast<std::int64_t>(ev.value);
    e.detail = ev.detail;
    trace_.add(e);
  };
}

std::size_t SimWorld::add_granter(std::uint32_t host, GranterOptions opts) {
  const std::size_t ep = add_endpoint(host);
  GranterSlot& g = granters_.emplace_back();
  g.host = host;
  g.endpoint = ep;
  g.hw = std::make_unique<SimHardware>(*hosts_[host].host, params_.hardware, rng_.fork(0x6000 + ep));
  g.net = std::make_unique<SimTransport>(*this, ep);
  opts.self = HostId{host};
  g.engine = std::make_unique<GranterEngine>(*g.hw, *g.net, opts, observer_for(host));
  if (!params_.adversary.target_granter) hosts_[host].host->set_window_adversary({});
  hosts_[host].granters.push_back(granters_.size() - 1);
  return granters_.size() - 1;
}

std::size_t SimWorld::add_holder(std::uint32_t host, const Lease& lease, std::size_t granter, HolderOptions opts,
                                 WorkloadParams workload) {
  if (granter >= granters_.size()) throw std::invalid_argument("unknown granter index");
  const std::size_t ep = add_endpoint(host);
  endpoints_[ep].peer = granters_[granter].endpoint;
  HolderSlot& h = holders_.emplace_back();
  h.host = host;
  h.endpoint = ep;
  h.hw = std::make_unique<SimHardware>(*hosts_[host].host, params_.hardware, rng_.fork(0x7000 + ep));
  h.net = std::make_unique<SimTransport>(*this, ep);
  h.workload = workload;
  h.mode = opts.mode;
  h.next_submit = workload.submit_interval;
  h.engine = std::make_unique<HolderEngine>(lease, HostId{host}, *h.hw, *h.net, opts, observer_for(host));
  hosts_[host].holders.push_back(holders_.size() - 1);
  return holders_.size() - 1;
}

SubmitReport SimWorld::submit(std::size_t i, const Effect& effect, SubmitOptions opts) {
  return holders_[i].engine->submit(effect, *sink_, opts);
}

void SimWorld::schedule(Nanos t, std::uint32_t host, bool periodic) {
  queue_.push(Wake{t, wake_seq_++, host, periodic});
}

void SimWorld::send_from(std::size_t from, const ProtocolMessage& msg) {
  Endpoint& src = endpoints_[from];
  const Nanos now = hosts_[src.host].host->now();

  std::optional<std::size_t> dest = src.peer;
  if (!dest) {
    auto it = src.routes.find({raw(msg.holder), raw(msg.lease_id)});
    if (it != src.routes.end()) dest = it->second;
  }
  auto dropped = [&](std::string_view why) {
    TraceEvent e;
    e.time = now;
    e.kind = TraceKind::MsgDrop;
    e.host = src.host;
    e.lease = raw(msg.lease_id);
    e.epoch = msg.epoch;
    e.peer = raw(msg.holder);
    e.detail = why;
    trace_.add(e);
  };
  if (!dest) return dropped("unroutable");

  Nanos extra{0};
  for (const Action& a : params_.message_rules) {
    if (now < a.at || now >= a.until) continue;
    if (a.match_kind && *a.match_kind != msg.kind) continue;
    if (a.match_holder && *a.match_holder != raw(msg.holder)) continue;
    if (a.kind == ActionKind::DropMsg) return dropped("adversary");
    if (a.kind == ActionKind::DelayMsg) extra += a.extra;
  }
  const AdversaryParams& adv = params_.adversary;
  const NetworkParams& net = params_.network;
  if (adv.enabled && adv.p_drop > 0.0 && net_rng_.bernoulli(adv.p_drop)) return dropped("adversary");
  if (net.loss > 0.0 && net_rng_.bernoulli(net.loss)) return dropped("loss");
  if (adv.enabled && adv.p_delay > 0.0 && net_rng_.bernoulli(adv.p_delay)) {
    extra += Nanos(static_cast<std::int64_t>(net_rng_.uniform(0.0, static_cast<double>(adv.max_extra_delay.count()))));
  }
  Nanos delay = net.base_delay + extra;
  if (net.jitter_mean > Nanos::zero())
    delay += Nanos(static_cast<std::int64_t>(net_rng_.exponential(static_cast<double>(net.jitter_mean.count()))));
  if (net.max_delay > Nanos::zero()) delay = std::min(delay, net.max_delay);
  if (extra > Nanos::zero()) {
    TraceEvent e;
    e.time = now;
    e.kind = TraceKind::MsgDelay;
    e.host = src.host;
    e.lease = raw(msg.lease_id);
    e.peer = raw(msg.holder);
    e.value = extra.count();
    trace_.add(e);
  }

  Datagram d;
  d.arrival = now + delay;
  d.seq = net_seq_++;
  d.from = from;
  if (src.channel)
    d.sealed = src.channel->seal_message(msg);
  else
    d.plain = msg;
  Endpoint& dst = endpoints_[*dest];
  dst.inbox.emplace(std::make_pair(d.arrival, d.seq), d);
  schedule(d.arrival, dst.host, false);
}

std::optional<ProtocolMessage> SimWorld::poll_for(std::size_t endpoint) {
  Endpoint& ep = endpoints_[endpoint];
  const Nanos now = hosts_[ep.host].host->now();
  while (!ep.inbox.empty() && ep.inbox.begin()->first.first <= now) {
    const Datagram d = ep.inbox.begin()->second;
    ep.inbox.erase(ep.inbox.begin());
    std::optional<ProtocolMessage> msg;
    if (d.sealed)
      msg = ep.channel->open_message(*d.sealed);
    else
      msg = d.plain;
    if (!msg) continue;
    if (msg->kind == MessageKind::ReqLease) ep.routes[{raw(msg->holder), raw(msg->lease_id)}] = d.from;
    return msg;
  }
  return std::nullopt;
}

void SimWorld::emit_claim(HolderSlot& slot) {
  const HolderEngine& eng = *slot.engine;
  SimHost& host = *hosts_[slot.host].host;
  const bool usable = eng.usable();
  Nanos until = slot.hw->last_read_time();
  if (usable) {
    __extension__ using Wide = __int128;
    const Wide timer = eng.state().expire_timer.count();
    until += Nanos(static_cast<std::int64_t>(timer * 1'000'000 / host.freq_ppm()));
    if (slot.mode == AccountingMode::Verified) {
      // The holder stops trusting its timer at the next interrupt after its read.
      const std::uint64_t seen = slot.hw->seen_generation();
      const Nanos cap = host.generation() > seen ? host.interrupt_start(seen + 1) : host.next_interrupt_start();
      until = std::min(until, cap);
    }
  }
  const bool positive = usable && until > host.now();
  const Nanos moved = until > slot.claim_until ? until - slot.claim_until : slot.claim_until - until;
  if (positive == slot.claimed && (!positive || moved <= Nanos(1000))) return;
  slot.claimed = positive;
  slot.claim_until = until;
  TraceEvent e;
  e.time = host.now();
  e.kind = TraceKind::Claim;
  e.host = slot.host;
  e.lease = raw(eng.state().lease_id);
  e.epoch = eng.state().epoch;
  e.timer = eng.state().expire_timer;
  e.flag = positive;
  e.value = until.count();
  trace_.add(e);
}

void SimWorld::step(std::uint32_t h) {
  HostSlot& hs = hosts_[h];
  for (std::size_t g : hs.granters) granters_[g].engine->poll();
  for (std::size_t i : hs.holders) {
    HolderSlot& slot = holders_[i];
    if (!slot.active) continue;
    slot.engine->poll();
    const WorkloadParams& w = slot.workload;
    if (w.submit_interval > Nanos::zero() && hs.host->now() >= slot.next_submit) {
      Effect payload(8);
      for (std::size_t b = 0; b < payload.size(); ++b) payload[b] = static_cast<std::uint8_t>(slot.submitted >> (8 * b));
      ++slot.submitted;
      SubmitOptions opts;
      opts.commit_hint = w.commit_hint;
      opts.tail = w.submit_tail;
      slot.engine->submit(payload, *sink_, opts);
      while (slot.next_submit <= hs.host->now()) slot.next_submit += w.submit_interval;
    }
  }
  if (step_hook_) step_hook_(h);
  for (std::size_t i : hs.holders) emit_claim(holders_[i]);
}

void SimWorld::run_until(Nanos t) {
  while (!queue_.empty() && queue_.top().t <= t) {
    const Wake w = queue_.top();
    queue_.pop();
    HostSlot& hs = hosts_[w.host];
    if (hs.host->crashed) continue;
    hs.host->idle_until(w.t);
    step(w.host);
    if (w.periodic) schedule(std::max(w.t + hs.poll_interval, hs.host->now()), w.host, true);
  }
  reached_ = std::max(reached_, t);
}

void SimWorld::finish() {
  for (const HolderSlot& h : holders_) {
    TraceEvent e;
    e.time = hosts_[h.host].host->now();
    e.kind = TraceKind::Summary;
    e.host = h.host;
    e.lease = raw(h.engine->state().lease_id);
    e.epoch = h.engine->account().epoch;
    e.value = h.engine->account().accumulated.count();
    e.timer = h.hw->last_read_enclave() - h.hw->first_read_enclave();
    e.detail = "holder";
    trace_.add(e);
  }
  for (const GranterSlot& g : granters_) {
    TraceEvent e;
    e.time = hosts_[g.host].host->now();
    e.kind = TraceKind::Summary;
    e.host = g.host;
    e.value = static_cast<std::int64_t>(g.engine->counters().granted);
    e.detail = "granter";
    trace_.add(e);
  }
  for (const HostSlot& hs : hosts_) {
    TraceEvent e;
    e.time = hs.host->now();
    e.kind = TraceKind::Summary;
    e.host = hs.host->index();
    e.value = static_cast<std::int64_t>(hs.host->interrupt_count());
    e.timer = hs.host->interrupted_total();
    e.detail = "host";
    trace_.add(e);
  }
}

namespace {

InterruptSource interrupt_source(const Scenario& s, std::uint32_t host, double rate) {
  InterruptSource src;
  src.rate_hz = rate;
  src.cost = s.hardware.interrupt_cost;
  src.min_extra = s.interrupts.min_duration;
  src.max_extra = s.interrupts.max_duration;
  for (const Action& a : s.actions) {
    if (a.kind == ActionKind::Interrupt && a.host == host)
      src.scripted.push_back({a.at, a.at + s.hardware.interrupt_cost + a.duration});
  }
  return src;
}

}  // namespace

std::unique_ptr<SimWorld> build_world(const Scenario& s) {
  s.validate();
  WorldParams p;
  p.seed = s.seed;
  p.hardware = s.hardware;
  p.network = s.network;
  p.adversary = s.adversary;
  for (const Action& a : s.actions)
    if (a.kind == ActionKind::DelayMsg || a.kind == ActionKind::DropMsg) p.message_rules.push_back(a);
  auto world = std::make_unique<SimWorld>(std::move(p));

  world->add_host(interrupt_source(s, 0, s.interrupts.granter_rate_hz), s.granter_poll_interval);
  GranterOptions g;
  g.lease = s.lease;
  g.freq = s.freq;
  g.verify_frequency = s.verify_frequency;
  g.mode = s.mode();
  world->add_granter(0, g);

  HolderOptions ho;
  ho.freq = s.freq;
  ho.verify_frequency = s.verify_frequency;
  ho.mode = s.mode();
  ho.response_timeout = s.effective_response_timeout();
  ho.denied_backoff = s.denied_backoff;
  for (std::uint32_t i = 1; i <= s.holders; ++i) {
    const std::uint32_t host = world->add_host(interrupt_source(s, i, s.interrupts.holder_rate_hz), s.poll_interval);
    Lease lease = init_lease(s.lease.lease_term, LeaseId{s.shared_lease ? 1u : i});
    lease.config = s.lease;
    world->add_holder(host, lease, 0, ho, s.workload);
  }
  for (const Action& a : s.actions) {
    if (a.kind == ActionKind::SetFreq) world->host(a.host).add_clock_action({a.at, true, a.factor, 0});
    if (a.kind == ActionKind::SetCounter) world->host(a.host).add_clock_action({a.at, false, 1.0, a.value});
  }
  return world;
}

Trace run_scenario(const Scenario& s) {
  auto world = build_world(s);
  world->run_until(s.horizon);
  world->finish();
  return std::move(world->trace());
}

}  // namespace tlease::sim
