#include "tlease/model/conformance.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace tlease::model {

namespace {

template <class T>
T narrow(std::int64_t v, const char* what) {
  if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max())
    throw std::out_of_range(std::string("lockstep value out of model range: ") + what);
  return static_cast<T>(v);
}

LH phase_of(HolderPhase p) {
  switch (p) {
    case HolderPhase::Created: return LH::Created;
    case HolderPhase::Pending: return LH::Pending;
    case HolderPhase::ValidLease: return LH::ValidLease;
    case HolderPhase::Blocked: return LH::Blocked;
    case HolderPhase::Interrupted: return LH::Interrupted;
  }
  return LH::Created;
}

MsgType type_of(MessageKind k) {
  switch (k) {
    case MessageKind::ReqLease: return MsgType::ReqLease;
    case MessageKind::Granted: return MsgType::Granted;
    case MessageKind::NotGranted: return MsgType::NotGranted;
  }
  return MsgType::ReqLease;
}

bool contains(const std::vector<Transition>& ts, const State& s) {
  return std::any_of(ts.begin(), ts.end(), [&](const Transition& t) { return t.next == s; });
}

bool has_request(const State& s, const ProtocolMessage& m) {
  return std::any_of(s.msgs.begin(), s.msgs.end(), [&](const Msg& x) {
    return x.type == MsgType::ReqLease && x.h == raw(m.holder) && x.epoch == m.epoch && x.ts == m.timestamp.count();
  });
}

}  // namespace

ModelConfig model_config(const sim::LockstepParams& p) {
  ModelConfig cfg;
  cfg.holders = p.holders;
  cfg.lease_time = p.lease_time;
  cfg.drift = p.drift;
  cfg.freq_drift = p.freq_drift;
  cfg.max_now = p.max_now;
  cfg.attacker = p.attacker;
  cfg.multiplier = p.multiplier;
  cfg.validate();
  return cfg;
}

State abstract_state(const sim::LockstepSim& sim, const ModelConfig& cfg) {
  State s;
  s.now = narrow<std::uint8_t>(sim.now(), "now");
  for (std::size_t i = 0; i < sim.holders().size(); ++i) {
    const HolderState& x = sim.holders()[i];
    Holder h;
    h.phase = phase_of(x.phase);
    h.epoch = narrow<std::uint8_t>(static_cast<std::int64_t>(x.epoch), "epoch");
    h.expire = x.phase == HolderPhase::Created ? kInf : narrow<std::int16_t>(x.expire_timer.count(), "expire");
    h.freq = sim.holder_freq(i);
    h.int_ticks = narrow<std::uint8_t>(sim.holder_interrupted_ticks(i), "interrupted ticks");
    h.req_ts = narrow<std::uint8_t>(x.request_ts.count(), "request ts");
    s.lh.push_back(h);
  }
  const GranterState& g = sim.granter();
  s.g.interrupted = g.phase == GranterPhase::Interrupted;
  s.g.freq = sim.granter_freq();
  s.g.int_ticks = narrow<std::uint8_t>(sim.granter_interrupted_ticks(), "interrupted ticks");
  if (g.grant) {
    s.g.granted = true;
    s.g.rec_h = narrow<std::uint8_t>(raw(g.grant->holder), "holder");
    s.g.rec_ts = narrow<std::uint8_t>(g.grant->timestamp.count(), "grant ts");
    s.g.rec_epoch = narrow<std::uint8_t>(static_cast<std::int64_t>(g.grant->epoch), "grant epoch");
    s.g.expire = narrow<std::int16_t>(g.expire_timer.count(), "granter expire");
  }
  for (const ProtocolMessage& m : sim.messages()) {
    Msg x;
    x.type = type_of(m.kind);
    x.h = narrow<std::uint8_t>(raw(m.holder), "holder");
    x.epoch = narrow<std::uint8_t>(static_cast<std::int64_t>(m.epoch), "msg epoch");
    x.ts = narrow<std::uint8_t>(m.timestamp.count(), "msg ts");
    x.send_ts = narrow<std::uint8_t>(m.send_timestamp.count(), "msg send ts");
    x.arrived = true;
    s.msgs.push_back(x);
  }
  std::sort(s.msgs.begin(), s.msgs.end(), [](const Msg& a, const Msg& b) { return a.key() < b.key(); });
  normalize(s, cfg, Mode::Safety);
  return s;
}

ConformanceReport simulate_conformance(const ConformanceOptions& opts) {
  const ModelConfig cfg = model_config(opts.params);
  ConformanceReport report;
  for (std::size_t t = 0; t < opts.traces; ++t) {
    sim::LockstepParams p = opts.params;
    p.seed = mix_seed(opts.seed, t);
    sim::LockstepSim sim(p);
    State before = abstract_state(sim, cfg);
    ++report.traces;
    bool diverged = false;
    for (std::size_t k = 0; k < opts.max_steps && !diverged; ++k) {
      const auto step = sim.step();
      if (!step) break;
      ++report.steps;
      const State after = abstract_state(sim, cfg);
      std::string reason;
      if (std::string why = type_ok(after, cfg); !why.empty()) {
        reason = "TypeOK: " + why;
      } else {
        const auto succ = next_states(before, cfg, Mode::Safety);
        bool ok = contains(succ, after);
        if (!ok && step->action == sim::LockstepAction::Tick) {
          for (const Transition& tr : succ) {
            if (tr.label.act != Act::Tick) continue;
            ok = contains(next_states(tr.next, cfg, Mode::Safety), after);
          }
        }
        // Dropping a dead reply, or rejecting a request the abstraction merged
        // into a newer one, leaves the abstract state alone.
        if (!ok && step->action == sim::LockstepAction::Receive && step->ignored) ok = after == before;
        if (!ok && step->action == sim::LockstepAction::Process && !has_request(before, step->msg))
          ok = after == before;
        if (!ok) reason = "no model action produces the implementation state";
      }
      if (!reason.empty()) {
        diverged = true;
        ++report.divergences;
        if (!report.first) report.first = Divergence{t, k, sim::describe(*step), reason, before, after};
      }
      before = after;
    }
  }
  return report;
}

std::string to_json(const Divergence& d, const ModelConfig& cfg) {
  nlohmann::ordered_json j;
  j["trace"] = d.trace;
  j["step"] = d.step;
  j["action"] = d.action;
  j["reason"] = d.reason;
  j["before"] = nlohmann::ordered_json::parse(to_json(d.before, cfg));
  j["after"] = nlohmann::ordered_json::parse(to_json(d.after, cfg));
  return j.dump();
}

}  // namespace tlease::model
