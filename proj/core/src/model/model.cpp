#include "tlease/model/model.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace tlease::model {

std::string_view to_string(LH p) {
  switch (p) {
    case LH::Created: return "created";
    case LH::Pending: return "pending";
    case LH::ValidLease: return "validLease";
    case LH::Blocked: return "blocked";
    case LH::Interrupted: return "interrupted";
  }
  return "?";
}

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::ReqLease: return "ReqLease";
    case MsgType::Granted: return "Granted";
    case MsgType::NotGranted: return "NotGranted";
  }
  return "?";
}

std::string_view to_string(Act a) {
  switch (a) {
    case Act::Tick: return "Tick";
    case Act::LHReqLeaseFresh: return "LHReqLeaseFresh";
    case Act::LHReqLeaseToExtend: return "LHReqLeaseToExtend";
    case Act::LHReceive: return "LHReceive";
    case Act::LHTimeout: return "LHTimeout";
    case Act::LHEnclaveInterrupt: return "LHEnclaveInterrupt";
    case Act::LHEnclaveResume: return "LHEnclaveResume";
    case Act::AChangeFreq: return "AChangeFreq";
    case Act::GProcessRequest: return "GProcessRequest";
    case Act::GLeaseExpires: return "GLeaseExpires";
    case Act::GEnclaveInterrupt: return "GEnclaveInterrupt";
    case Act::GEnclaveResume: return "GEnclaveResume";
    case Act::AChangeFreqGranter: return "AChangeFreqGranter";
    case Act::Deliver: return "Deliver";
  }
  return "?";
}

std::string describe(const Label& l) {
  std::string out(to_string(l.act));
  switch (l.act) {
    case Act::Tick:
    case Act::GLeaseExpires:
    case Act::GEnclaveResume:
      break;
    case Act::GEnclaveInterrupt:
    case Act::AChangeFreqGranter:
      out += "(" + std::to_string(l.arg) + ")";
      break;
    case Act::GProcessRequest:
    case Act::Deliver:
      out += "(msg " + std::to_string(l.arg) + ")";
      break;
    default:
      out += "(h" + std::to_string(l.h);
      if (l.act == Act::LHEnclaveInterrupt || l.act == Act::AChangeFreq || l.act == Act::LHReceive)
        out += ", " + std::to_string(l.arg);
      out += ")";
  }
  return out;
}

std::int16_t ModelConfig::holder_term() const { return static_cast<std::int16_t>((lease_time - drift) * 100); }

std::int16_t ModelConfig::granter_term() const {
  return static_cast<std::int16_t>(multiplier * (lease_time + drift) * 100);
}

std::int16_t ModelConfig::freq_percent(std::uint8_t index) const {
  const auto d = static_cast<std::int16_t>(freq_drift);
  return index == 0 ? static_cast<std::int16_t>(100 - d) : index == 1 ? 100 : static_cast<std::int16_t>(100 + d);
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(what);
  };
  require(holders >= 1 && holders <= 4, "holders must be in [1, 4]");
  require(lease_time >= 1, "LeaseTime must be >= 1");
  require(drift < lease_time, "Drift must be < LeaseTime");
  require(freq_drift < 100, "FreqDrift must be < 100 percent");
  require(max_now >= 1 && max_now <= 120, "MaxNow must be in [1, 120]");
  require(multiplier >= 1, "multiplier must be >= 1");
  require(static_cast<std::uint64_t>(multiplier) * (lease_time + drift) * 100 <= 32767,
          "granter term does not fit the model's timer range");
  require(renew_fraction > 0.0 && renew_fraction <= 1.0, "renew fraction must be in (0, 1]");
  require(interrupted_max_period >= 1 && interrupted_max_period <= 100, "InterruptedMaxPeriod must be in [1, 100]");
  require(not_interrupted_min_period <= 1000, "NotInterruptedMinPeriod too large");
  require(msg_delivery_max_delay <= max_now, "MsgDeliveryMaxDelay must be <= MaxNow");
}

namespace {

bool is_reply(const Msg& m) { return m.type != MsgType::ReqLease; }
std::uint8_t sent_at(const Msg& m) { return is_reply(m) ? m.send_ts : m.ts; }

void add_msg(State& s, const Msg& m) {
  auto it = std::lower_bound(s.msgs.begin(), s.msgs.end(), m,
                             [](const Msg& a, const Msg& b) { return a.key() < b.key(); });
  if (it != s.msgs.end() && it->key() == m.key()) return;  // set semantics
  s.msgs.insert(it, m);
}

bool renewal_due(const Holder& h, const ModelConfig& cfg) {
  return h.phase == LH::ValidLease && h.expire != kInf &&
         static_cast<double>(h.expire) < cfg.renew_fraction * cfg.holder_term();
}

std::int16_t tick_down(std::int16_t timer, std::int16_t by) {
  if (timer == kInf) return kInf;
  return static_cast<std::int16_t>(std::max(0, timer - by));
}

std::vector<std::int16_t> epoch_choices(const ModelConfig& cfg, Mode mode) {
  if (mode == Mode::Safety) return {0};
  return {static_cast<std::int16_t>(cfg.not_interrupted_min_period), kInf};
}

bool may_interrupt(std::int16_t epoch_timer, const ModelConfig& cfg, Mode mode) {
  return mode == Mode::Safety || !cfg.fairness.not_interrupted_min || epoch_timer == 0;
}

bool obligations_pending(const State& s, const ModelConfig& cfg) {
  if (!s.g.interrupted) {
    if (s.g.granted && s.g.expire == 0) return true;
    for (const Msg& m : s.msgs)
      if (m.type == MsgType::ReqLease && m.arrived && !m.processed) return true;
  }
  for (std::size_t h = 0; h < s.lh.size(); ++h) {
    const Holder& x = s.lh[h];
    switch (x.phase) {
      case LH::Created:
      case LH::Blocked:
        return true;
      case LH::ValidLease:
        if (renewal_due(x, cfg)) return true;
        break;
      case LH::Pending:
        if (x.expire == 0) return true;
        for (const Msg& m : s.msgs)
          if (is_reply(m) && m.h == h && m.arrived) return true;
        break;
      case LH::Interrupted:
        break;
    }
  }
  return false;
}

void canonicalize_holders(State& s) {
  std::vector<std::uint8_t> order(s.lh.size());
  std::iota(order.begin(), order.end(), 0);
  auto tuple_of = [&](std::uint8_t i) {
    const Holder& h = s.lh[i];
    return std::tuple(h.phase, h.epoch, h.expire, h.epoch_timer, h.freq, h.int_ticks, h.req_ts);
  };
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return tuple_of(a) < tuple_of(b); });
  std::vector<std::uint8_t> rename(s.lh.size());
  std::vector<Holder> lh(s.lh.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    rename[order[k]] = static_cast<std::uint8_t>(k);
    lh[k] = s.lh[order[k]];
  }
  s.lh = std::move(lh);
  if (s.g.granted) s.g.rec_h = rename[s.g.rec_h];
  for (Msg& m : s.msgs) m.h = rename[m.h];
  std::sort(s.msgs.begin(), s.msgs.end(), [](const Msg& a, const Msg& b) { return a.key() < b.key(); });
}

bool live_request(const Holder& h, std::uint8_t now) {
  return h.phase == LH::Pending || (h.phase == LH::Blocked && h.req_ts == now);
}

// Safety-only quotient. A holder's request is live while a reply to it can
// still be consumed; every other request is stale, and all a stale request can
// do is install or refresh a grant for its holder. The newest stale request
// dominates the rest, a grant recorded from any stale request behaves as if
// recorded from the newest one, and several replies differing only in send
// time are interchangeable. Timers and timestamps nobody reads any more are
// cleared.
void reduce_for_safety(State& s) {
  for (std::size_t hi = 0; hi < s.lh.size(); ++hi) {
    const auto h = static_cast<std::uint8_t>(hi);
    Holder& x = s.lh[hi];
    const bool live = live_request(x, s.now);
    auto stale = [&](const Msg& m) {
      return m.type == MsgType::ReqLease && m.h == h && !(live && m.epoch == x.epoch && m.ts == x.req_ts);
    };
    const Msg* newest = nullptr;
    for (const Msg& m : s.msgs)
      if (stale(m)) newest = &m;  // sorted by key, so the last one wins
    if (newest) {
      const Msg keep = *newest;
      std::erase_if(s.msgs, [&](const Msg& m) { return stale(m) && !(m == keep); });
      if (s.g.granted && s.g.rec_h == h && !(live && s.g.rec_epoch == x.epoch && s.g.rec_ts == x.req_ts)) {
        s.g.rec_epoch = keep.epoch;
        s.g.rec_ts = keep.ts;
      }
    }
    if (!live) x.req_ts = 0;
    if (x.phase != LH::Pending && x.phase != LH::ValidLease) x.expire = kInf;
  }
  // Replies are sorted by send time within (type, h, epoch, ts); keep the first.
  std::vector<Msg> kept;
  kept.reserve(s.msgs.size());
  for (const Msg& m : s.msgs) {
    if (is_reply(m) && !kept.empty() && is_reply(kept.back()) && kept.back().type == m.type &&
        kept.back().h == m.h && kept.back().epoch == m.epoch && kept.back().ts == m.ts)
      continue;
    kept.push_back(m);
  }
  s.msgs = std::move(kept);
}

}  // namespace

void normalize(State& s, const ModelConfig& cfg, Mode mode) {
  // A reply can only be consumed by the request it answers. Once the holder
  // has moved past that request (or can no longer re-issue it this tick) the
  // reply is dead.
  std::erase_if(s.msgs, [&](const Msg& m) {
    if (!is_reply(m)) return false;
    const Holder& h = s.lh[m.h];
    if (h.epoch != m.epoch || h.req_ts != m.ts) return true;
    if (h.phase == LH::Pending) return false;
    return !(h.phase == LH::Blocked && s.now == m.ts);
  });
  if (mode == Mode::Safety) {
    for (Msg& m : s.msgs) {
      m.arrived = true;
      m.processed = false;
    }
    for (Holder& h : s.lh) {
      h.epoch_timer = 0;
      h.int_ticks = std::min<std::uint8_t>(h.int_ticks, 1);
    }
    s.g.epoch_timer = 0;
    s.g.int_ticks = std::min<std::uint8_t>(s.g.int_ticks, 1);
    if (cfg.safety_reductions && !cfg.ignore_request_staleness) reduce_for_safety(s);
  }
  if (cfg.symmetry && s.lh.size() > 1) canonicalize_holders(s);
}

std::vector<State> initial_states(const ModelConfig& cfg, Mode mode) {
  cfg.validate();
  State base;
  base.lh.assign(cfg.holders, Holder{});
  std::vector<State> out{base};
  const auto choices = epoch_choices(cfg, mode);
  for (std::size_t host = 0; host <= cfg.holders; ++host) {
    std::vector<State> next;
    for (const State& s : out) {
      for (std::int16_t c : choices) {
        State t = s;
        (host < cfg.holders ? t.lh[host].epoch_timer : t.g.epoch_timer) = c;
        next.push_back(t);
      }
    }
    out = std::move(next);
  }
  for (State& s : out) normalize(s, cfg, mode);
  std::sort(out.begin(), out.end(), [](const State& a, const State& b) { return encode(a) < encode(b); });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool tick_allowed(const State& s, const ModelConfig& cfg) {
  const Fairness& f = cfg.fairness;
  if (f.delivery_bound) {
    for (const Msg& m : s.msgs)
      if (!m.arrived && s.now - sent_at(m) >= static_cast<int>(cfg.msg_delivery_max_delay)) return false;
  }
  if (f.interrupted_max) {
    const auto cap = cfg.interrupted_max_period;
    if (s.g.interrupted && s.g.int_ticks >= cap) return false;
    for (const Holder& h : s.lh)
      if (h.phase == LH::Interrupted && h.int_ticks >= cap) return false;
  }
  if (f.prompt_hosts && obligations_pending(s, cfg)) return false;
  return true;
}

std::vector<Transition> next_states(const State& s, const ModelConfig& cfg, Mode mode) {
  std::vector<Transition> out;
  auto push = [&](Label l, State n) {
    normalize(n, cfg, mode);
    out.push_back({l, std::move(n)});
  };
  const std::int16_t ht = cfg.holder_term();
  const std::int16_t gt = cfg.granter_term();
  const auto choices = epoch_choices(cfg, mode);
  const std::uint8_t int_cap = mode == Mode::Safety ? 1 : static_cast<std::uint8_t>(cfg.interrupted_max_period);

  if (s.now < cfg.max_now && (mode == Mode::Safety || tick_allowed(s, cfg))) {
    State n = s;
    ++n.now;
    for (Holder& h : n.lh) {
      if (h.phase == LH::Interrupted) {
        h.int_ticks = static_cast<std::uint8_t>(std::min<int>(h.int_ticks + 1, int_cap));
        continue;
      }
      if (h.phase == LH::Pending || h.phase == LH::ValidLease) h.expire = tick_down(h.expire, cfg.freq_percent(h.freq));
      h.epoch_timer = tick_down(h.epoch_timer, 1);
    }
    if (n.g.interrupted) {
      n.g.int_ticks = static_cast<std::uint8_t>(std::min<int>(n.g.int_ticks + 1, int_cap));
    } else {
      if (n.g.granted) n.g.expire = tick_down(n.g.expire, cfg.freq_percent(n.g.freq));
      n.g.epoch_timer = tick_down(n.g.epoch_timer, 1);
    }
    push({Act::Tick, 0, 0}, std::move(n));
  }

  for (std::size_t hi = 0; hi < s.lh.size(); ++hi) {
    const auto h = static_cast<std::uint8_t>(hi);
    const Holder& x = s.lh[hi];
    const bool fresh = x.phase == LH::Created || x.phase == LH::Blocked;
    if (fresh || renewal_due(x, cfg)) {
      State n = s;
      Holder& y = n.lh[hi];
      y.phase = LH::Pending;
      y.expire = ht;
      y.req_ts = s.now;
      add_msg(n, Msg{MsgType::ReqLease, h, x.epoch, s.now, 0, false, false});
      push({fresh ? Act::LHReqLeaseFresh : Act::LHReqLeaseToExtend, h, 0}, std::move(n));
    }
    if (x.phase == LH::Pending) {
      for (std::size_t i = 0; i < s.msgs.size(); ++i) {
        const Msg& m = s.msgs[i];
        if (!is_reply(m) || m.h != h || !m.arrived) continue;
        State n = s;
        n.lh[hi].phase = m.type == MsgType::Granted && x.expire > 0 ? LH::ValidLease : LH::Blocked;
        n.msgs.erase(n.msgs.begin() + static_cast<std::ptrdiff_t>(i));
        push({Act::LHReceive, h, static_cast<std::int16_t>(i)}, std::move(n));
      }
      if (x.expire == 0) {
        State n = s;
        n.lh[hi].phase = LH::Blocked;
        push({Act::LHTimeout, h, 0}, std::move(n));
      }
    }
    if (x.phase != LH::Interrupted) {
      if (may_interrupt(x.epoch_timer, cfg, mode)) {
        for (std::int16_t c : choices) {
          State n = s;
          Holder& y = n.lh[hi];
          y.phase = LH::Interrupted;
          y.int_ticks = 0;
          y.epoch_timer = c;
          push({Act::LHEnclaveInterrupt, h, c}, std::move(n));
        }
      }
    } else {
      if (x.int_ticks >= 1) {
        State n = s;
        Holder& y = n.lh[hi];
        y.phase = LH::Blocked;
        y.epoch = static_cast<std::uint8_t>(x.epoch + 1);
        y.int_ticks = 0;
        push({Act::LHEnclaveResume, h, 0}, std::move(n));
      }
      if (cfg.attacker) {
        for (std::uint8_t f = 0; f < 3; ++f) {
          if (f == x.freq) continue;
          State n = s;
          n.lh[hi].freq = f;
          push({Act::AChangeFreq, h, f}, std::move(n));
        }
      }
    }
  }

  const Granter& g = s.g;
  if (!g.interrupted) {
    for (std::size_t i = 0; i < s.msgs.size(); ++i) {
      const Msg& m = s.msgs[i];
      if (m.type != MsgType::ReqLease || !m.arrived) continue;
      State n = s;
      n.msgs[i].processed = true;
      const bool free = !g.granted;
      const bool extend = g.granted && g.rec_h == m.h &&
                          (cfg.ignore_request_staleness ||
                           std::tie(m.epoch, m.ts) >= std::tie(g.rec_epoch, g.rec_ts));
      Msg reply{MsgType::NotGranted, m.h, m.epoch, m.ts, s.now, false, false};
      if (free || extend) {
        n.g.granted = true;
        n.g.rec_h = m.h;
        n.g.rec_ts = m.ts;
        n.g.rec_epoch = m.epoch;
        n.g.expire = gt;
        reply.type = MsgType::Granted;
      }
      add_msg(n, reply);
      push({Act::GProcessRequest, m.h, static_cast<std::int16_t>(i)}, std::move(n));
    }
    if (g.granted && g.expire == 0) {
      State n = s;
      n.g.granted = false;
      n.g.rec_h = n.g.rec_ts = n.g.rec_epoch = 0;
      n.g.expire = kInf;
      push({Act::GLeaseExpires, 0, 0}, std::move(n));
    }
    if (may_interrupt(g.epoch_timer, cfg, mode)) {
      for (std::int16_t c : choices) {
        State n = s;
        n.g.interrupted = true;
        n.g.int_ticks = 0;
        n.g.epoch_timer = c;
        push({Act::GEnclaveInterrupt, 0, c}, std::move(n));
      }
    }
  } else {
    if (g.int_ticks >= 1) {
      State n = s;
      n.g.interrupted = false;
      n.g.int_ticks = 0;
      push({Act::GEnclaveResume, 0, 0}, std::move(n));
    }
    if (cfg.attacker) {
      for (std::uint8_t f = 0; f < 3; ++f) {
        if (f == g.freq) continue;
        State n = s;
        n.g.freq = f;
        push({Act::AChangeFreqGranter, 0, f}, std::move(n));
      }
    }
  }

  if (mode == Mode::Liveness) {
    for (std::size_t i = 0; i < s.msgs.size(); ++i) {
      if (s.msgs[i].arrived) continue;
      State n = s;
      n.msgs[i].arrived = true;
      push({Act::Deliver, s.msgs[i].h, static_cast<std::int16_t>(i)}, std::move(n));
    }
  }
  return out;
}

bool fair_action_enabled(const State& s, const ModelConfig& cfg, Mode mode) {
  for (const Transition& t : next_states(s, cfg, mode)) {
    bool fair = false;
    switch (t.label.act) {
      case Act::LHReqLeaseFresh:
      case Act::LHReqLeaseToExtend:
      case Act::LHReceive:
      case Act::LHTimeout:
      case Act::GProcessRequest:
      case Act::GLeaseExpires:
        fair = true;
        break;
      case Act::LHEnclaveResume:
      case Act::GEnclaveResume:
        fair = cfg.fairness.interrupted_max;
        break;
      case Act::Deliver:
        fair = cfg.fairness.delivery_bound;
        break;
      default:
        break;
    }
    if (fair && !(t.next == s)) return true;
  }
  return false;
}

std::string type_ok(const State& s, const ModelConfig& cfg) {
  const int max_epoch = static_cast<int>(cfg.max_now) + 2;
  const std::int16_t ht = cfg.holder_term();
  const std::int16_t gt = cfg.granter_term();
  auto timer_ok = [](std::int16_t t, std::int16_t hi) { return t == kInf || (t >= 0 && t <= hi); };
  if (s.now > cfg.max_now) return "now exceeds MaxNow";
  if (s.lh.size() != cfg.holders) return "holder vector size";
  for (const Holder& h : s.lh) {
    if (h.phase > LH::Interrupted) return "lhState out of range";
    if (h.epoch < 1 || h.epoch > max_epoch) return "lhEpochNumber out of range";
    if (!timer_ok(h.expire, ht)) return "lhExpireTimer out of range";
    if (h.phase == LH::ValidLease && h.expire == kInf) return "validLease without a running timer";
    if (h.freq > 2 || (!cfg.attacker && h.freq != 1)) return "lhFrequency out of range";
    if (h.req_ts > s.now) return "request timestamp in the future";
  }
  const Granter& g = s.g;
  if (!timer_ok(g.expire, gt)) return "gExpireTimer out of range";
  if (g.granted != (g.expire != kInf)) return "gExpireTimer running without a grant";
  if (g.granted && (g.rec_h >= cfg.holders || g.rec_ts > s.now || g.rec_epoch < 1)) return "gLeaseGranted malformed";
  if (g.freq > 2 || (!cfg.attacker && g.freq != 1)) return "granter frequency out of range";
  for (std::size_t i = 0; i < s.msgs.size(); ++i) {
    const Msg& m = s.msgs[i];
    if (m.h >= cfg.holders) return "message holder out of range";
    if (m.epoch < 1 || m.epoch > s.lh[m.h].epoch) return "message epoch out of range";
    if (m.ts > s.now || m.send_ts > s.now) return "message timestamp in the future";
    if (m.type == MsgType::ReqLease && m.send_ts != 0) return "ReqLease with a send timestamp";
    if (is_reply(m) && m.send_ts < m.ts) return "reply sent before its request";
    if (i > 0 && !(s.msgs[i - 1].key() < m.key())) return "msgs not a sorted set";
  }
  return {};
}

bool valid_lease(const State& s) {
  for (std::size_t h = 0; h < s.lh.size(); ++h) {
    const Holder& x = s.lh[h];
    if (x.phase == LH::ValidLease && x.expire != 0 && !(s.g.granted && s.g.rec_h == h)) return false;
  }
  return true;
}

namespace {
bool outlasts(std::int16_t epoch_timer, int remaining) { return epoch_timer == kInf || epoch_timer > remaining; }
}  // namespace

bool p1_antecedent(const State& s, const ModelConfig& cfg) {
  const int remaining = static_cast<int>(cfg.max_now) - s.now;
  if (remaining < static_cast<int>(cfg.msg_delivery_max_delay)) return false;
  if (!outlasts(s.g.epoch_timer, remaining)) return false;
  return std::any_of(s.msgs.begin(), s.msgs.end(), [](const Msg& m) { return m.type == MsgType::ReqLease; });
}

bool p1_consequent(const State& s) { return s.g.granted; }

bool p2_antecedent(const State& s, const ModelConfig& cfg) {
  const int remaining = static_cast<int>(cfg.max_now) - s.now;
  if (!s.g.granted || s.g.expire != cfg.granter_term()) return false;
  if (remaining < static_cast<int>(cfg.msg_delivery_max_delay)) return false;
  const Holder& h = s.lh[s.g.rec_h];
  if (h.phase == LH::Interrupted || !outlasts(h.epoch_timer, remaining)) return false;
  // The grant answers the holder's outstanding request, and the holder's own
  // countdown outlives the reply's delivery bound.
  return h.epoch == s.g.rec_epoch && h.phase == LH::Pending && h.req_ts == s.g.rec_ts &&
         h.expire > static_cast<std::int16_t>(cfg.msg_delivery_max_delay * 100);
}

bool p2_consequent(const State& s) {
  return std::any_of(s.lh.begin(), s.lh.end(), [](const Holder& h) { return h.phase == LH::ValidLease; });
}

std::string encode(const State& s) {
  std::string b;
  b.reserve(3 + s.lh.size() * 9 + 10 + s.msgs.size() * 6);
  auto u8 = [&](unsigned v) { b.push_back(static_cast<char>(v & 0xff)); };
  auto i16 = [&](std::int16_t v) {
    const auto u = static_cast<std::uint16_t>(v);
    u8(u >> 8);
    u8(u);
  };
  u8(s.now);
  u8(static_cast<unsigned>(s.lh.size()));
  for (const Holder& h : s.lh) {
    u8(static_cast<unsigned>(h.phase));
    u8(h.epoch);
    i16(h.expire);
    i16(h.epoch_timer);
    u8(h.freq);
    u8(h.int_ticks);
    u8(h.req_ts);
  }
  const Granter& g = s.g;
  u8((g.interrupted ? 1u : 0u) | (g.granted ? 2u : 0u));
  u8(g.rec_h);
  u8(g.rec_ts);
  u8(g.rec_epoch);
  i16(g.expire);
  i16(g.epoch_timer);
  u8(g.freq);
  u8(g.int_ticks);
  u8(static_cast<unsigned>(s.msgs.size()));
  for (const Msg& m : s.msgs) {
    u8(static_cast<unsigned>(m.type));
    u8(m.h);
    u8(m.epoch);
    u8(m.ts);
    u8(m.send_ts);
    u8((m.arrived ? 1u : 0u) | (m.processed ? 2u : 0u));
  }
  return b;
}

State decode(std::string_view b) {
  std::size_t pos = 0;
  auto u8 = [&]() -> std::uint8_t {
    if (pos >= b.size()) throw std::invalid_argument("truncated model state");
    return static_cast<std::uint8_t>(b[pos++]);
  };
  auto i16 = [&]() {
    const unsigned hi = u8();
    const unsigned lo = u8();
    return static_cast<std::int16_t>(static_cast<std::uint16_t>((hi << 8) | lo));
  };
  State s;
  s.now = u8();
  s.lh.resize(u8());
  for (Holder& h : s.lh) {
    h.phase = static_cast<LH>(u8());
    h.epoch = u8();
    h.expire = i16();
    h.epoch_timer = i16();
    h.freq = u8();
    h.int_ticks = u8();
    h.req_ts = u8();
  }
  const std::uint8_t flags = u8();
  s.g.interrupted = flags & 1u;
  s.g.granted = flags & 2u;
  s.g.rec_h = u8();
  s.g.rec_ts = u8();
  s.g.rec_epoch = u8();
  s.g.expire = i16();
  s.g.epoch_timer = i16();
  s.g.freq = u8();
  s.g.int_ticks = u8();
  s.msgs.resize(u8());
  for (Msg& m : s.msgs) {
    m.type = static_cast<MsgType>(u8());
    m.h = u8();
    m.epoch = u8();
    m.ts = u8();
    m.send_ts = u8();
    const std::uint8_t f = u8();
    m.arrived = f & 1u;
    m.processed = f & 2u;
  }
  if (pos != b.size()) throw std::invalid_argument("trailing bytes in model state");
  return s;
}

std::string to_json(const State& s, const ModelConfig& cfg) {
  using nlohmann::ordered_json;
  auto timer = [](std::int16_t t) -> ordered_json { return t == kInf ? ordered_json("inf") : ordered_json(t); };
  ordered_json j;
  j["now"] = s.now;
  ordered_json holders = ordered_json::array();
  for (const Holder& h : s.lh) {
    holders.push_back({{"lhState", to_string(h.phase)},
                       {"lhEpochNumber", h.epoch},
                       {"lhExpireTimer", timer(h.expire)},
                       {"lhEpochTimer", timer(h.epoch_timer)},
                       {"lhFrequency", cfg.freq_percent(h.freq)},
                       {"requestTs", h.req_ts}});
  }
  j["holders"] = holders;
  ordered_json g{{"gState", s.g.interrupted ? "interrupted" : "insideEnclave"},
                 {"gExpireTimer", timer(s.g.expire)},
                 {"gEpochTimer", timer(s.g.epoch_timer)},
                 {"gFrequency", cfg.freq_percent(s.g.freq)}};
  if (s.g.granted)
    g["gLeaseGranted"] = {{"lh", s.g.rec_h}, {"timeStamp", s.g.rec_ts}, {"epochNumber", s.g.rec_epoch}};
  else
    g["gLeaseGranted"] = ordered_json::array();
  j["granter"] = g;
  ordered_json msgs = ordered_json::array();
  for (const Msg& m : s.msgs) {
    ordered_json o{{"msgType", to_string(m.type)}, {"h", m.h}, {"epochNum", m.epoch}, {"timeStamp", m.ts}};
    if (is_reply(m)) o["sendTimeStamp"] = m.send_ts;
    o["arrived"] = m.arrived;
    msgs.push_back(o);
  }
  j["msgs"] = msgs;
  return j.dump();
}

}  // namespace tlease::model
