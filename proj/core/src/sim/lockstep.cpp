#include "tlease/sim/lockstep.hpp"

#include <algorithm>
#include <stdexcept>

namespace tlease::sim {

namespace {
constexpr LeaseId kLease{1};
}

std::string describe(const LockstepStep& s) {
  const std::string h = "(h" + std::to_string(s.holder);
  switch (s.action) {
    case LockstepAction::Tick: return "Tick";
    case LockstepAction::Request: return "Request" + h + ")";
    case LockstepAction::Receive:
      return std::string(s.ignored ? "ReceiveIgnored" : "Receive") + h + ", " +
             std::string(to_string(s.msg.kind)) + " e" + std::to_string(s.msg.epoch) + " ts" +
             std::to_string(s.msg.timestamp.count()) + ")";
    case LockstepAction::Abandon: return "Abandon" + h + ")";
    case LockstepAction::HolderInterrupt: return "HolderInterrupt" + h + ")";
    case LockstepAction::HolderResume: return "HolderResume" + h + ")";
    case LockstepAction::HolderFreq: return "HolderFreq" + h + ", " + std::to_string(s.freq) + ")";
    case LockstepAction::Process:
      return "Process" + h + ", e" + std::to_string(s.msg.epoch) + " ts" + std::to_string(s.msg.timestamp.count()) +
             ")";
    case LockstepAction::GranterInterrupt: return "GranterInterrupt";
    case LockstepAction::GranterResume: return "GranterResume";
    case LockstepAction::GranterFreq: return "GranterFreq(" + std::to_string(s.freq) + ")";
  }
  return "?";
}

LockstepSim::LockstepSim(LockstepParams p)
    : p_(p), rng_(p.seed), granter_(make_granter(kLease)), granter_freq_(1) {
  if (p_.holders == 0 || p_.lease_time == 0 || p_.drift >= p_.lease_time || p_.freq_drift >= 100 ||
      p_.multiplier == 0)
    throw std::invalid_argument("lockstep parameters out of range");
  cfg_.lease_term = Nanos(p_.lease_time * 100);
  cfg_.drift = static_cast<double>(p_.drift) / p_.lease_time;
  cfg_.granter_multiplier = p_.multiplier;
  cfg_.validate();
  // The model computes the same terms in exact integers.
  if (cfg_.holder_term().count() != (p_.lease_time - p_.drift) * 100 ||
      cfg_.granter_term().count() != static_cast<std::int64_t>(p_.multiplier) * (p_.lease_time + p_.drift) * 100)
    throw std::invalid_argument("lease terms are not integral in lockstep units");
  for (std::uint32_t i = 0; i < p_.holders; ++i) holders_.push_back(make_holder(HostId{i}, kLease));
  holder_freq_.assign(p_.holders, 1);
  holder_int_.assign(p_.holders, 0);
}

std::int64_t LockstepSim::freq_percent(std::uint8_t index) const {
  const auto d = static_cast<std::int64_t>(p_.freq_drift);
  return index == 0 ? 100 - d : index == 1 ? 100 : 100 + d;
}

void LockstepSim::send(const ProtocolMessage& m) {
  if (std::find(msgs_.begin(), msgs_.end(), m) == msgs_.end()) msgs_.push_back(m);
}

std::optional<LockstepStep> LockstepSim::step() {
  std::vector<LockstepStep> options;
  auto add = [&](LockstepAction a, std::uint32_t h = 0) {
    LockstepStep s;
    s.action = a;
    s.holder = h;
    options.push_back(s);
  };
  if (now_ < p_.max_now) add(LockstepAction::Tick);
  for (std::uint32_t h = 0; h < p_.holders; ++h) {
    const HolderState& x = holders_[h];
    if (x.phase == HolderPhase::Created || x.phase == HolderPhase::Blocked || needs_renewal(x, cfg_))
      add(LockstepAction::Request, h);
    if (x.phase == HolderPhase::Pending && x.expire_timer == Nanos::zero()) add(LockstepAction::Abandon, h);
    if (x.phase != HolderPhase::Interrupted) {
      add(LockstepAction::HolderInterrupt, h);
    } else {
      if (holder_int_[h] >= 1) add(LockstepAction::HolderResume, h);
      if (p_.attacker) {
        for (std::uint8_t f = 0; f < 3; ++f) {
          if (f == holder_freq_[h]) continue;
          add(LockstepAction::HolderFreq, h);
          options.back().freq = f;
        }
      }
    }
  }
  for (const ProtocolMessage& m : msgs_) {
    if (m.kind == MessageKind::ReqLease) {
      if (granter_.phase == GranterPhase::InsideEnclave) {
        add(LockstepAction::Process, raw(m.holder));
        options.back().msg = m;
      }
    } else if (holders_[raw(m.holder)].phase != HolderPhase::Interrupted) {
      add(LockstepAction::Receive, raw(m.holder));
      options.back().msg = m;
    }
  }
  if (granter_.phase == GranterPhase::InsideEnclave) {
    add(LockstepAction::GranterInterrupt);
  } else {
    if (granter_int_ >= 1) add(LockstepAction::GranterResume);
    if (p_.attacker) {
      for (std::uint8_t f = 0; f < 3; ++f) {
        if (f == granter_freq_) continue;
        add(LockstepAction::GranterFreq);
        options.back().freq = f;
      }
    }
  }
  if (options.empty()) return std::nullopt;
  LockstepStep s = options[rng_.below(options.size())];
  apply(s);
  return s;
}

void LockstepSim::apply(LockstepStep& s) {
  const Nanos now(now_);
  switch (s.action) {
    case LockstepAction::Tick:
      ++now_;
      for (std::size_t h = 0; h < holders_.size(); ++h) {
        if (holders_[h].phase == HolderPhase::Interrupted) {
          ++holder_int_[h];
        } else {
          holders_[h] = holder_tick(holders_[h], Nanos(freq_percent(holder_freq_[h])));
        }
      }
      if (granter_.phase == GranterPhase::Interrupted) {
        ++granter_int_;
      } else {
        granter_ = granter_tick(granter_, Nanos(freq_percent(granter_freq_)));
      }
      break;
    case LockstepAction::Request: {
      HolderRequest r = holder_request(holders_[s.holder], now, cfg_);
      holders_[s.holder] = r.state;
      send(r.request);
      break;
    }
    case LockstepAction::Receive: {
      const HolderState next = holder_receive(holders_[s.holder], s.msg);
      s.ignored = next == holders_[s.holder];
      holders_[s.holder] = next;
      if (!s.ignored) std::erase(msgs_, s.msg);
      break;
    }
    case LockstepAction::Abandon:
      holders_[s.holder] = holder_abandon_request(holders_[s.holder]);
      break;
    case LockstepAction::HolderInterrupt:
      holders_[s.holder] = holder_on_interrupt(holders_[s.holder]);
      holder_int_[s.holder] = 0;
      break;
    case LockstepAction::HolderResume: {
      const Epoch before = holders_[s.holder].epoch;
      holders_[s.holder] = holder_on_resume(holders_[s.holder]);
      if (p_.skip_epoch_increment) holders_[s.holder].epoch = before;
      holder_int_[s.holder] = 0;
      break;
    }
    case LockstepAction::HolderFreq:
      holder_freq_[s.holder] = s.freq;
      break;
    case LockstepAction::Process: {
      GranterReply r = granter_process(granter_, s.msg, now, cfg_);
      granter_ = r.state;
      send(r.reply);
      break;
    }
    case LockstepAction::GranterInterrupt:
      granter_ = granter_on_interrupt(granter_);
      granter_int_ = 0;
      break;
    case LockstepAction::GranterResume:
      granter_ = granter_on_resume(granter_);
      granter_int_ = 0;
      break;
    case LockstepAction::GranterFreq:
      granter_freq_ = s.freq;
      break;
  }
}

}  // namespace tlease::sim
