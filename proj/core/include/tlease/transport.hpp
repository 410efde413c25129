#pragma once

#include <optional>

#include "tlease/protocol.hpp"

namespace tlease {

// Unreliable datagram delivery of protocol messages. poll() never blocks.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send(const ProtocolMessage& msg) = 0;
  virtual std::optional<ProtocolMessage> poll() = 0;
};

}  // namespace tlease
