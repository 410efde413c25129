#pragma once

#include <netinet/in.h>

#include <cstdint>
#include <chrono>
#include <optional>
#include <string>
#include <unordered_map>

#include "tlease/secure_channel.hpp"
#include "tlease/transport.hpp"

namespace tlease {

// "host:port"; host may be a dotted quad or "localhost". Throws on garbage.
sockaddr_in parse_address(const std::string& text);
std::string format_address(const sockaddr_in& addr);

// Sealed protocol messages over a nonblocking UDP socket. With a remote
// address every send goes there (holder side); without one, replies go to
// the last authenticated source address of msg.holder (granter side).
class UdpEndpoint final : public Transport {
 public:
  UdpEndpoint(const std::string& local, std::optional<std::string> remote, const wire::Key& key,
              std::uint32_t local_id, std::uint64_t first_counter);
  ~UdpEndpoint() override;
  UdpEndpoint(const UdpEndpoint&) = delete;
  UdpEndpoint& operator=(const UdpEndpoint&) = delete;

  void send(const ProtocolMessage& msg) override;
  std::optional<ProtocolMessage> poll() override;

  // Blocks until a datagram may be readable or `timeout` passes.
  void wait_readable(std::chrono::milliseconds timeout) const;

  wire::SecureChannel& channel() { return channel_; }
  std::uint16_t local_port() const;
  std::uint64_t unroutable() const { return unroutable_; }

 private:
  int fd_ = -1;
  std::optional<sockaddr_in> remote_;
  std::unordered_map<std::uint32_t, sockaddr_in> routes_;
  wire::SecureChannel channel_;
  std::uint64_t unroutable_ = 0;
};

}  // namespace tlease
