#include "tlease/udp_endpoint.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <system_error>

namespace tlease {

sockaddr_in parse_address(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("address must be host:port: " + text);
  std::string host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  if (host.empty() || host == "localhost") host = "127.0.0.1";
  if (host == "*") host = "0.0.0.0";

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    throw std::invalid_argument("bad IPv4 host: " + host);
  std::size_t used = 0;
  unsigned long p = 0;
  try {
    p = std::stoul(port, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != port.size() || p > 65535) throw std::invalid_argument("bad port: " + port);
  addr.sin_port = htons(static_cast<std::uint16_t>(p));
  return addr;
}

std::string format_address(const sockaddr_in& addr) {
  char buf[INET_ADDRSTRLEN] = {};
  inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
  return std::string(buf) + ":" + std::to_string(ntohs(addr.sin_port));
}

UdpEndpoint::UdpEndpoint(const std::string& local, std::optional<std::string> remote,
                         const wire::Key& key, std::uint32_t local_id, std::uint64_t first_counter)
    : channel_(key, local_id, first_counter) {
  const sockaddr_in bind_addr = parse_address(local);
  if (remote) remote_ = parse_address(*remote);

  fd_ = ::socket(AF_INET, SOCK_DGRAM | SOCK_NONBLOCK | SOCK_CLOEXEC, 0);
  if (fd_ < 0) throw std::system_error(errno, std::generic_category(), "socket");
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&bind_addr), sizeof bind_addr) != 0) {
    const int err = errno;
    ::close(fd_);
    throw std::system_error(err, std::generic_category(), "bind " + local);
  }
}

UdpEndpoint::~UdpEndpoint() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint16_t UdpEndpoint::local_port() const {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  return ntohs(addr.sin_port);
}

void UdpEndpoint::send(const ProtocolMessage& msg) {
  const sockaddr_in* to = nullptr;
  if (remote_) {
    to = &*remote_;
  } else if (auto it = routes_.find(raw(msg.holder)); it != routes_.end()) {
    to = &it->second;
  }
  if (!to) {
    ++unroutable_;
    return;
  }
  const wire::Sealed sealed = channel_.seal_message(msg);
  // Datagram loss is the protocol's problem; a full socket buffer is loss.
  ::sendto(fd_, sealed.data(), sealed.size(), 0, reinterpret_cast<const sockaddr*>(to), sizeof *to);
}

std::optional<ProtocolMessage> UdpEndpoint::poll() {
  std::uint8_t buf[512];
  for (;;) {
    sockaddr_in from{};
    socklen_t len = sizeof from;
    const ssize_t n = ::recvfrom(fd_, buf, sizeof buf, 0, reinterpret_cast<sockaddr*>(&from), &len);
    if (n < 0) {
      if (errno == EINTR) continue;
      return std::nullopt;
    }
    auto msg = channel_.open_message({buf, static_cast<std::size_t>(n)});
    if (!msg) continue;
    if (!remote_ && msg->kind == MessageKind::ReqLease) routes_[raw(msg->holder)] = from;
    return msg;
  }
}

void UdpEndpoint::wait_readable(std::chrono::milliseconds timeout) const {
  pollfd p{fd_, POLLIN, 0};
  ::poll(&p, 1, static_cast<int>(timeout.count()));
}

}  // namespace tlease
