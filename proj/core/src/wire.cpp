#include "tlease/wire.hpp"

#include <boost/endian/conversion.hpp>

namespace tlease::wire {

namespace {

template <typename T>
void put(std::uint8_t* at, T v) {
  boost::endian::endian_store<T, sizeof(T), boost::endian::order::big>(at, v);
}

template <typename T>
T get(const std::uint8_t* at) {
  return boost::endian::endian_load<T, sizeof(T), boost::endian::order::big>(at);
}

constexpr std::uint64_t kMaxTimestamp = std::uint64_t{1} << 63;

}  // namespace

Frame encode(const ProtocolMessage& msg) {
  Frame f{};
  f[0] = kVersion;
  f[1] = static_cast<std::uint8_t>(msg.kind);
  put<std::uint32_t>(&f[2], raw(msg.holder));
  put<std::uint64_t>(&f[6], raw(msg.lease_id));
  put<std::uint64_t>(&f[14], msg.epoch);
  put<std::uint64_t>(&f[22], static_cast<std::uint64_t>(msg.timestamp.count()));
  const auto send = msg.kind == MessageKind::ReqLease ? 0 : msg.send_timestamp.count();
  put<std::uint64_t>(&f[30], static_cast<std::uint64_t>(send));
  return f;
}

Decoded decode(std::span<const std::uint8_t> bytes) {
  Decoded out;
  if (bytes.size() != kFrameSize) {
    out.error = DecodeError::BadLength;
    return out;
  }
  if (bytes[0] != kVersion) {
    out.error = DecodeError::BadVersion;
    return out;
  }
  const std::uint8_t type = bytes[1];
  if (type < 0x01 || type > 0x03) {
    out.error = DecodeError::BadType;
    return out;
  }
  const auto ts = get<std::uint64_t>(&bytes[22]);
  const auto send = get<std::uint64_t>(&bytes[30]);
  const auto kind = static_cast<MessageKind>(type);
  if (ts >= kMaxTimestamp || send >= kMaxTimestamp || (kind == MessageKind::ReqLease && send != 0)) {
    out.error = DecodeError::BadField;
    return out;
  }
  ProtocolMessage m;
  m.kind = kind;
  m.holder = HostId{get<std::uint32_t>(&bytes[2])};
  m.lease_id = LeaseId{get<std::uint64_t>(&bytes[6])};
  m.epoch = get<std::uint64_t>(&bytes[14]);
  m.timestamp = Nanos(static_cast<std::int64_t>(ts));
  m.send_timestamp = Nanos(static_cast<std::int64_t>(send));
  out.msg = m;
  return out;
}

}  // namespace tlease::wire
