#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>

#include "tlease/protocol.hpp"

namespace tlease::wire {

inline constexpr std::uint8_t kVersion = 0x01;
inline constexpr std::size_t kFrameSize = 38;
inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 16;
inline constexpr std::size_t kSealedSize = kNonceSize + kFrameSize + kTagSize;  // 66

using Frame = std::array<std::uint8_t, kFrameSize>;

// Layout (big-endian):
//   [0] version  [1] msg_type  [2..6) sender_id  [6..14) lease_id
//   [14..22) epoch  [22..30) timestamp_ns  [30..38) send_timestamp_ns
// sender_id is the holder for every message kind; the granter is implied by
// the channel.
Frame encode(const ProtocolMessage& msg);

enum class DecodeError : std::uint8_t { BadLength, BadVersion, BadType, BadField };

struct Decoded {
  std::optional<ProtocolMessage> msg;
  DecodeError error = DecodeError::BadLength;
};

Decoded decode(std::span<const std::uint8_t> bytes);

}  // namespace tlease::wire
