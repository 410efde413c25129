#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>

#include "tlease/wire.hpp"

namespace tlease::wire {

using Key = std::array<std::uint8_t, 32>;
using Sealed = std::array<std::uint8_t, kSealedSize>;

// 64 hex characters; throws std::invalid_argument otherwise.
Key parse_key_hex(std::string_view hex);
// Reads the key from `path` when non-empty, else from environment variable
// `env_var`. Surrounding whitespace is ignored.
Key load_key(const std::string& path, const char* env_var = "TLEASE_KEY");

// AES-256-GCM with nonce = sender_id || counter and the version byte as AAD.
Sealed seal(const Key& key, std::uint32_t sender_id, std::uint64_t counter, const Frame& frame);

enum class OpenError : std::uint8_t { BadLength, AuthFailed, Replay, Malformed };
std::string_view to_string(OpenError e);

struct Opened {
  Frame frame{};
  std::uint32_t sender_id = 0;
  std::uint64_t counter = 0;
};

// Stateless decryption; replay tracking is the channel's job.
std::optional<Opened> open(const Key& key, std::span<const std::uint8_t> datagram,
                           OpenError* error = nullptr);

struct ChannelStats {
  std::uint64_t sealed = 0;
  std::uint64_t opened = 0;
  std::uint64_t auth_failures = 0;
  std::uint64_t replays = 0;
  std::uint64_t malformed = 0;
};

// One endpoint's view: a send counter for its own nonces and the highest
// counter accepted from every peer. Rejections are counted and reported to
// the drop hook, never surfaced as messages.
class SecureChannel {
 public:
  using DropHook = std::function<void(OpenError, std::uint32_t sender_id)>;

  SecureChannel(const Key& key, std::uint32_t local_id, std::uint64_t first_counter = 1);

  Sealed seal_message(const ProtocolMessage& msg);
  std::optional<ProtocolMessage> open_message(std::span<const std::uint8_t> datagram);

  void set_drop_hook(DropHook hook) { on_drop_ = std::move(hook); }
  const ChannelStats& stats() const { return stats_; }
  std::uint32_t local_id() const { return local_id_; }

 private:
  void drop(OpenError e, std::uint32_t sender);

  Key key_;
  std::uint32_t local_id_;
  std::uint64_t next_counter_;
  std::unordered_map<std::uint32_t, std::uint64_t> last_seen_;
  ChannelStats stats_;
  DropHook on_drop_;
};

}  // namespace tlease::wire
