#include "tlease/secure_channel.hpp"

#include <openssl/evp.h>

#include <boost/algorithm/hex.hpp>
#include <boost/algorithm/string/trim.hpp>
#include <boost/endian/conversion.hpp>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace tlease::wire {

namespace {

struct CtxFree {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using Ctx = std::unique_ptr<EVP_CIPHER_CTX, CtxFree>;

Ctx new_ctx() {
  Ctx c(EVP_CIPHER_CTX_new());
  if (!c) throw std::runtime_error("EVP_CIPHER_CTX_new failed");
  return c;
}

void check(int rc, const char* what) {
  if (rc != 1) throw std::runtime_error(std::string("openssl: ") + what);
}

std::array<std::uint8_t, kNonceSize> make_nonce(std::uint32_t sender, std::uint64_t counter) {
  std::array<std::uint8_t, kNonceSize> n{};
  boost::endian::store_big_u32(n.data(), sender);
  boost::endian::store_big_u64(n.data() + 4, counter);
  return n;
}

}  // namespace

Key parse_key_hex(std::string_view hex) {
  if (hex.size() != 64) throw std::invalid_argument("key must be 64 hex characters");
  Key k{};
  try {
    boost::algorithm::unhex(hex.begin(), hex.end(), k.begin());
  } catch (const boost::algorithm::hex_decode_error&) {
    throw std::invalid_argument("key contains non-hex characters");
  }
  return k;
}

Key load_key(const std::string& path, const char* env_var) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read key file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  } else if (const char* v = std::getenv(env_var)) {
    text = v;
  } else {
    throw std::invalid_argument(std::string("no key file and ") + env_var + " is unset");
  }
  boost::algorithm::trim(text);
  return parse_key_hex(text);
}

Sealed seal(const Key& key, std::uint32_t sender_id, std::uint64_t counter, const Frame& frame) {
  Sealed out{};
  const auto nonce = make_nonce(sender_id, counter);
  std::copy(nonce.begin(), nonce.end(), out.begin());

  Ctx ctx = new_ctx();
  int len = 0;
  check(EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr), "init");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceSize, nullptr), "ivlen");
  check(EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()), "key");
  const std::uint8_t aad = kVersion;
  check(EVP_EncryptUpdate(ctx.get(), nullptr, &len, &aad, 1), "aad");
  std::uint8_t* ct = out.data() + kNonceSize;
  check(EVP_EncryptUpdate(ctx.get(), ct, &len, frame.data(), kFrameSize), "encrypt");
  int fin = 0;
  check(EVP_EncryptFinal_ex(ctx.get(), ct + len, &fin), "final");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kTagSize, ct + kFrameSize), "tag");
  return out;
}

std::string_view to_string(OpenError e) {
  switch (e) {
    case OpenError::BadLength: return "bad_length";
    case OpenError::AuthFailed: return "auth_failed";
    case OpenError::Replay: return "replay";
    case OpenError::Malformed: return "malformed";
  }
  return "?";
}

std::optional<Opened> open(const Key& key, std::span<const std::uint8_t> datagram, OpenError* error) {
  auto fail = [&](OpenError e) -> std::optional<Opened> {
    if (error) *error = e;
    return std::nullopt;
  };
  if (datagram.size() != kSealedSize) return fail(OpenError::BadLength);

  Opened out;
  out.sender_id = boost::endian::load_big_u32(datagram.data());
  out.counter = boost::endian::load_big_u64(datagram.data() + 4);

  Ctx ctx = new_ctx();
  int len = 0;
  check(EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr), "init");
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, kNonceSize, nullptr), "ivlen");
  check(EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), datagram.data()), "key");
  const std::uint8_t aad = kVersion;
  check(EVP_DecryptUpdate(ctx.get(), nullptr, &len, &aad, 1), "aad");
  const std::uint8_t* ct = datagram.data() + kNonceSize;
  check(EVP_DecryptUpdate(ctx.get(), out.frame.data(), &len, ct, kFrameSize), "decrypt");
  std::array<std::uint8_t, kTagSize> tag{};
  std::copy(ct + kFrameSize, ct + kFrameSize + kTagSize, tag.begin());
  check(EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kTagSize, tag.data()), "settag");
  int fin = 0;
  if (EVP_DecryptFinal_ex(ctx.get(), out.frame.data() + len, &fin) != 1) return fail(OpenError::AuthFailed);
  return out;
}

SecureChannel::SecureChannel(const Key& key, std::uint32_t local_id, std::uint64_t first_counter)
    : key_(key), local_id_(local_id), next_counter_(first_counter) {
  if (first_counter == 0) throw std::invalid_argument("counter 0 is reserved");
}

Sealed SecureChannel::seal_message(const ProtocolMessage& msg) {
  if (next_counter_ == 0) throw std::runtime_error("nonce counter exhausted");
  ++stats_.sealed;
  return seal(key_, local_id_, next_counter_++, encode(msg));
}

void SecureChannel::drop(OpenError e, std::uint32_t sender) {
  switch (e) {
    case OpenError::AuthFailed:
    case OpenError::BadLength: ++stats_.auth_failures; break;
    case OpenError::Replay: ++stats_.replays; break;
    case OpenError::Malformed: ++stats_.malformed; break;
  }
  if (on_drop_) on_drop_(e, sender);
}

std::optional<ProtocolMessage> SecureChannel::open_message(std::span<const std::uint8_t> datagram) {
  OpenError err{};
  auto opened = open(key_, datagram, &err);
  if (!opened) {
    drop(err, 0);
    return std::nullopt;
  }
  auto& last = last_seen_[opened->sender_id];
  if (opened->counter <= last) {
    drop(OpenError::Replay, opened->sender_id);
    return std::nullopt;
  }
  const Decoded d = decode(opened->frame);
  if (!d.msg) {
    drop(OpenError::Malformed, opened->sender_id);
    return std::nullopt;
  }
  // Only authenticated, well-formed frames advance the replay window.
  last = opened->counter;
  ++stats_.opened;
  return d.msg;
}

}  // namespace tlease::wire
