#include <gtest/gtest.h>

#include <boost/algorithm/hex.hpp>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <string>
#include <unordered_set>

#include "tlease/random.hpp"
#include "tlease/secure_channel.hpp"
#include "tlease/udp_endpoint.hpp"
#include "tlease/wire.hpp"

using namespace tlease;
using namespace std::chrono_literals;

namespace {

std::vector<std::uint8_t> unhex(const std::string& s) {
  std::vector<std::uint8_t> out;
  boost::algorithm::unhex(s, std::back_inserter(out));
  return out;
}

std::string hex(std::span<const std::uint8_t> b) {
  std::string out;
  boost::algorithm::hex_lower(b.begin(), b.end(), std::back_inserter(out));
  return out;
}

ProtocolMessage req(std::uint32_t sender, std::uint64_t lease, Epoch epoch, Nanos ts) {
  ProtocolMessage m;
  m.holder = HostId{sender};
  m.lease_id = LeaseId{lease};
  m.epoch = epoch;
  m.timestamp = ts;
  return m;
}

wire::Key counting_key() {
  wire::Key k{};
  for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<std::uint8_t>(i);
  return k;
}

ProtocolMessage random_message(Rng& rng) {
  ProtocolMessage m;
  m.kind = static_cast<MessageKind>(1 + rng.below(3));
  m.holder = HostId{static_cast<std::uint32_t>(rng.next())};
  m.lease_id = LeaseId{rng.next()};
  m.epoch = rng.next();
  m.timestamp = Nanos(static_cast<std::int64_t>(rng.next() >> 1));
  if (m.kind != MessageKind::ReqLease) m.send_timestamp = Nanos(static_cast<std::int64_t>(rng.next() >> 1));
  return m;
}

}  // namespace

TEST(Codec, ReqLeaseLayout) {
  const wire::Frame f = wire::encode(req(1, 7, 2, Nanos(1000)));
  EXPECT_EQ(hex(f),
            "0101"
            "00000001"
            "0000000000000007"
            "0000000000000002"
            "00000000000003e8"
            "0000000000000000");
  EXPECT_EQ(f.size(), 38u);
}

TEST(Codec, GrantedCarriesBothTimestamps) {
  ProtocolMessage m = req(1, 7, 2, Nanos(1000));
  m.kind = MessageKind::Granted;
  m.send_timestamp = Nanos(1500);
  const wire::Frame f = wire::encode(m);
  EXPECT_EQ(f[1], 0x02);
  EXPECT_EQ(hex(std::span(f).subspan(22)), "00000000000003e800000000000005dc");
  EXPECT_EQ(wire::decode(f).msg, m);
}

TEST(Codec, RoundTripsRandomMessages) {
  Rng rng(1);
  for (int i = 0; i < 10'000; ++i) {
    const ProtocolMessage m = random_message(rng);
    const wire::Decoded d = wire::decode(wire::encode(m));
    ASSERT_TRUE(d.msg);
    ASSERT_EQ(*d.msg, m);
  }
}

TEST(Codec, RejectsBadFrames) {
  wire::Frame f = wire::encode(req(1, 7, 2, Nanos(1000)));
  EXPECT_EQ(wire::decode(std::span(f).first(37)).error, wire::DecodeError::BadLength);
  wire::Frame g = f;
  g[0] = 0x02;
  EXPECT_EQ(wire::decode(g).error, wire::DecodeError::BadVersion);
  g = f;
  g[1] = 0x04;
  EXPECT_EQ(wire::decode(g).error, wire::DecodeError::BadType);
  g = f;
  g[37] = 1;  // ReqLease with a send timestamp
  EXPECT_EQ(wire::decode(g).error, wire::DecodeError::BadField);
  g = f;
  g[22] = 0x80;  // timestamp beyond the signed range
  EXPECT_EQ(wire::decode(g).error, wire::DecodeError::BadField);
}

// Every plaintext either decodes to a message that re-encodes to the same
// bytes, or is rejected.
TEST(Codec, TotalOverRandomPlaintexts) {
  Rng rng(2);
  std::size_t accepted = 0;
  for (int i = 0; i < 100'000; ++i) {
    wire::Frame f;
    for (auto& b : f) b = static_cast<std::uint8_t>(rng.below(256));
    if (rng.bernoulli(0.5)) f[0] = wire::kVersion;
    if (rng.bernoulli(0.5)) f[1] = static_cast<std::uint8_t>(1 + rng.below(3));
    if (rng.bernoulli(0.5)) f[22] &= 0x7f, f[30] &= 0x7f;
    const wire::Decoded d = wire::decode(f);
    if (d.msg) {
      ++accepted;
      ASSERT_EQ(wire::encode(*d.msg), f);
    }
  }
  EXPECT_GT(accepted, 1000u);
}

TEST(Seal, MatchesIndependentAesGcmVector) {
  // AES-256-GCM computed outside this code base: key 00..1f, nonce
  // sender 1 || counter 5, AAD = version byte.
  const wire::Sealed s = wire::seal(counting_key(), 1, 5, wire::encode(req(1, 7, 2, Nanos(1000))));
  EXPECT_EQ(hex(s),
            "000000010000000000000005bf876d156ea7956ee37089e3230871ea799717fea07da57a597679bb112e9a776b5052"
            "7102dec793a83d511a116c8677e3ac6ae15bde");
  EXPECT_EQ(s.size(), 66u);
}

TEST(Seal, OpenRoundTrip) {
  const wire::Frame f = wire::encode(req(3, 9, 4, Nanos(77)));
  const auto opened = wire::open(counting_key(), wire::seal(counting_key(), 3, 11, f));
  ASSERT_TRUE(opened);
  EXPECT_EQ(opened->frame, f);
  EXPECT_EQ(opened->sender_id, 3u);
  EXPECT_EQ(opened->counter, 11u);
}

TEST(Seal, EverySingleBitFlipIsRejected) {
  const wire::Sealed s = wire::seal(counting_key(), 1, 5, wire::encode(req(1, 7, 2, Nanos(1000))));
  for (std::size_t bit = 0; bit < s.size() * 8; ++bit) {
    wire::Sealed bad = s;
    bad[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    wire::OpenError err{};
    ASSERT_FALSE(wire::open(counting_key(), bad, &err)) << bit;
    ASSERT_EQ(err, wire::OpenError::AuthFailed);
  }
}

TEST(Seal, WrongKeyAndLengthAreRejected) {
  const wire::Sealed s = wire::seal(counting_key(), 1, 5, wire::encode(req(1, 7, 2, Nanos(1000))));
  wire::Key other = counting_key();
  other[0] ^= 1;
  wire::OpenError err{};
  EXPECT_FALSE(wire::open(other, s, &err));
  EXPECT_EQ(err, wire::OpenError::AuthFailed);
  EXPECT_FALSE(wire::open(counting_key(), std::span(s).first(65), &err));
  EXPECT_EQ(err, wire::OpenError::BadLength);
}

TEST(Channel, ReplayAndReorderedCountersAreDropped) {
  wire::SecureChannel tx(counting_key(), 1), rx(counting_key(), 0);
  std::vector<std::pair<wire::OpenError, std::uint32_t>> drops;
  rx.set_drop_hook([&](wire::OpenError e, std::uint32_t id) { drops.emplace_back(e, id); });
  const wire::Sealed first = tx.seal_message(req(1, 7, 1, Nanos(1)));
  const wire::Sealed second = tx.seal_message(req(1, 7, 1, Nanos(2)));
  EXPECT_TRUE(rx.open_message(second));
  EXPECT_FALSE(rx.open_message(first));   // older counter
  EXPECT_FALSE(rx.open_message(second));  // same counter
  EXPECT_EQ(rx.stats().replays, 2u);
  ASSERT_EQ(drops.size(), 2u);
  EXPECT_EQ(drops[0].first, wire::OpenError::Replay);
  EXPECT_EQ(drops[0].second, 1u);
}

TEST(Channel, MalformedAuthenticatedFrameDoesNotAdvanceTheWindow) {
  wire::SecureChannel rx(counting_key(), 0);
  wire::Frame bad = wire::encode(req(1, 7, 1, Nanos(1)));
  bad[1] = 0x09;
  EXPECT_FALSE(rx.open_message(wire::seal(counting_key(), 1, 10, bad)));
  EXPECT_EQ(rx.stats().malformed, 1u);
  EXPECT_TRUE(rx.open_message(wire::seal(counting_key(), 1, 10, wire::encode(req(1, 7, 1, Nanos(1))))));
}

TEST(Channel, CountersArePerSender) {
  wire::SecureChannel a(counting_key(), 1), b(counting_key(), 2), rx(counting_key(), 0);
  EXPECT_TRUE(rx.open_message(a.seal_message(req(1, 7, 1, Nanos(1)))));
  EXPECT_TRUE(rx.open_message(b.seal_message(req(2, 7, 1, Nanos(1)))));
  EXPECT_EQ(rx.stats().opened, 2u);
  EXPECT_THROW(wire::SecureChannel(counting_key(), 1, 0), std::invalid_argument);
}

TEST(Channel, NoncesNeverRepeat) {
  wire::SecureChannel tx(counting_key(), 4);
  std::unordered_set<std::string> seen;
  const ProtocolMessage m = req(4, 1, 1, Nanos(1));
  for (int i = 0; i < 100'000; ++i) {
    const wire::Sealed s = tx.seal_message(m);
    ASSERT_TRUE(seen.emplace(reinterpret_cast<const char*>(s.data()), wire::kNonceSize).second);
  }
}

TEST(Keys, HexParsingAndLoading) {
  const std::string text(64, 'a');
  EXPECT_EQ(wire::parse_key_hex(text)[31], 0xaa);
  EXPECT_THROW(wire::parse_key_hex("abc"), std::invalid_argument);
  EXPECT_THROW(wire::parse_key_hex(std::string(64, 'z')), std::invalid_argument);
  const std::string path = ::testing::TempDir() + "/tlease_key";
  std::ofstream(path) << "  " << std::string(64, '0') << "\n";
  EXPECT_EQ(wire::load_key(path)[0], 0);
  ::setenv("TLEASE_TEST_KEY", std::string(64, 'f').c_str(), 1);
  EXPECT_EQ(wire::load_key("", "TLEASE_TEST_KEY")[5], 0xff);
  EXPECT_THROW(wire::load_key("", "TLEASE_TEST_KEY_UNSET"), std::exception);
}

TEST(Addresses, ParseAndFormat) {
  EXPECT_EQ(format_address(parse_address("127.0.0.1:7400")), "127.0.0.1:7400");
  EXPECT_EQ(format_address(parse_address("localhost:1")), "127.0.0.1:1");
  EXPECT_THROW(parse_address("127.0.0.1"), std::invalid_argument);
  EXPECT_THROW(parse_address("127.0.0.1:99999"), std::invalid_argument);
  EXPECT_THROW(parse_address("not-a-host:1"), std::invalid_argument);
}

namespace {

std::optional<ProtocolMessage> poll_until(UdpEndpoint& ep, std::chrono::milliseconds limit) {
  const auto end = std::chrono::steady_clock::now() + limit;
  while (std::chrono::steady_clock::now() < end) {
    if (auto m = ep.poll()) return m;
    ep.wait_readable(10ms);
  }
  return std::nullopt;
}

}  // namespace

TEST(UdpEndpoint, LoopbackRoundTrip) {
  UdpEndpoint granter("127.0.0.1:0", std::nullopt, counting_key(), 0, 1);
  const std::string addr = "127.0.0.1:" + std::to_string(granter.local_port());
  UdpEndpoint holder("127.0.0.1:0", addr, counting_key(), 1, 1);
  holder.send(req(1, 7, 1, Nanos(5)));
  const auto got = poll_until(granter, 2000ms);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->timestamp, Nanos(5));
  ProtocolMessage reply = *got;
  reply.kind = MessageKind::Granted;
  reply.send_timestamp = Nanos(6);
  granter.send(reply);  // routed to the holder's source address
  const auto back = poll_until(holder, 2000ms);
  ASSERT_TRUE(back);
  EXPECT_EQ(*back, reply);
}

TEST(UdpEndpoint, ForeignKeyTrafficIsDropped) {
  UdpEndpoint granter("127.0.0.1:0", std::nullopt, counting_key(), 0, 1);
  wire::Key other = counting_key();
  other[3] ^= 0x10;
  UdpEndpoint intruder("127.0.0.1:0", "127.0.0.1:" + std::to_string(granter.local_port()), other, 1, 1);
  intruder.send(req(1, 7, 1, Nanos(5)));
  EXPECT_FALSE(poll_until(granter, 200ms));
  EXPECT_EQ(granter.channel().stats().auth_failures, 1u);
  // A reply to a holder the granter never heard from has nowhere to go.
  ProtocolMessage m = req(9, 7, 1, Nanos(5));
  m.kind = MessageKind::NotGranted;
  granter.send(m);
  EXPECT_EQ(granter.unroutable(), 1u);
}
