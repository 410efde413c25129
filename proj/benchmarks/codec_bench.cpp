#include <benchmark/benchmark.h>

#include "tlease/secure_channel.hpp"
#include "tlease/wire.hpp"

using namespace tlease;

namespace {

ProtocolMessage sample() {
  ProtocolMessage m;
  m.kind = MessageKind::Granted;
  m.holder = HostId{1};
  m.lease_id = LeaseId{7};
  m.epoch = 3;
  m.timestamp = Nanos(123456789);
  m.send_timestamp = Nanos(123999999);
  return m;
}

void BM_Encode(benchmark::State& state) {
  const ProtocolMessage m = sample();
  for (auto _ : state) benchmark::DoNotOptimize(wire::encode(m));
}
BENCHMARK(BM_Encode);

void BM_Decode(benchmark::State& state) {
  const wire::Frame f = wire::encode(sample());
  for (auto _ : state) benchmark::DoNotOptimize(wire::decode(f));
}
BENCHMARK(BM_Decode);

void BM_Seal(benchmark::State& state) {
  wire::SecureChannel tx(wire::Key{}, 1);
  const ProtocolMessage m = sample();
  for (auto _ : state) benchmark::DoNotOptimize(tx.seal_message(m));
}
BENCHMARK(BM_Seal);

void BM_Open(benchmark::State& state) {
  const wire::Sealed s = wire::seal(wire::Key{}, 1, 5, wire::encode(sample()));
  for (auto _ : state) benchmark::DoNotOptimize(wire::open(wire::Key{}, s));
}
BENCHMARK(BM_Open);

}  // namespace
