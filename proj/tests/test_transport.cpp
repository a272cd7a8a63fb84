#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstring>
#include <thread>

#include "treepm/presets.hpp"
#include "treepm/transport.hpp"

using namespace tpm;
using doctest::Approx;

namespace {

std::vector<uint8_t> pattern_payload(std::size_t n, uint64_t seed = 1) {
  std::vector<uint8_t> p(n);
  uint64_t x = seed * 0x9e3779b97f4a7c15ull + 1;
  for (std::size_t i = 0; i < n; ++i) {
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    p[i] = static_cast<uint8_t>(x);
  }
  return p;
}

uint64_t fnv1a(const std::vector<uint8_t>& data) {
  uint64_t h = 1469598103934665603ull;
  for (uint8_t b : data) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

net::ChannelConfig sim_config(double latency, double bandwidth) {
  net::ChannelConfig c;
  c.backend = net::Backend::simulated;
  c.latency = latency;
  c.bandwidth = bandwidth;
  return c;
}

net::ChannelConfig tcp_config(int streams, std::size_t chunk) {
  net::ChannelConfig c;
  c.backend = net::Backend::tcp;
  c.streams = streams;
  c.send_chunk = chunk;
  c.recv_chunk = chunk;
  return c;
}

// Round-trips `payload` over a freshly opened loopback channel pair.
std::vector<uint8_t> tcp_echo_once(const net::ChannelConfig& cfg,
                                   const std::vector<uint8_t>& payload) {
  net::TcpListener listener(0);
  std::vector<uint8_t> got_server;
  std::thread server([&] {
    auto ch = listener.accept_channel(cfg);
    got_server = ch->recv();
    ch->send(got_server);
  });
  auto client = net::open_channel(cfg, "127.0.0.1", listener.port());
  client->send(payload);
  const std::vector<uint8_t> back = client->recv();
  server.join();
  REQUIRE(got_server.size() == payload.size());
  return back;
}

}  // namespace

TEST_SUITE("frame") {

TEST_CASE("header encodes and decodes bit-exactly") {
  net::FrameHeader h;
  h.channel_id = 0xdeadbeef;
  h.message_length = (1ull << 40) + 12345;
  h.stream_index = 37;
  h.stream_count = 64;
  const auto enc = h.encode();
  CHECK(enc[0] == 'S');
  CHECK(enc[1] == 'U');
  CHECK(enc[2] == 'W');
  CHECK(enc[3] == 'P');
  const auto back = net::FrameHeader::decode(enc.data());
  CHECK(back.channel_id == h.channel_id);
  CHECK(back.message_length == h.message_length);
  CHECK(back.stream_index == h.stream_index);
  CHECK(back.stream_count == h.stream_count);

  auto bad = enc;
  bad[0] = 'X';
  CHECK_THROWS_AS(net::FrameHeader::decode(bad.data()), net::TransportError);
}

TEST_CASE("stream slices cover the message exactly") {
  for (uint64_t len : {0ull, 1ull, 8192ull, 8193ull, 1000000ull}) {
    for (int count : {1, 3, 16, 64}) {
      for (std::size_t chunk : {std::size_t{1}, std::size_t{13},
                                std::size_t{8192}}) {
        uint64_t sum = 0;
        for (int s = 0; s < count; ++s)
          sum += net::stream_slice_bytes(len, chunk, s, count);
        CHECK(sum == len);
      }
    }
  }
  // One byte over many streams rides exactly one stream.
  CHECK(net::stream_slice_bytes(1, 8192, 0, 64) == 1);
  for (int s = 1; s < 64; ++s)
    CHECK(net::stream_slice_bytes(1, 8192, s, 64) == 0);
}

}  // TEST_SUITE

TEST_SUITE("simulated") {

TEST_CASE("delivery time model") {
  CHECK(net::simulated_delivery_time(sim_config(0.3, 1e8), 0) == Approx(0.15));
  CHECK(net::simulated_delivery_time(sim_config(0.0, 5e7), 50000000) ==
        Approx(1.0));
  CHECK(net::simulated_delivery_time(sim_config(0.0, 5e7), 28862684) ==
        Approx(0.57725368).epsilon(1e-9));
}

TEST_CASE("bit-exact delivery over the size grid") {
  for (int streams : {1, 16, 64}) {
    auto cfg = sim_config(0.01, 1e9);
    cfg.streams = streams;
    auto [a, b] = net::make_sim_pair(cfg);
    for (std::size_t size :
         {std::size_t{0}, std::size_t{1}, std::size_t{8 * 1024},
          std::size_t{64 * 1024 * 1024}}) {
      const auto payload = pattern_payload(size, size + streams);
      a->send(payload);
      const auto got = b->recv();
      CHECK(fnv1a(got) == fnv1a(payload));
      CHECK(got.size() == payload.size());
    }
  }
}

TEST_CASE("deterministic virtual timestamps") {
  auto [a, b] = net::make_sim_pair(sim_config(0.1, 1e8));
  const auto payload = pattern_payload(1 << 20);
  a->send(payload);
  (void)b->recv();
  CHECK(b->clock() == Approx(0.05 + (1 << 20) / 1e8).epsilon(1e-12));

  auto [c, d] = net::make_sim_pair(sim_config(0.1, 1e8));
  c->send(payload);
  (void)d->recv();
  CHECK(d->clock() == b->clock());
}

TEST_CASE("relay chain adds per-hop latency") {
  const std::vector<net::ChannelConfig> hops = {sim_config(0.1, 1e8),
                                                sim_config(0.05, 1e8)};
  auto [a, b] = net::make_sim_chain(hops);
  a->send({});
  (void)b->recv();
  CHECK(b->clock() == Approx(0.075).epsilon(1e-12));  // sum of lambda/2
}

TEST_CASE("netbench recovers the configured constants") {
  auto [a, b] = net::make_sim_pair(sim_config(0.27, 1e8));
  std::thread echo([&b_ref = *b] { net::netbench_echo(b_ref, 1, 3); });
  const auto result = net::netbench(*a, {64 * 1024 * 1024}, 3);
  echo.join();
  CHECK(result.rtt == Approx(0.27).epsilon(1e-9));
  REQUIRE(result.points.size() == 1);
  CHECK(result.points[0].throughput == Approx(1e8).epsilon(1e-6));

  const std::string csv = net::netbench_csv(result);
  CHECK(csv.rfind("bytes,seconds,bytes_per_second\n", 0) == 0);
}

}  // TEST_SUITE

TEST_SUITE("tcp") {

TEST_CASE("bit-exact delivery across sizes and stream counts") {
  for (int streams : {1, 16, 64}) {
    for (std::size_t size :
         {std::size_t{0}, std::size_t{1}, std::size_t{8 * 1024},
          std::size_t{64 * 1024 * 1024}}) {
      net::ChannelConfig cfg = tcp_config(streams, 256 * 1024);
      const auto payload = pattern_payload(size, streams + size);
      const auto back = tcp_echo_once(cfg, payload);
      REQUIRE(back.size() == payload.size());
      CHECK(fnv1a(back) == fnv1a(payload));
    }
  }
}

TEST_CASE("asymmetric chunk sizes reassemble") {
  net::TcpListener listener(0);
  net::ChannelConfig server_cfg = tcp_config(4, 1024);
  net::ChannelConfig client_cfg = tcp_config(4, 8192);
  const auto payload = pattern_payload(3 * 1024 * 1024, 5);
  std::vector<uint8_t> got;
  std::thread server([&] {
    auto ch = listener.accept_channel(server_cfg);
    got = ch->recv();
    ch->send(got);  // echoes with the server's own chunking
  });
  auto client = net::open_channel(client_cfg, "127.0.0.1", listener.port());
  client->send(payload);
  const auto back = client->recv();
  server.join();
  CHECK(got == payload);
  CHECK(back == payload);
}

TEST_CASE("zero streams is a config error") {
  net::ChannelConfig cfg = tcp_config(0, 8192);
  CHECK_THROWS_AS(net::open_channel(cfg, "127.0.0.1", 1), net::TransportError);
}

TEST_CASE("connection refused reports the stream") {
  net::ChannelConfig cfg = tcp_config(2, 8192);
  uint16_t dead_port;
  {
    net::TcpListener probe(0);
    dead_port = probe.port();
  }
  try {
    (void)net::open_channel(cfg, "127.0.0.1", dead_port);
    FAIL("expected connect failure");
  } catch (const net::TransportError& e) {
    CHECK(std::string(e.what()).find("stream 0") != std::string::npos);
  }
}

TEST_CASE("pacing bounds the injection rate") {
  net::ChannelConfig cfg = tcp_config(4, 64 * 1024);
  net::TcpListener listener(0);
  const std::size_t bytes = 10 * 1024 * 1024;
  const double rate = 100e6;
  std::thread server([&] {
    auto ch = listener.accept_channel(cfg);
    (void)ch->recv();
  });
  auto client = net::open_channel(cfg, "127.0.0.1", listener.port());
  const auto payload = pattern_payload(bytes, 7);
  const double t0 = client->clock();
  net::paced_send(*client, payload, rate);
  const double elapsed = client->clock() - t0;
  server.join();
  CHECK(elapsed >= static_cast<double>(bytes) / rate);
  CHECK(static_cast<double>(bytes) / elapsed <= 1.1 * rate);
}

TEST_CASE("one megabyte at one megabyte per second takes about a second") {
  net::ChannelConfig cfg = tcp_config(1, 16 * 1024);
  net::TcpListener listener(0);
  std::thread server([&] {
    auto ch = listener.accept_channel(cfg);
    (void)ch->recv();
  });
  auto client = net::open_channel(cfg, "127.0.0.1", listener.port());
  const auto payload = pattern_payload(1024 * 1024, 9);
  const double t0 = client->clock();
  net::paced_send(*client, payload, 1024.0 * 1024.0);
  const double elapsed = client->clock() - t0;
  server.join();
  CHECK(elapsed >= 1.0);
  CHECK(elapsed <= 1.3);
}

TEST_CASE("unlimited pacing degenerates to a plain send") {
  net::ChannelConfig cfg = tcp_config(2, 64 * 1024);
  net::TcpListener listener(0);
  std::vector<uint8_t> got;
  std::thread server([&] {
    auto ch = listener.accept_channel(cfg);
    got = ch->recv();
  });
  auto client = net::open_channel(cfg, "127.0.0.1", listener.port());
  const auto payload = pattern_payload(1 << 20, 11);
  net::paced_send(*client, payload, 0.0);
  server.join();
  CHECK(got == payload);
}

TEST_CASE("relay chains are byte transparent") {
  net::ChannelConfig cfg = tcp_config(4, 32 * 1024);
  net::TcpListener listener(0);
  net::Relay inner(0, "127.0.0.1", listener.port());
  net::Relay outer(0, "127.0.0.1", inner.port());

  const auto payload = pattern_payload(8 * 1024 * 1024, 13);
  std::vector<uint8_t> got;
  std::thread server([&] {
    auto ch = listener.accept_channel(cfg);
    got = ch->recv();
    ch->send(got);
  });
  auto client = net::open_channel(cfg, "127.0.0.1", outer.port());
  client->send(payload);
  const auto back = client->recv();
  server.join();
  CHECK(fnv1a(got) == fnv1a(payload));
  CHECK(fnv1a(back) == fnv1a(payload));
}

TEST_CASE("relay refuses when downstream is unreachable") {
  uint16_t dead_port;
  {
    net::TcpListener probe(0);
    dead_port = probe.port();
  }
  net::Relay relay(0, "127.0.0.1", dead_port);
  net::ChannelConfig cfg = tcp_config(1, 8192);
  CHECK_THROWS_AS(net::open_channel(cfg, "127.0.0.1", relay.port()),
                  net::TransportError);
}

TEST_CASE("loopback netbench sanity") {
  net::ChannelConfig multi = tcp_config(16, 256 * 1024);
  net::TcpListener listener(0);
  std::thread echo([&] {
    auto ch = listener.accept_channel(multi);
    net::netbench_echo(*ch, 1, 2);
  });
  auto client = net::open_channel(multi, "127.0.0.1", listener.port());
  const auto result = net::netbench(*client, {64 * 1024 * 1024}, 2);
  echo.join();
  CHECK(result.rtt >= 0.0);
  REQUIRE(result.points.size() == 1);
  CHECK(result.points[0].throughput > 0.0);
}

TEST_CASE("transfer profiles carry the tuned settings") {
  const auto lightpath = presets::lightpath_profile();
  CHECK(lightpath.streams == 64);
  CHECK(lightpath.send_chunk == 8 * 1024);
  CHECK(lightpath.pacing_rate == Approx(1e8));
  const auto shared = presets::shared_wan_profile();
  CHECK(shared.streams == 16);
  CHECK(shared.send_chunk == 256 * 1024);
}

}  // TEST_SUITE
