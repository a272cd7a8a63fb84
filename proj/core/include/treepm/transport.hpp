#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace tpm::net {

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Backend { simulated, tcp };

struct ChannelConfig {
  Backend backend = Backend::simulated;
  int streams = 1;
  std::size_t send_chunk = 256 * 1024;
  std::size_t recv_chunk = 256 * 1024;
  double pacing_rate = 0.0;     // bytes/s over the whole channel, 0 = unlimited
  std::size_t buffer_size = 0;  // socket buffer hint, 0 = OS default
  double latency = 0.0;         // simulated round-trip time [s]
  double bandwidth = 0.0;       // simulated bandwidth [bytes/s]
  uint32_t channel_id = 0;

  void validate() const;
};

// Wire frame header, little-endian, 22 bytes on the wire:
//   magic "SUWP" | version u16 | channel id u32 | message length u64 |
//   stream index u16 | stream count u16
// One frame per stream per message; the payload slice of stream k is the
// round-robin chunk subsequence k, k+S, k+2S, ... of the message.
struct FrameHeader {
  static constexpr std::size_t kSize = 22;
  static constexpr uint16_t kVersion = 1;

  uint32_t channel_id = 0;
  uint64_t message_length = 0;
  uint16_t stream_index = 0;
  uint16_t stream_count = 1;

  std::array<uint8_t, kSize> encode() const;
  static FrameHeader decode(const uint8_t* data);
};

// Bytes of the message that stream `s` of `count` carries under round-robin
// chunking.
std::size_t stream_slice_bytes(uint64_t message_length, std::size_t chunk,
                               int s, int count);

// One-way delivery time of the deterministic network model:
// latency/2 + bytes/bandwidth.
double simulated_delivery_time(const ChannelConfig& config, std::size_t bytes);

// A bidirectional message channel. send() delivers a whole message; recv()
// blocks for the next one and returns it bit-exactly. clock() is the
// endpoint's time base: virtual seconds for the simulated backend, steady
// wall seconds for tcp; netbench and the harness measure durations as clock
// deltas.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual void send(const std::vector<uint8_t>& payload) = 0;
  virtual std::vector<uint8_t> recv() = 0;
  virtual double clock() = 0;
  virtual const ChannelConfig& config() const = 0;
};

using ChannelPtr = std::unique_ptr<Channel>;

// In-process simulated link; both endpoints share one deterministic timing
// model. Hop latencies of `extra_hops` relays add their latency/2 each way
// (bandwidth is the minimum across hops).
std::pair<ChannelPtr, ChannelPtr> make_sim_pair(const ChannelConfig& config);
std::pair<ChannelPtr, ChannelPtr> make_sim_chain(
    const std::vector<ChannelConfig>& hops);

// TCP backend. The listener owns the accept socket; each accept_channel /
// open_channel pair establishes `streams` connections with a handshake that
// pins channel id, stream identity and the sender chunk size.
class TcpListener {
 public:
  explicit TcpListener(uint16_t port);  // 0 picks an ephemeral port
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  uint16_t port() const { return port_; }
  ChannelPtr accept_channel(const ChannelConfig& config);

 private:
  int fd_ = -1;
  uint16_t port_ = 0;
};

ChannelPtr open_channel(const ChannelConfig& config, const std::string& host,
                        uint16_t port);

// Sends with the injection rate limited to `pacing_rate` bytes/s by
// inter-chunk sleeping; 0 falls back to a plain send.
void paced_send(Channel& channel, const std::vector<uint8_t>& payload,
                double pacing_rate);

// User-space byte forwarder: accepts on `listen_port` and pipes every
// connection verbatim to forward_host:forward_port, both directions.
// Relays are chainable and protocol-agnostic.
class Relay {
 public:
  Relay(uint16_t listen_port, std::string forward_host, uint16_t forward_port);
  ~Relay();
  uint16_t port() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct NetbenchResult {
  double rtt = 0.0;  // round-trip latency from minimal-payload pings
  struct Point {
    std::size_t bytes = 0;
    double seconds = 0.0;     // one-way transfer time, latency removed
    double throughput = 0.0;  // bytes/s
  };
  std::vector<Point> points;
};

// Timed transfers against an echo peer driving run sizes in order:
// `reps` pings, then per size `reps` one-way sends acknowledged by an empty
// reply. netbench_echo() is the peer side of the same schedule.
NetbenchResult netbench(Channel& channel, const std::vector<std::size_t>& sizes,
                        int reps);
void netbench_echo(Channel& channel, std::size_t n_sizes, int reps);
std::string netbench_csv(const NetbenchResult& result);

}  // namespace tpm::net
