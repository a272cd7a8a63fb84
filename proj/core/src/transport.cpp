#include "treepm/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <sstream>
#include <thread>

namespace tpm::net {

namespace {

double steady_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

void put_le(uint8_t* at, uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) at[i] = static_cast<uint8_t>(v >> (8 * i));
}

uint64_t get_le(const uint8_t* at, int bytes) {
  uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<uint64_t>(at[i]) << (8 * i);
  return v;
}

}  // namespace

void ChannelConfig::validate() const {
  if (streams < 1) throw TransportError("ChannelConfig: streams must be >= 1");
  if (send_chunk < 1 || recv_chunk < 1)
    throw TransportError("ChannelConfig: chunks must be at least 1 byte");
  if (backend == Backend::simulated) {
    if (latency < 0.0) throw TransportError("ChannelConfig: negative latency");
    if (!(bandwidth > 0.0))
      throw TransportError("ChannelConfig: simulated bandwidth must be positive");
  }
  if (pacing_rate < 0.0) throw TransportError("ChannelConfig: negative pacing rate");
}

std::array<uint8_t, FrameHeader::kSize> FrameHeader::encode() const {
  std::array<uint8_t, kSize> out{};
  out[0] = 'S';
  out[1] = 'U';
  out[2] = 'W';
  out[3] = 'P';
  put_le(&out[4], kVersion, 2);
  put_le(&out[6], channel_id, 4);
  put_le(&out[10], message_length, 8);
  put_le(&out[18], stream_index, 2);
  put_le(&out[20], stream_count, 2);
  return out;
}

FrameHeader FrameHeader::decode(const uint8_t* d) {
  if (d[0] != 'S' || d[1] != 'U' || d[2] != 'W' || d[3] != 'P')
    throw TransportError("frame: bad magic");
  if (get_le(&d[4], 2) != kVersion)
    throw TransportError("frame: unsupported version");
  FrameHeader h;
  h.channel_id = static_cast<uint32_t>(get_le(&d[6], 4));
  h.message_length = get_le(&d[10], 8);
  h.stream_index = static_cast<uint16_t>(get_le(&d[18], 2));
  h.stream_count = static_cast<uint16_t>(get_le(&d[20], 2));
  return h;
}

std::size_t stream_slice_bytes(uint64_t message_length, std::size_t chunk,
                               int s, int count) {
  const uint64_t n_chunks = (message_length + chunk - 1) / chunk;
  if (static_cast<uint64_t>(s) >= n_chunks) return 0;
  const uint64_t mine = (n_chunks - 1 - s) / count + 1;
  std::size_t bytes = static_cast<std::size_t>(mine * chunk);
  if (static_cast<uint64_t>(s) == (n_chunks - 1) % static_cast<uint64_t>(count))
    bytes -= static_cast<std::size_t>(n_chunks * chunk - message_length);
  return bytes;
}

double simulated_delivery_time(const ChannelConfig& config, std::size_t bytes) {
  return 0.5 * config.latency + static_cast<double>(bytes) / config.bandwidth;
}

// ---------------------------------------------------------------------------
// Simulated backend. A message departs at the sender's virtual time and
// arrives one one-way-delay later; recv() advances the receiver's clock to
// the arrival stamp. Relay chains add their per-hop latency/2 and cap the
// bandwidth at the slowest hop.
// ---------------------------------------------------------------------------

namespace {

struct SimMessage {
  std::vector<uint8_t> payload;
  double arrival = 0.0;
};

struct SimQueue {
  std::mutex mu;
  std::condition_variable cv;
  std::deque<SimMessage> q;

  void push(SimMessage m) {
    {
      std::lock_guard<std::mutex> lock(mu);
      q.push_back(std::move(m));
    }
    cv.notify_one();
  }
  SimMessage pop() {
    std::unique_lock<std::mutex> lock(mu);
    cv.wait(lock, [this] { return !q.empty(); });
    SimMessage m = std::move(q.front());
    q.pop_front();
    return m;
  }
};

struct SimLinkModel {
  double one_way_latency = 0.0;
  double bandwidth = 0.0;
  double delivery(std::size_t bytes) const {
    return one_way_latency + static_cast<double>(bytes) / bandwidth;
  }
};

class SimChannel final : public Channel {
 public:
  SimChannel(ChannelConfig config, SimLinkModel model,
             std::shared_ptr<SimQueue> tx, std::shared_ptr<SimQueue> rx)
      : config_(std::move(config)),
        model_(model),
        tx_(std::move(tx)),
        rx_(std::move(rx)) {}

  void send(const std::vector<uint8_t>& payload) override {
    send_rated(payload, config_.pacing_rate);
  }

  void send_rated(const std::vector<uint8_t>& payload, double rate) {
    double depart;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (rate > 0.0)
        clock_ += static_cast<double>(payload.size()) / rate;
      depart = clock_;
    }
    SimMessage m;
    m.payload = payload;
    m.arrival = depart + model_.delivery(payload.size());
    tx_->push(std::move(m));
  }

  std::vector<uint8_t> recv() override {
    SimMessage m = rx_->pop();
    std::lock_guard<std::mutex> lock(mu_);
    clock_ = std::max(clock_, m.arrival);
    return std::move(m.payload);
  }

  double clock() override {
    std::lock_guard<std::mutex> lock(mu_);
    return clock_;
  }

  const ChannelConfig& config() const override { return config_; }

 private:
  ChannelConfig config_;
  SimLinkModel model_;
  std::shared_ptr<SimQueue> tx_, rx_;
  std::mutex mu_;
  double clock_ = 0.0;
};

}  // namespace

std::pair<ChannelPtr, ChannelPtr> make_sim_pair(const ChannelConfig& config) {
  return make_sim_chain({config});
}

std::pair<ChannelPtr, ChannelPtr> make_sim_chain(
    const std::vector<ChannelConfig>& hops) {
  if (hops.empty()) throw TransportError("make_sim_chain: no hops");
  SimLinkModel model;
  model.bandwidth = hops.front().bandwidth;
  for (const ChannelConfig& hop : hops) {
    hop.validate();
    if (hop.backend != Backend::simulated)
      throw TransportError("make_sim_chain: hops must be simulated");
    model.one_way_latency += 0.5 * hop.latency;
    model.bandwidth = std::min(model.bandwidth, hop.bandwidth);
  }
  auto ab = std::make_shared<SimQueue>();
  auto ba = std::make_shared<SimQueue>();
  auto a = std::make_unique<SimChannel>(hops.front(), model, ab, ba);
  auto b = std::make_unique<SimChannel>(hops.front(), model, ba, ab);
  return {std::move(a), std::move(b)};
}

// ---------------------------------------------------------------------------
// TCP backend
// ---------------------------------------------------------------------------

namespace {

void write_all(int fd, const uint8_t* data, std::size_t len, int stream_index) {
  std::size_t done = 0;
  while (done < len) {
    const ssize_t n = ::write(fd, data + done, len - done);
    if (n <= 0)
      throw TransportError("tcp: write failed on stream " +
                           std::to_string(stream_index) + ": " +
                           std::strerror(errno));
    done += static_cast<std::size_t>(n);
  }
}

void read_all(int fd, uint8_t* data, std::size_t len, int stream_index) {
  std::size_t done = 0;
  while (done < len) {
    const ssize_t n = ::read(fd, data + done, len - done);
    if (n == 0)
      throw TransportError("tcp: stream " + std::to_string(stream_index) +
                           " closed mid-message");
    if (n < 0)
      throw TransportError("tcp: read failed on stream " +
                           std::to_string(stream_index) + ": " +
                           std::strerror(errno));
    done += static_cast<std::size_t>(n);
  }
}

void configure_socket(int fd, const ChannelConfig& config) {
  const int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  if (config.buffer_size > 0) {
    const int sz = static_cast<int>(config.buffer_size);
    ::setsockopt(fd, SOL_SOCKET, SO_SNDBUF, &sz, sizeof(sz));
    ::setsockopt(fd, SOL_SOCKET, SO_RCVBUF, &sz, sizeof(sz));
  }
}

// Per-stream handshake frame: the 16-byte body carries the sender's chunk
// size and stream count; both sides exchange one so each end knows how the
// peer stripes its messages.
void send_hello(int fd, const ChannelConfig& config, int stream_index) {
  FrameHeader h;
  h.channel_id = config.channel_id;
  h.message_length = 16;
  h.stream_index = static_cast<uint16_t>(stream_index);
  h.stream_count = static_cast<uint16_t>(config.streams);
  auto enc = h.encode();
  write_all(fd, enc.data(), enc.size(), stream_index);
  uint8_t body[16];
  put_le(body, config.send_chunk, 8);
  put_le(body + 8, static_cast<uint64_t>(config.streams), 8);
  write_all(fd, body, 16, stream_index);
}

struct HelloInfo {
  uint64_t chunk = 0;
  int streams = 1;
  int stream_index = 0;
};

HelloInfo recv_hello(int fd, int stream_index) {
  std::array<uint8_t, FrameHeader::kSize> hdr;
  read_all(fd, hdr.data(), hdr.size(), stream_index);
  const FrameHeader h = FrameHeader::decode(hdr.data());
  if (h.message_length != 16)
    throw TransportError("tcp: malformed hello on stream " +
                         std::to_string(stream_index));
  uint8_t body[16];
  read_all(fd, body, 16, stream_index);
  HelloInfo info;
  info.chunk = get_le(body, 8);
  info.streams = static_cast<int>(get_le(body + 8, 8));
  info.stream_index = h.stream_index;
  if (info.chunk == 0 || info.streams < 1)
    throw TransportError("tcp: invalid hello parameters");
  return info;
}

class TcpChannel final : public Channel {
 public:
  TcpChannel(ChannelConfig config, std::vector<int> fds, uint64_t peer_chunk)
      : config_(std::move(config)),
        fds_(std::move(fds)),
        peer_chunk_(peer_chunk) {}

  ~TcpChannel() override {
    for (int fd : fds_) ::close(fd);
  }

  void send(const std::vector<uint8_t>& payload) override {
    send_rated(payload, config_.pacing_rate);
  }

  void send_rated(const std::vector<uint8_t>& payload, double pacing_rate) {
    const int count = static_cast<int>(fds_.size());
    FrameHeader h;
    h.channel_id = config_.channel_id;
    h.message_length = payload.size();
    h.stream_count = static_cast<uint16_t>(count);

    if (pacing_rate > 0.0) {
      // Serial paced write: headers first, then round-robin chunks with
      // inter-chunk sleeps holding the injection rate at the target.
      for (int s = 0; s < count; ++s) {
        h.stream_index = static_cast<uint16_t>(s);
        const auto enc = h.encode();
        write_all(fds_[s], enc.data(), enc.size(), s);
      }
      const double t0 = steady_seconds();
      std::size_t sent = 0;
      std::size_t offset = 0;
      int s = 0;
      while (offset < payload.size()) {
        const std::size_t n =
            std::min(config_.send_chunk, payload.size() - offset);
        write_all(fds_[s], payload.data() + offset, n, s);
        offset += n;
        sent += n;
        s = (s + 1) % count;
        const double due = static_cast<double>(sent) / pacing_rate;
        const double elapsed = steady_seconds() - t0;
        if (elapsed < due)
          std::this_thread::sleep_for(
              std::chrono::duration<double>(due - elapsed));
      }
      return;
    }

    std::vector<std::thread> workers;
    std::vector<std::string> errors(count);
    for (int s = 0; s < count; ++s) {
      workers.emplace_back([&, s] {
        try {
          FrameHeader mine = h;
          mine.stream_index = static_cast<uint16_t>(s);
          const auto enc = mine.encode();
          write_all(fds_[s], enc.data(), enc.size(), s);
          const std::size_t chunk = config_.send_chunk;
          for (std::size_t g = s; g * chunk < payload.size();
               g += static_cast<std::size_t>(count)) {
            const std::size_t at = g * chunk;
            const std::size_t n = std::min(chunk, payload.size() - at);
            write_all(fds_[s], payload.data() + at, n, s);
          }
        } catch (const std::exception& e) {
          errors[s] = e.what();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
      if (!e.empty()) throw TransportError(e);
  }

  std::vector<uint8_t> recv() override {
    const int count = static_cast<int>(fds_.size());
    std::vector<FrameHeader> headers(count);
    std::vector<std::string> errors(count);
    std::vector<uint8_t> buffer;
    std::mutex mu;
    bool sized = false;

    std::vector<std::thread> workers;
    for (int s = 0; s < count; ++s) {
      workers.emplace_back([&, s] {
        try {
          std::array<uint8_t, FrameHeader::kSize> hdr;
          read_all(fds_[s], hdr.data(), hdr.size(), s);
          headers[s] = FrameHeader::decode(hdr.data());
          const uint64_t length = headers[s].message_length;
          {
            std::lock_guard<std::mutex> lock(mu);
            if (!sized) {
              buffer.resize(length);
              sized = true;
            } else if (buffer.size() != length) {
              throw TransportError("tcp: stream length mismatch");
            }
          }
          // De-stripe by the peer's chunking; socket reads are capped at the
          // configured receive chunk.
          const std::size_t chunk = peer_chunk_;
          for (std::size_t g = s; g * chunk < length;
               g += static_cast<std::size_t>(count)) {
            const std::size_t at = g * chunk;
            std::size_t n = std::min(chunk, static_cast<std::size_t>(length - at));
            std::size_t done = 0;
            while (done < n) {
              const std::size_t piece =
                  std::min(n - done, config_.recv_chunk);
              read_all(fds_[s], buffer.data() + at + done, piece, s);
              done += piece;
            }
          }
        } catch (const std::exception& e) {
          errors[s] = e.what();
        }
      });
    }
    for (auto& w : workers) w.join();
    for (const auto& e : errors)
      if (!e.empty()) throw TransportError(e);
    return buffer;
  }

  double clock() override { return steady_seconds(); }
  const ChannelConfig& config() const override { return config_; }

 private:
  ChannelConfig config_;
  std::vector<int> fds_;
  uint64_t peer_chunk_;
};

}  // namespace

TcpListener::TcpListener(uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw TransportError("tcp: socket() failed");
  const int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    throw TransportError("tcp: bind failed: " + std::string(std::strerror(errno)));
  }
  if (::listen(fd_, 128) != 0) {
    ::close(fd_);
    throw TransportError("tcp: listen failed");
  }
  socklen_t len = sizeof(addr);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
  if (fd_ >= 0) ::close(fd_);
}

ChannelPtr TcpListener::accept_channel(const ChannelConfig& config) {
  config.validate();
  std::vector<int> fds;
  uint64_t peer_chunk = 0;
  int expected = 1;
  for (int s = 0; s == 0 || s < expected; ++s) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0)
      throw TransportError("tcp: accept failed for stream " + std::to_string(s));
    configure_socket(fd, config);
    const HelloInfo hello = recv_hello(fd, s);
    send_hello(fd, config, hello.stream_index);
    if (s == 0) {
      expected = hello.streams;
      peer_chunk = hello.chunk;
      fds.assign(expected, -1);
    }
    if (hello.stream_index < 0 || hello.stream_index >= expected ||
        fds[hello.stream_index] != -1) {
      ::close(fd);
      throw TransportError("tcp: duplicate or out-of-range stream index " +
                           std::to_string(hello.stream_index));
    }
    fds[hello.stream_index] = fd;
  }
  ChannelConfig cfg = config;
  cfg.backend = Backend::tcp;
  cfg.streams = expected;
  return std::make_unique<TcpChannel>(cfg, std::move(fds), peer_chunk);
}

ChannelPtr open_channel(const ChannelConfig& config, const std::string& host,
                        uint16_t port) {
  config.validate();
  if (config.backend != Backend::tcp)
    throw TransportError("open_channel: endpoint addresses need the tcp backend");
  std::vector<int> fds;
  fds.reserve(config.streams);
  uint64_t peer_chunk = 0;
  for (int s = 0; s < config.streams; ++s) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints,
                      &res) != 0)
      throw TransportError("tcp: cannot resolve " + host);
    int fd = -1;
    std::string err = "unreachable";
    // The peer's accept loop may lag a burst of connects; retry briefly.
    for (int attempt = 0; attempt < 100; ++attempt) {
      fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd < 0) break;
      if (::connect(fd, res->ai_addr, res->ai_addrlen) == 0) break;
      err = std::strerror(errno);
      ::close(fd);
      fd = -1;
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ::freeaddrinfo(res);
    if (fd < 0) {
      for (int open_fd : fds) ::close(open_fd);
      throw TransportError("tcp: connect failed for stream " +
                           std::to_string(s) + ": " + err);
    }
    configure_socket(fd, config);
    try {
      send_hello(fd, config, s);
      const HelloInfo hello = recv_hello(fd, s);
      peer_chunk = hello.chunk;
    } catch (...) {
      ::close(fd);
      for (int open_fd : fds) ::close(open_fd);
      throw;
    }
    fds.push_back(fd);
  }
  return std::make_unique<TcpChannel>(config, std::move(fds), peer_chunk);
}

void paced_send(Channel& channel, const std::vector<uint8_t>& payload,
                double pacing_rate) {
  if (pacing_rate <= 0.0) {
    channel.send(payload);
    return;
  }
  if (auto* tcp = dynamic_cast<TcpChannel*>(&channel)) {
    tcp->send_rated(payload, pacing_rate);
    return;
  }
  if (auto* sim = dynamic_cast<SimChannel*>(&channel)) {
    sim->send_rated(payload, pacing_rate);
    return;
  }
  channel.send(payload);
}

// ---------------------------------------------------------------------------
// Relay: accept, dial the forward target, splice bytes both ways.
// ---------------------------------------------------------------------------

struct Relay::Impl {
  int listen_fd = -1;
  uint16_t listen_port = 0;
  std::string host;
  uint16_t fwd_port;
  std::atomic<bool> stopping{false};
  std::thread acceptor;
  std::mutex mu;
  std::vector<std::thread> pumps;
  std::vector<int> fds;

  Impl(uint16_t port, std::string h, uint16_t p)
      : host(std::move(h)), fwd_port(p) {
    listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd < 0) throw TransportError("relay: socket() failed");
    const int one = 1;
    ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd, 128) != 0) {
      ::close(listen_fd);
      throw TransportError("relay: cannot listen: " +
                           std::string(std::strerror(errno)));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len);
    listen_port = ntohs(addr.sin_port);
    acceptor = std::thread([this] { accept_loop(); });
  }

  ~Impl() { shutdown(); }

  void track(int fd) {
    std::lock_guard<std::mutex> lock(mu);
    fds.push_back(fd);
  }

  static void pump(int from, int to) {
    uint8_t buf[64 * 1024];
    for (;;) {
      const ssize_t n = ::read(from, buf, sizeof(buf));
      if (n <= 0) break;
      std::size_t done = 0;
      while (done < static_cast<std::size_t>(n)) {
        const ssize_t w = ::write(to, buf + done, n - done);
        if (w <= 0) return;
        done += static_cast<std::size_t>(w);
      }
    }
    ::shutdown(to, SHUT_WR);
  }

  void accept_loop() {
    for (;;) {
      const int client = ::accept(listen_fd, nullptr, nullptr);
      if (client < 0) return;  // listener closed
      int upstream = ::socket(AF_INET, SOCK_STREAM, 0);
      addrinfo hints{};
      hints.ai_family = AF_INET;
      hints.ai_socktype = SOCK_STREAM;
      addrinfo* res = nullptr;
      bool ok = upstream >= 0 &&
                ::getaddrinfo(host.c_str(), std::to_string(fwd_port).c_str(),
                              &hints, &res) == 0;
      if (ok) {
        ok = ::connect(upstream, res->ai_addr, res->ai_addrlen) == 0;
        ::freeaddrinfo(res);
      }
      if (!ok) {
        // Downstream unreachable: refuse the upstream connection.
        if (upstream >= 0) ::close(upstream);
        ::close(client);
        continue;
      }
      const int nodelay = 1;
      ::setsockopt(client, IPPROTO_TCP, TCP_NODELAY, &nodelay, sizeof(nodelay));
      ::setsockopt(upstream, IPPROTO_TCP, TCP_NODELAY, &nodelay, sizeof(nodelay));
      track(client);
      track(upstream);
      std::lock_guard<std::mutex> lock(mu);
      pumps.emplace_back([client, upstream] { pump(client, upstream); });
      pumps.emplace_back([client, upstream] { pump(upstream, client); });
    }
  }

  void shutdown() {
    if (stopping.exchange(true)) return;
    if (listen_fd >= 0) {
      ::shutdown(listen_fd, SHUT_RDWR);
      ::close(listen_fd);
      listen_fd = -1;
    }
    if (acceptor.joinable()) acceptor.join();
    std::vector<std::thread> local;
    std::vector<int> local_fds;
    {
      std::lock_guard<std::mutex> lock(mu);
      local.swap(pumps);
      local_fds.swap(fds);
    }
    for (int fd : local_fds) ::shutdown(fd, SHUT_RDWR);
    for (auto& t : local)
      if (t.joinable()) t.join();
    for (int fd : local_fds) ::close(fd);
  }
};

Relay::Relay(uint16_t listen_port, std::string forward_host,
             uint16_t forward_port)
    : impl_(std::make_unique<Impl>(listen_port, std::move(forward_host),
                                   forward_port)) {}

Relay::~Relay() {
  if (impl_) impl_->shutdown();
}

uint16_t Relay::port() const { return impl_->listen_port; }

void Relay::stop() {
  if (impl_) impl_->shutdown();
}

// ---------------------------------------------------------------------------
// netbench
// ---------------------------------------------------------------------------

NetbenchResult netbench(Channel& channel, const std::vector<std::size_t>& sizes,
                        int reps) {
  NetbenchResult out;
  const std::vector<uint8_t> empty;
  double best_rtt = 0.0;
  for (int r = 0; r < reps; ++r) {
    const double t0 = channel.clock();
    channel.send(empty);
    (void)channel.recv();
    const double rtt = channel.clock() - t0;
    if (r == 0 || rtt < best_rtt) best_rtt = rtt;
  }
  out.rtt = best_rtt;
  for (std::size_t bytes : sizes) {
    std::vector<uint8_t> payload(bytes);
    for (std::size_t i = 0; i < bytes; ++i)
      payload[i] = static_cast<uint8_t>(i * 131 + 7);
    double best = 0.0;
    for (int r = 0; r < reps; ++r) {
      const double t0 = channel.clock();
      channel.send(payload);
      (void)channel.recv();  // empty ack
      const double elapsed = channel.clock() - t0;
      const double transfer = std::max(elapsed - best_rtt, 1e-12);
      if (r == 0 || transfer < best) best = transfer;
    }
    out.points.push_back({bytes, best, static_cast<double>(bytes) / best});
  }
  return out;
}

void netbench_echo(Channel& channel, std::size_t n_sizes, int reps) {
  const std::vector<uint8_t> empty;
  for (std::size_t s = 0; s < n_sizes + 1; ++s)
    for (int r = 0; r < reps; ++r) {
      (void)channel.recv();
      channel.send(empty);
    }
}

std::string netbench_csv(const NetbenchResult& result) {
  std::ostringstream os;
  os.precision(10);
  os << "bytes,seconds,bytes_per_second\n";
  os << 0 << ',' << result.rtt << ',' << 0.0 << '\n';
  for (const auto& p : result.points)
    os << p.bytes << ',' << p.seconds << ',' << p.throughput << '\n';
  return os.str();
}

}  // namespace tpm::net
