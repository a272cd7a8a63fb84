#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <thread>

#include "treepm/ring.hpp"

using namespace tpm;
using doctest::Approx;

namespace {

// An s-site simulated ring; index i of lefts/rights belongs to site i.
struct SimRing {
  std::vector<net::ChannelPtr> a, b;
  std::vector<ring::SiteEndpoint> endpoints;

  explicit SimRing(int s, double lambda = 0.01, double sigma = 1e8) {
    net::ChannelConfig link;
    link.backend = net::Backend::simulated;
    link.latency = lambda;
    link.bandwidth = sigma;
    a.resize(s);
    b.resize(s);
    for (int i = 0; i < s; ++i) {
      auto [x, y] = net::make_sim_pair(link);
      a[i] = std::move(x);
      b[i] = std::move(y);
    }
    endpoints.resize(s);
    for (int i = 0; i < s; ++i) {
      endpoints[i].site = i;
      endpoints[i].site_count = s;
      endpoints[i].right = a[i].get();
      endpoints[i].left = b[(i + s - 1) % s].get();
      endpoints[i].lambda_wan = lambda;
      endpoints[i].sigma_wan_eff = sigma;
      endpoints[i].virtual_clock = true;
    }
  }

  // Runs `fn(site_endpoint, site_index)` on every site concurrently.
  template <typename Fn>
  void run(Fn fn) {
    std::vector<std::thread> threads;
    const int s = static_cast<int>(endpoints.size());
    for (int i = 0; i < s; ++i)
      threads.emplace_back([this, fn, i] { fn(endpoints[i], i); });
    for (auto& t : threads) t.join();
  }
};

}  // namespace

TEST_SUITE("ring") {

TEST_CASE("planned exchange counts") {
  CHECK(ring::plan_step_exchanges(1) == 0);
  CHECK(ring::plan_step_exchanges(2) == 13);
  CHECK(ring::plan_step_exchanges(3) == 18);
  CHECK(ring::plan_step_exchanges(4) == 23);
  CHECK(ring::plan_step_exchanges(5) == 28);
}

TEST_CASE("single site mesh reduce is the identity") {
  ring::SiteEndpoint ep;
  ep.site_count = 1;
  const std::vector<double> grid{1.0, 2.5, -3.0};
  const auto out = ring::ring_reduce_mesh(ep, grid, 7.0, 3, 0.25);
  CHECK(out.density == grid);
  CHECK(out.t_calc == std::vector<double>{7.0});
  CHECK(out.counts == std::vector<uint64_t>{3});
  CHECK(out.dt_min == 0.25);
  CHECK(ep.stats.wan_exchanges() == 0);
}

TEST_CASE("constant grids sum across three sites") {
  SimRing ring3(3);
  std::vector<std::vector<double>> results(3);
  ring3.run([&](ring::SiteEndpoint& ep, int site) {
    const std::vector<double> grid(64, static_cast<double>(site + 1));
    results[site] =
        ring::ring_reduce_mesh(ep, grid, 1.0 + site, 100, 0.5 - 0.1 * site).density;
  });
  for (const auto& r : results)
    for (double v : r) CHECK(v == Approx(6.0));
}

TEST_CASE("random grids match the serial fold exactly") {
  // Wire cells are single precision; the fold over the wire values in site
  // order must match a serial fold bit for bit.
  const int s = 4;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<std::vector<double>> grids(s, std::vector<double>(256));
  for (auto& g : grids)
    for (double& v : g) v = u(rng);

  std::vector<double> expected(256, 0.0);
  for (int site = 0; site < s; ++site)
    ring::fold_wire_grid(expected, ring::grid_to_wire(grids[site]));

  SimRing ring4(s);
  std::vector<ring::MeshReduceResult> results(s);
  ring4.run([&](ring::SiteEndpoint& ep, int site) {
    results[site] = ring::ring_reduce_mesh(ep, grids[site], 1.0, 50, 1.0);
  });
  for (int site = 0; site < s; ++site) {
    REQUIRE(results[site].density.size() == expected.size());
    for (std::size_t c = 0; c < expected.size(); ++c)
      CHECK(results[site].density[c] == expected[c]);  // 0 ULP
  }
  // Aux scalars aggregate as a list and a minimum.
  CHECK(results[0].t_calc == std::vector<double>(4, 1.0));
  CHECK(results[0].dt_min == 1.0);
}

TEST_CASE("mesh shape mismatch is a protocol error") {
  std::vector<double> acc(10, 0.0);
  CHECK_THROWS_AS(ring::fold_wire_grid(acc, std::vector<uint8_t>(8)),
                  ring::ProtocolError);
}

TEST_CASE("sample gather concatenates in site order everywhere") {
  SimRing ring3(3);
  const std::vector<std::size_t> counts{2, 0, 5};
  std::vector<SampleSet> results(3);
  ring3.run([&](ring::SiteEndpoint& ep, int site) {
    SampleSet local;
    local.r_samp = 0.25;
    for (std::size_t k = 0; k < counts[site]; ++k)
      local.x.push_back(static_cast<float>(10 * site + k));
    results[site] = ring::ring_gather_samples(ep, local);
  });
  const std::vector<float> expect{0.0f, 1.0f, 20.0f, 21.0f, 22.0f, 23.0f, 24.0f};
  for (int site = 0; site < 3; ++site) CHECK(results[site].x == expect);
}

TEST_CASE("let exchange counts sessions per the ring size") {
  for (int s : {2, 3}) {
    SimRing ringn(s);
    std::vector<uint32_t> sessions(s);
    ringn.run([&](ring::SiteEndpoint& ep, int site) {
      LetExport to_left, to_right;
      to_left.ids = {static_cast<uint64_t>(site)};
      to_left.masses = {1.0};
      to_left.positions = {{0.1, 0.2, 0.3}};
      to_right = to_left;
      const auto got = ring::exchange_let(ep, to_left, to_right);
      sessions[site] =
          ep.stats.phase[static_cast<int>(ring::Phase::let)].neighbor_sessions;
      // Imports carry the neighbours' particles.
      if (s == 2) {
        REQUIRE(got.from_left.particle_count() == 1);
        CHECK(got.from_left.ids[0] == static_cast<uint64_t>(1 - site));
      } else {
        REQUIRE(got.from_left.particle_count() == 1);
        REQUIRE(got.from_right.particle_count() == 1);
        CHECK(got.from_left.ids[0] == static_cast<uint64_t>((site + s - 1) % s));
        CHECK(got.from_right.ids[0] == static_cast<uint64_t>((site + 1) % s));
      }
    });
    for (int site = 0; site < s; ++site)
      CHECK(sessions[site] == (s == 2 ? 1 : 2));
  }
}

TEST_CASE("empty exports still complete the phase") {
  SimRing ring3(3);
  ring3.run([&](ring::SiteEndpoint& ep, int) {
    const auto got = ring::exchange_let(ep, {}, {});
    CHECK(got.from_left.particle_count() == 0);
    CHECK(got.from_right.particle_count() == 0);
    CHECK(ep.stats.phase[static_cast<int>(ring::Phase::let)].exchanges == 4);
  });
}

TEST_CASE("full step exchange accounting hits 5s+3") {
  for (int s : {2, 3, 4, 5}) {
    SimRing ringn(s);
    ringn.run([&](ring::SiteEndpoint& ep, int) {
      const std::vector<double> grid(32, 1.0);
      (void)ring::ring_reduce_mesh(ep, grid, 1.0, 10, 1.0);
      SampleSet samples;
      samples.x = {0.5f};
      (void)ring::ring_gather_samples(ep, samples);
      ring::ring_agree_boundaries(ep, std::vector<double>(s - 1, 0.5));
      (void)ring::exchange_let(ep, {}, {});
      ParticleSet none;
      none.box = {1.0, true};
      (void)ring::migrate_particles(ep, none, none, none.box);
      CHECK(ep.stats.wan_exchanges() == ring::plan_step_exchanges(s));
      CHECK(ep.stats.wan_latency_seconds ==
            Approx(0.01 * ring::plan_step_exchanges(s)).epsilon(1e-12));
    });
  }
}

TEST_CASE("migration conserves the global id multiset") {
  const int s = 3;
  SimRing ringn(s);
  std::mt19937_64 rng(5);
  // Random ids distributed over sites; each site sends a random split of its
  // particles left and right.
  std::vector<ParticleSet> locals(s);
  std::vector<uint64_t> all_ids;
  for (int site = 0; site < s; ++site) {
    locals[site].box = {1.0, true};
    for (int k = 0; k < 3334; ++k) {
      const uint64_t id = static_cast<uint64_t>(site) * 100000 + k;
      all_ids.push_back(id);
      locals[site].push_back(id, 1.0, {0.5, 0.5, 0.5}, {});
    }
  }
  std::vector<ParticleSet> after(s);
  ringn.run([&](ring::SiteEndpoint& ep, int site) {
    std::mt19937_64 site_rng(100 + site);
    std::vector<std::size_t> stay, left, right;
    for (std::size_t i = 0; i < locals[site].size(); ++i) {
      const int pick = static_cast<int>(site_rng() % 3);
      (pick == 0 ? stay : pick == 1 ? left : right).push_back(i);
    }
    const ParticleSet to_left = locals[site].select(left);
    const ParticleSet to_right = locals[site].select(right);
    after[site] = locals[site].select(stay);
    after[site].append(
        ring::migrate_particles(ep, to_left, to_right, locals[site].box));
  });
  std::vector<uint64_t> got;
  for (const auto& ps : after) got.insert(got.end(), ps.ids.begin(), ps.ids.end());
  std::sort(got.begin(), got.end());
  std::sort(all_ids.begin(), all_ids.end());
  CHECK(got == all_ids);
}

TEST_CASE("chunked exchange reassembles bit-exactly") {
  net::ChannelConfig link;
  link.backend = net::Backend::simulated;
  link.latency = 0.0;
  link.bandwidth = 1e9;
  auto [a, b] = net::make_sim_pair(link);

  std::vector<uint8_t> payload(10 * 1024 * 1024);
  for (std::size_t i = 0; i < payload.size(); ++i)
    payload[i] = static_cast<uint8_t>(i * 7 + 3);

  std::thread sender([&] { ring::chunked_send(*a, payload, 1024 * 1024); });
  const auto got = ring::chunked_recv(*b);
  sender.join();
  CHECK(got == payload);

  // Payload below the cap crosses as a single sub-exchange.
  std::thread small([&] { ring::chunked_send(*a, {1, 2, 3}, 1024); });
  const auto tiny = ring::chunked_recv(*b);
  small.join();
  CHECK(tiny == std::vector<uint8_t>{1, 2, 3});

  // Zero-length payloads still complete with one empty sub-exchange.
  std::thread empty([&] { ring::chunked_send(*a, {}, 1024); });
  const auto nothing = ring::chunked_recv(*b);
  empty.join();
  CHECK(nothing.empty());
}

TEST_CASE("stats csv schema") {
  CHECK(ring::stats_csv_header() == "step,phase,bytes,seconds");
  ring::PhaseStats st;
  st.payload_bytes = 42;
  st.seconds = 0.5;
  CHECK(ring::stats_csv_row(3, ring::Phase::let, st) == "3,let,42,0.5");
}

}  // TEST_SUITE
