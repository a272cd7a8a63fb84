#include "treepm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include "treepm/ic.hpp"
#include "treepm/mesh.hpp"

namespace tpm::harness {

void ExperimentConfig::validate() const {
  spec.validate();
  if (steps < 1) throw std::invalid_argument("ExperimentConfig: steps must be >= 1");
  if (lattice_side < 2 || mesh_side < 2)
    throw std::invalid_argument("ExperimentConfig: lattice and mesh too small");
  if (!(force.cutoff_cells > 0.0))
    throw std::invalid_argument("ExperimentConfig: cutoff_cells must be positive");
  if (force.theta < 0.0)
    throw std::invalid_argument("ExperimentConfig: negative opening angle");
  if (backend == net::Backend::tcp) {
    if (tcp_hosts.size() != static_cast<std::size_t>(site_count()))
      throw std::invalid_argument("ExperimentConfig: tcp needs one host per site");
    if (tcp_base_port == 0)
      throw std::invalid_argument("ExperimentConfig: tcp needs a base port");
  }
}

namespace {

struct SiteStepStats {
  ring::ExchangeStats comm;
  double tree_seconds = 0.0;
  double pm_seconds = 0.0;
  uint64_t interactions = 0;
  double t_calc = 0.0;
  double dt = 0.0;
  ParticleSet snapshot;  // filled on cadence steps
  std::vector<SiteSlab> slabs;
  ParticleSet final_state;  // filled on the last step
};

// Merges the per-site views of one lockstep step into a single record. On
// the virtual clock the communication terms are global properties: one
// latency unit per exchange and the distinct payload volume over the
// effective bandwidth.
StepRecord merge_step(int step, const std::vector<SiteStepStats>& sites,
                      const model::RunSpec& spec, bool virtual_clock) {
  StepRecord rec;
  rec.step = step;
  rec.virtual_clock = virtual_clock;
  const int s = static_cast<int>(sites.size());
  const double sigma_eff = model::effective_sigma_wan(spec.net, s);

  for (int p = 0; p < ring::kPhaseCount; ++p) {
    uint64_t bytes = 0;
    double seconds = 0.0;
    for (const auto& site : sites) {
      bytes += site.comm.phase[p].payload_bytes;
      seconds = std::max(seconds, site.comm.phase[p].seconds);
    }
    rec.phase_bytes[p] = bytes;
    if (virtual_clock && s > 1) {
      const uint32_t units = sites[0].comm.phase[p].exchanges;
      seconds = spec.net.lambda_wan * units +
                static_cast<double>(bytes) / sigma_eff;
    }
    rec.phase_seconds[p] = seconds;
    rec.comm_seconds += seconds;
  }
  rec.wan_exchanges = sites.empty() ? 0 : sites[0].comm.wan_exchanges();
  if (virtual_clock && s > 1) {
    rec.wan_latency_seconds = spec.net.lambda_wan * rec.wan_exchanges;
    uint64_t total = 0;
    for (const auto& b : rec.phase_bytes) total += b;
    rec.wan_bandwidth_seconds = static_cast<double>(total) / sigma_eff;
  }
  for (const auto& site : sites) {
    rec.mesh_grid_bytes += site.comm.mesh_grid_bytes;
    rec.sample_bytes += site.comm.sample_bytes;
    rec.aux_bytes += site.comm.aux_bytes;
    rec.interaction_count += site.interactions;
    rec.tree_seconds = std::max(rec.tree_seconds, site.tree_seconds);
    rec.pm_seconds = std::max(rec.pm_seconds, site.pm_seconds);
    rec.t_calc.push_back(site.t_calc);
  }
  rec.dt = sites.empty() ? 0.0 : sites[0].dt;
  rec.total_seconds = rec.tree_seconds + rec.pm_seconds + rec.comm_seconds;
  return rec;
}

// State and per-step pipeline of one site driver. All drivers execute the
// same phase sequence; ring operations are the only synchronization points.
class SiteDriver {
 public:
  SiteDriver(const ExperimentConfig& cfg, int site, ParticleSet local,
             std::vector<SiteSlab> slabs, net::Channel* left,
             net::Channel* right)
      : cfg_(cfg),
        site_(site),
        s_(cfg.site_count()),
        local_(std::move(local)),
        slabs_(std::move(slabs)),
        mesh_(cfg.mesh_side, cfg.box_length) {
    ep_.site = site;
    ep_.site_count = s_;
    ep_.left = left;
    ep_.right = right;
    ep_.lambda_wan = cfg.spec.net.lambda_wan;
    ep_.sigma_wan_eff = model::effective_sigma_wan(cfg.spec.net, s_);
    ep_.virtual_clock = cfg.backend == net::Backend::simulated;
    t_calc_prev_ = 1.0;
    count_prev_ = local_.size();
    dt_proposal_ = cfg.dt.adaptive ? cfg.dt.dt_max : cfg.dt.fixed_dt;
    range_ = cfg.force.cutoff_cells * mesh_.cell_width();
    margin_ = mesh_.cell_width();
  }

  SiteStepStats run_step(int step) {
    ep_.stats.reset();
    SiteStepStats out;
    const double p_local =
        static_cast<double>(cfg_.spec.p_total) / static_cast<double>(s_);
    const model::MachineConstants& machine = cfg_.spec.sites[site_];
    const bool sim = ep_.virtual_clock;

    // Phase 1: mesh densities plus load/timestep scalars. The force time
    // travels with the population it was measured over.
    mesh_.clear();
    pm_assign_density(local_, mesh_);
    const auto mr = ring::ring_reduce_mesh(ep_, mesh_.density, t_calc_prev_,
                                           count_prev_, dt_proposal_);
    mesh_.density = mr.density;

    const double pm_wall0 = now();
    pm_solve(mesh_);
    std::vector<Vec3> pm_acc = pm_interpolate(mesh_, local_);
    out.pm_seconds =
        sim ? machine.tau_fft * static_cast<double>(mesh_.total_cells()) *
                      std::log2(static_cast<double>(mesh_.total_cells())) +
                  machine.tau_mesh * static_cast<double>(local_.size()) / p_local
            : now() - pm_wall0;

    // Phase 2: sample gather, boundary update, agreement.
    const SampleSet local_samples = sample_particles(local_, cfg_.spec.r_samp);
    const SampleSet global_samples = ring::ring_gather_samples(ep_, local_samples);
    std::vector<SiteSlab> new_slabs = slabs_;
    if (s_ > 1) {
      std::vector<SiteSlab> loaded = slabs_;
      for (int i = 0; i < s_; ++i) {
        loaded[i].t_calc = mr.t_calc[i];
        loaded[i].count = mr.counts[i];
      }
      const BoundaryUpdate update = update_site_boundaries(
          global_samples, mr.t_calc, loaded, cfg_.move_limit, cfg_.box_length);
      new_slabs = update.slabs;
      std::vector<double> interior;
      for (int b = 1; b < s_; ++b) interior.push_back(new_slabs[b].lo);
      ring::ring_agree_boundaries(ep_, interior);
    }

    // Phase 3: local essential trees against the slabs particles currently
    // obey (the freshly shifted boundaries only steer this step's migration).
    ForceParams params = cfg_.force;
    params.theta = cfg_.force.theta_at(step);
    ParticleSet force_set = local_;
    std::vector<TreeAggregate> aggregates;
    if (s_ > 1) {
      check_slab_widths();
      LetExport to_left, to_right;
      if (!local_.empty()) {
        const OcTree local_tree = OcTree::build(local_, cfg_.n_leaf);
        const SiteSlab& left_slab = slabs_[(site_ + s_ - 1) % s_];
        const SiteSlab& right_slab = slabs_[(site_ + 1) % s_];
        to_left = build_local_essential_tree(local_tree, left_slab, params,
                                             range_, margin_);
        to_right = s_ == 2
                       ? to_left
                       : build_local_essential_tree(local_tree, right_slab,
                                                    params, range_, margin_);
      }
      const ring::LetExchangeResult let =
          ring::exchange_let(ep_, to_left, to_right);
      append_let_particles(let.from_left, force_set);
      append_let_particles(let.from_right, force_set);
      aggregates = let.from_left.aggregates;
      aggregates.insert(aggregates.end(), let.from_right.aggregates.begin(),
                        let.from_right.aggregates.end());
    }

    // Force pass: short-range tree walk plus the mesh force.
    const double tree_wall0 = now();
    ForceResult tree_res;
    tree_res.accel.assign(local_.size(), Vec3{});
    if (!local_.empty())
      tree_res = tree_force(OcTree::build_merged(force_set, aggregates, cfg_.n_leaf),
                            local_, params, range_);
    out.interactions = tree_res.interaction_count;
    out.tree_seconds =
        sim ? 1.2 * machine.tau_tree *
                  static_cast<double>(tree_res.interaction_count) / p_local
            : now() - tree_wall0;
    out.t_calc = out.tree_seconds;
    t_calc_prev_ = out.tree_seconds;
    count_prev_ = local_.size();

    std::vector<Vec3> accel(local_.size());
    for (std::size_t i = 0; i < local_.size(); ++i)
      accel[i] = tree_res.accel[i] + pm_acc[i];

    // Kick-drift with the shared step; the closing half-kick of the previous
    // step is applied first, from the same force evaluation.
    if (pending_half_kick_ > 0.0)
      for (std::size_t i = 0; i < local_.size(); ++i)
        local_.velocities[i] += 0.5 * pending_half_kick_ * accel[i];
    const double dt = cfg_.dt.adaptive ? mr.dt_min : cfg_.dt.fixed_dt;
    out.dt = dt;
    for (std::size_t i = 0; i < local_.size(); ++i) {
      local_.velocities[i] += 0.5 * dt * accel[i];
      local_.positions[i] =
          local_.box.wrap(local_.positions[i] + dt * local_.velocities[i]);
    }
    pending_half_kick_ = dt;
    local_.time += dt;
    if (cfg_.dt.adaptive) {
      DtPolicy next = cfg_.dt;
      next.softening = cfg_.force.softening;
      dt_proposal_ = choose_dt(accel, next);
    }

    // Phase 4: migration against the updated boundaries.
    slabs_ = new_slabs;
    const MigrantSplit split = select_migrants(local_, slabs_, site_);
    const ParticleSet stay = local_.select(split.stay);
    const ParticleSet to_left_ps = local_.select(split.to_left);
    const ParticleSet to_right_ps = local_.select(split.to_right);
    const ParticleSet received =
        ring::migrate_particles(ep_, to_left_ps, to_right_ps, local_.box);
    local_ = stay;
    local_.append(received);
    slabs_[site_].count = local_.size();
    slabs_[site_].t_calc = out.tree_seconds;

    out.comm = ep_.stats;
    out.slabs = slabs_;
    return out;
  }

  const ParticleSet& local() const { return local_; }

 private:
  static double now() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }

  void check_slab_widths() const {
    const double need = 2.0 * range_ + margin_;
    for (const SiteSlab& slab : slabs_)
      if (slab.width() < need)
        throw ring::ProtocolError(
            "slab narrower than the short-range interaction horizon");
  }

  const ExperimentConfig& cfg_;
  int site_;
  int s_;
  ring::SiteEndpoint ep_;
  ParticleSet local_;
  std::vector<SiteSlab> slabs_;
  Mesh mesh_;
  double t_calc_prev_ = 1.0;
  uint64_t count_prev_ = 0;
  double dt_proposal_ = 0.0;
  double pending_half_kick_ = 0.0;
  double range_ = 0.0;
  double margin_ = 0.0;
};

ParticleSet slab_subset(const ParticleSet& all, const SiteSlab& slab) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (slab.contains(all.positions[i].x)) keep.push_back(i);
  return all.select(keep);
}

void sort_by_id(ParticleSet& ps) {
  std::vector<std::size_t> order(ps.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ps.ids[a] < ps.ids[b]; });
  ps = ps.select(order);
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.backend != net::Backend::simulated)
    throw std::invalid_argument("run_experiment: use run_site_experiment for tcp");
  const int s = config.site_count();

  ParticleSet all = ic::lattice(config.lattice_side, config.box_length,
                                config.jitter, config.seed);
  std::vector<SiteSlab> slabs = uniform_slabs(s, config.box_length);

  // Ring links: link i couples site i's right-hand side with site i+1's
  // left-hand side. Two sites still get two distinct links, one per
  // direction pair.
  std::vector<net::ChannelPtr> ends_a(s), ends_b(s);
  if (s > 1) {
    net::ChannelConfig link;
    link.backend = net::Backend::simulated;
    link.latency = config.spec.net.lambda_wan;
    link.bandwidth = model::effective_sigma_wan(config.spec.net, s);
    for (int i = 0; i < s; ++i) {
      auto [a, b] = net::make_sim_pair(link);
      ends_a[i] = std::move(a);  // site i, right
      ends_b[i] = std::move(b);  // site (i+1)%s, left
    }
  }

  std::vector<std::unique_ptr<SiteDriver>> drivers;
  for (int site = 0; site < s; ++site) {
    net::Channel* right = s > 1 ? ends_a[site].get() : nullptr;
    net::Channel* left = s > 1 ? ends_b[(site + s - 1) % s].get() : nullptr;
    drivers.push_back(std::make_unique<SiteDriver>(
        config, site, slab_subset(all, slabs[site]), slabs, left, right));
  }

  std::vector<std::vector<SiteStepStats>> stats(
      config.steps, std::vector<SiteStepStats>(s));
  std::vector<std::thread> threads;
  std::vector<std::string> errors(s);
  for (int site = 0; site < s; ++site) {
    threads.emplace_back([&, site] {
      int step = 0;
      try {
        for (; step < config.steps; ++step) {
          SiteStepStats st = drivers[site]->run_step(step);
          const bool last = step == config.steps - 1;
          const bool cadence = config.snapshot_cadence > 0 &&
                               (step + 1) % config.snapshot_cadence == 0;
          if (last || cadence) st.snapshot = drivers[site]->local();
          if (last) st.final_state = drivers[site]->local();
          stats[step][site] = std::move(st);
        }
      } catch (const std::exception& e) {
        errors[site] = "step " + std::to_string(step) + ": " + e.what();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (int site = 0; site < s; ++site)
    if (!errors[site].empty())
      throw std::runtime_error("site " + std::to_string(site) + ": " +
                               errors[site]);

  ExperimentResult result;
  for (int step = 0; step < config.steps; ++step) {
    result.records.push_back(merge_step(step, stats[step], config.spec, true));
    std::vector<SiteSlab> step_slabs;
    for (int site = 0; site < s; ++site)
      step_slabs.push_back(stats[step][site].slabs[site]);
    result.slab_history.push_back(std::move(step_slabs));
    if (config.snapshot_cadence > 0 &&
        (step + 1) % config.snapshot_cadence == 0 &&
        !config.snapshot_prefix.empty()) {
      ParticleSet merged;
      merged.box = {config.box_length, true};
      for (const auto& site : stats[step]) merged.append(site.snapshot);
      sort_by_id(merged);
      merged.time = stats[step][0].snapshot.time;
      write_snapshot(merged, config.snapshot_prefix + "_step" +
                                 std::to_string(step + 1) + ".snbk");
    }
  }
  result.final_state.box = {config.box_length, true};
  for (const auto& site : stats.back()) result.final_state.append(site.final_state);
  sort_by_id(result.final_state);
  result.final_state.time = stats.back()[0].final_state.time;
  result.final_slabs = stats.back()[0].slabs;
  return result;
}

ExperimentResult run_site_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.backend != net::Backend::tcp)
    return run_experiment(config);
  const int s = config.site_count();
  const int site = config.tcp_site;

  ParticleSet all = ic::lattice(config.lattice_side, config.box_length,
                                config.jitter, config.seed);
  std::vector<SiteSlab> slabs = uniform_slabs(s, config.box_length);

  net::ChannelPtr right, left;
  if (s > 1) {
    net::ChannelConfig cc;
    cc.backend = net::Backend::tcp;
    cc.streams = 1;
    cc.channel_id = static_cast<uint32_t>(site);
    // Site i listens for its right neighbour on base+i and dials its left
    // neighbour's listener. Dial and accept run concurrently: every site
    // blocks in both handshakes at once, so serializing them would deadlock
    // the ring.
    net::TcpListener listener(
        static_cast<uint16_t>(config.tcp_base_port + site));
    const int left_site = (site + s - 1) % s;
    std::exception_ptr dial_error;
    std::thread dialer([&] {
      try {
        left = net::open_channel(
            cc, config.tcp_hosts[left_site],
            static_cast<uint16_t>(config.tcp_base_port + left_site));
      } catch (...) {
        dial_error = std::current_exception();
      }
    });
    try {
      right = listener.accept_channel(cc);
    } catch (...) {
      dialer.join();
      throw;
    }
    dialer.join();
    if (dial_error) std::rethrow_exception(dial_error);
  }

  SiteDriver driver(config, site, slab_subset(all, slabs[site]), slabs,
                    left.get(), right.get());
  ExperimentResult result;
  std::vector<SiteStepStats> one(1);
  for (int step = 0; step < config.steps; ++step) {
    one[0] = driver.run_step(step);
    result.records.push_back(merge_step(step, one, config.spec, false));
    result.slab_history.push_back({one[0].slabs[site]});
  }
  result.final_state = driver.local();
  sort_by_id(result.final_state);
  result.final_slabs = one[0].slabs;
  return result;
}

ModelComparison compare_with_model(const std::vector<StepRecord>& records,
                                   const model::RunSpec& spec) {
  ModelComparison cmp;
  if (records.empty()) return cmp;
  const int s = spec.site_count();
  const double sigma_eff = model::effective_sigma_wan(spec.net, s);
  // Step 0 still carries the initial imbalance; average the rest.
  std::size_t from = records.size() > 1 ? 1 : 0;
  int n = 0;
  for (std::size_t i = from; i < records.size(); ++i, ++n) {
    const StepRecord& r = records[i];
    cmp.measured_w_l += r.wan_latency_seconds;
    cmp.measured_w_b += r.wan_bandwidth_seconds;
    cmp.measured_mesh_bytes += static_cast<double>(r.mesh_grid_bytes);
    cmp.measured_sample_bytes += static_cast<double>(r.sample_bytes);
    cmp.measured_let_bytes +=
        static_cast<double>(r.phase_bytes[static_cast<int>(ring::Phase::let)]);
    double bytes = 0;
    for (const auto& b : r.phase_bytes) bytes += static_cast<double>(b);
    cmp.model_w_b_from_bytes += bytes / sigma_eff;
  }
  if (n > 0) {
    cmp.measured_w_l /= n;
    cmp.measured_w_b /= n;
    cmp.measured_mesh_bytes /= n;
    cmp.measured_sample_bytes /= n;
    cmp.measured_let_bytes /= n;
    cmp.model_w_b_from_bytes /= n;
  }
  cmp.model_w_l =
      s > 1 ? spec.net.lambda_wan * ring::plan_step_exchanges(s) : 0.0;
  cmp.model_mesh_bytes = 4.0 * s * spec.n_mesh;
  cmp.model_sample_bytes = 4.0 * spec.n_particles * spec.r_samp;
  cmp.model_let_bytes =
      (48.0 / spec.theta + 24.0) * std::pow(spec.n_particles, 2.0 / 3.0);
  return cmp;
}

std::string ModelComparison::report() const {
  std::ostringstream os;
  os.precision(6);
  os << "term,measured,model\n";
  os << "w_l," << measured_w_l << ',' << model_w_l << '\n';
  os << "w_b," << measured_w_b << ',' << model_w_b_from_bytes << '\n';
  os << "mesh_bytes," << measured_mesh_bytes << ',' << model_mesh_bytes << '\n';
  os << "sample_bytes," << measured_sample_bytes << ',' << model_sample_bytes
     << '\n';
  os << "let_bytes," << measured_let_bytes << ',' << model_let_bytes << '\n';
  return os.str();
}

AveragedRecord average_window(const std::vector<StepRecord>& records,
                              int window) {
  if (window < 1 || static_cast<std::size_t>(window) > records.size())
    throw std::invalid_argument("average_window: bad window");
  AveragedRecord out;
  out.window = window;
  const std::size_t from = records.size() - static_cast<std::size_t>(window);

  auto fields = [](const StepRecord& r) {
    std::vector<double> v{r.comm_seconds, r.tree_seconds, r.pm_seconds,
                          r.total_seconds, static_cast<double>(r.interaction_count),
                          r.wan_latency_seconds, r.wan_bandwidth_seconds, r.dt};
    for (double p : r.phase_seconds) v.push_back(p);
    v.push_back(static_cast<double>(r.mesh_grid_bytes));
    v.push_back(static_cast<double>(r.sample_bytes));
    for (uint64_t b : r.phase_bytes) v.push_back(static_cast<double>(b));
    return v;
  };
  const std::size_t nf = fields(records[from]).size();
  std::vector<double> mean(nf, 0.0), sd(nf, 0.0);
  for (std::size_t i = from; i < records.size(); ++i) {
    const auto v = fields(records[i]);
    for (std::size_t f = 0; f < nf; ++f) mean[f] += v[f];
  }
  for (double& m : mean) m /= window;
  for (std::size_t i = from; i < records.size(); ++i) {
    const auto v = fields(records[i]);
    for (std::size_t f = 0; f < nf; ++f)
      sd[f] += (v[f] - mean[f]) * (v[f] - mean[f]);
  }
  for (double& d : sd) d = window > 1 ? std::sqrt(d / (window - 1)) : 0.0;

  auto unpack = [](StepRecord& r, const std::vector<double>& v) {
    r.comm_seconds = v[0];
    r.tree_seconds = v[1];
    r.pm_seconds = v[2];
    r.total_seconds = v[3];
    r.interaction_count = static_cast<uint64_t>(v[4]);
    r.wan_latency_seconds = v[5];
    r.wan_bandwidth_seconds = v[6];
    r.dt = v[7];
    int at = 8;
    for (int p = 0; p < ring::kPhaseCount; ++p) r.phase_seconds[p] = v[at++];
    r.mesh_grid_bytes = static_cast<uint64_t>(v[at++]);
    r.sample_bytes = static_cast<uint64_t>(v[at++]);
    for (int p = 0; p < ring::kPhaseCount; ++p)
      r.phase_bytes[p] = static_cast<uint64_t>(v[at++]);
  };
  unpack(out.mean, mean);
  unpack(out.stddev, sd);
  out.mean.step = records.back().step;
  return out;
}

std::string step_csv_header() {
  return "step,dt,comm_seconds,tree_seconds,pm_seconds,total_seconds,"
         "mesh_seconds,samples_seconds,let_seconds,migrate_seconds,"
         "mesh_bytes,sample_bytes,let_bytes,migrate_bytes,aux_bytes,"
         "wan_exchanges,wan_latency_seconds,wan_bandwidth_seconds,"
         "interactions,clock";
}

std::string step_csv_row(const StepRecord& r) {
  std::ostringstream os;
  os.precision(10);
  os << r.step << ',' << r.dt << ',' << r.comm_seconds << ',' << r.tree_seconds
     << ',' << r.pm_seconds << ',' << r.total_seconds;
  for (int p = 0; p < ring::kPhaseCount; ++p) os << ',' << r.phase_seconds[p];
  os << ',' << r.mesh_grid_bytes << ',' << r.sample_bytes << ','
     << r.phase_bytes[static_cast<int>(ring::Phase::let)] << ','
     << r.phase_bytes[static_cast<int>(ring::Phase::migrate)] << ','
     << r.aux_bytes << ',' << r.wan_exchanges << ',' << r.wan_latency_seconds
     << ',' << r.wan_bandwidth_seconds << ',' << r.interaction_count << ','
     << (r.virtual_clock ? "virtual" : "wall");
  return os.str();
}

}  // namespace tpm::harness
