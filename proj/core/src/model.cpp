#include "treepm/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tpm::model {

namespace {

double mean_tau_tree(const RunSpec& spec) {
  double sum = 0.0;
  for (const auto& m : spec.sites) sum += m.tau_tree;
  return sum / static_cast<double>(spec.sites.size());
}

RunSpec single_site_variant(const RunSpec& spec, int p) {
  RunSpec one = spec;
  one.sites = {spec.sites.front()};
  one.p_total = p;
  return one;
}

RunSpec multi_site_variant(const RunSpec& spec, int s, int p) {
  RunSpec multi = spec;
  multi.sites.assign(static_cast<size_t>(s), spec.sites.front());
  multi.p_total = p;
  return multi;
}

}  // namespace

void RunSpec::validate() const {
  if (sites.empty()) throw std::invalid_argument("RunSpec: empty site roster");
  if (n_particles < 1.0 || n_mesh < 1.0)
    throw std::invalid_argument("RunSpec: N and M must be >= 1");
  if (theta < 0.0) throw std::invalid_argument("RunSpec: negative theta");
  if (p_total < 1) throw std::invalid_argument("RunSpec: p_total must be >= 1");
  if (p_total % site_count() != 0)
    throw std::invalid_argument("RunSpec: p_total not divisible by site count");
  if (!(r_samp > 0.0) || r_samp > 1.0)
    throw std::invalid_argument("RunSpec: r_samp must be in (0, 1]");
  if (migration_bytes < 0.0)
    throw std::invalid_argument("RunSpec: negative migration_bytes");
  for (const auto& m : sites)
    if (!(m.tau_tree > 0.0) || !(m.tau_fft > 0.0) || !(m.tau_mesh > 0.0))
      throw std::invalid_argument("MachineConstants: tau values must be positive");
  if (!(net.lambda_lan > 0.0) || !(net.lambda_wan > 0.0) ||
      !(net.sigma_lan > 0.0) || !(net.sigma_wan > 0.0))
    throw std::invalid_argument("NetworkConstants: values must be positive");
}

bool theta_in_fit_range(double theta) { return theta >= 0.2 && theta <= 0.75; }

double n_interactions(double n_particles, double n_mesh, double theta) {
  if (n_particles < 1.0 || n_mesh < 1.0 || !(theta > 0.0))
    throw std::invalid_argument("n_interactions: need N, M >= 1 and theta > 0");
  return 460.0 * std::pow(n_particles, 1.0667) / std::pow(theta, 1.35) *
         std::pow(n_particles, 1.0 / 12.0) /
         (std::pow(n_mesh, 1.0 / 12.0) * std::sqrt(2.0));
}

double tree_time(const RunSpec& spec) {
  spec.validate();
  const double n_int = n_interactions(spec.n_particles, spec.n_mesh, spec.theta);
  return 1.2 * mean_tau_tree(spec) * n_int / static_cast<double>(spec.p_total);
}

double pm_time(const RunSpec& spec) {
  spec.validate();
  const MachineConstants& pm_site = spec.sites.front();
  return pm_site.tau_fft * spec.n_mesh * std::log2(spec.n_mesh) +
         pm_site.tau_mesh * spec.n_particles / static_cast<double>(spec.p_total);
}

LocalCommTime local_comm_time(const RunSpec& spec) {
  spec.validate();
  const int s = spec.site_count();
  const double q = static_cast<double>(spec.p_total) / (s == 1 ? 1.0 : s);
  LocalCommTime out;
  out.t_l = spec.net.lambda_lan * (18.0 * std::log2(q) + 2.0 * q);
  const double let_bytes = (144.0 / spec.theta + 72.0) *
                           std::pow(spec.n_particles, 2.0 / 3.0) *
                           std::pow(static_cast<double>(spec.p_total), -2.0 / 3.0);
  out.t_b = (4.0 * spec.n_mesh + let_bytes +
             12.0 * spec.n_particles * spec.r_samp) /
            spec.net.sigma_lan;
  return out;
}

double effective_sigma_wan(const NetworkConstants& net, int site_count) {
  if (net.star_topology && site_count >= 2)
    return net.sigma_wan / static_cast<double>(site_count - 1);
  return net.sigma_wan;
}

WanCommTime wan_comm_time(const RunSpec& spec) {
  spec.validate();
  const int s = spec.site_count();
  if (s == 1) return {};
  WanCommTime out;
  out.w_l = spec.net.lambda_wan * (5.0 * s + 3.0);
  const double let_bytes =
      (48.0 / spec.theta + 24.0) * std::pow(spec.n_particles, 2.0 / 3.0);
  out.w_b = (4.0 * s * spec.n_mesh + let_bytes +
             4.0 * spec.n_particles * spec.r_samp + spec.migration_bytes) /
            effective_sigma_wan(spec.net, s);
  return out;
}

PredictionBreakdown predict_step(const RunSpec& spec) {
  spec.validate();
  PredictionBreakdown out;
  out.n_int = n_interactions(spec.n_particles, spec.n_mesh, spec.theta);
  out.t_tree = tree_time(spec);
  out.t_pm = pm_time(spec);
  const LocalCommTime local = local_comm_time(spec);
  out.t_l = local.t_l;
  out.t_b = local.t_b;
  const WanCommTime wan = wan_comm_time(spec);
  out.w_l = wan.w_l;
  out.w_b = wan.w_b;
  out.t_exec = out.t_tree + out.t_pm + out.t_l + out.t_b + out.w_l + out.w_b;
  out.theta_warning = !theta_in_fit_range(spec.theta);
  return out;
}

double speedup(const RunSpec& per_site, int s) {
  if (per_site.site_count() != 1)
    throw std::invalid_argument("speedup: per-site spec must have one site");
  if (s < 1) throw std::invalid_argument("speedup: s must be >= 1");
  const double base = predict_step(per_site).t_exec;
  const double scaled =
      predict_step(multi_site_variant(per_site, s, per_site.p_total * s)).t_exec;
  return base / scaled;
}

double efficiency(const RunSpec& total, int s) {
  if (total.site_count() != 1)
    throw std::invalid_argument("efficiency: spec must have one site");
  if (s < 1) throw std::invalid_argument("efficiency: s must be >= 1");
  if (total.p_total % s != 0)
    throw std::invalid_argument("efficiency: p_total not divisible by s");
  const double base = predict_step(total).t_exec;
  const double multi =
      predict_step(multi_site_variant(total, s, total.p_total)).t_exec;
  return base / multi;
}

std::vector<SweepPoint> bandwidth_sweep(const RunSpec& total, int s,
                                        const std::vector<double>& sigma_list) {
  if (sigma_list.empty())
    throw std::invalid_argument("bandwidth_sweep: empty sigma list");
  std::vector<SweepPoint> out;
  out.reserve(sigma_list.size());
  for (double sigma : sigma_list) {
    if (!(sigma > 0.0))
      throw std::invalid_argument("bandwidth_sweep: sigma must be positive");
    RunSpec spec = total;
    spec.net.sigma_wan = sigma;
    out.push_back({sigma, efficiency(spec, s)});
  }
  return out;
}

double block_size(double n_particles) {
  return 0.2 * std::pow(n_particles, 0.81);
}

StellarWanModel stellar_wan_model(const StellarModelSpec& spec, int s,
                                  const NetworkConstants& net, double theta,
                                  double r_samp) {
  if (spec.base_step_time < 0.0)
    throw std::invalid_argument("stellar model: negative base_step_time");
  StellarWanModel out;
  out.w_l_tree = net.lambda_wan * (4.0 * (s - 1) + 4.0);
  // LET volume is double the TreePM estimate: there is no mesh to absorb the
  // long-range force, so the exported tree covers the full interaction range.
  out.w_b_tree = ((96.0 / theta + 48.0) * std::pow(spec.n_particles, 2.0 / 3.0) +
                  4.0 * spec.n_particles * r_samp) /
                 net.sigma_wan;
  if (spec.kind == StellarKind::tree_shared) {
    out.steps_per_shared = 1.0;
  } else {
    const double n_b = spec.block_size_override > 0.0 ? spec.block_size_override
                                                      : block_size(spec.n_particles);
    out.steps_per_shared = spec.n_particles / n_b;
  }
  out.wan_per_shared = out.steps_per_shared * (out.w_l_tree + out.w_b_tree);
  return out;
}

MemoryEstimate memory_estimate(double n_particles, double n_mesh) {
  if (n_particles < 0.0 || n_mesh < 0.0)
    throw std::invalid_argument("memory_estimate: negative counts");
  MemoryEstimate out;
  out.tree_bytes = n_particles * (60.0 + 0.75 * 52.0);
  out.mesh_bytes = 4.5 * n_mesh;
  return out;
}

std::string prediction_csv_header() {
  return "N,M,p,s,theta,t_tree,t_pm,t_l,t_b,w_l,w_b,t_exec,S,E";
}

std::string prediction_csv_row(const RunSpec& spec) {
  const PredictionBreakdown b = predict_step(spec);
  const int s = spec.site_count();
  double sp = 1.0;
  double eff = 1.0;
  if (s > 1) {
    // S relative to one site running p/s processes, E relative to one site
    // running the full p.
    const RunSpec per_site = single_site_variant(spec, spec.p_total / s);
    sp = predict_step(per_site).t_exec / b.t_exec;
    const RunSpec one_total = single_site_variant(spec, spec.p_total);
    eff = predict_step(one_total).t_exec / b.t_exec;
  }
  std::ostringstream os;
  os.precision(10);
  os << spec.n_particles << ',' << spec.n_mesh << ',' << spec.p_total << ','
     << s << ',' << spec.theta << ',' << b.t_tree << ',' << b.t_pm << ','
     << b.t_l << ',' << b.t_b << ',' << b.w_l << ',' << b.w_b << ','
     << b.t_exec << ',' << sp << ',' << eff;
  return os.str();
}

}  // namespace tpm::model
