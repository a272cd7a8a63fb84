#include "treepm/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "treepm/presets.hpp"

namespace tpm::config {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

std::string Section::get(const std::string& key) const {
  auto it = kv.find(key);
  if (it == kv.end())
    throw std::runtime_error("config: missing key '" + key + "' in [" + name + "]");
  return it->second;
}

double Section::get_double(const std::string& key) const {
  return std::stod(get(key));
}

long long Section::get_int(const std::string& key) const {
  return std::stoll(get(key));
}

bool Section::get_bool(const std::string& key) const {
  std::string v = get(key);
  std::transform(v.begin(), v.end(), v.begin(), ::tolower);
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw std::runtime_error("config: bad boolean '" + v + "' for " + key);
}

File File::parse_string(const std::string& text) {
  File file;
  std::istringstream is(text);
  std::string line;
  Section* current = nullptr;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error("config: malformed section header at line " +
                                 std::to_string(line_no));
      file.sections.push_back({trim(line.substr(1, line.size() - 2)), {}});
      current = &file.sections.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || !current)
      throw std::runtime_error("config: expected 'key = value' at line " +
                               std::to_string(line_no));
    current->kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return file;
}

File File::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_string(buf.str());
}

const Section* File::find(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

std::vector<const Section*> File::find_all(const std::string& name) const {
  std::vector<const Section*> out;
  for (const auto& s : sections)
    if (s.name == name) out.push_back(&s);
  return out;
}

void File::override(const std::string& dotted_key, const std::string& value) {
  const auto dot = dotted_key.find('.');
  if (dot == std::string::npos)
    throw std::runtime_error("config override: expected section.key=value");
  const std::string section = dotted_key.substr(0, dot);
  const std::string key = dotted_key.substr(dot + 1);
  for (auto& s : sections)
    if (s.name == section) {
      s.kv[key] = value;
      return;
    }
  sections.push_back({section, {{key, value}}});
}

namespace {

model::MachineConstants site_from_section(const Section& s) {
  model::MachineConstants m;
  if (s.has("preset")) {
    const std::string p = s.get("preset");
    if (p == "grid") {
      m = presets::global_grid_site();
    } else if (p.size() == 1) {
      m = presets::gbbp_site(p[0]);
    } else {
      bool found = false;
      for (const auto& das : presets::das3_sites())
        if (das.name == p) {
          m = das;
          found = true;
        }
      if (!found) throw std::runtime_error("config: unknown site preset " + p);
    }
  }
  if (s.has("tau_tree")) m.tau_tree = s.get_double("tau_tree");
  if (s.has("tau_fft")) m.tau_fft = s.get_double("tau_fft");
  if (s.has("tau_mesh")) m.tau_mesh = s.get_double("tau_mesh");
  if (s.has("name")) m.name = s.get("name");
  return m;
}

std::vector<model::MachineConstants> roster_from_string(const std::string& r) {
  const auto colon = r.find(':');
  if (colon == std::string::npos)
    throw std::runtime_error("config: roster must be kind:arg, got " + r);
  const std::string kind = r.substr(0, colon);
  const std::string arg = r.substr(colon + 1);
  if (kind == "das3") {
    const int s = std::stoi(arg);
    auto sites = presets::das3_sites();
    if (s < 1 || s > static_cast<int>(sites.size()))
      throw std::runtime_error("config: das3 roster supports 1..5 sites");
    sites.resize(s);
    return sites;
  }
  if (kind == "gbbp") return presets::gbbp_roster(arg);
  if (kind == "grid")
    return std::vector<model::MachineConstants>(std::stoi(arg),
                                                presets::global_grid_site());
  throw std::runtime_error("config: unknown roster kind " + kind);
}

}  // namespace

model::RunSpec load_runspec(const File& file) {
  model::RunSpec spec;

  if (const Section* net = file.find("network")) {
    if (net->has("preset")) {
      const std::string p = net->get("preset");
      if (p == "das3")
        spec.net = presets::das3_network();
      else if (p == "gbbp")
        spec.net = presets::gbbp_network();
      else if (p == "globalgrid")
        spec.net = presets::global_grid_network();
      else
        throw std::runtime_error("config: unknown network preset " + p);
    }
    if (net->has("lambda_lan")) spec.net.lambda_lan = net->get_double("lambda_lan");
    if (net->has("lambda_wan")) spec.net.lambda_wan = net->get_double("lambda_wan");
    if (net->has("sigma_lan")) spec.net.sigma_lan = net->get_double("sigma_lan");
    if (net->has("sigma_wan")) spec.net.sigma_wan = net->get_double("sigma_wan");
    if (net->has("star_topology"))
      spec.net.star_topology = net->get_bool("star_topology");
  }

  for (const Section* s : file.find_all("site"))
    spec.sites.push_back(site_from_section(*s));

  const Section* run = file.find("run");
  if (!run) throw std::runtime_error("config: missing [run] section");
  if (run->has("roster")) {
    auto roster = roster_from_string(run->get("roster"));
    spec.sites = std::move(roster);
  }
  spec.n_particles = run->get_double("n");
  spec.n_mesh = run->get_double("m");
  spec.theta = run->get_double("theta");
  spec.p_total = static_cast<int>(run->get_int("p"));
  if (run->has("r_samp_inverse"))
    spec.r_samp = 1.0 / run->get_double("r_samp_inverse");
  else if (run->has("r_samp"))
    spec.r_samp = run->get_double("r_samp");
  else
    spec.r_samp = presets::reference_r_samp(spec.n_particles);
  if (run->has("migration_bytes"))
    spec.migration_bytes = run->get_double("migration_bytes");
  return spec;
}

harness::ExperimentConfig load_experiment(const File& file) {
  harness::ExperimentConfig cfg;
  cfg.spec = load_runspec(file);
  const Section* ex = file.find("experiment");
  if (!ex) return cfg;

  if (ex->has("steps")) cfg.steps = static_cast<int>(ex->get_int("steps"));
  if (ex->has("lattice_side"))
    cfg.lattice_side = static_cast<int>(ex->get_int("lattice_side"));
  if (ex->has("mesh_side"))
    cfg.mesh_side = static_cast<int>(ex->get_int("mesh_side"));
  if (ex->has("box_length")) cfg.box_length = ex->get_double("box_length");
  if (ex->has("jitter")) cfg.jitter = ex->get_double("jitter");
  if (ex->has("seed")) cfg.seed = static_cast<uint64_t>(ex->get_int("seed"));
  if (ex->has("softening")) cfg.force.softening = ex->get_double("softening");
  if (ex->has("ncrit")) cfg.force.ncrit = static_cast<int>(ex->get_int("ncrit"));
  if (ex->has("cutoff_cells")) cfg.force.cutoff_cells = ex->get_double("cutoff_cells");
  if (ex->has("n_leaf")) cfg.n_leaf = static_cast<int>(ex->get_int("n_leaf"));
  cfg.force.theta = cfg.spec.theta;
  if (ex->has("theta_switch_step") && ex->has("theta_switch_value"))
    cfg.force.theta_schedule.push_back(
        {static_cast<int>(ex->get_int("theta_switch_step")),
         ex->get_double("theta_switch_value")});
  if (ex->has("adaptive")) cfg.dt.adaptive = ex->get_bool("adaptive");
  if (ex->has("dt")) cfg.dt.fixed_dt = ex->get_double("dt");
  if (ex->has("eta")) cfg.dt.eta = ex->get_double("eta");
  if (ex->has("dt_max")) cfg.dt.dt_max = ex->get_double("dt_max");
  cfg.dt.softening = cfg.force.softening;
  if (ex->has("move_limit")) cfg.move_limit = ex->get_double("move_limit");
  if (ex->has("snapshot_cadence"))
    cfg.snapshot_cadence = static_cast<int>(ex->get_int("snapshot_cadence"));
  if (ex->has("snapshot_prefix")) cfg.snapshot_prefix = ex->get("snapshot_prefix");
  if (ex->has("backend")) {
    const std::string b = ex->get("backend");
    if (b == "simulated")
      cfg.backend = net::Backend::simulated;
    else if (b == "tcp")
      cfg.backend = net::Backend::tcp;
    else
      throw std::runtime_error("config: unknown backend " + b);
  }
  if (ex->has("tcp_site")) cfg.tcp_site = static_cast<int>(ex->get_int("tcp_site"));
  if (ex->has("tcp_base_port"))
    cfg.tcp_base_port = static_cast<uint16_t>(ex->get_int("tcp_base_port"));
  if (ex->has("tcp_hosts")) {
    std::istringstream hs(ex->get("tcp_hosts"));
    std::string host;
    while (std::getline(hs, host, ',')) cfg.tcp_hosts.push_back(host);
  }
  return cfg;
}

}  // namespace tpm::config
