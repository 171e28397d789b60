#include "bcm/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bcm/io.hpp"

namespace bcm {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

[[noreturn]] void bad(const std::string& what) {
  throw std::invalid_argument("config: " + what);
}

double as_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') bad("bad number for '" + key + "'");
  return x;
}

int as_int(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') bad("bad integer for '" + key + "'");
  return static_cast<int>(x);
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad("bad boolean for '" + key + "'");
}

ScenarioSpec::Kind kind_from_name(const std::string& v) {
  using K = ScenarioSpec::Kind;
  if (v == "homogeneous") return K::homogeneous;
  if (v == "test1") return K::test1;
  if (v == "test2") return K::test2;
  if (v == "test3") return K::test3;
  if (v == "test4") return K::test4;
  if (v == "test5") return K::test5;
  if (v == "custom") return K::custom;
  bad("unknown scenario kind '" + v + "'");
}

const char* kind_name(ScenarioSpec::Kind k) {
  using K = ScenarioSpec::Kind;
  switch (k) {
    case K::homogeneous: return "homogeneous";
    case K::test1: return "test1";
    case K::test2: return "test2";
    case K::test3: return "test3";
    case K::test4: return "test4";
    case K::test5: return "test5";
    case K::custom: return "custom";
  }
  return "?";
}

struct Entry {
  std::string section, key, value;
};

std::vector<Entry> tokenize(const std::string& text) {
  std::vector<Entry> out;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') bad("unterminated section at line " +
                                  std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      bad("expected key = value at line " + std::to_string(lineno));
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    if (e.section.empty()) bad("key outside any section: '" + e.key + "'");
    if (e.key.empty()) bad("empty key at line " + std::to_string(lineno));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  const std::vector<Entry> entries = tokenize(text);

  // The scenario kind decides the default parameter set, so resolve it
  // before any other scenario key.
  RunConfig cfg;
  for (const Entry& e : entries)
    if (e.section == "scenario" && e.key == "kind")
      cfg.scenario = scenario_defaults(kind_from_name(e.value));

  for (const Entry& e : entries) {
    const std::string& s = e.section;
    const std::string& k = e.key;
    const std::string& v = e.value;
    if (s == "scenario") {
      if (k == "kind") continue;  // handled above
      else if (k == "T") cfg.scenario.T = as_double(k, v);
      else if (k == "L") cfg.scenario.L = as_double(k, v);
      else if (k == "c_star") cfg.scenario.c_star = as_double(k, v);
      else if (k == "a") cfg.scenario.a = as_double(k, v);
      else if (k == "xbar1") cfg.scenario.xbar1 = as_double(k, v);
      else if (k == "xbar2") cfg.scenario.xbar2 = as_double(k, v);
      else if (k == "delta1") cfg.scenario.delta1 = as_double(k, v);
      else if (k == "delta2") cfg.scenario.delta2 = as_double(k, v);
      else if (k == "phi") cfg.scenario.phi = as_double(k, v);
      else if (k == "rot_y0") cfg.scenario.rot_y0 = as_double(k, v);
      else if (k == "c0") cfg.scenario.c0 = as_double(k, v);
      else if (k == "wedge_apex_x") cfg.scenario.wedge_apex_x = as_double(k, v);
      else if (k == "wedge_apex_y") cfg.scenario.wedge_apex_y = as_double(k, v);
      else if (k == "wedge_base_y") cfg.scenario.wedge_base_y = as_double(k, v);
      else if (k == "wedge_half_width")
        cfg.scenario.wedge_half_width = as_double(k, v);
      else if (k == "wedge_rho") cfg.scenario.wedge_rho = as_double(k, v);
      else if (k == "wedge_smooth") cfg.scenario.wedge_smooth = as_double(k, v);
      else if (k == "speed_csv") cfg.scenario.custom_c_csv = v;
      else bad("unknown key '" + k + "' in [scenario]");
    } else if (s == "solver") {
      if (k == "h") cfg.disc.h = as_double(k, v);
      else if (k == "margin") cfg.disc.margin = as_double(k, v);
      else if (k == "cfl") cfg.cfl = as_double(k, v);
      else if (k == "check_regular") cfg.check_regular = as_bool(k, v);
      else if (k == "ray_det_floor") cfg.ray.det_floor = as_double(k, v);
      else if (k == "ray_steps") cfg.ray.n_xi = as_int(k, v);
      else bad("unknown key '" + k + "' in [solver]");
    } else if (s == "basis") {
      if (k == "family") {
        if (v == "trig-cutoff") cfg.basis.family = SpatialFamily::trig_cutoff;
        else if (v == "tent") cfg.basis.family = SpatialFamily::tent;
        else bad("unknown basis family '" + v + "'");
      }
      else if (k == "n_gamma") cfg.basis.n_gamma = as_int(k, v);
      else if (k == "n_t") cfg.basis.n_t = as_int(k, v);
      else if (k == "s") cfg.basis.s = as_double(k, v);
      else if (k == "d_divisor") cfg.basis.d_divisor = as_double(k, v);
      else if (k == "eps_offset") cfg.basis.eps_offset = as_double(k, v);
      else bad("unknown key '" + k + "' in [basis]");
    } else if (s == "inversion") {
      if (k == "alpha") cfg.inversion.tikhonov.alpha = as_double(k, v);
      else if (k == "residual_target")
        cfg.inversion.tikhonov.residual_target = as_double(k, v);
      else if (k == "sigma_gamma")
        cfg.inversion.imaging.sigma_gamma = as_double(k, v);
      else if (k == "sigma_gamma_end")
        cfg.inversion.imaging.sigma_gamma_end = as_double(k, v);
      else if (k == "sigma_t") cfg.inversion.imaging.sigma_t = as_double(k, v);
      else if (k == "ramp_fraction")
        cfg.inversion.imaging.ramp_fraction = as_double(k, v);
      else if (k == "floor_rel") cfg.inversion.map.floor_rel = as_double(k, v);
      else if (k == "max_invalid_fraction")
        cfg.inversion.map.max_invalid_fraction = as_double(k, v);
      else if (k == "splat_radius_cells")
        cfg.inversion.speed.splat_radius_cells = as_double(k, v);
      else if (k == "jump_guard_rows")
        cfg.inversion.speed.jump_guard_rows = as_int(k, v);
      else if (k == "psd_tol") cfg.inversion.psd_tol = as_double(k, v);
      else bad("unknown key '" + k + "' in [inversion]");
    } else if (s == "pipeline") {
      if (k == "mode") {
        if (v != "inverse-data" && v != "pseudo-reconstruction")
          bad("unknown mode '" + v + "'");
        cfg.mode = v;
      } else if (k == "snapshots") {
        cfg.with_snapshots = as_bool(k, v);
      } else {
        bad("unknown key '" + k + "' in [pipeline]");
      }
    } else {
      bad("unknown section [" + s + "]");
    }
  }

  cfg.inversion.pseudo = cfg.mode == "pseudo-reconstruction";
  if (cfg.inversion.pseudo && !cfg.with_snapshots)
    bad("pseudo-reconstruction needs '[pipeline] snapshots = true'");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  return parse_config(read_text_file(path));
}

std::string resolved_config_text(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[scenario]\n"
     << "kind = " << kind_name(cfg.scenario.kind) << "\n"
     << "T = " << fmt_double(cfg.scenario.T) << "\n"
     << "L = " << fmt_double(cfg.scenario.L) << "\n"
     << "c_star = " << fmt_double(cfg.scenario.c_star) << "\n"
     << "a = " << fmt_double(cfg.scenario.a) << "\n"
     << "xbar1 = " << fmt_double(cfg.scenario.xbar1) << "\n"
     << "xbar2 = " << fmt_double(cfg.scenario.xbar2) << "\n"
     << "delta1 = " << fmt_double(cfg.scenario.delta1) << "\n"
     << "delta2 = " << fmt_double(cfg.scenario.delta2) << "\n"
     << "phi = " << fmt_double(cfg.scenario.phi) << "\n"
     << "rot_y0 = " << fmt_double(cfg.scenario.rot_y0) << "\n"
     << "c0 = " << fmt_double(cfg.scenario.c0) << "\n"
     << "wedge_apex_x = " << fmt_double(cfg.scenario.wedge_apex_x) << "\n"
     << "wedge_apex_y = " << fmt_double(cfg.scenario.wedge_apex_y) << "\n"
     << "wedge_base_y = " << fmt_double(cfg.scenario.wedge_base_y) << "\n"
     << "wedge_half_width = " << fmt_double(cfg.scenario.wedge_half_width) << "\n"
     << "wedge_rho = " << fmt_double(cfg.scenario.wedge_rho) << "\n"
     << "wedge_smooth = " << fmt_double(cfg.scenario.wedge_smooth) << "\n";
  if (!cfg.scenario.custom_c_csv.empty())
    os << "speed_csv = " << cfg.scenario.custom_c_csv << "\n";
  os << "\n[solver]\n"
     << "h = " << fmt_double(cfg.disc.h) << "\n"
     << "margin = " << fmt_double(cfg.disc.margin) << "\n"
     << "cfl = " << fmt_double(cfg.cfl) << "\n"
     << "check_regular = " << (cfg.check_regular ? "true" : "false") << "\n"
     << "ray_det_floor = " << fmt_double(cfg.ray.det_floor) << "\n"
     << "ray_steps = " << cfg.ray.n_xi << "\n";
  os << "\n[basis]\n"
     << "family = "
     << (cfg.basis.family == SpatialFamily::trig_cutoff ? "trig-cutoff" : "tent")
     << "\n"
     << "n_gamma = " << cfg.basis.n_gamma << "\n"
     << "n_t = " << cfg.basis.n_t << "\n"
     << "s = " << fmt_double(cfg.basis.s) << "\n"
     << "d_divisor = " << fmt_double(cfg.basis.d_divisor) << "\n"
     << "eps_offset = " << fmt_double(cfg.basis.eps_offset) << "\n";
  os << "\n[inversion]\n"
     << "alpha = " << fmt_double(cfg.inversion.tikhonov.alpha) << "\n"
     << "residual_target = " << fmt_double(cfg.inversion.tikhonov.residual_target)
     << "\n"
     << "sigma_gamma = " << fmt_double(cfg.inversion.imaging.sigma_gamma) << "\n"
     << "sigma_gamma_end = " << fmt_double(cfg.inversion.imaging.sigma_gamma_end)
     << "\n"
     << "sigma_t = " << fmt_double(cfg.inversion.imaging.sigma_t) << "\n"
     << "ramp_fraction = " << fmt_double(cfg.inversion.imaging.ramp_fraction)
     << "\n"
     << "floor_rel = " << fmt_double(cfg.inversion.map.floor_rel) << "\n"
     << "max_invalid_fraction = "
     << fmt_double(cfg.inversion.map.max_invalid_fraction) << "\n"
     << "splat_radius_cells = "
     << fmt_double(cfg.inversion.speed.splat_radius_cells) << "\n"
     << "psd_tol = " << fmt_double(cfg.inversion.psd_tol) << "\n";
  os << "\n[pipeline]\n"
     << "mode = " << cfg.mode << "\n"
     << "snapshots = " << (cfg.with_snapshots ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace bcm
