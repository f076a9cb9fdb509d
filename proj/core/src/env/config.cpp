#include "mecsim/env/config.hpp"

#include <cmath>

#include "../internal/json_io.hpp"
#include "mecsim/errors.hpp"

namespace mecsim::env {

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double dbm_to_watts(double dbm) { return 1e-3 * std::pow(10.0, dbm / 10.0); }

void SimConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("sim.") + name + " must be positive");
  };
  positive(tau, "tau_s");
  if (slots < 1) throw ConfigError("sim.slots must be >= 1");
  if (n_min < 1 || n_max < n_min) throw ConfigError("sim.n_min/n_max: need 1 <= n_min <= n_max");
  positive(area_side, "area_side_m");
  if (alt_min < 0.0 || alt_max < alt_min) throw ConfigError("sim.altitude range invalid");
  positive(v_max, "v_max_mps");
  positive(f_max, "f_max_hz");
  positive(cycles_per_bit, "cycles_per_bit");
  positive(cap_coeff, "cap_coeff");
  if (!(out_ratio > 0.0 && out_ratio <= 1.0)) throw ConfigError("sim.out_ratio must be in (0, 1]");
  positive(bandwidth, "bandwidth_hz");
  positive(noise_w, "noise");
  positive(p_up, "p_up_w");
  positive(p_down, "p_down_w");
  positive(rho0, "rho0");
  positive(pathloss_exp, "pathloss_exp");
  if (!(chi_nlos > chi_los && chi_los > 1.0)) {
    throw ConfigError("sim: need chi_nlos > chi_los > 1 in linear scale");
  }
  positive(task_min, "task_min_bits");
  if (task_max < task_min) throw ConfigError("sim.task_max_bits < task_min_bits");
  if (mem_speed < 0.0 || mem_speed > 1.0 || mem_heading < 0.0 || mem_heading > 1.0) {
    throw ConfigError("sim memory factors must be in [0, 1]");
  }
  if (mean_speed_max < 0.0 || sigma_speed < 0.0 || sigma_heading < 0.0) {
    throw ConfigError("sim mobility spreads must be >= 0");
  }
}

namespace {

const std::vector<std::string> kSimKeys = {
    "tau_s",          "slots",         "n_min",          "n_max",
    "area_side_m",    "alt_min_m",     "alt_max_m",      "v_max_mps",
    "f_max_hz",       "cycles_per_bit", "cap_coeff",     "out_ratio",
    "bandwidth_hz",   "noise_dbm",     "p_up_w",         "p_down_w",
    "rho0_db",        "pathloss_exp",  "chi_los_db",     "chi_nlos_db",
    "k1",             "k2",            "task_min_bits",  "task_max_bits",
    "mem_speed",      "mem_heading",   "mean_speed_max_mps",
    "sigma_speed_mps", "sigma_heading_rad"};

}  // namespace

SimConfig sim_config_from_json(const internal::Json& j) {
  using internal::read_key;
  SimConfig c;
  internal::check_known_keys(j, kSimKeys, "sim");
  read_key(j, "tau_s", c.tau);
  read_key(j, "slots", c.slots);
  read_key(j, "n_min", c.n_min);
  read_key(j, "n_max", c.n_max);
  read_key(j, "area_side_m", c.area_side);
  read_key(j, "alt_min_m", c.alt_min);
  read_key(j, "alt_max_m", c.alt_max);
  read_key(j, "v_max_mps", c.v_max);
  read_key(j, "f_max_hz", c.f_max);
  read_key(j, "cycles_per_bit", c.cycles_per_bit);
  read_key(j, "cap_coeff", c.cap_coeff);
  read_key(j, "out_ratio", c.out_ratio);
  read_key(j, "bandwidth_hz", c.bandwidth);
  read_key(j, "p_up_w", c.p_up);
  read_key(j, "p_down_w", c.p_down);
  read_key(j, "pathloss_exp", c.pathloss_exp);
  read_key(j, "k1", c.k1);
  read_key(j, "k2", c.k2);
  read_key(j, "task_min_bits", c.task_min);
  read_key(j, "task_max_bits", c.task_max);
  read_key(j, "mem_speed", c.mem_speed);
  read_key(j, "mem_heading", c.mem_heading);
  read_key(j, "mean_speed_max_mps", c.mean_speed_max);
  read_key(j, "sigma_speed_mps", c.sigma_speed);
  read_key(j, "sigma_heading_rad", c.sigma_heading);

  // dB quantities convert exactly once, here.
  double noise_dbm = -130.0, rho0_db = -38.0, chi_los_db = 3.0, chi_nlos_db = 23.0;
  read_key(j, "noise_dbm", noise_dbm);
  read_key(j, "rho0_db", rho0_db);
  read_key(j, "chi_los_db", chi_los_db);
  read_key(j, "chi_nlos_db", chi_nlos_db);
  c.noise_w = dbm_to_watts(noise_dbm);
  c.rho0 = db_to_linear(rho0_db);
  c.chi_los = db_to_linear(chi_los_db);
  c.chi_nlos = db_to_linear(chi_nlos_db);

  c.validate();
  return c;
}

SimConfig sim_config_from_json_text(const std::string& text) {
  const auto j = internal::parse_json_text(text, "sim config");
  return sim_config_from_json(j.contains("sim") ? j.at("sim") : j);
}

SimConfig sim_config_from_file(const std::string& path) {
  const auto j = internal::load_json_file(path);
  return sim_config_from_json(j.contains("sim") ? j.at("sim") : j);
}

}  // namespace mecsim::env
