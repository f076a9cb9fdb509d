#pragma once

#include <string>

namespace mecsim::env {

/// Simulation parameters. dB/dBm quantities from the config file are
/// converted once at load time; this struct holds linear units only
/// (seconds, meters, bits, Hz, watts, cycles).
struct SimConfig {
  // Slot structure.
  double tau = 0.2;  // slot length [s]
  int slots = 10;    // slots per episode (T)

  // Device population.
  int n_min = 5;
  int n_max = 10;

  // Geometry [m], speeds [m/s].
  double area_side = 100.0;
  double alt_min = 0.0;
  double alt_max = 60.0;
  double v_max = 50.0;

  // Server computing.
  double f_max = 40e9;           // total CPU budget [cycles/s]
  double cycles_per_bit = 1550;  // C
  double cap_coeff = 1e-28;      // effective capacitance constant
  double out_ratio = 0.2;        // output/input task size ratio

  // Radio (linear).
  double bandwidth = 10e6;  // B [Hz]
  double noise_w = 1e-16;   // N0, from -130 dBm
  double p_up = 1.0;        // device transmit power [W]
  double p_down = 10.0;     // server transmit power [W]
  double rho0 = 1.5848931924611134e-4;  // reference path loss, from -38 dB
  double pathloss_exp = 2.0;
  double chi_los = 1.9952623149688795;    // from 3 dB
  double chi_nlos = 199.52623149688787;   // from 23 dB
  double k1 = 11.95;  // LoS model constant [deg]
  double k2 = 0.14;   // LoS model constant [1/deg]

  // Task sizes [bits], drawn uniformly per episode.
  double task_min = 2e9;
  double task_max = 20e9;

  // Device mobility (Gauss-Markov). Means are drawn per device at reset:
  // speed in [0, mean_speed_max], heading in [0, 2*pi).
  double mem_speed = 0.8;       // memory factor for speed
  double mem_heading = 0.8;     // memory factor for heading
  double mean_speed_max = 2.0;  // [m/s]
  double sigma_speed = 0.3;     // [m/s]
  double sigma_heading = 0.3;   // [rad]

  void validate() const;
};

double db_to_linear(double db);
double dbm_to_watts(double dbm);

/// Reads the "sim" section of a JSON config file. Missing keys keep the
/// defaults above; unknown keys are an error. See configs/ for the shipped
/// profiles and README for the key/unit table.
SimConfig sim_config_from_json_text(const std::string& text);
SimConfig sim_config_from_file(const std::string& path);

}  // namespace mecsim::env
