#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace otafeel {

/// All scalar parameters of the simulated network. Key names in config files
/// match the field names exactly.
struct SystemConfig {
    int N = 8;                    ///< PS antenna count
    int K = 20;                   ///< device count
    int L = 64;                   ///< sensing block length (symbols)
    int M = 256;                  ///< model symbols per uplink block
    double P_d = 1.0;             ///< downlink power budget (W)
    double P_u = 1e-3;            ///< uplink per-device power cap (W)
    double sigma2_ps = 9.8e-11;   ///< PS noise power (W), N0*B default
    double sigma2_k = 9.8e-11;    ///< device noise power (W)
    double gamma = 0.0;           ///< minimum downlink SNR-scaling floor
    double Gamma0 = 1e-9;         ///< CRB threshold
    double eps0 = 500.0;          ///< aggregation-error threshold
    double delta = 0.1;           ///< subset-cutting weight in [0,1]
    double tau0 = 0.5;            ///< regularization weight in [0,1]
    double carrier_hz = 5e9;
    double bandwidth_hz = 1e7;
    double D_in = 200.0;          ///< device ring inner radius (m)
    double D_out = 500.0;         ///< device ring outer radius (m)
    double eps_c = 2.5;           ///< device path-loss exponent
    double eps_t = 4.5;           ///< target path-loss exponent
    double sigma_rcs = 0.1;       ///< radar cross-section
    double d_target = 50.0;       ///< target distance (m)
    double theta_target = 0.6;    ///< target AoA (rad)
    double antenna_spacing = 0.5; ///< antenna spacing in wavelengths
    std::uint64_t seed = 1;

    bool alpha_random_phase = false;   ///< random phase on the target gain
    bool snr_min_over_devices = false; ///< C5 as min over k instead of average

    /// Throws std::invalid_argument listing every violated invariant.
    void validate() const;

    double wavelength() const;
};

/// Training-loop parameters for the desk-scale learning task.
struct TrainConfig {
    int rounds = 50;
    int local_steps = 1;     ///< SGD steps per round (theta)
    double lr = 0.1;         ///< learning rate (zeta)
    int batch = 0;           ///< 0 = full batch
    double reg = 0.01;       ///< L2 regularization weight (mu)
    double alpha_dir = 1.0;  ///< Dirichlet concentration for the partition
    int n_samples = 2000;
    int feature_dim = 20;
    double class_sep = 2.0;  ///< Gaussian-mixture mean separation
    bool sensing_enabled = true;  ///< estimate and cancel the echo
    bool echo_enabled = true;     ///< target echo present on uplink (beta_s)

    void validate() const;
};

/// Parses a flat key=value file ('#' comments, optional [section] headers,
/// ignored). Throws std::invalid_argument on malformed lines.
std::map<std::string, std::string> parse_config_file(const std::string& path);

/// Applies key=value pairs onto the configs. Unknown keys collected and
/// reported in a single std::invalid_argument.
void apply_config(SystemConfig& sys, TrainConfig& train,
                  const std::map<std::string, std::string>& kv);

/// Parses one "key=value" override string (CLI --set).
std::pair<std::string, std::string> parse_override(const std::string& s);

}  // namespace otafeel
