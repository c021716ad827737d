#pragma once

// Geometry, path loss, Rayleigh fading, and the ground-truth sensing channel
// for one Monte-Carlo trial.

#include "otafeel/config.hpp"
#include "otafeel/numerics.hpp"

namespace otafeel::chan {

using num::Matrix;
using num::RealVector;
using num::Vector;

/// One draw of uplink/downlink channels, target geometry, and the true
/// target response G = alpha * a(theta) a(theta)^T (rank-1 by construction).
struct ChannelRealization {
    Matrix F;            ///< N x K uplink channels, column k = f_k
    Matrix Hdl;          ///< N x K downlink channels, column k = h_k
    Matrix G;            ///< N x N true target response
    num::Complex alpha;  ///< target path gain
    double theta = 0.0;  ///< target AoA (rad)
    RealVector distances;  ///< device distances (m)
};

/// ULA response: entry n = exp(j*2*pi*(n-1)*spacing*sin(theta)), entry 1 = 1.
Vector steering_vector(double theta, int N, double spacing);

/// Two-way target path gain rho_t * d^{-eps_t} with
/// rho_t = sigma_rcs * lambda^2 / (4 pi)^3; strictly decreasing in d.
/// Throws std::invalid_argument for d <= 0.
double target_pathloss(double d, const SystemConfig& cfg);

/// One-way device path gain rho0 * d^{-eps_c} with rho0 = (lambda / 4 pi)^2.
double device_pathloss(double d, const SystemConfig& cfg);

/// Draws distances, Rayleigh fading, and assembles the target response.
ChannelRealization draw_channels(const SystemConfig& cfg, num::RngStream& rng);

}  // namespace otafeel::chan
