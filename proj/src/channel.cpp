#include "otafeel/channel.hpp"

#include <cmath>
#include <stdexcept>

namespace otafeel::chan {

Vector steering_vector(double theta, int N, double spacing) {
    if (N < 1) throw std::invalid_argument("steering_vector: N must be >= 1");
    Vector a(N);
    const double phase_step = 2.0 * M_PI * spacing * std::sin(theta);
    for (int n = 0; n < N; ++n) {
        a(n) = std::polar(1.0, phase_step * n);
    }
    return a;
}

double target_pathloss(double d, const SystemConfig& cfg) {
    if (d <= 0.0) throw std::invalid_argument("target_pathloss: distance must be > 0");
    const double lambda = cfg.wavelength();
    const double rho_t = cfg.sigma_rcs * lambda * lambda / std::pow(4.0 * M_PI, 3);
    return rho_t * std::pow(d, -cfg.eps_t);
}

double device_pathloss(double d, const SystemConfig& cfg) {
    if (d <= 0.0) throw std::invalid_argument("device_pathloss: distance must be > 0");
    const double lambda = cfg.wavelength();
    const double rho0 = std::pow(lambda / (4.0 * M_PI), 2);
    return rho0 * std::pow(d, -cfg.eps_c);
}

ChannelRealization draw_channels(const SystemConfig& cfg, num::RngStream& rng) {
    cfg.validate();
    ChannelRealization r;
    r.theta = cfg.theta_target;
    r.distances.resize(cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
        r.distances(k) = cfg.D_in + (cfg.D_out - cfg.D_in) * rng.next_double();
    }
    r.F = num::sample_complex_gaussian_matrix(rng, cfg.N, cfg.K, 1.0);
    r.Hdl = num::sample_complex_gaussian_matrix(rng, cfg.N, cfg.K, 1.0);
    for (int k = 0; k < cfg.K; ++k) {
        // Path-loss functions are power gains; amplitudes scale by the root.
        const double amp_k = std::sqrt(device_pathloss(r.distances(k), cfg));
        r.F.col(k) *= amp_k;
        r.Hdl.col(k) *= amp_k;
    }
    double amp = std::sqrt(target_pathloss(cfg.d_target, cfg));
    r.alpha = cfg.alpha_random_phase ? std::polar(amp, 2.0 * M_PI * rng.next_double())
                                     : num::Complex(amp, 0.0);
    const Vector a = steering_vector(r.theta, cfg.N, cfg.antenna_spacing);
    r.G = r.alpha * (a * a.transpose());
    return r;
}

}  // namespace otafeel::chan
