#pragma once

// Effective-noise covariance, whitening, ML estimation of the target
// response, Fisher information, and the CRB metric.

#include "otafeel/channel.hpp"
#include "otafeel/config.hpp"
#include "otafeel/numerics.hpp"

namespace otafeel::sense {

using num::Matrix;
using num::RealVector;
using num::Vector;

/// Per-device uplink scalings under zero-forcing coordination. Entries are
/// zero off the active set.
struct UplinkScaling {
    Vector b;         ///< K complex device scalings, |b_k|^2 <= P_u
    double eta = 0.0; ///< receive power scaling
    RealVector phi;   ///< K aggregation weights (zero off the active set)
};

struct SensingEstimate {
    Matrix G_hat;
    double crb = 0.0;
    double empirical_mse = 0.0;
};

/// R = beta_c * F B B^H F^H + sigma2_ps * I. Hermitian PSD by construction;
/// equals sigma2_ps*I exactly when beta_c == 0 or the active set is empty.
Matrix effective_noise_cov(const Matrix& F, const UplinkScaling& scaling, int beta_c,
                           double sigma2_ps);

/// Whitening filter T = R^{-1/2} (Hermitian); T R T^H = I within 1e-9.
Matrix whitening_filter(const Matrix& R);

/// Deterministic unit-modulus pilot symbols (+/-1), reproducible per stream.
Vector pilot_symbols(num::RngStream& rng, int n);

/// ML estimate G_hat = T^{-1} (T Y) (W D)^dagger with D = diag(x). Requires
/// W D to have numerical rank N (L >= N); throws std::runtime_error naming
/// the numerical rank otherwise.
Matrix ml_estimate_G(const Matrix& Y, const Matrix& W, const Vector& x, const Matrix& T);

/// CRB(S, W) = 1/2 * tr(R) * tr((W* W^T)^{-1}). Throws std::runtime_error if
/// W* W^T is numerically singular (precoder does not excite all dimensions).
double crb(const Matrix& R, const Matrix& W);

/// Fisher information matrix 2 * (R^{-1} kron W* W^T), N^2 x N^2. Assumes
/// unit-modulus pilots.
Matrix fisher_information(const Matrix& R, const Matrix& W);

/// Mean of ||G - G_hat||_F^2 over `trials` independent noise/model-update
/// draws, echoes and uplink both active.
double empirical_sensing_mse(const SystemConfig& cfg, const chan::ChannelRealization& real,
                             const Matrix& W, const UplinkScaling& scaling, int trials,
                             num::RngStream& rng);

}  // namespace otafeel::sense
