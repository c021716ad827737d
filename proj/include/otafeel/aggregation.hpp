#pragma once

// Zero-forcing transmit coordination, successive interference cancellation,
// and the closed-form aggregation error.

#include <vector>

#include "otafeel/config.hpp"
#include "otafeel/numerics.hpp"
#include "otafeel/sensing.hpp"

namespace otafeel::agg {

using num::Matrix;
using num::RealVector;
using num::Vector;

struct AggregationReport {
    double error_closed_form = 0.0;
    double error_monte_carlo = 0.0;
    double eta = 0.0;
    double residual_zf = 0.0;
};

/// Zero-forcing coordination: b_k = phi_k sqrt(eta) / (c^H f_k) with
/// eta = P_u * min_{k in S} |c^H f_k|^2 / phi_k^2. The weight vector `phi`
/// is indexed over all K devices; only entries in S are read. Throws
/// std::runtime_error when some device in S is orthogonal to c
/// (|c^H f_k| < 1e-12 ||f_k||), signalling it must be removed.
sense::UplinkScaling zf_coordination(const Matrix& F, const Vector& c, const RealVector& phi,
                                     const std::vector<int>& S, double P_u);

/// Closed-form aggregation error
/// E(c,S) = (1+N/L)/(P_u/sigma2) * max_{k in S} phi_k^2 ||c||^2 / |c^H f_k|^2
///        + (N/L) * sum_{k in S} phi_k^2.
/// Throws std::invalid_argument on empty S, std::runtime_error on an
/// orthogonal device.
double aggregation_error(const Vector& c, const std::vector<int>& S, const Matrix& F,
                         const RealVector& phi, const SystemConfig& cfg);

/// Complex post-SIC aggregate per interval: cancels beta_s[m] * G_hat w[m] x[m]
/// from y[m] (precoder columns cycle when M > L) and applies c^H / sqrt(eta).
Vector sic_aggregate_complex(const Matrix& Y, const Matrix& G_hat, const Matrix& W,
                             const Vector& x, const Vector& c,
                             const sense::UplinkScaling& scaling,
                             const std::vector<int>& beta_s);

/// Real part of the complex aggregate (model symbols are real).
RealVector sic_aggregate(const Matrix& Y, const Matrix& G_hat, const Matrix& W, const Vector& x,
                         const Vector& c, const sense::UplinkScaling& scaling,
                         const std::vector<int>& beta_s);

/// Variance of the per-interval error process:
/// (beta_s/eta) (c^H kron w^T) C (c kron w*) + ||c||^2 sigma2_ps / eta,
/// for an estimator error covariance C (PSD).
double error_process_variance(const Vector& c, const Vector& w_col, const Matrix& C, double eta,
                              double sigma2_ps, int beta_s);

/// ||(1/sqrt(eta)) c^H F B_S - phi_S^T|| restricted to the active set.
double zf_residual(const Matrix& F, const Vector& c, const RealVector& phi,
                   const std::vector<int>& S, const sense::UplinkScaling& scaling);

}  // namespace otafeel::agg
