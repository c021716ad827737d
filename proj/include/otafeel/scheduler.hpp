#pragma once

// Joint scheduling, precoding, and post-processing: the marginal problems
// M1/M2, the matching-pursuit selection metric with subset-cutting, and the
// random/greedy baselines.

#include <optional>
#include <string>
#include <vector>

#include "otafeel/aggregation.hpp"
#include "otafeel/channel.hpp"
#include "otafeel/config.hpp"
#include "otafeel/sensing.hpp"

namespace otafeel::sched {

using num::Matrix;
using num::RealVector;
using num::Vector;

enum class Policy { MatchingPursuit, Greedy, Random };

std::string policy_name(Policy p);

/// Result of the downlink precoding marginal problem.
struct PrecoderSolution {
    bool feasible = false;
    Matrix Q;            ///< N x N transmit covariance, W W^H
    Matrix W;            ///< N x L precoder with W W^H = Q
    double tr_Q_inv = 0.0;
    double duality_gap_rel = 0.0;  ///< relative complementary-slackness residual
    double max_snr_floor = 0.0;    ///< max attainable floor when infeasible
};

/// Minimizes tr(Q^{-1}) over { Q PSD, tr(Q) <= L*P_d,
/// (1/KL) sum_k h_k^T Q h_k^* >= gamma } by a KKT dual search in the
/// eigenbasis of H = (1/KL) sum_k h_k^* h_k^T, then factors W = Q^{1/2} V
/// with V row-orthonormal (scaled DFT rows).
PrecoderSolution solve_precoder_m1(const Matrix& Hdl, const SystemConfig& cfg);

/// Feasibility gate: a feasible precoder exists for this active set iff
/// (1/2) tr(R) tr(Q^{-1}) <= Gamma0.
bool feasibility_gate_precoder(const PrecoderSolution& sol, const SystemConfig& cfg,
                               const Matrix& R);

/// xi coefficient of the overall penalty:
/// (P_u / (sigma2 (1+N/L))) * ((N/L) sum_{k in S} phi_k^2 - eps0).
double penalty_xi(const std::vector<int>& S, const RealVector& phi, const SystemConfig& cfg);

/// Receive beamformer: unit eigenvector of the minimum eigenvalue of
/// phibar*I + xi*F T F^H with phibar = sum tau_k phi_k^2, T = diag(tau).
Vector solve_receiver_m2(const Matrix& F, const std::vector<int>& S, const RealVector& phi,
                         const RealVector& tau, const SystemConfig& cfg);

/// Per-device aggregation penalty C_k(c) = phi_k^2 ||c||^2 + xi |c^H f_k|^2.
double penalty_ck(const Vector& c, int k, const Matrix& F, const RealVector& phi,
                  const std::vector<int>& S, const SystemConfig& cfg);

/// Selection metric S_k = C_k(c*) - tau0 * (1/2 tr(R_minus_k) tr(Q^{-1}) - Gamma0).
double selection_metric(int k, const Vector& c_star, double tr_Q_inv, const std::vector<int>& S,
                        double tau0, const Matrix& F, const RealVector& phi,
                        const SystemConfig& cfg, const Matrix& R_minus_k);

struct IterationRecord {
    int removed = -1;
    double crb_before = 0.0;
    double agg_error_before = 0.0;
    std::vector<double> metrics;  ///< S_k values (MP) aligned with active set before removal
};

struct ScheduleOutcome {
    std::vector<int> S;   ///< active set, ascending device indices
    Matrix W;
    Matrix Q;
    Vector c;
    RealVector tau;       ///< final penalty weights over all K
    RealVector phi;       ///< final aggregation weights over all K
    bool feasible = false;
    double crb_value = 0.0;
    double agg_error = 0.0;
    std::vector<IterationRecord> trace;

    std::string trace_log() const;  ///< line-oriented log for the harness
};

/// Aggregation weights proportional to data shard sizes, renormalized over S.
RealVector make_phi(const std::vector<int>& S, int K, const std::vector<double>& sizes = {});

/// Algorithm 1: matching-pursuit scheduling with subset-cutting weights.
ScheduleOutcome schedule_mp(const chan::ChannelRealization& real, const SystemConfig& cfg,
                            const std::vector<double>& data_sizes = {});

/// RSOB / GSOB baselines: same loop with the removal rule replaced. Random
/// policy draws removals from `rng` (required for Policy::Random).
ScheduleOutcome schedule_baseline(const chan::ChannelRealization& real, const SystemConfig& cfg,
                                  Policy policy, num::RngStream* rng = nullptr,
                                  const std::vector<double>& data_sizes = {});

}  // namespace otafeel::sched
