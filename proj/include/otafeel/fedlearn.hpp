#pragma once

// Federated edge learning at desk scale: regularized logistic regression,
// Dirichlet partitioning, local SGD, and over-the-air rounds through the
// simulated channel with sensing and interference cancellation.

#include <string>
#include <vector>

#include "otafeel/channel.hpp"
#include "otafeel/config.hpp"
#include "otafeel/numerics.hpp"
#include "otafeel/scheduler.hpp"

namespace otafeel::fed {

using num::RealMatrix;
using num::RealVector;

struct Dataset {
    RealMatrix X;             ///< n x dim features
    std::vector<int> y;       ///< labels in {0, 1}
    int n() const { return static_cast<int>(X.rows()); }
    int dim() const { return static_cast<int>(X.cols()); }
};

/// Two-class Gaussian mixture with unit covariance and means split by
/// `class_sep` along a random unit direction; labels are balanced.
Dataset make_synthetic(int n, int dim, double class_sep, num::RngStream& rng);

/// Flat binary format: uint32 magic 0x4F544446, uint32 n, uint32 dim,
/// n*dim row-major float32 features, n int32 labels; little-endian.
Dataset load_flat_binary(const std::string& path);
void save_flat_binary(const Dataset& ds, const std::string& path);

/// Standard IDX image/label pair (magic 0x803 / 0x801); pixels scaled to
/// [0,1], labels folded to {0,1} by parity when more than two classes.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

struct DataPartition {
    std::vector<std::vector<int>> shards;  ///< row indices per device
    std::vector<double> sizes() const;
};

/// Shard sizes proportional to a Dirichlet(alpha_dir) draw with
/// largest-remainder rounding; every device gets at least one sample.
/// Throws std::invalid_argument when K > n or alpha_dir <= 0.
DataPartition partition_dirichlet(const Dataset& ds, int K, double alpha_dir,
                                  num::RngStream& rng);

/// L2-regularized logistic loss (mean over `idx`, + reg/2 ||r||^2).
double logistic_loss(const RealVector& r, const Dataset& ds, const std::vector<int>& idx,
                     double reg);
RealVector logistic_grad(const RealVector& r, const Dataset& ds, const std::vector<int>& idx,
                         double reg);
double accuracy(const RealVector& r, const Dataset& ds);

/// Gradient-Lipschitz estimate lambda_max(X^T X) / (4n) + reg.
double lipschitz_estimate(const Dataset& ds, double reg);

/// `steps` SGD steps from r_global on the given shard; batch <= 0 or
/// batch >= shard size means full-batch.
RealVector local_update(const RealVector& r_global, const Dataset& ds,
                        const std::vector<int>& shard, int steps, double lr, int batch,
                        double reg, num::RngStream& rng);

/// Full-batch gradient descent to (near) the global optimum; used as the
/// reference loss for the optimality gap.
RealVector centralized_minimizer(const Dataset& ds, double reg, int iters);

struct TrainState {
    RealVector r;
    int round = 0;
    std::vector<double> loss_history;
    std::vector<double> acc_history;
    std::vector<double> gap_history;
    std::vector<int> fallback_rounds;  ///< rounds served by the singleton fallback
    double loss_star = 0.0;            ///< reference minimum for the gap
};

TrainState init_train_state(const Dataset& ds, double reg, int ref_iters = 5000);

/// One communication round: schedule, broadcast, local updates, normalized
/// uplink over ceil(dim/M) blocks with zero-forcing scalings, per-round
/// sensing estimate, interference cancellation, aggregation, bookkeeping.
/// An infeasible schedule falls back to the best-channel singleton and is
/// flagged in `fallback_rounds`.
TrainState run_feel_round(TrainState state, const Dataset& ds, const DataPartition& part,
                          const chan::ChannelRealization& real, const SystemConfig& cfg,
                          const TrainConfig& tcfg, num::RngStream& rng);

struct GapReport {
    double fraction_holding = 0.0;  ///< rounds where the contraction recursion holds
    double asymptotic_gap = 0.0;    ///< mean gap over the last quarter of rounds
    double fixed_point = 0.0;       ///< eps0 / (2 zeta), the recursion's fixed point
};

GapReport gap_bound_check(const std::vector<double>& gap_history, double zeta, double L_lip,
                          double eps0);

}  // namespace otafeel::fed
