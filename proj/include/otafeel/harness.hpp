#pragma once

// Experiment engine: Monte-Carlo sweeps over system parameters, paired
// policy comparison, deterministic CSV emission, independent constraint
// re-verification.

#include <string>
#include <vector>

#include "otafeel/channel.hpp"
#include "otafeel/config.hpp"
#include "otafeel/fedlearn.hpp"
#include "otafeel/scheduler.hpp"

namespace otafeel::harness {

enum class SweepVar { Eps0, Gamma0, GammaSnr, DTarget, N, K };

SweepVar sweep_var_from_string(const std::string& s);  ///< throws on unknown name
std::string sweep_var_name(SweepVar v);

struct ExperimentSpec {
    SweepVar variable = SweepVar::Eps0;
    std::vector<double> grid;           ///< nonempty, ascending
    int trials = 1;
    std::vector<sched::Policy> policies{sched::Policy::MatchingPursuit, sched::Policy::Greedy,
                                        sched::Policy::Random};
    std::string out_path = "sweep.csv";
    SystemConfig base;
    TrainConfig train;
    int train_rounds = 0;       ///< 0 skips the learning loop (accuracy/loss = nan)
    int sensing_mse_trials = 4; ///< inner Monte-Carlo draws per trial, 0 skips
    int threads = 0;            ///< 0 = hardware concurrency

    void validate() const;  ///< throws std::invalid_argument listing violations
};

struct ResultRow {
    double sweep_value = 0.0;
    std::string policy;
    double mean_S = 0.0;
    double mean_crb = 0.0;
    double mean_agg_error = 0.0;
    double mean_sensing_mse = 0.0;
    double final_accuracy = 0.0;
    double final_loss = 0.0;
    int trials = 0;
    double se_S = 0.0, se_crb = 0.0, se_agg_error = 0.0, se_sensing_mse = 0.0;
    double se_accuracy = 0.0, se_loss = 0.0;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;  ///< sorted by (sweep value, policy)
    bool any_feasible = false;
    std::string csv;              ///< exact bytes written to out_path
};

/// Runs every (grid point x policy x trial); channel draws depend only on
/// (seed, trial) so policies are compared on identical channels, while
/// policy-internal randomness also mixes in the policy id. Trials fan out
/// over a worker pool; output is deterministic for a given (spec, seed).
/// Writes the CSV to spec.out_path (empty path skips the write).
ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Independently re-checks the feasibility constraints of a schedule
/// outcome: power budgets, CRB threshold, aggregation-error threshold, and
/// downlink SNR floor, all recomputed from raw channel data. Returns a list
/// of violated constraint names; empty means verified.
std::vector<std::string> verify_constraints(const sched::ScheduleOutcome& out,
                                            const chan::ChannelRealization& real,
                                            const SystemConfig& cfg);

std::string csv_header();

}  // namespace otafeel::harness
