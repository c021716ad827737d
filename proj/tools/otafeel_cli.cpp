// Command-line front end: single solves, sensing trials, training runs,
// Monte-Carlo sweeps, and a built-in self test.

#include <cstdint>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "otafeel/aggregation.hpp"
#include "otafeel/channel.hpp"
#include "otafeel/config.hpp"
#include "otafeel/fedlearn.hpp"
#include "otafeel/harness.hpp"
#include "otafeel/scheduler.hpp"
#include "otafeel/sensing.hpp"

using namespace otafeel;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitInfeasible = 3;

struct CommonOpts {
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int trials = 100;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOpts& c) {
    cmd->add_option("--config", c.config_path, "key=value config file");
    cmd->add_option("--out", c.out_path, "output path");
    cmd->add_option("--seed", c.seed, "base RNG seed")->each([&](const std::string&) {
        c.seed_set = true;
    });
    cmd->add_option("--trials", c.trials, "Monte-Carlo trials")->check(CLI::PositiveNumber);
    cmd->add_option("--set", c.overrides, "config override key=value (repeatable)");
}

void load_configs(const CommonOpts& c, SystemConfig& sys, TrainConfig& train) {
    if (!c.config_path.empty()) apply_config(sys, train, parse_config_file(c.config_path));
    std::map<std::string, std::string> kv;
    for (const auto& s : c.overrides) kv.insert(parse_override(s));
    apply_config(sys, train, kv);
    if (c.seed_set) sys.seed = c.seed;
    sys.validate();
    train.validate();
}

int cmd_schedule(const CommonOpts& c) {
    SystemConfig sys;
    TrainConfig train;
    load_configs(c, sys, train);
    num::RngStream rng(sys.seed);
    const auto real = chan::draw_channels(sys, rng);
    const auto out = sched::schedule_mp(real, sys);
    std::cout << out.trace_log();
    std::cout << "S =";
    for (int k : out.S) std::cout << ' ' << k;
    std::cout << "\n|S| = " << out.S.size() << "\n";
    if (!out.feasible) {
        std::cout << "schedule infeasible: no nonempty device set satisfies the thresholds\n";
        return kExitInfeasible;
    }
    const auto violations = harness::verify_constraints(out, real, sys);
    for (const auto& v : violations) std::cout << "constraint violated: " << v << "\n";
    std::cout << "crb = " << out.crb_value << "\nagg_error = " << out.agg_error << "\n";
    return violations.empty() ? kExitOk : kExitRuntime;
}

int cmd_sense(const CommonOpts& c) {
    SystemConfig sys;
    TrainConfig train;
    load_configs(c, sys, train);
    num::RngStream rng(sys.seed);
    const auto real = chan::draw_channels(sys, rng);
    std::vector<int> S(sys.K);
    for (int k = 0; k < sys.K; ++k) S[k] = k;
    const auto phi = sched::make_phi(S, sys.K);
    const auto tau = num::RealVector::Ones(sys.K).eval();
    const auto c_vec = sched::solve_receiver_m2(real.F, S, phi, tau, sys);
    const auto scal = agg::zf_coordination(real.F, c_vec, phi, S, sys.P_u);
    const auto sol = sched::solve_precoder_m1(real.Hdl, sys);
    if (!sol.feasible) {
        std::cout << "precoder infeasible: gamma exceeds max attainable floor "
                  << sol.max_snr_floor << "\n";
        return kExitInfeasible;
    }
    const auto R = sense::effective_noise_cov(real.F, scal, 1, sys.sigma2_ps);
    const double bound = sense::crb(R, sol.W);
    num::RngStream rng_mse = rng.substream(7);
    const double mse = sense::empirical_sensing_mse(sys, real, sol.W, scal, c.trials, rng_mse);
    std::cout << "crb = " << bound << "\nempirical_mse = " << mse
              << "\nratio = " << mse / bound << "\n";
    return kExitOk;
}

int cmd_train(const CommonOpts& c) {
    SystemConfig sys;
    TrainConfig train;
    load_configs(c, sys, train);
    num::RngStream rng(sys.seed);
    const auto ds = fed::make_synthetic(train.n_samples, train.feature_dim, train.class_sep, rng);
    const auto part = fed::partition_dirichlet(ds, sys.K, train.alpha_dir, rng);
    num::RngStream rng_chan = rng.substream(1);
    const auto real = chan::draw_channels(sys, rng_chan);
    auto st = fed::init_train_state(ds, train.reg);
    for (int t = 0; t < train.rounds; ++t) {
        num::RngStream rng_round = rng.substream(100 + static_cast<std::uint64_t>(t));
        st = fed::run_feel_round(st, ds, part, real, sys, train, rng_round);
        std::cout << "round=" << st.round << " loss=" << st.loss_history.back()
                  << " acc=" << st.acc_history.back() << " gap=" << st.gap_history.back()
                  << "\n";
    }
    const double L_lip = fed::lipschitz_estimate(ds, train.reg);
    const auto rep = fed::gap_bound_check(st.gap_history, train.lr, L_lip, sys.eps0);
    std::cout << "recursion_holds_fraction=" << rep.fraction_holding
              << " asymptotic_gap=" << rep.asymptotic_gap << " fixed_point=" << rep.fixed_point
              << "\nfallback_rounds=" << st.fallback_rounds.size() << "\n";
    return kExitOk;
}

int cmd_sweep(const CommonOpts& c, const std::string& var, const std::string& grid_csv,
              const std::string& policies_csv, int train_rounds, int threads) {
    harness::ExperimentSpec spec;
    load_configs(c, spec.base, spec.train);
    spec.variable = harness::sweep_var_from_string(var);
    spec.grid.clear();
    std::stringstream gs(grid_csv);
    for (std::string tok; std::getline(gs, tok, ',');) spec.grid.push_back(std::stod(tok));
    spec.policies.clear();
    std::stringstream ps(policies_csv);
    for (std::string tok; std::getline(ps, tok, ',');) {
        if (tok == "mp") spec.policies.push_back(sched::Policy::MatchingPursuit);
        else if (tok == "greedy") spec.policies.push_back(sched::Policy::Greedy);
        else if (tok == "random") spec.policies.push_back(sched::Policy::Random);
        else throw std::invalid_argument("unknown policy: " + tok + " (expected mp|greedy|random)");
    }
    spec.trials = c.trials;
    spec.train_rounds = train_rounds;
    spec.threads = threads;
    spec.out_path = c.out_path.empty() ? "sweep.csv" : c.out_path;
    const auto result = harness::run_experiment(spec);
    std::cout << result.csv;
    if (!result.any_feasible) {
        std::cerr << "no feasible trial at any grid point\n";
        return kExitInfeasible;
    }
    return kExitOk;
}

int cmd_selftest(const CommonOpts& c) {
    SystemConfig sys;
    TrainConfig train;
    load_configs(c, sys, train);
    int failures = 0;
    auto check = [&](const std::string& name, bool ok) {
        std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
        failures += !ok;
    };

    // Whitening and noiseless recovery on fresh draws.
    {
        bool whiten_ok = true, recover_ok = true;
        for (int t = 0; t < 20; ++t) {
            num::RngStream rng(num::mix_seed(sys.seed, 40 + t));
            auto real = chan::draw_channels(sys, rng);
            std::vector<int> S(sys.K);
            for (int k = 0; k < sys.K; ++k) S[k] = k;
            const auto phi = sched::make_phi(S, sys.K);
            const auto tau = num::RealVector::Ones(sys.K).eval();
            const auto c_vec = sched::solve_receiver_m2(real.F, S, phi, tau, sys);
            const auto scal = agg::zf_coordination(real.F, c_vec, phi, S, sys.P_u);
            const auto R = sense::effective_noise_cov(real.F, scal, 1, sys.sigma2_ps);
            const auto T = sense::whitening_filter(R);
            whiten_ok = whiten_ok &&
                        (T * R * T.adjoint() - num::Matrix::Identity(sys.N, sys.N)).norm() <= 1e-9;
            const auto sol = sched::solve_precoder_m1(real.Hdl, sys);
            const auto d = sense::pilot_symbols(rng, sys.L);
            const num::Matrix Y = real.G * sol.W * d.asDiagonal();
            const auto G_hat =
                sense::ml_estimate_G(Y, sol.W, d, num::Matrix::Identity(sys.N, sys.N));
            recover_ok =
                recover_ok && (G_hat - real.G).norm() / real.G.norm() <= 1e-9;
        }
        check("whitening identity", whiten_ok);
        check("noiseless recovery", recover_ok);
    }

    // Scheduled outcomes pass the independent constraint checker.
    {
        bool ok = true;
        int feasible_seen = 0;
        for (int t = 0; t < 20; ++t) {
            num::RngStream rng(num::mix_seed(sys.seed, 80 + t));
            auto real = chan::draw_channels(sys, rng);
            const auto out = sched::schedule_mp(real, sys);
            if (!out.feasible) continue;
            ++feasible_seen;
            ok = ok && harness::verify_constraints(out, real, sys).empty();
        }
        check("scheduler constraint re-verification", ok && feasible_seen > 0);
    }

    // Deterministic sweep output.
    {
        harness::ExperimentSpec spec;
        spec.base = sys;
        spec.train = train;
        spec.variable = harness::SweepVar::Eps0;
        spec.grid = {sys.eps0};
        spec.trials = 3;
        spec.out_path.clear();
        spec.sensing_mse_trials = 2;
        const auto a = harness::run_experiment(spec);
        const auto b = harness::run_experiment(spec);
        check("sweep determinism", a.csv == b.csv);
    }

    std::cout << (failures ? "SELFTEST FAILED\n" : "SELFTEST OK\n");
    return failures ? kExitRuntime : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"over-the-air federated learning with integrated sensing: simulator CLI"};
    app.require_subcommand(1);

    CommonOpts c_sched, c_sense, c_train, c_sweep, c_self;
    auto* sub_sched = app.add_subcommand("schedule", "one scheduling solve with trace");
    add_common(sub_sched, c_sched);
    auto* sub_sense = app.add_subcommand("sense", "one sensing trial: CRB vs empirical MSE");
    add_common(sub_sense, c_sense);
    auto* sub_train = app.add_subcommand("train", "full federated training run");
    add_common(sub_train, c_train);
    auto* sub_sweep = app.add_subcommand("sweep", "Monte-Carlo sweep to CSV");
    add_common(sub_sweep, c_sweep);
    std::string var = "eps0", grid = "100,200,400,800,1600", policies = "mp,greedy,random";
    int train_rounds = 0, threads = 0;
    sub_sweep->add_option("--var", var, "sweep variable: eps0|Gamma0|gamma|d_target|N|K");
    sub_sweep->add_option("--grid", grid, "comma-separated ascending grid");
    sub_sweep->add_option("--policies", policies, "comma-separated subset of mp,greedy,random");
    sub_sweep->add_option("--train-rounds", train_rounds, "learning rounds per trial (0 = skip)");
    sub_sweep->add_option("--threads", threads, "worker threads (0 = hardware)");
    auto* sub_self = app.add_subcommand("selftest", "run built-in oracle checks");
    add_common(sub_self, c_self);

    CLI11_PARSE(app, argc, argv);

    try {
        if (sub_sched->parsed()) return cmd_schedule(c_sched);
        if (sub_sense->parsed()) return cmd_sense(c_sense);
        if (sub_train->parsed()) return cmd_train(c_train);
        if (sub_sweep->parsed()) return cmd_sweep(c_sweep, var, grid, policies, train_rounds, threads);
        if (sub_self->parsed()) return cmd_selftest(c_self);
    } catch (const std::invalid_argument& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitValidation;
}
