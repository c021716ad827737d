#include "otafeel/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "otafeel/aggregation.hpp"
#include "otafeel/sensing.hpp"

namespace otafeel::harness {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct TrialRecord {
    bool feasible = false;
    double S = 0.0;
    double crb = kNan;
    double agg = kNan;
    double mse = kNan;
    double acc = kNan;
    double loss = kNan;
};

void apply_sweep(SystemConfig& cfg, SweepVar v, double value) {
    switch (v) {
        case SweepVar::Eps0: cfg.eps0 = value; break;
        case SweepVar::Gamma0: cfg.Gamma0 = value; break;
        case SweepVar::GammaSnr: cfg.gamma = value; break;
        case SweepVar::DTarget: cfg.d_target = value; break;
        case SweepVar::N: cfg.N = static_cast<int>(value); break;
        case SweepVar::K: cfg.K = static_cast<int>(value); break;
    }
}

struct MeanSe {
    double mean = kNan, se = kNan;
};

MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    if (xs.empty()) return r;
    double s = 0.0;
    for (double x : xs) s += x;
    r.mean = s / xs.size();
    if (xs.size() > 1) {
        double v = 0.0;
        for (double x : xs) v += (x - r.mean) * (x - r.mean);
        r.se = std::sqrt(v / (xs.size() - 1) / xs.size());
    } else {
        r.se = 0.0;
    }
    return r;
}
}  // namespace

SweepVar sweep_var_from_string(const std::string& s) {
    if (s == "eps0") return SweepVar::Eps0;
    if (s == "Gamma0") return SweepVar::Gamma0;
    if (s == "gamma") return SweepVar::GammaSnr;
    if (s == "d_target") return SweepVar::DTarget;
    if (s == "N") return SweepVar::N;
    if (s == "K") return SweepVar::K;
    throw std::invalid_argument("unknown sweep variable: " + s +
                                " (expected eps0|Gamma0|gamma|d_target|N|K)");
}

std::string sweep_var_name(SweepVar v) {
    switch (v) {
        case SweepVar::Eps0: return "eps0";
        case SweepVar::Gamma0: return "Gamma0";
        case SweepVar::GammaSnr: return "gamma";
        case SweepVar::DTarget: return "d_target";
        case SweepVar::N: return "N";
        case SweepVar::K: return "K";
    }
    return "?";
}

void ExperimentSpec::validate() const {
    std::vector<std::string> errs;
    if (grid.empty()) errs.push_back("grid is empty");
    for (size_t i = 1; i < grid.size(); ++i) {
        if (grid[i] < grid[i - 1]) {
            errs.push_back("grid is not sorted ascending");
            break;
        }
    }
    if (trials < 1) errs.push_back("trials < 1");
    if (policies.empty()) errs.push_back("no policies selected");
    base.validate();
    train.validate();
    if (!errs.empty()) {
        std::string msg = "invalid experiment spec:";
        for (const auto& e : errs) msg += " " + e + ";";
        throw std::invalid_argument(msg);
    }
}

std::string csv_header() {
    return "sweep_value,policy,mean_S,mean_crb,mean_agg_error,mean_sensing_mse,"
           "final_accuracy,final_loss,trials,se_S,se_crb,se_agg_error,se_sensing_mse,"
           "se_accuracy,se_loss";
}

std::vector<std::string> verify_constraints(const sched::ScheduleOutcome& out,
                                            const chan::ChannelRealization& real,
                                            const SystemConfig& cfg) {
    std::vector<std::string> bad;
    if (!out.feasible) {
        bad.push_back("outcome not feasible");
        return bad;
    }
    const Eigen::MatrixXcd Q = out.W * out.W.adjoint();
    if (Q.trace().real() > cfg.L * cfg.P_d * (1.0 + 1e-9)) bad.push_back("downlink power budget");

    const auto scal = agg::zf_coordination(real.F, out.c, out.phi, out.S, cfg.P_u);
    for (int k : out.S) {
        if (std::norm(scal.b(k)) > cfg.P_u * (1.0 + 1e-9)) {
            bad.push_back("uplink power cap");
            break;
        }
    }
    const auto R = sense::effective_noise_cov(real.F, scal, 1, cfg.sigma2_ps);
    if (sense::crb(R, out.W) > cfg.Gamma0 * (1.0 + 1e-9)) bad.push_back("CRB threshold");
    if (agg::aggregation_error(out.c, out.S, real.F, out.phi, cfg) > cfg.eps0 * (1.0 + 1e-9)) {
        bad.push_back("aggregation-error threshold");
    }
    // Downlink SNR floor, averaged over devices (or min when configured).
    double snr = cfg.snr_min_over_devices ? std::numeric_limits<double>::infinity() : 0.0;
    for (int k = 0; k < cfg.K; ++k) {
        const double s =
            (real.Hdl.col(k).transpose() * Q * real.Hdl.col(k).conjugate())(0, 0).real() / cfg.L;
        if (cfg.snr_min_over_devices) {
            snr = std::min(snr, s);
        } else {
            snr += s / cfg.K;
        }
    }
    if (snr < cfg.gamma * (1.0 - 1e-9)) bad.push_back("downlink SNR floor");
    return bad;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const size_t G = spec.grid.size(), P = spec.policies.size();
    const size_t T = static_cast<size_t>(spec.trials);
    std::vector<TrialRecord> records(G * P * T);

    std::atomic<size_t> next{0};
    const size_t total = G * P * T;
    auto worker = [&]() {
        while (true) {
            const size_t task = next.fetch_add(1);
            if (task >= total) return;
            const size_t gi = task / (P * T);
            const size_t pi = (task / T) % P;
            const size_t ti = task % T;

            SystemConfig cfg = spec.base;
            apply_sweep(cfg, spec.variable, spec.grid[gi]);
            const sched::Policy pol = spec.policies[pi];

            // Channel stream depends on (seed, grid point, trial) only, so
            // every policy sees the same draw at a given point.
            const std::uint64_t chan_seed =
                num::mix_seed(num::mix_seed(cfg.seed, 0x636861ULL + gi), ti);
            const std::uint64_t pol_seed =
                num::mix_seed(chan_seed, 0x706F6CULL + static_cast<std::uint64_t>(pol));
            num::RngStream rng_chan(chan_seed);
            num::RngStream rng_pol(pol_seed);

            TrialRecord rec;
            try {
                const auto real = chan::draw_channels(cfg, rng_chan);
                const auto out = sched::schedule_baseline(real, cfg, pol, &rng_pol);
                rec.feasible = out.feasible;
                rec.S = static_cast<double>(out.S.size());
                if (out.feasible) {
                    rec.crb = out.crb_value;
                    rec.agg = out.agg_error;
                    if (spec.sensing_mse_trials > 0) {
                        const auto scal =
                            agg::zf_coordination(real.F, out.c, out.phi, out.S, cfg.P_u);
                        num::RngStream rng_mse = rng_pol.substream(7);
                        rec.mse = sense::empirical_sensing_mse(cfg, real, out.W, scal,
                                                               spec.sensing_mse_trials, rng_mse);
                    }
                }
                if (spec.train_rounds > 0) {
                    num::RngStream rng_data = rng_pol.substream(11);
                    const auto ds = fed::make_synthetic(spec.train.n_samples,
                                                        spec.train.feature_dim,
                                                        spec.train.class_sep, rng_data);
                    const auto part =
                        fed::partition_dirichlet(ds, cfg.K, spec.train.alpha_dir, rng_data);
                    auto st = fed::init_train_state(ds, spec.train.reg);
                    for (int r = 0; r < spec.train_rounds; ++r) {
                        num::RngStream rng_round = rng_pol.substream(100 + r);
                        st = fed::run_feel_round(st, ds, part, real, cfg, spec.train, rng_round);
                    }
                    rec.acc = st.acc_history.back();
                    rec.loss = st.loss_history.back();
                }
            } catch (const std::exception&) {
                rec.feasible = false;  // counted as an infeasible trial
            }
            records[task] = rec;
        }
    };

    unsigned n_threads = spec.threads > 0 ? static_cast<unsigned>(spec.threads)
                                          : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(total));
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    ExperimentResult result;
    std::ostringstream csv;
    csv << csv_header() << "\n";
    for (size_t gi = 0; gi < G; ++gi) {
        for (size_t pi = 0; pi < P; ++pi) {
            std::vector<double> vS, vcrb, vagg, vmse, vacc, vloss;
            for (size_t ti = 0; ti < T; ++ti) {
                const TrialRecord& r = records[(gi * P + pi) * T + ti];
                vS.push_back(r.S);
                if (r.feasible) {
                    result.any_feasible = true;
                    vcrb.push_back(r.crb);
                    vagg.push_back(r.agg);
                    if (!std::isnan(r.mse)) vmse.push_back(r.mse);
                }
                if (!std::isnan(r.acc)) vacc.push_back(r.acc);
                if (!std::isnan(r.loss)) vloss.push_back(r.loss);
            }
            ResultRow row;
            row.sweep_value = spec.grid[gi];
            row.policy = sched::policy_name(spec.policies[pi]);
            row.trials = spec.trials;
            const auto mS = mean_se(vS), mc = mean_se(vcrb), ma = mean_se(vagg),
                       mm = mean_se(vmse), mac = mean_se(vacc), ml = mean_se(vloss);
            row.mean_S = mS.mean;
            row.se_S = mS.se;
            row.mean_crb = mc.mean;
            row.se_crb = mc.se;
            row.mean_agg_error = ma.mean;
            row.se_agg_error = ma.se;
            row.mean_sensing_mse = mm.mean;
            row.se_sensing_mse = mm.se;
            row.final_accuracy = mac.mean;
            row.se_accuracy = mac.se;
            row.final_loss = ml.mean;
            row.se_loss = ml.se;
            result.rows.push_back(row);
            csv << fmt(row.sweep_value) << ',' << row.policy << ',' << fmt(row.mean_S) << ','
                << fmt(row.mean_crb) << ',' << fmt(row.mean_agg_error) << ','
                << fmt(row.mean_sensing_mse) << ',' << fmt(row.final_accuracy) << ','
                << fmt(row.final_loss) << ',' << row.trials << ',' << fmt(row.se_S) << ','
                << fmt(row.se_crb) << ',' << fmt(row.se_agg_error) << ','
                << fmt(row.se_sensing_mse) << ',' << fmt(row.se_accuracy) << ','
                << fmt(row.se_loss) << "\n";
        }
    }
    result.csv = csv.str();

    if (!spec.out_path.empty()) {
        std::ofstream out(spec.out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open output path: " + spec.out_path);
        out << result.csv;
        if (!out) throw std::runtime_error("write failed: " + spec.out_path);
    }
    return result;
}

}  // namespace otafeel::harness
