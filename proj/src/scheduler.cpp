#include "otafeel/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace otafeel::sched {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string policy_name(Policy p) {
    switch (p) {
        case Policy::MatchingPursuit: return "mp";
        case Policy::Greedy: return "greedy";
        case Policy::Random: return "random";
    }
    return "?";
}

PrecoderSolution solve_precoder_m1(const Matrix& Hdl, const SystemConfig& cfg) {
    const int N = static_cast<int>(Hdl.rows());
    const int K = static_cast<int>(Hdl.cols());
    const int L = cfg.L;
    const double budget = L * cfg.P_d;

    for (int k = 0; k < K; ++k) {
        if (Hdl.col(k).norm() == 0.0) {
            throw std::invalid_argument("solve_precoder_m1: zero downlink channel column");
        }
    }

    // H = (1/KL) sum_k h_k^* h_k^T; constraint is tr(Q H) >= gamma.
    const Matrix H = (Hdl.conjugate() * Hdl.transpose()) / (static_cast<double>(K) * L);
    const num::HermitianEigen eig = num::hermitian_eig(H);
    const RealVector& h = eig.values;  // ascending
    const double h_max = h(N - 1);

    PrecoderSolution sol;
    sol.max_snr_floor = budget * h_max;

    RealVector q(N);
    double mu = 0.0, nu = 0.0;

    // SNR constraint inactive: isotropic full-power covariance.
    const double snr_iso = (budget / N) * h.sum();
    if (snr_iso >= cfg.gamma) {
        q.setConstant(budget / N);
        mu = std::pow(N / budget, 2);
    } else {
        if (cfg.gamma >= sol.max_snr_floor * (1.0 - 1e-12)) {
            sol.feasible = false;
            return sol;
        }
        // For fixed nu: q_i = (mu - nu h_i)^{-1/2}; solve sum q_i = budget by
        // bisection on t = mu - nu*h_max > 0.
        auto solve_mu = [&](double nu_val, RealVector& q_out) {
            auto power_at = [&](double t) {
                double s = 0.0;
                for (int i = 0; i < N; ++i) s += 1.0 / std::sqrt(t + nu_val * (h_max - h(i)));
                return s;
            };
            double t_hi = std::pow(N / budget, 2);
            while (power_at(t_hi) > budget) t_hi *= 2.0;
            double t_lo = t_hi;
            while (power_at(t_lo) < budget) t_lo *= 0.5;
            for (int it = 0; it < 200; ++it) {
                const double t_mid = 0.5 * (t_lo + t_hi);
                (power_at(t_mid) > budget ? t_lo : t_hi) = t_mid;
            }
            const double t = 0.5 * (t_lo + t_hi);
            for (int i = 0; i < N; ++i) q_out(i) = 1.0 / std::sqrt(t + nu_val * (h_max - h(i)));
            return t + nu_val * h_max;  // mu
        };
        auto snr_of = [&](double nu_val, RealVector& q_out, double& mu_out) {
            mu_out = solve_mu(nu_val, q_out);
            return q_out.dot(h);
        };
        // g(nu) = tr(QH) is increasing in nu; bracket then bisect.
        double nu_hi = std::pow(N / budget, 2) / h_max;
        RealVector q_tmp(N);
        double mu_tmp = 0.0;
        while (snr_of(nu_hi, q_tmp, mu_tmp) < cfg.gamma) nu_hi *= 2.0;
        double nu_lo = 0.0;
        for (int it = 0; it < 200; ++it) {
            const double nu_mid = 0.5 * (nu_lo + nu_hi);
            (snr_of(nu_mid, q_tmp, mu_tmp) < cfg.gamma ? nu_lo : nu_hi) = nu_mid;
        }
        nu = 0.5 * (nu_lo + nu_hi);
        mu = solve_mu(nu, q);
    }

    sol.feasible = true;
    sol.Q = eig.vectors * q.asDiagonal() * eig.vectors.adjoint();
    sol.tr_Q_inv = q.cwiseInverse().sum();

    // Complementary-slackness residual relative to the primal objective.
    const double gap = mu * (budget - q.sum()) + nu * (q.dot(h) - cfg.gamma);
    sol.duality_gap_rel = std::abs(gap) / sol.tr_Q_inv;

    // W = Q^{1/2} V with V the first N rows of a scaled DFT matrix (V V^H = I).
    Matrix V(N, L);
    for (int n = 0; n < N; ++n) {
        for (int l = 0; l < L; ++l) {
            V(n, l) = std::polar(1.0 / std::sqrt(static_cast<double>(L)),
                                 -2.0 * M_PI * n * l / L);
        }
    }
    sol.W = num::sqrt_psd(sol.Q) * V;
    return sol;
}

bool feasibility_gate_precoder(const PrecoderSolution& sol, const SystemConfig& cfg,
                               const Matrix& R) {
    if (!sol.feasible) return false;
    return 0.5 * R.trace().real() * sol.tr_Q_inv <= cfg.Gamma0;
}

double penalty_xi(const std::vector<int>& S, const RealVector& phi, const SystemConfig& cfg) {
    double sum_phi2 = 0.0;
    for (int k : S) sum_phi2 += phi(k) * phi(k);
    const double ratio_nl = static_cast<double>(cfg.N) / cfg.L;
    return cfg.P_u / (cfg.sigma2_ps * (1.0 + ratio_nl)) * (ratio_nl * sum_phi2 - cfg.eps0);
}

Vector solve_receiver_m2(const Matrix& F, const std::vector<int>& S, const RealVector& phi,
                         const RealVector& tau, const SystemConfig& cfg) {
    if (S.empty()) throw std::invalid_argument("solve_receiver_m2: empty active set");
    const int N = static_cast<int>(F.rows());
    double phibar = 0.0;
    for (int k : S) phibar += tau(k) * phi(k) * phi(k);
    const double xi = penalty_xi(S, phi, cfg);
    Matrix A = phibar * Matrix::Identity(N, N);
    for (int k : S) {
        if (tau(k) != 0.0) A += (xi * tau(k)) * (F.col(k) * F.col(k).adjoint());
    }
    const num::HermitianEigen eig = num::hermitian_eig(0.5 * (A + A.adjoint()));
    return eig.vectors.col(0);
}

double penalty_ck(const Vector& c, int k, const Matrix& F, const RealVector& phi,
                  const std::vector<int>& S, const SystemConfig& cfg) {
    const double xi = penalty_xi(S, phi, cfg);
    return phi(k) * phi(k) * c.squaredNorm() + xi * std::norm(c.dot(F.col(k)));
}

double selection_metric(int k, const Vector& c_star, double tr_Q_inv, const std::vector<int>& S,
                        double tau0, const Matrix& F, const RealVector& phi,
                        const SystemConfig& cfg, const Matrix& R_minus_k) {
    const double c0 = 0.5 * R_minus_k.trace().real() * tr_Q_inv - cfg.Gamma0;
    return penalty_ck(c_star, k, F, phi, S, cfg) - tau0 * c0;
}

RealVector make_phi(const std::vector<int>& S, int K, const std::vector<double>& sizes) {
    RealVector phi = RealVector::Zero(K);
    double total = 0.0;
    for (int k : S) total += sizes.empty() ? 1.0 : sizes[k];
    if (total <= 0.0) throw std::invalid_argument("make_phi: nonpositive total weight");
    for (int k : S) phi(k) = (sizes.empty() ? 1.0 : sizes[k]) / total;
    return phi;
}

std::string ScheduleOutcome::trace_log() const {
    std::ostringstream oss;
    int iter = 0;
    for (const auto& rec : trace) {
        oss << "iter=" << ++iter << " removed=" << rec.removed << " crb=" << rec.crb_before
            << " agg_error=" << rec.agg_error_before << " metrics=";
        for (size_t i = 0; i < rec.metrics.size(); ++i) {
            oss << (i ? "," : "") << rec.metrics[i];
        }
        oss << "\n";
    }
    oss << "feasible=" << (feasible ? 1 : 0) << " active=" << S.size() << " crb=" << crb_value
        << " agg_error=" << agg_error << "\n";
    return oss.str();
}

namespace {

struct LoopState {
    std::vector<int> S;
    RealVector tau;
    RealVector phi;
    Vector c;
    double crb_val = kInf;
    double agg_err = kInf;
    sense::UplinkScaling scaling;
    std::vector<int> orthogonal;  // devices the beam cannot reach
};

ScheduleOutcome run_removal_loop(const chan::ChannelRealization& real, const SystemConfig& cfg,
                                 Policy policy, num::RngStream* rng,
                                 const std::vector<double>& sizes) {
    cfg.validate();
    if (policy == Policy::Random && rng == nullptr) {
        throw std::invalid_argument("schedule_baseline: random policy requires an rng stream");
    }
    const int K = cfg.K;
    const Matrix& F = real.F;

    ScheduleOutcome out;
    out.tau = RealVector::Ones(K);
    const PrecoderSolution sol = solve_precoder_m1(real.Hdl, cfg);
    if (!sol.feasible) {
        out.feasible = false;
        return out;
    }
    out.W = sol.W;
    out.Q = sol.Q;

    LoopState st;
    st.S.resize(K);
    for (int k = 0; k < K; ++k) st.S[k] = k;
    st.tau = RealVector::Ones(K);

    auto evaluate = [&](LoopState& s) {
        s.phi = make_phi(s.S, K, sizes);
        s.c = solve_receiver_m2(F, s.S, s.phi, s.tau, cfg);
        s.orthogonal.clear();
        for (int k : s.S) {
            if (std::abs(s.c.dot(F.col(k))) < 1e-12 * F.col(k).norm()) {
                s.orthogonal.push_back(k);
            }
        }
        if (s.orthogonal.empty()) {
            s.scaling = agg::zf_coordination(F, s.c, s.phi, s.S, cfg.P_u);
            const Matrix R = sense::effective_noise_cov(F, s.scaling, 1, cfg.sigma2_ps);
            s.crb_val = 0.5 * R.trace().real() * sol.tr_Q_inv;
            s.agg_err = agg::aggregation_error(s.c, s.S, F, s.phi, cfg);
        } else {
            s.crb_val = kInf;
            s.agg_err = kInf;
        }
    };

    while (true) {
        evaluate(st);
        if (st.crb_val <= cfg.Gamma0 && st.agg_err <= cfg.eps0) {
            out.feasible = true;
            break;
        }

        // Pick the device to drop.
        IterationRecord rec;
        rec.crb_before = st.crb_val;
        rec.agg_error_before = st.agg_err;
        int k_star = -1;
        std::vector<double> metrics(st.S.size(), 0.0);
        if (policy == Policy::MatchingPursuit) {
            if (!st.orthogonal.empty()) {
                // An unreachable device keeps E(c,S) undefined; it is removed first.
                k_star = st.orthogonal.front();
                for (size_t i = 0; i < st.S.size(); ++i) {
                    metrics[i] = (st.S[i] == k_star) ? kInf : 0.0;
                }
            } else {
                const Matrix R = sense::effective_noise_cov(F, st.scaling, 1, cfg.sigma2_ps);
                double best = -kInf;
                for (size_t i = 0; i < st.S.size(); ++i) {
                    const int k = st.S[i];
                    const Matrix R_minus_k =
                        R - std::norm(st.scaling.b(k)) * (F.col(k) * F.col(k).adjoint());
                    metrics[i] = selection_metric(k, st.c, sol.tr_Q_inv, st.S, cfg.tau0, F,
                                                  st.phi, cfg, R_minus_k);
                    if (metrics[i] > best) {  // ties break to the lowest index
                        best = metrics[i];
                        k_star = k;
                    }
                }
            }
        } else if (policy == Policy::Greedy) {
            double weakest = kInf;
            for (int k : st.S) {
                const double norm = F.col(k).norm();
                if (norm < weakest) {
                    weakest = norm;
                    k_star = k;
                }
            }
        } else {
            k_star = st.S[rng->next_below(st.S.size())];
        }
        rec.removed = k_star;
        rec.metrics = metrics;

        if (policy == Policy::MatchingPursuit && st.orthogonal.empty()) {
            // Subset-cutting: reweight survivors by the sign of their selection metric.
            for (size_t i = 0; i < st.S.size(); ++i) {
                const int k = st.S[i];
                if (k == k_star) continue;
                st.tau(k) = metrics[i] > 0.0 ? cfg.delta : 1.0 - cfg.delta;
            }
        }
        out.trace.push_back(std::move(rec));
        st.S.erase(std::find(st.S.begin(), st.S.end(), k_star));
        st.tau(k_star) = 0.0;
        if (st.S.empty()) {
            out.feasible = false;
            break;
        }
    }

    out.S = st.S;
    out.c = st.c;
    out.tau = st.tau;
    out.phi = st.S.empty() ? RealVector::Zero(K) : st.phi;
    out.crb_value = st.crb_val;
    out.agg_error = st.agg_err;
    return out;
}

}  // namespace

ScheduleOutcome schedule_mp(const chan::ChannelRealization& real, const SystemConfig& cfg,
                            const std::vector<double>& data_sizes) {
    return run_removal_loop(real, cfg, Policy::MatchingPursuit, nullptr, data_sizes);
}

ScheduleOutcome schedule_baseline(const chan::ChannelRealization& real, const SystemConfig& cfg,
                                  Policy policy, num::RngStream* rng,
                                  const std::vector<double>& data_sizes) {
    if (policy == Policy::MatchingPursuit) return schedule_mp(real, cfg, data_sizes);
    return run_removal_loop(real, cfg, policy, rng, data_sizes);
}

}  // namespace otafeel::sched
