#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "otafeel/aggregation.hpp"
#include "otafeel/channel.hpp"
#include "otafeel/harness.hpp"
#include "otafeel/scheduler.hpp"
#include "otafeel/sensing.hpp"

using namespace otafeel;
using namespace otafeel::sched;
using num::Complex;
using num::Matrix;
using num::RealVector;
using num::Vector;

TEST_CASE("solve_precoder_m1: inactive SNR floor gives the isotropic point") {
    SystemConfig cfg;
    cfg.gamma = 0.0;
    num::RngStream rng(30);
    const auto real = chan::draw_channels(cfg, rng);
    const auto sol = solve_precoder_m1(real.Hdl, cfg);
    REQUIRE(sol.feasible);
    const Matrix iso = (cfg.L * cfg.P_d / cfg.N) * Matrix::Identity(cfg.N, cfg.N);
    CHECK((sol.Q - iso).norm() <= 1e-9 * iso.norm());
    CHECK(sol.tr_Q_inv ==
          doctest::Approx(cfg.N * cfg.N / (cfg.L * cfg.P_d)).epsilon(1e-9));
    CHECK((sol.W * sol.W.adjoint() - sol.Q).norm() <= 1e-9 * sol.Q.norm());
    CHECK(sol.W.cols() == cfg.L);
}

TEST_CASE("solve_precoder_m1: full power and small duality gap on random instances") {
    SystemConfig cfg;
    num::RngStream rng(31);
    for (int t = 0; t < 100; ++t) {
        const auto real = chan::draw_channels(cfg, rng);
        // A feasible, usually active floor: halfway to the max attainable.
        const Matrix H =
            (real.Hdl.conjugate() * real.Hdl.transpose()) / (cfg.K * cfg.L);
        const double h_max = num::hermitian_eig(H).values.maxCoeff();
        SystemConfig c2 = cfg;
        c2.gamma = 0.5 * cfg.L * cfg.P_d * h_max;
        const auto sol = solve_precoder_m1(real.Hdl, c2);
        REQUIRE(sol.feasible);
        CHECK(sol.Q.trace().real() == doctest::Approx(cfg.L * cfg.P_d).epsilon(1e-6));
        CHECK(sol.duality_gap_rel <= 1e-6);
        const double snr = (H * sol.Q).trace().real();
        CHECK(snr >= c2.gamma * (1.0 - 1e-6));
    }
}

TEST_CASE("solve_precoder_m1: infeasible floor reports the maximum") {
    SystemConfig cfg;
    num::RngStream rng(32);
    const auto real = chan::draw_channels(cfg, rng);
    const Matrix H = (real.Hdl.conjugate() * real.Hdl.transpose()) / (cfg.K * cfg.L);
    const double h_max = num::hermitian_eig(H).values.maxCoeff();
    SystemConfig c2 = cfg;
    c2.gamma = 2.0 * cfg.L * cfg.P_d * h_max;
    const auto sol = solve_precoder_m1(real.Hdl, c2);
    CHECK_FALSE(sol.feasible);
    CHECK(sol.max_snr_floor == doctest::Approx(cfg.L * cfg.P_d * h_max).epsilon(1e-9));
}

namespace {
// Exhaustive 2x2 PSD oracle on the full-power boundary:
// Q = U diag(q, trace-q) U^H over eigenvalue split and unitary angles.
double grid_optimum_n2(const Matrix& H, double budget, double gamma, double step) {
    double best = std::numeric_limits<double>::infinity();
    for (double q = step; q <= budget - step + 1e-12; q += step) {
        const double q2 = budget - q;
        for (double th = 0.0; th <= M_PI / 2 + 1e-12; th += step) {
            const double ct = std::cos(th), st = std::sin(th);
            for (double ph = 0.0; ph < 2 * M_PI; ph += step) {
                const Complex u = std::polar(1.0, ph);
                Matrix U(2, 2);
                U << ct, -st * std::conj(u), st * u, ct;
                Matrix Q = Matrix::Zero(2, 2);
                Q(0, 0) = q;
                Q(1, 1) = q2;
                Q = (U * Q * U.adjoint()).eval();
                if ((H * Q).trace().real() < gamma) continue;
                const double obj = 1.0 / q + 1.0 / q2;
                if (obj < best) best = obj;
            }
        }
    }
    return best;
}
}  // namespace

TEST_CASE("solve_precoder_m1: matches the exhaustive grid on N=2 toys") {
    SystemConfig cfg;
    cfg.N = 2;
    cfg.K = 3;
    cfg.L = 4;
    num::RngStream rng(33);
    for (int t = 0; t < 5; ++t) {
        Matrix Hdl = num::sample_complex_gaussian_matrix(rng, 2, 3, 1.0);
        const Matrix H = (Hdl.conjugate() * Hdl.transpose()) / (cfg.K * cfg.L);
        const double h_max = num::hermitian_eig(H).values.maxCoeff();
        SystemConfig c2 = cfg;
        c2.gamma = 0.6 * cfg.L * cfg.P_d * h_max;
        const auto sol = solve_precoder_m1(Hdl, c2);
        REQUIRE(sol.feasible);
        const double grid = grid_optimum_n2(H, cfg.L * cfg.P_d, c2.gamma, 2e-2);
        CHECK(sol.tr_Q_inv <= grid * (1.0 + 1e-3));
        CHECK(grid <= sol.tr_Q_inv * 1.10);
    }
}

TEST_CASE("feasibility_gate_precoder") {
    SystemConfig cfg;
    num::RngStream rng(34);
    const auto real = chan::draw_channels(cfg, rng);
    const auto sol = solve_precoder_m1(real.Hdl, cfg);
    const Matrix R = cfg.sigma2_ps * Matrix::Identity(cfg.N, cfg.N);
    SystemConfig loose = cfg;
    loose.Gamma0 = std::numeric_limits<double>::infinity();
    CHECK(feasibility_gate_precoder(sol, loose, R));
    SystemConfig tight = cfg;
    // The gamma=0 optimum lower-bounds every achievable CRB.
    tight.Gamma0 = 0.4 * R.trace().real() * sol.tr_Q_inv;
    CHECK_FALSE(feasibility_gate_precoder(sol, tight, R));
}

TEST_CASE("solve_receiver_m2: zero penalty weight reaches phibar") {
    SystemConfig cfg;
    cfg.N = 4;
    cfg.K = 3;
    num::RngStream rng(35);
    const auto real = chan::draw_channels(cfg, rng);
    std::vector<int> S{0, 1, 2};
    const RealVector phi = make_phi(S, cfg.K);
    const RealVector tau = RealVector::Ones(cfg.K);
    // xi = 0 exactly when eps0 = (N/L) sum phi^2.
    SystemConfig c2 = cfg;
    c2.eps0 = (static_cast<double>(cfg.N) / cfg.L) * phi.squaredNorm();
    CHECK(penalty_xi(S, phi, c2) == doctest::Approx(0.0));
    const Vector c = solve_receiver_m2(real.F, S, phi, tau, c2);
    CHECK(c.norm() == doctest::Approx(1.0).epsilon(1e-12));
    double cbar = 0.0;
    for (int k : S) cbar += penalty_ck(c, k, real.F, phi, S, c2) * tau(k);
    CHECK(cbar == doctest::Approx(phi.squaredNorm()).epsilon(1e-9));
}

TEST_CASE("solve_receiver_m2: negative weight aligns with a single device") {
    SystemConfig cfg;  // default eps0 makes xi strongly negative
    cfg.K = 1;
    num::RngStream rng(36);
    const auto real = chan::draw_channels(cfg, rng);
    std::vector<int> S{0};
    const RealVector phi = make_phi(S, cfg.K);
    const RealVector tau = RealVector::Ones(cfg.K);
    REQUIRE(penalty_xi(S, phi, cfg) < 0.0);
    const Vector c = solve_receiver_m2(real.F, S, phi, tau, cfg);
    CHECK(std::abs(c.dot(real.F.col(0))) ==
          doctest::Approx(real.F.col(0).norm()).epsilon(1e-9));
}

TEST_CASE("solve_receiver_m2: eigenvector beats sampled unit vectors") {
    SystemConfig cfg;
    cfg.N = 4;
    cfg.K = 6;
    num::RngStream rng(37);
    for (int t = 0; t < 10; ++t) {
        const auto real = chan::draw_channels(cfg, rng);
        std::vector<int> S(cfg.K);
        for (int k = 0; k < cfg.K; ++k) S[k] = k;
        const RealVector phi = make_phi(S, cfg.K);
        const RealVector tau = RealVector::Ones(cfg.K);
        const Vector c = solve_receiver_m2(real.F, S, phi, tau, cfg);
        const double xi = penalty_xi(S, phi, cfg);
        Matrix A = phi.squaredNorm() * Matrix::Identity(cfg.N, cfg.N);
        for (int k : S) A += xi * (real.F.col(k) * real.F.col(k).adjoint());
        const auto eig = num::hermitian_eig(0.5 * (A + A.adjoint()));
        const double cbar_opt = (c.adjoint() * A * c)(0, 0).real();
        CHECK(cbar_opt == doctest::Approx(eig.values(0)).epsilon(1e-10));
        for (int s = 0; s < 200; ++s) {
            Vector v = num::sample_complex_gaussian(rng, cfg.N, 1.0);
            v.normalize();
            CHECK(cbar_opt <= (v.adjoint() * A * v)(0, 0).real() + 1e-10);
        }
    }
}

TEST_CASE("penalty_ck: sign equivalence with the aggregation-error threshold") {
    SystemConfig cfg;
    cfg.K = 6;
    num::RngStream rng(38);
    int checked = 0;
    for (int t = 0; t < 300; ++t) {
        const auto real = chan::draw_channels(cfg, rng);
        std::vector<int> S(cfg.K);
        for (int k = 0; k < cfg.K; ++k) S[k] = k;
        const RealVector phi = make_phi(S, cfg.K);
        Vector c = num::sample_complex_gaussian(rng, cfg.N, 1.0);
        c.normalize();
        SystemConfig c2 = cfg;
        c2.eps0 = std::pow(10.0, 1.0 + 4.0 * rng.next_double());
        const double E = agg::aggregation_error(c, S, real.F, phi, c2);
        if (std::abs(E - c2.eps0) <= 1e-9 * c2.eps0) continue;  // knife-edge draws
        double max_ck = -std::numeric_limits<double>::infinity();
        for (int k : S) max_ck = std::max(max_ck, penalty_ck(c, k, real.F, phi, S, c2));
        CHECK((max_ck <= 0.0) == (E <= c2.eps0));
        ++checked;
    }
    CHECK(checked > 250);
}

TEST_CASE("penalty_ck: binary enumeration equals the max criterion") {
    SystemConfig cfg;
    cfg.K = 8;
    num::RngStream rng(39);
    for (int t = 0; t < 100; ++t) {
        const auto real = chan::draw_channels(cfg, rng);
        std::vector<int> S(cfg.K);
        for (int k = 0; k < cfg.K; ++k) S[k] = k;
        const RealVector phi = make_phi(S, cfg.K);
        Vector c = num::sample_complex_gaussian(rng, cfg.N, 1.0);
        c.normalize();
        std::vector<double> ck;
        for (int k : S) ck.push_back(penalty_ck(c, k, real.F, phi, S, cfg));
        double best_subset = 0.0;  // tau = 0 attains 0
        for (unsigned mask = 1; mask < (1u << cfg.K); ++mask) {
            double v = 0.0;
            for (int k = 0; k < cfg.K; ++k) {
                if (mask & (1u << k)) v += ck[k];
            }
            best_subset = std::max(best_subset, v);
        }
        const double max_ck = *std::max_element(ck.begin(), ck.end());
        CHECK((best_subset <= 0.0) == (max_ck <= 0.0));
    }
}

TEST_CASE("selection_metric: reduces to the penalty at tau0 = 0 and is monotone") {
    SystemConfig cfg;
    cfg.K = 4;
    num::RngStream rng(40);
    const auto real = chan::draw_channels(cfg, rng);
    std::vector<int> S{0, 1, 2, 3};
    const RealVector phi = make_phi(S, cfg.K);
    const RealVector tau = RealVector::Ones(cfg.K);
    const Vector c = solve_receiver_m2(real.F, S, phi, tau, cfg);
    const Matrix R0 = cfg.sigma2_ps * Matrix::Identity(cfg.N, cfg.N);
    for (int k : S) {
        const double sk = selection_metric(k, c, 1.0, S, 0.0, real.F, phi, cfg, R0);
        CHECK(sk == doctest::Approx(penalty_ck(c, k, real.F, phi, S, cfg)).epsilon(1e-12));
    }
    // Same phi, smaller |c^H f_k| (xi < 0) means a larger violation metric.
    REQUIRE(penalty_xi(S, phi, cfg) < 0.0);
    Matrix F2 = real.F;
    F2.col(1) = 0.5 * F2.col(0);
    const double s0 = selection_metric(0, c, 1.0, S, 0.0, F2, phi, cfg, R0);
    const double s1 = selection_metric(1, c, 1.0, S, 0.0, F2, phi, cfg, R0);
    CHECK(s1 > s0);
}

TEST_CASE("schedule_mp: unconstrained thresholds keep every device") {
    SystemConfig cfg;
    cfg.Gamma0 = 1e9;
    cfg.eps0 = 1e9;
    num::RngStream rng(41);
    const auto real = chan::draw_channels(cfg, rng);
    const auto out = schedule_mp(real, cfg);
    CHECK(out.feasible);
    CHECK(static_cast<int>(out.S.size()) == cfg.K);
    CHECK(out.trace.empty());
    // Precoder is computed once and matches the standalone solve.
    const auto sol = solve_precoder_m1(real.Hdl, cfg);
    CHECK((out.W - sol.W).norm() == 0.0);
}

TEST_CASE("schedule_mp: feasible outcomes survive an independent constraint re-check") {
    SystemConfig cfg;
    cfg.K = 8;
    cfg.eps0 = 300.0;
    num::RngStream rng(42);
    int feasible_count = 0;
    for (int t = 0; t < 40; ++t) {
        const auto real = chan::draw_channels(cfg, rng);
        const auto out = schedule_mp(real, cfg);
        size_t prev = static_cast<size_t>(cfg.K);
        size_t seen = 0;
        for (const auto& rec : out.trace) {
            (void)rec;
            ++seen;
        }
        CHECK(out.S.size() + seen == prev);  // one removal per iteration
        if (!out.feasible) continue;
        ++feasible_count;
        CHECK(out.crb_value <= cfg.Gamma0);
        CHECK(out.agg_error <= cfg.eps0);
        CHECK(out.c.norm() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(harness::verify_constraints(out, real, cfg).empty());
        for (int k : out.S) {
            CHECK((out.tau(k) == doctest::Approx(cfg.delta) ||
                   out.tau(k) == doctest::Approx(1.0 - cfg.delta) || out.tau(k) == 1.0));
        }
    }
    CHECK(feasible_count > 10);
}

TEST_CASE("schedule_baseline: matches MP when unconstrained, reproducible when random") {
    SystemConfig cfg;
    cfg.Gamma0 = 1e9;
    cfg.eps0 = 1e9;
    num::RngStream rng(43);
    const auto real = chan::draw_channels(cfg, rng);
    const auto g = schedule_baseline(real, cfg, Policy::Greedy);
    CHECK(static_cast<int>(g.S.size()) == cfg.K);

    SystemConfig tight = cfg;
    tight.eps0 = 150.0;
    tight.Gamma0 = 1e-9;
    num::RngStream r1(7), r2(7);
    const auto a = schedule_baseline(real, tight, Policy::Random, &r1);
    const auto b = schedule_baseline(real, tight, Policy::Random, &r2);
    CHECK(a.S == b.S);
    CHECK(a.feasible == b.feasible);
}

TEST_CASE("schedule_baseline: greedy removes the weakest channel first") {
    SystemConfig cfg;
    cfg.K = 5;
    cfg.eps0 = 1e-6;  // force at least one removal
    num::RngStream rng(44);
    auto real = chan::draw_channels(cfg, rng);
    real.F.col(3) *= 1e-6;
    const auto out = schedule_baseline(real, cfg, Policy::Greedy);
    REQUIRE_FALSE(out.trace.empty());
    CHECK(out.trace.front().removed == 3);
}

TEST_CASE("schedule trace log is line oriented") {
    SystemConfig cfg;
    cfg.K = 6;
    cfg.eps0 = 100.0;
    num::RngStream rng(45);
    const auto real = chan::draw_channels(cfg, rng);
    const auto out = schedule_mp(real, cfg);
    const std::string log = out.trace_log();
    CHECK(log.find("feasible=") != std::string::npos);
    if (!out.trace.empty()) {
        CHECK(log.find("iter=1 removed=") != std::string::npos);
    }
}
