#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "otafeel/channel.hpp"

using namespace otafeel;
using namespace otafeel::chan;

TEST_CASE("steering_vector: broadside gives all ones") {
    const Vector a = steering_vector(0.0, 5, 0.5);
    for (int n = 0; n < 5; ++n) CHECK(std::abs(a(n) - num::Complex(1.0, 0.0)) <= 1e-15);
}

TEST_CASE("steering_vector: endfire two-element closed form") {
    const Vector a = steering_vector(M_PI / 2.0, 2, 0.5);
    CHECK(std::abs(a(0) - num::Complex(1.0, 0.0)) <= 1e-15);
    CHECK(std::abs(a(1) - num::Complex(-1.0, 0.0)) <= 1e-12);
}

TEST_CASE("steering_vector: unit modulus entries") {
    num::RngStream rng(3);
    for (int t = 0; t < 10; ++t) {
        const double theta = (rng.next_double() - 0.5) * M_PI;
        const Vector a = steering_vector(theta, 8, 0.5);
        for (int n = 0; n < 8; ++n) CHECK(std::abs(a(n)) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("target_pathloss: reference distance and value") {
    SystemConfig cfg;
    const double lambda = cfg.wavelength();
    const double rho_t = cfg.sigma_rcs * lambda * lambda / std::pow(4.0 * M_PI, 3);
    CHECK(target_pathloss(1.0, cfg) == doctest::Approx(rho_t).epsilon(1e-12));
    // Engineering value for sigma_rcs = 0.1 at a 5 GHz carrier.
    CHECK(target_pathloss(1.0, cfg) == doctest::Approx(1.814e-7).epsilon(5e-3));
}

TEST_CASE("target_pathloss: doubling distance scales by 2^-4.5") {
    SystemConfig cfg;
    CHECK(cfg.eps_t == doctest::Approx(4.5));
    const double ratio = target_pathloss(100.0, cfg) / target_pathloss(50.0, cfg);
    CHECK(ratio == doctest::Approx(std::pow(2.0, -4.5)).epsilon(1e-12));
}

TEST_CASE("target_pathloss: monotone decreasing, rejects d <= 0") {
    SystemConfig cfg;
    CHECK(target_pathloss(10.0, cfg) > target_pathloss(20.0, cfg));
    CHECK_THROWS_AS(target_pathloss(0.0, cfg), std::invalid_argument);
    CHECK_THROWS_AS(target_pathloss(-3.0, cfg), std::invalid_argument);
}

TEST_CASE("draw_channels: determinism") {
    SystemConfig cfg;
    num::RngStream r1(9), r2(9);
    const auto a = draw_channels(cfg, r1);
    const auto b = draw_channels(cfg, r2);
    CHECK((a.F - b.F).norm() == 0.0);
    CHECK((a.Hdl - b.Hdl).norm() == 0.0);
    CHECK((a.G - b.G).norm() == 0.0);
}

TEST_CASE("draw_channels: G is rank one and matches its construction") {
    SystemConfig cfg;
    num::RngStream rng(10);
    const auto r = draw_channels(cfg, rng);
    Eigen::JacobiSVD<Matrix> svd(r.G);
    CHECK(svd.singularValues()(1) / svd.singularValues()(0) <= 1e-10);
    const Vector a = steering_vector(r.theta, cfg.N, cfg.antenna_spacing);
    CHECK((r.G - r.alpha * (a * a.transpose())).norm() <= 1e-15 * r.G.norm());
}

TEST_CASE("draw_channels: distances stay in the ring") {
    SystemConfig cfg;
    num::RngStream rng(11);
    for (int t = 0; t < 50; ++t) {
        const auto r = draw_channels(cfg, rng);
        for (int k = 0; k < cfg.K; ++k) {
            CHECK(r.distances(k) >= cfg.D_in);
            CHECK(r.distances(k) <= cfg.D_out);
        }
    }
}

TEST_CASE("draw_channels: fading has unit variance before path loss") {
    SystemConfig cfg;
    cfg.K = 1;
    num::RngStream rng(12);
    double acc = 0.0;
    const int trials = 4000;
    for (int t = 0; t < trials; ++t) {
        const auto r = draw_channels(cfg, rng);
        acc += r.F.col(0).squaredNorm() / (cfg.N * device_pathloss(r.distances(0), cfg));
    }
    CHECK(acc / trials == doctest::Approx(1.0).epsilon(0.05));
}
