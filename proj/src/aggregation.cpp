#include "otafeel/aggregation.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace otafeel::agg {

namespace {
void check_active_set(const std::vector<int>& S, Eigen::Index K, const char* what) {
    if (S.empty()) throw std::invalid_argument(std::string(what) + ": empty active set");
    for (int k : S) {
        if (k < 0 || k >= K) throw std::invalid_argument(std::string(what) + ": device index out of range");
    }
}
}  // namespace

sense::UplinkScaling zf_coordination(const Matrix& F, const Vector& c, const RealVector& phi,
                                     const std::vector<int>& S, double P_u) {
    check_active_set(S, F.cols(), "zf_coordination");
    const int K = static_cast<int>(F.cols());
    sense::UplinkScaling out;
    out.b = Vector::Zero(K);
    out.phi = RealVector::Zero(K);

    double eta = std::numeric_limits<double>::infinity();
    for (int k : S) {
        const num::Complex inner = c.dot(F.col(k));  // c^H f_k
        const double mag = std::abs(inner);
        if (mag < 1e-12 * F.col(k).norm()) {
            std::ostringstream oss;
            oss << "zf_coordination: device " << k << " is orthogonal to the receive beam "
                << "(|c^H f_k| = " << mag << "); remove it from the active set";
            throw std::runtime_error(oss.str());
        }
        eta = std::min(eta, P_u * mag * mag / (phi(k) * phi(k)));
    }
    out.eta = eta;
    const double sqrt_eta = std::sqrt(eta);
    for (int k : S) {
        const num::Complex inner = c.dot(F.col(k));
        out.b(k) = phi(k) * sqrt_eta / inner;
        out.phi(k) = phi(k);
    }
    return out;
}

double aggregation_error(const Vector& c, const std::vector<int>& S, const Matrix& F,
                         const RealVector& phi, const SystemConfig& cfg) {
    check_active_set(S, F.cols(), "aggregation_error");
    const double ratio_nl = static_cast<double>(cfg.N) / cfg.L;
    const double snr_u = cfg.P_u / cfg.sigma2_ps;
    const double c2 = c.squaredNorm();
    double max_term = 0.0;
    double sum_phi2 = 0.0;
    for (int k : S) {
        const double mag2 = std::norm(c.dot(F.col(k)));
        if (mag2 < 1e-24 * F.col(k).squaredNorm()) {
            std::ostringstream oss;
            oss << "aggregation_error: device " << k << " is orthogonal to the receive beam";
            throw std::runtime_error(oss.str());
        }
        max_term = std::max(max_term, phi(k) * phi(k) * c2 / mag2);
        sum_phi2 += phi(k) * phi(k);
    }
    return (1.0 + ratio_nl) / snr_u * max_term + ratio_nl * sum_phi2;
}

Vector sic_aggregate_complex(const Matrix& Y, const Matrix& G_hat, const Matrix& W,
                             const Vector& x, const Vector& c,
                             const sense::UplinkScaling& scaling,
                             const std::vector<int>& beta_s) {
    if (scaling.eta <= 0.0) throw std::invalid_argument("sic_aggregate: eta must be > 0");
    const int M = static_cast<int>(Y.cols());
    const int L = static_cast<int>(W.cols());
    if (static_cast<int>(beta_s.size()) != M || x.size() != M) {
        throw std::invalid_argument("sic_aggregate: mask/pilot length mismatch");
    }
    const double inv_sqrt_eta = 1.0 / std::sqrt(scaling.eta);
    Vector out(M);
    for (int m = 0; m < M; ++m) {
        Vector ybar = Y.col(m);
        if (beta_s[m] != 0) {
            ybar -= G_hat * W.col(m % L) * x(m);
        }
        out(m) = c.dot(ybar) * inv_sqrt_eta;
    }
    return out;
}

RealVector sic_aggregate(const Matrix& Y, const Matrix& G_hat, const Matrix& W, const Vector& x,
                         const Vector& c, const sense::UplinkScaling& scaling,
                         const std::vector<int>& beta_s) {
    return sic_aggregate_complex(Y, G_hat, W, x, c, scaling, beta_s).real();
}

double error_process_variance(const Vector& c, const Vector& w_col, const Matrix& C, double eta,
                              double sigma2_ps, int beta_s) {
    if (eta <= 0.0) throw std::invalid_argument("error_process_variance: eta must be > 0");
    double var = c.squaredNorm() * sigma2_ps / eta;
    if (beta_s != 0) {
        // (c^H kron w^T) C (c kron w*) as a quadratic form over vec(G).
        const Matrix c_mat = c;
        const Matrix w_mat = w_col;
        const Matrix right = num::kron(c_mat, w_mat.conjugate());  // N^2 x 1
        const num::Complex quad = (right.adjoint() * C * right)(0, 0);
        var += quad.real() / eta;
    }
    return var;
}

double zf_residual(const Matrix& F, const Vector& c, const RealVector& phi,
                   const std::vector<int>& S, const sense::UplinkScaling& scaling) {
    double acc = 0.0;
    const double inv_sqrt_eta = 1.0 / std::sqrt(scaling.eta);
    for (int k : S) {
        const num::Complex v = c.dot(F.col(k)) * scaling.b(k) * inv_sqrt_eta - phi(k);
        acc += std::norm(v);
    }
    return std::sqrt(acc);
}

}  // namespace otafeel::agg
