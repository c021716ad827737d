#include "otafeel/sensing.hpp"

#include <sstream>
#include <stdexcept>

namespace otafeel::sense {

Matrix effective_noise_cov(const Matrix& F, const UplinkScaling& scaling, int beta_c,
                           double sigma2_ps) {
    const int N = static_cast<int>(F.rows());
    if (scaling.b.size() != F.cols()) {
        throw std::invalid_argument("effective_noise_cov: scaling dimension mismatch");
    }
    Matrix R = sigma2_ps * Matrix::Identity(N, N);
    if (beta_c != 0) {
        const Matrix FB = F * scaling.b.asDiagonal();
        R += FB * FB.adjoint();
    }
    // Symmetrize away rounding asymmetry.
    return 0.5 * (R + R.adjoint());
}

Matrix whitening_filter(const Matrix& R) { return num::inv_sqrt(R); }

Vector pilot_symbols(num::RngStream& rng, int n) {
    Vector x(n);
    for (int i = 0; i < n; ++i) {
        x(i) = (rng.next_u64() & 1u) ? num::Complex(1.0, 0.0) : num::Complex(-1.0, 0.0);
    }
    return x;
}

Matrix ml_estimate_G(const Matrix& Y, const Matrix& W, const Vector& x, const Matrix& T) {
    const int N = static_cast<int>(W.rows());
    const Matrix WD = W * x.asDiagonal();
    Eigen::JacobiSVD<Matrix> svd(WD, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = std::max(WD.rows(), WD.cols()) * Eigen::NumTraits<double>::epsilon() * sv(0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tol) ++rank;
    }
    if (rank < N) {
        std::ostringstream oss;
        oss << "ml_estimate_G: W*D is rank deficient (numerical rank " << rank << " < " << N
            << ")";
        throw std::runtime_error(oss.str());
    }
    const Matrix Y_white = T * Y;
    // T is Hermitian PD, so solving is stable here.
    const Matrix T_inv_Yw = T.ldlt().solve(Y_white);
    return T_inv_Yw * num::pinv(WD);
}

namespace {
Matrix pilot_gram(const Matrix& W) { return W.conjugate() * W.transpose(); }

Matrix checked_inverse(const Matrix& A, const char* what) {
    num::HermitianEigen eig = num::hermitian_eig(A);
    const double vmax = eig.values.maxCoeff();
    const double vmin = eig.values.minCoeff();
    if (!(vmin > 1e-12 * vmax) || vmax <= 0.0) {
        std::ostringstream oss;
        oss << what << " is singular (precoder does not excite all dimensions); min/max "
            << "eigenvalue ratio " << (vmax > 0 ? vmin / vmax : 0.0);
        throw std::runtime_error(oss.str());
    }
    return eig.vectors * eig.values.cwiseInverse().asDiagonal() * eig.vectors.adjoint();
}
}  // namespace

double crb(const Matrix& R, const Matrix& W) {
    const Matrix gram_inv = checked_inverse(pilot_gram(W), "W* W^T");
    return 0.5 * R.trace().real() * gram_inv.trace().real();
}

Matrix fisher_information(const Matrix& R, const Matrix& W) {
    const Matrix R_inv = checked_inverse(R, "R");
    return 2.0 * num::kron(R_inv, pilot_gram(W));
}

double empirical_sensing_mse(const SystemConfig& cfg, const chan::ChannelRealization& real,
                             const Matrix& W, const UplinkScaling& scaling, int trials,
                             num::RngStream& rng) {
    if (trials < 1) throw std::invalid_argument("empirical_sensing_mse: trials must be >= 1");
    const int N = cfg.N;
    const int L = static_cast<int>(W.cols());
    const Matrix R = effective_noise_cov(real.F, scaling, 1, cfg.sigma2_ps);
    // Degenerate noiseless case: whitening is a no-op.
    const Matrix T = R.norm() > 0.0 ? whitening_filter(R) : Matrix::Identity(N, N);
    const Matrix FB = real.F * scaling.b.asDiagonal();
    double acc = 0.0;
    for (int t = 0; t < trials; ++t) {
        num::RngStream trial_rng = rng.substream(t);
        const Vector x = pilot_symbols(trial_rng, L);
        Matrix Y = real.G * (W * x.asDiagonal());
        // Model symbols are real unit-variance; PS noise is circular.
        for (int l = 0; l < L; ++l) {
            Vector r_syms(cfg.K);
            for (int k = 0; k < cfg.K; ++k) r_syms(k) = trial_rng.next_normal();
            Y.col(l) += FB * r_syms + num::sample_complex_gaussian(trial_rng, N, cfg.sigma2_ps);
        }
        const Matrix G_hat = ml_estimate_G(Y, W, x, T);
        acc += (G_hat - real.G).squaredNorm();
    }
    return acc / trials;
}

}  // namespace otafeel::sense
