#pragma once

// Small dense complex linear-algebra kernel shared by the simulator modules.
// Everything here is a pure function; matrices are Eigen dynamic types.

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

namespace otafeel::num {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending,
/// eigenvectors unit-norm columns of `vectors`.
struct HermitianEigen {
    RealVector values;
    Matrix vectors;
};

/// Checks A == A^H within `rel_tol` relative to max |A_ij|; throws
/// std::invalid_argument naming the max asymmetry otherwise.
void require_hermitian(const Matrix& A, double rel_tol = 1e-12);

/// Eigenpairs of a Hermitian matrix. Contract: A u_i = lambda_i u_i within
/// 1e-9 relative, eigenvalues ascending.
HermitianEigen hermitian_eig(const Matrix& A);

/// Inverse matrix square root of a Hermitian PSD matrix: B A B^H = I.
/// Eigenvalues >= -1e-10*max are clamped to zero; a near-singular input
/// (min/max eigenvalue <= 1e-12) raises std::runtime_error reporting the
/// condition number.
Matrix inv_sqrt(const Matrix& A);

/// Hermitian principal square root (A^{1/2}), same PSD clamping as inv_sqrt.
Matrix sqrt_psd(const Matrix& A);

/// Moore-Penrose pseudo-inverse via SVD; defined for every matrix.
Matrix pinv(const Matrix& A);

/// Kronecker product.
Matrix kron(const Matrix& A, const Matrix& B);

/// Deterministic, value-typed random stream. Substreams derived from
/// (seed, id) pairs are independent for practical purposes and fully
/// reproducible across runs.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    /// New independent stream derived from this stream's seed and `id`.
    RngStream substream(std::uint64_t id) const;

    std::uint64_t next_u64();
    /// Uniform double in [0, 1).
    double next_double();
    /// Uniform double in (0, 1].
    double next_open_double();
    /// Standard normal via Box-Muller (platform independent).
    double next_normal();
    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
};

/// Stable 64-bit mix of several values, used to derive substream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// i.i.d. circularly-symmetric complex Gaussian vector; real and imaginary
/// parts each carry variance/2. variance == 0 yields the zero vector.
Vector sample_complex_gaussian(RngStream& rng, int n, double variance);

/// Matrix of i.i.d. CN(0, variance) entries.
Matrix sample_complex_gaussian_matrix(RngStream& rng, int rows, int cols, double variance);

}  // namespace otafeel::num
