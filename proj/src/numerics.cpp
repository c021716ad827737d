#include "otafeel/numerics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace otafeel::num {

void require_hermitian(const Matrix& A, double rel_tol) {
    if (A.rows() != A.cols()) {
        throw std::invalid_argument("require_hermitian: matrix is not square");
    }
    const double scale = A.cwiseAbs().maxCoeff();
    const double asym = (A - A.adjoint()).cwiseAbs().maxCoeff();
    if (asym > rel_tol * std::max(scale, 1e-300)) {
        std::ostringstream oss;
        oss << "matrix is not Hermitian: max asymmetry " << asym
            << " exceeds " << rel_tol << " * " << scale;
        throw std::invalid_argument(oss.str());
    }
}

HermitianEigen hermitian_eig(const Matrix& A) {
    require_hermitian(A);
    Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (A + A.adjoint()));
    if (solver.info() != Eigen::Success) {
        throw std::runtime_error("hermitian_eig: eigensolver failed to converge");
    }
    return HermitianEigen{solver.eigenvalues(), solver.eigenvectors()};
}

namespace {

// Eigenvalues clamped per the PSD policy: anything above -1e-10*max is
// numerical noise around zero.
RealVector clamp_psd(const RealVector& vals) {
    const double vmax = vals.size() ? vals.maxCoeff() : 0.0;
    RealVector out = vals;
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (out(i) < 0.0) {
            if (out(i) < -1e-10 * std::max(vmax, 0.0)) {
                std::ostringstream oss;
                oss << "matrix is not PSD: eigenvalue " << out(i)
                    << " below tolerance for max eigenvalue " << vmax;
                throw std::runtime_error(oss.str());
            }
            out(i) = 0.0;
        }
    }
    return out;
}

Matrix psd_power(const Matrix& A, double exponent, bool forbid_singular) {
    HermitianEigen eig = hermitian_eig(A);
    RealVector vals = clamp_psd(eig.values);
    const double vmax = vals.maxCoeff();
    const double vmin = vals.minCoeff();
    if (forbid_singular && !(vmin > 1e-12 * vmax)) {
        std::ostringstream oss;
        oss << "matrix is near singular: condition number "
            << (vmin > 0.0 ? vmax / vmin : std::numeric_limits<double>::infinity());
        throw std::runtime_error(oss.str());
    }
    RealVector powered(vals.size());
    for (Eigen::Index i = 0; i < vals.size(); ++i) {
        powered(i) = vals(i) > 0.0 ? std::pow(vals(i), exponent) : 0.0;
    }
    return eig.vectors * powered.asDiagonal() * eig.vectors.adjoint();
}

}  // namespace

Matrix inv_sqrt(const Matrix& A) { return psd_power(A, -0.5, true); }

Matrix sqrt_psd(const Matrix& A) { return psd_power(A, 0.5, false); }

Matrix pinv(const Matrix& A) {
    Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double tol = std::max(A.rows(), A.cols()) * Eigen::NumTraits<double>::epsilon() *
                       (sv.size() ? sv(0) : 0.0);
    RealVector inv_sv(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        inv_sv(i) = sv(i) > tol ? 1.0 / sv(i) : 0.0;
    }
    return svd.matrixV() * inv_sv.asDiagonal() * svd.matrixU().adjoint();
}

Matrix kron(const Matrix& A, const Matrix& B) {
    Matrix out(A.rows() * B.rows(), A.cols() * B.cols());
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) {
            out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
        }
    }
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
    std::uint64_t m = splitmix64(s);
    s ^= b;
    return m ^ splitmix64(s);
}

RngStream::RngStream(std::uint64_t seed) : seed_(seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
}

RngStream RngStream::substream(std::uint64_t id) const {
    return RngStream(mix_seed(seed_, id));
}

// xoshiro256++
std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double RngStream::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double RngStream::next_open_double() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double RngStream::next_normal() {
    const double u1 = next_open_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::uint64_t RngStream::next_below(std::uint64_t n) {
    // Modulo with rejection to stay unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

Vector sample_complex_gaussian(RngStream& rng, int n, double variance) {
    if (variance < 0.0) {
        throw std::invalid_argument("sample_complex_gaussian: negative variance");
    }
    Vector out(n);
    if (variance == 0.0) {
        out.setZero();
        // Keep stream position independent of variance so masked draws stay aligned.
        return out;
    }
    const double s = std::sqrt(variance / 2.0);
    for (int i = 0; i < n; ++i) {
        out(i) = Complex(s * rng.next_normal(), s * rng.next_normal());
    }
    return out;
}

Matrix sample_complex_gaussian_matrix(RngStream& rng, int rows, int cols, double variance) {
    Matrix out(rows, cols);
    for (int j = 0; j < cols; ++j) {
        out.col(j) = sample_complex_gaussian(rng, rows, variance);
    }
    return out;
}

}  // namespace otafeel::num
