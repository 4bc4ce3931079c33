#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#ifdef QATE_HAVE_LAPACKE
#include <lapacke.h>
#endif

namespace qate {

using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using cdouble = std::complex<double>;

namespace linalg {

struct SymEig {
    RVec values;  // ascending
    RMat vectors; // orthonormal columns
};

struct HermEig {
    RVec values;  // ascending
    CMat vectors;
};

// Real-symmetric eigendecomposition. Routes to LAPACKE dsyevd when
// available (divide and conquer, much faster on the ED propagator path),
// otherwise Eigen's SelfAdjointEigenSolver.
inline SymEig eig_sym(const RMat& a) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n) throw std::invalid_argument("eig_sym: matrix not square");
#ifdef QATE_HAVE_LAPACKE
    SymEig out;
    out.vectors = a;
    out.values.resize(n);
    const int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                    out.vectors.data(), n, out.values.data());
    if (info == 0) return out;
    // fall through to Eigen on LAPACK failure
#endif
    Eigen::SelfAdjointEigenSolver<RMat> es(a);
    if (es.info() != Eigen::Success) throw std::runtime_error("eig_sym failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

inline HermEig eig_herm(const CMat& a) {
    const int n = static_cast<int>(a.rows());
    if (a.cols() != n) throw std::invalid_argument("eig_herm: matrix not square");
#ifdef QATE_HAVE_LAPACKE
    HermEig out;
    out.vectors = a;
    out.values.resize(n);
    const int info = LAPACKE_zheevd(
        LAPACK_COL_MAJOR, 'V', 'L', n,
        reinterpret_cast<lapack_complex_double*>(out.vectors.data()), n,
        out.values.data());
    if (info == 0) return out;
#endif
    Eigen::SelfAdjointEigenSolver<CMat> es(a);
    if (es.info() != Eigen::Success) throw std::runtime_error("eig_herm failed");
    return {es.eigenvalues(), es.eigenvectors()};
}

inline bool is_hermitian(const CMat& a, double tol = 1e-12) {
    return (a - a.adjoint()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, a.cwiseAbs().maxCoeff());
}

inline void hermitize(CMat& a) { a = 0.5 * (a + a.adjoint()).eval(); }

// exp(i*phase scaling) sandwich: returns V * diag(f(values)) * V^adj for a
// scalar function applied to a Hermitian matrix given its decomposition.
inline CMat apply_func(const HermEig& eig, const std::function<cdouble(double)>& f) {
    const int n = static_cast<int>(eig.values.size());
    CVec d(n);
    for (int i = 0; i < n; ++i) d[i] = f(eig.values[i]);
    return eig.vectors * d.asDiagonal() * eig.vectors.adjoint();
}

inline CMat apply_func(const SymEig& eig, const std::function<cdouble(double)>& f) {
    const int n = static_cast<int>(eig.values.size());
    CVec d(n);
    for (int i = 0; i < n; ++i) d[i] = f(eig.values[i]);
    return eig.vectors.cast<cdouble>() * d.asDiagonal() * eig.vectors.transpose().cast<cdouble>();
}

// In-place complex product U <- exp(-i*diag(lambda)*tau in basis V) * U,
// done as four real GEMMs: W = V^T U, row-scale by the phases, U = V W.
inline void phase_sandwich_left(const RMat& v, const RVec& lambda, double tau,
                                RMat& u_re, RMat& u_im) {
    RMat wr = v.transpose() * u_re;
    RMat wi = v.transpose() * u_im;
    const int n = static_cast<int>(lambda.size());
    for (int r = 0; r < n; ++r) {
        const double c = std::cos(lambda[r] * tau);
        const double s = std::sin(lambda[r] * tau); // exp(-i l t) = c - i s
        for (int col = 0; col < wr.cols(); ++col) {
            const double re = wr(r, col), im = wi(r, col);
            wr(r, col) = c * re + s * im;
            wi(r, col) = c * im - s * re;
        }
    }
    u_re.noalias() = v * wr;
    u_im.noalias() = v * wi;
}

// rho <- U rho U^adj with U given as (re, im) real pair.
inline CMat conjugate_by(const RMat& u_re, const RMat& u_im, const CMat& rho) {
    CMat u = u_re.cast<cdouble>() + cdouble(0, 1) * u_im.cast<cdouble>();
    return u * rho * u.adjoint();
}

} // namespace linalg
} // namespace qate
