#pragma once

#include <Eigen/Dense>

#include "dualcast/common.hpp"

namespace dualcast {

// ---------------------------------------------------------------------------
// Regularized symmetric solves
//
// Everything downstream reduces to solving (A + lambda I) x = b with A
// symmetric positive semidefinite. Cholesky first; if the factorization is
// not usable, retry once with a small diagonal jitter; final fallback is a
// spectral decomposition with clipped eigenvalues.
// ---------------------------------------------------------------------------

class RegularizedSolver {
 public:
  RegularizedSolver(const Matrix& a, double lambda) : n_(a.rows()) {
    require(a.rows() == a.cols(), "RegularizedSolver: matrix must be square");
    require(lambda >= 0.0, "RegularizedSolver: lambda must be >= 0");
    Matrix m = a;
    m.diagonal().array() += lambda;
    llt_.compute(m);
    if (llt_.info() == Eigen::Success) {
      mode_ = Mode::llt;
      return;
    }
    const double jitter =
        1e-10 * a.trace() / static_cast<double>(std::max<Index>(n_, 1));
    if (jitter > 0.0) {
      Matrix mj = m;
      mj.diagonal().array() += jitter;
      llt_.compute(mj);
      if (llt_.info() == Eigen::Success) {
        mode_ = Mode::llt;
        return;
      }
    }
    eig_.compute(m);
    require(eig_.info() == Eigen::Success,
            "RegularizedSolver: eigendecomposition failed");
    mode_ = Mode::spectral;
    const double dmax = eig_.eigenvalues().cwiseAbs().maxCoeff();
    clip_ = std::max(dmax, 1.0) * 1e-14;
  }

  Vector solve(const Vector& b) const { return solve_impl(b); }
  Matrix solve(const Matrix& b) const { return solve_impl(b); }

  // True when the solution satisfies the residual contract.
  bool check(const Matrix& a, double lambda, const Vector& b, const Vector& x,
             double rel_tol) const {
    Vector r = a * x + lambda * x - b;
    return r.norm() <= rel_tol * std::max(b.norm(), 1e-300);
  }

 private:
  enum class Mode { llt, spectral };

  template <typename Rhs>
  Rhs solve_impl(const Rhs& b) const {
    if (mode_ == Mode::llt) return llt_.solve(b);
    Rhs t = eig_.eigenvectors().transpose() * b;
    for (Index i = 0; i < n_; ++i) {
      const double d = eig_.eigenvalues()[i];
      const double inv = std::abs(d) > clip_ ? 1.0 / d : 0.0;
      t.row(i) *= inv;
    }
    return eig_.eigenvectors() * t;
  }

  Index n_;
  Mode mode_ = Mode::llt;
  Eigen::LLT<Matrix> llt_;
  Eigen::SelfAdjointEigenSolver<Matrix> eig_;
  double clip_ = 0.0;
};

// Solves (A + lambda I) x = b and enforces the residual contract. A singular
// system at lambda = 0 surfaces as an error rather than a silently bad x.
inline Vector solve_regularized(const Matrix& a, const Vector& b,
                                double lambda, double rel_tol = 1e-8) {
  RegularizedSolver solver(a, lambda);
  Vector x = solver.solve(b);
  if (!solver.check(a, lambda, b, x, rel_tol)) {
    require(lambda > 0.0,
            "solve_regularized: singular system at lambda = 0");
    fail("solve_regularized: residual contract violated");
  }
  return x;
}

// ---------------------------------------------------------------------------
// Moore-Penrose pseudoinverse (SVD route)
// ---------------------------------------------------------------------------

inline Matrix pseudoinverse(const Matrix& a) {
  if (a.rows() == 0 || a.cols() == 0) return Matrix(a.cols(), a.rows());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = std::numeric_limits<double>::epsilon() *
                     static_cast<double>(std::max(a.rows(), a.cols())) *
                     (sv.size() > 0 ? sv[0] : 0.0);
  Vector inv = sv;
  for (Index i = 0; i < inv.size(); ++i)
    inv[i] = sv[i] > tol ? 1.0 / sv[i] : 0.0;
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

// Minimum-norm least squares solution of A x = b.
inline Vector pinv_solve(const Matrix& a, const Vector& b) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = std::numeric_limits<double>::epsilon() *
                     static_cast<double>(std::max(a.rows(), a.cols())) *
                     (sv.size() > 0 ? sv[0] : 0.0);
  Vector t = svd.matrixU().transpose() * b;
  for (Index i = 0; i < sv.size(); ++i)
    t[i] = sv[i] > tol ? t[i] / sv[i] : 0.0;
  return svd.matrixV() * t;
}

// ---------------------------------------------------------------------------
// Principal components
// ---------------------------------------------------------------------------

struct PcaResult {
  Matrix loadings;  // P x r
  Matrix scores;    // N x r
};

// PCA of an already-centered (typically standardized) matrix. Sign fix:
// within each component the largest-magnitude loading is made positive, so
// factor extraction is deterministic.
inline PcaResult pca(const Matrix& x, int r) {
  require(r >= 1, "pca: need at least one component");
  require(r <= std::min(x.rows(), x.cols()),
          "pca: more components than min(N, P)");
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  PcaResult out;
  out.loadings = svd.matrixV().leftCols(r);
  for (Index k = 0; k < r; ++k) {
    Index imax = 0;
    out.loadings.col(k).cwiseAbs().maxCoeff(&imax);
    if (out.loadings(imax, k) < 0.0) out.loadings.col(k) *= -1.0;
  }
  out.scores = x * out.loadings;
  return out;
}

}  // namespace dualcast
