#pragma once

#include <cmath>
#include <string>

#include "dualcast/common.hpp"
#include "dualcast/linalg.hpp"

namespace dualcast {

// ---------------------------------------------------------------------------
// Kernel specification
// ---------------------------------------------------------------------------

enum class KernelFamily { linear, polynomial, gaussian, laplacian };

struct KernelSpec {
  KernelFamily family = KernelFamily::linear;
  int degree = 2;          // polynomial
  double offset = 1.0;     // polynomial
  double bandwidth = 0.0;  // gaussian / laplacian; <= 0 means "use median heuristic"

  static KernelSpec linear() { return {}; }
  static KernelSpec polynomial(int degree, double offset = 1.0) {
    require(degree >= 1, "polynomial degree must be >= 1");
    return {KernelFamily::polynomial, degree, offset, 0.0};
  }
  static KernelSpec gaussian(double bandwidth = 0.0) {
    return {KernelFamily::gaussian, 2, 1.0, bandwidth};
  }
  static KernelSpec laplacian(double bandwidth = 0.0) {
    return {KernelFamily::laplacian, 2, 1.0, bandwidth};
  }

  bool needs_bandwidth() const {
    return family == KernelFamily::gaussian ||
           family == KernelFamily::laplacian;
  }

  std::string name() const {
    switch (family) {
      case KernelFamily::linear: return "linear";
      case KernelFamily::polynomial: return "polynomial";
      case KernelFamily::gaussian: return "gaussian";
      case KernelFamily::laplacian: return "laplacian";
    }
    return "?";
  }
};

inline KernelSpec kernel_from_string(const std::string& s) {
  if (s == "linear") return KernelSpec::linear();
  if (s == "polynomial") return KernelSpec::polynomial(2);
  if (s == "gaussian") return KernelSpec::gaussian();
  if (s == "laplacian") return KernelSpec::laplacian();
  fail("unknown kernel family '" + s + "'");
}

// Median pairwise Euclidean distance over rows, the usual bandwidth default
// when none is supplied.
inline double median_pairwise_distance(const Matrix& x) {
  const Index n = x.rows();
  require(n >= 2, "median_pairwise_distance needs at least 2 rows");
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      d.push_back((x.row(i) - x.row(j)).norm());
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  const double med = d[d.size() / 2];
  return med > 0.0 ? med : 1.0;
}

inline KernelSpec resolve_bandwidth(KernelSpec spec, const Matrix& x_train) {
  if (spec.needs_bandwidth() && spec.bandwidth <= 0.0)
    spec.bandwidth = median_pairwise_distance(x_train);
  return spec;
}

inline double kernel_eval(const KernelSpec& spec,
                          const Eigen::Ref<const Vector>& a,
                          const Eigen::Ref<const Vector>& b) {
  switch (spec.family) {
    case KernelFamily::linear:
      return a.dot(b);
    case KernelFamily::polynomial:
      return std::pow(spec.offset + a.dot(b), spec.degree);
    case KernelFamily::gaussian: {
      require(spec.bandwidth > 0.0, "gaussian kernel needs bandwidth > 0");
      const double d2 = (a - b).squaredNorm();
      return std::exp(-d2 / (2.0 * spec.bandwidth * spec.bandwidth));
    }
    case KernelFamily::laplacian: {
      require(spec.bandwidth > 0.0, "laplacian kernel needs bandwidth > 0");
      return std::exp(-(a - b).norm() / spec.bandwidth);
    }
  }
  fail("unreachable kernel family");
}

// ---------------------------------------------------------------------------
// Gram matrices
// ---------------------------------------------------------------------------

// N x N matrix of pairwise kernel evaluations; exact symmetry enforced by
// averaging with the transpose.
inline Matrix gram(const Matrix& x, const KernelSpec& spec) {
  require(all_finite(x), "gram: non-finite entries");
  const Index n = x.rows();
  Matrix k(n, n);
  switch (spec.family) {
    case KernelFamily::linear:
      k = x * x.transpose();
      break;
    case KernelFamily::polynomial:
      k = ((x * x.transpose()).array() + spec.offset).pow(spec.degree);
      break;
    default:
      for (Index i = 0; i < n; ++i)
        for (Index j = i; j < n; ++j)
          k(i, j) = k(j, i) = kernel_eval(spec, x.row(i), x.row(j));
      break;
  }
  k = 0.5 * (k + k.transpose()).eval();
  return k;
}

// J x N matrix whose row j holds the proximity scores of test row j against
// every training row.
inline Matrix cross_gram(const Matrix& x_test, const Matrix& x_train,
                         const KernelSpec& spec) {
  require(x_test.cols() == x_train.cols(),
          "cross_gram: feature dimension mismatch");
  switch (spec.family) {
    case KernelFamily::linear:
      return x_test * x_train.transpose();
    case KernelFamily::polynomial:
      return ((x_test * x_train.transpose()).array() + spec.offset)
          .pow(spec.degree);
    default: {
      Matrix k(x_test.rows(), x_train.rows());
      for (Index j = 0; j < x_test.rows(); ++j)
        for (Index i = 0; i < x_train.rows(); ++i)
          k(j, i) = kernel_eval(spec, x_test.row(j), x_train.row(i));
      return k;
    }
  }
}

// ---------------------------------------------------------------------------
// Kernel ridge regression
// ---------------------------------------------------------------------------

// Dual coefficients solving (K + lambda I) alpha = y.
struct DualCoefficients {
  Vector alpha;
  double lambda = 0.0;
};

inline DualCoefficients krr_fit(const Matrix& k, const Vector& y,
                                double lambda) {
  require(k.rows() == y.size(), "krr_fit: K and y sizes disagree");
  DualCoefficients out;
  out.lambda = lambda;
  out.alpha = solve_regularized(k, y, lambda);
  return out;
}

// Data portfolio weights w_j = K_j (K + lambda I)^{-1} for one test point.
inline Vector krr_weights(const Vector& k_j, const Matrix& k, double lambda) {
  require(k_j.size() == k.rows(), "krr_weights: K_j and K sizes disagree");
  return solve_regularized(k, k_j, lambda);
}

// Row-stacked weights for a whole test window (rows of `k_cross`).
inline Matrix krr_weight_panel(const Matrix& k_cross, const Matrix& k,
                               double lambda) {
  require(k_cross.cols() == k.rows(),
          "krr_weight_panel: cross-Gram and Gram sizes disagree");
  RegularizedSolver solver(k, lambda);
  return solver.solve(Matrix(k_cross.transpose())).transpose();
}

// Bundles a fitted KRR: everything needed to predict and to emit weights.
struct KrrModel {
  KernelSpec spec;
  Matrix x_train;
  Matrix k;
  DualCoefficients coef;

  double predict(const Vector& x_j) const {
    Matrix xj(1, x_j.size());
    xj.row(0) = x_j;
    return (cross_gram(xj, x_train, spec) * coef.alpha)(0);
  }
  Vector weights(const Vector& x_j) const {
    Matrix xj(1, x_j.size());
    xj.row(0) = x_j;
    const Matrix kj = cross_gram(xj, x_train, spec);
    return krr_weights(kj.row(0).transpose(), k, coef.lambda);
  }
};

inline KrrModel krr_model_fit(const Matrix& x, const Vector& y,
                              KernelSpec spec, double lambda) {
  KrrModel m;
  m.spec = resolve_bandwidth(spec, x);
  m.x_train = x;
  m.k = gram(x, m.spec);
  m.coef = krr_fit(m.k, y, lambda);
  return m;
}

// ---------------------------------------------------------------------------
// One-observation geometry
// ---------------------------------------------------------------------------

// Decomposition of the single-training-point weight into an angle and a
// norm ratio. With lambda > 0 the training norm is inflated by
// sqrt(1 + lambda / <x1, x1>) in both factors, which shrinks the weight
// toward zero while keeping w2 = cos(gamma) * ratio an identity.
struct CosineDecomposition {
  double cos_gamma = 0.0;
  double angle_degrees = 90.0;
  double norm_ratio = 0.0;
  double weight = 0.0;
};

inline CosineDecomposition cosine_decomposition(const Vector& x1,
                                                const Vector& x2,
                                                double lambda = 0.0) {
  require(x1.size() == x2.size(), "cosine_decomposition: size mismatch");
  const double n1sq = x1.squaredNorm();
  require(n1sq > 0.0, "cosine_decomposition: zero training vector");
  require(lambda >= 0.0, "cosine_decomposition: lambda must be >= 0");
  const double inflated = std::sqrt(n1sq + lambda);
  const double n2 = x2.norm();

  CosineDecomposition out;
  out.norm_ratio = n2 / inflated;
  if (n2 > 0.0) {
    out.cos_gamma = x1.dot(x2) / (n2 * inflated);
    out.angle_degrees =
        std::acos(std::clamp(out.cos_gamma, -1.0, 1.0)) * 180.0 / M_PI;
  }
  out.weight = out.cos_gamma * out.norm_ratio;
  return out;
}

}  // namespace dualcast
