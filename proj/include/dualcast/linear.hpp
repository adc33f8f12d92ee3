#pragma once

#include <vector>

#include "dualcast/common.hpp"
#include "dualcast/kernels.hpp"
#include "dualcast/linalg.hpp"

namespace dualcast {

// ---------------------------------------------------------------------------
// Ridge regression, fit through both routes
//
// Primal:  beta = (X'X + lambda I_P)^{-1} X'y
// Dual:    beta = X' (XX' + lambda I_N)^{-1} y = X' alpha
//
// Both are stored; they must agree to numerical precision, which the tests
// assert. At lambda = 0 the minimum-norm least squares solution is used, so
// rank-deficient designs stay well defined on both routes.
// ---------------------------------------------------------------------------

struct RidgeModel {
  Vector beta;   // primal coefficients
  Vector alpha;  // dual coefficients
  double lambda = 0.0;
  Matrix x_train;

  double predict(const Vector& x_j) const { return x_j.dot(beta); }

  // w_j = X_j X' (XX' + lambda I)^{-1}
  Vector weights(const Vector& x_j) const {
    return krr_weights(x_train * x_j, gram_cache(), lambda);
  }

  Matrix weight_panel(const Matrix& x_test) const {
    return krr_weight_panel(x_test * x_train.transpose(), gram_cache(),
                            lambda);
  }

  const Matrix& gram_cache() const {
    if (gram_.size() == 0) gram_ = x_train * x_train.transpose();
    return gram_;
  }

 private:
  mutable Matrix gram_;
};

// Primal-only coefficient computation, choosing the cheaper route by shape.
// Used in cross-validation loops where the dual copy is not needed.
inline Vector ridge_beta(const Matrix& x, const Vector& y, double lambda) {
  if (lambda <= 0.0) return pinv_solve(x, y);
  if (x.cols() <= x.rows()) {
    const Matrix xtx = x.transpose() * x;
    return solve_regularized(xtx, x.transpose() * y, lambda);
  }
  const Matrix xxt = x * x.transpose();
  return x.transpose() * solve_regularized(xxt, y, lambda);
}

inline RidgeModel ridge_fit(const Matrix& x, const Vector& y, double lambda) {
  require(all_finite(x) && y.allFinite(), "ridge_fit: non-finite inputs");
  require(x.rows() == y.size(), "ridge_fit: X and y row counts disagree");
  require(lambda >= 0.0, "ridge_fit: lambda must be >= 0");

  RidgeModel m;
  m.lambda = lambda;
  m.x_train = x;
  if (lambda <= 0.0) {
    m.beta = pinv_solve(x, y);
    m.alpha = pseudoinverse(x * x.transpose()) * y;
  } else {
    const Matrix xtx = x.transpose() * x;
    m.beta = solve_regularized(xtx, x.transpose() * y, lambda);
    const Matrix xxt = x * x.transpose();
    m.alpha = solve_regularized(xxt, y, lambda);
  }
  return m;
}

inline Vector ridge_weights(const Vector& x_j, const RidgeModel& model) {
  require(x_j.size() == model.x_train.cols(),
          "ridge_weights: feature dimension mismatch");
  return model.weights(x_j);
}

// ---------------------------------------------------------------------------
// OLS dual weights via the Moore-Penrose pseudoinverse
//
// w_j = Z_j Z' (ZZ')^+, valid at any rank; w_j . y reproduces the OLS
// prediction Z_j (Z'Z)^+ Z'y.
// ---------------------------------------------------------------------------

inline Vector ols_dual_weights(const Vector& z_j, const Matrix& z,
                               const Vector& y) {
  require(z_j.size() == z.cols(), "ols_dual_weights: dimension mismatch");
  (void)y;  // part of the operation signature; weights do not depend on y
  const Matrix gram = z * z.transpose();
  return pseudoinverse(gram) * (z * z_j);
}

// ---------------------------------------------------------------------------
// Factor-augmented autoregression
//
// OLS of the target on [intercept, own lags, current + lagged principal
// component factors]. The first (f_lags - 1) dataset rows are consumed by
// the factor lag shift.
// ---------------------------------------------------------------------------

struct FaarModel {
  Matrix pca_loadings;  // P x r
  Vector coefficients;  // 1 + y_lags + r * f_lags
  Matrix z;             // regressor matrix actually used in the fit
  Vector y_used;
  std::vector<Index> target_lag_cols;
  int factors = 4;
  int y_lags = 4;
  int f_lags = 2;

  // Builds the regressor row for a forecast origin. `window` holds feature
  // rows for dates t-f_lags+1 .. t (last row = the origin).
  Vector design_row(const Matrix& window) const {
    require(window.rows() >= f_lags,
            "faar design_row: window must hold f_lags rows");
    require(window.cols() == pca_loadings.rows(),
            "faar design_row: feature dimension mismatch");
    Vector z_j(1 + y_lags + static_cast<Index>(factors) * f_lags);
    Index c = 0;
    z_j[c++] = 1.0;
    const Index t = window.rows() - 1;
    for (int k = 0; k < y_lags; ++k)
      z_j[c++] = window(t, target_lag_cols[static_cast<std::size_t>(k)]);
    for (int l = 0; l < f_lags; ++l) {
      const Vector scores = (window.row(t - l) * pca_loadings).transpose();
      for (int f = 0; f < factors; ++f) z_j[c++] = scores[f];
    }
    return z_j;
  }

  double predict(const Matrix& window) const {
    return design_row(window).dot(coefficients);
  }

  Vector weights(const Matrix& window) const {
    return ols_dual_weights(design_row(window), z, y_used);
  }
};

// `target_lag_cols` are the X columns holding the target's own lag block
// (most recent first); at least y_lags of them are required.
inline FaarModel faar_fit(const Matrix& x, const Vector& y,
                          const std::vector<Index>& target_lag_cols,
                          int factors = 4, int y_lags = 4, int f_lags = 2) {
  require(factors >= 1 && y_lags >= 1 && f_lags >= 1,
          "faar_fit: counts must be positive");
  require(static_cast<int>(target_lag_cols.size()) >= y_lags,
          "faar_fit: need at least y_lags target lag columns");
  const Index n = x.rows();
  const Index n_eff = n - (f_lags - 1);
  require(n_eff > static_cast<Index>(factors) * f_lags + y_lags + 1,
          "faar_fit: insufficient rows");

  FaarModel m;
  m.factors = factors;
  m.y_lags = y_lags;
  m.f_lags = f_lags;
  m.target_lag_cols = target_lag_cols;
  m.pca_loadings = pca(x, factors).loadings;

  m.z.resize(n_eff, 1 + y_lags + static_cast<Index>(factors) * f_lags);
  m.y_used.resize(n_eff);
  for (Index r = 0; r < n_eff; ++r) {
    const Index t = r + (f_lags - 1);
    m.z.row(r) =
        m.design_row(x.middleRows(t - (f_lags - 1), f_lags)).transpose();
    m.y_used[r] = y[t];
  }
  m.coefficients = pinv_solve(m.z, m.y_used);
  return m;
}

// ---------------------------------------------------------------------------
// Block out-of-bag cross-validation
// ---------------------------------------------------------------------------

struct BlockBag {
  std::vector<int> in_bag;
  std::vector<int> out_of_bag;
};

// Splits rows into contiguous blocks of `block_len`, then samples a fraction
// of blocks per bag. Each bag gets its own derived seed, so evaluation order
// does not matter.
inline std::vector<BlockBag> block_bags(int n_rows, int n_bags,
                                        double bag_rate, int block_len,
                                        std::uint64_t seed) {
  require(block_len >= 1, "block_bags: block_len must be >= 1");
  require(block_len <= n_rows, "block_bags: block_len exceeds row count");
  require(n_bags >= 1, "block_bags: need at least one bag");
  require(bag_rate > 0.0 && bag_rate < 1.0,
          "block_bags: bag_rate must lie in (0, 1)");
  const int n_blocks = (n_rows + block_len - 1) / block_len;
  require(n_blocks >= 2, "block_bags: need at least 2 blocks");
  int take = static_cast<int>(std::round(bag_rate * n_blocks));
  take = std::clamp(take, 1, n_blocks - 1);

  std::vector<BlockBag> bags(static_cast<std::size_t>(n_bags));
  for (int b = 0; b < n_bags; ++b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    std::vector<int> blocks(static_cast<std::size_t>(n_blocks));
    for (int i = 0; i < n_blocks; ++i) blocks[static_cast<std::size_t>(i)] = i;
    rng.shuffle(blocks);
    std::vector<bool> in(static_cast<std::size_t>(n_blocks), false);
    for (int i = 0; i < take; ++i) in[static_cast<std::size_t>(blocks[static_cast<std::size_t>(i)])] = true;
    auto& bag = bags[static_cast<std::size_t>(b)];
    for (int r = 0; r < n_rows; ++r) {
      if (in[static_cast<std::size_t>(r / block_len)])
        bag.in_bag.push_back(r);
      else
        bag.out_of_bag.push_back(r);
    }
  }
  return bags;
}

inline Matrix select_rows(const Matrix& x, const std::vector<int>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  return out;
}

inline Vector select_rows(const Vector& y, const std::vector<int>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[static_cast<Index>(i)] = y[rows[i]];
  return out;
}

// 50 log-spaced penalties from heavy to minimal shrinkage.
inline std::vector<double> default_lambda_grid(int points = 50,
                                               double lo = 1e-4,
                                               double hi = 1e6) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] =
        lo * std::pow(hi / lo, points == 1 ? 0.0
                                           : static_cast<double>(i) /
                                                 (points - 1));
  return grid;
}

// Ridge penalty selection: argmin of average out-of-bag squared error over
// block bags. Validation losses are averaged across bags; ties keep the
// earliest grid entry.
inline double cross_validate_lambda(const Matrix& x, const Vector& y,
                                    const std::vector<double>& grid,
                                    int n_bags = 100, double bag_rate = 0.8,
                                    int block_len = 8,
                                    std::uint64_t seed = 0) {
  require(!grid.empty(), "cross_validate_lambda: empty grid");
  if (grid.size() == 1) return grid[0];
  const auto bags =
      block_bags(static_cast<int>(x.rows()), n_bags, bag_rate, block_len, seed);

  Matrix losses(static_cast<Index>(bags.size()),
                static_cast<Index>(grid.size()));
  parallel_for(static_cast<int>(bags.size()), [&](int b) {
    const auto& bag = bags[static_cast<std::size_t>(b)];
    const Matrix x_in = select_rows(x, bag.in_bag);
    const Vector y_in = select_rows(y, bag.in_bag);
    const Matrix x_out = select_rows(x, bag.out_of_bag);
    const Vector y_out = select_rows(y, bag.out_of_bag);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const Vector beta = ridge_beta(x_in, y_in, grid[g]);
      losses(b, static_cast<Index>(g)) =
          (x_out * beta - y_out).squaredNorm() /
          static_cast<double>(y_out.size());
    }
  });

  const Vector avg = losses.colwise().mean();
  Index best = 0;
  avg.minCoeff(&best);
  return grid[static_cast<std::size_t>(best)];
}

}  // namespace dualcast
