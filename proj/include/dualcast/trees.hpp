#pragma once

#include <map>
#include <queue>
#include <vector>

#include "dualcast/common.hpp"

namespace dualcast {

// ---------------------------------------------------------------------------
// CART regression tree
//
// Greedy variance-reduction splits, expanded best-first. Determinism: split
// ties are broken by lowest feature index, then lowest threshold; candidate
// features are drawn per node from the supplied generator.
// ---------------------------------------------------------------------------

struct TreeParams {
  int min_node = 5;  // smallest parent size eligible for a new split
  double mtry_fraction = 1.0;
  int max_depth = -1;  // -1 = unlimited
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int depth = 0;
  double value = 0.0;        // leaf mean of member targets
  std::vector<int> members;  // leaf member rows (ids as passed to fit)

  bool is_leaf() const { return feature < 0; }
};

class Tree {
 public:
  void fit(const Matrix& x, const Vector& y, const std::vector<int>& rows,
           const TreeParams& params, Rng& rng) {
    require(!rows.empty(), "tree fit: empty row set");
    nodes_.clear();
    nodes_.push_back(make_node(y, rows, 0));

    struct Candidate {
      double gain;
      int order;
      int node;
      int feature;
      double threshold;
      std::vector<int> left_rows;
      std::vector<int> right_rows;
      bool operator<(const Candidate& o) const {
        // priority_queue is a max-heap; prefer higher gain, then earlier node
        if (gain != o.gain) return gain < o.gain;
        return order > o.order;
      }
    };
    std::priority_queue<Candidate> queue;
    int order = 0;

    const auto consider = [&](int node_id) {
      const auto& node = nodes_[static_cast<std::size_t>(node_id)];
      if (static_cast<int>(node.members.size()) < params.min_node) return;
      if (params.max_depth >= 0 && node.depth >= params.max_depth) return;
      Candidate c;
      if (!best_split(x, y, node.members, params, rng, c.feature, c.threshold,
                      c.gain, c.left_rows, c.right_rows))
        return;
      c.node = node_id;
      c.order = order++;
      queue.push(std::move(c));
    };

    consider(0);
    while (!queue.empty()) {
      Candidate c = queue.top();
      queue.pop();
      auto& node = nodes_[static_cast<std::size_t>(c.node)];
      node.feature = c.feature;
      node.threshold = c.threshold;
      const int depth = node.depth;
      node.members.clear();
      node.members.shrink_to_fit();

      const int left_id = static_cast<int>(nodes_.size());
      nodes_.push_back(make_node(y, c.left_rows, depth + 1));
      const int right_id = static_cast<int>(nodes_.size());
      nodes_.push_back(make_node(y, c.right_rows, depth + 1));
      nodes_[static_cast<std::size_t>(c.node)].left = left_id;
      nodes_[static_cast<std::size_t>(c.node)].right = right_id;
      consider(left_id);
      consider(right_id);
    }
  }

  int leaf_id(const Eigen::Ref<const Vector>& x) const {
    int id = 0;
    while (!nodes_[static_cast<std::size_t>(id)].is_leaf()) {
      const auto& n = nodes_[static_cast<std::size_t>(id)];
      id = x[n.feature] < n.threshold ? n.left : n.right;
    }
    return id;
  }

  double predict(const Eigen::Ref<const Vector>& x) const {
    return nodes_[static_cast<std::size_t>(leaf_id(x))].value;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int id) const {
    return nodes_[static_cast<std::size_t>(id)];
  }

  std::vector<int> leaf_ids() const {
    std::vector<int> out;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].is_leaf()) out.push_back(static_cast<int>(i));
    return out;
  }

 private:
  static TreeNode make_node(const Vector& y, std::vector<int> rows,
                            int depth) {
    std::sort(rows.begin(), rows.end());
    TreeNode n;
    n.depth = depth;
    double sum = 0.0;
    for (int r : rows) sum += y[r];
    n.value = sum / static_cast<double>(rows.size());
    n.members = std::move(rows);
    return n;
  }

  // Exhaustive scan over (feature subset, midpoint thresholds) maximizing the
  // split's sum-of-squares improvement. Pure nodes and gainless scans report
  // no split.
  static bool best_split(const Matrix& x, const Vector& y,
                         const std::vector<int>& rows,
                         const TreeParams& params, Rng& rng, int& feature,
                         double& threshold, double& gain,
                         std::vector<int>& left_rows,
                         std::vector<int>& right_rows) {
    const int m = static_cast<int>(rows.size());
    if (m < 2) return false;
    double ymin = y[rows[0]], ymax = y[rows[0]];
    double total = 0.0;
    for (int r : rows) {
      ymin = std::min(ymin, y[r]);
      ymax = std::max(ymax, y[r]);
      total += y[r];
    }
    if (ymin == ymax) return false;  // pure node

    const int p = static_cast<int>(x.cols());
    int mtry = static_cast<int>(std::llround(params.mtry_fraction * p));
    mtry = std::clamp(mtry, 1, p);
    const std::vector<int> features =
        mtry == p ? all_indices(p) : rng.sample_without_replacement(p, mtry);

    gain = 0.0;
    feature = -1;
    std::vector<std::pair<double, int>> vals(static_cast<std::size_t>(m));
    int best_count = 0;
    for (int f : features) {
      for (int i = 0; i < m; ++i)
        vals[static_cast<std::size_t>(i)] = {x(rows[static_cast<std::size_t>(i)], f),
                                             rows[static_cast<std::size_t>(i)]};
      std::sort(vals.begin(), vals.end());
      double left_sum = 0.0;
      for (int k = 0; k + 1 < m; ++k) {
        left_sum += y[vals[static_cast<std::size_t>(k)].second];
        if (vals[static_cast<std::size_t>(k)].first ==
            vals[static_cast<std::size_t>(k + 1)].first)
          continue;
        const int nl = k + 1;
        const int nr = m - nl;
        const double right_sum = total - left_sum;
        const double g = left_sum * left_sum / nl +
                         right_sum * right_sum / nr - total * total / m;
        if (g > gain) {
          gain = g;
          feature = f;
          threshold = 0.5 * (vals[static_cast<std::size_t>(k)].first +
                             vals[static_cast<std::size_t>(k + 1)].first);
          best_count = nl;
        }
      }
    }
    if (feature < 0 || gain <= 0.0) return false;

    left_rows.clear();
    right_rows.clear();
    left_rows.reserve(static_cast<std::size_t>(best_count));
    for (int r : rows) {
      if (x(r, feature) < threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    return !left_rows.empty() && !right_rows.empty();
  }

  static std::vector<int> all_indices(int p) {
    std::vector<int> v(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
  }

  std::vector<TreeNode> nodes_;
};

// ---------------------------------------------------------------------------
// Random forest
// ---------------------------------------------------------------------------

struct ForestParams {
  int n_trees = 500;
  double subsample = 0.75;  // fraction of row blocks per tree
  int block_len = 8;        // contiguous rows per subsampling block
  double mtry_fraction = 1.0 / 3.0;
  int min_node = 5;
  int max_depth = -1;
  std::uint64_t seed = 0;
};

// Contiguous-block row subsampling; returns sorted global row ids.
inline std::vector<int> block_subsample(int n_rows, int block_len,
                                        double fraction, Rng& rng) {
  require(block_len >= 1 && block_len <= n_rows,
          "block_subsample: bad block length");
  const int n_blocks = (n_rows + block_len - 1) / block_len;
  int take = static_cast<int>(std::llround(fraction * n_blocks));
  take = std::clamp(take, 1, n_blocks);
  const std::vector<int> blocks = rng.sample_without_replacement(n_blocks, take);
  std::vector<int> rows;
  for (int b : blocks)
    for (int r = b * block_len; r < std::min((b + 1) * block_len, n_rows); ++r)
      rows.push_back(r);
  return rows;
}

class ForestModel {
 public:
  ForestParams params;
  std::vector<Tree> trees;
  std::vector<std::vector<int>> tree_rows;  // per-tree subsample record
  Index n_train = 0;

  double predict(const Eigen::Ref<const Vector>& x) const {
    double acc = 0.0;
    for (const auto& t : trees) acc += t.predict(x);
    return acc / static_cast<double>(trees.size());
  }

  // Leaf-vote weights: each tree casts 1/leaf_size on the members of the
  // leaf x falls into; votes are averaged across trees. Nonnegative and
  // summing to one by construction.
  Vector weights(const Eigen::Ref<const Vector>& x) const {
    Vector w = Vector::Zero(n_train);
    const double scale = 1.0 / static_cast<double>(trees.size());
    for (const auto& t : trees) {
      const auto& leaf = t.node(t.leaf_id(x));
      const double vote = scale / static_cast<double>(leaf.members.size());
      for (int r : leaf.members) w[r] += vote;
    }
    return w;
  }

  Matrix weight_panel(const Matrix& x_test) const {
    Matrix w(x_test.rows(), n_train);
    for (Index j = 0; j < x_test.rows(); ++j)
      w.row(j) = weights(x_test.row(j).transpose()).transpose();
    return w;
  }
};

inline ForestModel rf_fit(const Matrix& x, const Vector& y,
                          const ForestParams& params) {
  require(x.rows() == y.size(), "rf_fit: X and y row counts disagree");
  require(params.n_trees >= 1, "rf_fit: need at least one tree");
  ForestModel forest;
  forest.params = params;
  forest.n_train = x.rows();
  forest.trees.resize(static_cast<std::size_t>(params.n_trees));
  forest.tree_rows.resize(static_cast<std::size_t>(params.n_trees));

  TreeParams tp;
  tp.min_node = params.min_node;
  tp.mtry_fraction = params.mtry_fraction;
  tp.max_depth = params.max_depth;

  parallel_for(params.n_trees, [&](int b) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(b)));
    auto rows = block_subsample(static_cast<int>(x.rows()), params.block_len,
                                params.subsample, rng);
    forest.trees[static_cast<std::size_t>(b)].fit(x, y, rows, tp, rng);
    forest.tree_rows[static_cast<std::size_t>(b)] = std::move(rows);
  });
  return forest;
}

// ---------------------------------------------------------------------------
// Least-squares gradient boosting with instance-weight recovery
//
// Trees are fit sequentially to pseudo-residuals. Alongside the fit we run
// the weight recursion: with W_s the matrix whose rows reproduce stage-s
// in-sample fitted values (y_hat_s = W_s y, W_0 uniform), each leaf of tree
// s contributes the increment
//
//   r_leaf = nu * mean over in-subsample leaf members of rows of (I - W_{s-1})
//
// to every point routed into that leaf. A test point's weight vector is the
// uniform base plus its routed leaf increments, and reproduces the ensemble
// prediction exactly; the per-stage residual of that identity is recorded.
// ---------------------------------------------------------------------------

struct GbtParams {
  int n_trees = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double subsample = 1.0;  // iid row fraction per stage
  double mtry_fraction = 1.0;
  int min_node = 1;
  std::uint64_t seed = 0;
};

class GbtModel {
 public:
  GbtParams params;
  double base = 0.0;  // training mean, the explicit first stage
  std::vector<Tree> trees;
  std::vector<std::vector<int>> stage_rows;    // per-stage subsample record
  std::vector<std::vector<int>> leaf_of_row;   // per stage, per training row
  Vector fitted;                               // final in-sample fit
  Vector staged_identity_error;                // per stage, max abs
  Index n_train = 0;

  double predict(const Eigen::Ref<const Vector>& x) const {
    double acc = base;
    for (const auto& t : trees) acc += params.learning_rate * t.predict(x);
    return acc;
  }

  Vector weights(const Eigen::Ref<const Vector>& x) const {
    Vector w = Vector::Constant(n_train, 1.0 / static_cast<double>(n_train));
    for (std::size_t s = 0; s < trees.size(); ++s) {
      const int leaf = trees[s].leaf_id(x);
      w += leaf_increment_.at(s).at(leaf);
    }
    return w;
  }

  Matrix weight_panel(const Matrix& x_test) const {
    Matrix w(x_test.rows(), n_train);
    for (Index j = 0; j < x_test.rows(); ++j)
      w.row(j) = weights(x_test.row(j).transpose()).transpose();
    return w;
  }

  // In-sample weight matrix after `upto_stage` trees (rows are per-row
  // weight vectors; `upto_stage` = 0 gives the uniform base).
  Matrix insample_weight_matrix(int upto_stage) const {
    require(upto_stage >= 0 && upto_stage <= static_cast<int>(trees.size()),
            "insample_weight_matrix: stage out of range");
    Matrix w = Matrix::Constant(n_train, n_train,
                                1.0 / static_cast<double>(n_train));
    for (int s = 0; s < upto_stage; ++s)
      for (Index i = 0; i < n_train; ++i)
        w.row(i) += leaf_increment_.at(static_cast<std::size_t>(s))
                        .at(leaf_of_row[static_cast<std::size_t>(s)]
                                       [static_cast<std::size_t>(i)])
                        .transpose();
    return w;
  }

  // Direct staged in-sample predictions (base + nu * sum of tree values).
  Vector staged_fitted(int upto_stage) const {
    require(upto_stage >= 0 && upto_stage <= static_cast<int>(trees.size()),
            "staged_fitted: stage out of range");
    Vector f = Vector::Constant(n_train, base);
    for (int s = 0; s < upto_stage; ++s)
      for (Index i = 0; i < n_train; ++i)
        f[i] += params.learning_rate *
                trees[static_cast<std::size_t>(s)]
                    .node(leaf_of_row[static_cast<std::size_t>(s)]
                                     [static_cast<std::size_t>(i)])
                    .value;
    return f;
  }

  friend GbtModel gbt_fit(const Matrix&, const Vector&, const GbtParams&);

 private:
  // per stage: leaf id -> weight-vector increment for points in that leaf
  std::vector<std::map<int, Vector>> leaf_increment_;
};

inline GbtModel gbt_fit(const Matrix& x, const Vector& y,
                        const GbtParams& params) {
  require(x.rows() == y.size(), "gbt_fit: X and y row counts disagree");
  require(params.n_trees >= 1, "gbt_fit: need at least one tree");
  require(params.learning_rate >= 0.0 && params.learning_rate <= 1.0,
          "gbt_fit: learning rate must lie in [0, 1]");
  const Index n = x.rows();

  GbtModel model;
  model.params = params;
  model.n_train = n;
  model.base = y.mean();
  model.fitted = Vector::Constant(n, model.base);
  model.staged_identity_error.resize(params.n_trees);

  Matrix w = Matrix::Constant(n, n, 1.0 / static_cast<double>(n));
  Rng root(params.seed);
  const double nu = params.learning_rate;

  TreeParams tp;
  tp.min_node = params.min_node;
  tp.mtry_fraction = params.mtry_fraction;
  tp.max_depth = params.max_depth;

  for (int s = 0; s < params.n_trees; ++s) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(s) + 1));
    std::vector<int> rows;
    if (params.subsample >= 1.0) {
      rows.resize(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
    } else {
      int k = static_cast<int>(std::llround(params.subsample * static_cast<double>(n)));
      k = std::clamp(k, 2, static_cast<int>(n));
      rows = rng.sample_without_replacement(static_cast<int>(n), k);
    }

    const Vector resid = y - model.fitted;
    Tree tree;
    tree.fit(x, resid, rows, tp, rng);

    std::vector<int> leaves(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i)
      leaves[static_cast<std::size_t>(i)] = tree.leaf_id(x.row(i).transpose());

    std::map<int, Vector> increments;
    for (int leaf : tree.leaf_ids()) {
      const auto& members = tree.node(leaf).members;
      Vector r = Vector::Zero(n);
      const double inv = 1.0 / static_cast<double>(members.size());
      for (int m : members) {
        r[m] += nu * inv;
        r -= (nu * inv) * w.row(m).transpose();
      }
      increments.emplace(leaf, std::move(r));
    }

    for (Index i = 0; i < n; ++i) {
      const int leaf = leaves[static_cast<std::size_t>(i)];
      model.fitted[i] += nu * tree.node(leaf).value;
    }
    Matrix w_next = w;
    for (Index i = 0; i < n; ++i)
      w_next.row(i) +=
          increments.at(leaves[static_cast<std::size_t>(i)]).transpose();
    w.swap(w_next);

    model.staged_identity_error[s] =
        (w * y - model.fitted).cwiseAbs().maxCoeff();

    model.trees.push_back(std::move(tree));
    model.stage_rows.push_back(std::move(rows));
    model.leaf_of_row.push_back(std::move(leaves));
    model.leaf_increment_.push_back(std::move(increments));
  }
  return model;
}

}  // namespace dualcast
