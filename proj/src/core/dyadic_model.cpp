#include "clab/dyadic_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "clab/error.hpp"
#include "clab/rng.hpp"

namespace clab {

DyadicWeightedTree::DyadicWeightedTree(int depth, std::vector<double> leaf_values, double root_length)
    : depth_(depth), root_length_(root_length), leaves_(std::move(leaf_values)) {
  if (depth < 0 || depth > 30) fail(ErrorKind::InvalidArgument, "tree depth must lie in 0..30");
  if (!(root_length > 0.0)) fail(ErrorKind::InvalidArgument, "root_length must be positive");
  if (leaves_.size() != (std::size_t{1} << depth)) {
    std::ostringstream os;
    os << "depth " << depth << " needs " << (std::size_t{1} << depth) << " leaf values, got "
       << leaves_.size();
    fail(ErrorKind::InvalidArgument, os.str());
  }
  for (double v : leaves_)
    if (!(v >= 0.0) || !std::isfinite(v)) fail(ErrorKind::InvalidArgument, "leaf values must be finite and nonnegative");
  weights_.assign(static_cast<std::size_t>(depth) + 1, {});
  for (int k = 0; k <= depth; ++k) weights_[static_cast<std::size_t>(k)].assign(level_size(k), 0.0);
}

double DyadicWeightedTree::length(int k) const { return std::ldexp(root_length_, -k); }

void DyadicWeightedTree::check_node(NodeId n) const {
  if (n.k < 0 || n.k > depth_ || n.j < 1 || static_cast<std::size_t>(n.j) > level_size(n.k)) {
    std::ostringstream os;
    os << "node (" << n.k << "," << n.j << ") outside a depth-" << depth_ << " tree";
    fail(ErrorKind::InvalidArgument, os.str());
  }
}

double DyadicWeightedTree::weight(NodeId n) const {
  check_node(n);
  return weights_[static_cast<std::size_t>(n.k)][static_cast<std::size_t>(n.j - 1)];
}

void DyadicWeightedTree::set_weight(NodeId n, double alpha) {
  check_node(n);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) fail(ErrorKind::InvalidArgument, "weights must be finite and nonnegative");
  weights_[static_cast<std::size_t>(n.k)][static_cast<std::size_t>(n.j - 1)] = alpha;
}

double DyadicWeightedTree::total_weight() const {
  double s = 0.0;
  for (const auto& lvl : weights_)
    for (double a : lvl) s += a;
  return s;
}

void DyadicWeightedTree::scale_weights(double t) {
  if (!(t >= 0.0)) fail(ErrorKind::InvalidArgument, "weight scale must be nonnegative");
  for (auto& lvl : weights_)
    for (double& a : lvl) a *= t;
}

namespace {

std::vector<std::vector<double>> pairwise_up(const std::vector<double>& leaves, int depth) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(depth) + 1);
  out[static_cast<std::size_t>(depth)] = leaves;
  for (int k = depth - 1; k >= 0; --k) {
    const auto& below = out[static_cast<std::size_t>(k) + 1];
    auto& lvl = out[static_cast<std::size_t>(k)];
    lvl.resize(below.size() / 2);
    for (std::size_t j = 0; j < lvl.size(); ++j) lvl[j] = 0.5 * (below[2 * j] + below[2 * j + 1]);
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> level_averages(const DyadicWeightedTree& tree) {
  return pairwise_up(tree.leaf_values(), tree.depth());
}

std::vector<std::vector<double>> level_power_averages(const DyadicWeightedTree& tree, const Exponent& p) {
  std::vector<double> pw(tree.leaf_values().size());
  for (std::size_t i = 0; i < pw.size(); ++i) pw[i] = std::pow(tree.leaf_values()[i], p.p());
  return pairwise_up(pw, tree.depth());
}

std::vector<std::vector<double>> subtree_weights(const DyadicWeightedTree& tree) {
  auto out = tree.weights_by_level();
  for (int k = tree.depth() - 1; k >= 0; --k) {
    auto& lvl = out[static_cast<std::size_t>(k)];
    const auto& below = out[static_cast<std::size_t>(k) + 1];
    for (std::size_t j = 0; j < lvl.size(); ++j) lvl[j] += below[2 * j] + below[2 * j + 1];
  }
  return out;
}

double node_average(const DyadicWeightedTree& tree, NodeId n) {
  tree.check_node(n);
  return level_averages(tree)[static_cast<std::size_t>(n.k)][static_cast<std::size_t>(n.j - 1)];
}

double carleson_constant(const DyadicWeightedTree& tree) {
  const auto S = subtree_weights(tree);
  double c = 0.0;
  for (int k = 0; k <= tree.depth(); ++k)
    for (double s : S[static_cast<std::size_t>(k)]) c = std::max(c, s / tree.length(k));
  return c;
}

BellmanPoint node_state(const DyadicWeightedTree& tree, NodeId n, const Exponent& p, double C) {
  tree.check_node(n);
  const auto k = static_cast<std::size_t>(n.k);
  const auto j = static_cast<std::size_t>(n.j - 1);
  BellmanPoint pt;
  pt.F = level_power_averages(tree, p)[k][j];
  pt.f = level_averages(tree)[k][j];
  pt.M = subtree_weights(tree)[k][j] / tree.length(n.k);
  pt.C = C;
  return pt;
}

Json EmbeddingReport::to_json() const {
  return Json{{"embedding_sum", number(embedding_sum)},
              {"carleson_constant", number(carleson_constant)},
              {"lp_norm_p", number(lp_norm_p)},
              {"ratio", number(ratio)},
              {"sharp_constant", number(sharp_constant)},
              {"pass", within_bound()}};
}

EmbeddingReport embedding_sum(const DyadicWeightedTree& tree, const Exponent& p) {
  const auto avg = level_averages(tree);
  const auto& w = tree.weights_by_level();
  EmbeddingReport r;
  for (int k = 0; k <= tree.depth(); ++k) {
    const auto kk = static_cast<std::size_t>(k);
    for (std::size_t j = 0; j < w[kk].size(); ++j) r.embedding_sum += w[kk][j] * std::pow(avg[kk][j], p.p());
  }
  r.carleson_constant = carleson_constant(tree);
  r.lp_norm_p = tree.root_length() * level_power_averages(tree, p)[0][0];
  r.sharp_constant = p.sharp_constant();
  if (r.carleson_constant > 0.0 && r.lp_norm_p > 0.0)
    r.ratio = r.embedding_sum / (r.carleson_constant * r.lp_norm_p);
  return r;
}

Json TelescopingReport::to_json() const {
  Json levels_json = Json::array();
  for (std::size_t n = 0; n < partial_sums.size(); ++n)
    levels_json.push_back({{"n", n}, {"partial_sum", number(partial_sums[n])}, {"bound", number(bounds[n])}});
  return Json{{"C", number(C)},
              {"levels", levels_json},
              {"partial_sum_condition", this->levels.to_json()},
              {"root_bound", number(root_bound)},
              {"final_bound", number(final_bound)},
              {"embedding_sum", number(embedding_sum)},
              {"final_ok", final_ok},
              {"pass", passed()}};
}

TelescopingReport telescoping_check(const DyadicWeightedTree& tree, const Exponent& p,
                                    const BellmanFn& B, double C) {
  const double measured = carleson_constant(tree);
  if (C < 0.0) C = measured;
  if (C < measured - tol::kIdentity) fail(ErrorKind::InvalidArgument, "C below the tree's Carleson constant");
  TelescopingReport r;
  r.C = C;
  const int N = tree.depth();
  const double L = tree.root_length();
  if (!(C > 0.0)) {
    // Zero weights: every side of every inequality vanishes.
    r.partial_sums.assign(static_cast<std::size_t>(N) + 2, 0.0);
    r.bounds.assign(static_cast<std::size_t>(N) + 2, 0.0);
    for (int n = 0; n <= N + 1; ++n) r.levels.observe(0.0, {static_cast<double>(n)});
    r.final_ok = true;
    return r;
  }
  const auto avg = level_averages(tree);
  const auto pav = level_power_averages(tree, p);
  const auto S = subtree_weights(tree);
  const auto& w = tree.weights_by_level();

  auto B_at = [&](int k, std::size_t j) {
    const auto kk = static_cast<std::size_t>(k);
    BellmanPoint pt{pav[kk][j], avg[kk][j], std::min(S[kk][j] / tree.length(k), C), C};
    // pairwise means can leave f^p a rounding error above F
    pt.F = std::max(pt.F, std::pow(pt.f, p.p()));
    return B(pt);
  };
  r.root_bound = L * B_at(0, 0);
  double partial = 0.0;
  for (int n = 0; n <= N + 1; ++n) {
    double level_sum = 0.0;
    if (n <= N) {
      for (std::size_t j = 0; j < tree.level_size(n); ++j) level_sum += tree.length(n) * B_at(n, j);
    } else {
      const double len = tree.length(N) / 2;
      for (double v : tree.leaf_values()) level_sum += 2 * len * B(BellmanPoint{std::pow(v, p.p()), v, 0.0, C});
    }
    const double bound = r.root_bound - level_sum;
    r.partial_sums.push_back(partial);
    r.bounds.push_back(bound);
    r.levels.observe(bound - partial, {static_cast<double>(n)});
    if (n <= N) {
      const auto nn = static_cast<std::size_t>(n);
      for (std::size_t j = 0; j < w[nn].size(); ++j) partial += w[nn][j] * std::pow(avg[nn][j], p.p());
    }
  }
  r.embedding_sum = partial;
  r.final_bound = p.sharp_constant() * C * L * pav[0][0];
  r.final_ok = r.embedding_sum <= r.final_bound + 1e-9 && r.embedding_sum <= r.root_bound + 1e-9;
  return r;
}

TelescopingReport telescoping_check(const DyadicWeightedTree& tree, const Exponent& p, double C) {
  return telescoping_check(tree, p, [&](const BellmanPoint& pt) { return eval_supersolution(pt, p); }, C);
}

DyadicWeightedTree random_tree(Rng& rng, int depth) {
  const std::size_t n = std::size_t{1} << depth;
  std::vector<double> leaves(n);
  const int shape = rng.integer(0, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform();
    switch (shape) {
      case 0: leaves[i] = rng.uniform(0.0, 3.0); break;
      case 1: leaves[i] = u < 0.2 ? rng.uniform(2.0, 10.0) : rng.uniform(0.0, 0.5); break;
      default: leaves[i] = 1.0 / std::sqrt((static_cast<double>(i) + 1.0) / static_cast<double>(n)) * rng.uniform(0.5, 1.0); break;
    }
  }
  DyadicWeightedTree t(depth, std::move(leaves));
  for (int k = 0; k <= depth; ++k)
    for (std::size_t j = 1; j <= t.level_size(k); ++j)
      if (rng.uniform() < 0.6) t.set_weight({k, static_cast<int>(j)}, rng.uniform() * t.length(k));
  if (t.total_weight() == 0.0) t.set_weight({0, 1}, 0.5);
  t.scale_weights(1.0 / carleson_constant(t));
  return t;
}

}  // namespace clab
