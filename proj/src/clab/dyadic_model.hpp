#pragma once

#include <cstddef>
#include <vector>

#include "clab/bellman_core.hpp"
#include "clab/report.hpp"

namespace clab {

class Rng;

// Node I_j^k: level k in 0..N, index j in 1..2^k. Children of (k, j) are
// (k+1, 2j-1) and (k+1, 2j).
struct NodeId {
  int k = 0;
  int j = 1;
  bool operator==(const NodeId&) const = default;
};

// Piecewise-constant f on the 2^N leaves of a dyadic interval, with a
// Carleson weight on every node of levels 0..N.
class DyadicWeightedTree {
 public:
  DyadicWeightedTree() = default;
  DyadicWeightedTree(int depth, std::vector<double> leaf_values, double root_length = 1.0);

  int depth() const { return depth_; }
  double root_length() const { return root_length_; }
  const std::vector<double>& leaf_values() const { return leaves_; }
  std::size_t level_size(int k) const { return std::size_t{1} << k; }
  double length(int k) const;  // |I_j^k|

  double weight(NodeId n) const;
  void set_weight(NodeId n, double alpha);
  // weights_by_level()[k][j-1]
  const std::vector<std::vector<double>>& weights_by_level() const { return weights_; }
  double total_weight() const;
  void scale_weights(double t);

  void check_node(NodeId n) const;

 private:
  int depth_ = 0;
  double root_length_ = 1.0;
  std::vector<double> leaves_{0.0};
  std::vector<std::vector<double>> weights_{{0.0}};
};

// Per-level node averages [k][j-1], built bottom-up by pairwise means so
// that a parent is exactly the mean of its two children.
std::vector<std::vector<double>> level_averages(const DyadicWeightedTree& tree);
std::vector<std::vector<double>> level_power_averages(const DyadicWeightedTree& tree, const Exponent& p);
// Subtree weight sums [k][j-1] (node included).
std::vector<std::vector<double>> subtree_weights(const DyadicWeightedTree& tree);

double node_average(const DyadicWeightedTree& tree, NodeId n);
double carleson_constant(const DyadicWeightedTree& tree);
// Bellman state (<f^p>_J, <f>_J, M_J) of a node, M_J = sum_{J' in J} alpha / |J|.
BellmanPoint node_state(const DyadicWeightedTree& tree, NodeId n, const Exponent& p, double C);

struct EmbeddingReport {
  double embedding_sum = 0.0;
  double carleson_constant = 0.0;
  double lp_norm_p = 0.0;  // int f^p
  double ratio = 0.0;      // 0 when C or the norm vanishes
  double sharp_constant = 0.0;
  bool within_bound(double tol = 1e-9) const { return ratio <= sharp_constant + tol; }
  Json to_json() const;
};

EmbeddingReport embedding_sum(const DyadicWeightedTree& tree, const Exponent& p);

// Partial-sum inequalities
//   sum_{|J| > 2^-n |I|} alpha_J <f>_J^p <= |I| B(I) - sum_{|J| = 2^-n |I|} |J| B(J)
// for n = 0..N+1 (level N+1 is the leaf refinement, where M = 0 and
// F = f^p so that B vanishes), plus the final bound <= (p')^p C int f^p.
struct TelescopingReport {
  double C = 0.0;
  std::vector<double> partial_sums;
  std::vector<double> bounds;
  ConditionReport levels{"telescoping.partial_sum", 1e-9};
  double root_bound = 0.0;   // |I| B(root)
  double final_bound = 0.0;  // (p')^p C int f^p
  double embedding_sum = 0.0;
  bool final_ok = false;
  bool passed() const { return levels.passed() && final_ok; }
  Json to_json() const;
};

TelescopingReport telescoping_check(const DyadicWeightedTree& tree, const Exponent& p,
                                    const BellmanFn& B, double C = -1.0);
// Same with B = eval_supersolution.
TelescopingReport telescoping_check(const DyadicWeightedTree& tree, const Exponent& p, double C = -1.0);

// Random tree: leaves drawn from a mix of smooth and spiky profiles,
// weights sparse nonnegative, rescaled so that the Carleson constant is 1.
DyadicWeightedTree random_tree(Rng& rng, int depth);

}  // namespace clab
