#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "clab/bellman_core.hpp"
#include "clab/dyadic_model.hpp"
#include "clab/report.hpp"

namespace clab {

// Recorded maximiser of one Bellman update, in the reduced frame (F = 1):
// children (F+, r+, M+) and (F-, r-, M-), drift dM * f^p. `s` and `t` are
// the f- and F-offsets: f+- = f +- s, F+- = 1 +- t.
struct SplitPolicy {
  bool active = false;
  double s = 0.0, t = 0.0;
  double Fp = 1.0, rp = 0.0, Mp = 0.0;
  double Fm = 1.0, rm = 0.0, Mm = 0.0;
  double drift = 0.0;
};

struct DpOptions {
  int split_samples = 32;  // samples of s and of t, each
  int mass_samples = 0;    // K: child masses on {0, 1/K, ..., 1}; 0 = M-axis resolution
  int eval_sweeps = 200;   // policy-evaluation sweeps after each greedy update
  int threads = 1;
};

// Lower approximation of B(1, r^(1/p), M; C=1) on a uniform (r, M) grid.
class BellmanGrid {
 public:
  BellmanGrid() = default;
  BellmanGrid(const Exponent& p, int n_r, int n_M);

  const Exponent& exponent() const { return p_; }
  const std::vector<double>& r_axis() const { return r_; }
  const std::vector<double>& M_axis() const { return M_; }
  std::size_t n_r() const { return r_.size(); }
  std::size_t n_M() const { return M_.size(); }

  double& at(std::size_t i, std::size_t j) { return values_[i * M_.size() + j]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * M_.size() + j]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  // Bilinear interpolation, arguments clamped to [0, 1]^2.
  double interpolate(double r, double M) const;
  // Value of B at a point with C = 1 through homogeneity: F * V(|f|^p / F, M).
  double value_at(const BellmanPoint& pt) const;

  SplitPolicy& policy(std::size_t i, std::size_t j) { return policy_[i * M_.size() + j]; }
  const SplitPolicy& policy(std::size_t i, std::size_t j) const { return policy_[i * M_.size() + j]; }

  double max_value() const;
  std::pair<double, double> argmax() const;  // (r, M)

  int iteration_count = 0;
  double sup_change = 0.0;
  bool converged = false;
  DpOptions options;
  std::vector<double> sup_history;  // max value after each iteration
  double min_pointwise_increase = std::numeric_limits<double>::infinity();  // over all iterations

 private:
  Exponent p_{2.0};
  std::vector<double> r_, M_;
  std::vector<double> values_;
  std::vector<SplitPolicy> policy_;
};

// Candidate split of the reduced state (r, M) found by the sampled search.
struct SplitCandidate {
  double value = 0.0;
  SplitPolicy policy;
};

// Best sampled split at (r, M) under the values of `grid`.
SplitCandidate best_split(const BellmanGrid& grid, double r, double M, const DpOptions& opt);

// One Jacobi-style Bellman update from a frozen copy; values never decrease.
BellmanGrid dp_iterate(const BellmanGrid& grid, int split_samples, int mass_samples);
BellmanGrid dp_iterate(const BellmanGrid& grid, const DpOptions& opt);

// Policy-evaluation sweep V <- max(V, T_policy V), in place.
double dp_evaluate_policy(BellmanGrid& grid);

// Initial grid B0(r, M) = M r.
BellmanGrid dp_initial(const Exponent& p, int n_r, int n_M);

// Greedy updates followed by policy-evaluation sweeps until the greedy
// sup-norm change drops below tol or max_iters is reached.
BellmanGrid dp_solve(const Exponent& p, int n_r, int n_M, double tol, int max_iters,
                     const DpOptions& opt = {});

struct ExtremalTrace {
  DyadicWeightedTree tree;
  BellmanPoint start;
  double grid_value = 0.0;      // F * V(r, M) at the start
  double embedding_sum = 0.0;
  double achieved_ratio = 0.0;  // embedding_sum / (C F), C = 1
  double value_ratio = 0.0;     // embedding_sum / grid_value
  double carleson_constant = 0.0;
  double lp_norm_p = 0.0;
  double target = 0.0;          // (p')^p
  int signed_leaves = 0;        // leaves whose sign was dropped
  std::vector<std::string> warnings;
  Json to_json() const;
};

// Follows the best split recomputed at every visited state down to `depth`;
// leaves carry the remaining mass. Requires start.C == 1.
ExtremalTrace extract_extremal_tree(const BellmanGrid& grid, const BellmanPoint& start, int depth);

// Finite-horizon iterates V_0 = M r, V_{k+1} = T V_k (no policy sweeps):
// V_k is the best sampled value over trees of depth k.
std::vector<BellmanGrid> dp_horizons(const Exponent& p, int n_r, int n_M, int depth,
                                     const DpOptions& opt = {});

// Depth-(size-1) tree whose level-k splits are optimal for the remaining
// horizon; its embedding sum tracks V_depth at the start.
ExtremalTrace extract_finite_horizon(const std::vector<BellmanGrid>& horizons,
                                     const BellmanPoint& start);

// Persistence: CSV rows "r,M,value" and a JSON header.
std::string grid_to_csv(const BellmanGrid& grid);
Json grid_header(const BellmanGrid& grid);
BellmanGrid grid_from_csv(const Json& header, const std::string& csv);

}  // namespace clab
