#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clab/bellman_core.hpp"
#include "clab/bellman_dp.hpp"
#include "clab/dyadic_model.hpp"
#include "clab/martingale_lab.hpp"
#include "clab/report.hpp"

namespace clab {

class Rng;

// Mean of h on the removed ("bad") part of a set: strictly above eps/2.
double bad_imbalance(double eps);

// Split of X_j^k: a fraction `bad_fraction` of X_j^k is the bad set, the
// rest is split into (1 +- imbalance)/2.
struct HaarStep {
  double bad_fraction = 0.0;
  double imbalance = 0.0;
};

struct RemodelingConfig {
  double eps = 0.01;
  int depth_N = 1;
  std::vector<std::vector<HaarStep>> schedule;  // [k][j-1], k = 0..N-1
  std::uint64_t seed = 0;

  // Range checks (b in [0, eps/2], |delta| <= eps/2, b = 0 at the root) and
  // the Haar budget |delta|(1-b) + bad_imbalance(eps) b <= eps^2/4.
  void validate() const;
};

RemodelingConfig zero_schedule(double eps, int N);
RemodelingConfig random_schedule(Rng& rng, double eps, int N);
// Full budget as imbalance towards the child with the smaller dyadic
// average, no bad sets: the schedule that distorts averages the most.
RemodelingConfig adversarial_schedule(const DyadicWeightedTree& tree, double eps);

// ---------------------------------------------------------------------------

struct EpsilonHaar {
  FilteredSpace space;     // one level deeper
  std::vector<double> h;   // on the new atoms, 0 off E
  std::vector<std::size_t> parent_atom;  // new atom -> old atom
  double integral = 0.0;   // int_E |h_n| dmu
  double set_mass = 0.0;   // mu(E)
  double bad_mass = 0.0;   // mu(E and |h_n| > eps/2)
  bool accepted = false;   // integral <= eps^2/4 mu(E)
  bool chebyshev = false;  // bad_mass <= eps/2 mu(E)
};

// Splits every atom of the level-n blocks `E` into a +1 and a -1 part so
// that h has mean `imbalance[i]` on block E[i]; appends the sign partition.
EpsilonHaar build_epsilon_haar(const FilteredSpace& s, std::size_t n, const std::vector<int>& E,
                               const std::vector<double>& imbalance, double eps);

// ---------------------------------------------------------------------------

struct RemodelingOutput {
  FilteredSpace space;
  RemodelingConfig config;
  int N = 0;
  double eps = 0.0;
  // sets_X[k][j-1]: level-k block ids forming X_j^k (good block first).
  std::vector<std::vector<std::vector<int>>> sets_X;
  std::vector<std::vector<double>> set_mass;  // mu(X_j^k)
  std::vector<std::vector<double>> set_avg;   // <f~>_{X_j^k}, built by mass-weighted pairs
  std::vector<std::vector<double>> block_avg; // initial f~ averaged on every block, same recursion
  CarlesonSeq alpha;
  std::vector<double> f_tilde;
  std::vector<double> f_tilde_initial;  // before rebalance
  std::vector<double> g;                // +-1 on the halves of X_1^N
  double t0 = 0.0;
  bool rebalanced = false;
  double mean_deviation = 0.0;          // E[f~] - <f>_I before rebalance
  std::vector<Check> audit;

  // Sets X_j^k as atom lists.
  std::vector<std::size_t> atoms_of(int k, int j) const;
  Json to_json() const;
};

// Builds the synthetic filtration level by level (levels 0..N carry the
// sets X_j^k, level N+1 halves X_1^N for the rebalance direction g) and
// transfers weights and function. The audit holds the child-mass ratios,
// the union and normalised ratios, the mass and average sandwiches, the
// bad-set measure, the Haar budget and weight conservation.
RemodelingOutput remodel(const DyadicWeightedTree& tree, const RemodelingConfig& cfg);

struct BoundReport {
  std::vector<Check> checks;
  Json values = Json::object();
  bool passed() const;
  Json to_json() const;
};

// Measured E[sum_{k>=n} alpha_k | F_n] <= (1+eps)^N/(1-eps)^(2N).
BoundReport verify_transferred_carleson(const RemodelingOutput& out);
// E[f~^p] <= (1+eps)^N <f^p>_I (initial f~) and
// E[sum alpha_n |f~_n|^p] >= (1-eps)^(pN) sum alpha_J <f>_J^p.
BoundReport verify_energy_bounds(const RemodelingOutput& out, const DyadicWeightedTree& tree, const Exponent& p);

// t0 >= 0 with E|f + t0 g|^p = target: doubling bracket then bisection.
double solve_rebalance(const FilteredSpace& s, const std::vector<double>& f, const std::vector<double>& g,
                       double target, const Exponent& p);
RemodelingOutput rebalance_f(const RemodelingOutput& out, double target_F, const Exponent& p);

struct AllocationResult {
  std::vector<std::vector<double>> masses;  // [k][j-1] = mu(A_j^k)
  double constant_C = 0.0;
  std::vector<Check> checks;
  bool passed() const;
  Json to_json() const;
};
// Bottom-up greedy of the allocation lemma; throws naming the first node
// where sum of subtree weights > C mu(X).
AllocationResult allocate_disjoint(const RemodelingOutput& out, const DyadicWeightedTree& tree, double constant_C);

// |f~_n| <= ((1+eps)/(1-eps))^k <f~>_X on every block k levels above the leaves, nonnegativity of the block averages it uses,
// and the chain
//   (1+eps)^(pN)/(1-eps)^((p+1)N) E|f~*|^p >= E[sum alpha_n |f~_n|^p]
//                                         >= (1-eps)^(pN) sum alpha_J <f>_J^p.
BoundReport verify_maximal_transfer(const RemodelingOutput& out, const DyadicWeightedTree& tree, const Exponent& p);

// ---------------------------------------------------------------------------

struct TheoremAConfig {
  double F = 1.0, f_bar = 0.6, M = 1.0;
  double p = 2.0;
  double eps = 0.01;
  int N = 5;
  double delta1 = -1.0;  // < 0: F (1 - (1+eps)^-N)
  double delta2 = 0.01;
  int grid = 51;
  DpOptions dp;
  std::string schedule = "adversarial";  // adversarial | random | zero
  std::uint64_t seed = 0;
};

struct TheoremAResult {
  bool skipped = false;
  std::string skip_reason;
  double delta1 = 0.0, delta2 = 0.0;
  double dyadic_value = 0.0;    // sum alpha_J <f>_J^p of the extracted tree
  double achieved = 0.0;        // E[sum alpha_n |f~_n|^p]
  double ratio = 0.0;           // achieved / dyadic_value
  double ratio_floor = 0.0;     // (1-eps)^(pN)
  double c1_bound = 0.0;
  double measured_C = 0.0;
  double final_energy = 0.0;    // E|f~|^p after rebalance
  double final_mean = 0.0;      // E[f~]
  double total_mass = 0.0;      // E[sum alpha]
  double upper_bound = 0.0;     // super-solution at the achieved state, measured C
  double lower_bound_B = 0.0;   // achieved / c1_bound
  double grid_value = 0.0;      // DP value at (F, f_bar, M)
  ExtremalTrace trace;
  RemodelingOutput remodeled;
  std::vector<Check> checks;
  bool passed() const;
  Json to_json() const;
};

TheoremAResult theorem_A_experiment(const TheoremAConfig& cfg);

struct TheoremBResult {
  bool skipped = false;
  std::string skip_reason;
  double dyadic_value = 0.0;
  double achieved = 0.0;         // E[sum alpha_n |f~_n|^p]
  double maximal_norm = 0.0;     // E|f~*|^p
  double chain_factor = 0.0;     // (1+eps)^(pN)/(1-eps)^((p+1)N)
  double doob_ratio = 0.0;       // E|f~*|^p / E|f~|^p
  double upper_bound = 0.0;      // B(E|f~|^p, E|f~|, 1; 1)
  ExtremalTrace trace;
  RemodelingOutput remodeled;
  std::vector<Check> checks;
  bool passed() const;
  Json to_json() const;
};

// The same pipeline at M = 1 followed by the maximal-function chain.
TheoremBResult theorem_B_experiment(const TheoremAConfig& cfg);

}  // namespace clab
