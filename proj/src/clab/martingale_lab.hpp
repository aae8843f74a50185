#pragma once

#include <cstddef>
#include <vector>

#include "clab/bellman_core.hpp"
#include "clab/report.hpp"

namespace clab {

class Rng;

// Finite atomic probability space with a refining partition filtration.
// Level 0 is the trivial partition. If the last supplied level is not the
// atom partition, the atom partition is appended so that the last level
// always carries f itself.
class FilteredSpace {
 public:
  FilteredSpace() = default;
  // `levels[n][x]` is the block label of atom x at level n; labels are
  // renumbered 0..B-1 by first appearance.
  FilteredSpace(std::vector<double> masses, std::vector<std::vector<int>> levels,
                std::vector<long long> atom_ids = {});

  std::size_t atom_count() const { return masses_.size(); }
  std::size_t level_count() const { return blocks_.size(); }
  const std::vector<double>& masses() const { return masses_; }
  const std::vector<long long>& atom_ids() const { return ids_; }

  int block_of(std::size_t n, std::size_t atom) const { return blocks_[n][atom]; }
  const std::vector<int>& partition(std::size_t n) const { return blocks_[n]; }
  std::size_t block_count(std::size_t n) const { return block_mass_[n].size(); }
  double block_mass(std::size_t n, std::size_t b) const { return block_mass_[n][b]; }
  const std::vector<std::size_t>& block_atoms(std::size_t n, std::size_t b) const { return members_[n][b]; }
  // Block of level n+1 -> its parent block at level n.
  int parent_block(std::size_t n_plus_1, std::size_t b) const { return parents_[n_plus_1][b]; }
  // Whether the last level was appended to reach the atom partition.
  bool completed() const { return completed_; }

 private:
  std::vector<double> masses_;
  std::vector<long long> ids_;
  std::vector<std::vector<int>> blocks_;
  std::vector<std::vector<double>> block_mass_;
  std::vector<std::vector<std::vector<std::size_t>>> members_;
  std::vector<std::vector<int>> parents_;
  bool completed_ = false;
};

// Per-level block values: values[n][b].
struct Adapted {
  std::vector<std::vector<double>> values;
  // Value at atom x on level n.
  double at(const FilteredSpace& s, std::size_t n, std::size_t x) const {
    return values[n][static_cast<std::size_t>(s.block_of(n, x))];
  }
};

// Block averages E[f | F_n] on level n.
std::vector<double> condition(const FilteredSpace& s, const std::vector<double>& f, std::size_t n);
// E[f | F_n] for every level.
Adapted martingale(const FilteredSpace& s, const std::vector<double>& f);
// Atom values of a level-n adapted value vector.
std::vector<double> expand(const FilteredSpace& s, const std::vector<double>& block_values, std::size_t n);
double expectation(const FilteredSpace& s, const std::vector<double>& f);

// f*(x) = max_n |f_n(x)| over all levels (the last level is f itself).
std::vector<double> maximal_function(const FilteredSpace& s, const std::vector<double>& f);

struct DoobReport {
  double max_norm_p = 0.0;  // E[f*^p]
  double norm_p = 0.0;      // E[|f|^p]
  double ratio = 0.0;
  double sharp_constant = 0.0;
  bool passed(double tol = 1e-9) const { return norm_p == 0.0 ? max_norm_p == 0.0 : ratio <= sharp_constant + tol; }
  Json to_json() const;
};
DoobReport doob_check(const FilteredSpace& s, const std::vector<double>& f, const Exponent& p);

// Adapted nonnegative sequence with a claimed Carleson constant.
struct CarlesonSeq {
  Adapted alpha;
  double constant_C = 1.0;

  // Builds from per-level atom values, rejecting non-measurable input.
  static CarlesonSeq from_atom_values(const FilteredSpace& s, const std::vector<std::vector<double>>& per_level,
                                      double C);
};

// Conditional tails T_n = E[sum_{k>=n} alpha_k | F_n], per level and block.
Adapted carleson_tails(const FilteredSpace& s, const CarlesonSeq& seq);

struct CarlesonReport {
  ConditionReport margin{"carleson.tail_bound", 1e-12};  // C - T_n, arg = (n, block)
  double total_mass = 0.0;                                 // E[sum alpha]
  double measured_constant = 0.0;                          // max T_n
  bool passed() const { return margin.passed(); }
  Json to_json() const;
};
CarlesonReport verify_carleson(const FilteredSpace& s, const CarlesonSeq& seq);

// alpha_n = E[1_{E_n} | F_n] with E_n = {n is the first level where
// |f_n| reaches f*} (ties within 1e-12 go to the smallest n).
struct MaximalCarleson {
  CarlesonSeq seq;
  std::vector<int> first_level;  // per atom
  std::vector<double> fstar;
  double total_mass = 0.0;
  double fstar_norm_p = 0.0;  // E[f*^p]
  double accounting = 0.0;    // E[sum alpha_n |f_n|^p]
};
MaximalCarleson maximal_carleson(const FilteredSpace& s, const std::vector<double>& f, const Exponent& p);

// Bellman-process steps E[B(X^n)] - E[B(X^{n+1})] >= E[alpha_n f_n^p],
// n = 0..L-1, with the terminal state X^L = (f^p, f, 0) where B vanishes.
struct BellmanProcessReport {
  std::vector<double> expected_B;   // E[B(X^n)], n = 0..L
  std::vector<double> step_gain;    // E[alpha_n f_n^p]
  ConditionReport steps{"bellman_process.step", 1e-9};
  double embedding = 0.0;           // E[sum alpha_n f_n^p]
  double initial_bound = 0.0;       // B(X^0)
  bool telescoped_ok = false;
  int clamped = 0;                  // states moved onto the boundary F = f^p
  bool passed() const { return steps.passed() && telescoped_ok; }
  Json to_json() const;
};
BellmanProcessReport bellman_process_check(const FilteredSpace& s, const std::vector<double>& f,
                                           const CarlesonSeq& seq, const Exponent& p);

// Random space: `atoms` atoms, `levels` nested levels built by splitting
// blocks into 2 or 3 contiguous runs; masses random then normalised.
FilteredSpace random_space(Rng& rng, int atoms, int levels);
// Dyadic-like space: 2^depth atoms with random masses, binary splits.
FilteredSpace random_dyadic_space(Rng& rng, int depth);
std::vector<double> random_function(Rng& rng, std::size_t atoms, bool nonnegative);
// Random Carleson sequence with constant 1 (rejection-scaled).
CarlesonSeq random_carleson(Rng& rng, const FilteredSpace& s);

}  // namespace clab
