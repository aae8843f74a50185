#pragma once

#include <array>
#include <functional>
#include <span>
#include <vector>

#include "clab/report.hpp"

namespace clab {

// Exponent p > 1 with its conjugate p' = p/(p-1) and the sharp constant (p')^p.
class Exponent {
 public:
  explicit Exponent(double p);

  double p() const { return p_; }
  double conj() const { return conj_; }
  double sharp_constant() const { return sharp_; }

 private:
  double p_;
  double conj_;
  double sharp_;
};

// State (F, f, M) of the Bellman recursion with Carleson constant C:
// F = <f^p>, f = <f>, M = normalised Carleson mass.
struct BellmanPoint {
  double F = 0.0;
  double f = 0.0;
  double M = 0.0;
  double C = 1.0;
};

// True when f >= 0, f^p <= F, 0 <= M <= C and C > 0 (1e-12 slack).
bool in_domain(const BellmanPoint& pt, const Exponent& p);
// Throws Error(Domain) naming the violated bound.
void require_domain(const BellmanPoint& pt, const Exponent& p);

using BellmanFn = std::function<double(const BellmanPoint&)>;

// Explicit super-solution
//   B(F,f,M;C) = C * [ (p')^p F - (p f)^p / ((p-1) (M/C + p - 1)^(p-1)) ].
double eval_supersolution(const BellmanPoint& pt, const Exponent& p);

// Same formula without domain checks, evaluated at |f|. Used by finite
// difference stencils that step slightly outside the closed domain.
double supersolution_formula(double F, double f, double M, double C, const Exponent& p);

// Closed-form dB/dM = (p f)^p / (M/C + p - 1)^p.
double supersolution_dM(const BellmanPoint& pt, const Exponent& p);

// Burkholder hull u(f, M) = -(p f)^p / ((p-1) (M + p - 1)^(p-1)), C = 1.
double eval_hull(double f, double M, const Exponent& p);

// ---------------------------------------------------------------------------
// Hull profiles  phi(M) = [(p-1) / (C2 M + C1 - int_0^M G)]^(p-1)

// G is a nondecreasing, piecewise-linear table on [0, 1] with G(0) = 0.
class HullProfile {
 public:
  HullProfile(double C1, double C2, std::vector<double> G_nodes, std::vector<double> G_values);
  // G == 0, C2 = (p')^(-p'), C1 = (p-1)(p')^(-p').
  static HullProfile optimal(const Exponent& p);

  double C1() const { return C1_; }
  double C2() const { return C2_; }

  double G(double M) const;          // extended by 0 left of 0, by G(1) right of 1
  double g(double M) const;          // slope of G (0 outside the table)
  double integral_G(double M) const; // int_0^M G, trapezoidal (exact for the table)
  double denominator(double M) const { return C2_ * M + C1_ - integral_G(M); }

  // Checks the profile invariants on the sample grid; throws Infeasible.
  void validate(std::span<const double> grid) const;

 private:
  double C1_;
  double C2_;
  std::vector<double> nodes_;
  std::vector<double> values_;
};

double eval_phi(double M, const HullProfile& profile, const Exponent& p);

// phi and its first two derivatives in closed form.
struct PhiJet {
  double value;
  double d1;
  double d2;
};
PhiJet phi_jet(double M, const HullProfile& profile, const Exponent& p);

struct HullConditionsReport {
  double fd_step = 0.0;
  ConditionReport lower;     // phi >= 0
  ConditionReport upper;     // phi <= (p')^p
  ConditionReport slope;     // phi' <= -1
  ConditionReport identity;  // phi phi'' - p' (phi')^2 >= 0
  double max_abs_identity_fd = 0.0;        // |phi phi'' - p'(phi')^2|, finite differences
  double max_abs_identity_analytic = 0.0;  // same from the closed-form jet
  bool passed() const;
  Json to_json() const;
};

// Checks the hull conditions (ii)-(iv) over `grid` (points of [0, 1]) with
// fourth-order central differences of step `h`.
HullConditionsReport verify_hull_conditions(const HullProfile& profile, const Exponent& p,
                                            std::span<const double> grid, double h = 1e-3,
                                            double tolerance = 1e-6);

std::vector<double> uniform_grid(double a, double b, int points);

// ---------------------------------------------------------------------------
// Infinitesimal form of the main inequality: d^2 B <= 0 and dB/dM >= f^p.

struct InfinitesimalReport {
  BellmanPoint point;
  std::array<double, 3> steps{};  // (F, f, M)
  std::array<double, 3> hessian_eigenvalues{};
  double max_eigenvalue = 0.0;
  double dM_fd = 0.0;
  double dM_analytic = 0.0;
  double f_pow_p = 0.0;
  double dM_rel_error = 0.0;

  bool concave(double tol = 1e-6) const { return max_eigenvalue <= tol; }
  bool monotone(double tol = 1e-9) const { return dM_fd >= f_pow_p - tol; }
  bool derivative_consistent(double tol = 1e-6) const { return dM_rel_error <= tol; }
  Json to_json() const;
};

// Fourth-order central differences. `h` is a relative step: coordinate x
// is perturbed by multiples of h * max(1, |x|). Rejects steps larger than a
// tenth of the distance to the boundary.
InfinitesimalReport verify_infinitesimal(const BellmanPoint& pt, const Exponent& p,
                                         double h = 1e-3);

// Signed margin of
//   B(parent) >= lambda B(left) + (1-lambda) B(right) + dM f^p,
// dM = M - (lambda M+ + (1-lambda) M-). Rejects inconsistent splits.
double verify_main_inequality(const BellmanPoint& parent, const BellmanPoint& left,
                              const BellmanPoint& right, double lambda, const BellmanFn& B,
                              const Exponent& p);

// dM of a consistent split (throws like verify_main_inequality).
double split_mass_increment(const BellmanPoint& parent, const BellmanPoint& left,
                            const BellmanPoint& right, double lambda);

// ---------------------------------------------------------------------------
// Multiplicative mollification.

struct MollifierConfig {
  double eps = 0.05;
  int quadrature_nodes = 48;
};

// B_eps(F,f,M;C) = iiint B(F/u, f/v, M/w; C) phi(u) psi(v) phi(w) du dv dw/(uvw)
// with supp phi = [1, (1+eps)^p], supp psi = [1+eps, 1+2 eps], both
// normalised to unit mass against dt/t.
class Mollifier {
 public:
  Mollifier(const MollifierConfig& cfg, const Exponent& p);

  double bump_phi(double t) const;
  double bump_psi(double t) const;
  // |discrete mass - 1| of each bump under the configured rule.
  double normalisation_error() const { return normalisation_error_; }

  double apply(const BellmanFn& B, const BellmanPoint& pt) const;

  const MollifierConfig& config() const { return cfg_; }

 private:
  MollifierConfig cfg_;
  double p_;
  double phi_lo_, phi_hi_, psi_lo_, psi_hi_;
  double phi_norm_ = 1.0, psi_norm_ = 1.0;
  std::vector<double> phi_nodes_, phi_weights_;  // weights include bump/(t * norm)
  std::vector<double> psi_nodes_, psi_weights_;
  double normalisation_error_ = 0.0;
};

double mollify_supersolution(const BellmanPoint& pt, const MollifierConfig& cfg,
                             const Exponent& p);

// Lower bound 1/((1+2eps)^p (1+eps)^p) on the retained drift dM f^p.
double mollifier_drift_factor(double eps, const Exponent& p);

// ---------------------------------------------------------------------------
// Samplers used by property checks.

class Rng;

// Point with f^p in [0.02, 0.98] F, M in [0.02, 0.98] C.
BellmanPoint sample_interior_point(Rng& rng, const Exponent& p);
// Any point of the closed domain with C in [0.5, 2].
BellmanPoint sample_domain_point(Rng& rng, const Exponent& p);

struct Split {
  BellmanPoint parent, left, right;
  double lambda = 0.5;
  double dM = 0.0;
};
// Children drawn in the domain, lambda in [0,1] (or 1/2 when `dyadic`),
// dM uniform in the admissible range.
Split sample_split(Rng& rng, const Exponent& p, bool dyadic = false);

}  // namespace clab
