#include "clab/bellman_core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "clab/error.hpp"
#include "clab/quadrature.hpp"
#include "clab/rng.hpp"

namespace clab {

Exponent::Exponent(double p) : p_(p) {
  if (!(p > 1.0) || !std::isfinite(p)) fail(ErrorKind::InvalidArgument, "exponent p must be > 1");
  conj_ = p / (p - 1.0);
  sharp_ = std::pow(conj_, p);
}

bool in_domain(const BellmanPoint& pt, const Exponent& p) {
  const double s = tol::kDomain;
  return pt.C > 0.0 && pt.f >= -s && pt.F >= -s && pt.M >= -s && pt.M <= pt.C + s &&
         std::pow(std::max(pt.f, 0.0), p.p()) <= pt.F + s;
}

void require_domain(const BellmanPoint& pt, const Exponent& p) {
  auto reject = [&](const char* what) {
    std::ostringstream os;
    os.precision(17);
    os << "point (F=" << pt.F << ", f=" << pt.f << ", M=" << pt.M << ", C=" << pt.C
       << ") outside the domain: " << what;
    fail(ErrorKind::Domain, os.str());
  };
  if (!(pt.C > 0.0)) reject("C > 0");
  if (!std::isfinite(pt.F) || !std::isfinite(pt.f) || !std::isfinite(pt.M)) reject("finite");
  if (pt.f < -tol::kDomain) reject("f >= 0");
  if (pt.M < -tol::kDomain) reject("M >= 0");
  if (pt.M > pt.C + tol::kDomain) reject("M <= C");
  if (std::pow(std::max(pt.f, 0.0), p.p()) > pt.F + tol::kDomain) reject("f^p <= F");
}

double supersolution_formula(double F, double f, double M, double C, const Exponent& p) {
  const double q = p.p();
  const double m = M / C;
  const double hull = std::pow(q * std::abs(f), q) / ((q - 1.0) * std::pow(m + q - 1.0, q - 1.0));
  return C * (p.sharp_constant() * F - hull);
}

double eval_supersolution(const BellmanPoint& pt, const Exponent& p) {
  require_domain(pt, p);
  return supersolution_formula(pt.F, std::max(pt.f, 0.0), std::clamp(pt.M, 0.0, pt.C), pt.C, p);
}

double supersolution_dM(const BellmanPoint& pt, const Exponent& p) {
  require_domain(pt, p);
  const double q = p.p();
  return std::pow(q * std::max(pt.f, 0.0), q) / std::pow(pt.M / pt.C + q - 1.0, q);
}

double eval_hull(double f, double M, const Exponent& p) {
  if (f < -tol::kDomain || M < -tol::kDomain || M > 1.0 + tol::kDomain)
    fail(ErrorKind::Domain, "hull needs f >= 0 and M in [0, 1]");
  const double q = p.p();
  return -std::pow(q * std::max(f, 0.0), q) / ((q - 1.0) * std::pow(std::clamp(M, 0.0, 1.0) + q - 1.0, q - 1.0));
}

// ---------------------------------------------------------------------------

HullProfile::HullProfile(double C1, double C2, std::vector<double> G_nodes,
                         std::vector<double> G_values)
    : C1_(C1), C2_(C2), nodes_(std::move(G_nodes)), values_(std::move(G_values)) {
  if (!(C1 > 0.0) || !(C2 > 0.0)) fail(ErrorKind::Infeasible, "hull profile needs C1, C2 > 0");
  if (nodes_.size() != values_.size())
    fail(ErrorKind::InvalidArgument, "G table: nodes and values differ in length");
  if (nodes_.empty()) return;
  if (nodes_.size() < 2 || nodes_.front() != 0.0 || nodes_.back() != 1.0)
    fail(ErrorKind::InvalidArgument, "G table must span [0, 1]");
  if (values_.front() != 0.0) fail(ErrorKind::Infeasible, "G(0) must be 0");
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (!(nodes_[i] > nodes_[i - 1])) fail(ErrorKind::InvalidArgument, "G nodes must increase");
    if (values_[i] < values_[i - 1]) fail(ErrorKind::Infeasible, "G must be nondecreasing");
  }
}

HullProfile HullProfile::optimal(const Exponent& p) {
  const double c2 = std::pow(p.conj(), -p.conj());
  return HullProfile((p.p() - 1.0) * c2, c2, {}, {});
}

double HullProfile::G(double M) const {
  if (nodes_.empty() || M <= 0.0) return 0.0;
  if (M >= 1.0) return values_.back();
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), M);
  const std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  const double t = (M - nodes_[i]) / (nodes_[i + 1] - nodes_[i]);
  return values_[i] + t * (values_[i + 1] - values_[i]);
}

double HullProfile::g(double M) const {
  if (nodes_.empty() || M < 0.0 || M >= 1.0) return 0.0;
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), M);
  const std::size_t i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  return (values_[i + 1] - values_[i]) / (nodes_[i + 1] - nodes_[i]);
}

double HullProfile::integral_G(double M) const {
  if (nodes_.empty() || M <= 0.0) return 0.0;
  double acc = 0.0;
  const double upto = std::min(M, 1.0);
  for (std::size_t i = 0; i + 1 < nodes_.size() && nodes_[i] < upto; ++i) {
    const double b = std::min(nodes_[i + 1], upto);
    acc += 0.5 * (b - nodes_[i]) * (values_[i] + G(b));
  }
  if (M > 1.0) acc += (M - 1.0) * values_.back();
  return acc;
}

void HullProfile::validate(std::span<const double> grid) const {
  for (double M : grid) {
    if (!(denominator(M) > 0.0)) {
      std::ostringstream os;
      os << "hull profile infeasible: C2 M + C1 - int G <= 0 at M=" << M;
      fail(ErrorKind::Infeasible, os.str());
    }
  }
}

double eval_phi(double M, const HullProfile& profile, const Exponent& p) {
  const double D = profile.denominator(M);
  if (!(D > 0.0)) {
    std::ostringstream os;
    os << "hull profile infeasible: denominator " << D << " at M=" << M;
    fail(ErrorKind::Infeasible, os.str());
  }
  return std::pow((p.p() - 1.0) / D, p.p() - 1.0);
}

PhiJet phi_jet(double M, const HullProfile& profile, const Exponent& p) {
  const double q = p.p();
  const double D = profile.denominator(M);
  if (!(D > 0.0)) fail(ErrorKind::Infeasible, "hull profile infeasible: denominator <= 0");
  const double D1 = profile.C2() - profile.G(M);
  const double D2 = -profile.g(M);
  const double k = std::pow(q - 1.0, q);
  PhiJet j{};
  j.value = std::pow((q - 1.0) / D, q - 1.0);
  j.d1 = -k * std::pow(D, -q) * D1;
  j.d2 = k * (q * std::pow(D, -q - 1.0) * D1 * D1 - std::pow(D, -q) * D2);
  return j;
}

std::vector<double> uniform_grid(double a, double b, int points) {
  if (points < 2) fail(ErrorKind::InvalidArgument, "grid needs at least two points");
  std::vector<double> g(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) g[static_cast<std::size_t>(i)] = a + (b - a) * i / (points - 1);
  g.back() = b;
  return g;
}

bool HullConditionsReport::passed() const {
  return lower.passed() && upper.passed() && slope.passed() && identity.passed();
}

Json HullConditionsReport::to_json() const {
  return Json{{"fd_step", fd_step},
              {"conditions", Json::array({lower.to_json(), upper.to_json(), slope.to_json(),
                                          identity.to_json()})},
              {"max_abs_identity_fd", number(max_abs_identity_fd)},
              {"max_abs_identity_analytic", number(max_abs_identity_analytic)},
              {"pass", passed()}};
}

HullConditionsReport verify_hull_conditions(const HullProfile& profile, const Exponent& p,
                                            std::span<const double> grid, double h,
                                            double tolerance) {
  if (!(h > 0.0)) fail(ErrorKind::InvalidArgument, "finite-difference step must be positive");
  for (double M : grid)
    if (M < -tol::kDomain || M > 1.0 + tol::kDomain)
      fail(ErrorKind::InvalidArgument, "hull grid must lie in [0, 1]");
  profile.validate(grid);

  HullConditionsReport r;
  r.fd_step = h;
  r.lower = ConditionReport("hull.phi_nonnegative", tolerance);
  r.upper = ConditionReport("hull.phi_below_sharp_constant", tolerance);
  r.slope = ConditionReport("hull.phi_slope_le_minus_one", tolerance);
  r.identity = ConditionReport("hull.identity_nonnegative", tolerance);

  const double pc = p.conj();
  auto phi = [&](double M) { return eval_phi(M, profile, p); };
  for (double M : grid) {
    // fourth-order central stencils
    const double a2 = phi(M - 2 * h), a1 = phi(M - h), c = phi(M), b1 = phi(M + h),
                 b2 = phi(M + 2 * h);
    const double d1 = (a2 - 8 * a1 + 8 * b1 - b2) / (12 * h);
    const double d2 = (-a2 + 16 * a1 - 30 * c + 16 * b1 - b2) / (12 * h * h);
    const double residual = c * d2 - pc * d1 * d1;
    const PhiJet j = phi_jet(M, profile, p);

    r.lower.observe(c, {M});
    r.upper.observe(p.sharp_constant() - c, {M});
    r.slope.observe(-1.0 - d1, {M});
    r.identity.observe(residual, {M});
    r.max_abs_identity_fd = std::max(r.max_abs_identity_fd, std::abs(residual));
    r.max_abs_identity_analytic =
        std::max(r.max_abs_identity_analytic, std::abs(j.value * j.d2 - pc * j.d1 * j.d1));
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

// Five-point stencil weights for the first derivative, offsets -2..2.
constexpr double kD1[5] = {1.0 / 12, -8.0 / 12, 0.0, 8.0 / 12, -1.0 / 12};
constexpr double kD2[5] = {-1.0 / 12, 16.0 / 12, -30.0 / 12, 16.0 / 12, -1.0 / 12};

}  // namespace

Json InfinitesimalReport::to_json() const {
  return Json{{"point", {point.F, point.f, point.M, point.C}},
              {"steps", steps},
              {"hessian_eigenvalues", hessian_eigenvalues},
              {"max_eigenvalue", number(max_eigenvalue)},
              {"dM_fd", number(dM_fd)},
              {"dM_analytic", number(dM_analytic)},
              {"f_pow_p", number(f_pow_p)},
              {"dM_rel_error", number(dM_rel_error)}};
}

InfinitesimalReport verify_infinitesimal(const BellmanPoint& pt, const Exponent& p, double h) {
  require_domain(pt, p);
  if (!(h > 0.0)) fail(ErrorKind::InvalidArgument, "finite-difference step must be positive");
  const double q = p.p();
  const std::array<double, 3> x{pt.F, pt.f, pt.M};
  InfinitesimalReport r;
  r.point = pt;
  for (int i = 0; i < 3; ++i) r.steps[static_cast<std::size_t>(i)] = h * std::max(1.0, std::abs(x[static_cast<std::size_t>(i)]));

  // The formula is analytic across M = C, so only the lower M boundary and
  // the convexity boundary bound the stencil.
  const double gap_F = pt.F - std::pow(pt.f, q);
  const double gap_f = std::pow(pt.F, 1.0 / q) - pt.f;
  const std::array<double, 3> gap{gap_F, gap_f, pt.M};
  for (int i = 0; i < 3; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (!(r.steps[k] <= 0.1 * gap[k])) {
      std::ostringstream os;
      os << "finite-difference step " << r.steps[k] << " exceeds a tenth of the distance "
         << gap[k] << " to the boundary in coordinate " << "FfM"[i];
      fail(ErrorKind::Domain, os.str());
    }
  }

  auto B = [&](std::array<double, 3> y) { return supersolution_formula(y[0], y[1], y[2], pt.C, p); };
  auto shifted = [&](int i, int a, int j, int b) {
    std::array<double, 3> y = x;
    y[static_cast<std::size_t>(i)] += a * r.steps[static_cast<std::size_t>(i)];
    y[static_cast<std::size_t>(j)] += b * r.steps[static_cast<std::size_t>(j)];
    return B(y);
  };

  Eigen::Matrix3d H;
  for (int i = 0; i < 3; ++i) {
    const double si = r.steps[static_cast<std::size_t>(i)];
    double acc = 0.0;
    for (int a = -2; a <= 2; ++a) acc += kD2[a + 2] * shifted(i, a, i, 0);
    H(i, i) = acc / (si * si);
    for (int j = i + 1; j < 3; ++j) {
      const double sj = r.steps[static_cast<std::size_t>(j)];
      double m = 0.0;
      for (int a = -2; a <= 2; ++a) {
        if (a == 0) continue;
        for (int b = -2; b <= 2; ++b) {
          if (b == 0) continue;
          m += kD1[a + 2] * kD1[b + 2] * shifted(i, a, j, b);
        }
      }
      H(i, j) = H(j, i) = m / (si * sj);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(H, Eigen::EigenvaluesOnly);
  for (int i = 0; i < 3; ++i) r.hessian_eigenvalues[static_cast<std::size_t>(i)] = eig.eigenvalues()(i);
  r.max_eigenvalue = eig.eigenvalues().maxCoeff();

  double dm = 0.0;
  for (int a = -2; a <= 2; ++a) dm += kD1[a + 2] * shifted(2, a, 2, 0);
  r.dM_fd = dm / r.steps[2];
  r.dM_analytic = supersolution_dM(pt, p);
  r.f_pow_p = std::pow(pt.f, q);
  const double scale = std::abs(r.dM_analytic);
  r.dM_rel_error = scale > 0.0 ? std::abs(r.dM_fd - r.dM_analytic) / scale : std::abs(r.dM_fd);
  return r;
}

// ---------------------------------------------------------------------------

double split_mass_increment(const BellmanPoint& parent, const BellmanPoint& left,
                            const BellmanPoint& right, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) fail(ErrorKind::InvalidArgument, "lambda must lie in [0, 1]");
  if (left.C != parent.C || right.C != parent.C)
    fail(ErrorKind::InvalidArgument, "split points must share the Carleson constant");
  const double slack = 1e-10;
  auto mismatch = [&](double par, double a, double b) {
    return std::abs(par - (lambda * a + (1.0 - lambda) * b)) > slack * std::max(1.0, std::abs(par));
  };
  if (mismatch(parent.F, left.F, right.F)) fail(ErrorKind::InvalidArgument, "inconsistent split: F is not the average of the children");
  if (mismatch(parent.f, left.f, right.f)) fail(ErrorKind::InvalidArgument, "inconsistent split: f is not the average of the children");
  const double dM = parent.M - (lambda * left.M + (1.0 - lambda) * right.M);
  if (dM < -slack || dM > parent.M + slack) {
    std::ostringstream os;
    os << "inconsistent split: dM = " << dM << " outside [0, M]";
    fail(ErrorKind::InvalidArgument, os.str());
  }
  return std::clamp(dM, 0.0, parent.M);
}

double verify_main_inequality(const BellmanPoint& parent, const BellmanPoint& left,
                              const BellmanPoint& right, double lambda, const BellmanFn& B,
                              const Exponent& p) {
  require_domain(parent, p);
  require_domain(left, p);
  require_domain(right, p);
  const double dM = split_mass_increment(parent, left, right, lambda);
  return B(parent) - lambda * B(left) - (1.0 - lambda) * B(right) -
         dM * std::pow(std::max(parent.f, 0.0), p.p());
}

// ---------------------------------------------------------------------------

namespace {

double bump(double t, double lo, double hi) {
  if (t <= lo || t >= hi) return 0.0;
  const double x = (2.0 * t - lo - hi) / (hi - lo);
  return std::exp(-1.0 / (1.0 - x * x));
}

// Reference mass of the bump against dt/t, far finer than any configured rule.
double bump_mass(double lo, double hi) {
  const auto rule = composite_gauss_legendre(20, 128, lo, hi);
  return integrate(rule, [&](double t) { return bump(t, lo, hi) / t; });
}

}  // namespace

Mollifier::Mollifier(const MollifierConfig& cfg, const Exponent& p) : cfg_(cfg), p_(p.p()) {
  if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) fail(ErrorKind::InvalidArgument, "mollifier eps must lie in (0, 1)");
  if (cfg.quadrature_nodes < 1) fail(ErrorKind::InvalidArgument, "mollifier needs quadrature_nodes >= 1");
  phi_lo_ = 1.0;
  phi_hi_ = std::pow(1.0 + cfg.eps, p_);
  psi_lo_ = 1.0 + cfg.eps;
  psi_hi_ = 1.0 + 2.0 * cfg.eps;
  phi_norm_ = bump_mass(phi_lo_, phi_hi_);
  psi_norm_ = bump_mass(psi_lo_, psi_hi_);

  auto build = [&](double lo, double hi, double norm, std::vector<double>& nodes,
                   std::vector<double>& weights) {
    const auto rule = gauss_legendre(cfg.quadrature_nodes, lo, hi);
    double mass = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
      const double w = rule.weights[i] * bump(rule.nodes[i], lo, hi) / (rule.nodes[i] * norm);
      if (w == 0.0) continue;
      nodes.push_back(rule.nodes[i]);
      weights.push_back(w);
      mass += w;
    }
    return std::abs(mass - 1.0);
  };
  normalisation_error_ = std::max(build(phi_lo_, phi_hi_, phi_norm_, phi_nodes_, phi_weights_),
                                  build(psi_lo_, psi_hi_, psi_norm_, psi_nodes_, psi_weights_));
  if (normalisation_error_ > tol::kQuadrature) {
    std::ostringstream os;
    os << "mollifier quadrature with " << cfg.quadrature_nodes
       << " nodes misses unit bump mass by " << normalisation_error_;
    fail(ErrorKind::Infeasible, os.str());
  }
}

double Mollifier::bump_phi(double t) const { return bump(t, phi_lo_, phi_hi_) / phi_norm_; }
double Mollifier::bump_psi(double t) const { return bump(t, psi_lo_, psi_hi_) / psi_norm_; }

double Mollifier::apply(const BellmanFn& B, const BellmanPoint& pt) const {
  const Exponent p(p_);
  require_domain(pt, p);
  // Worst corners of the supports: F/u smallest with f/v largest, M/w largest.
  {
    const BellmanPoint corner{pt.F / phi_hi_, pt.f / psi_lo_, pt.M / phi_lo_, pt.C};
    if (!in_domain(corner, p)) {
      std::ostringstream os;
      os << "mollifier support leaves the domain: (F/u)=" << corner.F << " < (f/v)^p="
         << std::pow(corner.f, p_);
      fail(ErrorKind::Domain, os.str());
    }
  }
  double acc = 0.0;
  for (std::size_t a = 0; a < phi_nodes_.size(); ++a) {
    for (std::size_t b = 0; b < psi_nodes_.size(); ++b) {
      double inner = 0.0;
      for (std::size_t c = 0; c < phi_nodes_.size(); ++c) {
        const BellmanPoint q{pt.F / phi_nodes_[a], pt.f / psi_nodes_[b], pt.M / phi_nodes_[c], pt.C};
        inner += phi_weights_[c] * B(q);
      }
      acc += phi_weights_[a] * psi_weights_[b] * inner;
    }
  }
  return acc;
}

double mollify_supersolution(const BellmanPoint& pt, const MollifierConfig& cfg, const Exponent& p) {
  const Mollifier m(cfg, p);
  return m.apply([&](const BellmanPoint& q) { return eval_supersolution(q, p); }, pt);
}

double mollifier_drift_factor(double eps, const Exponent& p) {
  return 1.0 / (std::pow(1.0 + 2.0 * eps, p.p()) * std::pow(1.0 + eps, p.p()));
}

// ---------------------------------------------------------------------------

BellmanPoint sample_interior_point(Rng& rng, const Exponent& p) {
  BellmanPoint pt;
  pt.C = rng.uniform(0.5, 2.0);
  pt.F = rng.uniform(0.5, 3.0);
  pt.f = std::pow(rng.uniform(0.02, 0.95) * pt.F, 1.0 / p.p());
  pt.M = rng.uniform(0.05, 0.95) * pt.C;
  return pt;
}

BellmanPoint sample_domain_point(Rng& rng, const Exponent& p) {
  BellmanPoint pt;
  pt.C = rng.uniform(0.5, 2.0);
  pt.F = rng.uniform(0.0, 4.0);
  pt.f = rng.uniform() * std::pow(pt.F, 1.0 / p.p());
  pt.M = rng.uniform() * pt.C;
  return pt;
}

Split sample_split(Rng& rng, const Exponent& p, bool dyadic) {
  Split s;
  const double C = rng.uniform(0.5, 2.0);
  for (;;) {
    s.left = sample_domain_point(rng, p);
    s.right = sample_domain_point(rng, p);
    s.left.C = s.right.C = C;
    s.left.M = rng.uniform() * C;
    s.right.M = rng.uniform() * C;
    s.lambda = dyadic ? 0.5 : rng.uniform();
    const double l = s.lambda;
    s.parent.C = C;
    s.parent.F = l * s.left.F + (1.0 - l) * s.right.F;
    s.parent.f = l * s.left.f + (1.0 - l) * s.right.f;
    const double mean = l * s.left.M + (1.0 - l) * s.right.M;
    s.dM = rng.uniform() * (C - mean);
    s.parent.M = mean + s.dM;
    if (in_domain(s.parent, p)) return s;
  }
}

}  // namespace clab
