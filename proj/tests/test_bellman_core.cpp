#include <doctest.h>

#include <cmath>

#include "clab/bellman_core.hpp"
#include "clab/error.hpp"
#include "clab/quadrature.hpp"
#include "clab/rng.hpp"

using namespace clab;

namespace {

// Independent evaluation of B written out for p = 2, C = 1: 4F - 4f^2/(M+1).
double B2(double F, double f, double M) { return 4.0 * F - 4.0 * f * f / (M + 1.0); }

bool throws_kind(ErrorKind k, auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind() == k;
  }
  return false;
}

}  // namespace

TEST_CASE("exponent conjugate and sharp constant") {
  const Exponent p(3.0);
  CHECK(p.conj() == doctest::Approx(1.5));
  CHECK(p.sharp_constant() == doctest::Approx(3.375));
  CHECK(throws_kind(ErrorKind::InvalidArgument, [] { Exponent(1.0); }));
}

TEST_CASE("supersolution point values") {
  const Exponent p(2.0);
  CHECK(eval_supersolution({1, 0, 0.5, 1}, p) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(eval_supersolution({1, 1, 1, 1}, p) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(eval_supersolution({5, 2, 1, 1}, p) == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(throws_kind(ErrorKind::Domain, [&] { eval_supersolution({1, 1.1, 0.5, 1}, p); }));
  CHECK(throws_kind(ErrorKind::Domain, [&] { eval_supersolution({1, 0.5, 1.5, 1}, p); }));
  CHECK(throws_kind(ErrorKind::Domain, [&] { eval_supersolution({1, -0.1, 0.5, 1}, p); }));
}

TEST_CASE("supersolution matches a hand-written p=2 formula") {
  const Exponent p(2.0);
  Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    BellmanPoint pt = sample_domain_point(rng, p);
    pt.C = 1.0;
    pt.M = std::min(pt.M, 1.0);
    CHECK(eval_supersolution(pt, p) == doctest::Approx(B2(pt.F, pt.f, pt.M)).epsilon(1e-12));
  }
}

TEST_CASE("dB/dM closed form") {
  const Exponent p(2.0);
  CHECK(supersolution_dM({2, 1, 0.5, 1}, p) == doctest::Approx(16.0 / 9.0));
  CHECK(supersolution_dM({2, 1, 1, 1}, p) == doctest::Approx(1.0));
  CHECK(supersolution_dM({1, 0, 0.5, 1}, p) == 0.0);
}

TEST_CASE("hull and optimal profile values") {
  const Exponent p(2.0);
  CHECK(eval_hull(0.0, 0.3, p) == 0.0);
  CHECK(eval_hull(1.0, 1.0, p) == doctest::Approx(-2.0));
  CHECK(eval_hull(2.0, 1.0, p) == doctest::Approx(-8.0));
  const auto prof = HullProfile::optimal(p);
  CHECK(eval_phi(0.0, prof, p) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(eval_phi(1.0, prof, p) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(phi_jet(1.0, prof, p).d1 == doctest::Approx(-1.0).epsilon(1e-12));
  for (double q : {1.5, 2.5, 3.0, 4.0}) {
    const Exponent e(q);
    CHECK(std::abs(eval_phi(0.0, HullProfile::optimal(e), e) - e.sharp_constant()) <= 1e-10);
  }
}

TEST_CASE("hull equals sup over F of B - (p')^p F") {
  // u(f, M) is attained on the boundary F = f^p since B - c F is constant in F.
  for (double q : {1.5, 2.0, 3.0}) {
    const Exponent p(q);
    for (double f : {0.2, 0.7, 1.3})
      for (double M : {0.0, 0.4, 1.0}) {
        const double F = std::pow(f, q);
        const double via_B = eval_supersolution({F, f, M, 1.0}, p) - p.sharp_constant() * F;
        CHECK(eval_hull(f, M, p) == doctest::Approx(via_B).epsilon(1e-12));
      }
  }
}

TEST_CASE("hull conditions on the optimal profile") {
  for (double q : {1.5, 2.0, 3.0}) {
    const Exponent p(q);
    const auto grid = uniform_grid(0.0, 1.0, 101);
    const auto r = verify_hull_conditions(HullProfile::optimal(p), p, grid);
    CHECK(r.passed());
    CHECK(r.max_abs_identity_fd <= 1e-6);
    CHECK(r.max_abs_identity_analytic <= 1e-9);
  }
}

TEST_CASE("profile with halved C1 breaks the upper bound") {
  const Exponent p(2.0);
  const auto opt = HullProfile::optimal(p);
  const HullProfile bad(opt.C1() / 2.0, opt.C2(), {}, {});
  // [(p-1)/C1]^(p-1) with exponent 1 at p = 2
  CHECK(eval_phi(0.0, bad, p) == doctest::Approx(8.0));
  const auto grid = uniform_grid(0.0, 1.0, 101);
  const auto r = verify_hull_conditions(bad, p, grid);
  CHECK_FALSE(r.upper.passed());
  CHECK_FALSE(r.passed());
}

TEST_CASE("infinitesimal conditions at sample points") {
  const Exponent p(2.0);
  auto r = verify_infinitesimal({2, 1, 0.5, 1}, p, 1e-4);
  CHECK(r.concave());
  CHECK(r.dM_analytic == doctest::Approx(16.0 / 9.0));
  CHECK(r.monotone());
  CHECK(r.derivative_consistent());
  r = verify_infinitesimal({2, 1, 1 - 1e-2, 1}, p, 1e-4);
  CHECK(r.dM_analytic == doctest::Approx(1.0 / std::pow(1.0 - 5e-3, 2)).epsilon(1e-12));
}

TEST_CASE("infinitesimal conditions hold on random interior points") {
  for (double q : {1.5, 2.0, 3.0}) {
    const Exponent p(q);
    Rng rng(5);
    for (int i = 0; i < 300; ++i) {
      const auto r = verify_infinitesimal(sample_interior_point(rng, p), p);
      CHECK(r.concave());
      CHECK(r.monotone());
      CHECK(r.derivative_consistent());
    }
  }
}

TEST_CASE("main inequality worked split") {
  const Exponent p(2.0);
  const BellmanFn B = [&](const BellmanPoint& x) { return eval_supersolution(x, p); };
  const BellmanPoint par{5, 2, 1, 1}, left{1, 1, 0.5, 1}, right{9, 3, 0.5, 1};
  CHECK(split_mass_increment(par, left, right, 0.5) == doctest::Approx(0.5));
  const double oracle = B2(5, 2, 1) - 0.5 * (B2(1, 1, 0.5) + B2(9, 3, 0.5)) - 0.5 * 4.0;
  CHECK(oracle == doctest::Approx(10.0 / 3.0));
  CHECK(verify_main_inequality(par, left, right, 0.5, B, p) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(verify_main_inequality(par, par, par, 0.5, B, p) == doctest::Approx(0.0));
  CHECK(throws_kind(ErrorKind::InvalidArgument,
                    [&] { split_mass_increment({1, 1, 0.5, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}, 0.5); }));
  CHECK(throws_kind(ErrorKind::InvalidArgument,
                    [&] { split_mass_increment({2, 1, 0.5, 1}, {1, 1, 0, 1}, {1, 1, 0, 1}, 0.5); }));
}

TEST_CASE("main inequality on random splits") {
  for (double q : {1.5, 2.0, 3.0}) {
    const Exponent p(q);
    const BellmanFn B = [&](const BellmanPoint& x) { return eval_supersolution(x, p); };
    Rng rng(17);
    for (int i = 0; i < 2000; ++i) {
      const Split s = sample_split(rng, p, i % 3 == 0);
      CHECK(verify_main_inequality(s.parent, s.left, s.right, s.lambda, B, p) >= -1e-9);
    }
  }
}

TEST_CASE("homogeneity and scaling") {
  for (double q : {1.5, 2.0, 3.0}) {
    const Exponent p(q);
    Rng rng(23);
    for (int i = 0; i < 200; ++i) {
      const BellmanPoint x = sample_domain_point(rng, p);
      const double t = rng.uniform(0.1, 5.0), s = rng.uniform(0.1, 5.0);
      const double b = eval_supersolution(x, p);
      const double bt = eval_supersolution({std::pow(t, q) * x.F, t * x.f, x.M, x.C}, p);
      const double bs = eval_supersolution({x.F, x.f, s * x.M, s * x.C}, p);
      CHECK(bt == doctest::Approx(std::pow(t, q) * b).epsilon(1e-12));
      CHECK(bs == doctest::Approx(s * b).epsilon(1e-12));
    }
  }
}

TEST_CASE("gauss-legendre integrates polynomials exactly") {
  const auto r = gauss_legendre(5, -1.0, 2.0);
  // degree 9: int_{-1}^{2} x^9 = (2^10 - 1)/10
  CHECK(integrate(r, [](double x) { return std::pow(x, 9); }) == doctest::Approx(102.3).epsilon(1e-13));
  const auto c = composite_gauss_legendre(4, 8, 0.0, 1.0);
  CHECK(integrate(c, [](double x) { return std::exp(x); }) == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-14));
}

TEST_CASE("mollifier") {
  const Exponent p(2.0);
  CHECK(mollifier_drift_factor(0.1, p) == doctest::Approx(1.0 / (1.44 * 1.21)));
  const Mollifier m({0.05, 48}, p);
  CHECK(m.normalisation_error() <= 1e-8);
  const BellmanFn one = [](const BellmanPoint&) { return 1.0; };
  CHECK(m.apply(one, {2, 1, 0.5, 1}) == doctest::Approx(1.0).epsilon(1e-8));
  // first-order convergence: the error roughly halves with eps
  const double exact = eval_supersolution({2, 1, 0.5, 1}, p);
  double prev = 0.0;
  for (double e : {0.1, 0.05, 0.025, 0.0125}) {
    const double err = std::abs(mollify_supersolution({2, 1, 0.5, 1}, {e, 48}, p) - exact);
    CHECK(err <= 1.5 * e * exact);
    if (prev > 0.0) {
      CHECK(err < prev);
      CHECK(err > 0.3 * prev);
    }
    prev = err;
  }
}

TEST_CASE("mollified main inequality keeps a fraction of the drift") {
  const Exponent p(2.0);
  const double eps = 0.05;
  const Mollifier m({eps, 48}, p);
  const BellmanFn B = [&](const BellmanPoint& x) { return supersolution_formula(x.F, x.f, x.M, x.C, p); };
  const BellmanFn Be = [&](const BellmanPoint& x) { return m.apply(B, x); };
  const double fac = mollifier_drift_factor(eps, p);
  Rng rng(3);
  for (int i = 0; i < 40; ++i) {
    const Split s = sample_split(rng, p);
    const double lhs = Be(s.parent) - s.lambda * Be(s.left) - (1 - s.lambda) * Be(s.right);
    CHECK(lhs >= s.dM * std::pow(s.parent.f, 2) * fac - 1e-6);
  }
}
