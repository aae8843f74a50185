#include <doctest.h>

#include <cmath>

#include "clab/bellman_dp.hpp"
#include "clab/error.hpp"

using namespace clab;

TEST_CASE("initial grid is M r") {
  const auto g = dp_initial(Exponent(2.0), 11, 6);
  for (std::size_t i = 0; i < g.n_r(); ++i)
    for (std::size_t j = 0; j < g.n_M(); ++j) CHECK(g.at(i, j) == doctest::Approx(g.r_axis()[i] * g.M_axis()[j]));
}

TEST_CASE("one update never decreases and keeps the boundary row") {
  const Exponent p(2.0);
  const auto g0 = dp_initial(p, 11, 11);
  const auto g1 = dp_iterate(g0, 16, 0);
  for (std::size_t i = 0; i < g0.n_r(); ++i)
    for (std::size_t j = 0; j < g0.n_M(); ++j) CHECK(g1.at(i, j) >= g0.at(i, j));
  const std::size_t last = g1.n_r() - 1;
  for (std::size_t j = 0; j < g1.n_M(); ++j) CHECK(std::abs(g1.at(last, j) - g1.M_axis()[j]) <= 1e-6);
}

TEST_CASE("solved grid: monotone, dominated, boundary") {
  for (double q : {2.0, 3.0}) {
    const Exponent p(q);
    DpOptions opt;
    opt.split_samples = 16;
    const auto g = dp_solve(p, 21, 21, 1e-5, 60, opt);
    CHECK(g.min_pointwise_increase >= -1e-12);
    for (std::size_t k = 1; k < g.sup_history.size(); ++k) CHECK(g.sup_history[k] >= g.sup_history[k - 1] - 1e-12);
    for (std::size_t i = 0; i < g.n_r(); ++i)
      for (std::size_t j = 0; j < g.n_M(); ++j) {
        const double r = g.r_axis()[i], M = g.M_axis()[j];
        const double B = eval_supersolution({1.0, std::pow(r, 1.0 / q), M, 1.0}, p);
        CHECK(g.at(i, j) <= B + 1e-6);
      }
    const std::size_t last = g.n_r() - 1;
    for (std::size_t j = 0; j < g.n_M(); ++j) CHECK(std::abs(g.at(last, j) - g.M_axis()[j]) <= 1e-6);
    CHECK(g.at(last, 0) == doctest::Approx(0.0));
    CHECK(g.max_value() <= p.sharp_constant());
  }
}

TEST_CASE("p=2 coarse solve heads toward 4") {
  DpOptions opt;
  opt.split_samples = 32;
  opt.threads = 2;
  const auto g = dp_solve(Exponent(2.0), 31, 31, 1e-5, 200, opt);
  CHECK(g.converged);
  CHECK(g.max_value() > 3.3);
  CHECK(g.max_value() < 4.0);
}

TEST_CASE("threads do not change the result") {
  DpOptions a, b;
  a.split_samples = b.split_samples = 12;
  b.threads = 3;
  const auto ga = dp_solve(Exponent(2.0), 15, 13, 1e-6, 30, a);
  const auto gb = dp_solve(Exponent(2.0), 15, 13, 1e-6, 30, b);
  CHECK(ga.values() == gb.values());
}

TEST_CASE("value_at uses homogeneity") {
  DpOptions opt;
  opt.split_samples = 12;
  const auto g = dp_solve(Exponent(2.0), 21, 21, 1e-5, 40, opt);
  const double v = g.value_at({1.0, 0.5, 0.5, 1.0});
  CHECK(g.value_at({4.0, 1.0, 0.5, 1.0}) == doctest::Approx(4.0 * v));
}

TEST_CASE("finite-horizon extraction tracks the horizon value") {
  const Exponent p(2.0);
  DpOptions opt;
  opt.split_samples = 16;
  const auto hz = dp_horizons(p, 21, 21, 8, opt);
  REQUIRE(hz.size() == 9);
  const double r = 0.2;
  const BellmanPoint start{1.0, std::sqrt(r), 1.0, 1.0};
  const auto tr = extract_finite_horizon(hz, start);
  CHECK(tr.tree.depth() == 8);
  CHECK(tr.carleson_constant <= 1.0 + 1e-12);
  CHECK(tr.embedding_sum >= 0.9 * tr.grid_value);
  CHECK(tr.lp_norm_p == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(node_average(tr.tree, {0, 1}) == doctest::Approx(std::sqrt(r)).epsilon(1e-9));
}

TEST_CASE("extraction on the boundary gives constant leaves") {
  const Exponent p(2.0);
  DpOptions opt;
  opt.split_samples = 8;
  const auto hz = dp_horizons(p, 11, 11, 3, opt);
  const auto tr = extract_finite_horizon(hz, {1.0, 1.0, 0.6, 1.0});
  for (double v : tr.tree.leaf_values()) CHECK(std::abs(v - 1.0) <= 1e-6);
  CHECK(std::abs(tr.achieved_ratio - 0.6) <= 1e-6);
}

TEST_CASE("depth-zero extraction with no mass") {
  const auto hz = dp_horizons(Exponent(2.0), 11, 11, 0);
  const auto tr = extract_finite_horizon(hz, {1.0, 0.5, 0.0, 1.0});
  CHECK(tr.embedding_sum == 0.0);
}

TEST_CASE("grid csv round trip") {
  DpOptions opt;
  opt.split_samples = 8;
  const auto g = dp_solve(Exponent(2.0), 9, 7, 1e-4, 5, opt);
  const auto back = grid_from_csv(grid_header(g), grid_to_csv(g));
  CHECK(back.values() == g.values());
  CHECK(back.n_r() == 9);
  CHECK(back.n_M() == 7);
  CHECK_THROWS_AS(grid_from_csv(grid_header(g), "r,M,value\n0,0,x\n"), Error);
}
