#include <doctest.h>

#include <cmath>
#include <functional>

#include "clab/dyadic_model.hpp"
#include "clab/error.hpp"
#include "clab/rng.hpp"

using namespace clab;

namespace {

DyadicWeightedTree depth_one_example() {
  DyadicWeightedTree t(1, {1.0, 3.0});
  t.set_weight({0, 1}, 0.5);
  t.set_weight({1, 1}, 0.25);
  t.set_weight({1, 2}, 0.25);
  return t;
}

// Brute force: every node's average straight from the leaves.
double brute_average(const DyadicWeightedTree& t, int k, int j) {
  const int span = 1 << (t.depth() - k);
  double s = 0.0;
  for (int i = 0; i < span; ++i) s += t.leaf_values()[static_cast<std::size_t>((j - 1) * span + i)];
  return s / span;
}

double brute_subtree(const DyadicWeightedTree& t, int k, int j) {
  double s = t.weight({k, j});
  if (k < t.depth()) s += brute_subtree(t, k + 1, 2 * j - 1) + brute_subtree(t, k + 1, 2 * j);
  return s;
}

}  // namespace

TEST_CASE("node averages") {
  CHECK(node_average(depth_one_example(), {0, 1}) == 2.0);
  CHECK(node_average(depth_one_example(), {1, 2}) == 3.0);
  const DyadicWeightedTree t(2, {0, 0, 0, 4});
  CHECK(node_average(t, {1, 2}) == 2.0);
  CHECK(node_average(t, {2, 4}) == 4.0);
}

TEST_CASE("carleson constant") {
  CHECK(carleson_constant(depth_one_example()) == doctest::Approx(1.0).epsilon(1e-15));
  DyadicWeightedTree z(3, std::vector<double>(8, 1.0));
  CHECK(carleson_constant(z) == 0.0);
  DyadicWeightedTree one(2, std::vector<double>(4, 1.0));
  one.set_weight({0, 1}, 2.0);
  CHECK(carleson_constant(one) == 2.0);
}

TEST_CASE("depth-one embedding example") {
  const auto r = embedding_sum(depth_one_example(), Exponent(2.0));
  CHECK(r.embedding_sum == doctest::Approx(0.5 * 4 + 0.25 * 1 + 0.25 * 9).epsilon(1e-15));
  CHECK(r.embedding_sum == doctest::Approx(4.5).epsilon(1e-15));
  CHECK(r.carleson_constant == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.lp_norm_p == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(r.ratio == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(r.within_bound());
}

TEST_CASE("depth-one telescoping") {
  const auto r = telescoping_check(depth_one_example(), Exponent(2.0));
  REQUIRE(r.partial_sums.size() >= 2);
  CHECK(r.partial_sums[0] == 0.0);
  CHECK(r.partial_sums[1] == doctest::Approx(2.0));
  CHECK(r.partial_sums.back() == doctest::Approx(4.5));
  // |I| B(5, 2, 1) = 20 - 8
  CHECK(r.root_bound == doctest::Approx(12.0).epsilon(1e-15));
  CHECK(r.final_bound == doctest::Approx(4.0 * 1.0 * 5.0));
  CHECK(r.passed());
}

TEST_CASE("zero weights and zero function") {
  DyadicWeightedTree t(2, {1, 2, 3, 4});
  CHECK(embedding_sum(t, Exponent(2.0)).embedding_sum == 0.0);
  DyadicWeightedTree z(2, {0, 0, 0, 0});
  z.set_weight({0, 1}, 1.0);
  const auto r = telescoping_check(z, Exponent(2.0));
  CHECK(r.embedding_sum == 0.0);
  CHECK(r.root_bound == 0.0);
  CHECK(r.passed());
}

TEST_CASE("constant leaves with all mass at the root") {
  DyadicWeightedTree t(3, std::vector<double>(8, 1.5));
  t.set_weight({0, 1}, 0.7);
  CHECK(embedding_sum(t, Exponent(3.0)).embedding_sum == doctest::Approx(0.7 * std::pow(1.5, 3)));
}

TEST_CASE("weights are validated") {
  DyadicWeightedTree t(2, {1, 2, 3, 4});
  CHECK_THROWS_AS(t.set_weight({0, 1}, -1.0), Error);
  CHECK_THROWS_AS(t.set_weight({3, 1}, 1.0), Error);
  CHECK_THROWS_AS(t.set_weight({1, 3}, 1.0), Error);
  CHECK_THROWS_AS(DyadicWeightedTree(2, {1, 2, 3}), Error);
}

TEST_CASE("random trees: averages, subtree sums and the sharp bound") {
  Rng rng(99);
  const Exponent p(2.0);
  for (int i = 0; i < 200; ++i) {
    const auto t = random_tree(rng, rng.integer(1, 6));
    const auto avg = level_averages(t);
    const auto sub = subtree_weights(t);
    double C = 0.0;
    for (int k = 0; k <= t.depth(); ++k)
      for (int j = 1; j <= (1 << k); ++j) {
        CHECK(avg[k][j - 1] == doctest::Approx(brute_average(t, k, j)).epsilon(1e-13));
        CHECK(sub[k][j - 1] == doctest::Approx(brute_subtree(t, k, j)).epsilon(1e-13));
        C = std::max(C, brute_subtree(t, k, j) / t.length(k));
      }
    CHECK(carleson_constant(t) == doctest::Approx(C).epsilon(1e-13));
    CHECK(C == doctest::Approx(1.0).epsilon(1e-12));
    const auto r = embedding_sum(t, p);
    CHECK(r.ratio <= 4.0 + 1e-9);
    CHECK(telescoping_check(t, p).passed());
  }
}

TEST_CASE("node state feeds the super-solution domain") {
  Rng rng(4);
  const Exponent p(3.0);
  const auto t = random_tree(rng, 4);
  for (int k = 0; k <= 4; ++k)
    for (int j = 1; j <= (1 << k); ++j) CHECK(in_domain(node_state(t, {k, j}, p, 1.0), p));
}
