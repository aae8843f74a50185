#include <doctest.h>

#include "clab/error.hpp"
#include "clab/pipelines.hpp"
#include "clab/rng.hpp"
#include "clab/serialization.hpp"

using namespace clab;

namespace {

RunResult run(const std::string& cmd, Json params) {
  return run_pipeline(RunConfig::from_json(cmd, params));
}

const Check* find(const RunReport& r, const std::string& name) {
  for (const auto& c : r.checks())
    if (c.name == name) return &c;
  return nullptr;
}

}  // namespace

TEST_CASE("tree json round trip") {
  Rng rng(1);
  const auto t = random_tree(rng, 4);
  const auto back = tree_from_json(tree_to_json(t));
  CHECK(back.depth() == 4);
  CHECK(back.leaf_values() == t.leaf_values());
  CHECK(back.weights_by_level() == t.weights_by_level());
  CHECK(dump_json(tree_to_json(back)) == dump_json(tree_to_json(t)));
}

TEST_CASE("malformed tree json") {
  CHECK_THROWS_AS(tree_from_json(Json::parse(R"({"depth": 1})")), Error);
  CHECK_THROWS_AS(tree_from_json(Json::parse(R"({"depth": 1, "leaf_values": [1]})")), Error);
  CHECK_THROWS_AS(tree_from_json(Json::parse(R"({"depth": 1, "leaf_values": [1, 2], "weights": {"x": 1}})")), Error);
  try {
    tree_from_json(Json::parse(R"({"depth": "a", "leaf_values": [1, 2]})"));
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
  }
}

TEST_CASE("space json round trip") {
  Rng rng(2);
  const auto s = random_space(rng, 9, 3);
  const auto back = space_from_json(space_to_json(s));
  CHECK(back.masses() == s.masses());
  CHECK(back.level_count() == s.level_count());
  for (std::size_t n = 0; n < s.level_count(); ++n) CHECK(back.partition(n) == s.partition(n));
}

TEST_CASE("report json is deterministic and sorted") {
  const auto a = run("eval", {{"F", 1.0}, {"f", 0.5}, {"M", 0.5}});
  const auto b = run("eval", {{"F", 1.0}, {"f", 0.5}, {"M", 0.5}});
  const std::string ja = dump_json(a.report.to_json());
  CHECK(ja == dump_json(b.report.to_json()));
  CHECK(ja.find("time") == std::string::npos);
  CHECK(ja.find("\"checks\"") < ja.find("\"command\""));
  CHECK(a.report.all_passed());
}

TEST_CASE("unknown keys and bad values are rejected") {
  try {
    RunConfig::from_json("eval", {{"nope", 1}});
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
  }
  CHECK_THROWS_AS(RunConfig::from_json("no-such-command", Json::object()), Error);
  CHECK_THROWS_AS(run("eval", {{"F", 1.0}, {"f", 1.1}, {"M", 0.5}}), Error);
  CHECK_THROWS_AS(run("remodel", {{"eps", 0.0}}), Error);
  CHECK_THROWS_AS(run("theorem-a", {{"eps", Json::array({1.5})}}), Error);
}

TEST_CASE("eval point value") {
  const auto r = run("eval", {{"F", 1.0}, {"f", 1.0}, {"M", 1.0}});
  CHECK(r.report.summary()["B"].get<double>() == doctest::Approx(2.0));
}

TEST_CASE("small pipelines pass") {
  CHECK(run("verify-supersolution", {{"samples", 300}, {"mollified_samples", 10}}).report.all_passed());
  CHECK(run("embed-check", {{"trees", 50}}).report.all_passed());
  CHECK(run("simulate", {{"spaces", 50}, {"process_instances", 10}}).report.all_passed());
  CHECK(run("doob", {{"spaces", 50}}).report.all_passed());
  const auto rm = run("remodel", {{"N", 3}, {"eps", 0.05}});
  CHECK(rm.report.all_passed());
  CHECK(rm.artifacts.size() == 2);
}

TEST_CASE("dp-solve reports a failing minimum as a failed check") {
  const auto r = run("dp-solve", {{"grid", "11x11"}, {"split_samples", 8}, {"max_iters", 5}, {"min_sup", 3.99}});
  const Check* c = find(r.report, "dp.sup_reaches");
  REQUIRE(c != nullptr);
  CHECK_FALSE(c->pass);
  CHECK_FALSE(r.report.all_passed());
}

TEST_CASE("table lists every check") {
  const auto r = run("eval", {{"F", 1.0}, {"f", 0.5}, {"M", 0.5}});
  const std::string t = r.table();
  for (const auto& c : r.report.checks()) CHECK(t.find(c.name) != std::string::npos);
}
