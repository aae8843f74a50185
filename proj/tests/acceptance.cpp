// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "clab/dyadic_model.hpp"
#include "clab/pipelines.hpp"
#include "clab/remodeling.hpp"
#include "clab/rng.hpp"
#include "clab/serialization.hpp"

using namespace clab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& s) { notes.push_back(s); }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

RunResult run(const std::string& cmd, const Json& params) { return run_pipeline(RunConfig::from_json(cmd, params)); }

// Every check whose name ends with one of `suffixes` must pass; at least one must exist per suffix.
void require_checks(Outcome& o, const RunReport& r, const std::vector<std::string>& suffixes) {
  for (const auto& s : suffixes) {
    int seen = 0;
    for (const auto& c : r.checks()) {
      if (c.name.size() < s.size() || c.name.compare(c.name.size() - s.size(), s.size(), s) != 0) continue;
      ++seen;
      o.require(c.pass, c.name + " margin " + num(c.margin) + " tol " + num(c.tolerance));
    }
    o.require(seen > 0, "no check named *" + s);
  }
}

void require_all(Outcome& o, const RunReport& r) {
  for (const auto& c : r.checks()) o.require(c.pass, c.name + " margin " + num(c.margin));
}

int cli(const std::string& args) {
  const std::string cmd = std::string(CLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---------------------------------------------------------------------------

RunResult g_super;  // shared by criteria 1-3
double g_super_seconds = 0.0;

Outcome criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  g_super = run("verify-supersolution",
                {{"p_values", Json::array({1.5, 2.0, 3.0})}, {"samples", 10000}, {"seed", 7}, {"hull_points", 101},
                 {"mollifier_eps", 0.05}});
  g_super_seconds = seconds_since(t0);
  require_checks(o, g_super.report,
                 {"range.lower", "range.upper", "homogeneity", "scaling", "hessian.max_eigenvalue", "dM.monotone",
                  "dM.finite_difference"});
  for (double p : {1.5, 2.0, 3.0}) {
    bool found = false;
    for (const auto& c : g_super.report.checks())
      if (c.name.rfind("p=" + num(p) + ".", 0) == 0) found = true;
    o.require(found, "checks for p=" + num(p));
  }
  o.require(g_super_seconds <= 60.0, "runtime " + num(g_super_seconds) + " s > 60 s");
  o.note("suite incl. mollified and hull checks: " + num(g_super_seconds) + " s");
  return o;
}

Outcome criterion2() {
  Outcome o;
  require_checks(o, g_super.report, {".main_inequality", "mollified.main_inequality"});
  for (const auto& c : g_super.report.checks())
    if (c.name.find("main_inequality") != std::string::npos) o.note(c.name + " worst margin " + num(c.margin));
  return o;
}

Outcome criterion3() {
  Outcome o;
  require_checks(o, g_super.report,
                 {"hull.identity_fd", "hull.phi0", "hull.phi_nonnegative", "hull.phi_below_sharp_constant",
                  "hull.phi_slope_le_minus_one"});
  for (const auto& c : g_super.report.checks())
    if (c.name.find("identity_fd") != std::string::npos) o.note(c.name + " residual " + num(-c.margin));
  return o;
}

Outcome criterion4() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run("dp-solve", {{"p", 2.0}, {"grid", "51x51"}, {"split_samples", 32}, {"tol", 1e-5}, {"min_sup", 3.5}});
  const double secs = seconds_since(t0);
  require_checks(o, r.report,
                 {"dp.pointwise_nondecreasing", "dp.sup_nondecreasing", "dp.dominated_by_supersolution",
                  "dp.boundary_row", "dp.sup_reaches"});
  const double sup = r.report.summary()["sup"].get<double>();
  o.require(sup >= 3.5 && sup <= 4.0, "sup " + num(sup));
  o.require(secs <= 300.0, "runtime " + num(secs) + " s > 300 s");
  o.note("sup " + num(sup) + " (target 4), " + num(secs) + " s");
  return o;
}

Outcome criterion5() {
  Outcome o;
  const auto r = run("embed-check", {{"p", 2.0}, {"trees", 1000}, {"depth", 6}, {"seed", 5}});
  require_checks(o, r.report, {"embedding.ratio_below_sharp", "telescoping.partial_sum", "telescoping.final_bound"});
  const double worst = r.report.summary()["worst_ratio"].get<double>();
  o.require(worst <= 4.0 + 1e-9, "worst ratio " + num(worst));
  o.note("worst ratio over 1000 trees " + num(worst));

  DyadicWeightedTree t(1, {1.0, 3.0});
  t.set_weight({0, 1}, 0.5);
  t.set_weight({1, 1}, 0.25);
  t.set_weight({1, 2}, 0.25);
  const Exponent p(2.0);
  const auto e = embedding_sum(t, p);
  const auto tel = telescoping_check(t, p);
  o.require(e.embedding_sum == 4.5, "embedding_sum " + num(e.embedding_sum));
  o.require(e.carleson_constant == 1.0, "carleson constant " + num(e.carleson_constant));
  o.require(tel.root_bound == 12.0, "telescoped bound " + num(tel.root_bound));
  o.require(tel.passed(), "telescoping on the worked example");
  return o;
}

Outcome criterion6() {
  Outcome o;
  const auto r = run("simulate", {{"p", 2.0}, {"spaces", 1000}, {"process_instances", 100}, {"seed", 6}});
  require_checks(o, r.report,
                 {"martingale.tower", "martingale.conservation", "doob.ratio_below_sharp",
                  "maximal_carleson.accounting", "maximal_carleson.constant", "bellman_process.step",
                  "bellman_process.telescoped"});
  for (const auto& c : r.report.checks())
    if (c.name == "martingale.tower" || c.name == "maximal_carleson.accounting")
      o.require(c.tolerance <= 1e-12, c.name + " tolerance " + num(c.tolerance));
  o.note("worst Doob ratio " + num(r.report.summary()["worst_doob_ratio"].get<double>()));
  return o;
}

Outcome criterion7() {
  Outcome o;
  double worst_c = 0.0, worst_chain = 1e300;
  int runs = 0;
  for (double eps : {0.05, 0.02, 0.01})
    for (int N : {3, 5})
      for (const char* sched : {"random", "adversarial"})
        for (int seed = 0; seed < 4; ++seed) {
          const auto r = run("remodel", {{"p", 2.0}, {"eps", eps}, {"N", N}, {"schedule", sched}, {"seed", seed}});
          require_all(o, r.report);
          require_checks(o, r.report,
                         {"audit.child_ratio", "audit.union_ratio", "audit.normalized_ratio", "audit.mass_sandwich",
                          "audit.average_sandwich", "audit.bad_set_measure", "audit.haar_budget",
                          "carleson.carleson_transfer", "energy.embedding_lower", "energy.energy_upper",
                          "maximal.allocation_capacity", "maximal.allocation_weight_identity", "maximal.chain"});
          const auto& c1 = r.report.summary()["carleson"];
          const double bound = std::pow(1 + eps, N) / std::pow(1 - eps, 2 * N);
          const double measured = c1["measured_constant"].get<double>();
          o.require(measured <= bound + 1e-12, "transferred constant " + num(measured) + " > " + num(bound));
          worst_c = std::max(worst_c, measured / bound);
          for (const auto& c : r.report.checks())
            if (c.name == "maximal.chain") worst_chain = std::min(worst_chain, c.margin);
          ++runs;
        }
  const double b = std::pow(1.01, 5) / std::pow(0.99, 10);
  o.require(std::abs(b - 1.16213) < 1e-5, "bound at eps=0.01, N=5 is " + num(b));
  o.note(std::to_string(runs) + " remodels; max measured/bound " + num(worst_c) + "; bound(0.01,5) " + num(b) +
         "; min chain slack " + num(worst_chain));

  Rng rng(77);
  int exact = 0;
  for (int i = 0; i < 20; ++i) {
    const int N = 1 + i % 6;
    const auto tree = random_tree(rng, N);
    const auto out = remodel(tree, zero_schedule(0.0, N));
    const auto avg = level_averages(tree);
    const auto en = verify_energy_bounds(out, tree, Exponent(2.0));
    bool same = en.values["transferred_sum"].get<double>() == embedding_sum(tree, Exponent(2.0)).embedding_sum;
    for (int k = 0; k <= N; ++k)
      for (int j = 0; j < (1 << k); ++j)
        same = same && out.set_avg[k][j] == avg[k][j] && out.set_mass[k][j] == tree.length(k);
    o.require(same, "eps=0 tree " + std::to_string(i) + " differs from the dyadic model");
    exact += same;
  }
  o.note("eps=0 bitwise reproductions " + std::to_string(exact) + "/20");
  return o;
}

Outcome criterion8() {
  Outcome o;
  const auto r = run("theorem-a", {{"p", 2.0}, {"F", 1.0}, {"f", 0.6}, {"M", 1.0}, {"N", 5},
                                   {"eps", Json::array({0.05, 0.02, 0.01})}});
  require_all(o, r.report);
  require_checks(o, r.report, {"trend.ratio_increases_as_eps_decreases", "sandwich_ratio"});
  const auto& runs = r.report.summary()["runs"];
  o.require(runs.size() == 3, "three runs");
  std::string line = "ratios:";
  for (const auto& x : runs) {
    if (x.value("skipped", false)) {
      o.require(false, "eps " + num(x["eps"].get<double>()) + " skipped");
      continue;
    }
    const double eps = x["eps"].get<double>(), ratio = x["ratio"].get<double>();
    o.require(ratio >= std::pow(1 - eps, 10), "ratio below floor at eps " + num(eps));
    line += " eps=" + num(eps) + " " + num(ratio) + " (floor " + num(std::pow(1 - eps, 10)) + ")";
  }
  o.note(line);
  return o;
}

Outcome criterion9() {
  Outcome o;
  const fs::path base = fs::path(CLAB_TEST_TMP) / "acceptance9";
  fs::remove_all(base);
  const auto a = base / "a", b = base / "b";
  for (const std::string args : {"simulate --spaces 200 --seed 9", "remodel --N 5 --eps 0.01 --seed 9 --target-F 3.0",
                                 "theorem-b --seed 9 --set eps=[0.02]"}) {
    const int ra = cli(args + " -q --output-dir " + a.string());
    const int rb = cli(args + " -q --output-dir " + b.string());
    o.require(ra == 0 && rb == 0, "'" + args + "' exit " + std::to_string(ra) + "/" + std::to_string(rb));
  }
  int files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    const auto other = b / e.path().filename();
    o.require(fs::exists(other) && slurp(e.path()) == slurp(other), e.path().filename().string() + " differs");
    ++files;
  }
  o.require(files >= 4, "expected report files");

  const auto c = base / "codes";
  fs::create_directories(c);
  std::ofstream(c / "bad.json") << "{\"depth\": 1, \"leaf_values\": [1,";
  std::ofstream(c / "heavy.json") << R"({"depth": 1, "leaf_values": [1, 3], "weights": {"0,1": 2}})";
  const std::string out = " -q --output-dir " + (c / "out").string();
  const struct {
    std::string args;
    int code;
  } cases[] = {
      {"eval --F 1 --f 0.5 --M 0.5", 0},
      {"dp-solve --grid 9x9 --split-samples 8 --max-iters 3 --min-sup 3.99", 1},
      {"embed-check --tree " + (c / "bad.json").string(), 2},
      {"remodel --eps 0.05 --tree " + (c / "heavy.json").string(), 3},
      {"embed-check --tree " + (c / "missing.json").string(), 4},
  };
  for (const auto& k : cases) {
    fs::remove_all(c / "out");
    const int got = cli(k.args + out);
    o.require(got == k.code, "'" + k.args + "' exit " + std::to_string(got) + ", expected " + std::to_string(k.code));
    if (k.code >= 2) o.require(!fs::exists(c / "out"), "partial output after '" + k.args + "'");
  }
  o.note(std::to_string(files) + " files byte-identical; exit codes 0-4 as specified");
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 super-solution suite", criterion1},   {"2 main inequality", criterion2},
      {"3 hull identity", criterion3},          {"4 DP sharpness at p=2", criterion4},
      {"5 dyadic embedding", criterion5},       {"6 martingale suite", criterion6},
      {"7 remodeling suite", criterion7},       {"8 Theorem A trend", criterion8},
      {"9 CLI determinism and exit codes", criterion9},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    std::printf("%s  criterion %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name.c_str(), seconds_since(t0));
    for (const auto& n : o.notes) std::printf("      %s\n", n.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed ? 1 : 0;
}
