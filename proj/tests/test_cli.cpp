#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
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

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::path(CLAB_TEST_TMP) / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("version and usage") {
  CHECK(run("--version") == 0);
  CHECK(run("") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("eval --F notanumber") == 2);
}

TEST_CASE("eval writes a report into the output directory") {
  const auto d = fresh_dir("eval");
  CHECK(run("eval --F 1 --f 0.5 --M 0.5 -q --output-dir " + d.string()) == 0);
  CHECK(fs::exists(d / "eval.report.json"));
}

TEST_CASE("CLAB_OUTPUT_DIR is the default output directory") {
  const auto d = fresh_dir("env");
  CHECK(run("") == 2);
  const std::string cmd = "CLAB_OUTPUT_DIR=" + d.string() + " " + CLAB_CLI_PATH + " eval -q > /dev/null 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(d / "eval.report.json"));
}

TEST_CASE("identical seeds give identical bytes") {
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  const std::string args = "remodel --N 4 --eps 0.02 --seed 42 -q --output-dir ";
  CHECK(run(args + a.string()) == 0);
  CHECK(run(args + b.string()) == 0);
  for (const char* f : {"remodel.report.json", "remodel.json", "node_margins.csv"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto c = fresh_dir("det_c");
  CHECK(run("remodel --N 4 --eps 0.02 --seed 43 -q --output-dir " + c.string()) == 0);
  CHECK(slurp(a / "remodel.report.json") != slurp(c / "remodel.report.json"));
}

TEST_CASE("exit codes") {
  const auto d = fresh_dir("codes");
  // failing check: the sup of a tiny grid cannot reach 3.99
  CHECK(run("dp-solve --grid 9x9 --split-samples 8 --max-iters 3 --min-sup 3.99 -q --output-dir " + d.string()) == 1);
  CHECK(fs::exists(d / "dp-solve.report.json"));
  // malformed tree: parse error and nothing written
  const auto e = fresh_dir("codes_parse");
  {
    std::ofstream(e / "bad.json") << "{\"depth\": 1, \"leaf_values\": [1, ";
  }
  CHECK(run("embed-check --tree " + (e / "bad.json").string() + " -q --output-dir " + (e / "out").string()) == 2);
  CHECK_FALSE(fs::exists(e / "out"));
  CHECK(run("eval --F 1 --f 1.5 --M 0.5 -q --output-dir " + (e / "out").string()) == 2);
  CHECK(run("eval --set bogus=1 -q --output-dir " + (e / "out").string()) == 2);
  CHECK_FALSE(fs::exists(e / "out"));
  // missing input file
  CHECK(run("embed-check --tree " + (e / "missing.json").string() + " -q --output-dir " + (e / "out").string()) == 4);
  CHECK(run("remodel --eps 0 -q --output-dir " + (e / "out").string()) == 2);
  // root weight 2 exceeds the allocation capacity
  {
    std::ofstream(e / "heavy.json") << R"({"depth": 1, "leaf_values": [1, 3], "weights": {"0,1": 2}})";
  }
  CHECK(run("remodel --eps 0.05 --tree " + (e / "heavy.json").string() + " -q --output-dir " + (e / "out").string()) == 3);
  CHECK_FALSE(fs::exists(e / "out"));
}

TEST_CASE("config file and flag override") {
  const auto d = fresh_dir("cfg");
  {
    std::ofstream(d / "c.json") << R"({"F": 1, "f": 0.5, "M": 0.5, "p": 3})";
  }
  CHECK(run("eval --config " + (d / "c.json").string() + " --p 2 -q --output-dir " + d.string()) == 0);
  const std::string rep = slurp(d / "eval.report.json");
  CHECK(rep.find("\"p\": 2.0") != std::string::npos);
  {
    std::ofstream(d / "broken.json") << "[1, 2";
  }
  CHECK(run("eval --config " + (d / "broken.json").string() + " -q") == 2);
}
