// Command-line front end. Talks to the library only through clab.h.

#include <clab/clab.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

using Json = nlohmann::json;

enum Exit { kOk = 0, kCheckFailed = 1, kUsage = 2, kInfeasible = 3, kIo = 4, kInternal = 5 };

int exit_for(clab_status s) {
  switch (s) {
    case CLAB_OK: return kOk;
    case CLAB_ERR_INVALID_ARGUMENT:
    case CLAB_ERR_DOMAIN:
    case CLAB_ERR_PARSE:
    case CLAB_ERR_MEASURABILITY: return kUsage;
    case CLAB_ERR_INFEASIBLE: return kInfeasible;
    case CLAB_ERR_IO: return kIo;
    case CLAB_ERR_INTERNAL: return kInternal;
  }
  return kInternal;
}

struct Flag {
  const char* name;   // long flag without dashes
  const char* key;    // config key
  const char* help;
  enum Kind { Real, Int, Text } kind;
};

const std::vector<Flag>& flags() {
  static const std::vector<Flag> f{
      {"F", "F", "energy <f^p>", Flag::Real},
      {"f", "f", "average <f>", Flag::Real},
      {"M", "M", "Carleson mass", Flag::Real},
      {"C", "C", "Carleson constant", Flag::Real},
      {"samples", "samples", "random samples per exponent", Flag::Int},
      {"mollified-samples", "mollified_samples", "splits checked for the mollified function", Flag::Int},
      {"grid", "grid", "grid shape, e.g. 51x51", Flag::Text},
      {"tol", "tol", "value-iteration stopping tolerance", Flag::Real},
      {"max-iters", "max_iters", "value-iteration cap", Flag::Int},
      {"split-samples", "split_samples", "sampled split offsets per axis", Flag::Int},
      {"min-sup", "min_sup", "required grid supremum", Flag::Real},
      {"depth", "depth", "tree depth", Flag::Int},
      {"method", "method", "finite-horizon or greedy", Flag::Text},
      {"tree", "tree", "tree JSON input", Flag::Text},
      {"trees", "trees", "number of random trees", Flag::Int},
      {"space", "space", "filtered space JSON input", Flag::Text},
      {"spaces", "spaces", "number of random spaces", Flag::Int},
      {"eps", "eps", "remodeling accuracy", Flag::Real},
      {"N", "N", "remodeling depth", Flag::Int},
      {"schedule", "schedule", "random, adversarial or zero", Flag::Text},
      {"target-F", "target_F", "rebalance target energy", Flag::Real},
      {"delta1", "delta1", "energy slack", Flag::Real},
      {"delta2", "delta2", "mass slack", Flag::Real},
  };
  return f;
}

bool write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) return false;
    out << content;
    if (!out.flush()) return false;
  }
  std::filesystem::rename(tmp, path, ec);
  return !ec;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"clab: Bellman-function laboratory for the Carleson embedding and Doob inequalities"};
  app.require_subcommand(0, 1);
  bool show_version = false;
  app.add_flag("--version", show_version, "print the library version");

  // values shared by all subcommands
  double p = 2.0;
  unsigned long long seed = 0;
  int threads = 1;
  std::string config_path, output, output_dir;
  std::vector<std::string> sets;
  bool quiet = false;
  std::vector<double> reals(flags().size());
  std::vector<long long> ints(flags().size());
  std::vector<std::string> texts(flags().size());

  const char* commands[] = {"eval",     "verify-supersolution", "dp-solve",  "extract-tree", "embed-check",
                            "simulate", "remodel",              "theorem-a", "theorem-b",    "doob"};
  std::vector<CLI::App*> subs;
  std::vector<std::vector<CLI::Option*>> sub_opts;
  std::vector<CLI::Option*> p_opts, seed_opts;
  for (const char* c : commands) {
    CLI::App* s = app.add_subcommand(c, std::string("run the ") + c + " pipeline");
    p_opts.push_back(s->add_option("--p", p, "exponent p > 1"));
    seed_opts.push_back(s->add_option("--seed", seed, "random seed"));
    s->add_option("--threads", threads, "worker threads for grid sweeps")->check(CLI::PositiveNumber);
    s->add_option("--config", config_path, "JSON config; flags override its keys");
    s->add_option("--output,-o", output, "report path (default: <output-dir>/<command>.report.json)");
    s->add_option("--output-dir", output_dir, "directory for report and artifacts (default: $CLAB_OUTPUT_DIR or .)");
    s->add_option("--set", sets, "extra config entry key=value (value parsed as JSON when possible)");
    s->add_flag("--quiet,-q", quiet, "no table on standard output");
    std::vector<CLI::Option*> opts;
    for (std::size_t i = 0; i < flags().size(); ++i) {
      const Flag& f = flags()[i];
      const std::string name = std::string("--") + f.name;
      if (f.kind == Flag::Real) opts.push_back(s->add_option(name, reals[i], f.help));
      else if (f.kind == Flag::Int) opts.push_back(s->add_option(name, ints[i], f.help));
      else opts.push_back(s->add_option(name, texts[i], f.help));
    }
    subs.push_back(s);
    sub_opts.push_back(std::move(opts));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (show_version) {
    std::cout << clab_version() << "\n";
    return kOk;
  }
  std::size_t which = subs.size();
  for (std::size_t i = 0; i < subs.size(); ++i)
    if (subs[i]->parsed()) which = i;
  if (which == subs.size()) {
    std::cerr << app.help();
    return kUsage;
  }
  const std::string command = commands[which];

  Json cfg = Json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path, std::ios::binary);
    if (!in) {
      std::cerr << "error: cannot read config '" << config_path << "'\n";
      return kIo;
    }
    try {
      cfg = Json::parse(in);
    } catch (const Json::parse_error& e) {
      std::cerr << "error: config '" << config_path << "': " << e.what() << "\n";
      return kUsage;
    }
    if (!cfg.is_object()) {
      std::cerr << "error: config must be a JSON object\n";
      return kUsage;
    }
  }
  if (p_opts[which]->count() || !cfg.contains("p")) cfg["p"] = p;
  if (seed_opts[which]->count() || !cfg.contains("seed")) cfg["seed"] = seed;
  if (subs[which]->get_option("--threads")->count() || !cfg.contains("threads")) cfg["threads"] = threads;
  for (std::size_t i = 0; i < flags().size(); ++i) {
    if (!sub_opts[which][i]->count()) continue;
    const Flag& f = flags()[i];
    if (f.kind == Flag::Real) cfg[f.key] = reals[i];
    else if (f.kind == Flag::Int) cfg[f.key] = ints[i];
    else cfg[f.key] = texts[i];
  }
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
      return kUsage;
    }
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    try {
      cfg[key] = Json::parse(value);
    } catch (const Json::parse_error&) {
      cfg[key] = value;
    }
  }

  clab_report* report = nullptr;
  const clab_status st = clab_run(command.c_str(), cfg.dump().c_str(), &report);
  if (st != CLAB_OK) {
    std::cerr << "error (" << clab_status_name(st) << "): " << clab_last_error() << "\n";
    return exit_for(st);
  }

  namespace fs = std::filesystem;
  if (output_dir.empty()) {
    const char* env = std::getenv("CLAB_OUTPUT_DIR");
    output_dir = env && *env ? env : ".";
  }
  const fs::path report_path = output.empty() ? fs::path(output_dir) / (command + ".report.json") : fs::path(output);
  int code = clab_report_passed(report) ? kOk : kCheckFailed;
  if (!write_file(report_path, clab_report_json(report))) {
    std::cerr << "error: cannot write report '" << report_path.string() << "'\n";
    code = kIo;
  }
  for (std::size_t i = 0; code != kIo && i < clab_report_artifact_count(report); ++i) {
    const char* name = nullptr;
    const char* content = nullptr;
    clab_report_artifact(report, i, &name, &content);
    const fs::path path = fs::path(output_dir) / name;
    if (!write_file(path, content)) {
      std::cerr << "error: cannot write '" << path.string() << "'\n";
      code = kIo;
    }
  }
  if (!quiet) std::cout << clab_report_table(report);
  clab_report_free(report);
  return code;
}
