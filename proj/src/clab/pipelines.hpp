#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "clab/report.hpp"

namespace clab {

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"eval",     "verify-supersolution", "dp-solve",  "extract-tree",
                                              "embed-check", "simulate",          "remodel",   "theorem-a",
                                              "theorem-b",   "doob"};
  return names;
}

// Parsed run configuration. `params` keeps the command-specific keys;
// unknown keys are rejected when the command reads its parameters.
struct RunConfig {
  std::string command;
  double p = 2.0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::map<std::string, double> tolerances;
  Json params = Json::object();

  double tol(const std::string& name) const { return tolerances.at(name); }

  // Throws Parse on malformed values, InvalidArgument on out-of-range ones.
  static RunConfig from_json(const std::string& command, const Json& j);
  Json to_json() const;
};

struct Artifact {
  std::string name;  // file name relative to the output directory
  std::string content;
};

struct RunResult {
  RunReport report;
  std::vector<Artifact> artifacts;
  // Fixed-width text table of the checks and skips.
  std::string table() const;
};

RunResult run_pipeline(const RunConfig& cfg);

}  // namespace clab
