#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

namespace clab {

using Json = nlohmann::json;

// Worst-case margin of one inequality over a family of samples.
//
// A margin is "how far the inequality holds": a negative margin is a
// violation. The condition passes when the worst margin is >= -tolerance.
struct ConditionReport {
  std::string condition;
  double tolerance = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  std::vector<double> arg_at_worst;
  std::size_t samples = 0;

  ConditionReport() = default;
  ConditionReport(std::string name, double tol) : condition(std::move(name)), tolerance(tol) {}

  void observe(double margin, std::vector<double> arg);
  void merge(const ConditionReport& other);
  bool passed() const { return samples == 0 || worst_margin >= -tolerance; }
  Json to_json() const;
};

// One pass/fail line of a run report.
struct Check {
  std::string name;
  bool pass = false;
  double margin = 0.0;
  double tolerance = 0.0;
  Json location;  // free-form: block id, node, argument vector...
};

struct Skip {
  std::string name;
  std::string reason;
};

// Report emitted by every pipeline. Serialisation is deterministic: no
// timestamps, object keys sorted.
class RunReport {
 public:
  static constexpr int kSchemaVersion = 1;

  RunReport() = default;
  RunReport(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed) {}

  void add_check(std::string name, double margin, double tolerance, Json location = Json::object());
  void add_condition(const ConditionReport& c, const std::string& prefix = {});
  void skip(std::string name, std::string reason);

  Json& summary() { return summary_; }
  const Json& summary() const { return summary_; }
  Json& config() { return config_; }

  const std::vector<Check>& checks() const { return checks_; }
  const std::vector<Skip>& skipped() const { return skipped_; }
  const std::string& command() const { return command_; }
  bool all_passed() const;

  Json to_json() const;

 private:
  std::string command_;
  std::uint64_t seed_ = 0;
  Json config_ = Json::object();
  Json summary_ = Json::object();
  std::vector<Check> checks_;
  std::vector<Skip> skipped_;
};

// Doubles that may be +/-inf or NaN are written as strings so that the JSON
// stays valid and byte-stable.
Json number(double v);

}  // namespace clab
