#include "clab/report.hpp"

#include <cmath>

namespace clab {

Json number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

void ConditionReport::observe(double margin, std::vector<double> arg) {
  ++samples;
  // NaN margins count as the worst possible outcome.
  if (std::isnan(margin)) margin = -std::numeric_limits<double>::infinity();
  if (samples == 1 || margin < worst_margin) {
    worst_margin = margin;
    arg_at_worst = std::move(arg);
  }
}

void ConditionReport::merge(const ConditionReport& other) {
  if (other.samples == 0) return;
  if (samples == 0 || other.worst_margin < worst_margin) {
    worst_margin = other.worst_margin;
    arg_at_worst = other.arg_at_worst;
  }
  samples += other.samples;
}

Json ConditionReport::to_json() const {
  Json j;
  j["condition"] = condition;
  j["worst_margin"] = samples == 0 ? Json(nullptr) : number(worst_margin);
  Json args = Json::array();
  for (double a : arg_at_worst) args.push_back(number(a));
  j["arg_at_worst"] = std::move(args);
  j["samples"] = samples;
  j["tolerance"] = tolerance;
  j["pass"] = passed();
  return j;
}

void RunReport::add_check(std::string name, double margin, double tolerance, Json location) {
  Check c;
  c.name = std::move(name);
  c.margin = margin;
  c.tolerance = tolerance;
  c.pass = !std::isnan(margin) && margin >= -tolerance;
  c.location = std::move(location);
  checks_.push_back(std::move(c));
}

void RunReport::add_condition(const ConditionReport& c, const std::string& prefix) {
  Json loc = Json::object();
  Json args = Json::array();
  for (double a : c.arg_at_worst) args.push_back(number(a));
  loc["arg_at_worst"] = std::move(args);
  loc["samples"] = c.samples;
  // An empty condition is vacuously satisfied: margin +inf.
  double margin = c.samples == 0 ? std::numeric_limits<double>::infinity() : c.worst_margin;
  add_check(prefix.empty() ? c.condition : prefix + "." + c.condition, margin, c.tolerance,
            std::move(loc));
}

void RunReport::skip(std::string name, std::string reason) {
  skipped_.push_back({std::move(name), std::move(reason)});
}

bool RunReport::all_passed() const {
  for (const auto& c : checks_)
    if (!c.pass) return false;
  return true;
}

Json RunReport::to_json() const {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["version"] = CLAB_VERSION_STRING;
  j["command"] = command_;
  j["seed"] = seed_;
  j["config"] = config_;
  Json checks = Json::array();
  for (const auto& c : checks_) {
    checks.push_back({{"name", c.name},
                      {"pass", c.pass},
                      {"margin", number(c.margin)},
                      {"tolerance", c.tolerance},
                      {"location", c.location}});
  }
  j["checks"] = std::move(checks);
  Json skipped = Json::array();
  for (const auto& s : skipped_) skipped.push_back({{"name", s.name}, {"reason", s.reason}});
  j["skipped"] = std::move(skipped);
  j["summary"] = summary_;
  j["passed"] = all_passed();
  return j;
}

}  // namespace clab
