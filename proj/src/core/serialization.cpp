#include "clab/serialization.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "clab/error.hpp"

namespace clab {

namespace {

const Json& field(const Json& j, const char* key, const std::string& what) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorKind::Parse, what + ": missing field '" + key + "'");
  return j.at(key);
}

double as_double(const Json& v, const std::string& what) {
  if (!v.is_number()) fail(ErrorKind::Parse, what + ": expected a number");
  return v.get<double>();
}

long long as_integer(const Json& v, const std::string& what) {
  if (!v.is_number_integer()) fail(ErrorKind::Parse, what + ": expected an integer");
  return v.get<long long>();
}

}  // namespace

std::vector<double> doubles_from_json(const Json& j, const std::string& what) {
  if (!j.is_array()) fail(ErrorKind::Parse, what + ": expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(as_double(v, what));
  return out;
}

Json tree_to_json(const DyadicWeightedTree& tree) {
  Json w = Json::object();
  const auto& W = tree.weights_by_level();
  for (std::size_t k = 0; k < W.size(); ++k)
    for (std::size_t j = 0; j < W[k].size(); ++j)
      if (W[k][j] != 0.0) w[std::to_string(k) + "," + std::to_string(j + 1)] = W[k][j];
  return Json{{"depth", tree.depth()}, {"root_length", tree.root_length()}, {"leaf_values", tree.leaf_values()},
              {"weights", std::move(w)}};
}

DyadicWeightedTree tree_from_json(const Json& j) {
  const std::string what = "tree";
  const long long depth = as_integer(field(j, "depth", what), what + ".depth");
  if (depth < 0 || depth > 24) fail(ErrorKind::Parse, "tree.depth must lie in 0..24");
  const double L = j.contains("root_length") ? as_double(j.at("root_length"), "tree.root_length") : 1.0;
  auto leaves = doubles_from_json(field(j, "leaf_values", what), "tree.leaf_values");
  DyadicWeightedTree tree(static_cast<int>(depth), std::move(leaves), L);
  if (j.contains("weights")) {
    const Json& w = j.at("weights");
    if (!w.is_object()) fail(ErrorKind::Parse, "tree.weights must be an object keyed \"k,j\"");
    for (auto it = w.begin(); it != w.end(); ++it) {
      int k = 0, jj = 0;
      char comma = 0;
      std::istringstream in(it.key());
      if (!(in >> k >> comma >> jj) || comma != ',' || !in.eof())
        fail(ErrorKind::Parse, "tree.weights key '" + it.key() + "' is not \"k,j\"");
      tree.set_weight({k, jj}, as_double(it.value(), "tree.weights"));
    }
  }
  return tree;
}

Json space_to_json(const FilteredSpace& s) {
  Json atoms = Json::array();
  for (std::size_t x = 0; x < s.atom_count(); ++x)
    atoms.push_back(Json{{"id", s.atom_ids().empty() ? static_cast<long long>(x) : s.atom_ids()[x]},
                         {"mass", s.masses()[x]}});
  Json levels = Json::array();
  for (std::size_t n = 0; n < s.level_count(); ++n) levels.push_back(s.partition(n));
  return Json{{"atoms", std::move(atoms)}, {"levels", std::move(levels)}};
}

FilteredSpace space_from_json(const Json& j) {
  const Json& atoms = field(j, "atoms", "space");
  if (!atoms.is_array() || atoms.empty()) fail(ErrorKind::Parse, "space.atoms must be a nonempty array");
  std::vector<double> masses;
  std::vector<long long> ids;
  for (const auto& a : atoms) {
    masses.push_back(as_double(field(a, "mass", "space.atoms[]"), "space.atoms[].mass"));
    ids.push_back(a.contains("id") ? as_integer(a.at("id"), "space.atoms[].id") : static_cast<long long>(ids.size()));
  }
  const Json& lv = field(j, "levels", "space");
  if (!lv.is_array()) fail(ErrorKind::Parse, "space.levels must be an array");
  std::vector<std::vector<int>> levels;
  for (const auto& row : lv) {
    if (!row.is_array() || row.size() != masses.size())
      fail(ErrorKind::Parse, "space.levels rows need one label per atom");
    std::vector<int> r;
    for (const auto& v : row) r.push_back(static_cast<int>(as_integer(v, "space.levels")));
    levels.push_back(std::move(r));
  }
  return FilteredSpace(std::move(masses), std::move(levels), std::move(ids));
}

Json checks_to_json(const std::vector<Check>& checks) {
  Json out = Json::array();
  for (const auto& c : checks)
    out.push_back(Json{{"name", c.name},
                       {"pass", c.pass},
                       {"margin", number(c.margin)},
                       {"tolerance", c.tolerance},
                       {"location", c.location}});
  return out;
}

Check condition_check(const ConditionReport& c) {
  Check out;
  out.name = c.condition;
  out.tolerance = c.tolerance;
  out.margin = c.samples == 0 ? std::numeric_limits<double>::infinity() : c.worst_margin;
  out.pass = c.passed();
  Json args = Json::array();
  for (double a : c.arg_at_worst) args.push_back(number(a));
  out.location = Json{{"arg_at_worst", std::move(args)}, {"samples", c.samples}};
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorKind::Io, "read error on '" + path + "'");
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) fail(ErrorKind::Io, "write error on '" + path + "'");
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::Parse, "'" + path + "': " + e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

}  // namespace clab
