#pragma once

#include <string>
#include <vector>

#include "clab/dyadic_model.hpp"
#include "clab/martingale_lab.hpp"
#include "clab/report.hpp"

namespace clab {

// {"depth", "root_length", "leaf_values", "weights": {"k,j": alpha}}
Json tree_to_json(const DyadicWeightedTree& tree);
DyadicWeightedTree tree_from_json(const Json& j);

// {"atoms": [{"id", "mass"}], "levels": [[label per atom], ...]}
Json space_to_json(const FilteredSpace& s);
FilteredSpace space_from_json(const Json& j);

Json checks_to_json(const std::vector<Check>& checks);
// Check from the worst margin of a condition (vacuous conditions pass).
Check condition_check(const ConditionReport& c);

std::vector<double> doubles_from_json(const Json& j, const std::string& what);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
Json read_json_file(const std::string& path);

// Deterministic dump: sorted keys, two-space indent, trailing newline.
std::string dump_json(const Json& j);

}  // namespace clab
