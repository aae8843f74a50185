#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace clab {

// Seeded generator with labelled sub-streams.
//
// Every pipeline stage derives its own stream from the run seed and a
// label, so adding draws to one stage never perturbs another. Uniform
// variates are built from raw 64-bit output rather than std distributions,
// whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  Rng derive(std::string_view label) const;

  std::uint64_t next() { return engine_(); }
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  int integer(int lo, int hi);            // inclusive range

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::string_view label);

}  // namespace clab
