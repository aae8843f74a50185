#include "clab/martingale_lab.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "clab/error.hpp"
#include "clab/rng.hpp"

namespace clab {

FilteredSpace::FilteredSpace(std::vector<double> masses, std::vector<std::vector<int>> levels,
                             std::vector<long long> atom_ids)
    : masses_(std::move(masses)), ids_(std::move(atom_ids)) {
  const std::size_t n = masses_.size();
  if (n == 0) fail(ErrorKind::InvalidArgument, "space needs at least one atom");
  if (ids_.empty()) {
    ids_.resize(n);
    std::iota(ids_.begin(), ids_.end(), 0LL);
  }
  if (ids_.size() != n) fail(ErrorKind::InvalidArgument, "atom ids and masses differ in length");
  double total = 0.0;
  for (double m : masses_) {
    if (!(m > 0.0) || !std::isfinite(m)) fail(ErrorKind::InvalidArgument, "atom masses must be positive");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os.precision(17);
    os << "atom masses sum to " << total << ", not 1";
    fail(ErrorKind::InvalidArgument, os.str());
  }
  if (levels.empty()) levels.push_back(std::vector<int>(n, 0));

  for (std::size_t lv = 0; lv < levels.size(); ++lv) {
    if (levels[lv].size() != n) fail(ErrorKind::InvalidArgument, "level " + std::to_string(lv) + " does not label every atom");
    std::map<int, int> relabel;
    std::vector<int> part(n);
    for (std::size_t x = 0; x < n; ++x) {
      auto it = relabel.try_emplace(levels[lv][x], static_cast<int>(relabel.size())).first;
      part[x] = it->second;
    }
    blocks_.push_back(std::move(part));
  }
  if (*std::max_element(blocks_[0].begin(), blocks_[0].end()) != 0)
    fail(ErrorKind::InvalidArgument, "level 0 must be the trivial partition");
  {
    std::vector<int> atoms(n);
    std::iota(atoms.begin(), atoms.end(), 0);
    const auto& last = blocks_.back();
    if (static_cast<std::size_t>(*std::max_element(last.begin(), last.end())) + 1 != n) {
      blocks_.push_back(atoms);
      completed_ = true;
    }
  }

  const std::size_t L = blocks_.size();
  block_mass_.resize(L);
  members_.resize(L);
  parents_.resize(L);
  for (std::size_t lv = 0; lv < L; ++lv) {
    const auto B = static_cast<std::size_t>(*std::max_element(blocks_[lv].begin(), blocks_[lv].end())) + 1;
    block_mass_[lv].assign(B, 0.0);
    members_[lv].assign(B, {});
    for (std::size_t x = 0; x < n; ++x) {
      const auto b = static_cast<std::size_t>(blocks_[lv][x]);
      block_mass_[lv][b] += masses_[x];
      members_[lv][b].push_back(x);
    }
    if (lv == 0) continue;
    parents_[lv].assign(B, -1);
    for (std::size_t x = 0; x < n; ++x) {
      const auto b = static_cast<std::size_t>(blocks_[lv][x]);
      const int up = blocks_[lv - 1][x];
      if (parents_[lv][b] == -1) parents_[lv][b] = up;
      else if (parents_[lv][b] != up) {
        std::ostringstream os;
        os << "level " << lv << " does not refine level " << lv - 1 << " (block " << b << ")";
        fail(ErrorKind::InvalidArgument, os.str());
      }
    }
  }
}

std::vector<double> condition(const FilteredSpace& s, const std::vector<double>& f, std::size_t n) {
  if (n >= s.level_count()) fail(ErrorKind::InvalidArgument, "level out of range");
  if (f.size() != s.atom_count()) fail(ErrorKind::InvalidArgument, "function does not match the atom count");
  std::vector<double> out(s.block_count(n), 0.0);
  for (std::size_t b = 0; b < out.size(); ++b) {
    double acc = 0.0;
    for (std::size_t x : s.block_atoms(n, b)) acc += s.masses()[x] * f[x];
    out[b] = acc / s.block_mass(n, b);
  }
  return out;
}

Adapted martingale(const FilteredSpace& s, const std::vector<double>& f) {
  Adapted a;
  for (std::size_t n = 0; n < s.level_count(); ++n) a.values.push_back(condition(s, f, n));
  return a;
}

std::vector<double> expand(const FilteredSpace& s, const std::vector<double>& block_values, std::size_t n) {
  std::vector<double> out(s.atom_count());
  for (std::size_t x = 0; x < out.size(); ++x) out[x] = block_values[static_cast<std::size_t>(s.block_of(n, x))];
  return out;
}

double expectation(const FilteredSpace& s, const std::vector<double>& f) {
  double acc = 0.0;
  for (std::size_t x = 0; x < f.size(); ++x) acc += s.masses()[x] * f[x];
  return acc;
}

std::vector<double> maximal_function(const FilteredSpace& s, const std::vector<double>& f) {
  const Adapted m = martingale(s, f);
  std::vector<double> out(s.atom_count(), 0.0);
  for (std::size_t x = 0; x < out.size(); ++x) {
    for (std::size_t n = 0; n < s.level_count(); ++n) out[x] = std::max(out[x], std::abs(m.at(s, n, x)));
    out[x] = std::max(out[x], std::abs(f[x]));
  }
  return out;
}

Json DoobReport::to_json() const {
  return Json{{"max_norm_p", number(max_norm_p)}, {"norm_p", number(norm_p)}, {"ratio", number(ratio)},
              {"sharp_constant", number(sharp_constant)}, {"pass", passed()}};
}

DoobReport doob_check(const FilteredSpace& s, const std::vector<double>& f, const Exponent& p) {
  const auto fs = maximal_function(s, f);
  DoobReport r;
  for (std::size_t x = 0; x < fs.size(); ++x) {
    r.max_norm_p += s.masses()[x] * std::pow(fs[x], p.p());
    r.norm_p += s.masses()[x] * std::pow(std::abs(f[x]), p.p());
  }
  r.sharp_constant = p.sharp_constant();
  r.ratio = r.norm_p > 0.0 ? r.max_norm_p / r.norm_p : 0.0;
  return r;
}

CarlesonSeq CarlesonSeq::from_atom_values(const FilteredSpace& s, const std::vector<std::vector<double>>& per_level,
                                          double C) {
  if (per_level.size() > s.level_count()) fail(ErrorKind::InvalidArgument, "more alpha levels than filtration levels");
  if (!(C > 0.0)) fail(ErrorKind::InvalidArgument, "Carleson constant must be positive");
  CarlesonSeq seq;
  seq.constant_C = C;
  seq.alpha.values.resize(s.level_count());
  for (std::size_t n = 0; n < s.level_count(); ++n) {
    seq.alpha.values[n].assign(s.block_count(n), 0.0);
    if (n >= per_level.size()) continue;
    const auto& a = per_level[n];
    if (a.size() != s.atom_count()) fail(ErrorKind::InvalidArgument, "alpha level does not match the atom count");
    for (std::size_t b = 0; b < s.block_count(n); ++b) {
      const auto& atoms = s.block_atoms(n, b);
      const double v = a[atoms.front()];
      if (!(v >= 0.0)) fail(ErrorKind::InvalidArgument, "alpha must be nonnegative");
      for (std::size_t x : atoms)
        if (a[x] != v) {
          std::ostringstream os;
          os << "alpha_" << n << " is not constant on block " << b << " (atom " << s.atom_ids()[x] << ")";
          fail(ErrorKind::Measurability, os.str());
        }
      seq.alpha.values[n][b] = v;
    }
  }
  return seq;
}

Adapted carleson_tails(const FilteredSpace& s, const CarlesonSeq& seq) {
  const std::size_t L = s.level_count();
  if (seq.alpha.values.size() != L) fail(ErrorKind::InvalidArgument, "alpha needs one entry per level");
  Adapted T;
  T.values.resize(L);
  for (std::size_t n = L; n-- > 0;) {
    if (seq.alpha.values[n].size() != s.block_count(n)) fail(ErrorKind::InvalidArgument, "alpha level size mismatch");
    T.values[n] = seq.alpha.values[n];
    if (n + 1 < L) {
      std::vector<double> acc(s.block_count(n), 0.0);
      for (std::size_t c = 0; c < s.block_count(n + 1); ++c)
        acc[static_cast<std::size_t>(s.parent_block(n + 1, c))] += s.block_mass(n + 1, c) * T.values[n + 1][c];
      for (std::size_t b = 0; b < acc.size(); ++b) T.values[n][b] += acc[b] / s.block_mass(n, b);
    }
  }
  return T;
}

Json CarlesonReport::to_json() const {
  return Json{{"margin", margin.to_json()},
              {"total_mass", number(total_mass)},
              {"measured_constant", number(measured_constant)},
              {"pass", passed()}};
}

CarlesonReport verify_carleson(const FilteredSpace& s, const CarlesonSeq& seq) {
  for (const auto& lvl : seq.alpha.values)
    for (double a : lvl)
      if (!(a >= 0.0)) fail(ErrorKind::InvalidArgument, "alpha must be nonnegative");
  const Adapted T = carleson_tails(s, seq);
  CarlesonReport r;
  for (std::size_t n = 0; n < T.values.size(); ++n)
    for (std::size_t b = 0; b < T.values[n].size(); ++b) {
      r.margin.observe(seq.constant_C - T.values[n][b], {static_cast<double>(n), static_cast<double>(b)});
      r.measured_constant = std::max(r.measured_constant, T.values[n][b]);
    }
  r.total_mass = T.values[0][0];
  return r;
}

MaximalCarleson maximal_carleson(const FilteredSpace& s, const std::vector<double>& f, const Exponent& p) {
  const Adapted m = martingale(s, f);
  MaximalCarleson out;
  out.fstar = maximal_function(s, f);
  const std::size_t L = s.level_count();
  out.first_level.assign(s.atom_count(), static_cast<int>(L) - 1);
  for (std::size_t x = 0; x < s.atom_count(); ++x)
    for (std::size_t n = 0; n < L; ++n)
      if (std::abs(m.at(s, n, x)) >= out.fstar[x] - 1e-12) {
        out.first_level[x] = static_cast<int>(n);
        break;
      }
  out.seq.constant_C = 1.0;
  out.seq.alpha.values.resize(L);
  for (std::size_t n = 0; n < L; ++n) {
    auto& a = out.seq.alpha.values[n];
    a.assign(s.block_count(n), 0.0);
    for (std::size_t b = 0; b < a.size(); ++b) {
      double hit = 0.0;
      for (std::size_t x : s.block_atoms(n, b))
        if (out.first_level[x] == static_cast<int>(n)) hit += s.masses()[x];
      a[b] = hit / s.block_mass(n, b);
    }
  }
  for (std::size_t x = 0; x < s.atom_count(); ++x) out.fstar_norm_p += s.masses()[x] * std::pow(out.fstar[x], p.p());
  for (std::size_t n = 0; n < L; ++n)
    for (std::size_t b = 0; b < s.block_count(n); ++b) {
      out.total_mass += s.block_mass(n, b) * out.seq.alpha.values[n][b];
      out.accounting += s.block_mass(n, b) * out.seq.alpha.values[n][b] * std::pow(std::abs(m.values[n][b]), p.p());
    }
  return out;
}

Json BellmanProcessReport::to_json() const {
  Json levels = Json::array();
  for (std::size_t n = 0; n < expected_B.size(); ++n) {
    Json row{{"n", n}, {"expected_B", number(expected_B[n])}};
    if (n < step_gain.size()) row["step_gain"] = number(step_gain[n]);
    levels.push_back(row);
  }
  return Json{{"levels", levels},
              {"steps", steps.to_json()},
              {"embedding", number(embedding)},
              {"initial_bound", number(initial_bound)},
              {"telescoped_ok", telescoped_ok},
              {"clamped", clamped},
              {"pass", passed()}};
}

BellmanProcessReport bellman_process_check(const FilteredSpace& s, const std::vector<double>& f,
                                           const CarlesonSeq& seq, const Exponent& p) {
  for (double v : f)
    if (v < 0.0) fail(ErrorKind::InvalidArgument, "Bellman process needs f >= 0");
  const double C = seq.constant_C;
  std::vector<double> fp(f.size());
  for (std::size_t x = 0; x < f.size(); ++x) fp[x] = std::pow(f[x], p.p());
  const Adapted mf = martingale(s, f);
  const Adapted mF = martingale(s, fp);
  const Adapted T = carleson_tails(s, seq);
  const std::size_t L = s.level_count();

  BellmanProcessReport r;
  auto B_at = [&](std::size_t n, std::size_t b) {
    BellmanPoint pt{mF.values[n][b], mf.values[n][b], T.values[n][b], C};
    const double gap = pt.F - std::pow(pt.f, p.p());
    if (gap < 0.0 && gap > -1e-12) {
      pt.F = std::pow(pt.f, p.p());
      ++r.clamped;
    }
    if (pt.M > C && pt.M <= C + 1e-12) {
      pt.M = C;
      ++r.clamped;
    }
    return eval_supersolution(pt, p);
  };
  for (std::size_t n = 0; n < L; ++n) {
    double eb = 0.0, gain = 0.0;
    for (std::size_t b = 0; b < s.block_count(n); ++b) {
      eb += s.block_mass(n, b) * B_at(n, b);
      gain += s.block_mass(n, b) * seq.alpha.values[n][b] * std::pow(mf.values[n][b], p.p());
    }
    r.expected_B.push_back(eb);
    r.step_gain.push_back(gain);
    r.embedding += gain;
  }
  r.expected_B.push_back(0.0);  // X^L = (f^p, f, 0)
  for (std::size_t n = 0; n < L; ++n)
    r.steps.observe(r.expected_B[n] - r.expected_B[n + 1] - r.step_gain[n], {static_cast<double>(n)});
  r.initial_bound = r.expected_B[0];
  r.telescoped_ok = r.embedding <= r.initial_bound + 1e-9;
  return r;
}

// ---------------------------------------------------------------------------

FilteredSpace random_space(Rng& rng, int atoms, int levels) {
  if (atoms < 1 || levels < 1) fail(ErrorKind::InvalidArgument, "random space needs atoms, levels >= 1");
  const auto n = static_cast<std::size_t>(atoms);
  std::vector<double> masses(n);
  double total = 0.0;
  for (double& m : masses) total += (m = rng.uniform(0.2, 1.0));
  for (double& m : masses) m /= total;
  // runs of contiguous atoms; each level splits every run of length >= 2
  std::vector<std::pair<std::size_t, std::size_t>> runs{{0, n}};
  std::vector<std::vector<int>> parts{std::vector<int>(n, 0)};
  for (int lv = 1; lv < levels; ++lv) {
    std::vector<std::pair<std::size_t, std::size_t>> next;
    for (auto [a, b] : runs) {
      const std::size_t len = b - a;
      if (len < 2) {
        next.push_back({a, b});
        continue;
      }
      const int pieces = len >= 3 && rng.uniform() < 0.3 ? 3 : 2;
      std::vector<std::size_t> cuts;
      while (cuts.size() + 1 < static_cast<std::size_t>(pieces)) {
        const auto c = a + 1 + static_cast<std::size_t>(rng.integer(0, static_cast<int>(len) - 2));
        if (std::find(cuts.begin(), cuts.end(), c) == cuts.end()) cuts.push_back(c);
      }
      std::sort(cuts.begin(), cuts.end());
      std::size_t lo = a;
      for (std::size_t c : cuts) {
        next.push_back({lo, c});
        lo = c;
      }
      next.push_back({lo, b});
    }
    runs = std::move(next);
    std::vector<int> part(n);
    for (std::size_t r = 0; r < runs.size(); ++r)
      for (std::size_t x = runs[r].first; x < runs[r].second; ++x) part[x] = static_cast<int>(r);
    parts.push_back(std::move(part));
  }
  return FilteredSpace(std::move(masses), std::move(parts));
}

FilteredSpace random_dyadic_space(Rng& rng, int depth) {
  const std::size_t n = std::size_t{1} << depth;
  std::vector<double> masses(n);
  double total = 0.0;
  for (double& m : masses) total += (m = rng.uniform(0.5, 1.5));
  for (double& m : masses) m /= total;
  std::vector<std::vector<int>> parts;
  for (int k = 0; k <= depth; ++k) {
    std::vector<int> part(n);
    for (std::size_t x = 0; x < n; ++x) part[x] = static_cast<int>(x >> (depth - k));
    parts.push_back(std::move(part));
  }
  return FilteredSpace(std::move(masses), std::move(parts));
}

std::vector<double> random_function(Rng& rng, std::size_t atoms, bool nonnegative) {
  std::vector<double> f(atoms);
  const int shape = rng.integer(0, 2);
  for (std::size_t x = 0; x < atoms; ++x) {
    double v = 0.0;
    switch (shape) {
      case 0: v = rng.uniform(0.0, 2.0); break;
      case 1: v = rng.uniform() < 0.1 ? rng.uniform(3.0, 20.0) : rng.uniform(0.0, 0.3); break;
      default: v = std::pow(rng.uniform(1e-3, 1.0), -0.45); break;
    }
    if (!nonnegative && rng.uniform() < 0.3) v = -v;
    f[x] = v;
  }
  return f;
}

CarlesonSeq random_carleson(Rng& rng, const FilteredSpace& s) {
  CarlesonSeq seq;
  seq.alpha.values.resize(s.level_count());
  for (std::size_t n = 0; n < s.level_count(); ++n) {
    seq.alpha.values[n].assign(s.block_count(n), 0.0);
    for (double& a : seq.alpha.values[n])
      if (rng.uniform() < 0.5) a = rng.uniform();
  }
  seq.alpha.values[0][0] += 0.1;
  const Adapted T = carleson_tails(s, seq);
  double c = 0.0;
  for (const auto& lvl : T.values)
    for (double v : lvl) c = std::max(c, v);
  for (auto& lvl : seq.alpha.values)
    for (double& a : lvl) a /= c;
  seq.constant_C = 1.0;
  return seq;
}

}  // namespace clab
