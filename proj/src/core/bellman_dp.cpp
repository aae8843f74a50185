#include "clab/bellman_dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include "clab/error.hpp"

namespace clab {

BellmanGrid::BellmanGrid(const Exponent& p, int n_r, int n_M) : p_(p) {
  if (n_r < 2 || n_M < 2) fail(ErrorKind::InvalidArgument, "grid needs at least 2x2 points");
  r_ = uniform_grid(0.0, 1.0, n_r);
  M_ = uniform_grid(0.0, 1.0, n_M);
  values_.assign(r_.size() * M_.size(), 0.0);
  policy_.assign(values_.size(), SplitPolicy{});
}

double BellmanGrid::interpolate(double r, double M) const {
  r = std::clamp(r, 0.0, 1.0);
  M = std::clamp(M, 0.0, 1.0);
  const double x = r * static_cast<double>(n_r() - 1);
  const double y = M * static_cast<double>(n_M() - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(x), n_r() - 2);
  const std::size_t j = std::min(static_cast<std::size_t>(y), n_M() - 2);
  const double a = x - static_cast<double>(i), b = y - static_cast<double>(j);
  return (1 - a) * (1 - b) * at(i, j) + a * (1 - b) * at(i + 1, j) + (1 - a) * b * at(i, j + 1) +
         a * b * at(i + 1, j + 1);
}

double BellmanGrid::value_at(const BellmanPoint& pt) const {
  if (pt.F <= 0.0) return 0.0;
  return pt.F * interpolate(std::pow(std::abs(pt.f), p_.p()) / pt.F, pt.M / pt.C);
}

double BellmanGrid::max_value() const { return *std::max_element(values_.begin(), values_.end()); }

std::pair<double, double> BellmanGrid::argmax() const {
  const auto k = static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) - values_.begin());
  return {r_[k / n_M()], M_[k % n_M()]};
}

// ---------------------------------------------------------------------------

namespace {

// Largest s with (f+s)^p + |f-s|^p <= 2, i.e. both children can carry
// energy F+- = 1 +- t >= |f+-|^p for some common t.
double max_offset(double f, double p) {
  double lo = 0.0, hi = 1.0 + f;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (std::pow(f + mid, p) + std::pow(std::abs(f - mid), p) <= 2.0) lo = mid;
    else hi = mid;
  }
  return lo;
}

// Sampled search of all splits of the reduced state (r, M_b) for each target
// M_b. The child masses range over {0, 1/K, ..., 1}; for a fixed (s, t) the
// objective separates as A[i] + B[j] + M r under i + j <= 2 M K, so a
// max-plus convolution followed by a prefix maximum serves every target.
void search_row(const BellmanGrid& g, double r, const std::vector<double>& targets,
                const DpOptions& opt, std::vector<SplitCandidate>& out) {
  const double p = g.exponent().p();
  const int S = std::max(opt.split_samples, 1);
  const int K = opt.mass_samples > 0 ? opt.mass_samples : static_cast<int>(g.n_M()) - 1;
  const double f = std::pow(r, 1.0 / p);
  const double smax = max_offset(f, p);

  out.assign(targets.size(), SplitCandidate{-std::numeric_limits<double>::infinity(), {}});
  std::vector<double> masses(static_cast<std::size_t>(K) + 1);
  for (int i = 0; i <= K; ++i) masses[static_cast<std::size_t>(i)] = static_cast<double>(i) / K;
  std::vector<int> limits(targets.size());
  for (std::size_t b = 0; b < targets.size(); ++b)
    limits[b] = std::min(2 * K, static_cast<int>(std::floor(2.0 * targets[b] * K + 1e-9)));

  const auto nk = static_cast<std::size_t>(K) + 1;
  std::vector<double> A(nk), B(nk), conv(2 * nk - 1), pref(2 * nk - 1);
  std::vector<int> conv_i(2 * nk - 1), pref_s(2 * nk - 1);

  for (int a = 0; a < S; ++a) {
    const double s = S == 1 ? 0.0 : smax * a / (S - 1);
    const double fp = f + s, fm = f - s;
    const double ep = std::pow(std::abs(fp), p), em = std::pow(std::abs(fm), p);
    const double lo = ep - 1.0, hi = std::max(lo, 1.0 - em);
    for (int b = 0; b < S; ++b) {
      const double t = S == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * b / (S - 1);
      const double Fp = 1.0 + t, Fm = 1.0 - t;
      const double rp = Fp > 0.0 ? std::min(ep / Fp, 1.0) : 0.0;
      const double rm = Fm > 0.0 ? std::min(em / Fm, 1.0) : 0.0;
      for (std::size_t i = 0; i < nk; ++i) {
        A[i] = 0.5 * (Fp * g.interpolate(rp, masses[i]) - masses[i] * r);
        B[i] = 0.5 * (Fm * g.interpolate(rm, masses[i]) - masses[i] * r);
      }
      std::fill(conv.begin(), conv.end(), -std::numeric_limits<double>::infinity());
      for (std::size_t i = 0; i < nk; ++i)
        for (std::size_t j = 0; j < nk; ++j) {
          const double v = A[i] + B[j];
          if (v > conv[i + j]) {
            conv[i + j] = v;
            conv_i[i + j] = static_cast<int>(i);
          }
        }
      for (std::size_t k = 0; k < conv.size(); ++k) {
        if (k == 0 || conv[k] > pref[k - 1]) {
          pref[k] = conv[k];
          pref_s[k] = static_cast<int>(k);
        } else {
          pref[k] = pref[k - 1];
          pref_s[k] = pref_s[k - 1];
        }
      }
      for (std::size_t q = 0; q < targets.size(); ++q) {
        if (limits[q] < 0) continue;
        const auto L = static_cast<std::size_t>(limits[q]);
        const double val = pref[L] + targets[q] * r;
        if (val > out[q].value) {
          const int sum = pref_s[L];
          const int i = conv_i[static_cast<std::size_t>(sum)];
          const int j = sum - i;
          SplitPolicy& pol = out[q].policy;
          out[q].value = val;
          pol.active = true;
          pol.s = s;
          pol.t = t;
          pol.Fp = Fp;
          pol.rp = rp;
          pol.Mp = masses[static_cast<std::size_t>(i)];
          pol.Fm = Fm;
          pol.rm = rm;
          pol.Mm = masses[static_cast<std::size_t>(j)];
          pol.drift = (targets[q] - 0.5 * (pol.Mp + pol.Mm)) * r;
        }
      }
    }
  }
}

template <typename Fn>
void parallel_rows(std::size_t rows, int threads, Fn&& fn) {
  if (threads <= 1 || rows < 2) {
    for (std::size_t i = 0; i < rows; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  const auto T = static_cast<std::size_t>(threads);
  for (std::size_t w = 0; w < T; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < rows; i += T) fn(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace

SplitCandidate best_split(const BellmanGrid& grid, double r, double M, const DpOptions& opt) {
  std::vector<SplitCandidate> out;
  search_row(grid, std::clamp(r, 0.0, 1.0), {std::clamp(M, 0.0, 1.0)}, opt, out);
  return out.front();
}

BellmanGrid dp_initial(const Exponent& p, int n_r, int n_M) {
  BellmanGrid g(p, n_r, n_M);
  for (std::size_t i = 0; i < g.n_r(); ++i)
    for (std::size_t j = 0; j < g.n_M(); ++j) g.at(i, j) = g.M_axis()[j] * g.r_axis()[i];
  return g;
}

BellmanGrid dp_iterate(const BellmanGrid& grid, const DpOptions& opt) {
  BellmanGrid next = grid;
  std::vector<double> change(grid.n_r(), 0.0);
  parallel_rows(grid.n_r(), opt.threads, [&](std::size_t i) {
    std::vector<SplitCandidate> best;
    search_row(grid, grid.r_axis()[i], grid.M_axis(), opt, best);
    for (std::size_t j = 0; j < grid.n_M(); ++j) {
      if (best[j].value > grid.at(i, j)) {
        next.at(i, j) = best[j].value;
        next.policy(i, j) = best[j].policy;
        change[i] = std::max(change[i], best[j].value - grid.at(i, j));
      }
    }
  });
  next.iteration_count = grid.iteration_count + 1;
  next.sup_change = *std::max_element(change.begin(), change.end());
  next.options = opt;
  return next;
}

BellmanGrid dp_iterate(const BellmanGrid& grid, int split_samples, int mass_samples) {
  DpOptions opt = grid.options;
  opt.split_samples = split_samples;
  opt.mass_samples = mass_samples;
  return dp_iterate(grid, opt);
}

double dp_evaluate_policy(BellmanGrid& grid) {
  double change = 0.0;
  for (std::size_t i = 0; i < grid.n_r(); ++i)
    for (std::size_t j = 0; j < grid.n_M(); ++j) {
      const SplitPolicy& pol = grid.policy(i, j);
      if (!pol.active) continue;
      const double v = 0.5 * (pol.Fp * grid.interpolate(pol.rp, pol.Mp) +
                              pol.Fm * grid.interpolate(pol.rm, pol.Mm)) + pol.drift;
      if (v > grid.at(i, j)) {
        change = std::max(change, v - grid.at(i, j));
        grid.at(i, j) = v;
      }
    }
  return change;
}

BellmanGrid dp_solve(const Exponent& p, int n_r, int n_M, double tol, int max_iters,
                     const DpOptions& opt) {
  if (!(tol > 0.0)) fail(ErrorKind::InvalidArgument, "dp tolerance must be positive");
  if (max_iters < 1) fail(ErrorKind::InvalidArgument, "dp needs max_iters >= 1");
  BellmanGrid g = dp_initial(p, n_r, n_M);
  g.options = opt;
  for (int it = 0; it < max_iters; ++it) {
    const std::vector<double> before = g.values();
    g = dp_iterate(g, opt);
    const double greedy_change = g.sup_change;
    for (int e = 0; e < opt.eval_sweeps; ++e)
      if (dp_evaluate_policy(g) < 1e-3 * tol) break;
    for (std::size_t i = 0; i < before.size(); ++i)
      g.min_pointwise_increase = std::min(g.min_pointwise_increase, g.values()[i] - before[i]);
    g.sup_history.push_back(g.max_value());
    g.sup_change = greedy_change;
    if (greedy_change < tol) {
      g.converged = true;
      break;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

Json ExtremalTrace::to_json() const {
  return Json{{"start", {{"F", start.F}, {"f", start.f}, {"M", start.M}, {"C", start.C}}},
              {"depth", tree.depth()},
              {"grid_value", number(grid_value)},
              {"embedding_sum", number(embedding_sum)},
              {"achieved_ratio", number(achieved_ratio)},
              {"value_ratio", number(value_ratio)},
              {"carleson_constant", number(carleson_constant)},
              {"lp_norm_p", number(lp_norm_p)},
              {"target", number(target)},
              {"signed_leaves", signed_leaves},
              {"warnings", warnings}};
}

namespace {

// `children_grid(k)` values the children of a level-k node.
template <typename GridFor>
ExtremalTrace extract_impl(GridFor children_grid, const BellmanGrid& value_grid,
                           const BellmanPoint& start, int depth) {
  const BellmanGrid& grid = value_grid;
  const Exponent& p = grid.exponent();
  require_domain(start, p);
  if (start.C != 1.0) fail(ErrorKind::InvalidArgument, "extraction works with C = 1");
  if (depth < 0 || depth > 22) fail(ErrorKind::InvalidArgument, "extraction depth must lie in 0..22");

  ExtremalTrace tr;
  tr.start = start;
  tr.target = p.sharp_constant();
  if (depth > 16) tr.warnings.push_back("depth beyond 16: splits are far below the grid resolution");
  DpOptions opt = grid.options;
  opt.threads = 1;

  struct State {
    double F, f, M;
  };
  std::vector<State> level{{start.F, start.f, start.M}};
  std::vector<std::vector<double>> alpha(static_cast<std::size_t>(depth) + 1);
  for (int k = 0; k < depth; ++k) {
    const double len = std::ldexp(1.0, -k);
    std::vector<State> next;
    next.reserve(2 * level.size());
    for (const State& st : level) {
      if (st.F <= 0.0) {
        alpha[static_cast<std::size_t>(k)].push_back(0.0);
        next.push_back({0.0, 0.0, st.M});
        next.push_back({0.0, 0.0, st.M});
        continue;
      }
      const double scale = std::pow(st.F, 1.0 / p.p());
      const double fhat = st.f / scale;
      const double r = std::min(std::pow(std::abs(fhat), p.p()), 1.0);
      const SplitCandidate c = best_split(children_grid(k), r, st.M, opt);
      const double sign = fhat < 0.0 ? -1.0 : 1.0;
      const double base = std::abs(fhat);
      State plus{st.F * c.policy.Fp, sign * scale * (base + c.policy.s), c.policy.Mp};
      State minus{st.F * c.policy.Fm, sign * scale * (base - c.policy.s), c.policy.Mm};
      const double dM = std::max(0.0, st.M - 0.5 * (plus.M + minus.M));
      alpha[static_cast<std::size_t>(k)].push_back(len * dM);
      next.push_back(plus);
      next.push_back(minus);
    }
    level = std::move(next);
  }

  std::vector<double> leaves;
  leaves.reserve(level.size());
  const double leaf_len = std::ldexp(1.0, -depth);
  for (const State& st : level) {
    if (st.f < -1e-12) ++tr.signed_leaves;
    leaves.push_back(std::abs(st.f));
    alpha[static_cast<std::size_t>(depth)].push_back(leaf_len * st.M);
  }
  DyadicWeightedTree tree(depth, std::move(leaves));
  for (int k = 0; k <= depth; ++k)
    for (std::size_t j = 0; j < alpha[static_cast<std::size_t>(k)].size(); ++j)
      tree.set_weight({k, static_cast<int>(j) + 1}, alpha[static_cast<std::size_t>(k)][j]);

  const EmbeddingReport rep = embedding_sum(tree, p);
  tr.embedding_sum = rep.embedding_sum;
  tr.carleson_constant = rep.carleson_constant;
  tr.lp_norm_p = rep.lp_norm_p;
  tr.grid_value = grid.value_at(start);
  tr.achieved_ratio = start.F > 0.0 ? rep.embedding_sum / (start.C * start.F) : 0.0;
  tr.value_ratio = tr.grid_value > 0.0 ? rep.embedding_sum / tr.grid_value : 0.0;
  if (tr.signed_leaves > 0) tr.warnings.push_back("negative leaves replaced by their absolute value");
  tr.tree = std::move(tree);
  return tr;
}

}  // namespace

ExtremalTrace extract_extremal_tree(const BellmanGrid& grid, const BellmanPoint& start, int depth) {
  return extract_impl([&](int) -> const BellmanGrid& { return grid; }, grid, start, depth);
}

std::vector<BellmanGrid> dp_horizons(const Exponent& p, int n_r, int n_M, int depth, const DpOptions& opt) {
  if (depth < 0) fail(ErrorKind::InvalidArgument, "horizon depth must be >= 0");
  std::vector<BellmanGrid> out;
  out.push_back(dp_initial(p, n_r, n_M));
  out.back().options = opt;
  for (int k = 1; k <= depth; ++k) out.push_back(dp_iterate(out.back(), opt));
  return out;
}

ExtremalTrace extract_finite_horizon(const std::vector<BellmanGrid>& horizons, const BellmanPoint& start) {
  if (horizons.empty()) fail(ErrorKind::InvalidArgument, "no horizon grids");
  const int depth = static_cast<int>(horizons.size()) - 1;
  return extract_impl(
      [&](int k) -> const BellmanGrid& { return horizons[static_cast<std::size_t>(depth - k - 1)]; },
      horizons.back(), start, depth);
}

// ---------------------------------------------------------------------------

std::string grid_to_csv(const BellmanGrid& grid) {
  std::string out = "r,M,value\n";
  char buf[96];
  for (std::size_t i = 0; i < grid.n_r(); ++i)
    for (std::size_t j = 0; j < grid.n_M(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", grid.r_axis()[i], grid.M_axis()[j], grid.at(i, j));
      out += buf;
    }
  return out;
}

Json grid_header(const BellmanGrid& grid) {
  return Json{{"p", grid.exponent().p()},
              {"shape", {grid.n_r(), grid.n_M()}},
              {"iterations", grid.iteration_count},
              {"sup_change", number(grid.sup_change)},
              {"converged", grid.converged},
              {"split_samples", grid.options.split_samples},
              {"mass_samples", grid.options.mass_samples},
              {"eval_sweeps", grid.options.eval_sweeps}};
}

BellmanGrid grid_from_csv(const Json& header, const std::string& csv) {
  BellmanGrid g;
  try {
    const double p = header.at("p").get<double>();
    const int nr = header.at("shape").at(0).get<int>();
    const int nm = header.at("shape").at(1).get<int>();
    g = BellmanGrid(Exponent(p), nr, nm);
    g.iteration_count = header.value("iterations", 0);
    g.converged = header.value("converged", false);
    g.options.split_samples = header.value("split_samples", 32);
    g.options.mass_samples = header.value("mass_samples", 0);
    g.options.eval_sweeps = header.value("eval_sweeps", 200);
    if (header.contains("sup_change") && header["sup_change"].is_number())
      g.sup_change = header["sup_change"].get<double>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::Parse, std::string("grid header: ") + e.what());
  }
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("r,M,value", 0) != 0)
    fail(ErrorKind::Parse, "grid CSV must start with the header r,M,value");
  std::size_t count = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (count >= g.values().size()) fail(ErrorKind::Parse, "grid CSV has more rows than the header shape");
    const auto c2 = line.rfind(',');
    if (c2 == std::string::npos) fail(ErrorKind::Parse, "grid CSV row without value column");
    try {
      g.values()[count++] = std::stod(line.substr(c2 + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::Parse, "grid CSV: bad number in row " + std::to_string(count + 1));
    }
  }
  if (count != g.values().size()) fail(ErrorKind::Parse, "grid CSV has fewer rows than the header shape");
  return g;
}

}  // namespace clab
