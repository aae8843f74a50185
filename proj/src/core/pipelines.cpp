#include "clab/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "clab/bellman_core.hpp"
#include "clab/bellman_dp.hpp"
#include "clab/dyadic_model.hpp"
#include "clab/error.hpp"
#include "clab/martingale_lab.hpp"
#include "clab/remodeling.hpp"
#include "clab/rng.hpp"
#include "clab/serialization.hpp"

namespace clab {

namespace {

const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> t{{"inequality", tol::kInequality}, {"identity", tol::kIdentity},
                                               {"quadrature", tol::kQuadrature}, {"dp_stop", tol::kDpStop},
                                               {"hessian", 1e-6},                {"derivative", 1e-6},
                                               {"dominance", 1e-6}};
  return t;
}

const std::map<std::string, std::set<std::string>>& command_keys() {
  static const std::map<std::string, std::set<std::string>> k{
      {"eval", {"F", "f", "M", "C", "fd_step", "grid_csv", "grid_json"}},
      {"verify-supersolution",
       {"samples", "mollified_samples", "mollifier_eps", "mollifier_nodes", "hull_points", "fd_step", "p_values"}},
      {"dp-solve", {"grid", "tol", "max_iters", "split_samples", "mass_samples", "eval_sweeps", "min_sup"}},
      {"extract-tree",
       {"grid", "split_samples", "mass_samples", "F", "f", "M", "depth", "method", "tol", "max_iters", "eval_sweeps"}},
      {"embed-check", {"tree", "trees", "depth"}},
      {"simulate", {"spaces", "max_atoms", "max_levels", "process_instances"}},
      {"doob", {"space", "spaces", "max_atoms", "max_levels"}},
      {"remodel", {"tree", "eps", "N", "schedule", "target_F"}},
      {"theorem-a", {"F", "f", "M", "eps", "N", "delta1", "delta2", "grid", "split_samples", "schedule"}},
      {"theorem-b", {"F", "f", "eps", "N", "delta1", "delta2", "grid", "split_samples", "schedule"}},
  };
  return k;
}

// ---- typed parameter access ----

const Json* find(const Json& j, const char* key) { return j.contains(key) ? &j.at(key) : nullptr; }

double get_double(const Json& j, const char* key, double dflt) {
  const Json* v = find(j, key);
  if (!v) return dflt;
  if (!v->is_number()) fail(ErrorKind::Parse, std::string("config '") + key + "' must be a number");
  return v->get<double>();
}

int get_int(const Json& j, const char* key, int dflt) {
  const Json* v = find(j, key);
  if (!v) return dflt;
  if (!v->is_number_integer()) fail(ErrorKind::Parse, std::string("config '") + key + "' must be an integer");
  return v->get<int>();
}

std::string get_string(const Json& j, const char* key, const std::string& dflt) {
  const Json* v = find(j, key);
  if (!v) return dflt;
  if (!v->is_string()) fail(ErrorKind::Parse, std::string("config '") + key + "' must be a string");
  return v->get<std::string>();
}

std::vector<double> get_doubles(const Json& j, const char* key, std::vector<double> dflt) {
  const Json* v = find(j, key);
  if (!v) return dflt;
  if (v->is_number()) return {v->get<double>()};
  return doubles_from_json(*v, std::string("config '") + key + "'");
}

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorKind::InvalidArgument, what);
}

int positive_int(const Json& j, const char* key, int dflt, int hi) {
  const int v = get_int(j, key, dflt);
  require(v >= 1 && v <= hi, std::string("'") + key + "' must lie in 1.." + std::to_string(hi));
  return v;
}

double eps_param(const Json& j, double dflt) {
  const double e = get_double(j, "eps", dflt);
  require(e > 0.0 && e < 1.0, "eps must lie in (0, 1)");
  return e;
}

// "51x51", [51, 51] or 51.
std::pair<int, int> grid_shape(const Json& j, int dflt) {
  const Json* v = find(j, "grid");
  int a = dflt, b = dflt;
  if (v) {
    if (v->is_number_integer()) {
      a = b = v->get<int>();
    } else if (v->is_array() && v->size() == 2 && v->at(0).is_number_integer() && v->at(1).is_number_integer()) {
      a = v->at(0).get<int>();
      b = v->at(1).get<int>();
    } else if (v->is_string()) {
      const std::string s = v->get<std::string>();
      char x = 0;
      std::istringstream in(s);
      if (!(in >> a >> x >> b) || (x != 'x' && x != 'X') || !in.eof())
        fail(ErrorKind::Parse, "grid must look like 51x51");
    } else {
      fail(ErrorKind::Parse, "grid must be an integer, [n_r, n_M] or \"n_rxn_M\"");
    }
  }
  require(a >= 2 && b >= 2 && a <= 2001 && b <= 2001, "grid sides must lie in 2..2001");
  return {a, b};
}

DpOptions dp_options(const RunConfig& cfg) {
  DpOptions o;
  o.split_samples = positive_int(cfg.params, "split_samples", 32, 4096);
  o.mass_samples = get_int(cfg.params, "mass_samples", 0);
  require(o.mass_samples >= 0 && o.mass_samples <= 4096, "mass_samples must lie in 0..4096");
  o.eval_sweeps = get_int(cfg.params, "eval_sweeps", 200);
  require(o.eval_sweeps >= 0, "eval_sweeps must be nonnegative");
  o.threads = cfg.threads;
  return o;
}

Json point_json(const BellmanPoint& pt) { return Json{{"F", pt.F}, {"f", pt.f}, {"M", pt.M}, {"C", pt.C}}; }

std::vector<double> as_vec(const BellmanPoint& pt) { return {pt.F, pt.f, pt.M, pt.C}; }

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

void add_checks(RunReport& rep, const std::vector<Check>& cs, const std::string& prefix) {
  for (const Check& c : cs) rep.add_check(prefix + c.name, c.margin, c.tolerance, c.location);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// short form for check names
std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// ---------------------------------------------------------------------------

RunResult run_eval(const RunConfig& cfg) {
  RunResult R{RunReport("eval", cfg.seed), {}};
  auto& rep = R.report;
  const Exponent p(cfg.p);
  BellmanPoint pt{get_double(cfg.params, "F", 1.0), get_double(cfg.params, "f", 0.5), get_double(cfg.params, "M", 0.5),
                  get_double(cfg.params, "C", 1.0)};
  require_domain(pt, p);
  const double B = eval_supersolution(pt, p);
  Json& s = rep.summary();
  s["point"] = point_json(pt);
  s["B"] = B;
  s["hull"] = eval_hull(pt.f, pt.M / pt.C, p) * pt.C;
  s["dB_dM"] = supersolution_dM(pt, p);
  s["sharp_constant"] = p.sharp_constant();
  rep.add_check("range.lower", B - pt.M * std::pow(pt.f, p.p()), cfg.tol("inequality"));
  rep.add_check("range.upper", p.sharp_constant() * pt.C * pt.F - B, cfg.tol("inequality"));
  rep.add_check("monotone_in_M", supersolution_dM(pt, p) - std::pow(pt.f, p.p()), cfg.tol("inequality"));
  const double h = get_double(cfg.params, "fd_step", 1e-3);
  require(h > 0.0 && h < 0.1, "fd_step must lie in (0, 0.1)");
  try {
    const InfinitesimalReport inf = verify_infinitesimal(pt, p, h);
    s["infinitesimal"] = inf.to_json();
    rep.add_check("hessian.max_eigenvalue", -inf.max_eigenvalue, cfg.tol("hessian"));
    rep.add_check("dM.finite_difference", -inf.dM_rel_error, cfg.tol("derivative"));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Domain) throw;
    rep.skip("infinitesimal", e.what());
  }
  const std::string csv = get_string(cfg.params, "grid_csv", "");
  if (!csv.empty()) {
    const Json header = read_json_file(get_string(cfg.params, "grid_json", csv + ".json"));
    const BellmanGrid g = grid_from_csv(header, read_text_file(csv));
    require(std::abs(g.exponent().p() - cfg.p) < 1e-15, "grid was solved for a different p");
    require(std::abs(pt.C - 1.0) < 1e-15, "grid values need C = 1");
    const double v = g.value_at(pt);
    s["grid_value"] = v;
    rep.add_check("grid.dominated", B - v, cfg.tol("dominance"));
  }
  return R;
}

RunResult run_verify_supersolution(const RunConfig& cfg) {
  RunResult R{RunReport("verify-supersolution", cfg.seed), {}};
  auto& rep = R.report;
  const Json& P = cfg.params;
  const int samples = positive_int(P, "samples", 10000, 10000000);
  const int moll_samples = get_int(P, "mollified_samples", 200);
  require(moll_samples >= 0, "mollified_samples must be nonnegative");
  MollifierConfig mc;
  mc.eps = get_double(P, "mollifier_eps", 0.05);
  mc.quadrature_nodes = positive_int(P, "mollifier_nodes", 48, 512);
  require(mc.eps > 0.0 && mc.eps < 0.5, "mollifier_eps must lie in (0, 0.5)");
  const int hull_points = positive_int(P, "hull_points", 101, 100000);
  require(hull_points >= 2, "hull_points must be at least 2");
  const double h = get_double(P, "fd_step", 1e-3);
  require(h > 0.0 && h < 0.1, "fd_step must lie in (0, 0.1)");
  const std::vector<double> ps = get_doubles(P, "p_values", {cfg.p});
  for (double pv : ps) require(pv > 1.0, "every p must exceed 1");

  const Rng root(cfg.seed);
  Json per_p = Json::array();
  for (double pv : ps) {
    const Exponent p(pv);
    const std::string tag = "p=" + fmt(pv) + ".";
    Rng rng = root.derive("verify-supersolution/points/" + fmt(pv));
    ConditionReport lower("range.lower", cfg.tol("inequality")), upper("range.upper", cfg.tol("inequality"));
    ConditionReport homog("homogeneity", cfg.tol("identity")), scaling("scaling", cfg.tol("identity"));
    ConditionReport hess("hessian.max_eigenvalue", cfg.tol("hessian"));
    ConditionReport mono("dM.monotone", cfg.tol("inequality"));
    ConditionReport deriv("dM.finite_difference", cfg.tol("derivative"));
    for (int i = 0; i < samples; ++i) {
      const BellmanPoint pt = sample_interior_point(rng, p);
      const double B = eval_supersolution(pt, p);
      const auto arg = as_vec(pt);
      lower.observe(B - pt.M * std::pow(pt.f, p.p()), arg);
      upper.observe(p.sharp_constant() * pt.C * pt.F - B, arg);
      const double t = rng.uniform(0.5, 2.0);
      const double Bh = eval_supersolution({std::pow(t, p.p()) * pt.F, t * pt.f, pt.M, pt.C}, p);
      homog.observe(-rel(Bh, std::pow(t, p.p()) * B), arg);
      const double Bs = eval_supersolution({pt.F, pt.f, t * pt.M, t * pt.C}, p);
      scaling.observe(-rel(Bs, t * B), arg);
      const InfinitesimalReport inf = verify_infinitesimal(pt, p, h);
      hess.observe(-inf.max_eigenvalue, arg);
      mono.observe(inf.dM_fd - inf.f_pow_p, arg);
      deriv.observe(-inf.dM_rel_error, arg);
    }
    Rng srng = root.derive("verify-supersolution/splits/" + fmt(pv));
    const BellmanFn Bfn = [&](const BellmanPoint& x) { return eval_supersolution(x, p); };
    ConditionReport main_ineq("main_inequality", cfg.tol("inequality"));
    for (int i = 0; i < samples; ++i) {
      const Split sp = sample_split(srng, p, i % 2 == 0);
      main_ineq.observe(verify_main_inequality(sp.parent, sp.left, sp.right, sp.lambda, Bfn, p),
                        {sp.parent.F, sp.parent.f, sp.parent.M, sp.parent.C, sp.lambda});
    }
    ConditionReport moll("mollified.main_inequality", 1e-6);
    double norm_err = 0.0;
    if (moll_samples > 0) {
      const Mollifier mol(mc, p);
      norm_err = mol.normalisation_error();
      rep.add_check(tag + "mollifier.normalisation", -norm_err, cfg.tol("quadrature"));
      const double factor = mollifier_drift_factor(mc.eps, p);
      const BellmanFn Beps = [&](const BellmanPoint& x) { return mol.apply(Bfn, x); };
      Rng mrng = root.derive("verify-supersolution/mollified/" + fmt(pv));
      for (int i = 0; i < moll_samples; ++i) {
        const Split sp = sample_split(mrng, p, i % 2 == 0);
        const double gap =
            Beps(sp.parent) - sp.lambda * Beps(sp.left) - (1.0 - sp.lambda) * Beps(sp.right);
        moll.observe(gap - factor * sp.dM * std::pow(sp.parent.f, p.p()),
                     {sp.parent.F, sp.parent.f, sp.parent.M, sp.parent.C, sp.lambda});
      }
    }
    const auto grid = uniform_grid(0.0, 1.0, hull_points);
    const HullProfile prof = HullProfile::optimal(p);
    const HullConditionsReport hull = verify_hull_conditions(prof, p, grid, h, cfg.tol("hessian"));
    for (const auto* c : {&lower, &upper, &homog, &scaling, &hess, &mono, &deriv, &main_ineq, &moll})
      rep.add_condition(*c, tag.substr(0, tag.size() - 1));
    for (const auto* c : {&hull.lower, &hull.upper, &hull.slope}) rep.add_condition(*c, tag.substr(0, tag.size() - 1));
    rep.add_check(tag + "hull.identity_fd", -hull.max_abs_identity_fd, cfg.tol("hessian"));
    rep.add_check(tag + "hull.phi0", -std::abs(eval_phi(0.0, prof, p) - p.sharp_constant()), 1e-10);
    per_p.push_back(Json{{"p", pv},
                         {"samples", samples},
                         {"mollified_samples", moll_samples},
                         {"mollifier_normalisation_error", norm_err},
                         {"hull", hull.to_json()},
                         {"phi0", eval_phi(0.0, prof, p)},
                         {"sharp_constant", p.sharp_constant()}});
  }
  rep.summary()["per_p"] = per_p;
  return R;
}

void add_grid_checks(RunReport& rep, const RunConfig& cfg, const BellmanGrid& g) {
  const Exponent& p = g.exponent();
  rep.add_check("dp.pointwise_nondecreasing", g.min_pointwise_increase, cfg.tol("identity"));
  double hist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < g.sup_history.size(); ++i)
    hist = std::min(hist, g.sup_history[i] - g.sup_history[i - 1]);
  rep.add_check("dp.sup_nondecreasing", hist, cfg.tol("identity"));
  double dom = std::numeric_limits<double>::infinity(), bnd = 0.0;
  Json dom_at = Json::object();
  for (std::size_t i = 0; i < g.n_r(); ++i)
    for (std::size_t j = 0; j < g.n_M(); ++j) {
      const double r = g.r_axis()[i], M = g.M_axis()[j];
      const double m = supersolution_formula(1.0, std::pow(r, 1.0 / p.p()), M, 1.0, p) - g.at(i, j);
      if (m < dom) {
        dom = m;
        dom_at = Json{{"r", r}, {"M", M}};
      }
    }
  for (std::size_t j = 0; j < g.n_M(); ++j) bnd = std::max(bnd, std::abs(g.at(g.n_r() - 1, j) - g.M_axis()[j]));
  rep.add_check("dp.dominated_by_supersolution", dom, cfg.tol("dominance"), dom_at);
  rep.add_check("dp.boundary_row", -bnd, cfg.tol("dominance"));
}

RunResult run_dp_solve(const RunConfig& cfg) {
  RunResult R{RunReport("dp-solve", cfg.seed), {}};
  auto& rep = R.report;
  const auto [nr, nm] = grid_shape(cfg.params, 51);
  const double tol = get_double(cfg.params, "tol", cfg.tol("dp_stop"));
  require(tol > 0.0, "tol must be positive");
  const int iters = positive_int(cfg.params, "max_iters", 200, 100000);
  const double min_sup = get_double(cfg.params, "min_sup", 0.0);
  const DpOptions opt = dp_options(cfg);
  const Exponent p(cfg.p);
  const BellmanGrid g = dp_solve(p, nr, nm, tol, iters, opt);
  add_grid_checks(rep, cfg, g);
  rep.add_check("dp.converged", g.converged ? tol - g.sup_change : -g.sup_change, 0.0);
  if (min_sup > 0.0) rep.add_check("dp.sup_reaches", g.max_value() - min_sup, 0.0);
  const auto [ar, aM] = g.argmax();
  Json& s = rep.summary();
  s["sup"] = g.max_value();
  s["target"] = p.sharp_constant();
  s["argmax"] = Json{{"r", ar}, {"M", aM}};
  s["iterations"] = g.iteration_count;
  s["sup_change"] = g.sup_change;
  s["sup_history"] = g.sup_history;
  s["grid"] = grid_header(g);
  R.artifacts.push_back({"grid.csv", grid_to_csv(g)});
  R.artifacts.push_back({"grid.csv.json", dump_json(grid_header(g))});
  return R;
}

RunResult run_extract_tree(const RunConfig& cfg) {
  RunResult R{RunReport("extract-tree", cfg.seed), {}};
  auto& rep = R.report;
  const Exponent p(cfg.p);
  const auto [nr, nm] = grid_shape(cfg.params, 51);
  const int depth = positive_int(cfg.params, "depth", 5, 16);
  const std::string method = get_string(cfg.params, "method", "finite-horizon");
  BellmanPoint start{get_double(cfg.params, "F", 1.0), get_double(cfg.params, "f", 0.6), get_double(cfg.params, "M", 1.0),
                     1.0};
  require_domain(start, p);
  const DpOptions opt = dp_options(cfg);
  ExtremalTrace tr;
  if (method == "finite-horizon") {
    tr = extract_finite_horizon(dp_horizons(p, nr, nm, depth, opt), start);
  } else if (method == "greedy") {
    const double tol = get_double(cfg.params, "tol", cfg.tol("dp_stop"));
    const int iters = positive_int(cfg.params, "max_iters", 200, 100000);
    tr = extract_extremal_tree(dp_solve(p, nr, nm, tol, iters, opt), start, depth);
  } else {
    fail(ErrorKind::InvalidArgument, "method must be finite-horizon or greedy");
  }
  rep.add_check("tree.carleson_constant", 1.0 - tr.carleson_constant, cfg.tol("identity"));
  rep.add_check("tree.ratio_below_sharp", tr.target - tr.achieved_ratio, cfg.tol("inequality"));
  rep.add_check("tree.below_supersolution", eval_supersolution(start, p) - tr.embedding_sum, cfg.tol("inequality"));
  for (const auto& w : tr.warnings) rep.skip("warning", w);
  rep.summary() = tr.to_json();
  rep.summary()["method"] = method;
  R.artifacts.push_back({"tree.json", dump_json(tree_to_json(tr.tree))});
  return R;
}

void embed_one(const RunConfig& cfg, const DyadicWeightedTree& tree, ConditionReport& ratio, ConditionReport& tele,
               ConditionReport& final_bound, double& worst) {
  const Exponent p(cfg.p);
  const EmbeddingReport e = embedding_sum(tree, p);
  const TelescopingReport t = telescoping_check(tree, p);
  const std::vector<double> arg{static_cast<double>(tree.depth()), e.ratio};
  ratio.observe(e.sharp_constant - e.ratio, arg);
  tele.merge(t.levels);
  final_bound.observe(std::min(t.final_bound - t.embedding_sum, t.root_bound - t.embedding_sum), arg);
  worst = std::max(worst, e.ratio);
}

RunResult run_embed_check(const RunConfig& cfg) {
  RunResult R{RunReport("embed-check", cfg.seed), {}};
  auto& rep = R.report;
  const Exponent p(cfg.p);
  ConditionReport ratio("embedding.ratio_below_sharp", cfg.tol("inequality"));
  ConditionReport tele("telescoping.partial_sum", cfg.tol("inequality"));
  ConditionReport fin("telescoping.final_bound", cfg.tol("inequality"));
  double worst = 0.0;
  const std::string path = get_string(cfg.params, "tree", "");
  if (!path.empty()) {
    const DyadicWeightedTree tree = tree_from_json(read_json_file(path));
    embed_one(cfg, tree, ratio, tele, fin, worst);
    rep.summary()["embedding"] = embedding_sum(tree, p).to_json();
    rep.summary()["telescoping"] = telescoping_check(tree, p).to_json();
  } else {
    const int count = positive_int(cfg.params, "trees", 1000, 10000000);
    const int depth = positive_int(cfg.params, "depth", 6, 20);
    Rng rng = Rng(cfg.seed).derive("embed-check/trees");
    for (int i = 0; i < count; ++i) {
      const DyadicWeightedTree tree = random_tree(rng, rng.integer(1, depth));
      embed_one(cfg, tree, ratio, tele, fin, worst);
    }
    rep.summary()["trees"] = count;
  }
  rep.summary()["worst_ratio"] = worst;
  rep.summary()["sharp_constant"] = p.sharp_constant();
  for (const auto* c : {&ratio, &tele, &fin}) rep.add_condition(*c);
  return R;
}

void martingale_identities(const FilteredSpace& s, const std::vector<double>& f, ConditionReport& tower,
                           ConditionReport& conservation) {
  const double Ef = expectation(s, f);
  const Adapted m = martingale(s, f);
  const std::size_t L = s.level_count();
  for (std::size_t n = 0; n < L; ++n) {
    double mass = 0.0;
    for (std::size_t b = 0; b < s.block_count(n); ++b) mass += s.block_mass(n, b);
    conservation.observe(-std::abs(mass - 1.0), {static_cast<double>(n)});
    conservation.observe(-rel(expectation(s, expand(s, m.values[n], n)), Ef), {static_cast<double>(n)});
    // E[f_{n+1} | F_n] = f_n
    if (n + 1 < L) {
      const auto back = condition(s, expand(s, m.values[n + 1], n + 1), n);
      for (std::size_t b = 0; b < back.size(); ++b)
        tower.observe(-rel(back[b], m.values[n][b]), {static_cast<double>(n), static_cast<double>(b)});
    }
  }
}

RunResult run_simulate(const RunConfig& cfg) {
  RunResult R{RunReport("simulate", cfg.seed), {}};
  auto& rep = R.report;
  const Exponent p(cfg.p);
  const int spaces = positive_int(cfg.params, "spaces", 1000, 10000000);
  const int max_atoms = positive_int(cfg.params, "max_atoms", 40, 100000);
  const int max_levels = positive_int(cfg.params, "max_levels", 6, 64);
  const int processes = get_int(cfg.params, "process_instances", 100);
  require(max_atoms >= 2, "max_atoms must be at least 2");
  require(processes >= 0, "process_instances must be nonnegative");
  ConditionReport tower("martingale.tower", cfg.tol("identity")), cons("martingale.conservation", cfg.tol("identity"));
  ConditionReport doob("doob.ratio_below_sharp", cfg.tol("inequality"));
  ConditionReport acc("maximal_carleson.accounting", cfg.tol("identity"));
  ConditionReport carl("maximal_carleson.constant", cfg.tol("identity"));
  double worst = 0.0;
  Rng rng = Rng(cfg.seed).derive("simulate/spaces");
  for (int i = 0; i < spaces; ++i) {
    const FilteredSpace s = random_space(rng, rng.integer(2, max_atoms), rng.integer(1, max_levels));
    const auto f = random_function(rng, s.atom_count(), i % 2 == 0);
    martingale_identities(s, f, tower, cons);
    const DoobReport d = doob_check(s, f, p);
    doob.observe(d.sharp_constant - d.ratio, {static_cast<double>(i)});
    worst = std::max(worst, d.ratio);
    const MaximalCarleson mc = maximal_carleson(s, f, p);
    acc.observe(-rel(mc.accounting, mc.fstar_norm_p), {static_cast<double>(i)});
    const CarlesonReport cr = verify_carleson(s, mc.seq);
    carl.observe(cr.margin.worst_margin, {static_cast<double>(i)});
  }
  ConditionReport steps("bellman_process.step", cfg.tol("inequality"));
  ConditionReport tele("bellman_process.telescoped", cfg.tol("inequality"));
  Rng prng = Rng(cfg.seed).derive("simulate/process");
  int clamped = 0;
  for (int i = 0; i < processes; ++i) {
    const FilteredSpace s = random_space(prng, prng.integer(2, max_atoms), prng.integer(1, max_levels));
    const auto f = random_function(prng, s.atom_count(), true);
    const CarlesonSeq seq = random_carleson(prng, s);
    const BellmanProcessReport b = bellman_process_check(s, f, seq, p);
    steps.merge(b.steps);
    tele.observe(b.initial_bound - b.embedding, {static_cast<double>(i)});
    clamped += b.clamped;
  }
  for (const auto* c : {&tower, &cons, &doob, &acc, &carl, &steps, &tele}) rep.add_condition(*c);
  rep.summary() = Json{{"spaces", spaces}, {"worst_doob_ratio", worst}, {"sharp_constant", p.sharp_constant()},
                       {"process_instances", processes}, {"clamped_states", clamped}};
  return R;
}

RunResult run_doob(const RunConfig& cfg) {
  RunResult R{RunReport("doob", cfg.seed), {}};
  auto& rep = R.report;
  const Exponent p(cfg.p);
  const std::string path = get_string(cfg.params, "space", "");
  ConditionReport doob("doob.ratio_below_sharp", cfg.tol("inequality"));
  ConditionReport acc("maximal_carleson.accounting", cfg.tol("identity"));
  if (!path.empty()) {
    const Json doc = read_json_file(path);
    const FilteredSpace s = space_from_json(doc);
    if (!doc.contains("f")) fail(ErrorKind::Parse, "space document needs an 'f' array of atom values");
    const auto f = doubles_from_json(doc.at("f"), "space.f");
    if (f.size() != s.atom_count()) fail(ErrorKind::Parse, "space.f needs one value per atom");
    const DoobReport d = doob_check(s, f, p);
    const MaximalCarleson mc = maximal_carleson(s, f, p);
    doob.observe(d.sharp_constant - d.ratio, {});
    acc.observe(-rel(mc.accounting, mc.fstar_norm_p), {});
    rep.summary() = Json{{"doob", d.to_json()}, {"fstar", mc.fstar}, {"first_level", mc.first_level},
                         {"accounting", mc.accounting}, {"fstar_norm_p", mc.fstar_norm_p}};
  } else {
    const int spaces = positive_int(cfg.params, "spaces", 1000, 10000000);
    const int max_atoms = positive_int(cfg.params, "max_atoms", 40, 100000);
    const int max_levels = positive_int(cfg.params, "max_levels", 6, 64);
    require(max_atoms >= 2, "max_atoms must be at least 2");
    Rng rng = Rng(cfg.seed).derive("doob/spaces");
    double worst = 0.0;
    for (int i = 0; i < spaces; ++i) {
      const FilteredSpace s = random_space(rng, rng.integer(2, max_atoms), rng.integer(1, max_levels));
      const auto f = random_function(rng, s.atom_count(), false);
      const DoobReport d = doob_check(s, f, p);
      doob.observe(d.sharp_constant - d.ratio, {static_cast<double>(i)});
      const MaximalCarleson mc = maximal_carleson(s, f, p);
      acc.observe(-rel(mc.accounting, mc.fstar_norm_p), {static_cast<double>(i)});
      worst = std::max(worst, d.ratio);
    }
    rep.summary() = Json{{"spaces", spaces}, {"worst_ratio", worst}, {"sharp_constant", p.sharp_constant()}};
  }
  rep.add_condition(doob);
  rep.add_condition(acc);
  return R;
}

std::string node_margins_csv(const RemodelingOutput& out, const DyadicWeightedTree& tree) {
  const auto avg = level_averages(tree);
  std::string csv = "k,j,mass,mass_over_length,average,dyadic_average\n";
  for (std::size_t k = 0; k < out.set_mass.size(); ++k)
    for (std::size_t j = 0; j < out.set_mass[k].size(); ++j)
      csv += std::to_string(k) + "," + std::to_string(j + 1) + "," + fmt(out.set_mass[k][j]) + "," +
             fmt(out.set_mass[k][j] / tree.length(static_cast<int>(k))) + "," + fmt(out.set_avg[k][j]) + "," +
             fmt(avg[k][j]) + "\n";
  return csv;
}

RunResult run_remodel(const RunConfig& cfg) {
  RunResult R{RunReport("remodel", cfg.seed), {}};
  auto& rep = R.report;
  const Exponent p(cfg.p);
  const double eps = eps_param(cfg.params, 0.01);
  const std::string path = get_string(cfg.params, "tree", "");
  DyadicWeightedTree tree;
  if (!path.empty()) {
    tree = tree_from_json(read_json_file(path));
  } else {
    Rng trng = Rng(cfg.seed).derive("remodel/tree");
    tree = random_tree(trng, positive_int(cfg.params, "N", 5, 14));
  }
  require(tree.depth() >= 1 && tree.depth() <= 14, "remodeling needs tree depth in 1..14");
  const std::string kind = get_string(cfg.params, "schedule", "random");
  RemodelingConfig rc;
  if (kind == "random") {
    Rng srng = Rng(cfg.seed).derive("remodel/schedule");
    rc = random_schedule(srng, eps, tree.depth());
  } else if (kind == "adversarial") {
    rc = adversarial_schedule(tree, eps);
  } else if (kind == "zero") {
    rc = zero_schedule(eps, tree.depth());
  } else {
    fail(ErrorKind::InvalidArgument, "schedule must be random, adversarial or zero");
  }
  rc.seed = cfg.seed;
  RemodelingOutput out = remodel(tree, rc);
  add_checks(rep, out.audit, "audit.");
  const BoundReport c1 = verify_transferred_carleson(out);
  const BoundReport en = verify_energy_bounds(out, tree, p);
  add_checks(rep, c1.checks, "carleson.");
  add_checks(rep, en.checks, "energy.");
  const double target = get_double(cfg.params, "target_F", -1.0);
  if (target >= 0.0) {
    out = rebalance_f(out, target, p);
    add_checks(rep, {out.audit.end() - 2, out.audit.end()}, "audit.");
  } else {
    rep.skip("rebalance", "no target_F given");
  }
  const BoundReport mt = verify_maximal_transfer(out, tree, p);
  add_checks(rep, mt.checks, "maximal.");
  rep.summary() = Json{{"eps", eps},
                       {"N", tree.depth()},
                       {"schedule", kind},
                       {"atoms", out.space.atom_count()},
                       {"carleson", c1.values},
                       {"energy", en.values},
                       {"maximal", mt.values},
                       {"mean_deviation", out.mean_deviation},
                       {"t0", out.t0}};
  R.artifacts.push_back({"remodel.json", dump_json(out.to_json())});
  R.artifacts.push_back({"node_margins.csv", node_margins_csv(out, tree)});
  return R;
}

TheoremAConfig theorem_config(const RunConfig& cfg, double eps) {
  TheoremAConfig c;
  c.F = get_double(cfg.params, "F", 1.0);
  c.f_bar = get_double(cfg.params, "f", 0.6);
  c.M = get_double(cfg.params, "M", 1.0);
  c.p = cfg.p;
  c.eps = eps;
  c.N = positive_int(cfg.params, "N", 5, 12);
  c.delta1 = get_double(cfg.params, "delta1", -1.0);
  c.delta2 = get_double(cfg.params, "delta2", 0.01);
  c.grid = grid_shape(cfg.params, 51).first;
  c.dp = dp_options(cfg);
  c.schedule = get_string(cfg.params, "schedule", "adversarial");
  c.seed = cfg.seed;
  return c;
}

std::vector<double> eps_list(const RunConfig& cfg) {
  const auto es = get_doubles(cfg.params, "eps", {0.05, 0.02, 0.01});
  require(!es.empty(), "eps list must not be empty");
  for (double e : es) require(e > 0.0 && e < 1.0, "eps must lie in (0, 1)");
  return es;
}

RunResult run_theorem_a(const RunConfig& cfg) {
  RunResult R{RunReport("theorem-a", cfg.seed), {}};
  auto& rep = R.report;
  const auto es = eps_list(cfg);
  Json runs = Json::array();
  std::vector<std::pair<double, double>> ratios;
  for (double e : es) {
    const TheoremAResult r = theorem_A_experiment(theorem_config(cfg, e));
    if (r.skipped) {
      rep.skip("eps=" + label(e), r.skip_reason);
      runs.push_back(Json{{"eps", e}, {"skipped", true}, {"reason", r.skip_reason}});
      continue;
    }
    add_checks(rep, r.checks, "eps=" + label(e) + ".");
    Json j = r.to_json();
    j.erase("checks");
    j["eps"] = e;
    runs.push_back(std::move(j));
    ratios.push_back({e, r.ratio});
  }
  // ratio must grow as eps shrinks
  std::sort(ratios.begin(), ratios.end(), [](auto a, auto b) { return a.first > b.first; });
  if (ratios.size() >= 2) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < ratios.size(); ++i) worst = std::min(worst, ratios[i].second - ratios[i - 1].second);
    rep.add_check("trend.ratio_increases_as_eps_decreases", worst, 0.0);
  }
  rep.summary()["runs"] = runs;
  return R;
}

RunResult run_theorem_b(const RunConfig& cfg) {
  RunResult R{RunReport("theorem-b", cfg.seed), {}};
  auto& rep = R.report;
  Json runs = Json::array();
  for (double e : eps_list(cfg)) {
    const TheoremBResult r = theorem_B_experiment(theorem_config(cfg, e));
    if (r.skipped) {
      rep.skip("eps=" + label(e), r.skip_reason);
      continue;
    }
    add_checks(rep, r.checks, "eps=" + label(e) + ".");
    Json j = r.to_json();
    j.erase("checks");
    j["eps"] = e;
    runs.push_back(std::move(j));
  }
  rep.summary()["runs"] = runs;
  rep.summary()["sharp_constant"] = Exponent(cfg.p).sharp_constant();
  return R;
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& command, const Json& j) {
  RunConfig c;
  c.command = command;
  const auto& keys = command_keys();
  const auto it = keys.find(command);
  if (it == keys.end()) fail(ErrorKind::Parse, "unknown command '" + command + "'");
  if (!j.is_object()) fail(ErrorKind::Parse, "config must be a JSON object");
  c.tolerances = default_tolerances();
  for (auto kv = j.begin(); kv != j.end(); ++kv) {
    const std::string& k = kv.key();
    if (k == "p") {
      c.p = get_double(j, "p", 2.0);
    } else if (k == "seed") {
      if (!kv->is_number_unsigned() && !(kv->is_number_integer() && kv->get<long long>() >= 0))
        fail(ErrorKind::Parse, "seed must be a nonnegative integer");
      c.seed = kv->get<std::uint64_t>();
    } else if (k == "threads") {
      c.threads = get_int(j, "threads", 1);
    } else if (k == "tolerances") {
      if (!kv->is_object()) fail(ErrorKind::Parse, "tolerances must be an object");
      for (auto t = kv->begin(); t != kv->end(); ++t) {
        if (!c.tolerances.count(t.key())) fail(ErrorKind::Parse, "unknown tolerance '" + t.key() + "'");
        if (!t->is_number()) fail(ErrorKind::Parse, "tolerance '" + t.key() + "' must be a number");
        c.tolerances[t.key()] = t->get<double>();
      }
    } else if (it->second.count(k)) {
      c.params[k] = *kv;
    } else {
      fail(ErrorKind::Parse, "unknown config key '" + k + "' for command " + command);
    }
  }
  require(c.p > 1.0 && std::isfinite(c.p), "p must exceed 1");
  require(c.threads >= 1 && c.threads <= 256, "threads must lie in 1..256");
  for (const auto& [k, v] : c.tolerances) require(v > 0.0, "tolerance '" + k + "' must be positive");
  return c;
}

Json RunConfig::to_json() const {
  Json j = params;
  j["p"] = p;
  j["seed"] = seed;
  j["threads"] = threads;
  j["tolerances"] = tolerances;
  return j;
}

std::string RunResult::table() const {
  std::string s;
  char line[512];
  int passed = 0;
  for (const auto& c : report.checks()) {
    passed += c.pass;
    std::snprintf(line, sizeof line, "%-4s  %-60s  margin %12.4e  tol %.1e\n", c.pass ? "PASS" : "FAIL", c.name.c_str(),
                  c.margin, c.tolerance);
    s += line;
  }
  for (const auto& k : report.skipped()) {
    std::snprintf(line, sizeof line, "SKIP  %-60s  %s\n", k.name.c_str(), k.reason.c_str());
    s += line;
  }
  std::snprintf(line, sizeof line, "%s: %d/%zu checks passed\n", report.command().c_str(), passed,
                report.checks().size());
  s += line;
  return s;
}

RunResult run_pipeline(const RunConfig& cfg) {
  RunResult r;
  const std::string& c = cfg.command;
  if (c == "eval") r = run_eval(cfg);
  else if (c == "verify-supersolution") r = run_verify_supersolution(cfg);
  else if (c == "dp-solve") r = run_dp_solve(cfg);
  else if (c == "extract-tree") r = run_extract_tree(cfg);
  else if (c == "embed-check") r = run_embed_check(cfg);
  else if (c == "simulate") r = run_simulate(cfg);
  else if (c == "doob") r = run_doob(cfg);
  else if (c == "remodel") r = run_remodel(cfg);
  else if (c == "theorem-a") r = run_theorem_a(cfg);
  else if (c == "theorem-b") r = run_theorem_b(cfg);
  else fail(ErrorKind::Parse, "unknown command '" + c + "'");
  r.report.config() = cfg.to_json();
  return r;
}

}  // namespace clab
