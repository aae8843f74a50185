#include "clab/clab.h"

#include <exception>
#include <new>
#include <string>
#include <vector>

#include "clab/bellman_core.hpp"
#include "clab/bellman_dp.hpp"
#include "clab/dyadic_model.hpp"
#include "clab/error.hpp"
#include "clab/martingale_lab.hpp"
#include "clab/pipelines.hpp"
#include "clab/serialization.hpp"

struct clab_report {
  clab::RunResult result;
  std::string json;
  std::string table;
};

struct clab_tree {
  clab::DyadicWeightedTree tree;
};

struct clab_space {
  clab::FilteredSpace space;
};

struct clab_grid {
  clab::BellmanGrid grid;
};

namespace {

thread_local std::string g_last_error;

clab_status status_of(clab::ErrorKind k) {
  switch (k) {
    case clab::ErrorKind::InvalidArgument: return CLAB_ERR_INVALID_ARGUMENT;
    case clab::ErrorKind::Domain: return CLAB_ERR_DOMAIN;
    case clab::ErrorKind::Infeasible: return CLAB_ERR_INFEASIBLE;
    case clab::ErrorKind::Parse: return CLAB_ERR_PARSE;
    case clab::ErrorKind::Measurability: return CLAB_ERR_MEASURABILITY;
    case clab::ErrorKind::Io: return CLAB_ERR_IO;
  }
  return CLAB_ERR_INTERNAL;
}

template <typename Fn>
clab_status guarded(Fn&& fn) {
  try {
    g_last_error.clear();
    fn();
    return CLAB_OK;
  } catch (const clab::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return CLAB_ERR_PARSE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CLAB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CLAB_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return CLAB_ERR_INTERNAL;
  }
}

clab_status null_arg(const char* what) {
  g_last_error = std::string(what) + " must not be NULL";
  return CLAB_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* clab_version(void) { return CLAB_VERSION_STRING; }

const char* clab_status_name(clab_status s) {
  switch (s) {
    case CLAB_OK: return "ok";
    case CLAB_ERR_INVALID_ARGUMENT: return "invalid argument";
    case CLAB_ERR_DOMAIN: return "domain";
    case CLAB_ERR_INFEASIBLE: return "infeasible";
    case CLAB_ERR_PARSE: return "parse";
    case CLAB_ERR_MEASURABILITY: return "measurability";
    case CLAB_ERR_IO: return "io";
    case CLAB_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* clab_last_error(void) { return g_last_error.c_str(); }

clab_status clab_eval_supersolution(double F, double f, double M, double C, double p, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = clab::eval_supersolution({F, f, M, C}, clab::Exponent(p)); });
}

clab_status clab_eval_supersolution_dM(double F, double f, double M, double C, double p, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    const clab::Exponent e(p);
    clab::require_domain({F, f, M, C}, e);
    *out = clab::supersolution_dM({F, f, M, C}, e);
  });
}

clab_status clab_eval_hull(double f, double M, double p, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] { *out = clab::eval_hull(f, M, clab::Exponent(p)); });
}

clab_status clab_eval_phi(double M, double p, double* out) {
  if (!out) return null_arg("out");
  return guarded([&] {
    const clab::Exponent e(p);
    *out = clab::eval_phi(M, clab::HullProfile::optimal(e), e);
  });
}

clab_status clab_run(const char* command, const char* config_json, clab_report** out) {
  if (!command) return null_arg("command");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    clab::Json cfg = clab::Json::object();
    if (config_json && *config_json) {
      try {
        cfg = clab::Json::parse(config_json);
      } catch (const clab::Json::parse_error& e) {
        clab::fail(clab::ErrorKind::Parse, std::string("config: ") + e.what());
      }
    }
    const clab::RunConfig rc = clab::RunConfig::from_json(command, cfg);
    auto* r = new clab_report{clab::run_pipeline(rc), {}, {}};
    r->json = clab::dump_json(r->result.report.to_json());
    r->table = r->result.table();
    *out = r;
  });
}

void clab_report_free(clab_report* report) { delete report; }

int clab_report_passed(const clab_report* report) { return report && report->result.report.all_passed() ? 1 : 0; }

size_t clab_report_check_count(const clab_report* report) { return report ? report->result.report.checks().size() : 0; }

clab_status clab_report_check(const clab_report* report, size_t index, const char** name, int* pass, double* margin,
                              double* tolerance) {
  if (!report) return null_arg("report");
  const auto& cs = report->result.report.checks();
  if (index >= cs.size()) {
    g_last_error = "check index out of range";
    return CLAB_ERR_INVALID_ARGUMENT;
  }
  const auto& c = cs[index];
  if (name) *name = c.name.c_str();
  if (pass) *pass = c.pass ? 1 : 0;
  if (margin) *margin = c.margin;
  if (tolerance) *tolerance = c.tolerance;
  return CLAB_OK;
}

size_t clab_report_skip_count(const clab_report* report) { return report ? report->result.report.skipped().size() : 0; }

const char* clab_report_json(const clab_report* report) { return report ? report->json.c_str() : ""; }

const char* clab_report_table(const clab_report* report) { return report ? report->table.c_str() : ""; }

size_t clab_report_artifact_count(const clab_report* report) { return report ? report->result.artifacts.size() : 0; }

clab_status clab_report_artifact(const clab_report* report, size_t index, const char** name, const char** content) {
  if (!report) return null_arg("report");
  if (index >= report->result.artifacts.size()) {
    g_last_error = "artifact index out of range";
    return CLAB_ERR_INVALID_ARGUMENT;
  }
  const auto& a = report->result.artifacts[index];
  if (name) *name = a.name.c_str();
  if (content) *content = a.content.c_str();
  return CLAB_OK;
}

clab_status clab_tree_from_json(const char* json, clab_tree** out) {
  if (!json) return null_arg("json");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    clab::Json j;
    try {
      j = clab::Json::parse(json);
    } catch (const clab::Json::parse_error& e) {
      clab::fail(clab::ErrorKind::Parse, std::string("tree: ") + e.what());
    }
    *out = new clab_tree{clab::tree_from_json(j)};
  });
}

void clab_tree_free(clab_tree* tree) { delete tree; }

int clab_tree_depth(const clab_tree* tree) { return tree ? tree->tree.depth() : -1; }

clab_status clab_tree_set_weight(clab_tree* tree, int k, int j, double alpha) {
  if (!tree) return null_arg("tree");
  return guarded([&] { tree->tree.set_weight({k, j}, alpha); });
}

clab_status clab_tree_embedding(const clab_tree* tree, double p, double* embedding_sum, double* carleson_constant,
                                double* ratio) {
  if (!tree) return null_arg("tree");
  return guarded([&] {
    const auto r = clab::embedding_sum(tree->tree, clab::Exponent(p));
    if (embedding_sum) *embedding_sum = r.embedding_sum;
    if (carleson_constant) *carleson_constant = r.carleson_constant;
    if (ratio) *ratio = r.ratio;
  });
}

clab_status clab_space_from_json(const char* json, clab_space** out) {
  if (!json) return null_arg("json");
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    clab::Json j;
    try {
      j = clab::Json::parse(json);
    } catch (const clab::Json::parse_error& e) {
      clab::fail(clab::ErrorKind::Parse, std::string("space: ") + e.what());
    }
    *out = new clab_space{clab::space_from_json(j)};
  });
}

void clab_space_free(clab_space* space) { delete space; }

size_t clab_space_atom_count(const clab_space* space) { return space ? space->space.atom_count() : 0; }

size_t clab_space_level_count(const clab_space* space) { return space ? space->space.level_count() : 0; }

clab_status clab_space_maximal(const clab_space* space, const double* f, size_t n, double* fstar) {
  if (!space) return null_arg("space");
  if (!f || !fstar) return null_arg("f/fstar");
  return guarded([&] {
    if (n != space->space.atom_count()) clab::fail(clab::ErrorKind::InvalidArgument, "f needs one value per atom");
    const auto m = clab::maximal_function(space->space, std::vector<double>(f, f + n));
    for (size_t i = 0; i < n; ++i) fstar[i] = m[i];
  });
}

clab_status clab_space_doob_ratio(const clab_space* space, const double* f, size_t n, double p, double* ratio) {
  if (!space) return null_arg("space");
  if (!f || !ratio) return null_arg("f/ratio");
  return guarded([&] {
    if (n != space->space.atom_count()) clab::fail(clab::ErrorKind::InvalidArgument, "f needs one value per atom");
    *ratio = clab::doob_check(space->space, std::vector<double>(f, f + n), clab::Exponent(p)).ratio;
  });
}

clab_status clab_grid_solve(double p, int n_r, int n_M, double tol, int max_iters, int split_samples, int threads,
                            clab_grid** out) {
  if (!out) return null_arg("out");
  *out = nullptr;
  return guarded([&] {
    clab::DpOptions opt;
    opt.split_samples = split_samples;
    opt.threads = threads;
    if (split_samples < 2) clab::fail(clab::ErrorKind::InvalidArgument, "split_samples must be at least 2");
    if (threads < 1) clab::fail(clab::ErrorKind::InvalidArgument, "threads must be at least 1");
    *out = new clab_grid{clab::dp_solve(clab::Exponent(p), n_r, n_M, tol, max_iters, opt)};
  });
}

void clab_grid_free(clab_grid* grid) { delete grid; }

double clab_grid_sup(const clab_grid* grid) { return grid ? grid->grid.max_value() : 0.0; }

int clab_grid_converged(const clab_grid* grid) { return grid && grid->grid.converged ? 1 : 0; }

clab_status clab_grid_value(const clab_grid* grid, double F, double f, double M, double* out) {
  if (!grid) return null_arg("grid");
  if (!out) return null_arg("out");
  return guarded([&] { *out = grid->grid.value_at({F, f, M, 1.0}); });
}

}  // extern "C"
