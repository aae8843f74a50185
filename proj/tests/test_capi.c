/* Exercises the shared library through its C header only. */
#include <clab/clab.h>

#include <math.h>
#include <stdio.h>
#include <string.h>

static int failures = 0;

#define EXPECT(cond)                                              \
  do {                                                            \
    if (!(cond)) {                                                \
      fprintf(stderr, "%s:%d: %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                 \
    }                                                             \
  } while (0)

static int near(double a, double b, double tol) { return fabs(a - b) <= tol; }

int main(void) {
  double v = 0.0;
  EXPECT(strlen(clab_version()) > 0);

  EXPECT(clab_eval_supersolution(1, 0, 0.5, 1, 2, &v) == CLAB_OK && near(v, 4.0, 1e-14));
  EXPECT(clab_eval_supersolution(1, 1, 1, 1, 2, &v) == CLAB_OK && near(v, 2.0, 1e-14));
  EXPECT(clab_eval_supersolution(1, 1.1, 0.5, 1, 2, &v) == CLAB_ERR_DOMAIN);
  EXPECT(strlen(clab_last_error()) > 0);
  EXPECT(clab_eval_supersolution(1, 0.5, 0.5, 1, 1.0, &v) == CLAB_ERR_INVALID_ARGUMENT);
  EXPECT(clab_eval_supersolution(1, 0.5, 0.5, 1, 2, NULL) == CLAB_ERR_INVALID_ARGUMENT);
  EXPECT(clab_eval_supersolution_dM(2, 1, 1, 1, 2, &v) == CLAB_OK && near(v, 1.0, 1e-14));
  EXPECT(clab_eval_hull(1, 1, 2, &v) == CLAB_OK && near(v, -2.0, 1e-14));
  EXPECT(clab_eval_phi(0, 3, &v) == CLAB_OK && near(v, 3.375, 1e-12));
  EXPECT(strcmp(clab_status_name(CLAB_ERR_PARSE), "parse") == 0);

  /* depth-one tree */
  clab_tree* t = NULL;
  EXPECT(clab_tree_from_json("{\"depth\":1,\"leaf_values\":[1,3],\"weights\":{\"0,1\":0.5,\"1,1\":0.25,\"1,2\":0.25}}",
                             &t) == CLAB_OK);
  if (t) {
    double sum = 0, C = 0, ratio = 0;
    EXPECT(clab_tree_depth(t) == 1);
    EXPECT(clab_tree_embedding(t, 2, &sum, &C, &ratio) == CLAB_OK);
    EXPECT(near(sum, 4.5, 1e-15) && near(C, 1.0, 1e-15) && near(ratio, 0.9, 1e-15));
    EXPECT(clab_tree_set_weight(t, 2, 1, 1.0) == CLAB_ERR_INVALID_ARGUMENT);
    EXPECT(clab_tree_set_weight(t, 0, 1, 1.5) == CLAB_OK);
    EXPECT(clab_tree_embedding(t, 2, &sum, NULL, NULL) == CLAB_OK && near(sum, 8.5, 1e-14));
    clab_tree_free(t);
  }
  t = NULL;
  EXPECT(clab_tree_from_json("{\"depth\":", &t) == CLAB_ERR_PARSE && t == NULL);

  /* two-atom space */
  clab_space* s = NULL;
  EXPECT(clab_space_from_json("{\"atoms\":[{\"id\":0,\"mass\":0.5},{\"id\":1,\"mass\":0.5}],\"levels\":[[0,0],[0,1]]}",
                              &s) == CLAB_OK);
  if (s) {
    const double f[2] = {0.0, 2.0};
    double fstar[2] = {0, 0}, ratio = 0;
    EXPECT(clab_space_atom_count(s) == 2 && clab_space_level_count(s) == 2);
    EXPECT(clab_space_maximal(s, f, 2, fstar) == CLAB_OK && fstar[0] == 1.0 && fstar[1] == 2.0);
    EXPECT(clab_space_doob_ratio(s, f, 2, 2.0, &ratio) == CLAB_OK && near(ratio, 1.25, 1e-15));
    EXPECT(clab_space_maximal(s, f, 1, fstar) == CLAB_ERR_INVALID_ARGUMENT);
    clab_space_free(s);
  }

  /* grid */
  clab_grid* g = NULL;
  EXPECT(clab_grid_solve(2.0, 11, 11, 1e-5, 20, 8, 1, &g) == CLAB_OK);
  if (g) {
    EXPECT(clab_grid_sup(g) > 1.0 && clab_grid_sup(g) < 4.0);
    EXPECT(clab_grid_value(g, 1.0, 1.0, 0.5, &v) == CLAB_OK && near(v, 0.5, 1e-6));
    clab_grid_free(g);
  }
  EXPECT(clab_grid_solve(2.0, 11, 11, 1e-5, 20, 8, 0, &g) == CLAB_ERR_INVALID_ARGUMENT);

  /* pipelines */
  clab_report* r = NULL;
  EXPECT(clab_run("eval", "{\"F\":1,\"f\":0.5,\"M\":0.5}", &r) == CLAB_OK);
  if (r) {
    const char* name = NULL;
    int pass = 0;
    double margin = 0, tol = 0;
    EXPECT(clab_report_passed(r) == 1);
    EXPECT(clab_report_check_count(r) > 0);
    EXPECT(clab_report_check(r, 0, &name, &pass, &margin, &tol) == CLAB_OK && name && pass == 1);
    EXPECT(clab_report_check(r, 1000, &name, &pass, &margin, &tol) == CLAB_ERR_INVALID_ARGUMENT);
    EXPECT(strstr(clab_report_json(r), "\"schema_version\"") != NULL);
    EXPECT(strlen(clab_report_table(r)) > 0);
    EXPECT(clab_report_artifact_count(r) == 0);
    clab_report_free(r);
  }
  r = NULL;
  EXPECT(clab_run("eval", "{not json", &r) == CLAB_ERR_PARSE && r == NULL);
  EXPECT(clab_run("bogus", NULL, &r) == CLAB_ERR_PARSE || clab_run("bogus", NULL, &r) == CLAB_ERR_INVALID_ARGUMENT);
  EXPECT(clab_run("remodel", "{\"N\":2,\"eps\":0.05}", &r) == CLAB_OK);
  if (r) {
    const char* name = NULL;
    const char* content = NULL;
    EXPECT(clab_report_artifact_count(r) == 2);
    EXPECT(clab_report_artifact(r, 0, &name, &content) == CLAB_OK && strlen(content) > 0);
    clab_report_free(r);
  }
  clab_report_free(NULL);

  if (failures) fprintf(stderr, "%d failure(s)\n", failures);
  else printf("capi: all checks passed\n");
  return failures ? 1 : 0;
}
