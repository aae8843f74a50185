#include "clab/quadrature.hpp"

#include <memory>

#include <gsl/gsl_integration.h>

#include "clab/error.hpp"

namespace clab {

QuadratureRule gauss_legendre(int n, double a, double b) {
  if (n < 1) fail(ErrorKind::InvalidArgument, "quadrature needs at least one node");
  std::unique_ptr<gsl_integration_glfixed_table, decltype(&gsl_integration_glfixed_table_free)>
      table(gsl_integration_glfixed_table_alloc(static_cast<size_t>(n)),
            &gsl_integration_glfixed_table_free);
  if (!table) fail(ErrorKind::InvalidArgument, "cannot allocate Gauss-Legendre table");
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    double x = 0.0, w = 0.0;
    gsl_integration_glfixed_point(a, b, static_cast<size_t>(i), &x, &w, table.get());
    rule.nodes[static_cast<std::size_t>(i)] = x;
    rule.weights[static_cast<std::size_t>(i)] = w;
  }
  return rule;
}

QuadratureRule composite_gauss_legendre(int n, int panels, double a, double b) {
  if (panels < 1) fail(ErrorKind::InvalidArgument, "composite rule needs at least one panel");
  QuadratureRule out;
  const double width = (b - a) / panels;
  for (int k = 0; k < panels; ++k) {
    auto r = gauss_legendre(n, a + k * width, a + (k + 1) * width);
    out.nodes.insert(out.nodes.end(), r.nodes.begin(), r.nodes.end());
    out.weights.insert(out.weights.end(), r.weights.begin(), r.weights.end());
  }
  return out;
}

}  // namespace clab
