#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <string>

#include "semcom/graph.hpp"

namespace semcom {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  bool pass = false;
  bool aborted = false;
  std::string diagnostic;
};

/// Scalar function of one matrix, built on a fresh graph for every call.
using GraphFunction = std::function<Var(Graph&, Var)>;

/// Compares an analytic gradient against central differences component-wise.
/// Components whose absolute error is at most 1e-10 (finite-difference
/// roundoff) are accepted regardless of their relative error.
inline GradCheckReport grad_check(const std::function<double(const Matrix&)>& value_fn,
                                  const std::function<Matrix(const Matrix&)>& grad_fn,
                                  const Matrix& point, double step, double tolerance) {
  if (!(step > 0.0)) throw contract_error("grad_check: step must be positive");
  GradCheckReport report;

  const double f0 = value_fn(point);
  const double f1 = value_fn(point);
  if (std::memcmp(&f0, &f1, sizeof f0) != 0) {
    report.aborted = true;
    report.diagnostic = "function is not deterministic: " + std::to_string(f0) + " vs " +
                        std::to_string(f1);
    return report;
  }

  const Matrix analytic = grad_fn(point);
  if (!analytic.same_shape(point)) throw dimension_error("grad_check: gradient shape mismatch");

  constexpr double kAbsFloor = 1e-10;
  Matrix probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double x = point[i];
    probe[i] = x + step;
    const double up = value_fn(probe);
    probe[i] = x - step;
    const double down = value_fn(probe);
    probe[i] = x;
    const double numeric = (up - down) / (2.0 * step);
    const double abs_err = std::abs(analytic[i] - numeric);
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    if (abs_err <= kAbsFloor) continue;
    const double rel = abs_err / std::max(std::abs(analytic[i]), std::abs(numeric));
    report.max_rel_err = std::max(report.max_rel_err, rel);
  }
  report.pass = report.max_rel_err <= tolerance;
  return report;
}

/// Graph-based convenience: the analytic gradient comes from Graph::backward.
inline GradCheckReport grad_check(const GraphFunction& fn, const Matrix& point, double step,
                                  double tolerance) {
  auto value_fn = [&fn](const Matrix& x) {
    Graph g;
    Var out = fn(g, g.constant(x));
    if (out.value().size() != 1) throw contract_error("grad_check: function must return a scalar");
    return out.value()[0];
  };
  auto grad_fn = [&fn](const Matrix& x) {
    Graph g;
    Tensor t(x, true);
    g.backward(fn(g, g.track(t)));
    return *t.grad;
  };
  return grad_check(value_fn, grad_fn, point, step, tolerance);
}

}  // namespace semcom
