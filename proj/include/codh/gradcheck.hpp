#pragma once

#include <cmath>
#include <stdexcept>

#include "codh/tensor.hpp"

namespace codh {

struct CheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  double max_rel_err_raw = 0.0;  // same ratio without the absolute floor
  Index worst_index = -1;
  Index coordinates = 0;
  bool pass = true;
};

/// Compares `analytic` (the gradient of fn at x) against central differences
/// (fn(x + eps e_i) - fn(x - eps e_i)) / (2 eps) for every coordinate i.
///
/// A coordinate whose absolute disagreement is within `abs_floor` counts as
/// exact; otherwise its error is |a - n| / max(|a|, |n|). Passes iff the worst
/// such error is <= tol.
template <typename Scalar, typename Fn>
CheckReport finite_diff_check(Fn&& fn, const Tensor<Scalar>& x, const Tensor<Scalar>& analytic,
                              Scalar eps, Scalar tol, Scalar abs_floor = Scalar(1e-8)) {
  if (!(eps > Scalar(0))) throw std::invalid_argument("degenerate step");
  if (analytic.shape() != x.shape()) {
    throw ShapeError("finite_diff_check: gradient shape " + shape_string(analytic.shape()) +
                     " does not match input " + shape_string(x.shape()));
  }
  CheckReport report;
  report.coordinates = x.size();
  Tensor<Scalar> probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar saved = probe[i];
    probe[i] = saved + eps;
    const Scalar up = static_cast<Scalar>(fn(static_cast<const Tensor<Scalar>&>(probe)));
    probe[i] = saved - eps;
    const Scalar down = static_cast<Scalar>(fn(static_cast<const Tensor<Scalar>&>(probe)));
    probe[i] = saved;

    const Scalar numeric = (up - down) / (Scalar(2) * eps);
    const Scalar diff = std::abs(numeric - analytic[i]);
    const Scalar scale = std::max(std::abs(numeric), std::abs(analytic[i]));
    const Scalar rel = diff <= abs_floor ? Scalar(0) : diff / scale;
    // NaN is sticky: once seen it stays the worst error.
    const bool worse = std::isnan(rel) ? !std::isnan(report.max_rel_err)
                                       : report.worst_index < 0 || rel > report.max_rel_err;
    if (worse) {
      report.max_rel_err = static_cast<double>(rel);
      report.worst_index = i;
    }
    report.max_abs_err = std::max(report.max_abs_err, static_cast<double>(diff));
    if (scale > Scalar(0)) report.max_rel_err_raw = std::max(report.max_rel_err_raw, static_cast<double>(diff / scale));
  }
  report.pass = report.max_rel_err <= static_cast<double>(tol);
  return report;
}

}  // namespace codh
