#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mvcl {

/// Scalar objective evaluated in 64-bit precision at a flat parameter vector.
using ScalarFunction = std::function<double(std::span<const double>)>;

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every
/// coordinate of x.
std::vector<double> FiniteDiffGrad(const ScalarFunction& f, std::span<const double> x, double h);

/// Same, restricted to the listed coordinates (result is parallel to them).
std::vector<double> FiniteDiffGrad(const ScalarFunction& f, std::span<const double> x, double h,
                                   std::span<const std::size_t> coords);

/// |a - n| / max(|a|, |n|, floor). The floor keeps vanishing gradients from
/// turning rounding noise into large relative errors.
double RelativeError(double analytic, double numeric, double floor = 1e-6);

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

/// Compares analytic gradients with central differences at `coords`.
/// Coordinates where `skip` returns true (e.g. near a kink) are excluded.
GradCheckResult CompareGradients(const ScalarFunction& f, std::span<const double> x,
                                 std::span<const double> analytic, double h,
                                 std::span<const std::size_t> coords,
                                 const std::function<bool(std::size_t)>& skip = {});

}  // namespace mvcl
