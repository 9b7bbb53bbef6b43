#include "mvcl/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace mvcl {

std::vector<double> FiniteDiffGrad(const ScalarFunction& f, std::span<const double> x, double h,
                                   std::span<const std::size_t> coords) {
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> out;
  out.reserve(coords.size());
  for (std::size_t i : coords) {
    const double saved = probe[i];
    probe[i] = saved + h;
    const double up = f(probe);
    probe[i] = saved - h;
    const double down = f(probe);
    probe[i] = saved;
    out.push_back((up - down) / (2.0 * h));
  }
  return out;
}

std::vector<double> FiniteDiffGrad(const ScalarFunction& f, std::span<const double> x, double h) {
  std::vector<std::size_t> all(x.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return FiniteDiffGrad(f, x, h, all);
}

double RelativeError(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

GradCheckResult CompareGradients(const ScalarFunction& f, std::span<const double> x,
                                 std::span<const double> analytic, double h,
                                 std::span<const std::size_t> coords,
                                 const std::function<bool(std::size_t)>& skip) {
  std::vector<std::size_t> kept;
  GradCheckResult result;
  for (std::size_t i : coords) {
    if (skip && skip(i)) {
      ++result.skipped;
    } else {
      kept.push_back(i);
    }
  }
  const auto numeric = FiniteDiffGrad(f, x, h, kept);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    result.max_rel_err = std::max(result.max_rel_err, RelativeError(analytic[kept[k]], numeric[k]));
  }
  result.checked = kept.size();
  return result;
}

}  // namespace mvcl
