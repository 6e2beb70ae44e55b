#include "pbo/optim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace pbo::optim {
namespace {

double sanitize(double v) { return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity(); }

}  // namespace

Result nelder_mead_maximize(const std::function<double(const Eigen::VectorXd&)>& objective,
                            const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                            const Eigen::VectorXd& upper, const NelderMeadOptions& options) {
  const Eigen::Index n = x0.size();
  Result best{x0.cwiseMax(lower).cwiseMin(upper), 0.0, 0};
  auto eval = [&](const Eigen::VectorXd& x) {
    const double v = sanitize(objective(x));
    ++best.evaluations;
    return v;
  };
  best.value = eval(best.x);
  if (n == 0) return best;

  std::vector<Eigen::VectorXd> simplex{best.x};
  std::vector<double> values{best.value};
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd v = best.x;
    const double step = options.initial_step * (upper[i] - lower[i]);
    v[i] = (v[i] + step <= upper[i]) ? v[i] + step : v[i] - step;
    v = v.cwiseMax(lower).cwiseMin(upper);
    simplex.push_back(v);
    values.push_back(eval(v));
  }

  std::vector<std::size_t> order(simplex.size());
  while (best.evaluations < options.max_evaluations) {
    std::iota(order.begin(), order.end(), 0);
    // Descending by value; stable so ties keep insertion order.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<Eigen::VectorXd> s2;
    std::vector<double> v2;
    for (auto k : order) {
      s2.push_back(simplex[k]);
      v2.push_back(values[k]);
    }
    simplex.swap(s2);
    values.swap(v2);

    if (std::isfinite(values.back()) && values.front() - values.back() < options.value_tolerance) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i) centroid += simplex[i];
    centroid /= static_cast<double>(n);
    const Eigen::VectorXd& worst = simplex.back();

    auto clampv = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return x.cwiseMax(lower).cwiseMin(upper); };
    Eigen::VectorXd xr = clampv(centroid + (centroid - worst));
    const double fr = eval(xr);
    if (fr > values.front()) {
      Eigen::VectorXd xe = clampv(centroid + 2.0 * (centroid - worst));
      const double fe = eval(xe);
      if (fe > fr) {
        simplex.back() = xe;
        values.back() = fe;
      } else {
        simplex.back() = xr;
        values.back() = fr;
      }
      continue;
    }
    if (fr > values[n - 1]) {
      simplex.back() = xr;
      values.back() = fr;
      continue;
    }
    const bool outside = fr > values.back();
    Eigen::VectorXd xc = outside ? clampv(centroid + 0.5 * (xr - centroid)) : clampv(centroid + 0.5 * (worst - centroid));
    const double fc = eval(xc);
    if (fc > std::max(fr, values.back())) {
      simplex.back() = xc;
      values.back() = fc;
      continue;
    }
    for (std::size_t k = 1; k < simplex.size(); ++k) {
      simplex[k] = clampv(simplex.front() + 0.5 * (simplex[k] - simplex.front()));
      values[k] = eval(simplex[k]);
    }
  }

  for (std::size_t k = 0; k < simplex.size(); ++k) {
    if (values[k] > best.value) {
      best.value = values[k];
      best.x = simplex[k];
    }
  }
  return best;
}

Result projected_ascent(const ValueAndGradient& objective, const Eigen::VectorXd& x0,
                        const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                        const AscentOptions& options) {
  const Eigen::Index n = x0.size();
  Eigen::VectorXd x = x0.cwiseMax(lower).cwiseMin(upper);
  Eigen::VectorXd grad(n), m = Eigen::VectorXd::Zero(n), v = Eigen::VectorXd::Zero(n);
  Result best{x, sanitize(objective(x, &grad)), 1};
  double value = best.value;

  for (int t = 1; t <= options.max_iterations && std::isfinite(value); ++t) {
    if (!grad.allFinite()) break;
    m = options.beta1 * m + (1.0 - options.beta1) * grad;
    v = options.beta2 * v + (1.0 - options.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(options.beta1, t);
    const double c2 = 1.0 - std::pow(options.beta2, t);
    Eigen::VectorXd step =
        options.learning_rate * (m / c1).cwiseQuotient(((v / c2).cwiseSqrt().array() + 1e-12).matrix());
    Eigen::VectorXd next = (x + step).cwiseMax(lower).cwiseMin(upper);
    const double moved = (next - x).cwiseAbs().maxCoeff();
    x = next;
    value = sanitize(objective(x, &grad));
    ++best.evaluations;
    if (value > best.value) {
      best.value = value;
      best.x = x;
    }
    if (moved < options.step_tolerance) break;
  }
  return best;
}

}  // namespace pbo::optim
