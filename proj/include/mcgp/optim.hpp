#pragma once

// Box-constrained Nelder-Mead simplex search. Points leaving the box are
// projected back onto it, so every evaluated point is feasible.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace mcgp {

struct SimplexOptions {
  int max_evals = 200;
  double f_tol = 1e-10;   // stop when the simplex value spread falls below this
  double x_tol = 1e-8;    // ... and its diameter below this
  double initial_step = 0.5;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = std::numeric_limits<double>::infinity();
  int evals = 0;
};

inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper, const SimplexOptions& opts = {}) {
  const Eigen::Index p = x0.size();
  auto clamp = [&](Eigen::VectorXd v) {
    return Eigen::VectorXd(v.cwiseMax(lower).cwiseMin(upper));
  };

  SimplexResult best;
  auto eval = [&](const Eigen::VectorXd& x) {
    double v = f(x);
    if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
    ++best.evals;
    if (v < best.value) {
      best.value = v;
      best.x = x;
    }
    return v;
  };

  std::vector<Eigen::VectorXd> pts;
  std::vector<double> vals;
  pts.push_back(clamp(x0));
  vals.push_back(eval(pts[0]));
  for (Eigen::Index i = 0; i < p; ++i) {
    Eigen::VectorXd v = pts[0];
    const double span = upper[i] - lower[i];
    double step = std::min(opts.initial_step, 0.5 * span);
    // step towards the side with more room
    if (v[i] + step > upper[i]) step = -step;
    v[i] += step;
    pts.push_back(clamp(v));
    if (best.evals >= opts.max_evals) return best;
    vals.push_back(eval(pts.back()));
  }

  std::vector<std::size_t> order(pts.size());
  while (best.evals < opts.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t lo = order.front();
    const std::size_t hi = order.back();
    const std::size_t second = order[order.size() - 2];

    double diam = 0.0;
    for (const auto& q : pts) diam = std::max(diam, (q - pts[lo]).cwiseAbs().maxCoeff());
    if (std::abs(vals[hi] - vals[lo]) <= opts.f_tol && diam <= opts.x_tol) break;
    if (diam <= 1e-14) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(p);
    for (std::size_t i = 0; i < pts.size(); ++i)
      if (i != hi) centroid += pts[i];
    centroid /= static_cast<double>(p);

    const Eigen::VectorXd xr = clamp(centroid + (centroid - pts[hi]));
    const double fr = eval(xr);
    if (fr < vals[lo]) {
      if (best.evals >= opts.max_evals) {
        pts[hi] = xr; vals[hi] = fr;
        break;
      }
      const Eigen::VectorXd xe = clamp(centroid + 2.0 * (centroid - pts[hi]));
      const double fe = eval(xe);
      if (fe < fr) { pts[hi] = xe; vals[hi] = fe; }
      else { pts[hi] = xr; vals[hi] = fr; }
      continue;
    }
    if (fr < vals[second]) {
      pts[hi] = xr; vals[hi] = fr;
      continue;
    }
    if (best.evals >= opts.max_evals) break;
    const bool outside = fr < vals[hi];
    const Eigen::VectorXd xc = outside ? clamp(centroid + 0.5 * (xr - centroid))
                                       : clamp(centroid + 0.5 * (pts[hi] - centroid));
    const double fc = eval(xc);
    if (fc < std::min(fr, vals[hi])) {
      pts[hi] = xc; vals[hi] = fc;
      continue;
    }
    // shrink towards the best vertex
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i == lo) continue;
      if (best.evals >= opts.max_evals) break;
      pts[i] = clamp(pts[lo] + 0.5 * (pts[i] - pts[lo]));
      vals[i] = eval(pts[i]);
    }
  }
  return best;
}

}  // namespace mcgp
