#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcsbn/tensor.hpp"

namespace mcsbn {

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double max_rel_err = 0.0;
};

// Central finite differences against analytic gradients, one entry per
// tensor. loss() must be deterministic and re-evaluate with the current
// parameter values. Intended for double instantiations of the model.
template <typename T, typename LossFn>
GradCheckReport grad_check(LossFn loss, const NamedTensors<T>& params,
                           const std::vector<const Tensor<T>*>& analytic, T step) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("grad_check: tensor count mismatch");
  GradCheckReport report;
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i].second;
    const Tensor<T>& an = *analytic[i];
    if (!p.same_shape(an)) throw std::invalid_argument("grad_check: shape mismatch");
    GradCheckEntry entry{params[i].first};
    for (size_t j = 0; j < p.size(); ++j) {
      T saved = p.v[j];
      p.v[j] = saved + step;
      double lp = static_cast<double>(loss());
      p.v[j] = saved - step;
      double lm = static_cast<double>(loss());
      p.v[j] = saved;
      if (!std::isfinite(lp) || !std::isfinite(lm))
        throw std::runtime_error("grad_check: non-finite loss");
      double fd = (lp - lm) / (2.0 * static_cast<double>(step));
      double a = static_cast<double>(an.v[j]);
      double abs_err = std::fabs(fd - a);
      // floor the denominator: near-zero gradients are held to an absolute
      // bound instead of drowning in finite-difference noise
      double rel = abs_err / std::max({std::fabs(fd), std::fabs(a), 1e-6});
      entry.max_abs_err = std::max(entry.max_abs_err, abs_err);
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

} // namespace mcsbn
