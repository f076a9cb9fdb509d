#pragma once

#include <span>
#include <string>
#include <vector>

#include "mecsim/numkit/tensor.hpp"

namespace mecsim::numkit {

/// Ordered, named collection of parameter tensors. Two ParamSets built from
/// the same architecture have identical names and shapes in identical order,
/// which is what makes the elementwise blends below well defined.
struct ParamSet {
  struct Entry {
    std::string name;
    Tensor2 value;
  };

  std::vector<Entry> entries;

  std::size_t scalar_count() const;
  bool same_architecture(const ParamSet& o) const;
  void fill(double v);
  bool all_finite() const;
};

ParamSet zeros_like(const ParamSet& p);

/// p - lr * g.
ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr);
void sgd_step_inplace(ParamSet& params, const ParamSet& grads, double lr);

/// kappa * online + (1 - kappa) * target, kappa in [0, 1].
ParamSet soft_blend(const ParamSet& target, const ParamSet& online, double kappa);
void soft_blend_inplace(ParamSet& target, const ParamSet& online, double kappa);

/// Adaptive-moment optimizer state; optional alternative to plain SGD.
struct AdamState {
  ParamSet m;
  ParamSet v;
  long t = 0;
};

void adam_step_inplace(ParamSet& params, const ParamSet& grads, double lr, AdamState& state,
                       double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

void scale_inplace(ParamSet& p, double s);
void add_scaled_inplace(ParamSet& p, const ParamSet& g, double s);

std::vector<double> flatten(const ParamSet& p);
void unflatten(std::span<const double> flat, ParamSet& p);

}  // namespace mecsim::numkit
