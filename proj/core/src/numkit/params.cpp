#include "mecsim/numkit/params.hpp"

#include <cmath>

#include "mecsim/errors.hpp"

namespace mecsim::numkit {

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.value.size();
  return n;
}

bool ParamSet::same_architecture(const ParamSet& o) const {
  if (entries.size() != o.entries.size()) return false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].name != o.entries[i].name) return false;
    if (!entries[i].value.same_shape(o.entries[i].value)) return false;
  }
  return true;
}

void ParamSet::fill(double v) {
  for (auto& e : entries) e.value.fill(v);
}

bool ParamSet::all_finite() const {
  for (const auto& e : entries) {
    if (!e.value.all_finite()) return false;
  }
  return true;
}

ParamSet zeros_like(const ParamSet& p) {
  ParamSet out = p;
  out.fill(0.0);
  return out;
}

namespace {
void check_same(const ParamSet& a, const ParamSet& b, const char* tag) {
  if (!a.same_architecture(b)) {
    throw ContractError(std::string(tag) + ": parameter sets differ in architecture");
  }
}
}  // namespace

void sgd_step_inplace(ParamSet& params, const ParamSet& grads, double lr) {
  check_same(params, grads, "sgd_step");
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    double* p = params.entries[i].value.data();
    const double* g = grads.entries[i].value.data();
    const std::size_t n = params.entries[i].value.size();
    for (std::size_t k = 0; k < n; ++k) p[k] -= lr * g[k];
  }
}

ParamSet sgd_step(const ParamSet& params, const ParamSet& grads, double lr) {
  ParamSet out = params;
  sgd_step_inplace(out, grads, lr);
  return out;
}

void soft_blend_inplace(ParamSet& target, const ParamSet& online, double kappa) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) {
    throw ContractError("soft_blend: kappa outside [0, 1]");
  }
  check_same(target, online, "soft_blend");
  for (std::size_t i = 0; i < target.entries.size(); ++i) {
    double* t = target.entries[i].value.data();
    const double* o = online.entries[i].value.data();
    const std::size_t n = target.entries[i].value.size();
    for (std::size_t k = 0; k < n; ++k) t[k] = kappa * o[k] + (1.0 - kappa) * t[k];
  }
}

ParamSet soft_blend(const ParamSet& target, const ParamSet& online, double kappa) {
  ParamSet out = target;
  soft_blend_inplace(out, online, kappa);
  return out;
}

void adam_step_inplace(ParamSet& params, const ParamSet& grads, double lr, AdamState& state,
                       double beta1, double beta2, double eps) {
  check_same(params, grads, "adam_step");
  if (state.t == 0) {
    state.m = zeros_like(params);
    state.v = zeros_like(params);
  }
  check_same(state.m, params, "adam_step");
  ++state.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.entries.size(); ++i) {
    double* p = params.entries[i].value.data();
    const double* g = grads.entries[i].value.data();
    double* m = state.m.entries[i].value.data();
    double* v = state.v.entries[i].value.data();
    const std::size_t n = params.entries[i].value.size();
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

void scale_inplace(ParamSet& p, double s) {
  for (auto& e : p.entries) {
    double* d = e.value.data();
    for (std::size_t k = 0; k < e.value.size(); ++k) d[k] *= s;
  }
}

void add_scaled_inplace(ParamSet& p, const ParamSet& g, double s) {
  check_same(p, g, "add_scaled");
  for (std::size_t i = 0; i < p.entries.size(); ++i) {
    double* d = p.entries[i].value.data();
    const double* gd = g.entries[i].value.data();
    for (std::size_t k = 0; k < p.entries[i].value.size(); ++k) d[k] += s * gd[k];
  }
}

std::vector<double> flatten(const ParamSet& p) {
  std::vector<double> out;
  out.reserve(p.scalar_count());
  for (const auto& e : p.entries) {
    out.insert(out.end(), e.value.data(), e.value.data() + e.value.size());
  }
  return out;
}

void unflatten(std::span<const double> flat, ParamSet& p) {
  if (flat.size() != p.scalar_count()) throw ContractError("unflatten: size mismatch");
  std::size_t off = 0;
  for (auto& e : p.entries) {
    std::copy(flat.begin() + off, flat.begin() + off + e.value.size(), e.value.data());
    off += e.value.size();
  }
}

}  // namespace mecsim::numkit
