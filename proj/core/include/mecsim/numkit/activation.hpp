#pragma once

#include <cmath>
#include <string>

namespace mecsim::numkit {

enum class Act { identity, relu, tanh, sigmoid, leaky_relu };

inline constexpr double kLeakySlope = 0.01;

inline double act_apply(Act a, double x) {
  switch (a) {
    case Act::identity: return x;
    case Act::relu: return x > 0.0 ? x : 0.0;
    case Act::tanh: return std::tanh(x);
    case Act::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Act::leaky_relu: return x > 0.0 ? x : kLeakySlope * x;
  }
  return x;
}

/// Derivative dy/dx given pre-activation x and output y.
inline double act_grad(Act a, double x, double y) {
  switch (a) {
    case Act::identity: return 1.0;
    case Act::relu: return x > 0.0 ? 1.0 : 0.0;
    case Act::tanh: return 1.0 - y * y;
    case Act::sigmoid: return y * (1.0 - y);
    case Act::leaky_relu: return x > 0.0 ? 1.0 : kLeakySlope;
  }
  return 1.0;
}

Act act_from_string(const std::string& s);
std::string act_to_string(Act a);

}  // namespace mecsim::numkit
