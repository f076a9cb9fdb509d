#include "mecsim/numkit/rng.hpp"

#include <cmath>
#include <numbers>

#include "mecsim/errors.hpp"

namespace mecsim::numkit {

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw ContractError("Rng::uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi) - lo + 1;
  // Lemire's multiply-shift; bias is 2^-64 per draw.
  const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * span;
  return lo + static_cast<int>(m >> 64);
}

double Rng::gaussian(double mean, double var) {
  if (var < 0.0) throw ContractError("Rng::gaussian: negative variance");
  double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
  double u2 = uniform01();
  const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  return mean + std::sqrt(var) * z;
}

std::vector<double> Rng::gaussian_vec(double mean, double var, int n) {
  std::vector<double> out(static_cast<std::size_t>(n));
  for (double& v : out) v = gaussian(mean, var);
  return out;
}

}  // namespace mecsim::numkit
