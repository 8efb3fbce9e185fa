#include "dgwm/rng.hpp"

#include <cmath>
#include <numbers>

#include "dgwm/errors.hpp"

namespace dgwm {

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  // u1 in (0, 1] keeps the log finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int Rng::uniform_int(int n) {
  if (n <= 0) throw ParameterError("uniform_int: n must be positive");
  return static_cast<int>(uniform() * n);
}

std::vector<double> Rng::gaussian(std::size_t n, double variance) {
  if (variance < 0.0) throw ParameterError("gaussian: negative variance");
  std::vector<double> out(n, 0.0);
  if (variance == 0.0) return out;
  const double sd = std::sqrt(variance);
  for (std::size_t i = 0; i < n; ++i) out[i] = sd * normal();
  return out;
}

std::vector<int> Rng::sample_indices(int n, int k) {
  if (n <= 0) throw ParameterError("sample_indices: empty pool");
  std::vector<int> out(k);
  if (k > n) {
    for (int i = 0; i < k; ++i) out[i] = uniform_int(n);
    return out;
  }
  // Partial Fisher-Yates over [0, n).
  std::vector<int> pool(n);
  for (int i = 0; i < n; ++i) pool[i] = i;
  for (int i = 0; i < k; ++i) {
    const int j = i + uniform_int(n - i);
    std::swap(pool[i], pool[j]);
    out[i] = pool[i];
  }
  return out;
}

}  // namespace dgwm
