#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mcdrop/error.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

inline void validate_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw InvalidRate(rate);
}

// Where inference-time dropout is applied. The embedding output always
// receives dropout; additionally the outputs of the earliest
// ceil(depth_fraction * n_layers) transformer layers do, unless
// `explicit_layers` names the layers directly. Scaling is always inverted:
// kept activations are multiplied by 1 / (1 - rate).
struct InjectionPlan {
  double rate = 0.0;
  double depth_fraction = 0.0;
  std::optional<std::vector<std::size_t>> explicit_layers;

  void validate() const {
    validate_rate(rate);
    if (!(depth_fraction >= 0.0 && depth_fraction <= 1.0))
      throw ConfigError("depth_fraction must lie in [0, 1]");
  }

  // Number of leading layers covered by depth_fraction. The ceiling is taken
  // with a 1e-9 slack so 0.2 * 5 gives 1, not 2.
  static std::size_t leading_layer_count(double depth_fraction, std::size_t n_layers) {
    const double raw = depth_fraction * static_cast<double>(n_layers);
    const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return count > n_layers ? n_layers : count;
  }

  // Transformer layers (ascending) whose output receives dropout.
  std::vector<std::size_t> layer_sites(std::size_t n_layers) const {
    if (explicit_layers) {
      for (std::size_t l : *explicit_layers)
        if (l >= n_layers)
          throw InvalidInjectionSite("injection layer " + std::to_string(l) +
                                     " does not exist in a " + std::to_string(n_layers) +
                                     "-layer model");
      std::vector<std::size_t> out = *explicit_layers;
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    }
    std::vector<std::size_t> out(leading_layer_count(depth_fraction, n_layers));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }
};

// Inverted dropout in place. One generator draw per element, consumed in
// storage order (row-major for Matrix). Rate 0 leaves x untouched and
// draws nothing.
inline void apply_dropout_inplace(std::span<double> x, double rate, Rng& rng) {
  validate_rate(rate);
  if (rate == 0.0) return;
  const double scale = 1.0 / (1.0 - rate);
  for (double& v : x) v = rng.uniform() < rate ? 0.0 : v * scale;
}

inline void apply_dropout_inplace(Matrix& x, double rate, Rng& rng) {
  apply_dropout_inplace(std::span<double>(x.data(), static_cast<std::size_t>(x.size())), rate, rng);
}

inline Matrix apply_dropout(Matrix x, double rate, Rng& rng) {
  apply_dropout_inplace(x, rate, rng);
  return x;
}

inline std::vector<double> apply_dropout(std::vector<double> x, double rate, Rng& rng) {
  apply_dropout_inplace(std::span<double>(x), rate, rng);
  return x;
}

}  // namespace mcdrop
