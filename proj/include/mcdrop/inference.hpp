#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "mcdrop/dropout.hpp"
#include "mcdrop/error.hpp"
#include "mcdrop/model.hpp"
#include "mcdrop/parallel.hpp"
#include "mcdrop/rng.hpp"

namespace mcdrop {

inline constexpr double kDefaultDropoutRate = 0.1;
inline constexpr std::size_t kDefaultMcSamples = 100;

struct MCConfig {
  std::size_t n_samples = kDefaultMcSamples;
  std::uint64_t base_seed = 0;

  void validate() const {
    if (n_samples == 0) throw ConfigError("n_samples must be at least 1");
  }
};

// Sum of every entry.
inline double score(const LogProbMatrix& L) {
  const double* data = L.values.data();
  const auto n = static_cast<std::size_t>(L.values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(data[i])) throw NonFiniteInput("log-probability matrix has a non-finite entry");
    total += data[i];
  }
  return total;
}

// One stochastic pass with generator seeded from child_seed(base_seed, k).
inline LogProbMatrix mc_sample(const Parameters& params, const TokenSequence& tokens,
                               const InjectionPlan& plan, std::uint64_t base_seed, std::size_t k) {
  Rng rng(child_seed(base_seed, k));
  return forward(params, tokens, plan, rng);
}

// Element-wise mean of n_samples log-probability matrices. Samples may run on
// up to `threads` workers; the reduction always adds sample 0, 1, ..., N-1 in
// that order, so the result does not depend on the thread count. A zero
// rate short-circuits to the single deterministic pass.
inline LogProbMatrix mc_average_logprobs(const Parameters& params, const TokenSequence& tokens,
                                         const InjectionPlan& plan, const MCConfig& mc,
                                         std::size_t threads = 1) {
  plan.validate();
  mc.validate();
  if (plan.rate == 0.0) {
    plan.layer_sites(params.config.n_layers);
    return forward(params, tokens);
  }

  const std::size_t n = mc.n_samples;
  Matrix sum;
  if (threads <= 1) {
    for (std::size_t k = 0; k < n; ++k) {
      LogProbMatrix s = mc_sample(params, tokens, plan, mc.base_seed, k);
      if (k == 0)
        sum = std::move(s.values);
      else
        sum += s.values;
    }
  } else {
    std::vector<Matrix> samples(n);
    parallel_for(n, threads, [&](std::size_t k) {
      samples[k] = mc_sample(params, tokens, plan, mc.base_seed, k).values;
    });
    sum = std::move(samples[0]);
    for (std::size_t k = 1; k < n; ++k) sum += samples[k];
  }
  sum /= static_cast<double>(n);
  return {std::move(sum)};
}

// score(mc_average_logprobs(...)).
inline double score_sequence(const Parameters& params, const TokenSequence& tokens,
                             const InjectionPlan& plan, const MCConfig& mc, std::size_t threads = 1) {
  return score(mc_average_logprobs(params, tokens, plan, mc, threads));
}

// Classical deterministic proxy: score of a single dropout-free pass.
inline double score_deterministic(const Parameters& params, const TokenSequence& tokens) {
  return score(forward(params, tokens));
}

// Per-sample scores score(f_d(s)) for k = 0..N-1, for variance estimates.
// Their mean equals score_sequence up to rounding because the score is linear.
inline std::vector<double> mc_sample_scores(const Parameters& params, const TokenSequence& tokens,
                                            const InjectionPlan& plan, const MCConfig& mc,
                                            std::size_t threads = 1) {
  plan.validate();
  mc.validate();
  std::vector<double> out(mc.n_samples);
  parallel_for(mc.n_samples, threads, [&](std::size_t k) {
    out[k] = score(mc_sample(params, tokens, plan, mc.base_seed, k));
  });
  return out;
}

}  // namespace mcdrop
