#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "emcom/autodiff.hpp"
#include "emcom/rng.hpp"

namespace emcom {

/// Noise source for Gumbel sampling; `zero` turns the sampler into a
/// deterministic tempered softmax (used by tests).
enum class GumbelNoise { sampled, zero };

struct GumbelSample {
  ad::Var output;                  // relaxed (or straight-through hard) one-hots
  std::vector<std::size_t> index;  // argmax per row
};

inline double gumbel_noise(Rng& rng) { return -std::log(-std::log(rng.uniform())); }

inline std::size_t argmax_row(const Tensor& t, std::size_t row) {
  const std::size_t n = t.cols();
  std::size_t best = 0;
  for (std::size_t j = 1; j < n; ++j) {
    if (t[row * n + j] > t[row * n + best]) best = j;
  }
  return best;
}

/// Gumbel-softmax relaxation of categorical sampling, row-wise over
/// logits [B, V]. With `hard`, the forward value is the one-hot of the
/// sampled index while gradients follow the soft sample.
inline GumbelSample gumbel_softmax_sample(const ad::Var& logits,
                                          double temperature, bool hard,
                                          Rng& rng,
                                          GumbelNoise noise = GumbelNoise::sampled) {
  if (!(temperature > 0.0)) {
    throw std::invalid_argument("gumbel_softmax: temperature must be positive");
  }
  ad::Tape& tape = logits.tape();
  Tensor g(logits.shape());
  if (noise == GumbelNoise::sampled) {
    for (double& v : g.values()) v = gumbel_noise(rng);
  }
  ad::Var perturbed = ad::add(logits, tape.constant(std::move(g)));
  ad::Var soft = ad::softmax(ad::scale(perturbed, 1.0 / temperature));

  const Tensor& sv = soft.value();
  const std::size_t rows = sv.rows(), cols = sv.cols();
  GumbelSample out;
  out.index.resize(rows);
  for (std::size_t i = 0; i < rows; ++i) out.index[i] = argmax_row(perturbed.value(), i);
  if (!hard) {
    out.output = soft;
    return out;
  }
  Tensor one_hot(sv.shape());
  for (std::size_t i = 0; i < rows; ++i) one_hot[i * cols + out.index[i]] = 1.0;
  out.output = ad::straight_through(soft, std::move(one_hot));
  return out;
}

}  // namespace emcom
