#pragma once

#include <cstdint>
#include <random>

#include "synkbqa/numcore/tensor.hpp"

namespace synkbqa::num {

using Rng = std::mt19937_64;

/// Uniform entries in +-sqrt(6 / (fan_in + fan_out)). For a matrix
/// [rows, cols] fan_out = rows and fan_in = cols; a vector [n] counts as
/// [1, n]. Throws on an empty shape or a zero dimension.
Tensor xavier_uniform(const Shape& shape, Rng& rng);
Tensor xavier_uniform(const Shape& shape, std::uint64_t seed);

/// Inverted dropout: in training mode each entry is zeroed with probability
/// `rate` and survivors are scaled by 1/(1-rate). Evaluation mode (or rate 0)
/// returns the input unchanged. Requires 0 <= rate < 1.
Tensor dropout(const Tensor& x, double rate, Rng& rng, bool training);

/// The multiplicative mask used by dropout (entries 0 or 1/(1-rate)).
std::vector<double> dropout_mask(std::size_t n, double rate, Rng& rng);

}  // namespace synkbqa::num
