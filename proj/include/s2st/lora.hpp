#pragma once

#include <cstdint>

#include "s2st/model.hpp"

namespace s2st {

/// Zero-filled adapter with factor offsets laid out for `layout`.
template <class Scalar>
LoraAdapter<Scalar> zero_adapter(const ParameterLayout& layout, int rank, double alpha);

/// Attaches a fresh adapter to every block linear map (the LM head is left out).
/// Down factors are Gaussian, up factors start at zero so outputs are unchanged.
template <class Scalar>
void apply_lora(Transformer<Scalar>& model, int rank, double alpha, std::uint64_t seed);

/// scale * down * up for one target, shaped like the base weight.
template <class Scalar>
Matrix<Scalar> lora_delta(const Transformer<Scalar>& model, std::size_t block, LinearSlot slot);

/// Folds the adapter into the base weights and returns a plain model.
template <class Scalar>
Transformer<Scalar> merge_lora(const Transformer<Scalar>& model);

}  // namespace s2st
