#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "s2st/model.hpp"
#include "s2st/optim.hpp"

namespace s2st {

/// Token sequence with per-token loss flags; flag t marks token t as a prediction target.
struct MaskedSequence {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> lossMask;
};

/// log p(completion | prompt): the sum of next-token log-probabilities of the completion tokens.
template <class Scalar>
Scalar sequence_logprob(const Transformer<Scalar>& model, std::span<const TokenId> prompt,
                        std::span<const TokenId> completion);

/// Same value, and adds weight * d(logprob)/d(parameters) to grads.
template <class Scalar>
Scalar accumulate_logprob_gradient(const Transformer<Scalar>& model, std::span<const TokenId> prompt,
                                   std::span<const TokenId> completion, Scalar weight, Gradients<Scalar>& grads);

struct CrossEntropySum {
  double nll = 0.0;
  long targets = 0;
};

/// Summed negative log-likelihood over masked targets. With grads, adds weight * d(sum)/d(parameters).
template <class Scalar>
CrossEntropySum masked_cross_entropy(const Transformer<Scalar>& model, const MaskedSequence& seq,
                                     Gradients<Scalar>* grads = nullptr, Scalar weight = 1);

/// Mean masked cross-entropy over every target token of the batch.
template <class Scalar>
double mean_masked_cross_entropy(const Transformer<Scalar>& model, std::span<const MaskedSequence> batch);

/// One Adam step on the mean masked cross-entropy of the batch; returns the pre-step loss.
template <class Scalar>
double train_step_ce(Transformer<Scalar>& model, Adam<Scalar>& optimizer, std::span<const MaskedSequence> batch,
                     double learningRate);

}  // namespace s2st
