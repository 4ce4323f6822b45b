#include "s2st/objectives.hpp"

#include <cmath>

namespace s2st {

namespace {

template <class Scalar>
std::vector<TokenId> joined(std::span<const TokenId> prompt, std::span<const TokenId> completion) {
  std::vector<TokenId> all(prompt.begin(), prompt.end());
  all.insert(all.end(), completion.begin(), completion.end());
  return all;
}

void check_completion(std::span<const TokenId> prompt, std::span<const TokenId> completion) {
  if (prompt.empty()) fail_data("sequence log-probability needs a non-empty prompt");
  if (completion.empty()) fail_data("sequence log-probability of an empty completion is undefined");
}

/// Softmax minus one-hot on target rows, scaled by coefficient; the gradient of NLL w.r.t. logits.
template <class Scalar>
Scalar nll_rows(const Matrix<Scalar>& logits, const std::vector<TokenId>& tokens, Eigen::Index firstTarget,
                const std::vector<std::uint8_t>* mask, Matrix<Scalar>* dLogits, Scalar coefficient) {
  // Row r predicts token r + 1.
  Scalar total = 0;
  const auto T = static_cast<Eigen::Index>(tokens.size());
  for (Eigen::Index t = firstTarget; t < T; ++t) {
    if (mask != nullptr && !(*mask)[static_cast<std::size_t>(t)]) continue;
    const Eigen::Index r = t - 1;
    const Scalar mx = logits.row(r).maxCoeff();
    const auto e = (logits.row(r).array() - mx).exp();
    const Scalar sum = e.sum();
    const TokenId target = tokens[static_cast<std::size_t>(t)];
    total += -(logits(r, target) - mx - std::log(sum));
    if (dLogits != nullptr) {
      dLogits->row(r) += coefficient * (e / sum).matrix();
      (*dLogits)(r, target) -= coefficient;
    }
  }
  return total;
}

}  // namespace

template <class Scalar>
Scalar sequence_logprob(const Transformer<Scalar>& model, std::span<const TokenId> prompt,
                        std::span<const TokenId> completion) {
  check_completion(prompt, completion);
  const auto all = joined<Scalar>(prompt, completion);
  const auto logits = forward_logits(model, std::span<const TokenId>(all.data(), all.size() - 1));
  return -nll_rows<Scalar>(logits, all, static_cast<Eigen::Index>(prompt.size()), nullptr, nullptr, 0);
}

template <class Scalar>
Scalar accumulate_logprob_gradient(const Transformer<Scalar>& model, std::span<const TokenId> prompt,
                                   std::span<const TokenId> completion, Scalar weight, Gradients<Scalar>& grads) {
  check_completion(prompt, completion);
  const auto all = joined<Scalar>(prompt, completion);
  const auto cache = forward(model, std::span<const TokenId>(all.data(), all.size() - 1));
  Matrix<Scalar> dLogits = Matrix<Scalar>::Zero(cache.logits.rows(), cache.logits.cols());
  // d(logprob) = -d(NLL)
  const Scalar nll = nll_rows<Scalar>(cache.logits, all, static_cast<Eigen::Index>(prompt.size()), nullptr, &dLogits,
                                      -weight);
  backward(model, cache, dLogits, grads);
  return -nll;
}

template <class Scalar>
CrossEntropySum masked_cross_entropy(const Transformer<Scalar>& model, const MaskedSequence& seq,
                                     Gradients<Scalar>* grads, Scalar weight) {
  if (seq.tokens.size() < 2 || seq.lossMask.size() != seq.tokens.size())
    fail_data("masked sequence needs >= 2 tokens and a mask of equal length");
  CrossEntropySum out;
  for (std::size_t t = 1; t < seq.tokens.size(); ++t) out.targets += seq.lossMask[t] ? 1 : 0;
  if (out.targets == 0) return out;
  const auto cache = forward(model, std::span<const TokenId>(seq.tokens.data(), seq.tokens.size() - 1));
  if (grads == nullptr) {
    out.nll = static_cast<double>(nll_rows<Scalar>(cache.logits, seq.tokens, 1, &seq.lossMask, nullptr, 0));
    return out;
  }
  Matrix<Scalar> dLogits = Matrix<Scalar>::Zero(cache.logits.rows(), cache.logits.cols());
  out.nll = static_cast<double>(nll_rows<Scalar>(cache.logits, seq.tokens, 1, &seq.lossMask, &dLogits, weight));
  backward(model, cache, dLogits, *grads);
  return out;
}

template <class Scalar>
double mean_masked_cross_entropy(const Transformer<Scalar>& model, std::span<const MaskedSequence> batch) {
  double nll = 0.0;
  long count = 0;
  for (const auto& seq : batch) {
    const auto s = masked_cross_entropy<Scalar>(model, seq);
    nll += s.nll;
    count += s.targets;
  }
  if (count == 0) fail_data("batch has no unmasked target tokens");
  return nll / static_cast<double>(count);
}

template <class Scalar>
double train_step_ce(Transformer<Scalar>& model, Adam<Scalar>& optimizer, std::span<const MaskedSequence> batch,
                     double learningRate) {
  long count = 0;
  for (const auto& seq : batch)
    for (std::size_t t = 1; t < seq.lossMask.size(); ++t) count += seq.lossMask[t] ? 1 : 0;
  if (count == 0) fail_data("every token of the batch is masked out");
  auto grads = Gradients<Scalar>::zeros_like(model, true);
  const auto weight = static_cast<Scalar>(1.0 / static_cast<double>(count));
  double nll = 0.0;
  for (const auto& seq : batch) nll += masked_cross_entropy<Scalar>(model, seq, &grads, weight).nll;
  optimizer.step(model.parameters(), grads.base, learningRate);
  return nll / static_cast<double>(count);
}

#define S2ST_INSTANTIATE(S)                                                                                     \
  template S sequence_logprob(const Transformer<S>&, std::span<const TokenId>, std::span<const TokenId>);       \
  template S accumulate_logprob_gradient(const Transformer<S>&, std::span<const TokenId>,                       \
                                         std::span<const TokenId>, S, Gradients<S>&);                           \
  template CrossEntropySum masked_cross_entropy(const Transformer<S>&, const MaskedSequence&, Gradients<S>*, S); \
  template double mean_masked_cross_entropy(const Transformer<S>&, std::span<const MaskedSequence>);            \
  template double train_step_ce(Transformer<S>&, Adam<S>&, std::span<const MaskedSequence>, double);

S2ST_INSTANTIATE(float)
S2ST_INSTANTIATE(double)
#undef S2ST_INSTANTIATE

}  // namespace s2st
