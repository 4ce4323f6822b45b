#include "s2st/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "s2st/lora.hpp"
#include "s2st/rng.hpp"

namespace s2st {

namespace {

template <class Scalar>
using Row = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

template <class Scalar>
Row<Scalar> norm_row(const Row<Scalar>& x, const Eigen::Map<const Matrix<Scalar>>& gain,
                     const Eigen::Map<const Matrix<Scalar>>& bias) {
  const auto d = static_cast<Scalar>(x.size());
  const Scalar mean = x.sum() / d;
  Row<Scalar> centered = x.array() - mean;
  const Scalar rstd = static_cast<Scalar>(1) / std::sqrt(centered.squaredNorm() / d + static_cast<Scalar>(1e-5));
  return (centered * rstd).cwiseProduct(gain.row(0)) + bias.row(0);
}

template <class Scalar>
Row<Scalar> linear_row(const Transformer<Scalar>& m, std::size_t block, LinearSlot slot, const Row<Scalar>& in) {
  const auto& blk = m.layout().blocks[block];
  const auto s = static_cast<std::size_t>(slot);
  Row<Scalar> out = in * m.tensor(blk.weight[s]);
  out += m.tensor(blk.bias[s]).row(0);
  return out;
}

}  // namespace

template <class Scalar>
IncrementalDecoder<Scalar>::IncrementalDecoder(const Transformer<Scalar>& model) : model_(&model) {
  if (model.has_adapter()) {
    merged_ = merge_lora(model);
    model_ = &*merged_;
  }
  const auto& cfg = model_->config();
  keys_.assign(static_cast<std::size_t>(cfg.numLayers), Matrix<Scalar>(cfg.contextLength, cfg.embedDim));
  values_.assign(static_cast<std::size_t>(cfg.numLayers), Matrix<Scalar>(cfg.contextLength, cfg.embedDim));
}

template <class Scalar>
Vector<Scalar> IncrementalDecoder<Scalar>::push(TokenId token) {
  const auto& m = *model_;
  const auto& cfg = m.config();
  const auto& layout = m.layout();
  if (length_ >= cfg.contextLength) fail_data("decoder context is full");
  if (token < 0 || token >= cfg.vocabSize) fail_data("token id " + std::to_string(token) + " out of range");
  const Eigen::Index hd = cfg.head_dim();
  const auto scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(hd)));
  const Eigen::Index t = length_;

  Row<Scalar> x = m.tensor(layout.tokenEmbedding).row(token) + m.tensor(layout.positionEmbedding).row(t);
  for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
    const auto& blk = layout.blocks[b];
    const Row<Scalar> h = norm_row<Scalar>(x, m.tensor(blk.norm1Gain), m.tensor(blk.norm1Bias));
    Row<Scalar> q = linear_row(m, b, LinearSlot::Query, h);
    Row<Scalar> k = linear_row(m, b, LinearSlot::Key, h);
    apply_rotary(q, t, hd);
    apply_rotary(k, t, hd);
    keys_[b].row(t) = k;
    values_[b].row(t) = linear_row(m, b, LinearSlot::Value, h);
    Row<Scalar> context(cfg.embedDim);
    for (int head = 0; head < cfg.numHeads; ++head) {
      const auto K = keys_[b].block(0, head * hd, t + 1, hd);
      const auto V = values_[b].block(0, head * hd, t + 1, hd);
      Vector<Scalar> scores = (K * q.segment(head * hd, hd).transpose()) * scale;
      const Scalar mx = scores.maxCoeff();
      Vector<Scalar> p = (scores.array() - mx).exp();
      p /= p.sum();
      context.segment(head * hd, hd) = p.transpose() * V;
    }
    x += linear_row(m, b, LinearSlot::Output, context);
    const Row<Scalar> h2 = norm_row<Scalar>(x, m.tensor(blk.norm2Gain), m.tensor(blk.norm2Bias));
    Row<Scalar> u = linear_row(m, b, LinearSlot::FeedIn, h2);
    u = u.unaryExpr([](Scalar v) {
      const Scalar th = std::tanh(static_cast<Scalar>(0.7978845608028654) * (v + static_cast<Scalar>(0.044715) * v * v * v));
      return static_cast<Scalar>(0.5) * v * (static_cast<Scalar>(1) + th);
    });
    x += linear_row(m, b, LinearSlot::FeedOut, u);
  }
  const Row<Scalar> hf = norm_row<Scalar>(x, m.tensor(layout.finalNormGain), m.tensor(layout.finalNormBias));
  ++length_;
  return (hf * m.tensor(layout.head)).transpose();
}

template <class Scalar>
DecodeResult sample(const Transformer<Scalar>& model, std::span<const TokenId> prompt, const DecodeConfig& cfg) {
  if (prompt.empty()) fail_data("decoding needs a non-empty prompt");
  const int context = model.config().contextLength;
  if (static_cast<int>(prompt.size()) > context) fail_data("prompt does not fit the model context");
  IncrementalDecoder<Scalar> decoder(model);
  Vector<Scalar> logits;
  for (auto t : prompt) logits = decoder.push(t);

  Rng rng(cfg.seed);
  DecodeResult result;
  std::vector<int> order(static_cast<std::size_t>(logits.size()));
  for (int step = 0;; ++step) {
    if (step >= cfg.maxNewTokens) {
      result.truncated = true;
      break;
    }
    TokenId next = 0;
    if (cfg.greedy || cfg.temperature <= 0.0) {
      logits.maxCoeff(&next);  // first maximum wins
    } else {
      std::iota(order.begin(), order.end(), 0);
      const auto k = static_cast<std::size_t>(std::clamp<int>(cfg.topK <= 0 ? static_cast<int>(order.size()) : cfg.topK,
                                                              1, static_cast<int>(order.size())));
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                        [&](int a, int b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
      std::vector<double> weights(k);
      const double top = static_cast<double>(logits[order[0]]) / cfg.temperature;
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        weights[i] = std::exp(static_cast<double>(logits[order[i]]) / cfg.temperature - top);
        total += weights[i];
      }
      double r = uniform_real(rng) * total;
      next = order[k - 1];
      for (std::size_t i = 0; i < k; ++i) {
        if (r < weights[i]) {
          next = order[i];
          break;
        }
        r -= weights[i];
      }
    }
    result.tokens.push_back(next);
    if (std::find(cfg.stopTokens.begin(), cfg.stopTokens.end(), next) != cfg.stopTokens.end()) break;
    if (decoder.length() >= context) {
      result.truncated = true;
      break;
    }
    logits = decoder.push(next);
  }
  return result;
}

template class IncrementalDecoder<float>;
template class IncrementalDecoder<double>;
template DecodeResult sample(const Transformer<float>&, std::span<const TokenId>, const DecodeConfig&);
template DecodeResult sample(const Transformer<double>&, std::span<const TokenId>, const DecodeConfig&);

}  // namespace s2st
