#include "s2st/model.hpp"

#include <cmath>
#include <limits>

#include "s2st/rng.hpp"

namespace s2st {

void ModelConfig::validate() const {
  if (vocabSize < 2) fail_usage("model vocabulary must hold at least two tokens");
  if (contextLength < 2) fail_usage("context length must be >= 2");
  if (embedDim < 1 || numLayers < 1 || numHeads < 1 || feedforwardDim < 1)
    fail_usage("model dimensions must be positive");
  if (embedDim % numHeads != 0)
    fail_usage("embedDim " + std::to_string(embedDim) + " is not divisible by numHeads " + std::to_string(numHeads));
}

std::int64_t parameter_count(const ModelConfig& c) {
  const std::int64_t V = c.vocabSize, C = c.contextLength, d = c.embedDim, F = c.feedforwardDim, L = c.numLayers;
  const std::int64_t perBlock = 2 * d                // norm 1
                                + 4 * (d * d + d)    // q, k, v, output
                                + 2 * d              // norm 2
                                + (d * F + F)        // feed-forward in
                                + (F * d + d);       // feed-forward out
  return V * d + C * d + L * perBlock + 2 * d + d * V;
}

ParameterLayout ParameterLayout::for_config(const ModelConfig& c) {
  c.validate();
  ParameterLayout layout;
  auto add = [&](std::string name, Eigen::Index rows, Eigen::Index cols) {
    layout.tensors.push_back({std::move(name), layout.total, rows, cols});
    layout.total += rows * cols;
    return layout.tensors.size() - 1;
  };
  const Eigen::Index d = c.embedDim, F = c.feedforwardDim;
  layout.tokenEmbedding = add("token_embedding", c.vocabSize, d);
  layout.positionEmbedding = add("position_embedding", c.contextLength, d);
  static constexpr const char* kSlotNames[] = {"query", "key", "value", "output", "ff_in", "ff_out"};
  for (int b = 0; b < c.numLayers; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    Block blk{};
    blk.norm1Gain = add(p + "norm1.gain", 1, d);
    blk.norm1Bias = add(p + "norm1.bias", 1, d);
    for (int s = 0; s < 4; ++s) {
      blk.weight[static_cast<std::size_t>(s)] = add(p + kSlotNames[s] + ".weight", d, d);
      blk.bias[static_cast<std::size_t>(s)] = add(p + kSlotNames[s] + ".bias", 1, d);
    }
    blk.norm2Gain = add(p + "norm2.gain", 1, d);
    blk.norm2Bias = add(p + "norm2.bias", 1, d);
    blk.weight[4] = add(p + "ff_in.weight", d, F);
    blk.bias[4] = add(p + "ff_in.bias", 1, F);
    blk.weight[5] = add(p + "ff_out.weight", F, d);
    blk.bias[5] = add(p + "ff_out.bias", 1, d);
    layout.blocks.push_back(blk);
  }
  layout.finalNormGain = add("final_norm.gain", 1, d);
  layout.finalNormBias = add("final_norm.bias", 1, d);
  layout.head = add("lm_head.weight", d, c.vocabSize);
  return layout;
}

template <class Scalar>
Transformer<Scalar>::Transformer(const ModelConfig& cfg) : config_(cfg), layout_(ParameterLayout::for_config(cfg)) {
  params_ = Vec::Zero(layout_.total);
  Rng rng(derive_seed(cfg.seed, {0x494e4954}));
  const double residualScale = 1.0 / std::sqrt(2.0 * cfg.numLayers);
  auto fill = [&](std::size_t index, double stddev) {
    auto t = tensor(index);
    for (Eigen::Index j = 0; j < t.cols(); ++j)
      for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = static_cast<Scalar>(normal(rng, stddev));
  };
  constexpr double kStd = 0.02;
  fill(layout_.tokenEmbedding, kStd);
  fill(layout_.positionEmbedding, kStd);
  for (const auto& blk : layout_.blocks) {
    tensor(blk.norm1Gain).setOnes();
    tensor(blk.norm2Gain).setOnes();
    for (int s = 0; s < kLinearSlots; ++s) {
      const bool residual = s == static_cast<int>(LinearSlot::Output) || s == static_cast<int>(LinearSlot::FeedOut);
      fill(blk.weight[static_cast<std::size_t>(s)], residual ? kStd * residualScale : kStd);
    }
  }
  tensor(layout_.finalNormGain).setOnes();
  fill(layout_.head, kStd);
}

template <class Scalar>
Transformer<Scalar>::Transformer(const ModelConfig& cfg, Vec params)
    : config_(cfg), layout_(ParameterLayout::for_config(cfg)), params_(std::move(params)) {
  if (params_.size() != layout_.total)
    fail_data("parameter vector has " + std::to_string(params_.size()) + " entries, config expects " +
              std::to_string(layout_.total));
}

template <class Scalar>
typename Transformer<Scalar>::MapC Transformer<Scalar>::tensor(std::size_t index) const {
  const auto& t = layout_[index];
  return MapC(params_.data() + t.offset, t.rows, t.cols);
}

template <class Scalar>
typename Transformer<Scalar>::MapM Transformer<Scalar>::tensor(std::size_t index) {
  const auto& t = layout_[index];
  return MapM(params_.data() + t.offset, t.rows, t.cols);
}

template <class Scalar>
typename Transformer<Scalar>::MapC Transformer<Scalar>::lora_down(std::size_t block, LinearSlot slot) const {
  const auto s = static_cast<std::size_t>(slot);
  const auto& w = layout_[layout_.blocks[block].weight[s]];
  return MapC(adapter_->params.data() + adapter_->downOffset[block][s], w.rows, adapter_->rank);
}

template <class Scalar>
typename Transformer<Scalar>::MapC Transformer<Scalar>::lora_up(std::size_t block, LinearSlot slot) const {
  const auto s = static_cast<std::size_t>(slot);
  const auto& w = layout_[layout_.blocks[block].weight[s]];
  return MapC(adapter_->params.data() + adapter_->upOffset[block][s], adapter_->rank, w.cols);
}

template <class Scalar>
template <class Other>
Transformer<Other> Transformer<Scalar>::cast() const {
  Transformer<Other> out(config_, params_.template cast<Other>());
  if (adapter_) {
    LoraAdapter<Other> a;
    a.rank = adapter_->rank;
    a.alpha = adapter_->alpha;
    a.params = adapter_->params.template cast<Other>();
    a.downOffset = adapter_->downOffset;
    a.upOffset = adapter_->upOffset;
    out.set_adapter(std::move(a));
  }
  return out;
}

template <class Scalar>
Gradients<Scalar> Gradients<Scalar>::zeros_like(const Transformer<Scalar>& model, bool trainBase) {
  Gradients g;
  g.trainBase = trainBase;
  g.base = Vector<Scalar>::Zero(trainBase ? model.parameters().size() : 0);
  if (model.has_adapter()) g.adapter = Vector<Scalar>::Zero(model.adapter().params.size());
  return g;
}

template <class Scalar>
void Gradients<Scalar>::set_zero() {
  base.setZero();
  adapter.setZero();
}

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

template <class Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const Eigen::Map<const Matrix<Scalar>>& gain,
                          const Eigen::Map<const Matrix<Scalar>>& bias, typename ForwardCache<Scalar>::NormCache& cache) {
  const auto d = static_cast<Scalar>(x.cols());
  Vector<Scalar> mean = x.rowwise().sum() / d;
  cache.normalized = x.colwise() - mean;
  Vector<Scalar> var = cache.normalized.rowwise().squaredNorm() / d;
  cache.rstd = (var.array() + static_cast<Scalar>(kNormEps)).rsqrt();
  cache.normalized = cache.rstd.asDiagonal() * cache.normalized;
  Matrix<Scalar> y = cache.normalized * gain.row(0).asDiagonal();
  y.rowwise() += bias.row(0);
  return y;
}

template <class Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& dy, const typename ForwardCache<Scalar>::NormCache& cache,
                                   const Eigen::Map<const Matrix<Scalar>>& gain, Scalar* dGain, Scalar* dBias) {
  const auto d = static_cast<Scalar>(dy.cols());
  if (dGain != nullptr) {
    Eigen::Map<Matrix<Scalar>> g(dGain, 1, dy.cols());
    Eigen::Map<Matrix<Scalar>> b(dBias, 1, dy.cols());
    g += (dy.array() * cache.normalized.array()).colwise().sum().matrix();
    b += dy.colwise().sum();
  }
  Matrix<Scalar> dxhat = dy * gain.row(0).asDiagonal();
  Vector<Scalar> meanD = dxhat.rowwise().sum() / d;
  Vector<Scalar> meanDX = (dxhat.array() * cache.normalized.array()).rowwise().sum().matrix() / d;
  Matrix<Scalar> dx = dxhat.colwise() - meanD;
  dx -= cache.normalized.cwiseProduct(meanDX.replicate(1, dy.cols()));
  return cache.rstd.asDiagonal() * dx;
}

template <class Scalar>
Matrix<Scalar> apply_linear(const Transformer<Scalar>& m, std::size_t block, LinearSlot slot, const Matrix<Scalar>& in,
                            Matrix<Scalar>* mid) {
  const auto& blk = m.layout().blocks[block];
  const auto s = static_cast<std::size_t>(slot);
  Matrix<Scalar> out = in * m.tensor(blk.weight[s]);
  out.rowwise() += m.tensor(blk.bias[s]).row(0);
  if (m.has_adapter()) {
    Matrix<Scalar> z = in * m.lora_down(block, slot);
    out.noalias() += m.adapter().scale() * (z * m.lora_up(block, slot));
    if (mid != nullptr) *mid = std::move(z);
  }
  return out;
}

template <class Scalar>
Matrix<Scalar> linear_backward(const Transformer<Scalar>& m, Gradients<Scalar>& grads, std::size_t block,
                               LinearSlot slot, const Matrix<Scalar>& in, const Matrix<Scalar>& dOut,
                               const Matrix<Scalar>& mid) {
  const auto& layout = m.layout();
  const auto& blk = layout.blocks[block];
  const auto s = static_cast<std::size_t>(slot);
  if (grads.trainBase) {
    const auto& wt = layout[blk.weight[s]];
    const auto& bt = layout[blk.bias[s]];
    Eigen::Map<Matrix<Scalar>>(grads.base.data() + wt.offset, wt.rows, wt.cols).noalias() += in.transpose() * dOut;
    Eigen::Map<Matrix<Scalar>>(grads.base.data() + bt.offset, 1, bt.cols) += dOut.colwise().sum();
  }
  Matrix<Scalar> dIn = dOut * m.tensor(blk.weight[s]).transpose();
  if (m.has_adapter()) {
    const auto& a = m.adapter();
    auto down = m.lora_down(block, slot);
    auto up = m.lora_up(block, slot);
    Matrix<Scalar> dMid = a.scale() * (dOut * up.transpose());
    Eigen::Map<Matrix<Scalar>>(grads.adapter.data() + a.upOffset[block][s], up.rows(), up.cols()).noalias() +=
        a.scale() * (mid.transpose() * dOut);
    Eigen::Map<Matrix<Scalar>>(grads.adapter.data() + a.downOffset[block][s], down.rows(), down.cols()).noalias() +=
        in.transpose() * dMid;
    dIn.noalias() += dMid * down.transpose();
  }
  return dIn;
}

template <class Scalar>
Scalar* grad_ptr(Gradients<Scalar>& g, const ParameterLayout& layout, std::size_t index) {
  return g.trainBase ? g.base.data() + layout[index].offset : nullptr;
}

}  // namespace

template <class Scalar>
ForwardCache<Scalar> forward(const Transformer<Scalar>& m, std::span<const TokenId> tokens) {
  const auto& cfg = m.config();
  const auto& layout = m.layout();
  if (tokens.empty()) fail_data("forward pass needs at least one token");
  if (static_cast<int>(tokens.size()) > cfg.contextLength)
    fail_data("sequence of length " + std::to_string(tokens.size()) + " exceeds context length " +
              std::to_string(cfg.contextLength));
  for (auto t : tokens)
    if (t < 0 || t >= cfg.vocabSize) fail_data("token id " + std::to_string(t) + " out of range");

  const auto T = static_cast<Eigen::Index>(tokens.size());
  const Eigen::Index d = cfg.embedDim;
  const Eigen::Index hd = cfg.head_dim();
  const auto scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(hd)));

  ForwardCache<Scalar> cache;
  cache.tokens.assign(tokens.begin(), tokens.end());
  cache.blocks.resize(layout.blocks.size());

  Matrix<Scalar> x(T, d);
  const auto tok = m.tensor(layout.tokenEmbedding);
  const auto pos = m.tensor(layout.positionEmbedding);
  for (Eigen::Index t = 0; t < T; ++t) x.row(t) = tok.row(tokens[static_cast<std::size_t>(t)]) + pos.row(t);

  for (std::size_t b = 0; b < layout.blocks.size(); ++b) {
    const auto& blk = layout.blocks[b];
    auto& c = cache.blocks[b];
    auto mid = [&](LinearSlot s) { return &c.loraMid[static_cast<std::size_t>(s)]; };

    c.h1 = layer_norm<Scalar>(x, m.tensor(blk.norm1Gain), m.tensor(blk.norm1Bias), c.norm1);
    c.q = apply_linear(m, b, LinearSlot::Query, c.h1, mid(LinearSlot::Query));
    c.k = apply_linear(m, b, LinearSlot::Key, c.h1, mid(LinearSlot::Key));
    c.v = apply_linear(m, b, LinearSlot::Value, c.h1, mid(LinearSlot::Value));
    apply_rotary(c.q, 0, hd);
    apply_rotary(c.k, 0, hd);
    c.context.resize(T, d);
    c.probs.resize(static_cast<std::size_t>(cfg.numHeads));
    for (int h = 0; h < cfg.numHeads; ++h) {
      Matrix<Scalar> scores = (c.q.middleCols(h * hd, hd) * c.k.middleCols(h * hd, hd).transpose()) * scale;
      auto& p = c.probs[static_cast<std::size_t>(h)];
      p = Matrix<Scalar>::Zero(T, T);
      for (Eigen::Index i = 0; i < T; ++i) {
        auto row = scores.row(i).head(i + 1);
        const Scalar mx = row.maxCoeff();
        auto e = (row.array() - mx).exp();
        p.row(i).head(i + 1) = e / e.sum();
      }
      c.context.middleCols(h * hd, hd).noalias() = p * c.v.middleCols(h * hd, hd);
    }
    x += apply_linear(m, b, LinearSlot::Output, c.context, mid(LinearSlot::Output));

    c.h2 = layer_norm<Scalar>(x, m.tensor(blk.norm2Gain), m.tensor(blk.norm2Bias), c.norm2);
    c.pre = apply_linear(m, b, LinearSlot::FeedIn, c.h2, mid(LinearSlot::FeedIn));
    c.act = c.pre.unaryExpr([](Scalar u) {
      const Scalar t = std::tanh(static_cast<Scalar>(kGeluC) * (u + static_cast<Scalar>(kGeluA) * u * u * u));
      return static_cast<Scalar>(0.5) * u * (static_cast<Scalar>(1) + t);
    });
    x += apply_linear(m, b, LinearSlot::FeedOut, c.act, mid(LinearSlot::FeedOut));
  }

  cache.hidden = layer_norm<Scalar>(x, m.tensor(layout.finalNormGain), m.tensor(layout.finalNormBias), cache.finalNorm);
  cache.logits.noalias() = cache.hidden * m.tensor(layout.head);
  return cache;
}

template <class Scalar>
Matrix<Scalar> forward_logits(const Transformer<Scalar>& model, std::span<const TokenId> tokens) {
  return forward(model, tokens).logits;
}

template <class Scalar>
std::vector<Matrix<Scalar>> forward_logits_batch(const Transformer<Scalar>& model,
                                                 const std::vector<std::vector<TokenId>>& batch) {
  std::vector<Matrix<Scalar>> out;
  out.reserve(batch.size());
  for (const auto& seq : batch) out.push_back(forward_logits(model, std::span<const TokenId>(seq)));
  return out;
}

template <class Scalar>
void backward(const Transformer<Scalar>& m, const ForwardCache<Scalar>& cache, const Matrix<Scalar>& dLogits,
              Gradients<Scalar>& grads) {
  const auto& cfg = m.config();
  const auto& layout = m.layout();
  const Eigen::Index T = cache.logits.rows();
  const Eigen::Index hd = cfg.head_dim();
  const auto scale = static_cast<Scalar>(1.0 / std::sqrt(static_cast<double>(hd)));
  if (grads.trainBase && grads.base.size() != layout.total) fail_runtime("gradient buffer does not match model");
  if (m.has_adapter() && grads.adapter.size() != m.adapter().params.size())
    fail_runtime("adapter gradient buffer does not match adapter");

  if (grads.trainBase) {
    const auto& ht = layout[layout.head];
    Eigen::Map<Matrix<Scalar>>(grads.base.data() + ht.offset, ht.rows, ht.cols).noalias() +=
        cache.hidden.transpose() * dLogits;
  }
  Matrix<Scalar> dHidden = dLogits * m.tensor(layout.head).transpose();
  Matrix<Scalar> dx = layer_norm_backward<Scalar>(dHidden, cache.finalNorm, m.tensor(layout.finalNormGain),
                                                  grad_ptr(grads, layout, layout.finalNormGain),
                                                  grad_ptr(grads, layout, layout.finalNormBias));

  for (std::size_t bi = layout.blocks.size(); bi-- > 0;) {
    const auto& blk = layout.blocks[bi];
    const auto& c = cache.blocks[bi];
    auto mid = [&](LinearSlot s) -> const Matrix<Scalar>& { return c.loraMid[static_cast<std::size_t>(s)]; };

    Matrix<Scalar> dAct = linear_backward(m, grads, bi, LinearSlot::FeedOut, c.act, dx, mid(LinearSlot::FeedOut));
    Matrix<Scalar> dPre = dAct.binaryExpr(c.pre, [](Scalar g, Scalar u) {
      const Scalar inner = static_cast<Scalar>(kGeluC) * (u + static_cast<Scalar>(kGeluA) * u * u * u);
      const Scalar t = std::tanh(inner);
      const Scalar dInner = static_cast<Scalar>(kGeluC) * (static_cast<Scalar>(1) + static_cast<Scalar>(3 * kGeluA) * u * u);
      return g * (static_cast<Scalar>(0.5) * (static_cast<Scalar>(1) + t) +
                  static_cast<Scalar>(0.5) * u * (static_cast<Scalar>(1) - t * t) * dInner);
    });
    Matrix<Scalar> dH2 = linear_backward(m, grads, bi, LinearSlot::FeedIn, c.h2, dPre, mid(LinearSlot::FeedIn));
    dx += layer_norm_backward<Scalar>(dH2, c.norm2, m.tensor(blk.norm2Gain), grad_ptr(grads, layout, blk.norm2Gain),
                                      grad_ptr(grads, layout, blk.norm2Bias));

    Matrix<Scalar> dContext = linear_backward(m, grads, bi, LinearSlot::Output, c.context, dx, mid(LinearSlot::Output));
    Matrix<Scalar> dq = Matrix<Scalar>::Zero(T, cfg.embedDim);
    Matrix<Scalar> dk = Matrix<Scalar>::Zero(T, cfg.embedDim);
    Matrix<Scalar> dv = Matrix<Scalar>::Zero(T, cfg.embedDim);
    for (int h = 0; h < cfg.numHeads; ++h) {
      const auto& p = c.probs[static_cast<std::size_t>(h)];
      const auto dC = dContext.middleCols(h * hd, hd);
      Matrix<Scalar> dP = dC * c.v.middleCols(h * hd, hd).transpose();
      dv.middleCols(h * hd, hd).noalias() = p.transpose() * dC;
      Vector<Scalar> rowDot = (dP.array() * p.array()).rowwise().sum().matrix();
      Matrix<Scalar> dS = p.cwiseProduct(dP.colwise() - rowDot) * scale;
      dq.middleCols(h * hd, hd).noalias() = dS * c.k.middleCols(h * hd, hd);
      dk.middleCols(h * hd, hd).noalias() = dS.transpose() * c.q.middleCols(h * hd, hd);
    }
    apply_rotary(dq, 0, hd, true);
    apply_rotary(dk, 0, hd, true);
    Matrix<Scalar> dH1 = linear_backward(m, grads, bi, LinearSlot::Query, c.h1, dq, mid(LinearSlot::Query));
    dH1 += linear_backward(m, grads, bi, LinearSlot::Key, c.h1, dk, mid(LinearSlot::Key));
    dH1 += linear_backward(m, grads, bi, LinearSlot::Value, c.h1, dv, mid(LinearSlot::Value));
    dx += layer_norm_backward<Scalar>(dH1, c.norm1, m.tensor(blk.norm1Gain), grad_ptr(grads, layout, blk.norm1Gain),
                                      grad_ptr(grads, layout, blk.norm1Bias));
  }

  if (grads.trainBase) {
    const auto& tt = layout[layout.tokenEmbedding];
    const auto& pt = layout[layout.positionEmbedding];
    Eigen::Map<Matrix<Scalar>> dTok(grads.base.data() + tt.offset, tt.rows, tt.cols);
    Eigen::Map<Matrix<Scalar>> dPos(grads.base.data() + pt.offset, pt.rows, pt.cols);
    for (Eigen::Index t = 0; t < T; ++t) {
      dTok.row(cache.tokens[static_cast<std::size_t>(t)]) += dx.row(t);
      dPos.row(t) += dx.row(t);
    }
  }
}

template <class Scalar>
Matrix<Scalar> log_softmax_rows(const Matrix<Scalar>& logits) {
  Matrix<Scalar> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Scalar mx = logits.row(i).maxCoeff();
    const Scalar lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

template class Transformer<float>;
template class Transformer<double>;
template Transformer<double> Transformer<float>::cast<double>() const;
template Transformer<float> Transformer<double>::cast<float>() const;
template Transformer<float> Transformer<float>::cast<float>() const;
template Transformer<double> Transformer<double>::cast<double>() const;
template struct Gradients<float>;
template struct Gradients<double>;

#define S2ST_INSTANTIATE(S)                                                                                   \
  template ForwardCache<S> forward(const Transformer<S>&, std::span<const TokenId>);                           \
  template Matrix<S> forward_logits(const Transformer<S>&, std::span<const TokenId>);                          \
  template std::vector<Matrix<S>> forward_logits_batch(const Transformer<S>&,                                 \
                                                       const std::vector<std::vector<TokenId>>&);             \
  template void backward(const Transformer<S>&, const ForwardCache<S>&, const Matrix<S>&, Gradients<S>&);     \
  template Matrix<S> log_softmax_rows(const Matrix<S>&);

S2ST_INSTANTIATE(float)
S2ST_INSTANTIATE(double)
#undef S2ST_INSTANTIATE

}  // namespace s2st
