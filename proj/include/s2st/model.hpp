#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s2st/types.hpp"

namespace s2st {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct ModelConfig {
  int vocabSize = 0;
  int contextLength = 256;
  int embedDim = 128;
  int numLayers = 4;
  int numHeads = 4;
  int feedforwardDim = 512;
  std::uint64_t seed = 0;

  void validate() const;
  int head_dim() const { return embedDim / numHeads; }
  bool operator==(const ModelConfig&) const = default;
};

/// Closed-form parameter count of the decoder for `cfg`.
std::int64_t parameter_count(const ModelConfig& cfg);

/// The linear maps inside one decoder block, in storage order. All of them are LoRA targets.
enum class LinearSlot : int { Query = 0, Key, Value, Output, FeedIn, FeedOut };
inline constexpr int kLinearSlots = 6;

/// Offsets of every tensor inside the flat parameter vector.
struct ParameterLayout {
  struct Tensor {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::Index size() const { return rows * cols; }
  };
  struct Block {
    std::size_t norm1Gain, norm1Bias, norm2Gain, norm2Bias;
    std::array<std::size_t, kLinearSlots> weight;  // in x out
    std::array<std::size_t, kLinearSlots> bias;    // 1 x out
  };

  std::vector<Tensor> tensors;
  std::size_t tokenEmbedding = 0;
  std::size_t positionEmbedding = 0;
  std::vector<Block> blocks;
  std::size_t finalNormGain = 0;
  std::size_t finalNormBias = 0;
  std::size_t head = 0;  // d x V, no bias
  Eigen::Index total = 0;

  static ParameterLayout for_config(const ModelConfig& cfg);
  const Tensor& operator[](std::size_t i) const { return tensors[i]; }
};

/// Low-rank update W + (alpha / rank) * down * up on every block linear map.
template <class Scalar>
struct LoraAdapter {
  int rank = 0;
  double alpha = 0.0;
  Vector<Scalar> params;
  /// Offsets of the down (in x r) and up (r x out) factors per block and slot.
  std::vector<std::array<Eigen::Index, kLinearSlots>> downOffset;
  std::vector<std::array<Eigen::Index, kLinearSlots>> upOffset;

  Scalar scale() const { return static_cast<Scalar>(alpha / rank); }
};

/// Rotates consecutive dimension pairs of every head in place. Row r sits at
/// position firstPosition + r; pair i turns by position * 10000^(-2i / headDim).
/// `inverse` applies the transpose, which is what the backward pass needs.
template <class Derived>
void apply_rotary(Eigen::MatrixBase<Derived>& x, Eigen::Index firstPosition, Eigen::Index headDim, bool inverse = false) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index half = headDim / 2;
  for (Eigen::Index i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(headDim));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      const double angle = static_cast<double>(firstPosition + r) * freq;
      const auto c = static_cast<Scalar>(std::cos(angle));
      const auto s = static_cast<Scalar>(inverse ? -std::sin(angle) : std::sin(angle));
      for (Eigen::Index h = 0; h + headDim <= x.cols(); h += headDim) {
        const Scalar a = x(r, h + 2 * i), b = x(r, h + 2 * i + 1);
        x(r, h + 2 * i) = c * a - s * b;
        x(r, h + 2 * i + 1) = s * a + c * b;
      }
    }
  }
}

/// Decoder-only transformer (pre-norm, learned positions plus rotary attention,
/// GELU feed-forward, untied LM head).
/// Parameters live in one flat vector so optimizers, finite differences and
/// serialization can treat them uniformly.
template <class Scalar>
class Transformer {
 public:
  using Mat = Matrix<Scalar>;
  using Vec = Vector<Scalar>;
  using MapC = Eigen::Map<const Mat>;
  using MapM = Eigen::Map<Mat>;

  Transformer() = default;
  /// Deterministic initialization from cfg.seed.
  explicit Transformer(const ModelConfig& cfg);
  /// Wraps existing parameters; `params` must match the layout of `cfg`.
  Transformer(const ModelConfig& cfg, Vec params);

  const ModelConfig& config() const { return config_; }
  const ParameterLayout& layout() const { return layout_; }
  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }

  MapC tensor(std::size_t index) const;
  MapM tensor(std::size_t index);

  bool has_adapter() const { return adapter_.has_value(); }
  const LoraAdapter<Scalar>& adapter() const { return *adapter_; }
  LoraAdapter<Scalar>& adapter() { return *adapter_; }
  void set_adapter(LoraAdapter<Scalar> adapter) { adapter_ = std::move(adapter); }
  void clear_adapter() { adapter_.reset(); }

  MapC lora_down(std::size_t block, LinearSlot slot) const;
  MapC lora_up(std::size_t block, LinearSlot slot) const;

  template <class Other>
  Transformer<Other> cast() const;

 private:
  ModelConfig config_;
  ParameterLayout layout_;
  Vec params_;
  std::optional<LoraAdapter<Scalar>> adapter_;
};

/// Activations kept by the forward pass for the backward pass.
template <class Scalar>
struct ForwardCache {
  struct NormCache {
    Matrix<Scalar> normalized;   // (x - mean) * rstd
    Vector<Scalar> rstd;
  };
  struct BlockCache {
    NormCache norm1, norm2;
    Matrix<Scalar> h1, q, k, v, context, h2, pre, act;  // q and k after rotation
    std::vector<Matrix<Scalar>> probs;                  // per head, T x T
    std::array<Matrix<Scalar>, kLinearSlots> loraMid;   // input * down, when an adapter is attached
  };
  std::vector<TokenId> tokens;
  std::vector<BlockCache> blocks;
  NormCache finalNorm;
  Matrix<Scalar> hidden;  // final normalized hidden states, T x d
  Matrix<Scalar> logits;  // T x V
};

template <class Scalar>
struct Gradients {
  Vector<Scalar> base;
  Vector<Scalar> adapter;
  bool trainBase = true;

  static Gradients zeros_like(const Transformer<Scalar>& model, bool trainBase = true);
  void set_zero();
};

/// Validates length and token range, runs the decoder and keeps activations.
template <class Scalar>
ForwardCache<Scalar> forward(const Transformer<Scalar>& model, std::span<const TokenId> tokens);

/// Row t holds the next-token logits after reading tokens[0..t].
template <class Scalar>
Matrix<Scalar> forward_logits(const Transformer<Scalar>& model, std::span<const TokenId> tokens);

/// Each sequence is processed independently; results are identical to unbatched calls.
template <class Scalar>
std::vector<Matrix<Scalar>> forward_logits_batch(const Transformer<Scalar>& model,
                                                 const std::vector<std::vector<TokenId>>& batch);

/// Accumulates d(objective)/d(parameters) given d(objective)/d(logits).
/// Base-parameter gradients are skipped when grads.trainBase is false.
template <class Scalar>
void backward(const Transformer<Scalar>& model, const ForwardCache<Scalar>& cache, const Matrix<Scalar>& dLogits,
              Gradients<Scalar>& grads);

/// Row-wise log-softmax.
template <class Scalar>
Matrix<Scalar> log_softmax_rows(const Matrix<Scalar>& logits);

extern template class Transformer<float>;
extern template class Transformer<double>;

}  // namespace s2st
