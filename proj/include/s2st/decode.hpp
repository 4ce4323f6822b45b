#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "s2st/model.hpp"

namespace s2st {

struct DecodeConfig {
  double temperature = 1.0;
  int topK = 20;
  int maxNewTokens = 128;
  std::vector<TokenId> stopTokens;
  std::uint64_t seed = 0;
  /// Argmax decoding (ties to the lowest id); temperature, topK and seed are ignored.
  bool greedy = false;
};

struct DecodeResult {
  std::vector<TokenId> tokens;  // generated tokens, including the stop token when one was produced
  bool truncated = false;       // ran out of budget or context before a stop token
};

/// Key/value-cached single-token stepping; adapters are folded into a private merged copy.
template <class Scalar>
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const Transformer<Scalar>& model);
  IncrementalDecoder(const IncrementalDecoder&) = delete;
  IncrementalDecoder& operator=(const IncrementalDecoder&) = delete;

  /// Appends one token and returns the next-token logits.
  Vector<Scalar> push(TokenId token);
  int length() const { return length_; }
  void reset() { length_ = 0; }

 private:
  std::optional<Transformer<Scalar>> merged_;
  const Transformer<Scalar>* model_;
  std::vector<Matrix<Scalar>> keys_, values_;
  int length_ = 0;
};

/// Ancestral sampling: logits / temperature, keep the topK largest, draw from the softmax.
template <class Scalar>
DecodeResult sample(const Transformer<Scalar>& model, std::span<const TokenId> prompt, const DecodeConfig& cfg);

}  // namespace s2st
