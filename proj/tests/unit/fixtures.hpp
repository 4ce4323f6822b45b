#pragma once

#include <map>

#include "s2st/checkpoint.hpp"
#include "s2st/sft.hpp"
#include "s2st/world.hpp"

namespace s2st::testing {

inline const SyntheticWorld& small_world() {
  static const SyntheticWorld world = [] {
    WorldConfig cfg;
    cfg.maxSentenceWords = 5;
    return generate_world(11, cfg);
  }();
  return world;
}

inline PromptFormatter small_formatter() {
  return PromptFormatter(world_vocabulary(small_world()), SpeechFrontend::from_world(small_world()));
}

inline ModelConfig tiny_config(int vocab, int layers = 2, int dim = 32) {
  ModelConfig cfg;
  cfg.vocabSize = vocab;
  cfg.contextLength = 96;
  cfg.embedDim = dim;
  cfg.numLayers = layers;
  cfg.numHeads = 4;
  cfg.feedforwardDim = 2 * dim;
  cfg.seed = 5;
  return cfg;
}

inline ModelCheckpoint tiny_checkpoint(PromptVariant variant, Role role = Role::SFT) {
  const auto fmt = small_formatter();
  auto ckpt = init_checkpoint(tiny_config(fmt.vocab().size()), fmt.vocab(), variant);
  ckpt.role = role;
  return ckpt;
}

inline std::vector<ParallelSample> small_train_set() {
  auto train = generate_parallel_corpus(small_world(), 200, Direction::A2B, 21);
  const auto back = generate_parallel_corpus(small_world(), 200, Direction::B2A, 22);
  train.insert(train.end(), back.begin(), back.end());
  return train;
}

/// Briefly fine-tuned model, trained once per variant and shared by every test case.
inline const ModelCheckpoint& lightly_trained(PromptVariant variant) {
  static std::map<PromptVariant, ModelCheckpoint> cache;
  auto it = cache.find(variant);
  if (it != cache.end()) return it->second;
  const auto fmt = small_formatter();
  SftConfig cfg;
  cfg.epochs = 8;
  cfg.batchSize = 16;
  cfg.learningRate = 3e-3;
  cfg.seed = 1;
  const auto start = init_checkpoint(tiny_config(fmt.vocab().size()), fmt.vocab(), variant);
  return cache.emplace(variant, run_sft(start, build_sft_dataset(fmt, small_train_set(), variant), cfg).checkpoint)
      .first->second;
}

inline std::vector<Utterance> source_utterances(std::size_t n, Direction d, std::uint64_t seed) {
  std::vector<Utterance> out;
  for (const auto& s : generate_parallel_corpus(small_world(), n, d, seed))
    out.push_back({s.sourceSpeech, s.sourceText, source_language(d)});
  return out;
}

}  // namespace s2st::testing
