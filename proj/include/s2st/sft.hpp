#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "s2st/checkpoint.hpp"
#include "s2st/objectives.hpp"
#include "s2st/tokenizer.hpp"
#include "s2st/world.hpp"

namespace s2st {

/// Full training sequence (task marker, input units, response marker, response, end)
/// with the loss mask covering the response only.
struct PromptExample : MaskedSequence {
  PromptVariant variant = PromptVariant::Vanilla;
  Task task = Task::S2ST;
  Language inputLanguage = Language::A;
  Language outputLanguage = Language::B;
};

/// Decoded S2ST response split into its text and unit segments.
struct ParsedResponse {
  bool ok = false;
  LabelSequence text;   // chain variant only
  UnitSequence units;
  std::string error;
};

struct ParsedText {
  bool ok = false;
  LabelSequence text;
  std::string error;
};

class PromptFormatter {
 public:
  PromptFormatter(TokenVocabulary vocab, SpeechFrontend frontend);

  const TokenVocabulary& vocab() const { return vocab_; }
  const SpeechFrontend& frontend() const { return frontend_; }

  /// Formats one task example. Vanilla and tri-task accept the tasks they train on;
  /// chain needs target text and therefore a ParallelSample.
  PromptExample format(const TaskExample& example, PromptVariant variant) const;
  /// Vanilla and chain give one example, tri-task gives five.
  std::vector<PromptExample> format(const ParallelSample& sample, PromptVariant variant) const;

  /// [task marker, units..., response marker] for units already in model form.
  std::vector<TokenId> prompt(Task task, const UnitSequence& units, Language language) const;
  /// Same, after passing raw unit runs through the speech frontend.
  std::vector<TokenId> speech_prompt(Task task, const UnitSequence& rawUnits, Language language) const;

  /// S2ST response tokens: units + end (vanilla/tri-task) or text + separator + units + end (chain).
  std::vector<TokenId> s2st_response(PromptVariant variant, const LabelSequence& text, const UnitSequence& units,
                                     Language language) const;
  std::vector<TokenId> text_response(const LabelSequence& text, Language language) const;

  ParsedResponse parse_s2st(std::span<const TokenId> response, PromptVariant variant, Language language) const;
  ParsedText parse_text(std::span<const TokenId> response, Language language) const;

 private:
  PromptExample assemble(Task task, PromptVariant variant, const UnitSequence& input, Language inLang,
                         std::vector<TokenId> response, Language outLang) const;
  TokenId task_marker(Task task) const;

  TokenVocabulary vocab_;
  SpeechFrontend frontend_;
};

std::vector<PromptExample> build_sft_dataset(const PromptFormatter& formatter,
                                             const std::vector<ParallelSample>& corpus, PromptVariant variant);

struct SftConfig {
  int epochs = 10;
  int batchSize = 32;
  double learningRate = 1e-3;
  /// Fraction of the final learning rate reached by cosine decay; 1 keeps it constant.
  double finalLearningRateFraction = 1.0;
  std::uint64_t seed = 0;
  AdamConfig adam;
  /// Called after every epoch with its index, mean loss and the current model.
  std::function<void(int, double, const ModelCheckpoint&)> onEpoch;
};

struct SftResult {
  ModelCheckpoint checkpoint;
  std::vector<double> epochLosses;
};

/// Full fine-tuning on the formatted dataset, seeded shuffle per epoch.
SftResult run_sft(const ModelCheckpoint& start, const std::vector<PromptExample>& dataset, const SftConfig& cfg);

}  // namespace s2st
