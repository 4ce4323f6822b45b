#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2st/checkpoint.hpp"
#include "s2st/sft.hpp"
#include "s2st/world.hpp"

namespace s2st {

struct SentenceRecord {
  LabelSequence hypothesis;
  LabelSequence reference;
  bool parsed = true;       // the response had the expected shape
  bool transcribed = true;  // oracle ASR could segment the unit output
};

struct EvalReport {
  std::string system = "end-to-end";  // or "cascaded"
  std::string direction;
  Task task = Task::S2ST;
  PromptVariant variant = PromptVariant::Vanilla;
  double corpusBleu = 0.0;
  std::optional<double> textBleu;  // cascaded: S2T BLEU before synthesis
  std::size_t sentenceCount = 0;
  std::size_t parseFailures = 0;
  std::size_t transcriptionFailures = 0;
  std::string checkpointHash;
  int maxNewTokens = 128;
  std::vector<SentenceRecord> records;
};

/// Produces response tokens (ending in the end token when well formed) for test item `index`.
using Responder = std::function<std::vector<TokenId>(std::size_t index, Task task, const std::vector<TokenId>& prompt)>;

/// Greedy decoding with the checkpoint's model.
Responder model_responder(const ModelCheckpoint& checkpoint, int maxNewTokens = 128);
/// Replays the reference response of each test item, formatted for `variant`.
Responder replay_responder(const PromptFormatter& formatter, PromptVariant variant,
                           const std::vector<ParallelSample>& testSet);

/// ASR-BLEU: decode, take the unit segment, transcribe with the oracle, corpus BLEU against the target text.
EvalReport eval_s2st(const Responder& respond, PromptVariant variant, const PromptFormatter& formatter,
                     const SyntheticWorld& world, const std::vector<ParallelSample>& testSet);
EvalReport eval_s2st(const ModelCheckpoint& checkpoint, const PromptFormatter& formatter, const SyntheticWorld& world,
                     const std::vector<ParallelSample>& testSet, int maxNewTokens = 128);

/// Text BLEU of the S2T output: the S2T task for tri-task models, the text segment for chain models.
/// Vanilla models have no text output and are rejected.
EvalReport eval_s2t(const Responder& respond, PromptVariant variant, const PromptFormatter& formatter,
                    const std::vector<ParallelSample>& testSet);
EvalReport eval_s2t(const ModelCheckpoint& checkpoint, const PromptFormatter& formatter,
                    const std::vector<ParallelSample>& testSet, int maxNewTokens = 128);

/// S2T output synthesized by the oracle TTS, transcribed by the oracle ASR and scored like S2ST.
EvalReport cascaded_baseline(const Responder& respond, PromptVariant variant, const PromptFormatter& formatter,
                             const SyntheticWorld& world, const std::vector<ParallelSample>& testSet,
                             std::uint64_t seed = 0);
EvalReport cascaded_baseline(const ModelCheckpoint& checkpoint, const PromptFormatter& formatter,
                             const SyntheticWorld& world, const std::vector<ParallelSample>& testSet,
                             std::uint64_t seed = 0, int maxNewTokens = 128);

/// Corpus BLEU recomputed from the stored per-sentence records.
double rescore(const EvalReport& report);

std::string serialize_report(const EvalReport& report);
EvalReport parse_report(std::string_view text);
/// One row per report: system, variant, direction, task, BLEU, sentences, failures.
std::string render_table(const std::vector<EvalReport>& reports);

}  // namespace s2st
