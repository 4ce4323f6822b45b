#include "s2st/sft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "s2st/rng.hpp"

namespace s2st {

PromptFormatter::PromptFormatter(TokenVocabulary vocab, SpeechFrontend frontend)
    : vocab_(std::move(vocab)), frontend_(std::move(frontend)) {}

TokenId PromptFormatter::task_marker(Task task) const {
  switch (task) {
    case Task::ASR: return vocab_.asr();
    case Task::S2T: return vocab_.s2t();
    case Task::S2ST: return vocab_.s2st();
  }
  fail_runtime("unknown task");
}

std::vector<TokenId> PromptFormatter::prompt(Task task, const UnitSequence& units, Language language) const {
  std::vector<TokenId> out;
  out.reserve(units.size() + 2);
  out.push_back(task_marker(task));
  for (auto u : units) out.push_back(vocab_.unit_token(language, u));
  out.push_back(vocab_.response());
  return out;
}

std::vector<TokenId> PromptFormatter::speech_prompt(Task task, const UnitSequence& rawUnits, Language language) const {
  return prompt(task, frontend_.encode(rawUnits, language), language);
}

std::vector<TokenId> PromptFormatter::text_response(const LabelSequence& text, Language language) const {
  std::vector<TokenId> out;
  out.reserve(text.size() + 1);
  for (const auto& w : text) out.push_back(vocab_.text_token(language, w));
  out.push_back(vocab_.end());
  return out;
}

std::vector<TokenId> PromptFormatter::s2st_response(PromptVariant variant, const LabelSequence& text,
                                                    const UnitSequence& units, Language language) const {
  std::vector<TokenId> out;
  if (variant == PromptVariant::Chain) {
    for (const auto& w : text) out.push_back(vocab_.text_token(language, w));
    out.push_back(vocab_.modality_sep());
  }
  for (auto u : units) out.push_back(vocab_.unit_token(language, u));
  out.push_back(vocab_.end());
  return out;
}

PromptExample PromptFormatter::assemble(Task task, PromptVariant variant, const UnitSequence& input, Language inLang,
                                        std::vector<TokenId> response, Language outLang) const {
  PromptExample ex;
  ex.variant = variant;
  ex.task = task;
  ex.inputLanguage = inLang;
  ex.outputLanguage = outLang;
  ex.tokens = prompt(task, frontend_.encode(input, inLang), inLang);
  ex.lossMask.assign(ex.tokens.size(), 0);
  ex.tokens.insert(ex.tokens.end(), response.begin(), response.end());
  ex.lossMask.resize(ex.tokens.size(), 1);
  return ex;
}

PromptExample PromptFormatter::format(const TaskExample& example, PromptVariant variant) const {
  if (variant == PromptVariant::Chain)
    fail_usage("the chain variant needs target text; format the parallel sample instead");
  if (variant == PromptVariant::Vanilla && example.task != Task::S2ST)
    fail_usage("the vanilla variant only trains S2ST, got a " + std::string(to_string(example.task)) + " example");
  if (example.task == Task::S2ST) {
    const auto units = frontend_.encode(example.outputUnits, example.outputLanguage);
    return assemble(example.task, variant, example.input, example.inputLanguage,
                    s2st_response(variant, {}, units, example.outputLanguage), example.outputLanguage);
  }
  return assemble(example.task, variant, example.input, example.inputLanguage,
                  text_response(example.outputText, example.outputLanguage), example.outputLanguage);
}

std::vector<PromptExample> PromptFormatter::format(const ParallelSample& sample, PromptVariant variant) const {
  switch (variant) {
    case PromptVariant::Vanilla:
      return {format(derive_tri_task(sample).back(), variant)};
    case PromptVariant::TriTask: {
      std::vector<PromptExample> out;
      for (const auto& ex : derive_tri_task(sample)) out.push_back(format(ex, variant));
      return out;
    }
    case PromptVariant::Chain: {
      const Language tgt = target_language(sample.direction);
      const auto units = frontend_.encode(sample.targetSpeech, tgt);
      return {assemble(Task::S2ST, variant, sample.sourceSpeech, source_language(sample.direction),
                       s2st_response(variant, sample.targetText, units, tgt), tgt)};
    }
  }
  fail_runtime("unknown variant");
}

ParsedResponse PromptFormatter::parse_s2st(std::span<const TokenId> response, PromptVariant variant,
                                           Language language) const {
  ParsedResponse out;
  if (response.empty() || response.back() != vocab_.end()) {
    out.error = "missing end token";
    return out;
  }
  std::size_t i = 0;
  const std::size_t n = response.size() - 1;
  if (variant == PromptVariant::Chain) {
    for (; i < n && response[i] != vocab_.modality_sep(); ++i) {
      if (!vocab_.is_text(response[i], language)) {
        out.error = "unexpected token '" + vocab_.entry(response[i]).name + "' in text segment";
        return out;
      }
      out.text.push_back(vocab_.entry(response[i]).name);
    }
    if (i == n) {
      out.error = "missing modality separator";
      return out;
    }
    ++i;
  }
  for (; i < n; ++i) {
    auto u = vocab_.unit_of(response[i]);
    if (!u || u->first != language) {
      out.error = "unexpected token '" + vocab_.entry(response[i]).name + "' in unit segment";
      return out;
    }
    out.units.push_back(u->second);
  }
  out.ok = true;
  return out;
}

ParsedText PromptFormatter::parse_text(std::span<const TokenId> response, Language language) const {
  ParsedText out;
  if (response.empty() || response.back() != vocab_.end()) {
    out.error = "missing end token";
    return out;
  }
  for (std::size_t i = 0; i + 1 < response.size(); ++i) {
    if (!vocab_.is_text(response[i], language)) {
      out.error = "unexpected token '" + vocab_.entry(response[i]).name + "' in text response";
      return out;
    }
    out.text.push_back(vocab_.entry(response[i]).name);
  }
  out.ok = true;
  return out;
}

std::vector<PromptExample> build_sft_dataset(const PromptFormatter& formatter,
                                             const std::vector<ParallelSample>& corpus, PromptVariant variant) {
  std::vector<PromptExample> out;
  for (const auto& s : corpus) {
    auto ex = formatter.format(s, variant);
    out.insert(out.end(), std::make_move_iterator(ex.begin()), std::make_move_iterator(ex.end()));
  }
  return out;
}

SftResult run_sft(const ModelCheckpoint& start, const std::vector<PromptExample>& dataset, const SftConfig& cfg) {
  SftResult result{start, {}};
  if (cfg.epochs == 0) return result;
  if (dataset.empty()) fail_data("SFT corpus is empty");
  if (cfg.batchSize < 1 || cfg.epochs < 0) fail_usage("SFT needs batchSize >= 1 and epochs >= 0");
  const int context = start.model.config().contextLength;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (static_cast<int>(dataset[i].tokens.size()) > context)
      fail_data("SFT sample " + std::to_string(i) + " has " + std::to_string(dataset[i].tokens.size()) +
                " tokens, exceeding the context length " + std::to_string(context));

  auto& model = result.checkpoint.model;
  model.clear_adapter();
  result.checkpoint.role = Role::SFT;
  Adam<float> adam(model.parameters().size(), cfg.adam);

  const auto batchSize = static_cast<std::size_t>(cfg.batchSize);
  const std::size_t stepsPerEpoch = (dataset.size() + batchSize - 1) / batchSize;
  const double totalSteps = static_cast<double>(stepsPerEpoch) * cfg.epochs;
  std::vector<std::size_t> order(dataset.size());
  std::vector<MaskedSequence> batch;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, {0x53465453, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    double lossSum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batchSize) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + batchSize); ++i) batch.push_back(dataset[order[i]]);
      const double progress = static_cast<double>(step) / totalSteps;
      const double f = cfg.finalLearningRateFraction;
      const double lr = cfg.learningRate * (f + (1.0 - f) * 0.5 * (1.0 + std::cos(M_PI * progress)));
      lossSum += train_step_ce<float>(model, adam, batch, lr);
      ++step;
    }
    result.epochLosses.push_back(lossSum / static_cast<double>(stepsPerEpoch));
    if (cfg.onEpoch) cfg.onEpoch(epoch, result.epochLosses.back(), result.checkpoint);
  }
  return result;
}

}  // namespace s2st
