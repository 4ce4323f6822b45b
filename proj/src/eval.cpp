#include "s2st/eval.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "s2st/decode.hpp"
#include "s2st/metrics.hpp"
#include "s2st/rng.hpp"
#include "s2st/transcribe.hpp"

namespace s2st {

using nlohmann::json;

namespace {

constexpr std::uint64_t kTtsStream = 0x54545353;  // "TTSS"

std::string describe_direction(const std::vector<ParallelSample>& testSet) {
  bool a = false, b = false;
  for (const auto& s : testSet) (s.direction == Direction::A2B ? a : b) = true;
  if (a && b) return "both";
  return std::string(to_string(b ? Direction::B2A : Direction::A2B));
}

EvalReport make_report(std::string system, Task task, PromptVariant variant, const std::vector<ParallelSample>& set) {
  EvalReport r;
  r.system = std::move(system);
  r.task = task;
  r.variant = variant;
  r.direction = describe_direction(set);
  r.sentenceCount = set.size();
  r.records.reserve(set.size());
  return r;
}

void finish(EvalReport& r) { r.corpusBleu = rescore(r); }

void require_text_output(PromptVariant variant) {
  if (variant == PromptVariant::Vanilla)
    fail_usage("S2T evaluation is unsupported for vanilla checkpoints: they produce no text");
}

void stamp(EvalReport& r, const ModelCheckpoint& ckpt, int maxNewTokens) {
  r.checkpointHash = checkpoint_hash(ckpt);
  r.maxNewTokens = maxNewTokens;
}

}  // namespace

Responder model_responder(const ModelCheckpoint& checkpoint, int maxNewTokens) {
  const TokenId end = checkpoint.vocab.end();
  return [&checkpoint, maxNewTokens, end](std::size_t, Task, const std::vector<TokenId>& prompt) {
    DecodeConfig dc;
    dc.greedy = true;
    dc.maxNewTokens = maxNewTokens;
    dc.stopTokens = {end};
    return sample(checkpoint.model, prompt, dc).tokens;
  };
}

Responder replay_responder(const PromptFormatter& formatter, PromptVariant variant,
                           const std::vector<ParallelSample>& testSet) {
  return [&formatter, variant, &testSet](std::size_t index, Task task, const std::vector<TokenId>&) {
    const auto& s = testSet.at(index);
    const Language tgt = target_language(s.direction);
    if (task == Task::S2T) return formatter.text_response(s.targetText, tgt);
    return formatter.s2st_response(variant, s.targetText, formatter.frontend().encode(s.targetSpeech, tgt), tgt);
  };
}

EvalReport eval_s2st(const Responder& respond, PromptVariant variant, const PromptFormatter& formatter,
                     const SyntheticWorld& world, const std::vector<ParallelSample>& testSet) {
  auto report = make_report("end-to-end", Task::S2ST, variant, testSet);
  for (std::size_t i = 0; i < testSet.size(); ++i) {
    const auto& s = testSet[i];
    const Language src = source_language(s.direction), tgt = target_language(s.direction);
    const auto response = respond(i, Task::S2ST, formatter.speech_prompt(Task::S2ST, s.sourceSpeech, src));
    SentenceRecord rec;
    rec.reference = s.targetText;
    const auto parsed = formatter.parse_s2st(response, variant, tgt);
    if (!parsed.ok) {
      rec.parsed = false;
      ++report.parseFailures;
    } else if (auto text = oracle_asr(parsed.units, world, tgt)) {
      rec.hypothesis = std::move(*text);
    } else {
      rec.transcribed = false;
      ++report.transcriptionFailures;
    }
    report.records.push_back(std::move(rec));
  }
  finish(report);
  return report;
}

EvalReport eval_s2st(const ModelCheckpoint& checkpoint, const PromptFormatter& formatter, const SyntheticWorld& world,
                     const std::vector<ParallelSample>& testSet, int maxNewTokens) {
  auto r = eval_s2st(model_responder(checkpoint, maxNewTokens), checkpoint.variant, formatter, world, testSet);
  stamp(r, checkpoint, maxNewTokens);
  return r;
}

EvalReport eval_s2t(const Responder& respond, PromptVariant variant, const PromptFormatter& formatter,
                    const std::vector<ParallelSample>& testSet) {
  require_text_output(variant);
  auto report = make_report("end-to-end", Task::S2T, variant, testSet);
  const Task task = variant == PromptVariant::TriTask ? Task::S2T : Task::S2ST;
  for (std::size_t i = 0; i < testSet.size(); ++i) {
    const auto& s = testSet[i];
    const Language src = source_language(s.direction), tgt = target_language(s.direction);
    const auto response = respond(i, task, formatter.speech_prompt(task, s.sourceSpeech, src));
    SentenceRecord rec;
    rec.reference = s.targetText;
    if (variant == PromptVariant::TriTask) {
      const auto parsed = formatter.parse_text(response, tgt);
      rec.parsed = parsed.ok;
      if (parsed.ok) rec.hypothesis = parsed.text;
    } else {
      const auto parsed = formatter.parse_s2st(response, variant, tgt);
      rec.parsed = parsed.ok;
      if (parsed.ok) rec.hypothesis = parsed.text;
    }
    if (!rec.parsed) ++report.parseFailures;
    report.records.push_back(std::move(rec));
  }
  finish(report);
  return report;
}

EvalReport eval_s2t(const ModelCheckpoint& checkpoint, const PromptFormatter& formatter,
                    const std::vector<ParallelSample>& testSet, int maxNewTokens) {
  require_text_output(checkpoint.variant);
  auto r = eval_s2t(model_responder(checkpoint, maxNewTokens), checkpoint.variant, formatter, testSet);
  stamp(r, checkpoint, maxNewTokens);
  return r;
}

EvalReport cascaded_baseline(const Responder& respond, PromptVariant variant, const PromptFormatter& formatter,
                             const SyntheticWorld& world, const std::vector<ParallelSample>& testSet,
                             std::uint64_t seed) {
  auto report = eval_s2t(respond, variant, formatter, testSet);
  report.system = "cascaded";
  report.task = Task::S2ST;
  report.textBleu = report.corpusBleu;
  for (std::size_t i = 0; i < testSet.size(); ++i) {
    auto& rec = report.records[i];
    const Language tgt = target_language(testSet[i].direction);
    Rng rng(derive_seed(seed, {kTtsStream, i}));
    const auto speech = oracle_tts(rec.hypothesis, world, tgt, rng);
    std::optional<LabelSequence> heard;
    if (speech) heard = oracle_asr(*speech, world, tgt);
    if (heard) {
      rec.hypothesis = std::move(*heard);
    } else {
      rec.hypothesis.clear();
      rec.transcribed = false;
      ++report.transcriptionFailures;
    }
  }
  finish(report);
  return report;
}

EvalReport cascaded_baseline(const ModelCheckpoint& checkpoint, const PromptFormatter& formatter,
                             const SyntheticWorld& world, const std::vector<ParallelSample>& testSet,
                             std::uint64_t seed, int maxNewTokens) {
  require_text_output(checkpoint.variant);
  auto r = cascaded_baseline(model_responder(checkpoint, maxNewTokens), checkpoint.variant, formatter, world, testSet,
                             seed);
  stamp(r, checkpoint, maxNewTokens);
  return r;
}

double rescore(const EvalReport& report) {
  std::vector<LabelSequence> refs, hyps;
  refs.reserve(report.records.size());
  hyps.reserve(report.records.size());
  for (const auto& r : report.records) {
    refs.push_back(r.reference);
    hyps.push_back(r.hypothesis);
  }
  return refs.empty() ? 0.0 : corpus_bleu(refs, hyps);
}

std::string serialize_report(const EvalReport& r) {
  json records = json::array();
  for (const auto& s : r.records)
    records.push_back({{"hypothesis", s.hypothesis},
                       {"reference", s.reference},
                       {"parsed", s.parsed},
                       {"transcribed", s.transcribed}});
  json doc = {{"format", "s2st-eval/1"},
              {"system", r.system},
              {"direction", r.direction},
              {"task", std::string(to_string(r.task))},
              {"variant", std::string(to_string(r.variant))},
              {"corpus_bleu", r.corpusBleu},
              {"text_bleu", r.textBleu ? json(*r.textBleu) : json(nullptr)},
              {"sentence_count", r.sentenceCount},
              {"parse_failures", r.parseFailures},
              {"transcription_failures", r.transcriptionFailures},
              {"checkpoint_hash", r.checkpointHash},
              {"decode", {{"greedy", true}, {"max_new_tokens", r.maxNewTokens}}},
              {"records", records}};
  return doc.dump(2) + "\n";
}

EvalReport parse_report(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    EvalReport r;
    r.system = doc.at("system");
    r.direction = doc.at("direction");
    const std::string task = doc.at("task");
    if (task == "S2ST")
      r.task = Task::S2ST;
    else if (task == "S2T")
      r.task = Task::S2T;
    else
      fail_data("unknown report task '" + task + "'");
    r.variant = parse_variant(doc.at("variant").get<std::string>());
    r.corpusBleu = doc.at("corpus_bleu");
    if (!doc.at("text_bleu").is_null()) r.textBleu = doc.at("text_bleu").get<double>();
    r.sentenceCount = doc.at("sentence_count");
    r.parseFailures = doc.at("parse_failures");
    r.transcriptionFailures = doc.at("transcription_failures");
    r.checkpointHash = doc.at("checkpoint_hash");
    r.maxNewTokens = doc.at("decode").at("max_new_tokens");
    for (const auto& s : doc.at("records"))
      r.records.push_back({s.at("hypothesis").get<LabelSequence>(), s.at("reference").get<LabelSequence>(),
                           s.at("parsed").get<bool>(), s.at("transcribed").get<bool>()});
    return r;
  } catch (const json::exception& e) {
    fail_data(std::string("malformed evaluation report: ") + e.what());
  }
}

std::string render_table(const std::vector<EvalReport>& reports) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-11s %-8s %-9s %-5s %8s %8s %6s %6s\n", "system", "variant", "direction", "task",
                "BLEU", "textBLEU", "n", "fail");
  os << line;
  for (const auto& r : reports) {
    const std::string text = r.textBleu ? std::to_string(*r.textBleu).substr(0, 6) : "-";
    std::snprintf(line, sizeof line, "%-11s %-8s %-9s %-5s %8.2f %8s %6zu %6zu\n", r.system.c_str(),
                  std::string(to_string(r.variant)).c_str(), r.direction.c_str(),
                  std::string(to_string(r.task)).c_str(), r.corpusBleu, text.c_str(), r.sentenceCount,
                  r.parseFailures + r.transcriptionFailures);
    os << line;
  }
  return os.str();
}

}  // namespace s2st
