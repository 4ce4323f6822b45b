#include "s2st/prefdata.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "json_lines.hpp"
#include "s2st/decode.hpp"
#include "s2st/io.hpp"
#include "s2st/rng.hpp"
#include "s2st/transcribe.hpp"

namespace s2st {

using nlohmann::json;

namespace {

constexpr std::uint64_t kPrefStream = 0x50524546;  // "PREF"

bool same_response(const CandidateSample& a, const CandidateSample& b) { return a.units == b.units && a.text == b.text; }

json score_json(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double score_from_json(const json& j) { return j.is_null() ? kWorstScore : j.get<double>(); }

std::string describe_direction(const std::vector<Utterance>& sources) {
  bool a = false, b = false;
  for (const auto& s : sources) (s.language == Language::A ? a : b) = true;
  if (a && b) return "both";
  if (b) return std::string(to_string(Direction::B2A));
  return std::string(to_string(Direction::A2B));
}

}  // namespace

double default_delta(Metric metric) {
  switch (metric) {
    case Metric::WER:
    case Metric::METEOR: return 0.1;
    case Metric::BLEU: return 2.0;
    case Metric::MCD: return 0.5;
  }
  return 0.1;
}

void PreferenceBuildConfig::validate() const {
  if (!(effective_delta() > 0.0)) fail_usage("preference margin delta must be > 0");
  if (candidateCount < 2) fail_usage("preference building needs at least 2 candidates per source");
  if (maxRetries < 0) fail_usage("maxRetries must be >= 0");
  if (maxNewTokens < 1) fail_usage("maxNewTokens must be >= 1");
}

std::map<std::string, std::size_t> PreferenceDataset::skip_counts() const {
  std::map<std::string, std::size_t> out;
  for (const auto& s : skipped) ++out[s.reason];
  return out;
}

CandidateDraw sample_candidates(const ModelCheckpoint& model, const PromptFormatter& formatter, const Utterance& source,
                                const PreferenceBuildConfig& cfg, std::uint64_t sourceSeed) {
  const Language tgt = other(source.language);
  const auto prompt = formatter.speech_prompt(Task::S2ST, source.units, source.language);
  DecodeConfig dc;
  dc.temperature = cfg.temperature;
  dc.topK = cfg.topK;
  dc.maxNewTokens = cfg.maxNewTokens;
  dc.stopTokens = {formatter.vocab().end()};

  CandidateDraw draw;
  for (int c = 0; c < cfg.candidateCount; ++c) {
    std::string lastError;
    bool ok = false;
    for (int attempt = 0; attempt <= cfg.maxRetries && !ok; ++attempt) {
      dc.seed = derive_seed(sourceSeed, {static_cast<std::uint64_t>(c), static_cast<std::uint64_t>(attempt)});
      const auto decoded = sample(model.model, prompt, dc);
      const auto parsed = formatter.parse_s2st(decoded.tokens, model.variant, tgt);
      if (!parsed.ok) {
        lastError = parsed.error;
        continue;
      }
      draw.candidates.push_back({parsed.units, parsed.text, dc.seed, decoded.truncated, attempt + 1});
      ok = true;
    }
    if (!ok) {
      draw.failure = "candidate " + std::to_string(c) + " malformed after " + std::to_string(cfg.maxRetries + 1) +
                     " attempts (" + lastError + ")";
      return draw;
    }
  }
  return draw;
}

BackTranslation back_translate(const ModelCheckpoint& model, const PromptFormatter& formatter,
                               const UnitSequence& candidate, Language candidateLanguage, int maxNewTokens) {
  BackTranslation bt;
  if (candidate.empty()) {
    bt.error = "empty candidate";
    return bt;
  }
  const auto prompt = formatter.prompt(Task::S2ST, candidate, candidateLanguage);
  if (static_cast<int>(prompt.size()) >= model.model.config().contextLength) {
    bt.error = "candidate does not fit the context";
    return bt;
  }
  DecodeConfig dc;
  dc.greedy = true;
  dc.maxNewTokens = maxNewTokens;
  dc.stopTokens = {formatter.vocab().end()};
  const auto decoded = sample(model.model, prompt, dc);
  const auto parsed = formatter.parse_s2st(decoded.tokens, model.variant, other(candidateLanguage));
  if (!parsed.ok) {
    bt.error = parsed.error;
    return bt;
  }
  bt.ok = true;
  bt.units = parsed.units;
  return bt;
}

MetricScore score_candidate(const UnitSequence& source, const BackTranslation& backTranslation, Metric metric,
                            const SyntheticWorld& world, Language sourceLanguage) {
  const MetricScore worst{metric, std::numeric_limits<double>::quiet_NaN(), kWorstScore};
  if (!backTranslation.ok || backTranslation.units.empty()) return worst;
  if (metric == Metric::MCD) {
    const auto cb = world_codebook(world, sourceLanguage);
    return make_score(metric, mcd(detokenize(source, cb), detokenize(backTranslation.units, cb)));
  }
  const auto ref = oracle_asr(source, world, sourceLanguage);
  const auto hyp = oracle_asr(backTranslation.units, world, sourceLanguage);
  if (!ref || ref->empty() || !hyp) return worst;
  switch (metric) {
    case Metric::WER: return make_score(metric, wer(*ref, *hyp));
    case Metric::BLEU: return make_score(metric, bleu({*ref}, *hyp));
    case Metric::METEOR: return make_score(metric, meteor_lite(*ref, *hyp));
    case Metric::MCD: break;
  }
  return worst;
}

PreferenceDataset build_preference_pairs(const ModelCheckpoint& model, const PromptFormatter& formatter,
                                         const SyntheticWorld& world, const std::vector<Utterance>& sources,
                                         const PreferenceBuildConfig& cfg) {
  cfg.validate();
  if (model.role == Role::Base) fail_usage("preference pairs must be sampled from a fine-tuned checkpoint");
  const double delta = cfg.effective_delta();

  PreferenceDataset ds;
  auto& prov = ds.provenance;
  prov.checkpointHash = checkpoint_hash(model);
  prov.sourceCorpusId = sha256_hex(serialize_utterances(sources));
  prov.direction = describe_direction(sources);
  prov.variant = model.variant;
  prov.metric = cfg.metric;
  prov.delta = delta;
  prov.seed = cfg.seed;
  prov.candidateCount = cfg.candidateCount;
  prov.temperature = cfg.temperature;
  prov.topK = cfg.topK;
  prov.sourcesOffered = sources.size();

  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (cfg.maxPairs && ds.pairs.size() >= *cfg.maxPairs) break;
    prov.sourcesConsumed = i + 1;
    const auto& src = sources[i];
    const Language tgt = other(src.language);
    auto draw = sample_candidates(model, formatter, src, cfg, derive_seed(cfg.seed, {kPrefStream, i}));
    if (!draw.failure.empty()) {
      ds.skipped.push_back({i, "malformed", draw.failure});
      continue;
    }
    std::vector<CandidateRecord> records;
    for (auto& c : draw.candidates) {
      CandidateRecord r;
      r.backTranslation = back_translate(model, formatter, c.units, tgt, cfg.maxNewTokens);
      r.score = score_candidate(src.units, r.backTranslation, cfg.metric, world, src.language);
      r.candidate = std::move(c);
      records.push_back(std::move(r));
    }
    std::size_t best = 0, worst = 0;
    for (std::size_t k = 1; k < records.size(); ++k) {
      if (records[k].score.orientedScore > records[best].score.orientedScore) best = k;
      if (records[k].score.orientedScore <= records[worst].score.orientedScore) worst = k;
    }
    if (best == worst || same_response(records[best].candidate, records[worst].candidate)) {
      ds.skipped.push_back({i, "identical", "candidates are identical"});
      continue;
    }
    const double ep = records[best].score.orientedScore;
    const double er = records[worst].score.orientedScore;
    if (!std::isfinite(ep) || !(ep - er > delta)) {
      std::ostringstream os;
      os << "score gap below margin (" << ep << " vs " << er << ")";
      ds.skipped.push_back({i, "margin", os.str()});
      continue;
    }
    PreferencePair p;
    p.source = src.units;
    p.sourceLanguage = src.language;
    p.preferred = records[best].candidate.units;
    p.preferredText = records[best].candidate.text;
    p.rejected = records[worst].candidate.units;
    p.rejectedText = records[worst].candidate.text;
    p.ePreferred = ep;
    p.eRejected = er;
    p.metric = cfg.metric;
    p.delta = delta;
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

std::string serialize_pairs(const std::vector<PreferencePair>& pairs) {
  std::ostringstream os;
  for (const auto& p : pairs) {
    json j = {{"source_units", p.source},
              {"source_language", std::string(to_string(p.sourceLanguage))},
              {"preferred_units", p.preferred},
              {"rejected_units", p.rejected},
              {"e_p", score_json(p.ePreferred)},
              {"e_r", score_json(p.eRejected)},
              {"metric", std::string(to_string(p.metric))},
              {"delta", p.delta}};
    if (!p.preferredText.empty() || !p.rejectedText.empty()) {
      j["preferred_text"] = p.preferredText;
      j["rejected_text"] = p.rejectedText;
    }
    os << j.dump() << '\n';
  }
  return os.str();
}

std::vector<PreferencePair> parse_pairs(std::string_view text) {
  std::vector<PreferencePair> out;
  detail::for_each_json_line(text, [&](const json& j) {
    PreferencePair p;
    p.source = j.at("source_units").get<UnitSequence>();
    p.sourceLanguage = parse_language(j.value("source_language", std::string("A")));
    p.preferred = j.at("preferred_units").get<UnitSequence>();
    p.rejected = j.at("rejected_units").get<UnitSequence>();
    p.preferredText = j.value("preferred_text", LabelSequence{});
    p.rejectedText = j.value("rejected_text", LabelSequence{});
    p.ePreferred = score_from_json(j.at("e_p"));
    p.eRejected = score_from_json(j.at("e_r"));
    p.metric = parse_metric(j.at("metric").get<std::string>());
    p.delta = j.at("delta").get<double>();
    if (!(p.ePreferred - p.eRejected > p.delta))
      fail_data("preference record violates its margin (e_p - e_r <= delta)");
    out.push_back(std::move(p));
  });
  return out;
}

std::string serialize_provenance(const PreferenceProvenance& p, const std::vector<SkippedSource>& skipped) {
  json skips = json::array();
  for (const auto& s : skipped) skips.push_back({{"index", s.index}, {"reason", s.reason}, {"detail", s.detail}});
  json doc = {{"format", "s2st-prefs/1"},
              {"checkpoint_hash", p.checkpointHash},
              {"source_corpus_id", p.sourceCorpusId},
              {"direction", p.direction},
              {"variant", std::string(to_string(p.variant))},
              {"metric", std::string(to_string(p.metric))},
              {"delta", p.delta},
              {"seed", p.seed},
              {"candidate_count", p.candidateCount},
              {"temperature", p.temperature},
              {"top_k", p.topK},
              {"sources_offered", p.sourcesOffered},
              {"sources_consumed", p.sourcesConsumed},
              {"skipped", skips}};
  return doc.dump(2) + "\n";
}

PreferenceProvenance parse_provenance(std::string_view text) {
  try {
    const auto doc = json::parse(text);
    PreferenceProvenance p;
    p.checkpointHash = doc.at("checkpoint_hash");
    p.sourceCorpusId = doc.at("source_corpus_id");
    p.direction = doc.at("direction");
    p.variant = parse_variant(doc.at("variant").get<std::string>());
    p.metric = parse_metric(doc.at("metric").get<std::string>());
    p.delta = doc.at("delta");
    p.seed = doc.at("seed");
    p.candidateCount = doc.at("candidate_count");
    p.temperature = doc.at("temperature");
    p.topK = doc.at("top_k");
    p.sourcesOffered = doc.at("sources_offered");
    p.sourcesConsumed = doc.at("sources_consumed");
    return p;
  } catch (const json::exception& e) {
    fail_data(std::string("malformed preference provenance: ") + e.what());
  }
}

}  // namespace s2st
