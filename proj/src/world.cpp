#include "s2st/world.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "json_lines.hpp"

namespace s2st {

using nlohmann::json;

namespace {

std::string spelling_key(const UnitSequence& s) {
  std::string key;
  for (auto u : s) {
    key += std::to_string(u);
    key += ',';
  }
  return key;
}

int onset_count(int alphabet) { return (alphabet + 1) / 2; }

void enumerate_words(int alphabet, int length, UnitSequence& prefix, std::vector<UnitSequence>& out) {
  const int onsets = onset_count(alphabet);
  const auto pos = static_cast<int>(prefix.size());
  if (pos == length - 1) {
    for (int u = onsets; u < alphabet; ++u) {
      prefix.push_back(u);
      out.push_back(prefix);
      prefix.pop_back();
    }
    return;
  }
  for (int u = 0; u < onsets; ++u) {
    if (!prefix.empty() && prefix.back() == u) continue;
    prefix.push_back(u);
    enumerate_words(alphabet, length, prefix, out);
    prefix.pop_back();
  }
}

Eigen::MatrixXd separated_centroids(int count, int dim, double minSeparation, Rng& rng) {
  Eigen::MatrixXd c(count, dim);
  constexpr int kMaxAttempts = 10000;
  for (int k = 0; k < count; ++k) {
    int attempt = 0;
    for (;; ++attempt) {
      if (attempt == kMaxAttempts) fail_data("could not place centroids with the requested minimum separation");
      for (int j = 0; j < dim; ++j) c(k, j) = normal(rng, 1.0);
      bool ok = true;
      for (int m = 0; m < k && ok; ++m) ok = (c.row(k) - c.row(m)).norm() >= minSeparation;
      if (ok) break;
    }
  }
  return c;
}

Lexicon make_lexicon(int alphabet, const WorldConfig& cfg, char prefix, Rng& rng) {
  std::vector<UnitSequence> all;
  for (int len = cfg.minWordUnits; len <= cfg.maxWordUnits; ++len) {
    UnitSequence scratch;
    enumerate_words(alphabet, len, scratch, all);
  }
  std::shuffle(all.begin(), all.end(), rng);
  Lexicon lex;
  lex.alphabet = alphabet;
  lex.words.assign(all.begin(), all.begin() + cfg.inventorySize);
  for (int i = 0; i < cfg.inventorySize; ++i) {
    std::string label(1, prefix);
    if (i < 10) label += '0';
    label += std::to_string(i);
    lex.labels.push_back(label);
  }
  lex.centroids = separated_centroids(alphabet, cfg.featureDim, cfg.minSeparation, rng);
  lex.rebuild_index();
  return lex;
}

LabelSequence draw_sentence(const SyntheticWorld& world, Language language, Rng& rng) {
  const auto& cfg = world.config;
  const auto& lex = world.lexicon(language);
  const int len = uniform_int(rng, cfg.minSentenceWords, cfg.maxSentenceWords);
  LabelSequence text;
  text.reserve(static_cast<std::size_t>(len));
  for (int i = 0; i < len; ++i)
    text.push_back(lex.labels[static_cast<std::size_t>(uniform_int(rng, 0, cfg.inventorySize - 1))]);
  return text;
}

constexpr std::uint64_t kParallelStream = 0x5041524c;  // "PARL"
constexpr std::uint64_t kMonoStream = 0x4d4f4e4f;      // "MONO"
constexpr std::uint64_t kSplitStream = 0x53504c54;     // "SPLT"

json lexicon_json(const Lexicon& lex) {
  json words = json::array();
  for (const auto& w : lex.words) words.push_back(w);
  json centroids = json::array();
  for (Eigen::Index r = 0; r < lex.centroids.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(lex.centroids.cols()));
    for (Eigen::Index c = 0; c < lex.centroids.cols(); ++c) row[static_cast<std::size_t>(c)] = lex.centroids(r, c);
    centroids.push_back(row);
  }
  return {{"alphabet", lex.alphabet}, {"words", words}, {"labels", lex.labels}, {"centroids", centroids}};
}

Lexicon lexicon_from_json(const json& j) {
  Lexicon lex;
  lex.alphabet = j.at("alphabet").get<int>();
  lex.words = j.at("words").get<std::vector<UnitSequence>>();
  lex.labels = j.at("labels").get<std::vector<std::string>>();
  const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
  if (rows.empty()) fail_data("world lexicon has no centroids");
  lex.centroids.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) fail_data("ragged centroid matrix in world document");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      lex.centroids(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  lex.rebuild_index();
  return lex;
}

json sample_json(const ParallelSample& s) {
  return {{"source_units", s.sourceSpeech},
          {"source_text", s.sourceText},
          {"target_units", s.targetSpeech},
          {"target_text", s.targetText},
          {"direction", std::string(to_string(s.direction))}};
}

}  // namespace

void WorldConfig::validate() const {
  if (alphabetA < 8 || alphabetB < 8) fail_usage("alphabet sizes must be >= 8");
  if (inventorySize < 20) fail_usage("inventory size must be >= 20");
  if (featureDim < 4) fail_usage("feature dimension must be >= 4");
  if (minDuration < 1 || maxDuration > 4 || minDuration > maxDuration)
    fail_usage("duration range must lie within [1, 4]");
  if (minWordUnits < 2 || minWordUnits > maxWordUnits) fail_usage("word length range must start at >= 2");
  if (minSentenceWords < 1 || minSentenceWords > maxSentenceWords) fail_usage("invalid sentence length range");
  if (!(minSeparation > 0.0)) fail_usage("minimum centroid separation must be positive");
  for (int alphabet : {alphabetA, alphabetB}) {
    if (constructible_word_count(alphabet, minWordUnits, maxWordUnits) < inventorySize)
      fail_usage("inventory size " + std::to_string(inventorySize) + " exceeds the " +
                 std::to_string(constructible_word_count(alphabet, minWordUnits, maxWordUnits)) +
                 " constructible words for alphabet " + std::to_string(alphabet));
  }
}

std::int64_t constructible_word_count(int alphabet, int minUnits, int maxUnits) {
  const std::int64_t onsets = onset_count(alphabet);
  const std::int64_t codas = alphabet - onsets;
  std::int64_t total = 0;
  for (int len = std::max(minUnits, 2); len <= maxUnits; ++len) {
    std::int64_t n = onsets * codas;
    for (int i = 0; i < len - 2; ++i) n *= (onsets - 1);
    total += n;
  }
  return total;
}

std::optional<int> Lexicon::index_of_label(std::string_view label) const {
  auto it = byLabel_.find(std::string(label));
  if (it == byLabel_.end()) return std::nullopt;
  return it->second;
}

std::optional<int> Lexicon::index_of_spelling(const UnitSequence& spelling) const {
  auto it = bySpelling_.find(spelling_key(spelling));
  if (it == bySpelling_.end()) return std::nullopt;
  return it->second;
}

void Lexicon::rebuild_index() {
  byLabel_.clear();
  bySpelling_.clear();
  for (std::size_t i = 0; i < labels.size(); ++i) byLabel_.emplace(labels[i], static_cast<int>(i));
  for (std::size_t i = 0; i < words.size(); ++i) bySpelling_.emplace(spelling_key(words[i]), static_cast<int>(i));
}

LabelSequence SyntheticWorld::translate(const LabelSequence& text, Direction direction) const {
  const auto& from = lexicon(source_language(direction));
  const auto& to = lexicon(target_language(direction));
  const auto& dict = direction == Direction::A2B ? translation : inverseTranslation;
  LabelSequence out;
  out.reserve(text.size());
  for (auto it = text.rbegin(); it != text.rend(); ++it) {
    auto idx = from.index_of_label(*it);
    if (!idx) fail_data("label '" + *it + "' is not in the " + std::string(to_string(source_language(direction))) +
                        " inventory");
    out.push_back(to.labels[static_cast<std::size_t>(dict[static_cast<std::size_t>(*idx)])]);
  }
  return out;
}

UnitSequence SyntheticWorld::spell(const LabelSequence& text, Language language) const {
  const auto& lex = lexicon(language);
  UnitSequence units;
  for (const auto& label : text) {
    auto idx = lex.index_of_label(label);
    if (!idx) fail_data("label '" + label + "' is not in the inventory");
    const auto& w = lex.words[static_cast<std::size_t>(*idx)];
    units.insert(units.end(), w.begin(), w.end());
  }
  return units;
}

UnitSequence SyntheticWorld::render(const LabelSequence& text, Language language, Rng& rng) const {
  UnitSequence out;
  for (auto u : spell(text, language)) {
    const int reps = uniform_int(rng, config.minDuration, config.maxDuration);
    out.insert(out.end(), static_cast<std::size_t>(reps), u);
  }
  return out;
}

SyntheticWorld generate_world(std::uint64_t seed, const WorldConfig& cfg) {
  cfg.validate();
  Rng rng(derive_seed(seed, {0x574f524c}));
  SyntheticWorld world;
  world.seed = seed;
  world.config = cfg;
  world.lexiconA = make_lexicon(cfg.alphabetA, cfg, 'a', rng);
  world.lexiconB = make_lexicon(cfg.alphabetB, cfg, 'b', rng);
  world.translation.resize(static_cast<std::size_t>(cfg.inventorySize));
  std::iota(world.translation.begin(), world.translation.end(), 0);
  std::shuffle(world.translation.begin(), world.translation.end(), rng);
  world.inverseTranslation.resize(world.translation.size());
  for (std::size_t i = 0; i < world.translation.size(); ++i)
    world.inverseTranslation[static_cast<std::size_t>(world.translation[i])] = static_cast<int>(i);
  return world;
}

std::string_view to_string(Task t) {
  switch (t) {
    case Task::ASR: return "ASR";
    case Task::S2T: return "S2T";
    case Task::S2ST: return "S2ST";
  }
  return "?";
}

std::vector<ParallelSample> generate_parallel_corpus(const SyntheticWorld& world, std::size_t n,
                                                     Direction direction, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kParallelStream, static_cast<std::uint64_t>(direction)}));
  std::vector<ParallelSample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    ParallelSample s;
    s.direction = direction;
    s.sourceText = draw_sentence(world, source_language(direction), rng);
    s.targetText = world.translate(s.sourceText, direction);
    s.sourceSpeech = world.render(s.sourceText, source_language(direction), rng);
    s.targetSpeech = world.render(s.targetText, target_language(direction), rng);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<TaskExample> derive_tri_task(const ParallelSample& s) {
  const Language src = source_language(s.direction);
  const Language tgt = target_language(s.direction);
  std::vector<TaskExample> out(5);
  out[0] = {Task::ASR, s.sourceSpeech, src, {}, s.sourceText, src};
  out[1] = {Task::ASR, s.targetSpeech, tgt, {}, s.targetText, tgt};
  out[2] = {Task::S2T, s.sourceSpeech, src, {}, s.targetText, tgt};
  out[3] = {Task::S2T, s.targetSpeech, tgt, {}, s.sourceText, src};
  out[4] = {Task::S2ST, s.sourceSpeech, src, s.targetSpeech, {}, tgt};
  return out;
}

std::vector<Utterance> generate_monolingual_corpus(const SyntheticWorld& world, Language language,
                                                   std::size_t n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {kMonoStream, static_cast<std::uint64_t>(language)}));
  std::vector<Utterance> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Utterance u;
    u.language = language;
    u.transcript = draw_sentence(world, language, rng);
    u.units = world.render(u.transcript, language, rng);
    out.push_back(std::move(u));
  }
  return out;
}

CorpusSplits generate_splits(const SyntheticWorld& world, Direction direction, const SplitSizes& sizes,
                             std::uint64_t seed) {
  CorpusSplits splits;
  splits.train = generate_parallel_corpus(world, sizes.train, direction, derive_seed(seed, {kSplitStream, 0}));
  splits.dev = generate_parallel_corpus(world, sizes.dev, direction, derive_seed(seed, {kSplitStream, 1}));
  splits.test = generate_parallel_corpus(world, sizes.test, direction, derive_seed(seed, {kSplitStream, 2}));
  return splits;
}

std::string serialize_world(const SyntheticWorld& world) {
  const auto& c = world.config;
  json cfg = {{"alphabet_a", c.alphabetA},         {"alphabet_b", c.alphabetB},
              {"inventory_size", c.inventorySize}, {"feature_dim", c.featureDim},
              {"min_word_units", c.minWordUnits},  {"max_word_units", c.maxWordUnits},
              {"min_duration", c.minDuration},     {"max_duration", c.maxDuration},
              {"min_sentence_words", c.minSentenceWords}, {"max_sentence_words", c.maxSentenceWords},
              {"min_separation", c.minSeparation}};
  json doc = {{"format", "s2st-world/1"},
              {"seed", world.seed},
              {"config", cfg},
              {"language_a", lexicon_json(world.lexiconA)},
              {"language_b", lexicon_json(world.lexiconB)},
              {"translation", world.translation}};
  return doc.dump(1) + "\n";
}

SyntheticWorld parse_world(std::string_view text) {
  try {
    const json doc = json::parse(text);
    if (doc.value("format", "") != "s2st-world/1") fail_data("not a world document");
    SyntheticWorld w;
    w.seed = doc.at("seed").get<std::uint64_t>();
    const auto& c = doc.at("config");
    w.config.alphabetA = c.at("alphabet_a");
    w.config.alphabetB = c.at("alphabet_b");
    w.config.inventorySize = c.at("inventory_size");
    w.config.featureDim = c.at("feature_dim");
    w.config.minWordUnits = c.at("min_word_units");
    w.config.maxWordUnits = c.at("max_word_units");
    w.config.minDuration = c.at("min_duration");
    w.config.maxDuration = c.at("max_duration");
    w.config.minSentenceWords = c.at("min_sentence_words");
    w.config.maxSentenceWords = c.at("max_sentence_words");
    w.config.minSeparation = c.at("min_separation");
    w.lexiconA = lexicon_from_json(doc.at("language_a"));
    w.lexiconB = lexicon_from_json(doc.at("language_b"));
    w.translation = doc.at("translation").get<std::vector<int>>();
    w.inverseTranslation.assign(w.translation.size(), -1);
    for (std::size_t i = 0; i < w.translation.size(); ++i) {
      const auto t = static_cast<std::size_t>(w.translation[i]);
      if (t >= w.inverseTranslation.size() || w.inverseTranslation[t] != -1)
        fail_data("translation table is not a bijection");
      w.inverseTranslation[t] = static_cast<int>(i);
    }
    return w;
  } catch (const json::exception& e) {
    fail_data(std::string("malformed world document: ") + e.what());
  }
}

std::string serialize_parallel(const std::vector<ParallelSample>& samples) {
  std::ostringstream os;
  for (const auto& s : samples) os << sample_json(s).dump() << '\n';
  return os.str();
}

std::vector<ParallelSample> parse_parallel(std::string_view text) {
  std::vector<ParallelSample> out;
  detail::for_each_json_line(text, [&](const json& j) {
    ParallelSample s;
    s.sourceSpeech = j.at("source_units").get<UnitSequence>();
    s.sourceText = j.at("source_text").get<LabelSequence>();
    s.targetSpeech = j.at("target_units").get<UnitSequence>();
    s.targetText = j.at("target_text").get<LabelSequence>();
    s.direction = parse_direction(j.at("direction").get<std::string>());
    out.push_back(std::move(s));
  });
  return out;
}

std::string serialize_utterances(const std::vector<Utterance>& utterances) {
  std::ostringstream os;
  for (const auto& u : utterances) {
    json j = {{"units", u.units}, {"text", u.transcript}, {"language", std::string(to_string(u.language))}};
    os << j.dump() << '\n';
  }
  return os.str();
}

std::vector<Utterance> parse_utterances(std::string_view text) {
  std::vector<Utterance> out;
  detail::for_each_json_line(text, [&](const json& j) {
    Utterance u;
    if (j.contains("source_units")) {
      u.units = j.at("source_units").get<UnitSequence>();
      u.transcript = j.at("source_text").get<LabelSequence>();
      u.language = source_language(parse_direction(j.at("direction").get<std::string>()));
    } else {
      u.units = j.at("units").get<UnitSequence>();
      u.transcript = j.value("text", LabelSequence{});
      u.language = parse_language(j.at("language").get<std::string>());
    }
    out.push_back(std::move(u));
  });
  return out;
}

}  // namespace s2st
