#include "config.hpp"

#include <set>

#include "s2st/io.hpp"

namespace s2st::cli {

using nlohmann::json;

namespace {

/// Reads keys of one config section and rejects anything it did not read.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      if (!doc.at(name_).is_object()) fail_usage("config section '" + name_ + "' must be an object");
      obj_ = doc.at(name_);
    }
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).get<T>();
    } catch (const json::exception&) {
      fail_usage("config key '" + name_ + "." + key + "' has the wrong type");
    }
  }

  template <class T>
  void read_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!obj_.contains(key) || obj_.at(key).is_null()) return;
    T v{};
    read(key, v);
    out = v;
  }

  std::optional<std::string> text(const char* key) {
    std::optional<std::string> v;
    read_optional(key, v);
    return v;
  }

  void finish() const {
    for (const auto& [k, _] : obj_.items())
      if (!seen_.count(k)) fail_usage("unknown config key '" + name_ + "." + k + "'");
  }

 private:
  std::string name_;
  json obj_ = json::object();
  std::set<std::string> seen_;
};

}  // namespace

PipelineConfig default_config() {
  PipelineConfig cfg;
  cfg.prefs.maxPairs = std::nullopt;
  return cfg;
}

PipelineConfig parse_config(const json& doc) {
  if (!doc.is_object()) fail_usage("config document must be a JSON object");
  static const std::set<std::string> sections = {"world", "corpus", "model", "sft", "prefs", "po", "iterate", "eval"};
  for (const auto& [k, _] : doc.items())
    if (!sections.count(k)) fail_usage("unknown config section '" + k + "'");

  PipelineConfig cfg = default_config();
  cfg.raw = doc;

  Section w(doc, "world");
  w.read("seed", cfg.worldSeed);
  w.read("alphabet_a", cfg.world.alphabetA);
  w.read("alphabet_b", cfg.world.alphabetB);
  w.read("inventory_size", cfg.world.inventorySize);
  w.read("feature_dim", cfg.world.featureDim);
  w.read("min_word_units", cfg.world.minWordUnits);
  w.read("max_word_units", cfg.world.maxWordUnits);
  w.read("min_duration", cfg.world.minDuration);
  w.read("max_duration", cfg.world.maxDuration);
  w.read("min_sentence_words", cfg.world.minSentenceWords);
  w.read("max_sentence_words", cfg.world.maxSentenceWords);
  w.read("min_separation", cfg.world.minSeparation);
  w.finish();

  Section c(doc, "corpus");
  c.read("seed", cfg.corpus.seed);
  c.read("train", cfg.corpus.sizes.train);
  c.read("dev", cfg.corpus.sizes.dev);
  c.read("test", cfg.corpus.sizes.test);
  c.read("monolingual", cfg.corpus.monolingual);
  c.finish();

  Section m(doc, "model");
  m.read("context_length", cfg.model.contextLength);
  m.read("embed_dim", cfg.model.embedDim);
  m.read("layers", cfg.model.numLayers);
  m.read("heads", cfg.model.numHeads);
  m.read("feedforward_dim", cfg.model.feedforwardDim);
  m.read("seed", cfg.model.seed);
  m.finish();

  Section s(doc, "sft");
  if (auto v = s.text("variant")) cfg.variant = parse_variant(*v);
  s.read("epochs", cfg.sft.epochs);
  s.read("batch_size", cfg.sft.batchSize);
  s.read("learning_rate", cfg.sft.learningRate);
  s.read("final_lr_fraction", cfg.sft.finalLearningRateFraction);
  s.read("seed", cfg.sft.seed);
  s.finish();

  Section p(doc, "prefs");
  if (auto v = p.text("metric")) cfg.prefs.metric = parse_metric(*v);
  p.read_optional("delta", cfg.prefs.delta);
  p.read("candidates", cfg.prefs.candidateCount);
  p.read("temperature", cfg.prefs.temperature);
  p.read("top_k", cfg.prefs.topK);
  p.read("max_new_tokens", cfg.prefs.maxNewTokens);
  p.read("max_retries", cfg.prefs.maxRetries);
  p.read("seed", cfg.prefs.seed);
  p.read_optional("max_pairs", cfg.prefs.maxPairs);
  p.finish();

  Section o(doc, "po");
  if (auto v = o.text("algorithm")) cfg.po.algorithm = parse_algorithm(*v);
  o.read("beta", cfg.po.beta);
  o.read("gamma", cfg.po.gamma);
  o.read("epochs", cfg.po.epochs);
  o.read("batch_size", cfg.po.batchSize);
  o.read("learning_rate", cfg.po.learningRate);
  o.read("lora", cfg.po.useLora);
  o.read("lora_rank", cfg.po.loraRank);
  o.read("lora_alpha", cfg.po.loraAlpha);
  o.read("seed", cfg.po.seed);
  o.finish();

  Section it(doc, "iterate");
  it.read("iterations", cfg.iterate.iterations);
  it.read("samples_per_iteration", cfg.iterate.samplesPerIteration);
  it.finish();

  Section e(doc, "eval");
  e.read("max_new_tokens", cfg.eval.maxNewTokens);
  e.read("seed", cfg.eval.seed);
  e.finish();
  return cfg;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& path) {
  if (!path) return default_config();
  if (!std::filesystem::exists(*path)) fail_usage("config file not found: " + path->string());
  try {
    return parse_config(json::parse(read_file(*path)));
  } catch (const json::parse_error& e) {
    fail_usage("config file " + path->string() + " is not valid JSON: " + e.what());
  }
}

json config_json(const PipelineConfig& cfg) {
  const auto& w = cfg.world;
  return {
      {"world",
       {{"seed", cfg.worldSeed},
        {"alphabet_a", w.alphabetA},
        {"alphabet_b", w.alphabetB},
        {"inventory_size", w.inventorySize},
        {"feature_dim", w.featureDim},
        {"min_word_units", w.minWordUnits},
        {"max_word_units", w.maxWordUnits},
        {"min_duration", w.minDuration},
        {"max_duration", w.maxDuration},
        {"min_sentence_words", w.minSentenceWords},
        {"max_sentence_words", w.maxSentenceWords},
        {"min_separation", w.minSeparation}}},
      {"corpus",
       {{"seed", cfg.corpus.seed},
        {"train", cfg.corpus.sizes.train},
        {"dev", cfg.corpus.sizes.dev},
        {"test", cfg.corpus.sizes.test},
        {"monolingual", cfg.corpus.monolingual}}},
      {"model",
       {{"context_length", cfg.model.contextLength},
        {"embed_dim", cfg.model.embedDim},
        {"layers", cfg.model.numLayers},
        {"heads", cfg.model.numHeads},
        {"feedforward_dim", cfg.model.feedforwardDim},
        {"seed", cfg.model.seed}}},
      {"sft",
       {{"variant", std::string(to_string(cfg.variant))},
        {"epochs", cfg.sft.epochs},
        {"batch_size", cfg.sft.batchSize},
        {"learning_rate", cfg.sft.learningRate},
        {"final_lr_fraction", cfg.sft.finalLearningRateFraction},
        {"seed", cfg.sft.seed}}},
      {"prefs",
       {{"metric", std::string(to_string(cfg.prefs.metric))},
        {"delta", cfg.prefs.effective_delta()},
        {"candidates", cfg.prefs.candidateCount},
        {"temperature", cfg.prefs.temperature},
        {"top_k", cfg.prefs.topK},
        {"max_new_tokens", cfg.prefs.maxNewTokens},
        {"max_retries", cfg.prefs.maxRetries},
        {"seed", cfg.prefs.seed},
        {"max_pairs", cfg.prefs.maxPairs ? json(*cfg.prefs.maxPairs) : json(nullptr)}}},
      {"po",
       {{"algorithm", std::string(to_string(cfg.po.algorithm))},
        {"beta", cfg.po.beta},
        {"gamma", cfg.po.gamma},
        {"epochs", cfg.po.epochs},
        {"batch_size", cfg.po.batchSize},
        {"learning_rate", cfg.po.learningRate},
        {"lora", cfg.po.useLora},
        {"lora_rank", cfg.po.loraRank},
        {"lora_alpha", cfg.po.loraAlpha},
        {"seed", cfg.po.seed}}},
      {"iterate",
       {{"iterations", cfg.iterate.iterations}, {"samples_per_iteration", cfg.iterate.samplesPerIteration}}},
      {"eval", {{"max_new_tokens", cfg.eval.maxNewTokens}, {"seed", cfg.eval.seed}}},
  };
}

}  // namespace s2st::cli
