#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "s2st/decode.hpp"
#include "s2st/po.hpp"
#include "s2st/prefdata.hpp"
#include "s2st/sft.hpp"
#include "s2st/world.hpp"

namespace s2st::cli {

struct CorpusSettings {
  std::uint64_t seed = 7;
  SplitSizes sizes;
  std::size_t monolingual = 500;
};

struct IterateSettings {
  int iterations = 2;
  std::size_t samplesPerIteration = 250;
};

struct EvalSettings {
  int maxNewTokens = 128;
  std::uint64_t seed = 0;
};

/// Every stage's settings; absent sections and keys keep their defaults.
struct PipelineConfig {
  std::uint64_t worldSeed = 1;
  WorldConfig world;
  CorpusSettings corpus;
  ModelConfig model;
  PromptVariant variant = PromptVariant::Chain;
  SftConfig sft;
  PreferenceBuildConfig prefs;
  PoConfig po;
  IterateSettings iterate;
  EvalSettings eval;

  nlohmann::json raw = nlohmann::json::object();
};

PipelineConfig default_config();
/// Unknown keys are rejected so typos do not silently fall back to defaults.
PipelineConfig parse_config(const nlohmann::json& doc);
PipelineConfig load_config(const std::optional<std::filesystem::path>& path);
nlohmann::json config_json(const PipelineConfig& cfg);

}  // namespace s2st::cli
