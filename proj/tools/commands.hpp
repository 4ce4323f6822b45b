#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace s2st::cli {

using Path = std::filesystem::path;

struct CommonOptions {
  std::optional<Path> config;
  Path out;
};

struct WorldOptions : CommonOptions {};

struct CorpusOptions : CommonOptions {
  Path world;
};

struct SftOptions : CommonOptions {
  Path world;
  Path train;
  std::optional<std::string> variant;
  std::optional<int> epochs;
  std::optional<double> learningRate;
  std::optional<std::uint64_t> seed;
};

struct PrefsOptions : CommonOptions {
  Path world;
  Path checkpoint;
  Path sources;
  std::optional<std::string> metric;
  std::optional<double> delta;
  std::optional<std::size_t> maxPairs;
  std::optional<std::uint64_t> seed;
};

struct PoOptions : CommonOptions {
  Path world;
  Path checkpoint;
  Path pairs;
  std::optional<std::string> algorithm;
  std::optional<int> epochs;
  std::optional<std::uint64_t> seed;
};

struct IterateOptions : CommonOptions {
  Path world;
  Path checkpoint;
  Path sources;
  std::vector<Path> test;
  std::optional<int> iterations;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> maxPairs;
};

struct EvalOptions : CommonOptions {
  Path world;
  Path checkpoint;
  std::vector<Path> test;
  std::string task = "s2st";
};

struct ReportOptions {
  std::vector<Path> reports;
  std::vector<Path> manifests;
  std::optional<Path> out;
};

void cmd_gen_world(const WorldOptions& o);
void cmd_gen_corpus(const CorpusOptions& o);
void cmd_sft(const SftOptions& o);
void cmd_build_prefs(const PrefsOptions& o);
void cmd_po(const PoOptions& o);
void cmd_iterate(const IterateOptions& o);
void cmd_eval(const EvalOptions& o);
/// Returns false when a manifest fails verification.
bool cmd_report(const ReportOptions& o);

}  // namespace s2st::cli
