#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace s2st {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct ArtifactRef {
  std::string role;
  std::filesystem::path path;  // relative to the manifest directory once written
  std::string sha256;
};

/// Provenance record of one pipeline stage.
struct RunManifest {
  std::string stage;
  std::vector<ArtifactRef> inputs;
  std::vector<ArtifactRef> outputs;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, std::uint64_t> seeds;
  nlohmann::json results = nlohmann::json::object();
  double durationSeconds = 0.0;
  std::string toolVersion{kToolVersion};
};

/// Hashes the file at `path`.
ArtifactRef artifact(std::string role, const std::filesystem::path& path);

/// Writes the manifest with artifact paths made relative to the manifest's directory.
void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);
RunManifest read_manifest(const std::filesystem::path& path);

/// Problems found when re-hashing every artifact; empty when the manifest verifies.
std::vector<std::string> verify_manifest(const std::filesystem::path& path);

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace s2st
