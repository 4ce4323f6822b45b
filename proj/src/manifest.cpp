#include "s2st/manifest.hpp"

#include "s2st/io.hpp"
#include "s2st/types.hpp"

namespace s2st {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json refs_json(const std::vector<ArtifactRef>& refs, const fs::path& base) {
  json out = json::array();
  for (const auto& r : refs) {
    const auto rel = fs::absolute(r.path).lexically_proximate(base);
    out.push_back({{"role", r.role}, {"path", rel.generic_string()}, {"sha256", r.sha256}});
  }
  return out;
}

std::vector<ArtifactRef> refs_from_json(const json& j) {
  std::vector<ArtifactRef> out;
  for (const auto& r : j) out.push_back({r.at("role"), fs::path(r.at("path").get<std::string>()), r.at("sha256")});
  return out;
}

}  // namespace

ArtifactRef artifact(std::string role, const fs::path& path) { return {std::move(role), path, file_sha256(path)}; }

void write_manifest(const RunManifest& m, const fs::path& path) {
  const auto base = fs::absolute(path).parent_path();
  json doc = {{"format", "s2st-manifest/1"},
              {"stage", m.stage},
              {"tool_version", m.toolVersion},
              {"inputs", refs_json(m.inputs, base)},
              {"outputs", refs_json(m.outputs, base)},
              {"config", m.config},
              {"seeds", m.seeds},
              {"results", m.results},
              {"duration_seconds", m.durationSeconds}};
  write_file(path, doc.dump(2) + "\n");
}

RunManifest read_manifest(const fs::path& path) {
  try {
    const auto doc = json::parse(read_file(path));
    RunManifest m;
    m.stage = doc.at("stage");
    m.toolVersion = doc.at("tool_version");
    m.inputs = refs_from_json(doc.at("inputs"));
    m.outputs = refs_from_json(doc.at("outputs"));
    m.config = doc.at("config");
    m.seeds = doc.at("seeds").get<std::map<std::string, std::uint64_t>>();
    m.results = doc.value("results", json::object());
    m.durationSeconds = doc.at("duration_seconds");
    return m;
  } catch (const json::exception& e) {
    fail_data("malformed manifest " + path.string() + ": " + e.what());
  }
}

std::vector<std::string> verify_manifest(const fs::path& path) {
  const auto m = read_manifest(path);
  const auto base = fs::absolute(path).parent_path();
  std::vector<std::string> problems;
  auto check = [&](const ArtifactRef& r) {
    const auto p = r.path.is_absolute() ? r.path : base / r.path;
    if (!fs::exists(p)) {
      problems.push_back(r.role + ": missing " + p.string());
      return;
    }
    if (file_sha256(p) != r.sha256) problems.push_back(r.role + ": hash mismatch for " + p.string());
  };
  for (const auto& r : m.inputs) check(r);
  for (const auto& r : m.outputs) check(r);
  return problems;
}

}  // namespace s2st
