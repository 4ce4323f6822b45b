#include "s2st/checkpoint.hpp"

#include <bit>
#include <cstring>

#include <json.hpp>

#include "s2st/io.hpp"
#include "s2st/lora.hpp"

namespace s2st {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "S2STCKPT1\n";
static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

json config_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocabSize},   {"context_length", c.contextLength}, {"embed_dim", c.embedDim},
          {"num_layers", c.numLayers},   {"num_heads", c.numHeads},           {"feedforward_dim", c.feedforwardDim},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocabSize = j.at("vocab_size");
  c.contextLength = j.at("context_length");
  c.embedDim = j.at("embed_dim");
  c.numLayers = j.at("num_layers");
  c.numHeads = j.at("num_heads");
  c.feedforwardDim = j.at("feedforward_dim");
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

void append_floats(std::string& out, const Vector<float>& v) {
  const auto bytes = static_cast<std::size_t>(v.size()) * sizeof(float);
  const auto at = out.size();
  out.resize(at + bytes);
  std::memcpy(out.data() + at, v.data(), bytes);
}

Vector<float> read_floats(std::string_view bytes, std::size_t& pos, Eigen::Index count) {
  const auto n = static_cast<std::size_t>(count) * sizeof(float);
  if (pos + n > bytes.size()) fail_data("checkpoint is truncated");
  Vector<float> v(count);
  std::memcpy(v.data(), bytes.data() + pos, n);
  pos += n;
  return v;
}

}  // namespace

std::string_view to_string(Role r) {
  switch (r) {
    case Role::Base: return "base";
    case Role::SFT: return "sft";
    case Role::PO: return "po";
  }
  return "?";
}

Role parse_role(std::string_view s) {
  if (s == "base") return Role::Base;
  if (s == "sft") return Role::SFT;
  if (s == "po") return Role::PO;
  fail_data("unknown checkpoint role '" + std::string(s) + "'");
}

ModelCheckpoint init_checkpoint(ModelConfig cfg, TokenVocabulary vocab, PromptVariant variant) {
  cfg.vocabSize = vocab.size();
  ModelCheckpoint ckpt;
  ckpt.role = Role::Base;
  ckpt.variant = variant;
  ckpt.vocab = std::move(vocab);
  ckpt.model = Transformer<float>(cfg);
  return ckpt;
}

std::string vocabulary_hash(const TokenVocabulary& vocab) { return sha256_hex(serialize_vocabulary(vocab)); }

std::string serialize_checkpoint(const ModelCheckpoint& ckpt) {
  const auto& m = ckpt.model;
  json tensors = json::array();
  for (const auto& t : m.layout().tensors) tensors.push_back({t.name, t.rows, t.cols});
  json header = {{"format", "s2st-checkpoint/1"},
                 {"scalar", "f32"},
                 {"role", std::string(to_string(ckpt.role))},
                 {"variant", std::string(to_string(ckpt.variant))},
                 {"config", config_json(m.config())},
                 {"vocabulary", json::parse(serialize_vocabulary(ckpt.vocab))},
                 {"vocabulary_hash", vocabulary_hash(ckpt.vocab)},
                 {"tensors", tensors},
                 {"parameter_count", m.parameters().size()}};
  if (m.has_adapter()) {
    header["adapter"] = {{"rank", m.adapter().rank}, {"alpha", m.adapter().alpha}, {"count", m.adapter().params.size()}};
  } else {
    header["adapter"] = nullptr;
  }
  const std::string h = header.dump();
  std::string out(kMagic);
  const std::uint64_t len = h.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof(len));
  out += h;
  append_floats(out, m.parameters());
  if (m.has_adapter()) append_floats(out, m.adapter().params);
  return out;
}

ModelCheckpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) fail_data("not a checkpoint file (bad magic)");
  std::size_t pos = kMagic.size();
  std::uint64_t len = 0;
  if (bytes.size() < pos + sizeof(len)) fail_data("checkpoint is truncated");
  std::memcpy(&len, bytes.data() + pos, sizeof(len));
  pos += sizeof(len);
  if (bytes.size() < pos + len) fail_data("checkpoint is truncated");
  json header;
  try {
    header = json::parse(bytes.substr(pos, len));
  } catch (const json::exception& e) {
    fail_data(std::string("malformed checkpoint header: ") + e.what());
  }
  pos += len;

  ModelCheckpoint ckpt;
  ckpt.role = parse_role(header.at("role").get<std::string>());
  ckpt.variant = parse_variant(header.at("variant").get<std::string>());
  ckpt.vocab = parse_vocabulary(header.at("vocabulary").dump());
  if (vocabulary_hash(ckpt.vocab) != header.at("vocabulary_hash").get<std::string>())
    fail_data("checkpoint vocabulary hash mismatch");
  const auto cfg = config_from_json(header.at("config"));
  if (cfg.vocabSize != ckpt.vocab.size()) fail_data("checkpoint vocabulary size does not match model config");
  const auto layout = ParameterLayout::for_config(cfg);
  if (header.at("parameter_count").get<Eigen::Index>() != layout.total)
    fail_data("checkpoint parameter count does not match its config");
  ckpt.model = Transformer<float>(cfg, read_floats(bytes, pos, layout.total));
  if (!header.at("adapter").is_null()) {
    const auto& a = header.at("adapter");
    auto& model = ckpt.model;
    auto adapter = zero_adapter<float>(layout, a.at("rank").get<int>(), a.at("alpha").get<double>());
    const Eigen::Index total = adapter.params.size();
    if (a.at("count").get<Eigen::Index>() != total) fail_data("checkpoint adapter size does not match its rank");
    adapter.params = read_floats(bytes, pos, total);
    model.set_adapter(std::move(adapter));
  }
  if (pos != bytes.size()) fail_data("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) { return parse_checkpoint(read_file(path)); }

std::string checkpoint_hash(const ModelCheckpoint& ckpt) { return sha256_hex(serialize_checkpoint(ckpt)); }

}  // namespace s2st
