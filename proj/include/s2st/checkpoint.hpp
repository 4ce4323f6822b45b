#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "s2st/model.hpp"
#include "s2st/vocabulary.hpp"

namespace s2st {

enum class Role { Base, SFT, PO };
std::string_view to_string(Role r);
Role parse_role(std::string_view s);

/// Model parameters plus everything needed to use them: vocabulary, prompt
/// variant and the stage that produced them.
struct ModelCheckpoint {
  Role role = Role::Base;
  PromptVariant variant = PromptVariant::Vanilla;
  TokenVocabulary vocab;
  Transformer<float> model;
};

/// Fresh base checkpoint; cfg.vocabSize is taken from the vocabulary.
ModelCheckpoint init_checkpoint(ModelConfig cfg, TokenVocabulary vocab, PromptVariant variant);

/// Magic line, length-prefixed JSON header, then raw little-endian float32 tensors in layout order
/// (followed by adapter factors when present).
std::string serialize_checkpoint(const ModelCheckpoint& ckpt);
ModelCheckpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path);
ModelCheckpoint load_checkpoint(const std::filesystem::path& path);

/// SHA-256 of the serialized checkpoint.
std::string checkpoint_hash(const ModelCheckpoint& ckpt);
std::string vocabulary_hash(const TokenVocabulary& vocab);

}  // namespace s2st
