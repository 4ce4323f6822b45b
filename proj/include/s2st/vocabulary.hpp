#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "s2st/types.hpp"

namespace s2st {

struct Codebook;
struct SyntheticWorld;

enum class TokenGroup { Special, Task, TextA, TextB, UnitA, UnitB };

std::string_view to_string(TokenGroup g);
TokenGroup parse_token_group(std::string_view s);

struct TokenEntry {
  std::string name;
  TokenGroup group = TokenGroup::Special;
};

namespace tokens {
inline constexpr std::string_view kPad = "<pad>";
inline constexpr std::string_view kEnd = "<end>";
inline constexpr std::string_view kResponse = "<resp>";
inline constexpr std::string_view kModalitySep = "<sep>";
inline constexpr std::string_view kAsr = "<asr>";
inline constexpr std::string_view kS2t = "<s2t>";
inline constexpr std::string_view kS2st = "<s2st>";
}  // namespace tokens

/// Specials, task markers and every word label of the world, in that order.
std::vector<TokenEntry> base_text_tokens(const SyntheticWorld& world);

/// Dense token ids: text/special tokens first, then K_A unit tokens, then K_B unit tokens.
class TokenVocabulary {
 public:
  TokenVocabulary() = default;
  explicit TokenVocabulary(std::vector<TokenEntry> entries);

  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<TokenEntry>& entries() const { return entries_; }
  const TokenEntry& entry(TokenId id) const { return entries_.at(static_cast<std::size_t>(id)); }

  TokenId id(std::string_view name) const;
  std::optional<TokenId> find(std::string_view name) const;

  TokenId pad() const { return pad_; }
  TokenId end() const { return end_; }
  TokenId response() const { return response_; }
  TokenId modality_sep() const { return sep_; }
  TokenId asr() const { return asr_; }
  TokenId s2t() const { return s2t_; }
  TokenId s2st() const { return s2st_; }

  int unit_count(Language l) const { return l == Language::A ? unitCountA_ : unitCountB_; }
  TokenId unit_token(Language l, UnitId u) const;
  /// (language, unit id) when `t` is a unit token.
  std::optional<std::pair<Language, UnitId>> unit_of(TokenId t) const;
  bool is_unit(TokenId t, Language l) const;

  TokenId text_token(Language l, std::string_view label) const;
  std::optional<Language> text_language(TokenId t) const;
  bool is_text(TokenId t, Language l) const;

 private:
  std::vector<TokenEntry> entries_;
  std::unordered_map<std::string, TokenId> byName_;
  TokenId pad_ = -1, end_ = -1, response_ = -1, sep_ = -1, asr_ = -1, s2t_ = -1, s2st_ = -1;
  TokenId unitBaseA_ = -1, unitBaseB_ = -1;
  int unitCountA_ = 0, unitCountB_ = 0;
};

/// Appends one token per unit id of each codebook after the base tokens.
TokenVocabulary extend_vocabulary(const std::vector<TokenEntry>& base, const Codebook& codebookA,
                                  const Codebook& codebookB);

/// Base tokens of `world` extended with its ground-truth alphabets.
TokenVocabulary world_vocabulary(const SyntheticWorld& world);

std::string serialize_vocabulary(const TokenVocabulary& vocab);
TokenVocabulary parse_vocabulary(std::string_view text);

}  // namespace s2st
