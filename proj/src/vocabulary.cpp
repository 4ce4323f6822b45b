#include "s2st/vocabulary.hpp"

#include <json.hpp>

#include "s2st/tokenizer.hpp"
#include "s2st/world.hpp"

namespace s2st {

namespace {

constexpr std::string_view kGroupNames[] = {"special", "task", "text_a", "text_b", "unit_a", "unit_b"};

std::string unit_name(Language l, int u) {
  return std::string(l == Language::A ? "<ua_" : "<ub_") + std::to_string(u) + ">";
}

}  // namespace

std::string_view to_string(TokenGroup g) { return kGroupNames[static_cast<int>(g)]; }

TokenGroup parse_token_group(std::string_view s) {
  for (int i = 0; i < 6; ++i)
    if (kGroupNames[i] == s) return static_cast<TokenGroup>(i);
  fail_data("unknown token group '" + std::string(s) + "'");
}

std::vector<TokenEntry> base_text_tokens(const SyntheticWorld& world) {
  std::vector<TokenEntry> base = {
      {std::string(tokens::kPad), TokenGroup::Special},
      {std::string(tokens::kEnd), TokenGroup::Special},
      {std::string(tokens::kResponse), TokenGroup::Special},
      {std::string(tokens::kModalitySep), TokenGroup::Special},
      {std::string(tokens::kAsr), TokenGroup::Task},
      {std::string(tokens::kS2t), TokenGroup::Task},
      {std::string(tokens::kS2st), TokenGroup::Task},
  };
  for (const auto& l : world.lexiconA.labels) base.push_back({l, TokenGroup::TextA});
  for (const auto& l : world.lexiconB.labels) base.push_back({l, TokenGroup::TextB});
  return base;
}

TokenVocabulary::TokenVocabulary(std::vector<TokenEntry> entries) : entries_(std::move(entries)) {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto id = static_cast<TokenId>(i);
    if (!byName_.emplace(entries_[i].name, id).second) fail_data("duplicate token name '" + entries_[i].name + "'");
    const auto g = entries_[i].group;
    if (g == TokenGroup::UnitA) {
      if (unitBaseA_ < 0) unitBaseA_ = id;
      if (id != unitBaseA_ + unitCountA_) fail_data("unit tokens of language A are not contiguous");
      ++unitCountA_;
    } else if (g == TokenGroup::UnitB) {
      if (unitBaseB_ < 0) unitBaseB_ = id;
      if (id != unitBaseB_ + unitCountB_) fail_data("unit tokens of language B are not contiguous");
      ++unitCountB_;
    }
  }
  auto required = [&](std::string_view name) {
    auto f = find(name);
    if (!f) fail_data("vocabulary is missing required token " + std::string(name));
    return *f;
  };
  pad_ = required(tokens::kPad);
  end_ = required(tokens::kEnd);
  response_ = required(tokens::kResponse);
  sep_ = required(tokens::kModalitySep);
  asr_ = required(tokens::kAsr);
  s2t_ = required(tokens::kS2t);
  s2st_ = required(tokens::kS2st);
}

std::optional<TokenId> TokenVocabulary::find(std::string_view name) const {
  auto it = byName_.find(std::string(name));
  if (it == byName_.end()) return std::nullopt;
  return it->second;
}

TokenId TokenVocabulary::id(std::string_view name) const {
  auto f = find(name);
  if (!f) fail_data("unknown token '" + std::string(name) + "'");
  return *f;
}

TokenId TokenVocabulary::unit_token(Language l, UnitId u) const {
  if (u < 0 || u >= unit_count(l))
    fail_data("unit id " + std::to_string(u) + " has no token in language " + std::string(to_string(l)));
  return (l == Language::A ? unitBaseA_ : unitBaseB_) + u;
}

std::optional<std::pair<Language, UnitId>> TokenVocabulary::unit_of(TokenId t) const {
  if (unitCountA_ > 0 && t >= unitBaseA_ && t < unitBaseA_ + unitCountA_) return std::pair{Language::A, t - unitBaseA_};
  if (unitCountB_ > 0 && t >= unitBaseB_ && t < unitBaseB_ + unitCountB_) return std::pair{Language::B, t - unitBaseB_};
  return std::nullopt;
}

bool TokenVocabulary::is_unit(TokenId t, Language l) const {
  auto u = unit_of(t);
  return u && u->first == l;
}

TokenId TokenVocabulary::text_token(Language l, std::string_view label) const {
  auto f = find(label);
  if (!f || text_language(*f) != l)
    fail_data("'" + std::string(label) + "' is not a text token of language " + std::string(to_string(l)));
  return *f;
}

std::optional<Language> TokenVocabulary::text_language(TokenId t) const {
  if (t < 0 || t >= size()) return std::nullopt;
  const auto g = entries_[static_cast<std::size_t>(t)].group;
  if (g == TokenGroup::TextA) return Language::A;
  if (g == TokenGroup::TextB) return Language::B;
  return std::nullopt;
}

bool TokenVocabulary::is_text(TokenId t, Language l) const { return text_language(t) == l; }

TokenVocabulary extend_vocabulary(const std::vector<TokenEntry>& base, const Codebook& codebookA,
                                  const Codebook& codebookB) {
  std::vector<TokenEntry> entries;
  entries.reserve(base.size() + static_cast<std::size_t>(codebookA.size() + codebookB.size()));
  for (const auto& e : base) {
    if (e.group == TokenGroup::UnitA || e.group == TokenGroup::UnitB)
      fail_data("base vocabulary already contains unit token '" + e.name + "'");
    entries.push_back(e);
  }
  for (int u = 0; u < codebookA.size(); ++u) entries.push_back({unit_name(Language::A, u), TokenGroup::UnitA});
  for (int u = 0; u < codebookB.size(); ++u) entries.push_back({unit_name(Language::B, u), TokenGroup::UnitB});
  return TokenVocabulary(std::move(entries));
}

TokenVocabulary world_vocabulary(const SyntheticWorld& world) {
  return extend_vocabulary(base_text_tokens(world), world_codebook(world, Language::A),
                           world_codebook(world, Language::B));
}

std::string serialize_vocabulary(const TokenVocabulary& vocab) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : vocab.entries()) list.push_back({e.name, std::string(to_string(e.group))});
  return nlohmann::json{{"format", "s2st-vocab/1"}, {"tokens", list}}.dump() + "\n";
}

TokenVocabulary parse_vocabulary(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    std::vector<TokenEntry> entries;
    for (const auto& item : doc.at("tokens"))
      entries.push_back({item.at(0).get<std::string>(), parse_token_group(item.at(1).get<std::string>())});
    return TokenVocabulary(std::move(entries));
  } catch (const nlohmann::json::exception& e) {
    fail_data(std::string("malformed vocabulary document: ") + e.what());
  }
}

}  // namespace s2st
