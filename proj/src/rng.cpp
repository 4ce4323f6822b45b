#include "s2st/rng.hpp"

#include "s2st/types.hpp"

namespace s2st {

namespace {

std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> stream) {
  std::uint64_t h = mix(base);
  for (auto s : stream) h = mix(h ^ mix(s + 0x632be59bd9b4e019ULL));
  return h;
}

std::string_view to_string(Language l) { return l == Language::A ? "A" : "B"; }
std::string_view to_string(Direction d) { return d == Direction::A2B ? "A2B" : "B2A"; }

Language parse_language(std::string_view s) {
  if (s == "A" || s == "a") return Language::A;
  if (s == "B" || s == "b") return Language::B;
  fail_usage("unknown language '" + std::string(s) + "' (expected A or B)");
}

Direction parse_direction(std::string_view s) {
  if (s == "A2B" || s == "a2b") return Direction::A2B;
  if (s == "B2A" || s == "b2a") return Direction::B2A;
  fail_usage("unknown direction '" + std::string(s) + "' (expected A2B or B2A)");
}

}  // namespace s2st

namespace s2st {

std::string_view to_string(PromptVariant v) {
  switch (v) {
    case PromptVariant::Vanilla: return "vanilla";
    case PromptVariant::TriTask: return "tri-task";
    case PromptVariant::Chain: return "chain";
  }
  return "?";
}

PromptVariant parse_variant(std::string_view s) {
  if (s == "vanilla") return PromptVariant::Vanilla;
  if (s == "tri-task" || s == "tritask" || s == "tri_task") return PromptVariant::TriTask;
  if (s == "chain" || s == "chain-of-modality") return PromptVariant::Chain;
  fail_usage("unknown prompt variant '" + std::string(s) + "' (expected vanilla, tri-task or chain)");
}

}  // namespace s2st
