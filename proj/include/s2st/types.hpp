#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace s2st {

using UnitId = std::int32_t;
using TokenId = std::int32_t;

/// Sequence of discrete unit ids; the "speech" currency of the pipeline.
using UnitSequence = std::vector<UnitId>;
/// One text label per word.
using LabelSequence = std::vector<std::string>;

/// Rows are frames, columns are feature dimensions.
using FeatureFrames = Eigen::MatrixXd;

enum class Language { A, B };
enum class Direction { A2B, B2A };

inline Language source_language(Direction d) { return d == Direction::A2B ? Language::A : Language::B; }
inline Language target_language(Direction d) { return d == Direction::A2B ? Language::B : Language::A; }
inline Language other(Language l) { return l == Language::A ? Language::B : Language::A; }
inline Direction direction_from(Language source) {
  return source == Language::A ? Direction::A2B : Direction::B2A;
}

/// SFT prompt regime; also recorded in checkpoints since it fixes the response layout.
enum class PromptVariant { Vanilla, TriTask, Chain };

std::string_view to_string(PromptVariant v);
PromptVariant parse_variant(std::string_view s);

std::string_view to_string(Language l);
std::string_view to_string(Direction d);
Language parse_language(std::string_view s);
Direction parse_direction(std::string_view s);

/// Error categories map onto CLI exit codes (usage 1, data 2, runtime 3).
enum class ErrorKind { Usage = 1, Data = 2, Runtime = 3 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) { throw Error(ErrorKind::Usage, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::Data, msg); }
[[noreturn]] inline void fail_runtime(const std::string& msg) { throw Error(ErrorKind::Runtime, msg); }

}  // namespace s2st
