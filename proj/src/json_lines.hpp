#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "s2st/types.hpp"

namespace s2st::detail {

/// Calls fn(json) for every non-empty line; parse and schema errors name the line.
template <class Fn>
void for_each_json_line(std::string_view text, Fn&& fn) {
  std::size_t lineNo = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    ++lineNo;
    if (!line.empty()) {
      try {
        fn(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        fail_data("malformed record on line " + std::to_string(lineNo) + ": " + e.what());
      }
    }
    start = end + 1;
  }
}

}  // namespace s2st::detail
