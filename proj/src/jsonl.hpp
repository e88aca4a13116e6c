#pragma once

#include <cstddef>
#include <istream>
#include <string>

#include <json.hpp>

#include "memescore/error.hpp"

namespace memescore::detail {

// Calls fn(json, line_number) for every non-blank line of a JSON-lines
// stream. Parse failures become DataError tagged with the line number.
template <typename Fn>
void for_each_json_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    try {
      fn(record, line_no);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (in.bad()) throw DataError("read failure after line " + std::to_string(line_no));
}

}  // namespace memescore::detail
