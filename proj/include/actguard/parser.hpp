#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "actguard/action.hpp"
#include "actguard/error.hpp"

namespace actguard {

/// One agent completion split into its thought and its (pre-normalization) action.
struct ParsedOutput {
  std::optional<std::string> thought;
  Action action;
  DialectId dialect = DialectId::QwenToolCall;
  std::string raw_text;
  // Non-fatal notes, e.g. "multiple actions; using the first".
  std::vector<std::string> warnings;

  bool operator==(const ParsedOutput&) const = default;
};

// Throws ParseError{offset, reason}. Never aborts on arbitrary input.
ParsedOutput parse(std::string_view text, DialectId dialect);

using ParseResult = std::variant<ParsedOutput, ParseError>;
ParseResult try_parse(std::string_view text, DialectId dialect);

/// "step k: <thought or actor_set(action)>"; `k` is 1-based.
std::string render_history_entry(const ParsedOutput& p, int k);

/// Newline-joined history slot; empty list yields "".
std::string render_history(const std::vector<std::string>& entries);

}  // namespace actguard
