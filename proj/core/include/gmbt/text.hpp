#pragma once

#include <string>
#include <string_view>

namespace gmbt {

/// Strips leading and trailing ASCII whitespace.
std::string_view trim(std::string_view text);

/// Collapses internal runs of whitespace to single spaces and trims the ends.
std::string collapse_whitespace(std::string_view text);

/// ASCII lowercase; bytes outside A-Z pass through untouched.
std::string ascii_lower(std::string_view text);

/// collapse_whitespace + ascii_lower, the normal form used for tolerant
/// phrase comparison and state-name identity.
std::string normalize_phrase(std::string_view text);

}  // namespace gmbt
