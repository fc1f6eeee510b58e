#pragma once

#include <string>
#include <string_view>

namespace blm {

// Cache / matching key: Unicode NFC, trimmed, internal whitespace runs
// collapsed to one ASCII space.
std::string normalize_text(std::string_view text);

// normalize_text followed by Unicode case folding.
std::string casefold(std::string_view text);

std::string collapse_whitespace(std::string_view text);

// Capitalize the first character and terminate with a period.
std::string finish_sentence(std::string_view text);

}  // namespace blm
