#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gazeguide::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

/// Strips leading/trailing punctuation (ASCII plus common UTF-8 quotes and
/// dashes) but keeps inner characters such as the hyphen in "hidden-variable".
std::string_view strip_punctuation(std::string_view token);

/// Lowercased, punctuation-stripped key used for every case-insensitive
/// surface comparison ("Theorem." and "theorem" share a key).
std::string normalize_surface(std::string_view token);

std::vector<std::string> split_whitespace(std::string_view s);

/// Whitespace-token count.
std::size_t word_count(std::string_view s);

/// Normalized non-empty tokens of a free-text string.
std::vector<std::string> normalized_tokens(std::string_view s);

/// English function words ("the", "of", "that" ...). Repeated looks at them
/// carry no signal, so the fixation detector ignores them by default.
bool is_function_word(std::string_view normalized);

/// A token worth matching on: at least three characters and not a function word.
bool is_content_word(std::string_view normalized);

bool contains_ci(std::string_view haystack, std::string_view needle);
bool starts_with_ci(std::string_view s, std::string_view prefix);

/// Truncates to at most `max_words` whitespace tokens, appending "..." when cut.
std::string truncate_words(std::string_view s, std::size_t max_words);

} // namespace gazeguide::text
