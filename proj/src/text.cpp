#include "gazeguide/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <sstream>

namespace gazeguide::text {

namespace {

// Multi-byte UTF-8 punctuation seen in copied prose.
constexpr std::array<std::string_view, 8> kUtf8Punct = {
    "\xE2\x80\x9C", "\xE2\x80\x9D", // curly double quotes
    "\xE2\x80\x98", "\xE2\x80\x99", // curly single quotes
    "\xE2\x80\x94", "\xE2\x80\x93", // em/en dash
    "\xE2\x80\xA6",                 // ellipsis
    "\xC2\xA0",                     // nbsp
};

bool is_ascii_punct(char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::ispunct(u);
}

constexpr std::array<std::string_view, 74> kFunctionWords = {
    "a",     "about", "after", "all",   "also",  "an",    "and",   "any",   "are",   "as",
    "at",    "be",    "because","been", "but",   "by",    "can",   "could", "did",   "do",
    "does",  "each",  "for",   "from",  "had",   "has",   "have",  "he",    "her",   "his",
    "how",   "i",     "if",    "in",    "into",  "is",    "it",    "its",   "may",   "more",
    "most",  "no",    "not",   "of",    "on",    "one",   "or",    "other", "our",   "over",
    "same",  "she",   "so",    "some",  "such",  "than",  "that",  "the",   "their", "them",
    "then",  "there", "these", "they",  "this",  "those", "to",    "was",   "we",    "were",
    "what",  "when",  "which", "with",
};

} // namespace

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
        return c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c);
    });
    return out;
}

std::string trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::string_view strip_punctuation(std::string_view token) {
    bool changed = true;
    while (changed && !token.empty()) {
        changed = false;
        if (is_ascii_punct(token.front())) {
            token.remove_prefix(1);
            changed = true;
            continue;
        }
        for (auto p : kUtf8Punct) {
            if (token.starts_with(p)) {
                token.remove_prefix(p.size());
                changed = true;
                break;
            }
        }
    }
    changed = true;
    while (changed && !token.empty()) {
        changed = false;
        if (is_ascii_punct(token.back())) {
            token.remove_suffix(1);
            changed = true;
            continue;
        }
        for (auto p : kUtf8Punct) {
            if (token.ends_with(p)) {
                token.remove_suffix(p.size());
                changed = true;
                break;
            }
        }
    }
    return token;
}

std::string normalize_surface(std::string_view token) {
    return to_lower(strip_punctuation(token));
}

std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string tok;
    while (in >> tok) out.push_back(std::move(tok));
    return out;
}

std::size_t word_count(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (unsigned char c : s) {
        if (std::isspace(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

std::vector<std::string> normalized_tokens(std::string_view s) {
    std::vector<std::string> out;
    for (const auto& tok : split_whitespace(s)) {
        auto n = normalize_surface(tok);
        if (!n.empty()) out.push_back(std::move(n));
    }
    return out;
}

bool is_function_word(std::string_view normalized) {
    return std::find(kFunctionWords.begin(), kFunctionWords.end(), normalized) !=
           kFunctionWords.end();
}

bool is_content_word(std::string_view normalized) {
    return normalized.size() >= 3 && !is_function_word(normalized);
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    return to_lower(haystack).find(to_lower(needle)) != std::string::npos;
}

bool starts_with_ci(std::string_view s, std::string_view prefix) {
    return s.size() >= prefix.size() && to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

std::string truncate_words(std::string_view s, std::size_t max_words) {
    auto words = split_whitespace(s);
    if (words.size() <= max_words) return trim(s);
    std::string out;
    for (std::size_t i = 0; i < max_words; ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    while (!out.empty() && is_ascii_punct(out.back())) out.pop_back();
    return out + "...";
}

} // namespace gazeguide::text
