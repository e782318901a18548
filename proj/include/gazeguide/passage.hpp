#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gazeguide {

/// Half-open byte range [start, end) into a passage's raw text.
struct CharSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - start; }
    bool operator==(const CharSpan&) const = default;
};

struct SentenceRef {
    std::size_t sentence_index = 0;
    CharSpan span;
    std::string text;
    std::size_t first_word = 0;
    std::size_t word_count = 0;
    /// False for on-screen instruction lines; those are not reading material.
    bool content = true;

    bool operator==(const SentenceRef&) const = default;
};

struct WordRef {
    std::size_t word_index = 0;
    std::size_t sentence_index = 0;
    /// Token with surrounding punctuation stripped.
    std::string surface;
    /// Full whitespace-delimited token, punctuation included.
    CharSpan char_span;

    bool operator==(const WordRef&) const = default;
};

/// Immutable, indexed reading passage. Build with index_passage().
class PassageModel {
public:
    const std::string& passage_id() const { return passage_id_; }
    const std::string& title() const { return title_; }
    const std::string& raw_text() const { return raw_text_; }
    const std::vector<SentenceRef>& sentences() const { return sentences_; }
    const std::vector<WordRef>& words() const { return words_; }

    std::size_t sentence_count() const { return sentences_.size(); }
    std::size_t word_count() const { return words_.size(); }

    const SentenceRef& sentence(std::size_t i) const { return sentences_.at(i); }
    const WordRef& word(std::size_t i) const { return words_.at(i); }
    const SentenceRef& sentence_of_word(std::size_t w) const {
        return sentences_.at(words_.at(w).sentence_index);
    }

    /// Word indices whose normalized surface equals normalize_surface(surface).
    std::vector<std::size_t> find_surface(std::string_view surface) const;

    /// Resolves a grounded word to a word index: exact surface match, preferring
    /// the occurrence whose sentence text appears inside `context`.
    std::optional<std::size_t> resolve_word(std::string_view surface,
                                            std::string_view context = {}) const;

    /// The body text without the non-content (instruction) tail.
    std::string content_text() const;

    bool operator==(const PassageModel&) const = default;

private:
    friend PassageModel index_passage(std::string raw_text, std::string title,
                                      std::string passage_id, std::size_t non_content_from);

    std::string passage_id_;
    std::string title_;
    std::string raw_text_;
    std::vector<SentenceRef> sentences_;
    std::vector<WordRef> words_;
};

inline constexpr std::size_t kAllContent = std::numeric_limits<std::size_t>::max();

/// Segments on terminal punctuation (. ! ?) followed by whitespace or end of
/// text, and on paragraph breaks (a blank line), which is what turns a heading
/// line into its own sentence. Sentences starting at or after byte offset
/// `non_content_from` are flagged as non-content. Throws EmptyPassage.
PassageModel index_passage(std::string raw_text, std::string title,
                           std::string passage_id = {},
                           std::size_t non_content_from = kAllContent);

/// Lowercase ASCII slug of a title ("Plate Tectonics" -> "plate-tectonics").
std::string slugify(std::string_view title);

/// Passage file: first line title, blank line, body. An optional trailing
/// block after a line containing only "---" holds on-screen instructions.
PassageModel parse_passage_file(std::string_view contents, std::string passage_id = {});
PassageModel load_passage_file(const std::filesystem::path& path);

/// Every *.txt passage in a directory, sorted by file name.
std::vector<PassageModel> load_passage_dir(const std::filesystem::path& dir);

/// Axis-aligned box in normalized [0,1]^2 frame coordinates (closed).
struct Box {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
    double center_x() const { return 0.5 * (x0 + x1); }
    double center_y() const { return 0.5 * (y0 + y1); }
    double area() const { return (x1 - x0) * (y1 - y0); }
    bool operator==(const Box&) const = default;
};

struct ObjectRegion {
    std::string label;
    std::string description;
    Box box;

    bool operator==(const ObjectRegion&) const = default;
};

struct LayoutMap {
    int frame_width_px = 2880;
    int frame_height_px = 2880;
    /// Indexed by word_index.
    std::vector<Box> word_boxes;
    std::vector<ObjectRegion> object_regions;

    bool operator==(const LayoutMap&) const = default;
};

/// Left-to-right, top-to-bottom equal cells. Throws CapacityError.
LayoutMap make_grid_layout(const PassageModel& passage, int columns, int rows);

/// Twelve-column grid with an empty spare row and a "monitor bezel" region
/// along the bottom edge. Used when a session registers no layout of its own.
LayoutMap make_default_layout(const PassageModel& passage);

/// Checks totality against the passage and that all boxes lie in [0,1]^2.
void validate_layout(const LayoutMap& layout, const PassageModel& passage);

/// Layout file, one record per line:
///   frame,<width_px>,<height_px>
///   <word_index>,<x0>,<y0>,<x1>,<y1>
///   object,<label>,<x0>,<y0>,<x1>,<y1>[,<description>]
/// Blank lines and '#' comments are ignored; whitespace may replace commas in
/// word records.
LayoutMap parse_layout(std::string_view contents);
std::string format_layout(const LayoutMap& layout);
LayoutMap load_layout_file(const std::filesystem::path& path);

} // namespace gazeguide
