#include "gazeguide/passage.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace gazeguide {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }

// Characters that may trail a terminator and still belong to the sentence.
std::size_t closing_run(std::string_view s, std::size_t i) {
    for (;;) {
        if (i < s.size() && (s[i] == '"' || s[i] == '\'' || s[i] == ')' || s[i] == ']' ||
                             is_terminal(s[i]))) {
            ++i;
        } else if (s.substr(i).starts_with("\xE2\x80\x9D") || s.substr(i).starts_with("\xE2\x80\x99")) {
            i += 3;
        } else {
            return i;
        }
    }
}

// True when position i (a '\n') starts a blank line, i.e. a paragraph break.
bool paragraph_break_at(std::string_view s, std::size_t i) {
    std::size_t j = i + 1;
    while (j < s.size() && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
    return j < s.size() && s[j] == '\n';
}

std::vector<CharSpan> candidate_spans(std::string_view s) {
    std::vector<CharSpan> spans;
    std::size_t i = 0;
    const std::size_t n = s.size();
    while (i < n) {
        while (i < n && is_space(s[i])) ++i;
        if (i >= n) break;
        std::size_t start = i;
        std::size_t end = n;
        while (i < n) {
            if (is_terminal(s[i])) {
                std::size_t j = closing_run(s, i);
                if (j >= n || is_space(s[j])) {
                    end = j;
                    i = j;
                    break;
                }
                i = j;
                continue;
            }
            if (s[i] == '\n' && paragraph_break_at(s, i)) {
                end = i;
                while (end > start && is_space(s[end - 1])) --end;
                break;
            }
            ++i;
        }
        if (i >= n && end == n) {
            while (end > start && is_space(s[end - 1])) --end;
        }
        spans.push_back({start, end});
    }
    return spans;
}

struct Token {
    CharSpan span;
    std::string surface;
};

std::vector<Token> tokenize(std::string_view s, CharSpan within) {
    std::vector<Token> out;
    std::size_t i = within.start;
    while (i < within.end) {
        while (i < within.end && is_space(s[i])) ++i;
        if (i >= within.end) break;
        std::size_t b = i;
        while (i < within.end && !is_space(s[i])) ++i;
        auto tok = s.substr(b, i - b);
        auto surface = text::strip_punctuation(tok);
        if (!surface.empty()) out.push_back({{b, i}, std::string(surface)});
    }
    return out;
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    bool pending = false;
    for (char c : s) {
        if (is_space(c)) {
            pending = !out.empty();
        } else {
            if (pending) out += ' ';
            pending = false;
            out += c;
        }
    }
    return out;
}

double parse_double(std::string_view field, std::string_view line) {
    auto t = text::trim(field);
    try {
        std::size_t pos = 0;
        double v = std::stod(t, &pos);
        if (pos != t.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ValidationError("layout: bad number '" + t + "' in line: " + std::string(line));
    }
}

std::vector<std::string> split_fields(std::string_view line, bool allow_space) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',' || (allow_space && is_space(c))) {
            if (allow_space && is_space(c) && cur.empty()) continue;
            out.push_back(text::trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty() || (!line.empty() && line.back() == ',')) out.push_back(text::trim(cur));
    return out;
}

} // namespace

std::vector<std::size_t> PassageModel::find_surface(std::string_view surface) const {
    auto key = text::normalize_surface(surface);
    std::vector<std::size_t> out;
    if (key.empty()) return out;
    for (const auto& w : words_) {
        if (text::to_lower(w.surface) == key) out.push_back(w.word_index);
    }
    return out;
}

std::optional<std::size_t> PassageModel::resolve_word(std::string_view surface,
                                                      std::string_view context) const {
    auto hits = find_surface(surface);
    if (hits.empty()) return std::nullopt;
    if (hits.size() == 1 || context.empty()) return hits.front();
    auto ctx = text::to_lower(collapse_whitespace(context));
    for (auto w : hits) {
        auto sent = text::to_lower(collapse_whitespace(sentence_of_word(w).text));
        if (ctx.find(sent) != std::string::npos) return w;
    }
    // Partial contexts ("In the sentence: 'Quantum is...'") match on a prefix.
    for (auto w : hits) {
        auto sent = text::to_lower(collapse_whitespace(sentence_of_word(w).text));
        auto head = sent.substr(0, std::min<std::size_t>(sent.size(), 24));
        if (head.size() >= 8 && ctx.find(head) != std::string::npos) return w;
    }
    return hits.front();
}

std::string PassageModel::content_text() const {
    std::size_t end = raw_text_.size();
    for (const auto& s : sentences_) {
        if (!s.content) {
            end = s.span.start;
            break;
        }
    }
    return text::trim(std::string_view(raw_text_).substr(0, end));
}

PassageModel index_passage(std::string raw_text, std::string title, std::string passage_id,
                           std::size_t non_content_from) {
    if (text::trim(raw_text).empty()) throw EmptyPassage("passage text is empty");

    PassageModel p;
    p.raw_text_ = std::move(raw_text);
    p.title_ = std::move(title);
    p.passage_id_ = passage_id.empty() ? slugify(p.title_) : std::move(passage_id);
    const std::string_view s = p.raw_text_;

    // Word-less fragments (e.g. a stray "...") are folded into the next sentence,
    // or into the previous one at the end of the text.
    auto spans = candidate_spans(s);
    std::vector<std::pair<CharSpan, std::vector<Token>>> merged;
    std::optional<std::size_t> carry_start;
    for (const auto& span : spans) {
        CharSpan sp = span;
        if (carry_start) sp.start = *carry_start;
        auto toks = tokenize(s, sp);
        if (toks.empty()) {
            carry_start = sp.start;
            continue;
        }
        carry_start.reset();
        merged.emplace_back(sp, std::move(toks));
    }
    if (merged.empty()) throw EmptyPassage("no word tokens in passage");
    if (carry_start) merged.back().first.end = spans.back().end;

    for (auto& [span, toks] : merged) {
        SentenceRef ref;
        ref.sentence_index = p.sentences_.size();
        ref.span = span;
        ref.text = std::string(s.substr(span.start, span.size()));
        ref.first_word = p.words_.size();
        ref.word_count = toks.size();
        ref.content = span.start < non_content_from;
        for (auto& t : toks) {
            p.words_.push_back({p.words_.size(), ref.sentence_index, std::move(t.surface), t.span});
        }
        p.sentences_.push_back(std::move(ref));
    }
    return p;
}

std::string slugify(std::string_view title) {
    std::string out;
    bool dash = false;
    for (unsigned char c : title) {
        if (std::isalnum(c) && c < 0x80) {
            if (dash && !out.empty()) out += '-';
            out += static_cast<char>(std::tolower(c));
            dash = false;
        } else {
            dash = true;
        }
    }
    return out.empty() ? "passage" : out;
}

PassageModel parse_passage_file(std::string_view contents, std::string passage_id) {
    std::string data(contents);
    data.erase(std::remove(data.begin(), data.end(), '\r'), data.end());
    auto nl = data.find('\n');
    std::string title = text::trim(data.substr(0, nl));
    if (title.empty()) throw ValidationError("passage file: first line must hold the title");
    std::string rest = nl == std::string::npos ? std::string{} : data.substr(nl + 1);
    auto nl2 = rest.find('\n');
    if (text::trim(rest.substr(0, nl2)) != "")
        throw ValidationError("passage file: expected a blank line after the title");
    std::string body = nl2 == std::string::npos ? std::string{} : rest.substr(nl2 + 1);

    std::string content = body;
    std::string instructions;
    std::istringstream lines(body);
    std::string line;
    std::size_t offset = 0;
    while (std::getline(lines, line)) {
        if (text::trim(line) == "---") {
            content = body.substr(0, offset);
            instructions = body.substr(std::min(body.size(), offset + line.size() + 1));
            break;
        }
        offset += line.size() + 1;
    }

    std::string raw = text::trim(content);
    std::size_t non_content_from = kAllContent;
    auto instr = text::trim(instructions);
    if (!instr.empty()) {
        raw += "\n\n";
        non_content_from = raw.size();
        raw += instr;
    }
    if (passage_id.empty()) passage_id = slugify(title);
    return index_passage(std::move(raw), std::move(title), std::move(passage_id), non_content_from);
}

PassageModel load_passage_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open passage file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_passage_file(ss.str(), path.stem().string());
}

std::vector<PassageModel> load_passage_dir(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<PassageModel> out;
    for (const auto& f : files) out.push_back(load_passage_file(f));
    return out;
}

LayoutMap make_grid_layout(const PassageModel& passage, int columns, int rows) {
    if (columns <= 0 || rows <= 0)
        throw CapacityError("grid dimensions must be positive");
    const auto cells = static_cast<std::size_t>(columns) * static_cast<std::size_t>(rows);
    if (cells < passage.word_count())
        throw CapacityError("grid " + std::to_string(columns) + "x" + std::to_string(rows) +
                            " cannot hold " + std::to_string(passage.word_count()) + " words");
    LayoutMap layout;
    layout.word_boxes.reserve(passage.word_count());
    for (std::size_t i = 0; i < passage.word_count(); ++i) {
        auto c = static_cast<double>(i % static_cast<std::size_t>(columns));
        auto r = static_cast<double>(i / static_cast<std::size_t>(columns));
        layout.word_boxes.push_back({c / columns, r / rows, (c + 1) / columns, (r + 1) / rows});
    }
    return layout;
}

LayoutMap make_default_layout(const PassageModel& passage) {
    constexpr int columns = 12;
    const int rows = static_cast<int>((passage.word_count() + columns - 1) / columns) + 2;
    auto layout = make_grid_layout(passage, columns, rows);
    const double top = static_cast<double>(rows - 1) / rows;
    layout.object_regions.push_back({"monitor bezel", "edge of the display", {0.0, top, 1.0, 1.0}});
    return layout;
}

void validate_layout(const LayoutMap& layout, const PassageModel& passage) {
    if (layout.frame_width_px <= 0 || layout.frame_height_px <= 0)
        throw ValidationError("layout: frame dimensions must be positive");
    if (layout.word_boxes.size() != passage.word_count())
        throw ValidationError("layout: expected " + std::to_string(passage.word_count()) +
                              " word boxes, got " + std::to_string(layout.word_boxes.size()));
    auto in_unit = [](const Box& b) {
        return b.x0 >= 0 && b.y0 >= 0 && b.x1 <= 1 && b.y1 <= 1 && b.x0 <= b.x1 && b.y0 <= b.y1;
    };
    for (std::size_t i = 0; i < layout.word_boxes.size(); ++i) {
        if (!in_unit(layout.word_boxes[i]))
            throw ValidationError("layout: box for word " + std::to_string(i) + " outside [0,1]^2");
    }
    for (const auto& r : layout.object_regions) {
        if (!in_unit(r.box)) throw ValidationError("layout: region '" + r.label + "' outside [0,1]^2");
    }
}

LayoutMap parse_layout(std::string_view contents) {
    LayoutMap layout;
    layout.word_boxes.clear();
    std::vector<std::optional<Box>> boxes;
    std::istringstream in{std::string(contents)};
    std::string raw;
    while (std::getline(in, raw)) {
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') continue;
        if (line.starts_with("frame")) {
            auto f = split_fields(line, false);
            if (f.size() != 3) throw ValidationError("layout: bad frame record: " + line);
            layout.frame_width_px = static_cast<int>(parse_double(f[1], line));
            layout.frame_height_px = static_cast<int>(parse_double(f[2], line));
            continue;
        }
        if (line.starts_with("object")) {
            auto f = split_fields(line, false);
            if (f.size() < 6) throw ValidationError("layout: bad object record: " + line);
            ObjectRegion r;
            r.label = f[1];
            r.box = {parse_double(f[2], line), parse_double(f[3], line), parse_double(f[4], line),
                     parse_double(f[5], line)};
            for (std::size_t k = 6; k < f.size(); ++k) {
                if (k > 6) r.description += ", ";
                r.description += f[k];
            }
            layout.object_regions.push_back(std::move(r));
            continue;
        }
        auto f = split_fields(line, true);
        if (f.size() != 5) throw ValidationError("layout: expected 5 fields: " + line);
        std::size_t idx = 0;
        auto [ptr, ec] = std::from_chars(f[0].data(), f[0].data() + f[0].size(), idx);
        if (ec != std::errc{} || ptr != f[0].data() + f[0].size())
            throw ValidationError("layout: bad word index in line: " + line);
        if (idx >= boxes.size()) boxes.resize(idx + 1);
        if (boxes[idx]) throw ValidationError("layout: duplicate box for word " + f[0]);
        boxes[idx] = Box{parse_double(f[1], line), parse_double(f[2], line),
                         parse_double(f[3], line), parse_double(f[4], line)};
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        if (!boxes[i]) throw ValidationError("layout: missing box for word " + std::to_string(i));
        layout.word_boxes.push_back(*boxes[i]);
    }
    return layout;
}

std::string format_layout(const LayoutMap& layout) {
    std::ostringstream out;
    out.precision(17);
    out << "frame," << layout.frame_width_px << ',' << layout.frame_height_px << '\n';
    for (std::size_t i = 0; i < layout.word_boxes.size(); ++i) {
        const auto& b = layout.word_boxes[i];
        out << i << ',' << b.x0 << ',' << b.y0 << ',' << b.x1 << ',' << b.y1 << '\n';
    }
    for (const auto& r : layout.object_regions) {
        out << "object," << r.label << ',' << r.box.x0 << ',' << r.box.y0 << ',' << r.box.x1 << ','
            << r.box.y1;
        if (!r.description.empty()) out << ',' << r.description;
        out << '\n';
    }
    return out.str();
}

LayoutMap load_layout_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open layout file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_layout(ss.str());
}

} // namespace gazeguide
