#include "gazeguide/gaze.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace gazeguide {

using ojson = nlohmann::ordered_json;

std::string_view to_string(ObservationKind kind) {
    switch (kind) {
    case ObservationKind::Word: return "word";
    case ObservationKind::Object: return "object";
    case ObservationKind::None: return "none";
    }
    return "none";
}

std::optional<ObservationKind> parse_observation_kind(std::string_view s) {
    if (s == "word") return ObservationKind::Word;
    if (s == "object") return ObservationKind::Object;
    if (s == "none") return ObservationKind::None;
    return std::nullopt;
}

ActionList::ActionList(std::string session_id, std::int64_t sample_period_ms)
    : session_id_(std::move(session_id)), sample_period_ms_(sample_period_ms) {
    if (sample_period_ms_ <= 0) throw ValidationError("sample_period_ms must be positive");
}

void ActionList::append(GazeObservation obs) {
    if (!observations_.empty() && obs.t_ms < observations_.back().t_ms) {
        throw OutOfOrderSample("sample at t=" + std::to_string(obs.t_ms) +
                               " ms follows t=" + std::to_string(observations_.back().t_ms) + " ms");
    }
    observations_.push_back(std::move(obs));
}

std::string sentence_context(const SentenceRef& sentence) {
    std::string collapsed;
    for (const auto& w : text::split_whitespace(sentence.text)) {
        if (!collapsed.empty()) collapsed += ' ';
        collapsed += w;
    }
    return "In the sentence: '" + collapsed + "'";
}

GazeObservation ground_sample(const GazeSample& sample, const LayoutMap& layout,
                              const PassageModel& passage) {
    GazeObservation obs;
    obs.t_ms = sample.t_ms;

    std::optional<std::size_t> best;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < layout.word_boxes.size(); ++i) {
        const auto& b = layout.word_boxes[i];
        if (!b.contains(sample.x, sample.y)) continue;
        double dx = sample.x - b.center_x();
        double dy = sample.y - b.center_y();
        double d2 = dx * dx + dy * dy;
        if (d2 < best_d2) { // strict: ties keep the lower index
            best_d2 = d2;
            best = i;
        }
    }
    if (best && *best < passage.word_count()) {
        const auto& w = passage.word(*best);
        obs.kind = ObservationKind::Word;
        obs.content = w.surface;
        obs.context = sentence_context(passage.sentence(w.sentence_index));
        obs.word_index = *best;
        return obs;
    }
    for (const auto& r : layout.object_regions) {
        if (r.box.contains(sample.x, sample.y)) {
            obs.kind = ObservationKind::Object;
            obs.content = r.label;
            obs.context = r.description;
            return obs;
        }
    }
    obs.kind = ObservationKind::None;
    return obs;
}

GazeObservation parse_grounding_response(std::string_view raw, std::int64_t t_ms) {
    ojson j;
    try {
        j = ojson::parse(raw);
    } catch (const ojson::parse_error& e) {
        throw SchemaViolation(std::string("grounding reply is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaViolation("grounding reply must be a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (key != "type" && key != "content" && key != "context")
            throw SchemaViolation("unexpected field '" + key + "' in grounding reply");
    }
    for (const char* key : {"type", "content", "context"}) {
        if (!j.contains(key)) throw SchemaViolation(std::string("missing field '") + key + "'");
        if (!j[key].is_string()) throw SchemaViolation(std::string("field '") + key + "' must be a string");
    }
    auto kind = parse_observation_kind(j["type"].get<std::string>());
    if (!kind) throw SchemaViolation("unknown type '" + j["type"].get<std::string>() + "'");

    GazeObservation obs;
    obs.kind = *kind;
    obs.content = j["content"].get<std::string>();
    obs.context = j["context"].get<std::string>();
    obs.t_ms = t_ms;
    if (obs.kind == ObservationKind::None && (!obs.content.empty() || !obs.context.empty()))
        throw SchemaViolation("type 'none' must carry empty content and context");
    if (obs.kind != ObservationKind::None && text::trim(obs.content).empty())
        throw SchemaViolation("type '" + std::string(to_string(obs.kind)) + "' needs content");
    return obs;
}

CropRegion make_crop_spec(const GazeSample& sample, int frame_w, int frame_h, int crop_w,
                          int crop_h) {
    if (frame_w <= 0 || frame_h <= 0) throw ValidationError("frame dimensions must be positive");
    if (crop_w <= 0 || crop_h <= 0) throw ValidationError("crop dimensions must be positive");
    if (frame_w < crop_w || frame_h < crop_h)
        throw FrameTooSmall("frame " + std::to_string(frame_w) + "x" + std::to_string(frame_h) +
                            " is smaller than the " + std::to_string(crop_w) + "x" +
                            std::to_string(crop_h) + " crop");
    CropRegion c;
    c.center_x_px = sample.x * frame_w;
    c.center_y_px = sample.y * frame_h;
    c.width_px = crop_w;
    c.height_px = crop_h;
    auto place = [](double center, int size, int frame) {
        auto lo = static_cast<int>(std::lround(center - size / 2.0));
        return std::clamp(lo, 0, frame - size);
    };
    c.x0 = place(c.center_x_px, crop_w, frame_w);
    c.y0 = place(c.center_y_px, crop_h, frame_h);
    c.x1 = c.x0 + crop_w;
    c.y1 = c.y0 + crop_h;
    return c;
}

void validate_sample(const GazeSample& s) {
    auto in_unit = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
    if (!in_unit(s.x) || !in_unit(s.y))
        throw ValidationError("gaze sample at t=" + std::to_string(s.t_ms) +
                              " ms lies outside [0,1]^2");
    if (s.t_ms < 0) throw ValidationError("gaze sample has negative t_ms");
    if (s.confidence && !(*s.confidence >= 0.0 && *s.confidence <= 1.0))
        throw ValidationError("gaze confidence must lie in [0,1]");
}

void append_sample(ActionList& list, const GazeSample& sample, const LayoutMap& layout,
                   const PassageModel& passage) {
    validate_sample(sample);
    if (!list.empty() && sample.t_ms < list.observations().back().t_ms) {
        throw OutOfOrderSample("sample at t=" + std::to_string(sample.t_ms) + " ms follows t=" +
                               std::to_string(list.observations().back().t_ms) + " ms");
    }
    list.append(ground_sample(sample, layout, passage));
}

std::string format_trace_line(const GazeSample& s) {
    ojson j;
    j["t_ms"] = s.t_ms;
    j["x"] = s.x;
    j["y"] = s.y;
    if (s.confidence) j["confidence"] = *s.confidence;
    return j.dump();
}

GazeSample parse_trace_line(std::string_view line) {
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const ojson::parse_error& e) {
        throw ValidationError(std::string("trace line is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("t_ms") || !j.contains("x") || !j.contains("y") ||
        !j["t_ms"].is_number_integer() || !j["x"].is_number() || !j["y"].is_number())
        throw ValidationError("trace line needs integer t_ms and numeric x, y: " + std::string(line));
    GazeSample s;
    s.t_ms = j["t_ms"].get<std::int64_t>();
    s.x = j["x"].get<double>();
    s.y = j["y"].get<double>();
    if (j.contains("confidence")) {
        if (!j["confidence"].is_number()) throw ValidationError("confidence must be numeric");
        s.confidence = j["confidence"].get<double>();
    }
    return s;
}

std::vector<GazeSample> parse_trace(std::string_view contents) {
    std::vector<GazeSample> out;
    std::istringstream in{std::string(contents)};
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        out.push_back(parse_trace_line(line));
    }
    return out;
}

std::string format_trace(std::span<const GazeSample> samples) {
    std::string out;
    for (const auto& s : samples) {
        out += format_trace_line(s);
        out += '\n';
    }
    return out;
}

std::vector<GazeSample> load_trace_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open trace file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_trace(ss.str());
}

std::string format_observation_line(const GazeObservation& obs) {
    ojson j;
    j["t_ms"] = obs.t_ms;
    j["type"] = std::string(to_string(obs.kind));
    j["content"] = obs.content;
    j["context"] = obs.context;
    return j.dump();
}

std::string format_observation_log(std::span<const GazeObservation> obs) {
    std::string out;
    for (const auto& o : obs) {
        out += format_observation_line(o);
        out += '\n';
    }
    return out;
}

GazeObservation parse_observation_line(std::string_view line) {
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const ojson::parse_error& e) {
        throw SchemaViolation(std::string("observation line is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("t_ms") || !j["t_ms"].is_number_integer())
        throw SchemaViolation("observation line needs integer t_ms");
    auto t = j["t_ms"].get<std::int64_t>();
    j.erase("t_ms");
    return parse_grounding_response(j.dump(), t);
}

} // namespace gazeguide
