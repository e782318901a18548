#pragma once

#include "gazeguide/passage.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gazeguide {

/// One raw gaze point, normalized to the frame.
struct GazeSample {
    std::int64_t t_ms = 0;
    double x = 0;
    double y = 0;
    std::optional<double> confidence;

    bool operator==(const GazeSample&) const = default;
};

enum class ObservationKind { Word, Object, None };

std::string_view to_string(ObservationKind kind);
std::optional<ObservationKind> parse_observation_kind(std::string_view s);

/// What the reader attended to at one tick.
struct GazeObservation {
    ObservationKind kind = ObservationKind::None;
    std::string content;
    std::string context;
    std::int64_t t_ms = 0;
    /// Set when grounding was geometric and landed on a word.
    std::optional<std::size_t> word_index;

    bool operator==(const GazeObservation&) const = default;
};

inline constexpr std::int64_t kDefaultSamplePeriodMs = 500;

/// Append-only, time-ordered observation list for one session. Single writer.
class ActionList {
public:
    explicit ActionList(std::string session_id = {},
                        std::int64_t sample_period_ms = kDefaultSamplePeriodMs);

    const std::string& session_id() const { return session_id_; }
    std::int64_t sample_period_ms() const { return sample_period_ms_; }
    const std::vector<GazeObservation>& observations() const { return observations_; }
    std::size_t size() const { return observations_.size(); }
    bool empty() const { return observations_.empty(); }

    /// Throws OutOfOrderSample when obs.t_ms is earlier than the last entry.
    void append(GazeObservation obs);

    /// Immutable copy for analysis readers.
    std::vector<GazeObservation> snapshot() const { return observations_; }

private:
    std::string session_id_;
    std::int64_t sample_period_ms_;
    std::vector<GazeObservation> observations_;
};

/// Pixel crop handed to an external vision backend.
struct CropRegion {
    double center_x_px = 0;
    double center_y_px = 0;
    int width_px = 200;
    int height_px = 200;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    bool operator==(const CropRegion&) const = default;
};

/// "In the sentence: '<sentence>'" with whitespace collapsed.
std::string sentence_context(const SentenceRef& sentence);

/// Geometric grounding of one sample. Word boxes take precedence over object
/// regions; among overlapping word boxes the nearest center wins, then the
/// lowest word index.
GazeObservation ground_sample(const GazeSample& sample, const LayoutMap& layout,
                              const PassageModel& passage);

/// Parses a grounding backend reply: a JSON object with exactly the fields
/// "type", "content", "context". Throws SchemaViolation; never repairs.
GazeObservation parse_grounding_response(std::string_view raw, std::int64_t t_ms);

/// Crop centered on the gaze point, translated to stay inside the frame.
/// Throws FrameTooSmall.
CropRegion make_crop_spec(const GazeSample& sample, int frame_w, int frame_h, int crop_w = 200,
                          int crop_h = 200);

/// Throws ValidationError for coordinates outside [0,1]^2 or negative time.
void validate_sample(const GazeSample& sample);

/// Grounds and appends. Throws OutOfOrderSample when time goes backwards.
void append_sample(ActionList& list, const GazeSample& sample, const LayoutMap& layout,
                   const PassageModel& passage);

// Wire formats. Trace: {"t_ms","x","y"[,"confidence"]} per line.
// Observation log: {"t_ms","type","content","context"} per line.
std::string format_trace_line(const GazeSample& s);
GazeSample parse_trace_line(std::string_view line);
std::vector<GazeSample> parse_trace(std::string_view contents);
std::string format_trace(std::span<const GazeSample> samples);
std::vector<GazeSample> load_trace_file(const std::filesystem::path& path);

std::string format_observation_line(const GazeObservation& obs);
std::string format_observation_log(std::span<const GazeObservation> obs);
GazeObservation parse_observation_line(std::string_view line);

} // namespace gazeguide
