#pragma once

#include "gazeguide/gaze.hpp"
#include "gazeguide/passage.hpp"

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace gazeguide {

/// Detector thresholds. The defaults reproduce the worked analyses.
struct DetectorParams {
    int fixation_min_looks = 2;
    int offtext_min_run = 2;
    std::int64_t regression_dedupe_window_ms = 1000;
    std::int64_t sample_period_ms = kDefaultSamplePeriodMs;
    /// Skip "the", "of", ... when grouping fixations.
    bool ignore_function_words = true;

    void validate() const;
    bool operator==(const DetectorParams&) const = default;
};

struct FixationEvent {
    std::string target_surface;
    std::set<std::size_t> word_indices;
    /// Sentence holding most of the looks; unset when the surface is not in the passage.
    std::optional<std::size_t> sentence_index;
    std::vector<std::int64_t> look_times_ms;
    int look_count = 0;

    bool operator==(const FixationEvent&) const = default;
};

struct RegressionEvent {
    std::int64_t at_ms = 0;
    std::size_t from_sentence = 0;
    std::size_t to_sentence = 0;

    bool operator==(const RegressionEvent&) const = default;
};

struct OffTextEvent {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    std::int64_t duration_ms = 0;
    std::string attended_label;

    bool operator==(const OffTextEvent&) const = default;
};

struct SkipEvent {
    std::size_t sentence_index = 0;
    std::string sentence_text;

    bool operator==(const SkipEvent&) const = default;
};

struct BehaviorReport {
    std::string passage_id;
    std::vector<FixationEvent> fixations;
    std::vector<RegressionEvent> regressions;
    std::vector<OffTextEvent> offtext;
    std::vector<SkipEvent> skips;
    std::string rendered_text;
    DetectorParams params_used;

    bool operator==(const BehaviorReport&) const = default;
};

/// Line that render_report() leaves under "# Need help (if any)".
inline constexpr std::string_view kNeedHelpPlaceholder = "(pending need inference)";

/// Word observation mapped to a passage position, or nullopt when the content
/// does not resolve (e.g. a grounding backend named a word not in the text).
std::optional<std::size_t> resolve_observation(const GazeObservation& obs,
                                               const PassageModel& passage);

std::vector<FixationEvent> detect_fixations(std::span<const GazeObservation> obs,
                                            const PassageModel& passage,
                                            const DetectorParams& params = {});

/// Sentence-level returns; instruction (non-content) sentences are ignored.
std::vector<RegressionEvent> detect_regressions(std::span<const GazeObservation> obs,
                                                const PassageModel& passage,
                                                const DetectorParams& params = {});

std::vector<OffTextEvent> detect_offtext(std::span<const GazeObservation> obs,
                                         const DetectorParams& params = {});

/// Content sentences without a single word observation, ascending.
std::vector<SkipEvent> detect_skips(std::span<const GazeObservation> obs,
                                    const PassageModel& passage);

/// Plain-text report with "# Eye tracking" and "# Need help (if any)" sections.
/// Times print as integer seconds; empty classes print explicit negative lines.
std::string render_report_text(const BehaviorReport& events, const PassageModel& passage);

/// Fills rendered_text on a copy of `events`.
BehaviorReport render_report(BehaviorReport events, const PassageModel& passage);

/// All four detectors plus rendering.
BehaviorReport analyze_behavior(std::span<const GazeObservation> obs, const PassageModel& passage,
                                const DetectorParams& params = {});

/// "10s, 47s (twice), 48s (twice), 55s"
std::string format_look_times(std::span<const std::int64_t> times_ms);

// Structured export: {"fixations":[...],"regressions":[...],"offtext":[...],"skips":[...]}.
std::string report_to_json(const BehaviorReport& report, int indent = -1);
BehaviorReport report_from_json(std::string_view json);

} // namespace gazeguide
