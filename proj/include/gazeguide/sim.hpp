#pragma once

#include "gazeguide/behavior.hpp"
#include "gazeguide/gaze.hpp"
#include "gazeguide/passage.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace gazeguide {

enum class InjectionKind { Fixate, Regress, Offtext, Skip };

std::string_view to_string(InjectionKind kind);

/// One injected behavior. `target` is a word surface for fixate and a sentence
/// index for the others; for offtext it is the sentence the pause follows.
struct InjectedEvent {
    InjectionKind kind = InjectionKind::Fixate;
    std::variant<std::string, std::size_t> target;
    /// looks (fixate, regress) or duration_ms (offtext); unused for skip.
    std::int64_t magnitude = 0;
    /// fixate only: exact look times; each must fall on the sample grid.
    std::vector<std::int64_t> times_ms;
    /// regress only: sentence after which the return happens (default: the last one read).
    std::optional<std::size_t> after_sentence;
    /// offtext only: object region to dwell on; empty means blank space.
    std::string label;

    bool operator==(const InjectedEvent&) const = default;
};

struct ReaderScript {
    std::string passage_id;
    double base_wpm = 200;
    std::vector<InjectedEvent> injected_events;
    std::uint64_t seed = 0;
    std::int64_t sample_period_ms = kDefaultSamplePeriodMs;

    bool operator==(const ReaderScript&) const = default;
};

struct FixationLabel {
    std::string surface;
    int look_count = 0;
    bool operator==(const FixationLabel&) const = default;
};
struct RegressionLabel {
    std::int64_t at_ms = 0;
    std::size_t to_sentence = 0;
    bool operator==(const RegressionLabel&) const = default;
};
struct OffTextLabel {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0;
    std::int64_t duration_ms = 0;
    bool operator==(const OffTextLabel&) const = default;
};
struct SkipLabel {
    std::size_t sentence_index = 0;
    bool operator==(const SkipLabel&) const = default;
};

struct GroundTruthLabels {
    std::string passage_id;
    std::vector<FixationLabel> fixations;
    std::vector<RegressionLabel> regressions;
    std::vector<OffTextLabel> offtext;
    std::vector<SkipLabel> skips;

    std::size_t size() const {
        return fixations.size() + regressions.size() + offtext.size() + skips.size();
    }
    bool operator==(const GroundTruthLabels&) const = default;
};

struct SynthesizedTrace {
    std::vector<GazeSample> samples;
    GroundTruthLabels labels;
};

/// Checks targets and magnitudes against the passage. Throws
/// ScriptTargetMissing or ScriptInvalid.
void validate_script(const ReaderScript& script, const PassageModel& passage,
                     const DetectorParams& params = {});

/// Baseline left-to-right walk over the content sentences, overlaid with the
/// injected events. Each content surface is sampled at most once by the
/// baseline, so the only repeated looks are the injected ones.
SynthesizedTrace synthesize_trace(const ReaderScript& script, const PassageModel& passage,
                                  const LayoutMap& layout, const DetectorParams& params = {});

struct ClassScore {
    double precision = 1.0;
    double recall = 1.0;
    std::size_t predicted = 0;
    std::size_t labeled = 0;
    std::size_t matched = 0;
};

struct DetectorScores {
    ClassScore fixation;
    ClassScore regression;
    ClassScore offtext;
    ClassScore skip;

    bool perfect() const;
};

/// Fixations match on surface, regressions on to_sentence within one sample
/// period, off-text on overlap of at least half the longer event, skips on
/// sentence index. Matching is one-to-one.
DetectorScores score_detectors(const BehaviorReport& predicted, const GroundTruthLabels& labels);

// Script and label files are JSON.
ReaderScript parse_script(std::string_view json);
std::string format_script(const ReaderScript& script);
ReaderScript load_script_file(const std::filesystem::path& path);
GroundTruthLabels parse_labels(std::string_view json);
std::string format_labels(const GroundTruthLabels& labels);
std::string format_scores(const DetectorScores& scores);

/// Hand-written look schedule: one "<seconds> <target>" line per sample,
/// target one of "w:<surface>@<sentence>[#k]", "o:<label>", "none".
struct ScheduleEntry {
    std::int64_t t_ms = 0;
    std::string target;
};

std::vector<ScheduleEntry> parse_schedule(std::string_view contents);

/// Places each schedule entry at the center of its target box.
/// Throws ScriptTargetMissing.
std::vector<GazeSample> realize_schedule(std::span<const ScheduleEntry> schedule,
                                         const PassageModel& passage, const LayoutMap& layout);

/// A point covered by no word box and no object region. Throws ScriptInvalid
/// when the layout leaves no such point.
std::pair<double, double> find_blank_point(const LayoutMap& layout);

} // namespace gazeguide
