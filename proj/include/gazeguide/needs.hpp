#pragma once

#include "gazeguide/behavior.hpp"
#include "gazeguide/gaze.hpp"
#include "gazeguide/llm.hpp"
#include "gazeguide/passage.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace gazeguide {

enum class AnalysisMode { Gaze, TextOnly };

std::string_view to_string(AnalysisMode mode);
std::optional<AnalysisMode> parse_analysis_mode(std::string_view s);

enum class EvidenceKind { Fixation, Regression, Offtext, Skip };

std::string_view to_string(EvidenceKind kind);

/// Index into the matching BehaviorReport vector.
struct EvidenceRef {
    EvidenceKind kind = EvidenceKind::Fixation;
    std::size_t index = 0;
    bool operator==(const EvidenceRef&) const = default;
};

struct NeedTarget {
    std::vector<std::size_t> word_indices;
    std::optional<std::size_t> sentence_index;
    bool operator==(const NeedTarget&) const = default;
};

struct NeedHypothesis {
    /// "fix:<surface>", "reg:s<k>", "off:<start_ms>", "skip:s<k>", "rare:s<k>",
    /// "llm:<n>", "text:<n>"; also the ranking's last tie-break.
    std::string need_id;
    std::string description;
    NeedTarget target;
    std::vector<EvidenceRef> evidence;
    double strength = 0;
    std::int64_t last_evidence_ms = 0;

    bool operator==(const NeedHypothesis&) const = default;
};

/// Ranking order: strength desc, last_evidence_ms desc, need_id asc.
bool need_precedes(const NeedHypothesis& a, const NeedHypothesis& b);
void rank_needs(std::vector<NeedHypothesis>& needs);

struct AnalysisResult {
    AnalysisMode mode = AnalysisMode::Gaze;
    std::string observations_text;
    std::vector<NeedHypothesis> need_help;
    /// Hedged opening line, or "none".
    std::string intervention = "none";
    std::int64_t produced_at_ms = 0;

    bool operator==(const AnalysisResult&) const = default;
};

/// Rule backend. Throws PassageMismatch when the report was computed over a
/// different passage.
AnalysisResult infer_needs_rules(const BehaviorReport& report, const PassageModel& passage,
                                 std::int64_t produced_at_ms = 0);

/// What the LLM sees in place of {eye_tracking_wordlist}.
enum class LlmInput { Wordlist, Summary, Both };

std::optional<LlmInput> parse_llm_input(std::string_view s);

std::string build_eye_tracking_prompt(const PassageModel& passage, std::span<const GazeObservation> obs,
                                      const BehaviorReport* report = nullptr,
                                      LlmInput input = LlmInput::Wordlist);
std::string build_text_only_prompt(const PassageModel& passage);
std::string build_realtime_prompt(const PassageModel& passage, std::span<const GazeObservation> obs);

/// Items under the "Need help" heading, split on list markers.
std::vector<std::string> parse_need_help_items(std::string_view reply);
/// The first list after a "struggled with" line; falls back to Need help items.
std::vector<std::string> parse_struggle_items(std::string_view reply);

/// Throws BackendUnavailable after `retries` extra attempts.
AnalysisResult infer_needs_llm(const BehaviorReport& report, std::span<const GazeObservation> obs,
                               const PassageModel& passage, LlmClient& client, int retries = 2,
                               LlmInput input = LlmInput::Wordlist, std::int64_t produced_at_ms = 0);

AnalysisResult infer_needs_text_only(const PassageModel& passage, LlmClient& client, int retries = 2,
                                     std::int64_t produced_at_ms = 0);

/// Deterministic text-only fallback: one hypothesis per content sentence that
/// holds a token found in no other passage of `corpus`.
AnalysisResult infer_needs_text_only_rules(const PassageModel& passage,
                                           std::span<const PassageModel> corpus,
                                           std::int64_t produced_at_ms = 0);

/// Strict parse of a realtime-variant reply: a JSON object with exactly
/// "observations", "need_help" (arrays of strings) and "intervention".
/// Throws SchemaViolation.
AnalysisResult parse_realtime_reply(std::string_view reply, const PassageModel& passage,
                                    std::int64_t produced_at_ms = 0);

AnalysisResult infer_needs_realtime(std::span<const GazeObservation> obs, const PassageModel& passage,
                                    LlmClient& client, int retries = 2, std::int64_t produced_at_ms = 0);

/// Short noun phrase naming what a need is about, for assistant turns.
std::string need_focus(const NeedHypothesis& need, const PassageModel& passage);

/// Hedged proposal ending in a confirmation question.
std::string propose_need(const NeedHypothesis& need, const PassageModel& passage);

/// Best-matching content sentence for free text (most shared content words).
std::optional<std::size_t> locate_sentence(std::string_view description, const PassageModel& passage);

// {"observations":[lines...],"need_help":[...],"intervention":...,"mode":...,"produced_at_ms":...}
std::string analysis_to_json(const AnalysisResult& analysis, int indent = -1);
AnalysisResult analysis_from_json(std::string_view json);

} // namespace gazeguide
