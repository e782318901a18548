#pragma once

#include "gazeguide/llm.hpp"
#include "gazeguide/needs.hpp"
#include "gazeguide/passage.hpp"
#include "gazeguide/session.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gazeguide {

enum class ResponseKind { Binary, NestedNeeds };

struct ClassifierSpec {
    std::string name;
    std::string description;
    std::string example;
    ResponseKind response_kind = ResponseKind::Binary;
    /// Value labels for "0" and "1" (binary only).
    std::string label0;
    std::string label1;
    /// The nested classifier's response_format block, serialized.
    std::string response_format;

    bool operator==(const ClassifierSpec&) const = default;
};

struct JudgeRegistry {
    /// In file order: nested block first, then the binary behaviors.
    std::vector<ClassifierSpec> classifiers;

    const ClassifierSpec* find(std::string_view name) const;
    std::vector<std::string> names() const;
};

/// Throws SchemaViolation.
JudgeRegistry parse_registry(std::string_view json);
JudgeRegistry load_registry(const std::filesystem::path& path);

struct NeedsAddressedReport {
    std::vector<std::string> needs_identified;
    std::vector<bool> needs_addressed;
    int total_needs = 0;
    int addressed_count = 0;
    std::string score;

    /// Builds a consistent report from the two lists.
    static NeedsAddressedReport from_lists(std::vector<std::string> needs, std::vector<bool> addressed);
    /// Length equality, count and score string. Throws SchemaViolation.
    void validate() const;
    bool operator==(const NeedsAddressedReport&) const = default;
};

/// Strict parse of a needs_addressed reply; missing totals are computed,
/// present ones must agree. Throws SchemaViolation.
NeedsAddressedReport parse_needs_addressed(std::string_view json);

struct JudgeVerdict {
    std::string classifier_name;
    /// 0 or 1 for binary classifiers; unset when not decidable or nested.
    std::optional<int> value;
    std::optional<NeedsAddressedReport> nested;
    /// False when rule_judge cannot decide the classifier mechanically.
    bool decidable = true;
    std::string raw_reply;
    std::string judge_model;
};

std::string build_judge_prompt(const SessionTranscript& transcript, const AnalysisResult& analysis,
                               const ClassifierSpec& spec);

/// LLM judge. Replies must match {"value":0|1} (or the nested format); one
/// re-ask on a malformed reply, then JudgeParseError.
JudgeVerdict judge_transcript(const SessionTranscript& transcript, const AnalysisResult& analysis,
                              const ClassifierSpec& spec, LlmClient& client, std::string judge_model = {},
                              int retries = 2);

/// Classifiers rule_judge decides; every other one comes back not decidable.
inline constexpr std::string_view kMechanicalClassifiers[] = {
    "used_hedging", "checked_user_needs", "was_concise", "monitored_comprehension", "aligned_with_analysis",
    "stayed_on_topic"};

struct RuleJudgeOptions {
    std::size_t turn_word_budget = 50;
    HedgeLexicon hedges;
    /// Adds the passage vocabulary to the stayed_on_topic check.
    const PassageModel* passage = nullptr;
};

/// Deterministic judge. Empty transcripts score 0 except stayed_on_topic;
/// non-empty transcripts with nothing to check (no explanation, say) score 1.
JudgeVerdict rule_judge(const SessionTranscript& transcript, const AnalysisResult& analysis,
                        const ClassifierSpec& spec, const RuleJudgeOptions& options = {});

// Paired-condition aggregation.

struct SessionScores {
    std::string session_id;
    std::string participant_id;
    AnalysisMode condition = AnalysisMode::Gaze;
    /// Classifier flags and conversation metrics by name.
    std::map<std::string, double> values;
};

/// Flags from decidable verdicts plus user_words, turns and assistant_words.
SessionScores score_session(std::string session_id, std::string participant_id, AnalysisMode condition,
                            std::span<const JudgeVerdict> verdicts, const ConversationMetrics& metrics);

struct Pairing {
    std::string gaze_session;
    std::string text_only_session;
};

/// participant_id -> sessions.
using PairingMap = std::map<std::string, Pairing>;

/// "participant_id,gaze_session,text_only_session" lines with an optional header.
PairingMap parse_pairing_csv(std::string_view contents);

struct ConditionStats {
    double mean = 0;
    /// Sample standard deviation; 0 below two values.
    double sd = 0;
    std::vector<double> values;
};

struct MeasureSummary {
    std::string name;
    ConditionStats gaze;
    ConditionStats text_only;
    /// Mean over pairs of gaze - text_only.
    double paired_diff = 0;
    std::vector<std::pair<std::string, double>> pair_diffs;
};

struct ConditionSummary {
    std::vector<MeasureSummary> measures;
    const MeasureSummary* find(std::string_view name) const;
};

/// Throws UnpairedSession when a pairing names a missing session or one in the
/// wrong condition, or a session appears in no pairing.
ConditionSummary aggregate_conditions(std::span<const SessionScores> sessions, const PairingMap& pairing);

/// Columns participant_id, condition, classifier_or_metric, value.
std::string scores_to_csv(std::span<const SessionScores> sessions);
/// Columns measure, participant_id, diff (gaze minus text_only).
std::string pair_diffs_to_csv(const ConditionSummary& summary);
std::string summary_to_json(const ConditionSummary& summary, int indent = 2);

} // namespace gazeguide
