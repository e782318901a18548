#pragma once

#include "gazeguide/behavior.hpp"
#include "gazeguide/gaze.hpp"
#include "gazeguide/judge.hpp"
#include "gazeguide/llm.hpp"
#include "gazeguide/needs.hpp"
#include "gazeguide/passage.hpp"
#include "gazeguide/session.hpp"
#include "gazeguide/triggers.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gazeguide {

enum class UserPolicyKind { AlwaysAffirm, AlwaysDeny, Scripted };

/// Scripted user for replays. A scripted list is consumed in order; the
/// conversation ends when it runs out.
struct UserPolicy {
    UserPolicyKind kind = UserPolicyKind::AlwaysAffirm;
    std::vector<std::string> replies;
    int max_user_turns = 16;

    std::optional<std::string> reply(std::size_t index) const;
    bool operator==(const UserPolicy&) const = default;
};

/// "affirm", "deny", or "script:<reply>|<reply>|...". Throws ValidationError.
UserPolicy parse_user_policy(std::string_view spec);
std::string format_user_policy(const UserPolicy& policy);

enum class BackendKind { Rule, Llm };

std::string_view to_string(BackendKind kind);
std::optional<BackendKind> parse_backend_kind(std::string_view s);

struct ReplayBackends {
    BackendKind analysis = BackendKind::Rule;
    BackendKind assistant = BackendKind::Rule;
    /// Required when either backend is Llm. Must be safe to share across threads
    /// when used by a batch.
    std::shared_ptr<LlmClient> llm;
    int retries = 2;
    LlmInput llm_input = LlmInput::Wordlist;
    /// Reference corpus for the rule text-only analysis; the passage alone when empty.
    std::span<const PassageModel> corpus;
};

/// Analysis for `condition`: the gaze path reads the report, the text-only path
/// only the passage.
AnalysisResult analyze_condition(AnalysisMode condition, std::span<const GazeObservation> obs,
                                 const BehaviorReport& report, const PassageModel& passage,
                                 const ReplayBackends& backends, std::int64_t t_ms);

/// One reading episode: grounds samples as they arrive, polls the trigger after
/// each, and runs the analyzer whenever it fires. The passage must outlive it.
class ReadingEpisode {
public:
    using Analyzer = std::function<AnalysisResult(std::span<const GazeObservation> obs, const BehaviorReport& report,
                                                  std::int64_t t_ms)>;

    ReadingEpisode(std::string session_id, const PassageModel& passage, LayoutMap layout, TriggerPolicy policy,
                   DetectorParams params, Analyzer analyzer);

    /// Throws ValidationError once samples have arrived.
    void set_layout(LayoutMap layout);
    /// Throws OutOfOrderSample or ValidationError; returns whether analysis ran.
    bool append(const GazeSample& sample);
    /// Last poll at the end of reading (user query for on-demand policies).
    /// Returns whether analysis ran. Throws ValidationError when called twice.
    bool finish();

    bool finished() const { return finished_; }
    std::int64_t end_ms() const { return last_t_ms_; }
    const LayoutMap& layout() const { return layout_; }
    const std::vector<GazeObservation>& observations() const { return list_.observations(); }
    const std::vector<AnalysisResult>& analyses() const { return analyses_; }
    /// Report over everything seen; set by finish().
    const BehaviorReport& report() const { return report_; }

private:
    void fire(std::int64_t t_ms, const BehaviorReport& report);

    const PassageModel* passage_;
    LayoutMap layout_;
    DetectorParams params_;
    Analyzer analyzer_;
    ActionList list_;
    TriggerGate gate_;
    BehaviorReport at_last_run_;
    std::int64_t last_run_ms_ = 0;
    std::int64_t last_t_ms_ = 0;
    std::vector<AnalysisResult> analyses_;
    BehaviorReport report_;
    bool finished_ = false;
};

struct ReplayOptions {
    std::string session_id = "replay";
    std::string participant_id;
    /// Where the trace came from, copied into the record.
    std::string trace_ref;
    AnalysisMode condition = AnalysisMode::Gaze;
    TriggerPolicy policy;
    UserPolicy user;
    DetectorParams params;
    SessionOptions session;
    /// Gap between the end of reading and each conversational turn.
    std::int64_t turn_gap_ms = 4000;
};

struct SessionRecord {
    std::string session_id;
    std::string participant_id;
    std::string passage_id;
    AnalysisMode condition = AnalysisMode::Gaze;
    std::string policy;
    std::string user_policy;
    std::string trace_ref;
    std::vector<GazeObservation> observations;
    BehaviorReport report;
    /// One per trigger firing, in order; the last one drives the conversation.
    std::vector<AnalysisResult> analyses;
    SessionTranscript transcript;
    ConversationMetrics metrics;
    /// Wall clock at the start of the replay and its duration. Not part of equality.
    std::int64_t started_unix_ms = 0;
    double elapsed_ms = 0;

    const AnalysisResult& analysis() const;
    bool operator==(const SessionRecord& o) const;
};

/// ingestion, trigger, analysis for the condition, scripted conversation, metrics.
/// Trigger firings during reading analyze the observations so far; the
/// conversation uses the latest analysis, or an empty one when nothing fired.
SessionRecord replay(std::span<const GazeSample> trace, const PassageModel& passage, const LayoutMap& layout,
                     const ReplayOptions& options, const ReplayBackends& backends = {});

// Session directory: record.json, trace.jsonl, observations.jsonl, report.json,
// analysis.jsonl, transcript.jsonl. Trace is written only when given.
void write_record(const std::filesystem::path& dir, const SessionRecord& record,
                  std::span<const GazeSample> trace = {});
SessionRecord read_record(const std::filesystem::path& dir);
/// Every subdirectory holding a record.json, sorted by session_id.
std::vector<SessionRecord> read_records(const std::filesystem::path& root);

// Batch kernels. Each has a serial reference with identical output.

struct ReplayJob {
    std::span<const GazeSample> trace;
    const PassageModel* passage = nullptr;
    const LayoutMap* layout = nullptr;
    ReplayOptions options;
};

std::vector<SessionRecord> replay_batch(std::span<const ReplayJob> jobs, const ReplayBackends& backends = {},
                                        int threads = 0);
std::vector<SessionRecord> replay_batch_serial(std::span<const ReplayJob> jobs,
                                               const ReplayBackends& backends = {});

struct AnalyzeJob {
    std::span<const GazeObservation> observations;
    const PassageModel* passage = nullptr;
};

std::vector<BehaviorReport> analyze_batch(std::span<const AnalyzeJob> jobs, const DetectorParams& params = {},
                                          int threads = 0);
std::vector<BehaviorReport> analyze_batch_serial(std::span<const AnalyzeJob> jobs,
                                                 const DetectorParams& params = {});

struct JudgeJob {
    const SessionTranscript* transcript = nullptr;
    const AnalysisResult* analysis = nullptr;
    const PassageModel* passage = nullptr;
};

/// rule_judge for every (job, classifier) pair; result[i] follows registry order.
std::vector<std::vector<JudgeVerdict>> judge_batch(std::span<const JudgeJob> jobs, const JudgeRegistry& registry,
                                                   const RuleJudgeOptions& options = {}, int threads = 0);
std::vector<std::vector<JudgeVerdict>> judge_batch_serial(std::span<const JudgeJob> jobs,
                                                          const JudgeRegistry& registry,
                                                          const RuleJudgeOptions& options = {});

/// Rule-judges each record against its passage (looked up by passage_id).
std::vector<SessionScores> score_records(std::span<const SessionRecord> records, const JudgeRegistry& registry,
                                         std::span<const PassageModel> passages, int threads = 0);

} // namespace gazeguide
