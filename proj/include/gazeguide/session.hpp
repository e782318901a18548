#pragma once

#include "gazeguide/llm.hpp"
#include "gazeguide/needs.hpp"
#include "gazeguide/passage.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace gazeguide {

enum class SessionState { Opening, AwaitConfirmation, Explaining, Monitoring, Closed };

std::string_view to_string(SessionState s);
std::optional<SessionState> parse_session_state(std::string_view s);

enum class Speaker { Assistant, User };

struct Turn {
    Speaker speaker = Speaker::Assistant;
    std::string text;
    std::int64_t t_ms = 0;
    /// State that produced an assistant turn; the state the user replied in otherwise.
    SessionState state = SessionState::Opening;
    /// Need the assistant turn proposes or explains; empty otherwise.
    std::string need_id;
    /// Cut to the word budget at a sentence boundary.
    bool truncated = false;

    bool operator==(const Turn&) const = default;
};

struct SessionTranscript {
    std::vector<Turn> turns;
    AnalysisMode analysis_mode = AnalysisMode::Gaze;

    bool operator==(const SessionTranscript&) const = default;
};

// One {"speaker","text","t_ms","state"[,"need_id"][,"truncated"]} object per line.
std::string transcript_to_jsonl(const SessionTranscript& t);
SessionTranscript transcript_from_jsonl(std::string_view contents, AnalysisMode mode = AnalysisMode::Gaze);

struct HedgeLexicon {
    std::vector<std::string> tokens{"might", "seems", "may", "perhaps", "it looks like"};

    /// Whole-word, case-insensitive; multi-word markers match as phrases.
    bool matches(std::string_view text) const;
};

enum class ReplyClass { Affirmative, Negative, Question, Ambiguous };

std::string_view to_string(ReplyClass c);

/// Lexicon classification. A reply that restates `need` (shares a content word
/// with its description) counts as affirmative.
ReplyClass classify_reply(std::string_view utterance, const NeedHypothesis* need = nullptr);

inline constexpr std::string_view kComprehensionCheck = "Does that make sense?";
inline constexpr std::string_view kClosingOffer = "Shall we wrap up here?";

/// Cuts to at most `max_words`, preferring the last whole sentence that fits.
/// Returns the text and whether anything was cut.
std::pair<std::string, bool> fit_word_budget(std::string_view text, std::size_t max_words);

enum class TurnKind { Opening, Proposal, Reask, Explanation, Reexplain, TopicExplanation, NoMoreNeeds, ClosingOffer,
                      OpenFloor, Unknown, Farewell };

struct TurnRequest {
    TurnKind kind = TurnKind::Opening;
    const PassageModel* passage = nullptr;
    const AnalysisResult* analysis = nullptr;
    const SessionTranscript* transcript = nullptr;
    const NeedHypothesis* need = nullptr;
    std::optional<std::size_t> topic_sentence;
    std::string user_text;
    /// Words the reply may use; explanation replies get the check appended after.
    std::size_t budget = 50;
};

class AssistantBackend {
public:
    virtual ~AssistantBackend() = default;
    virtual std::string respond(const TurnRequest& request) = 0;
};

/// Deterministic templates.
class ScriptedAssistant : public AssistantBackend {
public:
    std::string respond(const TurnRequest& request) override;
};

/// Explanations come from the LLM with the assistant prompt and transcript;
/// proposals, re-asks and closings use the scripted templates.
class LlmAssistant : public AssistantBackend {
public:
    LlmAssistant(std::shared_ptr<LlmClient> client, int retries = 2) : client_(std::move(client)), retries_(retries) {}
    std::string respond(const TurnRequest& request) override;

private:
    std::shared_ptr<LlmClient> client_;
    int retries_;
    ScriptedAssistant fallback_;
};

struct SessionOptions {
    std::size_t turn_word_budget = 50;
    HedgeLexicon hedges;
};

class Session {
public:
    Session(std::string session_id, std::shared_ptr<const PassageModel> passage, AnalysisResult analysis,
            std::shared_ptr<AssistantBackend> backend, SessionOptions options = {});

    /// Emits the opening turn. Throws ValidationError when called twice.
    Turn open(std::int64_t t_ms = 0);

    /// Records the user turn and returns the assistant reply. Throws SessionClosed.
    Turn user_turn(std::string_view utterance, std::int64_t t_ms = 0);

    /// Ends the conversation without a closing turn.
    void close();

    const std::string& session_id() const { return session_id_; }
    const std::string& passage_id() const { return passage_->passage_id(); }
    const PassageModel& passage() const { return *passage_; }
    const AnalysisResult& analysis() const { return analysis_; }
    SessionState state() const { return state_; }
    const std::optional<std::string>& active_need() const { return active_need_; }
    const SessionTranscript& transcript() const { return transcript_; }
    const SessionOptions& options() const { return options_; }
    bool opened() const { return !transcript_.turns.empty(); }

private:
    const NeedHypothesis* need(const std::string& id) const;
    const NeedHypothesis* next_need() const;
    const Turn& emit(TurnKind kind, SessionState emitted_in, const NeedHypothesis* need, std::int64_t t_ms,
                     std::optional<std::size_t> topic = {}, std::string_view user_text = {});
    const Turn& propose_or_wrap(std::int64_t t_ms, bool exhausted_after_decline);
    const Turn& explain_topic(std::string_view utterance, std::int64_t t_ms);

    std::string session_id_;
    std::shared_ptr<const PassageModel> passage_;
    AnalysisResult analysis_;
    std::shared_ptr<AssistantBackend> backend_;
    SessionOptions options_;
    SessionState state_ = SessionState::Opening;
    std::optional<std::string> active_need_;
    SessionTranscript transcript_;
    std::set<std::string> proposed_;
    bool reasked_ = false;
    bool awaiting_check_ = false;
    bool reexplained_ = false;
    bool closing_offered_ = false;
    std::string last_explained_;
    std::optional<std::size_t> last_topic_;
};

/// Fills the assistant template with the passage and analysis and appends the
/// transcript, one "Assistant: ..." / "User: ..." line per turn.
std::string build_assistant_prompt(const PassageModel& passage, const AnalysisResult& analysis,
                                   const SessionTranscript& transcript);

struct ConversationMetrics {
    std::size_t user_words = 0;
    std::size_t turns = 0;
    std::size_t assistant_words = 0;
    bool operator==(const ConversationMetrics&) const = default;
};

ConversationMetrics conversation_metrics(const SessionTranscript& transcript);

} // namespace gazeguide
