#include "gazeguide/session.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/prompts.hpp"
#include "gazeguide/text.hpp"

#include "json.hpp"

#include <algorithm>

namespace gazeguide {

using ojson = nlohmann::ordered_json;

std::string_view to_string(SessionState s) {
    switch (s) {
    case SessionState::Opening: return "OPENING";
    case SessionState::AwaitConfirmation: return "AWAIT_CONFIRMATION";
    case SessionState::Explaining: return "EXPLAINING";
    case SessionState::Monitoring: return "MONITORING";
    case SessionState::Closed: return "CLOSED";
    }
    return "OPENING";
}

std::optional<SessionState> parse_session_state(std::string_view s) {
    for (auto st : {SessionState::Opening, SessionState::AwaitConfirmation, SessionState::Explaining,
                    SessionState::Monitoring, SessionState::Closed})
        if (to_string(st) == s) return st;
    return std::nullopt;
}

std::string_view to_string(ReplyClass c) {
    switch (c) {
    case ReplyClass::Affirmative: return "affirmative";
    case ReplyClass::Negative: return "negative";
    case ReplyClass::Question: return "question";
    case ReplyClass::Ambiguous: return "ambiguous";
    }
    return "ambiguous";
}

std::string transcript_to_jsonl(const SessionTranscript& t) {
    std::string out;
    for (const auto& turn : t.turns) {
        ojson j;
        j["speaker"] = turn.speaker == Speaker::Assistant ? "assistant" : "user";
        j["text"] = turn.text;
        j["t_ms"] = turn.t_ms;
        j["state"] = std::string(to_string(turn.state));
        if (!turn.need_id.empty()) j["need_id"] = turn.need_id;
        if (turn.truncated) j["truncated"] = true;
        out += j.dump() + "\n";
    }
    return out;
}

SessionTranscript transcript_from_jsonl(std::string_view contents, AnalysisMode mode) {
    SessionTranscript t;
    t.analysis_mode = mode;
    std::size_t start = 0, line_no = 0;
    while (start < contents.size()) {
        auto nl = contents.find('\n', start);
        auto line = text::trim(contents.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
        start = nl == std::string_view::npos ? contents.size() : nl + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            auto j = ojson::parse(line);
            Turn turn;
            auto speaker = j.at("speaker").get<std::string>();
            if (speaker != "assistant" && speaker != "user") throw SchemaViolation("bad speaker '" + speaker + "'");
            turn.speaker = speaker == "assistant" ? Speaker::Assistant : Speaker::User;
            turn.text = j.at("text").get<std::string>();
            turn.t_ms = j.at("t_ms").get<std::int64_t>();
            auto st = parse_session_state(j.at("state").get<std::string>());
            if (!st) throw SchemaViolation("bad state");
            turn.state = *st;
            turn.need_id = j.value("need_id", "");
            turn.truncated = j.value("truncated", false);
            t.turns.push_back(std::move(turn));
        } catch (const ojson::exception& e) {
            throw SchemaViolation("transcript line " + std::to_string(line_no) + ": " + e.what());
        } catch (const SchemaViolation& e) {
            throw SchemaViolation("transcript line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return t;
}

bool HedgeLexicon::matches(std::string_view s) const {
    auto toks = text::normalized_tokens(s);
    for (const auto& marker : tokens) {
        auto m = text::normalized_tokens(marker);
        if (m.empty() || m.size() > toks.size()) continue;
        for (std::size_t i = 0; i + m.size() <= toks.size(); ++i)
            if (std::equal(m.begin(), m.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) return true;
    }
    return false;
}

namespace {

bool in(std::string_view tok, std::initializer_list<std::string_view> set) {
    return std::find(set.begin(), set.end(), tok) != set.end();
}

bool has_phrase(const std::vector<std::string>& toks, std::string_view a, std::string_view b) {
    for (std::size_t i = 0; i + 1 < toks.size(); ++i)
        if (toks[i] == a && toks[i + 1] == b) return true;
    return false;
}

bool restates(const std::vector<std::string>& toks, const NeedHypothesis& need) {
    auto desc = text::normalized_tokens(need.description);
    for (const auto& t : toks)
        if (text::is_content_word(t) && std::find(desc.begin(), desc.end(), t) != desc.end()) return true;
    return false;
}

} // namespace

ReplyClass classify_reply(std::string_view utterance, const NeedHypothesis* need) {
    auto toks = text::normalized_tokens(utterance);
    if (toks.empty()) return ReplyClass::Ambiguous;
    bool negative = in(toks[0], {"no", "nope", "nah", "actually"}) || has_phrase(toks, "not", "really");
    for (const auto& t : toks) negative |= in(t, {"no", "not", "don't", "dont", "didn't", "doesn't", "isn't"});
    if (negative) return ReplyClass::Negative;
    if (need && restates(toks, *need)) return ReplyClass::Affirmative;
    auto trimmed = text::trim(utterance);
    if (trimmed.back() == '?' ||
        in(toks[0], {"what", "why", "how", "who", "when", "where", "which", "can", "could", "would", "does", "do",
                     "is", "are", "explain", "tell"}))
        return ReplyClass::Question;
    for (const auto& t : toks)
        if (in(t, {"yes", "yeah", "yep", "sure", "ok", "okay", "right", "exactly"})) return ReplyClass::Affirmative;
    if (has_phrase(toks, "makes", "sense") || has_phrase(toks, "got", "it")) return ReplyClass::Affirmative;
    return ReplyClass::Ambiguous;
}

std::pair<std::string, bool> fit_word_budget(std::string_view s, std::size_t max_words) {
    auto collapsed = text::trim(s);
    if (text::word_count(collapsed) <= max_words) return {collapsed, false};
    auto words = text::split_whitespace(collapsed);
    std::string out, candidate;
    for (std::size_t i = 0; i < words.size() && i < max_words; ++i) {
        candidate += (i ? " " : "") + words[i];
        auto last = words[i].back();
        if (last == '.' || last == '!' || last == '?') out = candidate;
    }
    if (out.empty()) out = text::truncate_words(collapsed, max_words);
    return {out, true};
}

namespace {

std::string collapse(std::string_view s) {
    std::string out;
    for (const auto& w : text::split_whitespace(s)) out += (out.empty() ? "" : " ") + w;
    return out;
}

std::string quote(std::string_view sentence, std::size_t words_left) {
    if (words_left == 0) return {};
    return "\"" + text::truncate_words(collapse(sentence), words_left) + "\"";
}

std::optional<std::size_t> need_sentence(const NeedHypothesis* need, const PassageModel& p) {
    if (!need) return std::nullopt;
    if (need->target.sentence_index && *need->target.sentence_index < p.sentence_count())
        return need->target.sentence_index;
    if (!need->target.word_indices.empty() && need->target.word_indices.front() < p.word_count())
        return p.word(need->target.word_indices.front()).sentence_index;
    return std::nullopt;
}

std::string key_terms(const PassageModel& p, std::size_t s) {
    const auto& sent = p.sentence(s);
    std::vector<std::pair<std::string, std::size_t>> terms;
    for (auto w = sent.first_word; w < sent.first_word + sent.word_count; ++w) {
        auto surface = std::string(text::strip_punctuation(p.word(w).surface));
        auto k = text::normalize_surface(surface);
        if (!text::is_content_word(k)) continue;
        bool dup = false;
        for (const auto& [t, _] : terms) dup |= text::normalize_surface(t) == k;
        if (!dup) terms.emplace_back(surface, w);
    }
    std::stable_sort(terms.begin(), terms.end(),
                     [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
    if (terms.size() > 3) terms.resize(3);
    std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    std::string out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) out += i + 1 == terms.size() ? " and " : ", ";
        out += "'" + terms[i].first + "'";
    }
    return out;
}

std::string with_quote(std::string prefix, std::string_view sentence, std::size_t budget) {
    auto used = text::word_count(prefix);
    if (used >= budget) return prefix;
    return prefix + " " + quote(sentence, budget - used);
}

} // namespace

std::string ScriptedAssistant::respond(const TurnRequest& r) {
    const auto& p = *r.passage;
    const auto& title = p.title();
    auto sent = need_sentence(r.need, p);
    switch (r.kind) {
    case TurnKind::Opening: {
        if (!r.need) return "It seems nothing in particular stood out in " + title +
                            ". Perhaps there's a part you'd like to talk through?";
        const auto& iv = r.analysis->intervention;
        if (iv != "none" && !iv.empty() && iv.back() == '?' && HedgeLexicon{}.matches(iv) &&
            text::word_count(iv) <= r.budget)
            return iv;
        return propose_need(*r.need, p);
    }
    case TurnKind::Proposal: return "Okay. " + propose_need(*r.need, p);
    case TurnKind::Reask:
        return "Sorry, I might have missed that. Would you like to go over " + need_focus(*r.need, p) + "?";
    case TurnKind::Explanation: {
        auto id = r.need->need_id;
        if ((id.rfind("fix:", 0) == 0 || id.rfind("off:", 0) == 0) && !r.need->target.word_indices.empty() && sent) {
            auto term = std::string(text::strip_punctuation(p.word(r.need->target.word_indices.front()).surface));
            auto best = *sent;
            for (auto w : p.find_surface(term)) {
                const auto& s = p.sentence_of_word(w);
                if (s.content && s.word_count > p.sentence(best).word_count) best = s.sentence_index;
            }
            return with_quote("'" + term + "' is a key term here. The passage uses it in:", p.sentence(best).text,
                              r.budget);
        }
        if (sent && (id.rfind("llm:", 0) == 0 || id.rfind("text:", 0) == 0)) {
            auto head = text::truncate_words(collapse(r.need->description.substr(0, r.need->description.find(':'))), 15);
            return with_quote("Here's the gist: " + head + ". The passage puts it as:", p.sentence(*sent).text, r.budget);
        }
        if (sent) {
            auto terms = key_terms(p, *sent);
            auto prefix = terms.empty() ? std::string("Let's break it down. It reads:")
                                        : "Let's break it down around " + terms + ". It reads:";
            return with_quote(prefix, p.sentence(*sent).text, r.budget);
        }
        return "Here's the gist: " + text::truncate_words(collapse(r.need->description), r.budget - 3);
    }
    case TurnKind::Reexplain: {
        auto s = sent ? sent : r.topic_sentence;
        if (!s) return "Let me try another angle: " + text::truncate_words(collapse(r.need ? r.need->description : ""), 20);
        auto terms = key_terms(p, *s);
        auto prefix = terms.empty() ? std::string("Let me try another angle. Read it slowly:")
                                    : "Let me try another angle. Focus on " + terms + " in:";
        return with_quote(prefix, p.sentence(*s).text, r.budget);
    }
    case TurnKind::TopicExplanation:
        return with_quote("Good question. The passage addresses that here:", p.sentence(*r.topic_sentence).text,
                          r.budget);
    case TurnKind::NoMoreNeeds:
        return "No problem. Perhaps there's another part of " + title + " you'd like to talk through?";
    case TurnKind::ClosingOffer:
        return "Great. It seems we've covered what stood out in " + title + ". " + std::string(kClosingOffer);
    case TurnKind::OpenFloor: return "Sure. Which part of " + title + " would you like to look at?";
    case TurnKind::Unknown:
        return "I might not have caught that. Could you point me to the part of " + title + " you mean?";
    case TurnKind::Farewell: return "Thanks for reading " + title + " with me. Goodbye.";
    }
    return {};
}

std::string LlmAssistant::respond(const TurnRequest& r) {
    if (r.kind != TurnKind::Explanation && r.kind != TurnKind::Reexplain && r.kind != TurnKind::TopicExplanation)
        return fallback_.respond(r);
    auto prompt = build_assistant_prompt(*r.passage, *r.analysis, *r.transcript);
    prompt += "\n\nReply with the assistant's next turn only, in at most " + std::to_string(r.budget) + " words.";
    if (r.need) prompt += "\nThe user confirmed they want help with: " + r.need->description;
    return complete_with_retries(*client_, prompt, retries_);
}

Session::Session(std::string session_id, std::shared_ptr<const PassageModel> passage, AnalysisResult analysis,
                 std::shared_ptr<AssistantBackend> backend, SessionOptions options)
    : session_id_(std::move(session_id)),
      passage_(std::move(passage)),
      analysis_(std::move(analysis)),
      backend_(std::move(backend)),
      options_(std::move(options)) {
    if (!passage_ || !backend_) throw ValidationError("session needs a passage and a backend");
    if (options_.turn_word_budget < 10) throw ValidationError("turn_word_budget must be at least 10");
    if (options_.hedges.tokens.empty()) throw ValidationError("hedge lexicon is empty");
    transcript_.analysis_mode = analysis_.mode;
}

const NeedHypothesis* Session::need(const std::string& id) const {
    for (const auto& n : analysis_.need_help)
        if (n.need_id == id) return &n;
    return nullptr;
}

const NeedHypothesis* Session::next_need() const {
    for (const auto& n : analysis_.need_help)
        if (!proposed_.count(n.need_id)) return &n;
    return nullptr;
}

const Turn& Session::emit(TurnKind kind, SessionState emitted_in, const NeedHypothesis* n, std::int64_t t_ms,
                          std::optional<std::size_t> topic, std::string_view user_text) {
    bool explanation = kind == TurnKind::Explanation || kind == TurnKind::Reexplain ||
                       kind == TurnKind::TopicExplanation;
    auto check_words = text::word_count(kComprehensionCheck);
    TurnRequest req;
    req.kind = kind;
    req.passage = passage_.get();
    req.analysis = &analysis_;
    req.transcript = &transcript_;
    req.need = n;
    req.topic_sentence = topic;
    req.user_text = user_text;
    req.budget = explanation ? options_.turn_word_budget - check_words : options_.turn_word_budget;
    auto [body, cut] = fit_word_budget(backend_->respond(req), req.budget);
    Turn turn;
    turn.speaker = Speaker::Assistant;
    turn.text = explanation ? body + " " + std::string(kComprehensionCheck) : body;
    turn.t_ms = t_ms;
    turn.state = emitted_in;
    turn.need_id = n ? n->need_id : "";
    turn.truncated = cut;
    transcript_.turns.push_back(std::move(turn));
    return transcript_.turns.back();
}

Turn Session::open(std::int64_t t_ms) {
    if (opened()) throw ValidationError("session already opened");
    if (analysis_.need_help.empty()) {
        const auto& t = emit(TurnKind::Opening, SessionState::Opening, nullptr, t_ms);
        state_ = SessionState::Monitoring;
        return t;
    }
    const auto* top = &analysis_.need_help.front();
    const auto& t = emit(TurnKind::Opening, SessionState::Opening, top, t_ms);
    proposed_.insert(top->need_id);
    active_need_ = top->need_id;
    state_ = SessionState::AwaitConfirmation;
    return t;
}

const Turn& Session::propose_or_wrap(std::int64_t t_ms, bool after_decline) {
    if (const auto* n = next_need()) {
        const auto& t = emit(TurnKind::Proposal, SessionState::AwaitConfirmation, n, t_ms);
        proposed_.insert(n->need_id);
        active_need_ = n->need_id;
        reasked_ = false;
        state_ = SessionState::AwaitConfirmation;
        return t;
    }
    const auto& t = emit(after_decline ? TurnKind::NoMoreNeeds : TurnKind::ClosingOffer, SessionState::Monitoring,
                         nullptr, t_ms);
    active_need_.reset();
    closing_offered_ = !after_decline;
    state_ = SessionState::Monitoring;
    return t;
}

const Turn& Session::explain_topic(std::string_view utterance, std::int64_t t_ms) {
    auto s = locate_sentence(utterance, *passage_);
    active_need_.reset();
    closing_offered_ = false;
    state_ = SessionState::Monitoring;
    if (!s) {
        awaiting_check_ = false;
        return emit(TurnKind::Unknown, SessionState::Monitoring, nullptr, t_ms, {}, utterance);
    }
    const auto& t = emit(TurnKind::TopicExplanation, SessionState::Explaining, nullptr, t_ms, s, utterance);
    awaiting_check_ = true;
    reexplained_ = false;
    last_explained_.clear();
    last_topic_ = s;
    return t;
}

Turn Session::user_turn(std::string_view utterance, std::int64_t t_ms) {
    if (state_ == SessionState::Closed) throw SessionClosed("session " + session_id_ + " is closed");
    if (!opened()) throw ValidationError("session has not been opened");

    // Restored if the backend throws, so a failed turn leaves no trace.
    auto saved_state = state_;
    auto saved_active = active_need_;
    auto saved_proposed = proposed_;
    auto saved_flags = std::tuple(reasked_, awaiting_check_, reexplained_, closing_offered_, last_explained_, last_topic_);
    auto saved_size = transcript_.turns.size();

    Turn user;
    user.speaker = Speaker::User;
    user.text = std::string(utterance);
    user.t_ms = t_ms;
    user.state = state_;
    transcript_.turns.push_back(std::move(user));

    try {
        if (state_ == SessionState::AwaitConfirmation) {
            const auto* n = need(*active_need_);
            switch (classify_reply(utterance, n)) {
            case ReplyClass::Affirmative: {
                const auto& t = emit(TurnKind::Explanation, SessionState::Explaining, n, t_ms, {}, utterance);
                last_explained_ = n->need_id;
                last_topic_.reset();
                awaiting_check_ = true;
                reexplained_ = false;
                state_ = SessionState::Monitoring;
                return t;
            }
            case ReplyClass::Negative: return propose_or_wrap(t_ms, true);
            case ReplyClass::Question:
                proposed_.erase(n->need_id);
                return explain_topic(utterance, t_ms);
            case ReplyClass::Ambiguous:
                if (!reasked_) {
                    reasked_ = true;
                    return emit(TurnKind::Reask, SessionState::AwaitConfirmation, n, t_ms);
                }
                return propose_or_wrap(t_ms, true);
            }
        }

        auto c = classify_reply(utterance);
        bool on_topic = c == ReplyClass::Question ||
                        (c == ReplyClass::Ambiguous && locate_sentence(utterance, *passage_).has_value());
        if (awaiting_check_) {
            if (on_topic) return explain_topic(utterance, t_ms);
            if (c == ReplyClass::Negative && !reexplained_) {
                const auto* n = last_explained_.empty() ? nullptr : need(last_explained_);
                const auto& t = emit(TurnKind::Reexplain, SessionState::Explaining, n, t_ms, last_topic_, utterance);
                reexplained_ = true;
                return t;
            }
            awaiting_check_ = false;
            return propose_or_wrap(t_ms, false);
        }
        if (closing_offered_) {
            if (c == ReplyClass::Affirmative) {
                const auto& t = emit(TurnKind::Farewell, SessionState::Monitoring, nullptr, t_ms);
                state_ = SessionState::Closed;
                active_need_.reset();
                return t;
            }
            if (on_topic) return explain_topic(utterance, t_ms);
            closing_offered_ = false;
            return emit(TurnKind::OpenFloor, SessionState::Monitoring, nullptr, t_ms);
        }
        if (on_topic) return explain_topic(utterance, t_ms);
        if (c == ReplyClass::Negative) {
            const auto& t = emit(TurnKind::Farewell, SessionState::Monitoring, nullptr, t_ms);
            state_ = SessionState::Closed;
            active_need_.reset();
            return t;
        }
        if (c == ReplyClass::Affirmative) return propose_or_wrap(t_ms, false);
        return emit(TurnKind::Unknown, SessionState::Monitoring, nullptr, t_ms, {}, utterance);
    } catch (...) {
        state_ = saved_state;
        active_need_ = saved_active;
        proposed_ = saved_proposed;
        std::tie(reasked_, awaiting_check_, reexplained_, closing_offered_, last_explained_, last_topic_) = saved_flags;
        transcript_.turns.resize(saved_size);
        throw;
    }
}

void Session::close() {
    state_ = SessionState::Closed;
    active_need_.reset();
}

std::string build_assistant_prompt(const PassageModel& passage, const AnalysisResult& analysis,
                                   const SessionTranscript& transcript) {
    auto results = analysis.observations_text;
    if (results.empty()) {
        for (const auto& n : analysis.need_help) results += "- " + n.description + "\n";
        if (results.empty()) results = "No need for help stood out.";
    }
    auto prompt = prompts::fill(prompts::kAssistant, {{"paragraph", passage.content_text()}, {"analysis_results", results}});
    if (transcript.turns.empty()) return prompt;
    prompt += "\n\nConversation so far:";
    for (const auto& t : transcript.turns)
        prompt += std::string("\n") + (t.speaker == Speaker::Assistant ? "Assistant: " : "User: ") + t.text;
    return prompt;
}

ConversationMetrics conversation_metrics(const SessionTranscript& transcript) {
    ConversationMetrics m;
    for (const auto& t : transcript.turns) {
        ++m.turns;
        (t.speaker == Speaker::User ? m.user_words : m.assistant_words) += text::word_count(t.text);
    }
    return m;
}

} // namespace gazeguide
