#include "gazeguide/judge.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace gazeguide {

using ojson = nlohmann::ordered_json;

const ClassifierSpec* JudgeRegistry::find(std::string_view name) const {
    for (const auto& c : classifiers)
        if (c.name == name) return &c;
    return nullptr;
}

std::vector<std::string> JudgeRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& c : classifiers) out.push_back(c.name);
    return out;
}

namespace {

std::string get_string(const ojson& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj[key].is_string())
        throw SchemaViolation(where + ": missing string field '" + key + "'");
    return obj[key].get<std::string>();
}

} // namespace

JudgeRegistry parse_registry(std::string_view json) {
    ojson j;
    try {
        j = ojson::parse(json);
    } catch (const ojson::parse_error& e) {
        throw SchemaViolation(std::string("registry is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("behaviors") || !j["behaviors"].is_object())
        throw SchemaViolation("registry needs a 'behaviors' object");
    JudgeRegistry reg;
    std::set<std::string> seen;
    auto add = [&](ClassifierSpec spec) {
        if (!seen.insert(spec.name).second) throw SchemaViolation("duplicate classifier '" + spec.name + "'");
        reg.classifiers.push_back(std::move(spec));
    };
    if (j.contains("behaviors_nested")) {
        if (!j["behaviors_nested"].is_object()) throw SchemaViolation("'behaviors_nested' must be an object");
        for (const auto& [name, v] : j["behaviors_nested"].items()) {
            ClassifierSpec c;
            c.name = name;
            c.description = get_string(v, "description", name);
            c.example = get_string(v, "example", name);
            c.response_kind = ResponseKind::NestedNeeds;
            if (!v.contains("response_format") || !v["response_format"].is_object())
                throw SchemaViolation(name + ": missing response_format");
            c.response_format = v["response_format"].dump();
            add(std::move(c));
        }
    }
    for (const auto& [name, v] : j["behaviors"].items()) {
        if (!v.is_object()) throw SchemaViolation(name + ": must be an object");
        ClassifierSpec c;
        c.name = name;
        c.description = get_string(v, "description", name);
        c.example = get_string(v, "example", name);
        c.label0 = get_string(v, "0", name);
        c.label1 = get_string(v, "1", name);
        add(std::move(c));
    }
    return reg;
}

JudgeRegistry load_registry(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open registry " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_registry(ss.str());
}

NeedsAddressedReport NeedsAddressedReport::from_lists(std::vector<std::string> needs, std::vector<bool> addressed) {
    NeedsAddressedReport r;
    r.needs_identified = std::move(needs);
    r.needs_addressed = std::move(addressed);
    r.total_needs = static_cast<int>(r.needs_identified.size());
    for (bool b : r.needs_addressed) r.addressed_count += b;
    r.score = std::to_string(r.addressed_count) + "/" + std::to_string(r.total_needs);
    r.validate();
    return r;
}

void NeedsAddressedReport::validate() const {
    if (needs_identified.size() != needs_addressed.size())
        throw SchemaViolation("needs_identified and needs_addressed differ in length");
    if (total_needs != static_cast<int>(needs_identified.size())) throw SchemaViolation("total_needs mismatch");
    int count = 0;
    for (bool b : needs_addressed) count += b;
    if (addressed_count != count) throw SchemaViolation("addressed_count mismatch");
    if (score != std::to_string(addressed_count) + "/" + std::to_string(total_needs))
        throw SchemaViolation("score string mismatch");
}

NeedsAddressedReport parse_needs_addressed(std::string_view json) {
    try {
        auto j = ojson::parse(json);
        if (!j.is_object()) throw SchemaViolation("needs_addressed reply must be an object");
        std::vector<std::string> needs;
        std::vector<bool> addressed;
        for (const auto& v : j.at("needs_identified")) {
            if (!v.is_string()) throw SchemaViolation("needs_identified must hold strings");
            needs.push_back(v.get<std::string>());
        }
        for (const auto& v : j.at("needs_addressed")) {
            if (!v.is_boolean()) throw SchemaViolation("needs_addressed must hold booleans");
            addressed.push_back(v.get<bool>());
        }
        auto r = NeedsAddressedReport::from_lists(std::move(needs), std::move(addressed));
        if (j.contains("total_needs") && j["total_needs"] != r.total_needs) throw SchemaViolation("total_needs mismatch");
        if (j.contains("addressed_count") && j["addressed_count"] != r.addressed_count)
            throw SchemaViolation("addressed_count mismatch");
        if (j.contains("score") && j["score"] != r.score) throw SchemaViolation("score string mismatch");
        return r;
    } catch (const ojson::exception& e) {
        throw SchemaViolation(std::string("needs_addressed reply: ") + e.what());
    }
}

namespace {

bool needs_analysis(const ClassifierSpec& spec) {
    return spec.response_kind == ResponseKind::NestedNeeds || text::contains_ci(spec.name, "analysis") ||
           text::contains_ci(spec.name, "needs");
}

std::string render_transcript(const SessionTranscript& t) {
    std::string out;
    for (const auto& turn : t.turns)
        out += std::string(turn.speaker == Speaker::Assistant ? "Assistant: " : "User: ") + turn.text + "\n";
    return out.empty() ? "(empty conversation)\n" : out;
}

std::optional<std::string> json_object_in(std::string_view reply) {
    auto open = reply.find('{');
    auto close = reply.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
    return std::string(reply.substr(open, close - open + 1));
}

std::optional<int> parse_binary(std::string_view reply) {
    auto obj = json_object_in(reply);
    if (!obj) return std::nullopt;
    try {
        auto j = ojson::parse(*obj);
        if (!j.is_object() || j.size() != 1 || !j.contains("value") || !j["value"].is_number_integer())
            return std::nullopt;
        auto v = j["value"].get<int>();
        if (v != 0 && v != 1) return std::nullopt;
        return v;
    } catch (const ojson::exception&) {
        return std::nullopt;
    }
}

} // namespace

std::string build_judge_prompt(const SessionTranscript& transcript, const AnalysisResult& analysis,
                               const ClassifierSpec& spec) {
    std::string p = "You are labeling a conversation between a reading assistant and a user.\n\n";
    p += "Classifier: " + spec.name + "\n";
    p += "Description: " + spec.description + "\n";
    p += "Example: " + spec.example + "\n";
    if (spec.response_kind == ResponseKind::Binary)
        p += "Labels: 0 = " + spec.label0 + ", 1 = " + spec.label1 + "\n";
    if (needs_analysis(spec)) {
        p += "\nAnalysis the assistant was given:\n" + analysis.observations_text + "\n";
        if (!analysis.need_help.empty()) {
            p += "Need help (if any):\n";
            for (const auto& n : analysis.need_help) p += "- " + n.description + "\n";
        }
    }
    p += "\nConversation:\n" + render_transcript(transcript) + "\n";
    if (spec.response_kind == ResponseKind::Binary)
        p += "Reply with only a JSON object: {\"value\": 0} or {\"value\": 1}.";
    else
        p += "Reply with only a JSON object shaped like: " + spec.response_format;
    return p;
}

JudgeVerdict judge_transcript(const SessionTranscript& transcript, const AnalysisResult& analysis,
                              const ClassifierSpec& spec, LlmClient& client, std::string judge_model, int retries) {
    JudgeVerdict v;
    v.classifier_name = spec.name;
    v.judge_model = std::move(judge_model);
    auto prompt = build_judge_prompt(transcript, analysis, spec);
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto reply = complete_with_retries(client, prompt, retries);
        v.raw_reply = reply;
        if (spec.response_kind == ResponseKind::Binary) {
            if (auto value = parse_binary(reply)) {
                v.value = value;
                return v;
            }
        } else if (auto obj = json_object_in(reply)) {
            try {
                v.nested = parse_needs_addressed(*obj);
                return v;
            } catch (const SchemaViolation&) {
            }
        }
        prompt += "\n\nYour previous reply did not follow the required format. Reply with the JSON object only.";
    }
    throw JudgeParseError("judge reply for '" + spec.name + "' did not follow the output contract");
}

namespace {

bool is_proposal_state(SessionState s) { return s == SessionState::Opening || s == SessionState::AwaitConfirmation; }

const NeedHypothesis* find_need(const AnalysisResult& a, const std::string& id) {
    for (const auto& n : a.need_help)
        if (n.need_id == id) return &n;
    return nullptr;
}

int judge_hedging(const SessionTranscript& t, const RuleJudgeOptions& o) {
    int proposals = 0;
    for (const auto& turn : t.turns) {
        if (turn.speaker != Speaker::Assistant || !is_proposal_state(turn.state)) continue;
        ++proposals;
        if (!o.hedges.matches(turn.text)) return 0;
    }
    return proposals > 0;
}

int judge_checked_needs(const SessionTranscript& t, const AnalysisResult& a) {
    const auto& turns = t.turns;
    for (std::size_t i = 0; i < turns.size(); ++i) {
        const auto& turn = turns[i];
        if (turn.speaker != Speaker::Assistant || turn.state != SessionState::Explaining) continue;
        if (turn.need_id.empty()) {
            if (i == 0 || turns[i - 1].speaker != Speaker::User) return 0;
            continue;
        }
        const auto* need = find_need(a, turn.need_id);
        bool confirmed = false;
        for (std::size_t j = 0; j + 1 < i && !confirmed; ++j) {
            confirmed = turns[j].speaker == Speaker::Assistant && is_proposal_state(turns[j].state) &&
                        turns[j].need_id == turn.need_id && turns[j + 1].speaker == Speaker::User &&
                        classify_reply(turns[j + 1].text, need) == ReplyClass::Affirmative;
        }
        if (!confirmed) return 0;
    }
    return !turns.empty();
}

int judge_concise(const SessionTranscript& t, const RuleJudgeOptions& o) {
    bool any = false;
    for (const auto& turn : t.turns) {
        if (turn.speaker != Speaker::Assistant) continue;
        any = true;
        if (text::word_count(turn.text) > o.turn_word_budget) return 0;
    }
    return any;
}

std::size_t count_of(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (auto p = hay.find(needle); p != std::string_view::npos; p = hay.find(needle, p + needle.size())) ++n;
    return n;
}

int judge_monitoring(const SessionTranscript& t) {
    for (const auto& turn : t.turns) {
        if (turn.speaker != Speaker::Assistant) continue;
        auto checks = count_of(turn.text, kComprehensionCheck);
        if (turn.state == SessionState::Explaining) {
            auto body = text::trim(turn.text);
            if (checks != 1 || body.empty() || body.back() != '?') return 0;
        } else if (checks != 0) {
            return 0;
        }
    }
    return !t.turns.empty();
}

int judge_aligned(const SessionTranscript& t, const AnalysisResult& a) {
    const Turn* first = nullptr;
    for (const auto& turn : t.turns)
        if (turn.speaker == Speaker::Assistant) {
            first = &turn;
            break;
        }
    if (!first) return 0;
    if (a.need_help.empty()) return 1;
    const auto& top = a.need_help.front();
    if (!first->need_id.empty()) return first->need_id == top.need_id;
    auto desc = text::normalized_tokens(top.description);
    for (const auto& tok : text::normalized_tokens(first->text))
        if (text::is_content_word(tok) && std::find(desc.begin(), desc.end(), tok) != desc.end()) return 1;
    return 0;
}

int judge_on_topic(const SessionTranscript& t, const AnalysisResult& a, const RuleJudgeOptions& o) {
    std::set<std::string> vocab;
    auto add = [&](std::string_view s) {
        for (const auto& tok : text::normalized_tokens(s))
            if (text::is_content_word(tok)) vocab.insert(tok);
    };
    add(a.observations_text);
    for (const auto& n : a.need_help) add(n.description);
    if (o.passage) {
        add(o.passage->title());
        add(o.passage->content_text());
    }
    for (const auto& turn : t.turns) {
        if (turn.speaker != Speaker::Assistant) continue;
        bool hit = false;
        for (const auto& tok : text::normalized_tokens(turn.text)) hit |= vocab.count(tok) > 0;
        if (!hit) return 0;
    }
    return 1;
}

} // namespace

JudgeVerdict rule_judge(const SessionTranscript& t, const AnalysisResult& a, const ClassifierSpec& spec,
                        const RuleJudgeOptions& o) {
    JudgeVerdict v;
    v.classifier_name = spec.name;
    v.judge_model = "rule";
    const auto& n = spec.name;
    if (n == "used_hedging") v.value = judge_hedging(t, o);
    else if (n == "checked_user_needs") v.value = judge_checked_needs(t, a);
    else if (n == "was_concise") v.value = judge_concise(t, o);
    else if (n == "monitored_comprehension") v.value = judge_monitoring(t);
    else if (n == "aligned_with_analysis") v.value = judge_aligned(t, a);
    else if (n == "stayed_on_topic") v.value = judge_on_topic(t, a, o);
    else v.decidable = false;
    return v;
}

SessionScores score_session(std::string session_id, std::string participant_id, AnalysisMode condition,
                            std::span<const JudgeVerdict> verdicts, const ConversationMetrics& metrics) {
    SessionScores s;
    s.session_id = std::move(session_id);
    s.participant_id = std::move(participant_id);
    s.condition = condition;
    for (const auto& v : verdicts) {
        if (v.value) s.values[v.classifier_name] = *v.value;
        if (v.nested && v.nested->total_needs > 0)
            s.values[v.classifier_name] = static_cast<double>(v.nested->addressed_count) / v.nested->total_needs;
    }
    s.values["user_words"] = static_cast<double>(metrics.user_words);
    s.values["turns"] = static_cast<double>(metrics.turns);
    s.values["assistant_words"] = static_cast<double>(metrics.assistant_words);
    return s;
}

PairingMap parse_pairing_csv(std::string_view contents) {
    PairingMap out;
    std::istringstream in{std::string(contents)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        auto t = text::trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<std::string> cols;
        std::stringstream ss(t);
        std::string col;
        while (std::getline(ss, col, ',')) cols.push_back(text::trim(col));
        if (cols.size() != 3) throw ValidationError("pairing line " + std::to_string(line_no) + ": need 3 columns");
        if (line_no == 1 && cols[0] == "participant_id") continue;
        if (!out.emplace(cols[0], Pairing{cols[1], cols[2]}).second)
            throw ValidationError("participant '" + cols[0] + "' paired twice");
    }
    return out;
}

const MeasureSummary* ConditionSummary::find(std::string_view name) const {
    for (const auto& m : measures)
        if (m.name == name) return &m;
    return nullptr;
}

namespace {

ConditionStats stats(std::vector<double> values) {
    ConditionStats s;
    s.values = std::move(values);
    if (s.values.empty()) return s;
    double sum = 0;
    for (double v : s.values) sum += v;
    s.mean = sum / static_cast<double>(s.values.size());
    if (s.values.size() > 1) {
        double ss = 0;
        for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(s.values.size() - 1));
    }
    return s;
}

} // namespace

ConditionSummary aggregate_conditions(std::span<const SessionScores> sessions, const PairingMap& pairing) {
    std::map<std::string, const SessionScores*> by_id;
    for (const auto& s : sessions)
        if (!by_id.emplace(s.session_id, &s).second) throw ValidationError("duplicate session '" + s.session_id + "'");

    std::set<std::string> paired;
    std::vector<std::tuple<std::string, const SessionScores*, const SessionScores*>> pairs;
    for (const auto& [participant, p] : pairing) {
        auto lookup = [&](const std::string& id, AnalysisMode mode) {
            auto it = by_id.find(id);
            if (it == by_id.end()) throw UnpairedSession("participant '" + participant + "': no session '" + id + "'");
            if (it->second->condition != mode)
                throw UnpairedSession("session '" + id + "' is not in the " + std::string(to_string(mode)) + " condition");
            if (!paired.insert(id).second) throw UnpairedSession("session '" + id + "' is paired twice");
            return it->second;
        };
        pairs.emplace_back(participant, lookup(p.gaze_session, AnalysisMode::Gaze),
                           lookup(p.text_only_session, AnalysisMode::TextOnly));
    }
    for (const auto& s : sessions)
        if (!paired.count(s.session_id)) throw UnpairedSession("session '" + s.session_id + "' has no pair");

    std::set<std::string> names;
    for (const auto& s : sessions)
        for (const auto& [k, _] : s.values) names.insert(k);

    ConditionSummary out;
    for (const auto& name : names) {
        MeasureSummary m;
        m.name = name;
        std::vector<double> g, c;
        double diff_sum = 0;
        for (const auto& [participant, gs, ts] : pairs) {
            auto gi = gs->values.find(name);
            auto ti = ts->values.find(name);
            if (gi != gs->values.end()) g.push_back(gi->second);
            if (ti != ts->values.end()) c.push_back(ti->second);
            if (gi != gs->values.end() && ti != ts->values.end()) {
                m.pair_diffs.emplace_back(participant, gi->second - ti->second);
                diff_sum += gi->second - ti->second;
            }
        }
        m.gaze = stats(std::move(g));
        m.text_only = stats(std::move(c));
        if (!m.pair_diffs.empty()) m.paired_diff = diff_sum / static_cast<double>(m.pair_diffs.size());
        out.measures.push_back(std::move(m));
    }
    return out;
}

namespace {

std::string number(double v) {
    std::ostringstream o;
    o.precision(10);
    o << v;
    return o.str();
}

std::string csv_field(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return out + "\"";
}

} // namespace

std::string scores_to_csv(std::span<const SessionScores> sessions) {
    std::string out = "participant_id,condition,classifier_or_metric,value\n";
    for (const auto& s : sessions)
        for (const auto& [k, v] : s.values)
            out += csv_field(s.participant_id) + "," + std::string(to_string(s.condition)) + "," + csv_field(k) + "," +
                   number(v) + "\n";
    return out;
}

std::string pair_diffs_to_csv(const ConditionSummary& summary) {
    std::string out = "measure,participant_id,diff\n";
    for (const auto& m : summary.measures)
        for (const auto& [p, d] : m.pair_diffs) out += csv_field(m.name) + "," + csv_field(p) + "," + number(d) + "\n";
    return out;
}

std::string summary_to_json(const ConditionSummary& summary, int indent) {
    ojson j = ojson::array();
    for (const auto& m : summary.measures) {
        j.push_back({{"measure", m.name},
                     {"gaze", {{"mean", m.gaze.mean}, {"sd", m.gaze.sd}, {"n", m.gaze.values.size()}}},
                     {"text_only", {{"mean", m.text_only.mean}, {"sd", m.text_only.sd}, {"n", m.text_only.values.size()}}},
                     {"paired_diff", m.paired_diff},
                     {"pairs", m.pair_diffs.size()}});
    }
    return j.dump(indent);
}

} // namespace gazeguide
