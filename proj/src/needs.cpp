#include "gazeguide/needs.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/prompts.hpp"
#include "gazeguide/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace gazeguide {

using ojson = nlohmann::ordered_json;

std::string_view to_string(AnalysisMode mode) {
    return mode == AnalysisMode::Gaze ? "gaze" : "text_only";
}

std::optional<AnalysisMode> parse_analysis_mode(std::string_view s) {
    if (s == "gaze") return AnalysisMode::Gaze;
    if (s == "text_only" || s == "text") return AnalysisMode::TextOnly;
    return std::nullopt;
}

std::string_view to_string(EvidenceKind kind) {
    switch (kind) {
    case EvidenceKind::Fixation: return "fixation";
    case EvidenceKind::Regression: return "regression";
    case EvidenceKind::Offtext: return "offtext";
    case EvidenceKind::Skip: return "skip";
    }
    return "fixation";
}

namespace {

std::optional<EvidenceKind> parse_evidence_kind(std::string_view s) {
    if (s == "fixation") return EvidenceKind::Fixation;
    if (s == "regression") return EvidenceKind::Regression;
    if (s == "offtext") return EvidenceKind::Offtext;
    if (s == "skip") return EvidenceKind::Skip;
    return std::nullopt;
}

std::string sentence_id(const char* prefix, std::size_t s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s:s%03zu", prefix, s);
    return buf;
}

std::string numbered_id(const char* prefix, std::size_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s:%03zu", prefix, n);
    return buf;
}

std::string format_strength(double s) {
    std::ostringstream o;
    if (s == static_cast<double>(static_cast<long long>(s)))
        o << static_cast<long long>(s);
    else {
        o.precision(1);
        o << std::fixed << s;
    }
    return o.str();
}

std::string need_lines(const std::vector<NeedHypothesis>& needs) {
    if (needs.empty()) return "No need for help stood out.";
    std::string out;
    for (const auto& n : needs) {
        if (!out.empty()) out += '\n';
        out += "- " + n.description + " (strength " + format_strength(n.strength);
        if (n.last_evidence_ms > 0) out += ", last evidence at " + std::to_string(n.last_evidence_ms / 1000) + "s";
        out += ")";
    }
    return out;
}

std::string collapse(std::string_view s) {
    std::string out;
    for (const auto& w : text::split_whitespace(s)) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

std::string finish(AnalysisResult& r, const PassageModel& passage) {
    rank_needs(r.need_help);
    r.intervention = r.need_help.empty() ? "none" : propose_need(r.need_help.front(), passage);
    return r.intervention;
}

} // namespace

bool need_precedes(const NeedHypothesis& a, const NeedHypothesis& b) {
    if (a.strength != b.strength) return a.strength > b.strength;
    if (a.last_evidence_ms != b.last_evidence_ms) return a.last_evidence_ms > b.last_evidence_ms;
    return a.need_id < b.need_id;
}

void rank_needs(std::vector<NeedHypothesis>& needs) {
    std::stable_sort(needs.begin(), needs.end(), need_precedes);
}

AnalysisResult infer_needs_rules(const BehaviorReport& report, const PassageModel& passage,
                                 std::int64_t produced_at_ms) {
    if (!report.passage_id.empty() && report.passage_id != passage.passage_id())
        throw PassageMismatch("report is for passage '" + report.passage_id + "', not '" +
                              passage.passage_id() + "'");
    AnalysisResult r;
    r.mode = AnalysisMode::Gaze;
    r.produced_at_ms = produced_at_ms;
    auto is_content = [&](std::optional<std::size_t> s) {
        return s && *s < passage.sentence_count() && passage.sentence(*s).content;
    };

    for (std::size_t i = 0; i < report.fixations.size(); ++i) {
        const auto& f = report.fixations[i];
        if (!is_content(f.sentence_index)) continue;
        NeedHypothesis h;
        h.need_id = "fix:" + text::normalize_surface(f.target_surface);
        h.description = "clarify term '" + f.target_surface + "'";
        h.target.word_indices.assign(f.word_indices.begin(), f.word_indices.end());
        h.target.sentence_index = f.sentence_index;
        h.evidence.push_back({EvidenceKind::Fixation, i});
        h.strength = f.look_count;
        h.last_evidence_ms = f.look_times_ms.back();
        r.need_help.push_back(std::move(h));
    }

    std::map<std::size_t, NeedHypothesis> by_sentence;
    for (std::size_t i = 0; i < report.regressions.size(); ++i) {
        const auto& g = report.regressions[i];
        if (!is_content(g.to_sentence)) continue;
        auto& h = by_sentence[g.to_sentence];
        if (h.need_id.empty()) {
            h.need_id = sentence_id("reg", g.to_sentence);
            h.description = "re-explain relation in sentence " + std::to_string(g.to_sentence);
            h.target.sentence_index = g.to_sentence;
        }
        h.evidence.push_back({EvidenceKind::Regression, i});
        h.strength += 1;
        h.last_evidence_ms = std::max(h.last_evidence_ms, g.at_ms);
    }
    for (auto& [_, h] : by_sentence) r.need_help.push_back(std::move(h));

    for (std::size_t i = 0; i < report.offtext.size(); ++i) {
        const auto& o = report.offtext[i];
        std::optional<std::size_t> best;
        std::int64_t best_t = 0;
        for (std::size_t j = 0; j < report.fixations.size(); ++j) {
            const auto& f = report.fixations[j];
            if (!is_content(f.sentence_index)) continue;
            for (auto t : f.look_times_ms) {
                if (t < o.start_ms && o.start_ms - t <= 2000 && (!best || t > best_t)) {
                    best = j;
                    best_t = t;
                }
            }
        }
        if (!best) continue;
        const auto& f = report.fixations[*best];
        NeedHypothesis h;
        h.need_id = "off:" + std::to_string(o.start_ms);
        h.description = "heavy processing after '" + f.target_surface + "'";
        h.target.word_indices.assign(f.word_indices.begin(), f.word_indices.end());
        h.target.sentence_index = f.sentence_index;
        h.evidence = {{EvidenceKind::Offtext, i}, {EvidenceKind::Fixation, *best}};
        h.strength = static_cast<double>(o.duration_ms) / 1000.0;
        h.last_evidence_ms = o.end_ms;
        r.need_help.push_back(std::move(h));
    }

    for (std::size_t i = 0; i < report.skips.size(); ++i) {
        const auto& s = report.skips[i];
        if (!is_content(s.sentence_index)) continue;
        NeedHypothesis h;
        h.need_id = sentence_id("skip", s.sentence_index);
        h.description = "check skipped sentence " + std::to_string(s.sentence_index);
        h.target.sentence_index = s.sentence_index;
        h.evidence.push_back({EvidenceKind::Skip, i});
        h.strength = 0.5;
        r.need_help.push_back(std::move(h));
    }

    finish(r, passage);
    std::string rendered = report.rendered_text.empty() ? render_report_text(report, passage) : report.rendered_text;
    auto pos = rendered.find(kNeedHelpPlaceholder);
    if (pos != std::string::npos) rendered.replace(pos, kNeedHelpPlaceholder.size(), need_lines(r.need_help));
    r.observations_text = std::move(rendered);
    return r;
}

std::optional<LlmInput> parse_llm_input(std::string_view s) {
    if (s == "wordlist") return LlmInput::Wordlist;
    if (s == "summary") return LlmInput::Summary;
    if (s == "both") return LlmInput::Both;
    return std::nullopt;
}

std::string build_eye_tracking_prompt(const PassageModel& passage, std::span<const GazeObservation> obs,
                                      const BehaviorReport* report, LlmInput input) {
    std::string wordlist;
    if (input != LlmInput::Summary) wordlist = format_observation_log(obs);
    if (input != LlmInput::Wordlist) {
        if (!report) throw ValidationError("summary input needs a behavior report");
        auto summary = report->rendered_text.empty() ? render_report_text(*report, passage) : report->rendered_text;
        if (auto pos = summary.find("\n# Need help"); pos != std::string::npos) summary.erase(pos);
        if (!wordlist.empty()) wordlist += '\n';
        wordlist += summary;
    }
    while (!wordlist.empty() && wordlist.back() == '\n') wordlist.pop_back();
    return prompts::fill(prompts::kEyeTrackingAnalysis,
                         {{"paragraph_content", passage.content_text()}, {"eye_tracking_wordlist", wordlist}});
}

std::string build_text_only_prompt(const PassageModel& passage) {
    return prompts::fill(prompts::kTextOnlyAnalysis, {{"paragraph", passage.content_text()}});
}

std::string build_realtime_prompt(const PassageModel& passage, std::span<const GazeObservation> obs) {
    auto wordlist = format_observation_log(obs);
    while (!wordlist.empty() && wordlist.back() == '\n') wordlist.pop_back();
    return prompts::fill(prompts::kRealtimeIntervention,
                         {{"paragraph_content", passage.content_text()}, {"eye_tracking_wordlist", wordlist}});
}

namespace {

std::vector<std::string> split_lines(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto nl = s.find('\n', start);
        out.emplace_back(s.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    for (auto& l : out)
        if (!l.empty() && l.back() == '\r') l.pop_back();
    return out;
}

std::string strip_bold(std::string s) {
    for (auto pos = s.find("**"); pos != std::string::npos; pos = s.find("**")) s.erase(pos, 2);
    return s;
}

// Text after a list marker, or nullopt when the line is not a list item.
std::optional<std::string> list_item(std::string_view line) {
    auto t = text::trim(line);
    if (t.empty()) return std::nullopt;
    for (std::string_view marker : {"- ", "* ", "\xE2\x80\xA2 "}) {
        if (t.rfind(marker, 0) == 0) return text::trim(t.substr(marker.size()));
    }
    std::size_t i = 0;
    while (i < t.size() && std::isdigit(static_cast<unsigned char>(t[i]))) ++i;
    if (i > 0 && i + 1 < t.size() && (t[i] == '.' || t[i] == ')') && t[i + 1] == ' ')
        return text::trim(t.substr(i + 2));
    return std::nullopt;
}

bool is_heading(std::string_view line) {
    auto t = text::trim(line);
    return !t.empty() && (t.front() == '#' || (t.rfind("**", 0) == 0 && !list_item(t)));
}

// Items of the first list at or after line `from`; preamble lines before the
// first item are skipped, continuation lines are joined into their item.
std::vector<std::string> collect_list(const std::vector<std::string>& lines, std::size_t from) {
    std::vector<std::string> items;
    bool blank_since_item = false;
    for (std::size_t i = from; i < lines.size(); ++i) {
        const auto& line = lines[i];
        auto item = list_item(line);
        if (item) {
            items.push_back(strip_bold(*item));
            blank_since_item = false;
            continue;
        }
        if (items.empty()) {
            if (is_heading(line) && i > from) break;
            continue;
        }
        if (text::trim(line).empty()) {
            blank_since_item = true;
            continue;
        }
        if (blank_since_item || is_heading(line)) break;
        items.back() += " " + strip_bold(text::trim(line));
    }
    return items;
}

std::optional<std::size_t> find_line(const std::vector<std::string>& lines, std::string_view needle) {
    for (std::size_t i = 0; i < lines.size(); ++i)
        if (text::contains_ci(lines[i], needle)) return i;
    return std::nullopt;
}

std::vector<NeedHypothesis> hypotheses_from_items(const std::vector<std::string>& items, const char* prefix,
                                                  const PassageModel& passage) {
    std::vector<NeedHypothesis> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        NeedHypothesis h;
        h.need_id = numbered_id(prefix, i + 1);
        h.description = items[i];
        h.target.sentence_index = locate_sentence(items[i], passage);
        h.strength = static_cast<double>(items.size() - i);
        out.push_back(std::move(h));
    }
    return out;
}

std::vector<NeedHypothesis> degraded(std::string_view reply, const char* prefix, const PassageModel& passage) {
    NeedHypothesis h;
    h.need_id = std::string(prefix) + ":raw";
    h.description = text::trim(reply);
    h.target.sentence_index = locate_sentence(h.description, passage);
    h.strength = 1;
    return {h};
}

} // namespace

std::vector<std::string> parse_need_help_items(std::string_view reply) {
    auto lines = split_lines(reply);
    auto at = find_line(lines, "need help");
    if (!at) return {};
    auto items = collect_list(lines, *at + 1);
    if (items.empty()) {
        // "Need help: <inline text>"
        const auto& head = lines[*at];
        auto colon = head.find(':');
        if (colon != std::string::npos) {
            auto rest = strip_bold(text::trim(head.substr(colon + 1)));
            if (!rest.empty()) items.push_back(rest);
        }
    }
    return items;
}

std::vector<std::string> parse_struggle_items(std::string_view reply) {
    auto lines = split_lines(reply);
    if (auto at = find_line(lines, "struggled with")) {
        auto items = collect_list(lines, *at + 1);
        if (!items.empty()) return items;
    }
    return parse_need_help_items(reply);
}

AnalysisResult infer_needs_llm(const BehaviorReport& report, std::span<const GazeObservation> obs,
                               const PassageModel& passage, LlmClient& client, int retries, LlmInput input,
                               std::int64_t produced_at_ms) {
    if (!report.passage_id.empty() && report.passage_id != passage.passage_id())
        throw PassageMismatch("report is for passage '" + report.passage_id + "', not '" +
                              passage.passage_id() + "'");
    auto reply = complete_with_retries(client, build_eye_tracking_prompt(passage, obs, &report, input), retries);
    AnalysisResult r;
    r.mode = AnalysisMode::Gaze;
    r.produced_at_ms = produced_at_ms;
    r.observations_text = reply;
    auto items = parse_need_help_items(reply);
    r.need_help = items.empty() ? degraded(reply, "llm", passage) : hypotheses_from_items(items, "llm", passage);
    finish(r, passage);
    return r;
}

AnalysisResult infer_needs_text_only(const PassageModel& passage, LlmClient& client, int retries,
                                     std::int64_t produced_at_ms) {
    auto reply = complete_with_retries(client, build_text_only_prompt(passage), retries);
    AnalysisResult r;
    r.mode = AnalysisMode::TextOnly;
    r.produced_at_ms = produced_at_ms;
    r.observations_text = reply;
    auto items = parse_struggle_items(reply);
    r.need_help = items.empty() ? degraded(reply, "text", passage) : hypotheses_from_items(items, "text", passage);
    finish(r, passage);
    return r;
}

AnalysisResult infer_needs_text_only_rules(const PassageModel& passage, std::span<const PassageModel> corpus,
                                           std::int64_t produced_at_ms) {
    auto content_tokens = [](const PassageModel& p) {
        std::set<std::string> out;
        for (const auto& w : p.words()) {
            if (!p.sentence(w.sentence_index).content) continue;
            auto k = text::normalize_surface(w.surface);
            if (text::is_content_word(k)) out.insert(k);
        }
        return out;
    };
    std::map<std::string, int> df;
    bool self_in_corpus = false;
    for (const auto& p : corpus) {
        if (p.passage_id() == passage.passage_id()) self_in_corpus = true;
        for (const auto& k : content_tokens(p)) ++df[k];
    }
    if (!self_in_corpus)
        for (const auto& k : content_tokens(passage)) ++df[k];

    AnalysisResult r;
    r.mode = AnalysisMode::TextOnly;
    r.produced_at_ms = produced_at_ms;
    std::string analysis;
    for (const auto& s : passage.sentences()) {
        if (!s.content) continue;
        std::vector<std::string> rare;
        std::vector<std::size_t> words;
        for (auto w = s.first_word; w < s.first_word + s.word_count; ++w) {
            auto k = text::normalize_surface(passage.word(w).surface);
            if (!text::is_content_word(k) || df[k] != 1) continue;
            if (std::find(rare.begin(), rare.end(), k) == rare.end()) rare.push_back(k);
            words.push_back(w);
        }
        if (rare.empty()) continue;
        NeedHypothesis h;
        h.need_id = sentence_id("rare", s.sentence_index);
        std::string terms;
        for (const auto& k : rare) terms += (terms.empty() ? "" : ", ") + k;
        h.description = "unpack sentence " + std::to_string(s.sentence_index) + " (uncommon terms: " + terms + ")";
        h.target.sentence_index = s.sentence_index;
        h.target.word_indices = std::move(words);
        h.strength = static_cast<double>(rare.size());
        r.need_help.push_back(std::move(h));
    }
    finish(r, passage);
    r.observations_text = "# Analysis\nSentences with terms that no other bundled passage uses.\n\n"
                          "# Need help (if any)\n" + need_lines(r.need_help) + "\n";
    return r;
}

AnalysisResult parse_realtime_reply(std::string_view reply, const PassageModel& passage,
                                    std::int64_t produced_at_ms) {
    ojson j;
    try {
        j = ojson::parse(reply);
    } catch (const ojson::parse_error& e) {
        throw SchemaViolation(std::string("realtime reply is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw SchemaViolation("realtime reply must be a JSON object");
    for (const auto& [k, _] : j.items())
        if (k != "observations" && k != "need_help" && k != "intervention")
            throw SchemaViolation("unexpected field '" + k + "' in realtime reply");
    auto strings = [&](const char* key) {
        if (!j.contains(key) || !j[key].is_array()) throw SchemaViolation(std::string("'") + key + "' must be an array");
        std::vector<std::string> out;
        for (const auto& v : j[key]) {
            if (!v.is_string()) throw SchemaViolation(std::string("'") + key + "' must hold strings");
            out.push_back(v.get<std::string>());
        }
        return out;
    };
    auto observations = strings("observations");
    auto items = strings("need_help");
    if (!j.contains("intervention") || !j["intervention"].is_string() ||
        text::trim(j["intervention"].get<std::string>()).empty())
        throw SchemaViolation("'intervention' must be a non-empty string");

    AnalysisResult r;
    r.mode = AnalysisMode::Gaze;
    r.produced_at_ms = produced_at_ms;
    for (std::size_t i = 0; i < observations.size(); ++i)
        r.observations_text += (i ? "\n" : "") + observations[i];
    r.need_help = hypotheses_from_items(items, "llm", passage);
    rank_needs(r.need_help);
    r.intervention = j["intervention"].get<std::string>();
    return r;
}

AnalysisResult infer_needs_realtime(std::span<const GazeObservation> obs, const PassageModel& passage,
                                    LlmClient& client, int retries, std::int64_t produced_at_ms) {
    auto reply = complete_with_retries(client, build_realtime_prompt(passage, obs), retries);
    return parse_realtime_reply(reply, passage, produced_at_ms);
}

std::optional<std::size_t> locate_sentence(std::string_view description, const PassageModel& passage) {
    std::set<std::string> wanted;
    for (const auto& t : text::normalized_tokens(description))
        if (text::is_content_word(t)) wanted.insert(t);
    std::optional<std::size_t> best;
    std::size_t best_n = 0;
    for (const auto& s : passage.sentences()) {
        if (!s.content) continue;
        std::set<std::string> shared;
        for (auto w = s.first_word; w < s.first_word + s.word_count; ++w) {
            auto k = text::normalize_surface(passage.word(w).surface);
            if (wanted.count(k)) shared.insert(k);
        }
        if (shared.size() > best_n) {
            best_n = shared.size();
            best = s.sentence_index;
        }
    }
    return best;
}

std::string need_focus(const NeedHypothesis& need, const PassageModel& passage) {
    const auto& id = need.need_id;
    auto surface = [&]() -> std::string {
        if (need.target.word_indices.empty()) return {};
        return passage.word(need.target.word_indices.front()).surface;
    };
    if (id.rfind("fix:", 0) == 0 && !surface().empty()) return "the term '" + surface() + "'";
    if (id.rfind("off:", 0) == 0 && !surface().empty()) return "what came right after '" + surface() + "'";
    if ((id.rfind("reg:", 0) == 0 || id.rfind("skip:", 0) == 0 || id.rfind("rare:", 0) == 0) &&
        need.target.sentence_index && *need.target.sentence_index < passage.sentence_count()) {
        const auto& s = passage.sentence(*need.target.sentence_index);
        return "the sentence that starts '" + text::truncate_words(collapse(s.text), 6) + "'";
    }
    auto head = need.description.substr(0, need.description.find(':'));
    return "this point: " + text::truncate_words(collapse(head), 15);
}

std::string propose_need(const NeedHypothesis& need, const PassageModel& passage) {
    return "It seems " + need_focus(need, passage) + " might have been tricky. Would you like to go over it?";
}

std::string analysis_to_json(const AnalysisResult& a, int indent) {
    ojson j;
    j["observations"] = split_lines(a.observations_text);
    auto& needs = j["need_help"] = ojson::array();
    for (const auto& n : a.need_help) {
        ojson e;
        e["need_id"] = n.need_id;
        e["description"] = n.description;
        e["target"] = {{"word_indices", n.target.word_indices},
                       {"sentence_index", n.target.sentence_index ? ojson(*n.target.sentence_index) : ojson(nullptr)}};
        auto& ev = e["evidence"] = ojson::array();
        for (const auto& r : n.evidence) ev.push_back({{"kind", std::string(to_string(r.kind))}, {"index", r.index}});
        e["strength"] = n.strength;
        e["last_evidence_ms"] = n.last_evidence_ms;
        needs.push_back(std::move(e));
    }
    j["intervention"] = a.intervention;
    j["mode"] = std::string(to_string(a.mode));
    j["produced_at_ms"] = a.produced_at_ms;
    return j.dump(indent);
}

AnalysisResult analysis_from_json(std::string_view json) {
    AnalysisResult a;
    try {
        auto j = ojson::parse(json);
        const auto& obs = j.at("observations");
        if (obs.is_string()) {
            a.observations_text = obs.get<std::string>();
        } else {
            bool first = true;
            for (const auto& line : obs) {
                if (!first) a.observations_text += '\n';
                a.observations_text += line.get<std::string>();
                first = false;
            }
        }
        for (const auto& e : j.at("need_help")) {
            NeedHypothesis n;
            if (e.is_string()) {
                n.description = e.get<std::string>();
                a.need_help.push_back(std::move(n));
                continue;
            }
            n.need_id = e.value("need_id", "");
            n.description = e.at("description").get<std::string>();
            if (e.contains("target")) {
                const auto& t = e["target"];
                n.target.word_indices = t.value("word_indices", std::vector<std::size_t>{});
                if (t.contains("sentence_index") && !t["sentence_index"].is_null())
                    n.target.sentence_index = t["sentence_index"].get<std::size_t>();
            }
            for (const auto& r : e.value("evidence", ojson::array())) {
                auto kind = parse_evidence_kind(r.at("kind").get<std::string>());
                if (!kind) throw SchemaViolation("unknown evidence kind");
                n.evidence.push_back({*kind, r.at("index").get<std::size_t>()});
            }
            n.strength = e.value("strength", 0.0);
            n.last_evidence_ms = e.value("last_evidence_ms", std::int64_t{0});
            a.need_help.push_back(std::move(n));
        }
        a.intervention = j.at("intervention").get<std::string>();
        auto mode = parse_analysis_mode(j.value("mode", "gaze"));
        if (!mode) throw SchemaViolation("unknown analysis mode");
        a.mode = *mode;
        a.produced_at_ms = j.value("produced_at_ms", std::int64_t{0});
    } catch (const ojson::exception& e) {
        throw SchemaViolation(std::string("analysis JSON: ") + e.what());
    }
    return a;
}

} // namespace gazeguide
