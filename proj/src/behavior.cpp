#include "gazeguide/behavior.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

namespace gazeguide {

using ojson = nlohmann::ordered_json;

void DetectorParams::validate() const {
    if (fixation_min_looks <= 0 || offtext_min_run <= 0 || regression_dedupe_window_ms <= 0 ||
        sample_period_ms <= 0)
        throw ValidationError("detector parameters must all be positive");
}

std::optional<std::size_t> resolve_observation(const GazeObservation& obs,
                                               const PassageModel& passage) {
    if (obs.kind != ObservationKind::Word) return std::nullopt;
    if (obs.word_index && *obs.word_index < passage.word_count() &&
        text::normalize_surface(passage.word(*obs.word_index).surface) ==
            text::normalize_surface(obs.content))
        return obs.word_index;
    return passage.resolve_word(obs.content, obs.context);
}

std::vector<FixationEvent> detect_fixations(std::span<const GazeObservation> obs,
                                            const PassageModel& passage,
                                            const DetectorParams& params) {
    struct Acc {
        std::string display;
        std::vector<std::int64_t> times;
        std::set<std::size_t> words;
        std::map<std::size_t, int> per_sentence;
    };
    std::unordered_map<std::string, Acc> groups;
    for (const auto& o : obs) {
        if (o.kind != ObservationKind::Word) continue;
        auto key = text::normalize_surface(o.content);
        if (key.empty()) continue;
        if (params.ignore_function_words && text::is_function_word(key)) continue;
        auto& acc = groups[key];
        if (acc.display.empty()) acc.display = std::string(text::strip_punctuation(o.content));
        acc.times.push_back(o.t_ms);
        if (auto w = resolve_observation(o, passage)) {
            acc.words.insert(*w);
            ++acc.per_sentence[passage.word(*w).sentence_index];
        }
    }

    std::vector<FixationEvent> out;
    for (auto& [key, acc] : groups) {
        if (static_cast<int>(acc.times.size()) < params.fixation_min_looks) continue;
        FixationEvent ev;
        ev.target_surface = acc.display;
        ev.word_indices = std::move(acc.words);
        int best = 0;
        for (const auto& [s, n] : acc.per_sentence) {
            if (n > best) {
                best = n;
                ev.sentence_index = s;
            }
        }
        ev.look_count = static_cast<int>(acc.times.size());
        ev.look_times_ms = std::move(acc.times);
        out.push_back(std::move(ev));
    }
    std::sort(out.begin(), out.end(), [](const FixationEvent& a, const FixationEvent& b) {
        if (a.look_count != b.look_count) return a.look_count > b.look_count;
        if (a.look_times_ms.front() != b.look_times_ms.front())
            return a.look_times_ms.front() < b.look_times_ms.front();
        return text::to_lower(a.target_surface) < text::to_lower(b.target_surface);
    });
    return out;
}

std::vector<RegressionEvent> detect_regressions(std::span<const GazeObservation> obs,
                                                const PassageModel& passage,
                                                const DetectorParams& params) {
    std::vector<RegressionEvent> out;
    std::optional<std::size_t> max_seen;
    std::unordered_map<std::size_t, std::int64_t> last_event_at;
    for (const auto& o : obs) {
        auto w = resolve_observation(o, passage);
        if (!w) continue;
        const auto& sent = passage.sentence_of_word(*w);
        if (!sent.content) continue;
        const auto s = sent.sentence_index;
        if (max_seen && s < *max_seen) {
            auto it = last_event_at.find(s);
            if (it == last_event_at.end() || o.t_ms - it->second >= params.regression_dedupe_window_ms) {
                out.push_back({o.t_ms, *max_seen, s});
                last_event_at[s] = o.t_ms;
            }
        }
        if (!max_seen || s > *max_seen) max_seen = s;
    }
    return out;
}

std::vector<OffTextEvent> detect_offtext(std::span<const GazeObservation> obs,
                                         const DetectorParams& params) {
    std::vector<OffTextEvent> out;
    std::size_t i = 0;
    while (i < obs.size()) {
        if (obs[i].kind == ObservationKind::Word) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < obs.size() && obs[j].kind != ObservationKind::Word) ++j;
        if (static_cast<int>(j - i) >= params.offtext_min_run) {
            OffTextEvent ev;
            ev.start_ms = obs[i].t_ms;
            ev.end_ms = obs[j - 1].t_ms;
            ev.duration_ms = ev.end_ms - ev.start_ms + params.sample_period_ms;
            // most frequent object label; earliest wins ties
            std::vector<std::pair<std::string, int>> counts;
            for (std::size_t k = i; k < j; ++k) {
                if (obs[k].kind != ObservationKind::Object) continue;
                auto it = std::find_if(counts.begin(), counts.end(),
                                       [&](const auto& c) { return c.first == obs[k].content; });
                if (it == counts.end())
                    counts.emplace_back(obs[k].content, 1);
                else
                    ++it->second;
            }
            int best = 0;
            for (const auto& [label, n] : counts) {
                if (n > best) {
                    best = n;
                    ev.attended_label = label;
                }
            }
            out.push_back(std::move(ev));
        }
        i = j;
    }
    return out;
}

std::vector<SkipEvent> detect_skips(std::span<const GazeObservation> obs,
                                    const PassageModel& passage) {
    std::vector<bool> touched(passage.sentence_count(), false);
    for (const auto& o : obs) {
        if (auto w = resolve_observation(o, passage)) touched[passage.word(*w).sentence_index] = true;
    }
    std::vector<SkipEvent> out;
    for (const auto& s : passage.sentences()) {
        if (!s.content || touched[s.sentence_index]) continue;
        std::string collapsed;
        for (const auto& w : text::split_whitespace(s.text)) {
            if (!collapsed.empty()) collapsed += ' ';
            collapsed += w;
        }
        out.push_back({s.sentence_index, std::move(collapsed)});
    }
    return out;
}

std::string format_look_times(std::span<const std::int64_t> times_ms) {
    std::string out;
    std::size_t i = 0;
    while (i < times_ms.size()) {
        auto sec = times_ms[i] / 1000;
        std::size_t j = i;
        while (j < times_ms.size() && times_ms[j] / 1000 == sec) ++j;
        if (!out.empty()) out += ", ";
        out += std::to_string(sec) + "s";
        auto n = j - i;
        if (n == 2)
            out += " (twice)";
        else if (n > 2)
            out += " (" + std::to_string(n) + " times)";
        i = j;
    }
    return out;
}

namespace {

std::string seconds_text(std::int64_t ms) {
    std::ostringstream o;
    o.precision(1);
    o << std::fixed << static_cast<double>(ms) / 1000.0;
    return o.str();
}

} // namespace

std::string render_report_text(const BehaviorReport& r, const PassageModel& passage) {
    std::ostringstream out;
    out << "# Eye tracking\n";

    out << "Fixations (repeated looks at the same word):\n";
    if (r.fixations.empty()) out << "- There were no significant fixations.\n";
    for (const auto& f : r.fixations) {
        out << "- " << f.target_surface;
        if (f.sentence_index)
            out << " (sentence " << *f.sentence_index << ")";
        else
            out << " (not in the passage)";
        out << ": ~" << f.look_count << " looks at " << format_look_times(f.look_times_ms) << ".\n";
    }

    out << "Regressions (returning to previous sentences):\n";
    if (r.regressions.empty()) out << "- There were no significant regressions.\n";
    for (const auto& g : r.regressions) {
        out << "- at " << g.at_ms / 1000 << "s: back to sentence " << g.to_sentence
            << " after reaching sentence " << g.from_sentence << ".\n";
    }

    out << "Off-text pauses (looking away from the text):\n";
    if (r.offtext.empty()) out << "- There were no significant off-text pauses.\n";
    for (const auto& o : r.offtext) {
        out << "- at " << o.start_ms / 1000 << "s (~" << seconds_text(o.duration_ms) << " seconds): ";
        if (o.attended_label.empty())
            out << "away from any word.\n";
        else
            out << "looked at the " << o.attended_label << ".\n";
    }

    out << "Skipping content:\n";
    if (r.skips.empty()) {
        out << "- No clear skipping. Every sentence of the paragraph has at least one word "
               "observation (no significant skipping).\n";
    }
    for (const auto& s : r.skips) {
        out << "- sentence " << s.sentence_index << " was never looked at: '"
            << s.sentence_text << "'.\n";
    }
    (void)passage;

    out << "\n# Need help (if any)\n" << kNeedHelpPlaceholder << "\n";
    return out.str();
}

BehaviorReport render_report(BehaviorReport events, const PassageModel& passage) {
    events.rendered_text = render_report_text(events, passage);
    return events;
}

BehaviorReport analyze_behavior(std::span<const GazeObservation> obs, const PassageModel& passage,
                                const DetectorParams& params) {
    params.validate();
    BehaviorReport r;
    r.passage_id = passage.passage_id();
    r.params_used = params;
    r.fixations = detect_fixations(obs, passage, params);
    r.regressions = detect_regressions(obs, passage, params);
    r.offtext = detect_offtext(obs, params);
    r.skips = detect_skips(obs, passage);
    r.rendered_text = render_report_text(r, passage);
    return r;
}

std::string report_to_json(const BehaviorReport& r, int indent) {
    ojson j;
    j["passage_id"] = r.passage_id;
    auto& fx = j["fixations"] = ojson::array();
    for (const auto& f : r.fixations) {
        ojson e;
        e["target_surface"] = f.target_surface;
        e["word_indices"] = std::vector<std::size_t>(f.word_indices.begin(), f.word_indices.end());
        e["sentence_index"] = f.sentence_index ? ojson(*f.sentence_index) : ojson(nullptr);
        e["look_times_ms"] = f.look_times_ms;
        e["look_count"] = f.look_count;
        fx.push_back(std::move(e));
    }
    auto& rg = j["regressions"] = ojson::array();
    for (const auto& g : r.regressions)
        rg.push_back({{"at_ms", g.at_ms}, {"from_sentence", g.from_sentence}, {"to_sentence", g.to_sentence}});
    auto& ot = j["offtext"] = ojson::array();
    for (const auto& o : r.offtext)
        ot.push_back({{"start_ms", o.start_ms},
                      {"end_ms", o.end_ms},
                      {"duration_ms", o.duration_ms},
                      {"attended_label", o.attended_label}});
    auto& sk = j["skips"] = ojson::array();
    for (const auto& s : r.skips)
        sk.push_back({{"sentence_index", s.sentence_index}, {"sentence_text", s.sentence_text}});
    j["params"] = {{"fixation_min_looks", r.params_used.fixation_min_looks},
                   {"offtext_min_run", r.params_used.offtext_min_run},
                   {"regression_dedupe_window_ms", r.params_used.regression_dedupe_window_ms},
                   {"sample_period_ms", r.params_used.sample_period_ms},
                   {"ignore_function_words", r.params_used.ignore_function_words}};
    j["rendered_text"] = r.rendered_text;
    return j.dump(indent);
}

BehaviorReport report_from_json(std::string_view json) {
    BehaviorReport r;
    try {
        auto j = ojson::parse(json);
        r.passage_id = j.value("passage_id", "");
        for (const auto& e : j.at("fixations")) {
            FixationEvent f;
            f.target_surface = e.at("target_surface").get<std::string>();
            for (auto w : e.at("word_indices")) f.word_indices.insert(w.get<std::size_t>());
            if (e.contains("sentence_index") && !e["sentence_index"].is_null())
                f.sentence_index = e["sentence_index"].get<std::size_t>();
            f.look_times_ms = e.at("look_times_ms").get<std::vector<std::int64_t>>();
            f.look_count = e.at("look_count").get<int>();
            r.fixations.push_back(std::move(f));
        }
        for (const auto& e : j.at("regressions"))
            r.regressions.push_back({e.at("at_ms").get<std::int64_t>(),
                                     e.at("from_sentence").get<std::size_t>(),
                                     e.at("to_sentence").get<std::size_t>()});
        for (const auto& e : j.at("offtext"))
            r.offtext.push_back({e.at("start_ms").get<std::int64_t>(), e.at("end_ms").get<std::int64_t>(),
                                 e.at("duration_ms").get<std::int64_t>(),
                                 e.value("attended_label", "")});
        for (const auto& e : j.at("skips"))
            r.skips.push_back({e.at("sentence_index").get<std::size_t>(), e.value("sentence_text", "")});
        if (j.contains("params")) {
            const auto& p = j["params"];
            r.params_used.fixation_min_looks = p.value("fixation_min_looks", 2);
            r.params_used.offtext_min_run = p.value("offtext_min_run", 2);
            r.params_used.regression_dedupe_window_ms = p.value("regression_dedupe_window_ms", 1000);
            r.params_used.sample_period_ms = p.value("sample_period_ms", kDefaultSamplePeriodMs);
            r.params_used.ignore_function_words = p.value("ignore_function_words", true);
        }
        r.rendered_text = j.value("rendered_text", "");
    } catch (const ojson::exception& e) {
        throw ValidationError(std::string("behavior report JSON: ") + e.what());
    }
    return r;
}

} // namespace gazeguide
