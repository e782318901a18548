#include "gazeguide/sim.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace gazeguide {

using ojson = nlohmann::ordered_json;

std::string_view to_string(InjectionKind kind) {
    switch (kind) {
    case InjectionKind::Fixate: return "fixate";
    case InjectionKind::Regress: return "regress";
    case InjectionKind::Offtext: return "offtext";
    case InjectionKind::Skip: return "skip";
    }
    return "fixate";
}

namespace {

std::optional<InjectionKind> parse_injection_kind(std::string_view s) {
    if (s == "fixate") return InjectionKind::Fixate;
    if (s == "regress") return InjectionKind::Regress;
    if (s == "offtext") return InjectionKind::Offtext;
    if (s == "skip") return InjectionKind::Skip;
    return std::nullopt;
}

const std::string* surface_target(const InjectedEvent& ev) {
    return std::get_if<std::string>(&ev.target);
}

std::optional<std::size_t> sentence_target(const InjectedEvent& ev) {
    if (auto p = std::get_if<std::size_t>(&ev.target)) return *p;
    return std::nullopt;
}

std::set<std::size_t> skipped_sentences(const ReaderScript& script) {
    std::set<std::size_t> out;
    for (const auto& ev : script.injected_events)
        if (ev.kind == InjectionKind::Skip) out.insert(*sentence_target(ev));
    return out;
}

bool is_read(const PassageModel& passage, const std::set<std::size_t>& skips, std::size_t s) {
    return s < passage.sentence_count() && passage.sentence(s).content && !skips.count(s);
}

std::optional<std::size_t> last_read_sentence(const PassageModel& passage,
                                              const std::set<std::size_t>& skips) {
    std::optional<std::size_t> out;
    for (std::size_t s = 0; s < passage.sentence_count(); ++s)
        if (is_read(passage, skips, s)) out = s;
    return out;
}

// First occurrence of a surface inside a sentence that the reader reads.
std::optional<std::size_t> locate_target(const PassageModel& passage, const std::set<std::size_t>& skips,
                                         std::string_view surface) {
    for (auto w : passage.find_surface(surface))
        if (is_read(passage, skips, passage.word(w).sentence_index)) return w;
    return std::nullopt;
}

std::size_t regress_anchor(const InjectedEvent& ev, const PassageModel& passage,
                           const std::set<std::size_t>& skips) {
    if (ev.after_sentence) return *ev.after_sentence;
    return last_read_sentence(passage, skips).value_or(0);
}

double unit_double(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

void validate_script(const ReaderScript& script, const PassageModel& passage,
                     const DetectorParams& params) {
    if (!(script.base_wpm > 0)) throw ScriptInvalid("base_wpm must be positive");
    if (script.sample_period_ms <= 0) throw ScriptInvalid("sample_period_ms must be positive");
    if (script.base_wpm * script.sample_period_ms < 60000.0)
        throw ScriptInvalid("base_wpm must be at least " +
                            std::to_string(60000.0 / script.sample_period_ms) +
                            " so that no word gets two baseline samples");
    if (!script.passage_id.empty() && script.passage_id != passage.passage_id())
        throw PassageMismatch("script targets passage '" + script.passage_id + "', got '" +
                              passage.passage_id() + "'");

    const auto skips = skipped_sentences(script);
    std::set<std::string> fixated;
    for (const auto& ev : script.injected_events) {
        const auto sent = sentence_target(ev);
        if (ev.kind == InjectionKind::Fixate) {
            const auto* surface = surface_target(ev);
            if (!surface) throw ScriptInvalid("fixate target must be a word surface");
            auto key = text::normalize_surface(*surface);
            if (key.empty() || (params.ignore_function_words && text::is_function_word(key)))
                throw ScriptInvalid("fixate target '" + *surface + "' is not a content word");
            if (!fixated.insert(key).second)
                throw ScriptInvalid("surface '" + *surface + "' is fixated twice");
            if (!locate_target(passage, skips, *surface))
                throw ScriptTargetMissing("no readable occurrence of '" + *surface + "'");
            auto looks = ev.times_ms.empty() ? ev.magnitude : static_cast<std::int64_t>(ev.times_ms.size());
            if (looks < params.fixation_min_looks)
                throw ScriptInvalid("fixate '" + *surface + "' needs at least " +
                                    std::to_string(params.fixation_min_looks) + " looks");
            for (auto t : ev.times_ms)
                if (t < 0 || t % script.sample_period_ms != 0)
                    throw ScriptInvalid("fixate times must lie on the sample grid");
            continue;
        }
        if (!sent) throw ScriptInvalid(std::string(to_string(ev.kind)) + " target must be a sentence index");
        if (*sent >= passage.sentence_count())
            throw ScriptTargetMissing("sentence " + std::to_string(*sent) + " does not exist");
        if (!passage.sentence(*sent).content)
            throw ScriptInvalid("sentence " + std::to_string(*sent) + " is not reading content");
        switch (ev.kind) {
        case InjectionKind::Skip: break;
        case InjectionKind::Regress: {
            if (ev.magnitude < 1 || ev.magnitude * script.sample_period_ms >= params.regression_dedupe_window_ms + script.sample_period_ms)
                throw ScriptInvalid("regress looks must fit inside one dedupe window");
            auto after = regress_anchor(ev, passage, skips);
            if (!is_read(passage, skips, *sent) || !is_read(passage, skips, after) || after <= *sent)
                throw ScriptInvalid("regress to sentence " + std::to_string(*sent) +
                                    " must follow reading a later sentence");
            break;
        }
        case InjectionKind::Offtext:
            if (!is_read(passage, skips, *sent))
                throw ScriptInvalid("offtext must follow a sentence that is read");
            if (ev.magnitude <= 0 || ev.magnitude % script.sample_period_ms != 0 ||
                ev.magnitude / script.sample_period_ms < params.offtext_min_run)
                throw ScriptInvalid("offtext duration must be a multiple of the sample period "
                                    "covering at least " + std::to_string(params.offtext_min_run) + " samples");
            break;
        case InjectionKind::Fixate: break;
        }
    }
    if (!last_read_sentence(passage, skips)) throw ScriptInvalid("script skips every sentence");
}

SynthesizedTrace synthesize_trace(const ReaderScript& script, const PassageModel& passage,
                                  const LayoutMap& layout, const DetectorParams& params) {
    validate_script(script, passage, params);
    validate_layout(layout, passage);
    const auto p = script.sample_period_ms;
    const auto skips = skipped_sentences(script);

    std::mt19937_64 rng(script.seed);
    auto jittered = [&](const Box& b) {
        double hx = 0.5 * (b.x1 - b.x0), hy = 0.5 * (b.y1 - b.y0);
        double x = b.center_x() + (2.0 * unit_double(rng) - 1.0) * 0.3 * hx;
        double y = b.center_y() + (2.0 * unit_double(rng) - 1.0) * 0.3 * hy;
        return std::pair{x, y};
    };

    struct Item {
        double x = 0, y = 0;
        bool word = true;
    };
    std::vector<Item> items;
    auto push_word = [&](std::size_t w) {
        auto [x, y] = jittered(layout.word_boxes[w]);
        items.push_back({x, y, true});
    };

    std::set<std::string> reserved;
    for (const auto& ev : script.injected_events)
        if (ev.kind == InjectionKind::Fixate) reserved.insert(text::normalize_surface(*surface_target(ev)));
    std::set<std::string> sampled;

    auto eligible = [&](std::size_t s) {
        std::vector<std::size_t> out;
        std::set<std::string> seen;
        const auto& sent = passage.sentence(s);
        for (auto w = sent.first_word; w < sent.first_word + sent.word_count; ++w) {
            auto key = text::normalize_surface(passage.word(w).surface);
            if (key.empty()) continue;
            if (text::is_function_word(key)) {
                out.push_back(w);
                continue;
            }
            if (sampled.count(key) || reserved.count(key) || seen.count(key)) continue;
            seen.insert(key);
            out.push_back(w);
        }
        return out;
    };
    auto mark = [&](std::size_t w) {
        auto key = text::normalize_surface(passage.word(w).surface);
        if (!text::is_function_word(key)) sampled.insert(key);
    };

    struct PendingRegress { std::size_t first_item; std::size_t to; };
    struct PendingOff { std::size_t first_item; std::size_t count; };
    std::vector<PendingRegress> regress_items;
    std::vector<PendingOff> off_items;
    std::vector<FixationLabel> fixation_labels;
    std::map<std::int64_t, std::size_t> fixed_looks;  // t_ms -> word index

    const double ms_per_word = 60000.0 / script.base_wpm;
    for (std::size_t s = 0; s < passage.sentence_count(); ++s) {
        if (!is_read(passage, skips, s)) continue;
        auto e = eligible(s);
        bool holds_target = std::any_of(
            script.injected_events.begin(), script.injected_events.end(), [&](const InjectedEvent& ev) {
                return ev.kind == InjectionKind::Fixate &&
                       passage.word(*locate_target(passage, skips, *surface_target(ev))).sentence_index == s;
            });
        if (e.empty() && !holds_target)
            throw ScriptInvalid("sentence " + std::to_string(s) +
                                " has no word the baseline can sample without adding a fixation");
        const auto& sent = passage.sentence(s);
        auto n = static_cast<std::size_t>(
            std::max<long long>(1, std::llround(sent.word_count * ms_per_word / static_cast<double>(p))));
        n = std::min(n, e.size());
        for (std::size_t k = 0; k < n; ++k) {
            auto w = e[k * e.size() / n];
            mark(w);
            push_word(w);
        }

        for (const auto& ev : script.injected_events) {
            if (ev.kind != InjectionKind::Fixate) continue;
            auto w = *locate_target(passage, skips, *surface_target(ev));
            if (passage.word(w).sentence_index != s) continue;
            if (ev.times_ms.empty()) {
                for (std::int64_t k = 0; k < ev.magnitude; ++k) push_word(w);
                fixation_labels.push_back({*surface_target(ev), static_cast<int>(ev.magnitude)});
            } else {
                for (auto t : ev.times_ms) {
                    if (!fixed_looks.emplace(t, w).second)
                        throw ScriptInvalid("two fixed looks at t=" + std::to_string(t) + " ms");
                }
                fixation_labels.push_back({*surface_target(ev), static_cast<int>(ev.times_ms.size())});
            }
        }

        for (const auto& ev : script.injected_events) {
            if (ev.kind == InjectionKind::Regress && regress_anchor(ev, passage, skips) == s) {
                auto to = *sentence_target(ev);
                auto cand = eligible(to);
                if (cand.size() < static_cast<std::size_t>(ev.magnitude))
                    throw ScriptInvalid("sentence " + std::to_string(to) +
                                        " has too few free words for the regression looks");
                regress_items.push_back({items.size(), to});
                for (std::int64_t k = 0; k < ev.magnitude; ++k) {
                    mark(cand[static_cast<std::size_t>(k)]);
                    push_word(cand[static_cast<std::size_t>(k)]);
                }
            } else if (ev.kind == InjectionKind::Offtext && *sentence_target(ev) == s) {
                auto count = static_cast<std::size_t>(ev.magnitude / p);
                off_items.push_back({items.size(), count});
                if (ev.label.empty()) {
                    auto [x, y] = find_blank_point(layout);
                    for (std::size_t k = 0; k < count; ++k) items.push_back({x, y, false});
                } else {
                    auto it = std::find_if(layout.object_regions.begin(), layout.object_regions.end(),
                                           [&](const ObjectRegion& r) { return r.label == ev.label; });
                    if (it == layout.object_regions.end())
                        throw ScriptTargetMissing("no object region labeled '" + ev.label + "'");
                    for (std::size_t k = 0; k < count; ++k) {
                        auto [x, y] = jittered(it->box);
                        items.push_back({x, y, false});
                    }
                }
            }
        }
    }

    // Lay items on the sample grid, leaving the fixed looks where they were asked for.
    SynthesizedTrace out;
    std::vector<std::int64_t> item_time(items.size());
    std::vector<bool> is_word;
    std::size_t next = 0;
    auto fixed = fixed_looks.begin();
    for (std::int64_t t = 0; next < items.size() || fixed != fixed_looks.end(); t += p) {
        if (fixed != fixed_looks.end() && fixed->first == t) {
            const auto& b = layout.word_boxes[fixed->second];
            auto [x, y] = jittered(b);
            out.samples.push_back({t, x, y, std::nullopt});
            is_word.push_back(true);
            ++fixed;
        } else if (next < items.size()) {
            item_time[next] = t;
            out.samples.push_back({t, items[next].x, items[next].y, std::nullopt});
            is_word.push_back(items[next].word);
            ++next;
        }
    }

    auto& labels = out.labels;
    labels.passage_id = passage.passage_id();
    labels.fixations = std::move(fixation_labels);
    std::map<std::size_t, std::int64_t> last_regress;
    for (const auto& r : regress_items) {
        auto t = item_time[r.first_item];
        auto it = last_regress.find(r.to);
        if (it != last_regress.end() && t - it->second < params.regression_dedupe_window_ms)
            throw ScriptInvalid("two regressions into sentence " + std::to_string(r.to) +
                                " fall inside one dedupe window");
        last_regress[r.to] = t;
        labels.regressions.push_back({t, r.to});
    }
    std::sort(labels.regressions.begin(), labels.regressions.end(),
              [](const auto& a, const auto& b) { return a.at_ms < b.at_ms; });

    // Off-text runs must stay contiguous and be bounded by word samples.
    auto sample_pos = [&](std::int64_t t) { return static_cast<std::size_t>(
        std::lower_bound(out.samples.begin(), out.samples.end(), t,
                         [](const GazeSample& s, std::int64_t v) { return s.t_ms < v; }) - out.samples.begin()); };
    for (const auto& o : off_items) {
        auto start = item_time[o.first_item];
        auto end = item_time[o.first_item + o.count - 1];
        auto a = sample_pos(start), b = sample_pos(end);
        bool ok = b - a + 1 == o.count;
        if (a > 0 && !is_word[a - 1]) ok = false;
        if (b + 1 < is_word.size() && !is_word[b + 1]) ok = false;
        if (!ok) throw ScriptInvalid("off-text pause at t=" + std::to_string(start) +
                                     " ms touches another pause or a fixed look");
        labels.offtext.push_back({start, end, end - start + p});
    }
    for (auto s : skips) labels.skips.push_back({s});
    return out;
}

bool DetectorScores::perfect() const {
    for (const auto* c : {&fixation, &regression, &offtext, &skip})
        if (c->precision != 1.0 || c->recall != 1.0) return false;
    return true;
}

namespace {

template <class Pred, class Label, class Match>
ClassScore score_class(const std::vector<Pred>& predicted, const std::vector<Label>& labels, Match match) {
    ClassScore c;
    c.predicted = predicted.size();
    c.labeled = labels.size();
    std::vector<bool> used(predicted.size(), false);
    for (const auto& l : labels) {
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            if (!used[i] && match(predicted[i], l)) {
                used[i] = true;
                ++c.matched;
                break;
            }
        }
    }
    c.precision = c.predicted == 0 ? 1.0 : static_cast<double>(c.matched) / static_cast<double>(c.predicted);
    c.recall = c.labeled == 0 ? 1.0 : static_cast<double>(c.matched) / static_cast<double>(c.labeled);
    return c;
}

} // namespace

DetectorScores score_detectors(const BehaviorReport& predicted, const GroundTruthLabels& labels) {
    const auto period = predicted.params_used.sample_period_ms;
    DetectorScores s;
    s.fixation = score_class(predicted.fixations, labels.fixations,
                             [](const FixationEvent& p, const FixationLabel& l) {
                                 return text::normalize_surface(p.target_surface) ==
                                        text::normalize_surface(l.surface);
                             });
    s.regression = score_class(predicted.regressions, labels.regressions,
                               [&](const RegressionEvent& p, const RegressionLabel& l) {
                                   return p.to_sentence == l.to_sentence &&
                                          std::llabs(p.at_ms - l.at_ms) <= period;
                               });
    s.offtext = score_class(predicted.offtext, labels.offtext,
                            [&](const OffTextEvent& p, const OffTextLabel& l) {
                                auto lo = std::max(p.start_ms, l.start_ms);
                                auto hi = std::min(p.start_ms + p.duration_ms, l.start_ms + l.duration_ms);
                                auto longer = std::max(p.duration_ms, l.duration_ms);
                                return hi > lo && 2 * (hi - lo) >= longer;
                            });
    s.skip = score_class(predicted.skips, labels.skips, [](const SkipEvent& p, const SkipLabel& l) {
        return p.sentence_index == l.sentence_index;
    });
    return s;
}

ReaderScript parse_script(std::string_view json) {
    ReaderScript s;
    try {
        auto j = ojson::parse(json);
        s.passage_id = j.value("passage_id", "");
        s.base_wpm = j.value("base_wpm", 200.0);
        s.seed = j.value("seed", std::uint64_t{0});
        s.sample_period_ms = j.value("sample_period_ms", kDefaultSamplePeriodMs);
        for (const auto& e : j.value("injected_events", ojson::array())) {
            InjectedEvent ev;
            auto kind = parse_injection_kind(e.at("kind").get<std::string>());
            if (!kind) throw ScriptInvalid("unknown injection kind '" + e.at("kind").get<std::string>() + "'");
            ev.kind = *kind;
            const auto& t = e.at("target");
            if (t.is_string())
                ev.target = t.get<std::string>();
            else if (t.is_number_unsigned())
                ev.target = t.get<std::size_t>();
            else
                throw ScriptInvalid("target must be a surface string or a sentence index");
            ev.magnitude = e.value("magnitude", std::int64_t{0});
            ev.times_ms = e.value("times_ms", std::vector<std::int64_t>{});
            if (e.contains("after_sentence")) ev.after_sentence = e["after_sentence"].get<std::size_t>();
            ev.label = e.value("label", "");
            s.injected_events.push_back(std::move(ev));
        }
    } catch (const ojson::exception& e) {
        throw ScriptInvalid(std::string("reader script JSON: ") + e.what());
    }
    return s;
}

std::string format_script(const ReaderScript& s) {
    ojson j;
    j["passage_id"] = s.passage_id;
    j["base_wpm"] = s.base_wpm;
    j["seed"] = s.seed;
    j["sample_period_ms"] = s.sample_period_ms;
    auto& evs = j["injected_events"] = ojson::array();
    for (const auto& ev : s.injected_events) {
        ojson e;
        e["kind"] = std::string(to_string(ev.kind));
        if (auto p = surface_target(ev))
            e["target"] = *p;
        else
            e["target"] = *sentence_target(ev);
        if (ev.kind != InjectionKind::Skip) e["magnitude"] = ev.magnitude;
        if (!ev.times_ms.empty()) e["times_ms"] = ev.times_ms;
        if (ev.after_sentence) e["after_sentence"] = *ev.after_sentence;
        if (!ev.label.empty()) e["label"] = ev.label;
        evs.push_back(std::move(e));
    }
    return j.dump(2);
}

ReaderScript load_script_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open script file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_script(ss.str());
}

GroundTruthLabels parse_labels(std::string_view json) {
    GroundTruthLabels l;
    try {
        auto j = ojson::parse(json);
        l.passage_id = j.value("passage_id", "");
        for (const auto& e : j.at("fixations"))
            l.fixations.push_back({e.at("surface").get<std::string>(), e.at("look_count").get<int>()});
        for (const auto& e : j.at("regressions"))
            l.regressions.push_back({e.at("at_ms").get<std::int64_t>(), e.at("to_sentence").get<std::size_t>()});
        for (const auto& e : j.at("offtext"))
            l.offtext.push_back({e.at("start_ms").get<std::int64_t>(), e.at("end_ms").get<std::int64_t>(),
                                 e.at("duration_ms").get<std::int64_t>()});
        for (const auto& e : j.at("skips")) l.skips.push_back({e.at("sentence_index").get<std::size_t>()});
    } catch (const ojson::exception& e) {
        throw ValidationError(std::string("labels JSON: ") + e.what());
    }
    return l;
}

std::string format_labels(const GroundTruthLabels& l) {
    ojson j;
    j["passage_id"] = l.passage_id;
    auto& f = j["fixations"] = ojson::array();
    for (const auto& x : l.fixations) f.push_back({{"surface", x.surface}, {"look_count", x.look_count}});
    auto& r = j["regressions"] = ojson::array();
    for (const auto& x : l.regressions) r.push_back({{"at_ms", x.at_ms}, {"to_sentence", x.to_sentence}});
    auto& o = j["offtext"] = ojson::array();
    for (const auto& x : l.offtext)
        o.push_back({{"start_ms", x.start_ms}, {"end_ms", x.end_ms}, {"duration_ms", x.duration_ms}});
    auto& s = j["skips"] = ojson::array();
    for (const auto& x : l.skips) s.push_back({{"sentence_index", x.sentence_index}});
    return j.dump(2);
}

std::string format_scores(const DetectorScores& scores) {
    ojson j;
    auto put = [&](const char* name, const ClassScore& c) {
        j[name] = {{"precision", c.precision}, {"recall", c.recall}, {"predicted", c.predicted},
                   {"labeled", c.labeled}, {"matched", c.matched}};
    };
    put("fixation", scores.fixation);
    put("regression", scores.regression);
    put("offtext", scores.offtext);
    put("skip", scores.skip);
    return j.dump(2);
}

std::vector<ScheduleEntry> parse_schedule(std::string_view contents) {
    std::vector<ScheduleEntry> out;
    std::istringstream in{std::string(contents)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos && (hash == 0 || line[hash - 1] == ' '))
            line.erase(hash);
        auto parts = text::split_whitespace(line);
        if (parts.empty()) continue;
        if (parts.size() < 2) throw ScriptInvalid("schedule line " + std::to_string(lineno) + ": expected '<seconds> <target>'");
        auto target = text::trim(std::string_view(line).substr(line.find(parts[0]) + parts[0].size()));
        if (target.rfind("o:", 0) != 0 && parts.size() != 2)
            throw ScriptInvalid("schedule line " + std::to_string(lineno) + ": unexpected text after the target");
        double sec = 0;
        try {
            std::size_t used = 0;
            sec = std::stod(parts[0], &used);
            if (used != parts[0].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ScriptInvalid("schedule line " + std::to_string(lineno) + ": bad time '" + parts[0] + "'");
        }
        out.push_back({std::llround(sec * 1000.0), target});
    }
    return out;
}

std::pair<double, double> find_blank_point(const LayoutMap& layout) {
    constexpr int n = 97;
    for (int yi = 0; yi < n; ++yi) {
        for (int xi = 0; xi < n; ++xi) {
            double x = (xi + 0.5) / n, y = (yi + 0.5) / n;
            bool covered = std::any_of(layout.word_boxes.begin(), layout.word_boxes.end(),
                                       [&](const Box& b) { return b.contains(x, y); }) ||
                           std::any_of(layout.object_regions.begin(), layout.object_regions.end(),
                                       [&](const ObjectRegion& r) { return r.box.contains(x, y); });
            if (!covered) return {x, y};
        }
    }
    throw ScriptInvalid("layout leaves no blank point for off-text samples");
}

std::vector<GazeSample> realize_schedule(std::span<const ScheduleEntry> schedule,
                                         const PassageModel& passage, const LayoutMap& layout) {
    validate_layout(layout, passage);
    std::vector<GazeSample> out;
    for (const auto& e : schedule) {
        const auto& tgt = e.target;
        GazeSample s;
        s.t_ms = e.t_ms;
        if (tgt == "none") {
            std::tie(s.x, s.y) = find_blank_point(layout);
        } else if (tgt.rfind("o:", 0) == 0) {
            auto label = tgt.substr(2);
            auto it = std::find_if(layout.object_regions.begin(), layout.object_regions.end(),
                                   [&](const ObjectRegion& r) { return r.label == label; });
            if (it == layout.object_regions.end()) throw ScriptTargetMissing("no object region '" + label + "'");
            s.x = it->box.center_x();
            s.y = it->box.center_y();
        } else if (tgt.rfind("w:", 0) == 0) {
            auto at = tgt.rfind('@');
            if (at == std::string::npos || at < 3) throw ScriptInvalid("word target needs '@<sentence>': " + tgt);
            auto surface = tgt.substr(2, at - 2);
            auto rest = tgt.substr(at + 1);
            std::size_t k = 0;
            if (auto hash = rest.find('#'); hash != std::string::npos) {
                k = std::stoul(rest.substr(hash + 1));
                rest.erase(hash);
            }
            auto sent = std::stoul(rest);
            std::optional<std::size_t> found;
            std::size_t seen = 0;
            for (auto w : passage.find_surface(surface)) {
                if (passage.word(w).sentence_index != sent) continue;
                if (seen++ == k) {
                    found = w;
                    break;
                }
            }
            if (!found) throw ScriptTargetMissing("schedule target not in passage: " + tgt);
            s.x = layout.word_boxes[*found].center_x();
            s.y = layout.word_boxes[*found].center_y();
        } else {
            throw ScriptInvalid("unknown schedule target: " + tgt);
        }
        out.push_back(s);
    }
    return out;
}

} // namespace gazeguide
