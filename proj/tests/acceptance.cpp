#include "gazeguide/behavior.hpp"
#include "gazeguide/errors.hpp"
#include "gazeguide/gaze.hpp"
#include "gazeguide/judge.hpp"
#include "gazeguide/needs.hpp"
#include "gazeguide/session.hpp"
#include "gazeguide/sim.hpp"
#include "gazeguide/text.hpp"
#include "gazeguide/triggers.hpp"
#include "oracles/brute.hpp"
#include "oracles/protocol.hpp"
#include "oracles/random_obs.hpp"
#include "oracles/random_script.hpp"
#include "test_support.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

using namespace gazeguide;

namespace {

constexpr double kB2BudgetMs = 1000;
constexpr double kOracleBudgetMs = 30000;
constexpr double kPerfBudgetMs = 100;
constexpr double kAggregationTol = 0.01;
constexpr std::size_t kMinMutations = 20;
constexpr std::size_t kWordBudget = 50;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Collects failures for one criterion; the first few are printed.
struct Check {
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
    bool ok() const { return failures.empty(); }
};

int failed = 0;

void criterion(const std::string& name, const std::function<std::string(Check&)>& body) {
    Check c;
    std::string detail;
    try {
        detail = body(c);
    } catch (const std::exception& e) {
        c.failures.push_back(std::string("exception: ") + e.what());
    }
    std::cout << (c.ok() ? "PASS " : "FAIL ") << name;
    if (!detail.empty()) std::cout << " (" << detail << ")";
    std::cout << "\n";
    for (std::size_t i = 0; i < c.failures.size() && i < 5; ++i) std::cout << "    " << c.failures[i] << "\n";
    if (c.failures.size() > 5) std::cout << "    ... " << c.failures.size() - 5 << " more\n";
    if (!c.ok()) ++failed;
}

BehaviorReport detect(std::span<const GazeSample> trace, const PassageModel& p, const LayoutMap& l) {
    ActionList list;
    for (const auto& s : trace) append_sample(list, s, l, p);
    return analyze_behavior(list.observations(), p);
}

const FixationEvent* fixation_on(const BehaviorReport& r, std::string_view key) {
    for (const auto& f : r.fixations)
        if (text::normalize_surface(f.target_surface) == key) return &f;
    return nullptr;
}

std::string golden(Check& c) {
    auto p = testing::bundled("superdeterminism");
    auto layout = load_layout_file(testing::data_dir() / "fixtures" / "superdeterminism.layout");
    auto trace = load_trace_file(testing::data_dir() / "fixtures" / "superdeterminism.trace.jsonl");
    auto t0 = Clock::now();
    validate_layout(layout, p);
    auto report = detect(trace, p, layout);
    auto analysis = infer_needs_rules(report, p, trace.back().t_ms);
    double elapsed = ms_since(t0);

    const auto* sd = fixation_on(report, "superdeterminism");
    c.expect(sd != nullptr, "no Superdeterminism fixation");
    if (sd) {
        c.expect(sd->look_count == 6, "Superdeterminism looks " + std::to_string(sd->look_count));
        c.expect(sd->look_times_ms == std::vector<std::int64_t>{10000, 47000, 47500, 48000, 48500, 55000},
                 "Superdeterminism look times");
    }
    const auto* th = fixation_on(report, "theorem");
    c.expect(th != nullptr && th->look_count == 8, "theorem group is not 8 looks");
    std::vector<std::array<std::int64_t, 2>> off;
    for (const auto& o : report.offtext) off.push_back({o.start_ms, o.duration_ms});
    c.expect(off == std::vector<std::array<std::int64_t, 2>>{{46000, 1000}, {61000, 1000}},
             "off-text events are not exactly 46 s and 61 s of 1.0 s");
    c.expect(report.skips.empty(), std::to_string(report.skips.size()) + " skipped sentences");
    c.expect(report.rendered_text.find("6 looks") != std::string::npos, "report lacks \"6 looks\"");
    c.expect(report.rendered_text.find("No clear skipping") != std::string::npos, "report lacks the no-skipping line");
    c.expect(!analysis.need_help.empty(), "no need inferred");
    if (!analysis.need_help.empty()) {
        const auto& top = analysis.need_help.front();
        c.expect(top.target.sentence_index &&
                     p.sentence(*top.target.sentence_index).text.find("Measurement independence") != std::string::npos,
                 "top need " + top.need_id + " is not the measurement-independence sentence");
        c.expect(top.last_evidence_ms >= 92000 && top.last_evidence_ms <= 95000,
                 "top need latest evidence " + std::to_string(top.last_evidence_ms) + " ms");
    }
    c.expect(elapsed < kB2BudgetMs, "runtime " + std::to_string(elapsed) + " ms");
    std::ostringstream d;
    d << "top=" << (analysis.need_help.empty() ? "none" : analysis.need_help.front().need_id) << ", " << elapsed
      << " ms";
    return d.str();
}

std::string oracle_equivalence(Check& c) {
    auto t0 = Clock::now();
    std::size_t traces = 0, longest = 0;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
        auto gen = oracle::random_observations(seed, 500);
        const auto& p = gen.passage;
        const auto& obs = gen.observations;
        longest = std::max(longest, obs.size());
        auto tag = "seed " + std::to_string(seed) + ": ";
        auto fx = detect_fixations(obs, p, gen.params);
        auto fo = oracle::fixations(obs, gen.params);
        bool same = fx.size() == fo.size();
        for (std::size_t i = 0; same && i < fx.size(); ++i)
            same = text::normalize_surface(fx[i].target_surface) == fo[i].key && fx[i].look_count == fo[i].looks &&
                   fx[i].look_times_ms == fo[i].times;
        c.expect(same, tag + "fixations differ");
        c.expect(detect_regressions(obs, p, gen.params) == oracle::regressions(obs, p, gen.params),
                 tag + "regressions differ");
        c.expect(detect_offtext(obs, gen.params) == oracle::offtext(obs, gen.params), tag + "off-text differs");
        auto sk = detect_skips(obs, p);
        auto so = oracle::skips(obs, p);
        bool skips_same = sk.size() == so.size();
        for (std::size_t i = 0; skips_same && i < sk.size(); ++i) skips_same = sk[i].sentence_index == so[i];
        c.expect(skips_same, tag + "skips differ");
        ++traces;
    }
    c.expect(longest <= 500, "trace longer than 500 observations");

    auto passages = load_passage_dir(testing::data_dir() / "passages");
    std::size_t perfect = 0, labels = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto& p = passages[seed % passages.size()];
        auto l = make_default_layout(p);
        auto [script, synth] = oracle::valid_random_script(seed, p, l);
        auto s = score_detectors(detect(synth.samples, p, l), synth.labels);
        labels += synth.labels.size();
        if (s.perfect())
            ++perfect;
        else
            c.expect(false, "script " + std::to_string(seed) + " not recovered: " + format_scores(s));
    }
    double elapsed = ms_since(t0);
    c.expect(elapsed < kOracleBudgetMs, "runtime " + std::to_string(elapsed) + " ms");
    std::ostringstream d;
    d << traces << " traces (max " << longest << " obs), " << perfect << "/100 scripts P=R=1 over " << labels
      << " labels, " << elapsed << " ms";
    return d.str();
}

std::string protocol(Check& c) {
    auto corpus = load_passage_dir(testing::data_dir() / "passages");
    std::vector<std::shared_ptr<const PassageModel>> shared;
    std::vector<LayoutMap> layouts;
    for (const auto& p : corpus) {
        shared.push_back(std::make_shared<const PassageModel>(p));
        layouts.push_back(make_default_layout(p));
    }
    auto registry = load_registry(testing::data_dir() / "registry" / "judge_registry.json");
    const char* flags[] = {"used_hedging", "checked_user_needs", "monitored_comprehension", "was_concise"};
    std::size_t conversations = 0, turns = 0, violations = 0, judged_ones = 0;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        auto k = seed % corpus.size();
        const auto& p = corpus[k];
        AnalysisResult a;
        if (seed % 5 != 0) {
            auto synth = oracle::valid_random_script(20000 + seed, p, layouts[k]).second;
            a = infer_needs_rules(detect(synth.samples, p, layouts[k]), p, synth.samples.back().t_ms);
        }
        Session s("acc" + std::to_string(seed), shared[k], a, std::make_shared<ScriptedAssistant>());
        s.open();
        oracle::RandomUser user(seed, p);
        for (int i = 0; i < 16 && s.state() != SessionState::Closed; ++i) s.user_turn(user.next(), i * 700);
        const auto& t = s.transcript();
        auto v = oracle::protocol_violations(t, a, kWordBudget);
        violations += v.size();
        for (const auto& x : v) c.expect(false, "seed " + std::to_string(seed) + ": " + x);
        RuleJudgeOptions ro;
        ro.passage = &p;
        for (const char* name : flags) {
            auto verdict = rule_judge(t, a, *registry.find(name), ro);
            bool one = verdict.decidable && verdict.value == 1;
            judged_ones += one;
            c.expect(one, "seed " + std::to_string(seed) + ": rule_judge " + name + " != 1");
        }
        ++conversations;
        turns += t.turns.size();
    }
    std::ostringstream d;
    d << conversations << " conversations, " << turns << " turns, " << violations << " violations, " << judged_ones
      << "/" << conversations * 4 << " judge flags = 1";
    return d.str();
}

std::string schema(Check& c) {
    const char* valid[] = {R"({"type":"word","content":"theorem","context":"In the sentence: 'Bell's theorem'"})",
                           R"({"type":"object","content":"monitor bezel","context":"edge of the screen"})",
                           R"({"type":"none","content":"","context":""})"};
    for (const char* raw : valid) {
        try {
            parse_grounding_response(raw, 0);
        } catch (const std::exception& e) {
            c.expect(false, std::string("valid reply rejected: ") + raw);
        }
    }
    const char* mutated[] = {
        "",
        "not json",
        "[]",
        "\"word\"",
        "null",
        R"({})",
        R"({"type":"word","content":"x"})",
        R"({"type":"word","context":"c"})",
        R"({"content":"x","context":"c"})",
        R"({"type":"Word","content":"x","context":"c"})",
        R"({"type":"words","content":"x","context":"c"})",
        R"({"type":"phrase","content":"x","context":"c"})",
        R"({"type":1,"content":"x","context":"c"})",
        R"({"type":"word","content":3,"context":"c"})",
        R"({"type":"word","content":"x","context":null})",
        R"({"type":"word","content":["x"],"context":"c"})",
        R"({"type":"word","content":"","context":"c"})",
        R"({"type":"object","content":"   ","context":"c"})",
        R"({"type":"none","content":"x","context":""})",
        R"({"type":"none","content":"","context":"c"})",
        R"({"type":"word","content":"x","context":"c","extra":1})",
        R"({"type":"word","content":"x","context":"c","confidence":0.9})",
        R"({"type":"word","content":"x","context":"c"} trailing)",
        R"({"type":"word","content":"x","context":"c")",
    };
    std::size_t rejected = 0;
    for (const char* raw : mutated) {
        try {
            parse_grounding_response(raw, 0);
            c.expect(false, std::string("mutation accepted: ") + raw);
        } catch (const SchemaViolation&) {
            ++rejected;
        }
    }
    c.expect(rejected >= kMinMutations, "only " + std::to_string(rejected) + " mutations");

    auto b = testing::b2_scenario();
    auto a = infer_needs_rules(b.report, b.passage, 120000);
    auto wire = analysis_to_json(a);
    c.expect(analysis_from_json(wire) == a, "AnalysisResult round-trip differs");
    auto j = nlohmann::json::parse(wire);
    for (const char* key : {"observations", "need_help", "intervention"})
        c.expect(j.contains(key), std::string("wire form lacks ") + key);

    const std::vector<std::string> expected{"needs_addressed",
                                            "aligned_with_analysis",
                                            "asked_guiding_questions",
                                            "checked_user_needs",
                                            "used_hedging",
                                            "was_concise",
                                            "monitored_comprehension",
                                            "stayed_on_topic",
                                            "user_changed_focus",
                                            "user_expressed_confusion",
                                            "user_engagement_with_assistant",
                                            "user_reflected_on_content",
                                            "user_took_lead",
                                            "user_requested_clarification",
                                            "user_agreeing_with_assistants_identification_of_their_needs",
                                            "user_disagreeing_with_assistants_identification_of_their_needs",
                                            "user_lost_interest",
                                            "user_needed_more_help",
                                            "user_found_explanations_helpful"};
    auto raw = testing::slurp(testing::data_dir() / "registry" / "judge_registry.json");
    auto reg = parse_registry(raw);
    c.expect(reg.names() == expected, "registry names differ from the expected 19");
    for (const auto& n : reg.names())
        c.expect(raw.find("\"" + n + "\"") != std::string::npos, "name not byte-identical in the fixture: " + n);
    std::ostringstream d;
    d << rejected << " mutations rejected, " << reg.names().size() << " registry names";
    return d.str();
}

std::string aggregation(Check& c) {
    auto w = testing::word_study();
    auto summary = aggregate_conditions(w.scores, w.pairing);
    const auto* m = summary.find("user_words");
    c.expect(m != nullptr, "no user_words measure");
    if (!m) return {};
    c.expect(m->pair_diffs.size() == 36, "pairs " + std::to_string(m->pair_diffs.size()));
    c.expect(std::abs(m->text_only.mean - 83.25) <= kAggregationTol, "text_only mean " + std::to_string(m->text_only.mean));
    c.expect(std::abs(m->gaze.mean - 57.28) <= kAggregationTol, "gaze mean " + std::to_string(m->gaze.mean));
    c.expect(std::abs(m->paired_diff - (-25.97)) <= kAggregationTol, "paired diff " + std::to_string(m->paired_diff));
    std::ostringstream d;
    d.precision(4);
    d << "text_only " << m->text_only.mean << ", gaze " << m->gaze.mean << ", diff " << m->paired_diff;
    return d.str();
}

std::string performance(Check& c) {
    auto p = testing::bundled("superdeterminism");
    auto layout = load_layout_file(testing::data_dir() / "fixtures" / "superdeterminism.layout");
    auto trace = load_trace_file(testing::data_dir() / "fixtures" / "superdeterminism.trace.jsonl");
    c.expect(trace.size() == 240, "trace has " + std::to_string(trace.size()) + " samples, not 120 s at 2 Hz");
    std::vector<double> runs;
    for (int i = 0; i < 5; ++i) {
        auto t0 = Clock::now();
        ActionList list("perf");
        for (const auto& s : trace) append_sample(list, s, layout, p);
        auto report = analyze_behavior(list.observations(), p);
        auto a = infer_needs_rules(report, p, trace.back().t_ms);
        runs.push_back(ms_since(t0));
        c.expect(!a.need_help.empty(), "no needs");
    }
    double worst = *std::max_element(runs.begin(), runs.end());
    c.expect(worst < kPerfBudgetMs, "worst run " + std::to_string(worst) + " ms");
    std::ostringstream d;
    d << "first " << runs.front() << " ms, worst " << worst << " ms";
    return d.str();
}

std::string triggers(Check& c) {
    std::mt19937_64 rng(2024);
    int boundary_runs = 0;
    for (int run = 0; run < 1000; ++run) {
        TriggerGate gate(parse_trigger_policy("boundary"));
        std::int64_t t = 0;
        auto finish_at = 1 + static_cast<std::int64_t>(rng() % 60000);
        int polls = 1 + static_cast<int>(rng() % 400);
        int fired = 0;
        for (int i = 0; i < polls || t < finish_at; ++i) {
            t += static_cast<std::int64_t>(rng() % 500);
            fired += gate.poll(t >= finish_at, t);
        }
        c.expect(fired == 1, "boundary run " + std::to_string(run) + " fired " + std::to_string(fired));
        ++boundary_runs;
    }
    int interval_runs = 0;
    for (int run = 0; run < 1000; ++run) {
        auto interval = 100 + static_cast<std::int64_t>(rng() % 5000);
        auto total = static_cast<std::int64_t>(rng() % 120000);
        TriggerGate gate(TriggerPolicy{TriggerKind::FixedInterval, interval, {}});
        std::int64_t t = 0;
        std::int64_t fired = 0;
        while (t < total) {
            t = std::min(total, t + 1 + static_cast<std::int64_t>(rng() % interval));
            fired += gate.poll(false, t);
        }
        auto expected = total / interval;
        c.expect(std::abs(fired - expected) <= 1, "interval " + std::to_string(interval) + " over " +
                                                      std::to_string(total) + " fired " + std::to_string(fired));
        ++interval_runs;
    }
    std::ostringstream d;
    d << boundary_runs << " boundary schedules, " << interval_runs << " interval sessions";
    return d.str();
}

} // namespace

int main() {
    criterion("golden reading scenario", golden);
    criterion("detector oracle equivalence", oracle_equivalence);
    criterion("protocol invariants", protocol);
    criterion("schema and wire fidelity", schema);
    criterion("aggregation check", aggregation);
    criterion("performance budget", performance);
    criterion("trigger semantics", triggers);
    std::cout << (failed ? "FAIL" : "PASS") << " acceptance: " << 7 - failed << "/7 criteria\n";
    return failed ? 1 : 0;
}
