#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gazeguide/errors.hpp"
#include "gazeguide/judge.hpp"
#include "oracles/protocol.hpp"
#include "test_support.hpp"

#include <algorithm>
#include <random>

using namespace gazeguide;

namespace {

JudgeRegistry registry() { return load_registry(testing::data_dir() / "registry" / "judge_registry.json"); }

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

SessionTranscript run(const PassageModel& p, const AnalysisResult& a, std::vector<std::string> replies) {
    Session s("j", std::make_shared<const PassageModel>(p), a, std::make_shared<ScriptedAssistant>());
    s.open();
    for (std::size_t i = 0; i < replies.size() && s.state() != SessionState::Closed; ++i)
        s.user_turn(replies[i], static_cast<std::int64_t>(i));
    return s.transcript();
}

} // namespace

TEST_CASE("registry loads the 19 classifier names in order") {
    auto reg = registry();
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
    CHECK(reg.names() == expected);
    CHECK(reg.find("needs_addressed")->response_kind == ResponseKind::NestedNeeds);
    const auto* h = reg.find("used_hedging");
    REQUIRE(h);
    CHECK(h->label0 == "no_hedging");
    CHECK(h->label1 == "hedging_used");
    CHECK(h->example == "It seems you might have skimmed over this part.");

    std::string canonical;
    for (const auto& c : reg.classifiers)
        canonical += c.name + "\x1f" + c.description + "\x1f" + c.example + "\x1f" + c.label0 + "\x1f" + c.label1 +
                     "\x1f" + c.response_format + "\x1e";
    CHECK(fnv1a(canonical) == 0x7269f0b1609b6e08ull);
    CHECK(parse_registry(testing::slurp(testing::data_dir() / "registry" / "judge_registry.json")).classifiers ==
          reg.classifiers);
}

TEST_CASE("registry schema errors") {
    CHECK_THROWS_AS(parse_registry("[]"), SchemaViolation);
    CHECK_THROWS_AS(parse_registry(R"({"behaviors":{"x":{"description":"d","example":"e","0":"a"}}})"), SchemaViolation);
    CHECK_THROWS_AS(parse_registry(R"({"behaviors":{"x":1}})"), SchemaViolation);
    CHECK_THROWS_AS(parse_registry("{"), SchemaViolation);
}

TEST_CASE("nested needs report") {
    auto reg = registry();
    auto fmt = reg.find("needs_addressed")->response_format;
    auto r = parse_needs_addressed(fmt);
    CHECK(r.total_needs == 3);
    CHECK(r.addressed_count == 1);
    CHECK(r.score == "1/3");
    CHECK_THROWS_AS(parse_needs_addressed(R"({"needs_identified":["a"],"needs_addressed":[true,false]})"),
                    SchemaViolation);
    CHECK_THROWS_AS(parse_needs_addressed(R"({"needs_identified":["a"],"needs_addressed":[true],"score":"0/1"})"),
                    SchemaViolation);
    CHECK(parse_needs_addressed(R"({"needs_identified":[],"needs_addressed":[]})").score == "0/0");
}

TEST_CASE("LLM judge contract") {
    auto reg = registry();
    auto p = testing::bundled("superdeterminism");
    auto b = testing::b2_scenario();
    auto a = infer_needs_rules(b.report, b.passage);
    auto t = run(p, a, {"yes", "yes"});

    ScriptedLlmClient ok(std::vector<std::string>{"{\"value\": 1}"});
    auto v = judge_transcript(t, a, *reg.find("used_hedging"), ok, "m");
    CHECK(v.value == 1);
    CHECK(v.judge_model == "m");
    auto prompt = ok.prompts().front();
    CHECK(prompt.find(reg.find("used_hedging")->description) != std::string::npos);
    CHECK(prompt.find("Assistant: ") != std::string::npos);

    ScriptedLlmClient second(std::vector<std::string>{"I think yes", "```json\n{\"value\":0}\n```"});
    CHECK(judge_transcript(t, a, *reg.find("used_hedging"), second).value == 0);
    CHECK(second.calls() == 2);

    ScriptedLlmClient prose(std::vector<std::string>{"Definitely hedged.", "Still prose."});
    CHECK_THROWS_AS(judge_transcript(t, a, *reg.find("used_hedging"), prose), JudgeParseError);
    ScriptedLlmClient bad_value(std::vector<std::string>{"{\"value\":2}"});
    CHECK_THROWS_AS(judge_transcript(t, a, *reg.find("used_hedging"), bad_value), JudgeParseError);

    ScriptedLlmClient nested(std::vector<std::string>{reg.find("needs_addressed")->response_format});
    auto n = judge_transcript(t, a, *reg.find("needs_addressed"), nested);
    REQUIRE(n.nested);
    CHECK(n.nested->score == "1/3");
    CHECK(nested.prompts().front().find("Need help (if any)") != std::string::npos);

    ScriptedLlmClient down(std::vector<std::string>{""});
    CHECK_THROWS_AS(judge_transcript(t, a, *reg.find("used_hedging"), down, "", 0), BackendUnavailable);
}

TEST_CASE("rule judge on scripted transcripts and constructed violations") {
    auto reg = registry();
    auto p = testing::bundled("superdeterminism");
    auto b = testing::b2_scenario();
    auto a = infer_needs_rules(b.report, b.passage);
    RuleJudgeOptions o;
    o.passage = &p;
    auto t = run(p, a, {"yes", "no", "yes", "ok", "what are hidden variables?", "yes", "no", "no"});
    for (auto name : kMechanicalClassifiers) {
        CAPTURE(name);
        CHECK(rule_judge(t, a, *reg.find(name), o).value == 1);
    }
    auto undecided = rule_judge(t, a, *reg.find("user_took_lead"), o);
    CHECK_FALSE(undecided.decidable);
    CHECK_FALSE(undecided.value);

    SessionTranscript bad;
    bad.turns = {{Speaker::Assistant, "Here is what it means. Does that make sense?", 0, SessionState::Explaining,
                  a.need_help[0].need_id, false}};
    CHECK(rule_judge(bad, a, *reg.find("checked_user_needs")).value == 0);

    SessionTranscript declined = t;
    declined.turns.resize(1);
    declined.turns.push_back({Speaker::User, "no", 1, SessionState::AwaitConfirmation, "", false});
    declined.turns.push_back({Speaker::Assistant, "It means this. Does that make sense?", 2, SessionState::Explaining,
                              a.need_help[0].need_id, false});
    CHECK(rule_judge(declined, a, *reg.find("checked_user_needs")).value == 0);
    CHECK(rule_judge(declined, a, *reg.find("monitored_comprehension")).value == 1);
    declined.turns.back().text = "It means this.";
    CHECK(rule_judge(declined, a, *reg.find("monitored_comprehension")).value == 0);

    SessionTranscript unhedged;
    unhedged.turns = {{Speaker::Assistant, "You struggled with theorem. Want help?", 0, SessionState::Opening, "", false}};
    CHECK(rule_judge(unhedged, a, *reg.find("used_hedging")).value == 0);
    std::string wordy;
    for (int i = 0; i < 51; ++i) wordy += "word ";
    unhedged.turns[0].text = wordy;
    CHECK(rule_judge(unhedged, a, *reg.find("was_concise")).value == 0);
    unhedged.turns[0].text = "Lovely weather today.";
    CHECK(rule_judge(unhedged, a, *reg.find("stayed_on_topic"), o).value == 0);

    SessionTranscript empty;
    for (auto name : kMechanicalClassifiers)
        CHECK(rule_judge(empty, a, *reg.find(name)).value == (name == "stayed_on_topic" ? 1 : 0));
}

TEST_CASE("rule judge agrees with the protocol oracle on random conversations") {
    auto reg = registry();
    auto corpus = load_passage_dir(testing::data_dir() / "passages");
    for (std::uint64_t seed = 0; seed < 120; ++seed) {
        const auto& p = corpus[seed % corpus.size()];
        auto a = infer_needs_text_only_rules(p, corpus);
        oracle::RandomUser user(seed * 31 + 1, p);
        std::vector<std::string> replies;
        for (int i = 0; i < 12; ++i) replies.push_back(user.next());
        auto t = run(p, a, replies);
        CHECK(oracle::protocol_violations(t, a, 50).empty());
        RuleJudgeOptions o;
        o.passage = &p;
        for (auto name : {"used_hedging", "checked_user_needs", "monitored_comprehension", "was_concise"}) {
            CAPTURE(seed);
            CAPTURE(name);
            CHECK(rule_judge(t, a, *reg.find(name), o).value == 1);
        }
    }
}

TEST_CASE("aggregation arithmetic") {
    std::vector<SessionScores> s = {
        {"g1", "p1", AnalysisMode::Gaze, {{"flag", 1}, {"user_words", 50}}},
        {"c1", "p1", AnalysisMode::TextOnly, {{"flag", 1}, {"user_words", 80}}},
        {"g2", "p2", AnalysisMode::Gaze, {{"flag", 1}, {"user_words", 60}}},
        {"c2", "p2", AnalysisMode::TextOnly, {{"flag", 0}, {"user_words", 90}}},
    };
    PairingMap pairs{{"p1", {"g1", "c1"}}, {"p2", {"g2", "c2"}}};
    auto sum = aggregate_conditions(s, pairs);
    const auto* flag = sum.find("flag");
    REQUIRE(flag);
    CHECK(flag->gaze.mean == 1.0);
    CHECK(flag->text_only.mean == 0.5);
    CHECK(flag->paired_diff == doctest::Approx(0.5));
    const auto* words = sum.find("user_words");
    CHECK(words->gaze.mean == 55);
    CHECK(words->text_only.mean == 85);
    CHECK(words->paired_diff == doctest::Approx(-30));
    CHECK(words->gaze.sd == doctest::Approx(std::sqrt(50.0)));

    std::mt19937 rng(3);
    auto shuffled = s;
    for (int i = 0; i < 10; ++i) {
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        auto again = aggregate_conditions(shuffled, pairs);
        CHECK(again.find("user_words")->paired_diff == doctest::Approx(words->paired_diff));
        CHECK(again.find("flag")->text_only.sd == doctest::Approx(flag->text_only.sd));
    }

    CHECK_THROWS_AS(aggregate_conditions(s, PairingMap{{"p1", {"g1", "c1"}}}), UnpairedSession);
    CHECK_THROWS_AS(aggregate_conditions(s, PairingMap{{"p1", {"c1", "g1"}}, {"p2", {"g2", "c2"}}}), UnpairedSession);
    CHECK_THROWS_AS(aggregate_conditions(s, PairingMap{{"p1", {"g1", "c1"}}, {"p2", {"g2", "zz"}}}), UnpairedSession);

    auto csv = scores_to_csv(s);
    CHECK(csv.rfind("participant_id,condition,classifier_or_metric,value\n", 0) == 0);
    CHECK(csv.find("p2,text_only,flag,0\n") != std::string::npos);
    CHECK(parse_pairing_csv("participant_id,gaze_session,text_only_session\np1,g1,c1\np2,g2,c2\n").size() == 2);
    CHECK_THROWS_AS(parse_pairing_csv("p1,g1\n"), ValidationError);
}

TEST_CASE("score_session collects flags and metrics") {
    std::vector<JudgeVerdict> v(2);
    v[0].classifier_name = "used_hedging";
    v[0].value = 1;
    v[1].classifier_name = "user_took_lead";
    v[1].decidable = false;
    auto s = score_session("s", "p", AnalysisMode::Gaze, v, ConversationMetrics{7, 4, 30});
    CHECK(s.values.at("used_hedging") == 1);
    CHECK_FALSE(s.values.count("user_took_lead"));
    CHECK(s.values.at("user_words") == 7);
    CHECK(s.values.at("turns") == 4);
}

TEST_CASE("word study corpus reproduces the per-condition means") {
    auto w = testing::word_study();
    REQUIRE(w.scores.size() == 72);
    auto summary = aggregate_conditions(w.scores, w.pairing);
    const auto* m = summary.find("user_words");
    REQUIRE(m);
    double gaze_sum = 0, text_sum = 0;
    for (double v : m->gaze.values) gaze_sum += v;
    for (double v : m->text_only.values) text_sum += v;
    CHECK(gaze_sum == 2062);
    CHECK(text_sum == 2997);
    CHECK(std::abs(m->text_only.mean - 83.25) <= 0.01);
    CHECK(std::abs(m->gaze.mean - 57.28) <= 0.01);
    CHECK(std::abs(m->paired_diff - -25.97) <= 0.01);
    CHECK(std::abs(m->gaze.sd - 66.57) <= 0.01);
    CHECK(std::abs(m->text_only.sd - 91.62) <= 0.01);
}
