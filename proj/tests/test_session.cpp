#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gazeguide/errors.hpp"
#include "gazeguide/prompts.hpp"
#include "gazeguide/session.hpp"
#include "gazeguide/text.hpp"
#include "oracles/protocol.hpp"
#include "test_support.hpp"

using namespace gazeguide;

namespace {

std::shared_ptr<const PassageModel> shared(PassageModel p) { return std::make_shared<const PassageModel>(std::move(p)); }

AnalysisResult b2_analysis() {
    auto b = testing::b2_scenario();
    return infer_needs_rules(b.report, b.passage);
}

AnalysisResult three_needs(const PassageModel& p) {
    AnalysisResult a;
    for (std::size_t k = 0; k < 3; ++k) {
        NeedHypothesis n;
        auto s = p.sentences()[k + 1].sentence_index;
        n.need_id = "reg:s00" + std::to_string(s);
        n.description = "re-explain relation in sentence " + std::to_string(s);
        n.target.sentence_index = s;
        n.strength = 3.0 - static_cast<double>(k);
        n.evidence.push_back({EvidenceKind::Regression, k});
        a.need_help.push_back(n);
    }
    a.intervention = propose_need(a.need_help[0], p);
    return a;
}

Session make(const PassageModel& p, AnalysisResult a) {
    return Session("s1", shared(p), std::move(a), std::make_shared<ScriptedAssistant>());
}

} // namespace

TEST_CASE("hedge lexicon and reply classes") {
    HedgeLexicon h;
    CHECK(h.matches("It seems hard."));
    CHECK(h.matches("it looks like you paused"));
    CHECK_FALSE(h.matches("It looks fine."));
    CHECK_FALSE(h.matches("Mighty oaks."));
    CHECK(classify_reply("Yes!") == ReplyClass::Affirmative);
    CHECK(classify_reply("ok") == ReplyClass::Affirmative);
    CHECK(classify_reply("no") == ReplyClass::Negative);
    CHECK(classify_reply("not really") == ReplyClass::Negative);
    CHECK(classify_reply("actually I got it") == ReplyClass::Negative);
    CHECK(classify_reply("I'm not sure") == ReplyClass::Negative);
    CHECK(classify_reply("what is a hidden variable?") == ReplyClass::Question);
    CHECK(classify_reply("hmm") == ReplyClass::Ambiguous);
    CHECK(classify_reply("") == ReplyClass::Ambiguous);
    NeedHypothesis n;
    n.description = "clarify term 'loophole'";
    CHECK(classify_reply("the loophole one", &n) == ReplyClass::Affirmative);
    CHECK(classify_reply("the loophole one") == ReplyClass::Ambiguous);
}

TEST_CASE("word budget cuts at sentence boundaries") {
    auto [a, cut_a] = fit_word_budget("One two. Three four five. Six", 5);
    CHECK(a == "One two. Three four five.");
    CHECK(cut_a);
    auto [b, cut_b] = fit_word_budget("one two three four", 2);
    CHECK(b == "one two...");
    CHECK(cut_b);
    auto [c, cut_c] = fit_word_budget("  short  ", 5);
    CHECK(c == "short");
    CHECK_FALSE(cut_c);
}

TEST_CASE("golden analysis: opening names measurement independence") {
    auto p = testing::bundled("superdeterminism");
    auto s = make(p, b2_analysis());
    const auto& t = s.open(0);
    CHECK(text::contains_ci(t.text, "measurement independence"));
    CHECK(HedgeLexicon{}.matches(t.text));
    CHECK(t.text.back() == '?');
    CHECK(s.state() == SessionState::AwaitConfirmation);
    CHECK(s.active_need() == std::optional<std::string>("reg:s004"));

    const auto& e = s.user_turn("yes", 1000);
    CHECK(e.state == SessionState::Explaining);
    CHECK(e.need_id == "reg:s004");
    CHECK(e.text.find("Measurement independence") != std::string::npos);
    CHECK(e.text.ends_with(kComprehensionCheck));
    CHECK(s.state() == SessionState::Monitoring);

    auto again = make(p, b2_analysis());
    CHECK(again.open(0).text == t.text);
}

TEST_CASE("empty analysis opens with a reflection prompt") {
    auto p = testing::bundled("water_cycle");
    auto s = make(p, AnalysisResult{});
    const auto& t = s.open();
    CHECK(s.state() == SessionState::Monitoring);
    CHECK(HedgeLexicon{}.matches(t.text));
    CHECK(t.text.back() == '?');
    CHECK_FALSE(s.active_need());
    CHECK_THROWS_AS(s.open(), ValidationError);
}

TEST_CASE("declining moves to the next need") {
    auto p = testing::bundled("water_cycle");
    auto a = three_needs(p);
    auto s = make(p, a);
    s.open();
    const auto& t = s.user_turn("no");
    CHECK(t.state == SessionState::AwaitConfirmation);
    CHECK(t.need_id == a.need_help[1].need_id);
    CHECK(HedgeLexicon{}.matches(t.text));
    s.user_turn("nope");
    const auto& last = s.user_turn("no");
    CHECK(s.state() == SessionState::Monitoring);
    CHECK(last.need_id.empty());
    const auto& bye = s.user_turn("no");
    CHECK(s.state() == SessionState::Closed);
    CHECK(bye.text.find("Goodbye") != std::string::npos);
    CHECK_THROWS_AS(s.user_turn("yes"), SessionClosed);
}

TEST_CASE("affirmative walk visits every need with confirmation first") {
    auto p = testing::bundled("water_cycle");
    auto a = three_needs(p);
    auto s = make(p, a);
    s.open();
    std::vector<std::string> explained;
    for (int i = 0; i < 20 && s.state() != SessionState::Closed; ++i) {
        const auto& t = s.user_turn("yes", i * 1000);
        if (t.state == SessionState::Explaining) explained.push_back(t.need_id);
    }
    CHECK(s.state() == SessionState::Closed);
    CHECK(explained == std::vector<std::string>{a.need_help[0].need_id, a.need_help[1].need_id, a.need_help[2].need_id});
    CHECK(oracle::protocol_violations(s.transcript(), a, 50).empty());
    bool offered = false;
    for (const auto& t : s.transcript().turns) offered |= t.text.find(kClosingOffer) != std::string::npos;
    CHECK(offered);
}

TEST_CASE("ambiguous reply gets one re-ask") {
    auto p = testing::bundled("water_cycle");
    auto a = three_needs(p);
    auto s = make(p, a);
    s.open();
    const auto& r = s.user_turn("hmm");
    CHECK(r.state == SessionState::AwaitConfirmation);
    CHECK(r.need_id == a.need_help[0].need_id);
    const auto& n = s.user_turn("hmm");
    CHECK(n.need_id == a.need_help[1].need_id);
}

TEST_CASE("monitoring: negative re-explains once, question explains the topic") {
    auto p = testing::bundled("superdeterminism");
    auto a = b2_analysis();
    auto s = make(p, a);
    s.open();
    s.user_turn("yes");
    const auto& re = s.user_turn("not really");
    CHECK(re.state == SessionState::Explaining);
    CHECK(re.text.rfind("Let me try another angle", 0) == 0);
    const auto& next = s.user_turn("no");
    CHECK(next.state == SessionState::AwaitConfirmation);
    const auto& q = s.user_turn("what are hidden variables?");
    CHECK(q.state == SessionState::Explaining);
    CHECK(q.need_id.empty());
    CHECK(q.text.find("hidden") != std::string::npos);
    CHECK(oracle::protocol_violations(s.transcript(), a, 50).empty());
}

TEST_CASE("randomized conversations respect every invariant") {
    auto corpus = load_passage_dir(testing::data_dir() / "passages");
    auto b2 = b2_analysis();
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        const auto& p = corpus[seed % corpus.size()];
        AnalysisResult a = p.passage_id() == "superdeterminism" && seed % 2 ? b2 : three_needs(p);
        if (seed % 7 == 0) a = AnalysisResult{};
        auto s = make(p, a);
        s.open();
        oracle::RandomUser user(seed, p);
        for (int i = 0; i < 14 && s.state() != SessionState::Closed; ++i) s.user_turn(user.next(), i * 500);
        auto v = oracle::protocol_violations(s.transcript(), a, 50);
        CAPTURE(seed);
        CAPTURE(transcript_to_jsonl(s.transcript()));
        std::string joined;
        for (const auto& x : v) joined += x + "; ";
        CHECK(joined == "");
        for (const auto& t : s.transcript().turns) CHECK_FALSE(t.truncated);
    }
}

TEST_CASE("LLM explanations are budgeted and failures leave no trace") {
    auto p = testing::bundled("superdeterminism");
    auto a = b2_analysis();
    std::string longer;
    for (int i = 0; i < 30; ++i) longer += "This is sentence number " + std::to_string(i) + ". ";
    auto client = std::make_shared<ScriptedLlmClient>(std::vector<std::string>{longer});
    Session s("llm", shared(p), a, std::make_shared<LlmAssistant>(client));
    s.open();
    const auto& t = s.user_turn("yes");
    CHECK(t.truncated);
    CHECK(text::word_count(t.text) <= 50);
    CHECK(t.text.ends_with(kComprehensionCheck));
    auto prompt = client->prompts().front();
    CHECK(prompt.find("User: yes") != std::string::npos);
    CHECK(prompt.find(p.content_text()) != std::string::npos);

    auto down = std::make_shared<ScriptedLlmClient>(std::vector<std::string>{""});
    Session f("down", shared(p), a, std::make_shared<LlmAssistant>(down, 0));
    f.open();
    auto before = f.transcript();
    CHECK_THROWS_AS(f.user_turn("yes"), BackendUnavailable);
    CHECK(f.transcript() == before);
    CHECK(f.state() == SessionState::AwaitConfirmation);
}

TEST_CASE("assistant prompt") {
    auto p = testing::bundled("superdeterminism");
    auto a = b2_analysis();
    SessionTranscript empty;
    auto prompt = build_assistant_prompt(p, a, empty);
    CHECK(prompt.find(p.content_text()) != std::string::npos);
    CHECK(prompt.find(a.observations_text) != std::string::npos);
    CHECK(prompt.find("Be transparent") != std::string::npos);
    CHECK(prompt.find("Use the analysis as subtle guidance") != std::string::npos);
    CHECK(prompt.ends_with("Confirm with the user before moving on."));
    CHECK(build_assistant_prompt(p, a, empty) == prompt);
}

TEST_CASE("conversation metrics and transcript export") {
    SessionTranscript t;
    CHECK(conversation_metrics(t) == ConversationMetrics{});
    t.turns = {{Speaker::Assistant, "hi there you", 0, SessionState::Opening, "", false},
               {Speaker::User, "hello there", 1, SessionState::AwaitConfirmation, "", false},
               {Speaker::Assistant, "ok", 2, SessionState::Explaining, "n1", true},
               {Speaker::User, "yes", 3, SessionState::Monitoring, "", false}};
    auto m = conversation_metrics(t);
    CHECK(m.user_words == 3);
    CHECK(m.turns == 4);
    CHECK(m.assistant_words == 4);
    auto jl = transcript_to_jsonl(t);
    CHECK(jl.find("{\"speaker\":\"assistant\",\"text\":\"hi there you\",\"t_ms\":0,\"state\":\"OPENING\"}") == 0);
    CHECK(transcript_from_jsonl(jl) == t);
    CHECK_THROWS_AS(transcript_from_jsonl("{\"speaker\":\"bot\",\"text\":\"\",\"t_ms\":0,\"state\":\"OPENING\"}"),
                    SchemaViolation);
}
