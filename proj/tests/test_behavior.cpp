#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gazeguide/behavior.hpp"
#include "gazeguide/errors.hpp"
#include "gazeguide/sim.hpp"
#include "oracles/brute.hpp"
#include "oracles/random_obs.hpp"
#include "test_support.hpp"

using namespace gazeguide;

namespace {

GazeObservation word_obs(const PassageModel& p, std::size_t w, std::int64_t t) {
    const auto& ref = p.word(w);
    return {ObservationKind::Word, ref.surface, sentence_context(p.sentence(ref.sentence_index)), t, w};
}

GazeObservation obj_obs(std::int64_t t, std::string label = "monitor bezel") {
    return {ObservationKind::Object, std::move(label), "", t, {}};
}

std::size_t first_word_of(const PassageModel& p, std::size_t s) { return p.sentence(s).first_word; }

} // namespace

TEST_CASE("fixation: repeated looks at one surface") {
    auto p = testing::bundled("superdeterminism");
    std::vector<GazeObservation> obs;
    for (std::int64_t t : {10000, 47000, 47500, 48000, 48500, 55000}) obs.push_back(word_obs(p, 0, t));
    auto f = detect_fixations(obs, p);
    REQUIRE(f.size() == 1);
    CHECK(f[0].target_surface == "Superdeterminism");
    CHECK(f[0].look_count == 6);
    CHECK(f[0].sentence_index == 0u);
    CHECK(format_look_times(f[0].look_times_ms) == "10s, 47s (twice), 48s (twice), 55s");
}

TEST_CASE("fixation groups theorem and theorem.") {
    auto p = testing::bundled("superdeterminism");
    auto occ = p.find_surface("theorem");
    REQUIRE(occ.size() == 2);
    std::vector<GazeObservation> obs;
    int k = 0;
    for (std::int64_t t : {12000, 33000, 49000, 52000, 53000, 53500, 62000, 77000})
        obs.push_back(word_obs(p, occ[k++ % 2], t));
    auto f = detect_fixations(obs, p);
    REQUIRE(f.size() == 1);
    CHECK(f[0].look_count == 8);
    CHECK(f[0].word_indices.size() == 2);
}

TEST_CASE("single looks and function words are not fixations") {
    auto p = testing::bundled("superdeterminism");
    auto the = p.find_surface("the");
    REQUIRE(the.size() > 3);
    std::vector<GazeObservation> obs{word_obs(p, 0, 0)};
    for (std::size_t i = 0; i < 4; ++i) obs.push_back(word_obs(p, the[i], 500 * (i + 1)));
    CHECK(detect_fixations(obs, p).empty());
    DetectorParams all;
    all.ignore_function_words = false;
    CHECK(detect_fixations(obs, p, all).size() == 1);
}

TEST_CASE("regression: sentences 0,1,2 then 0") {
    auto p = testing::bundled("superdeterminism");
    std::vector<GazeObservation> obs{word_obs(p, first_word_of(p, 0), 45000),
                                     word_obs(p, first_word_of(p, 1), 45500),
                                     word_obs(p, first_word_of(p, 2), 46000),
                                     word_obs(p, first_word_of(p, 0), 47000)};
    auto r = detect_regressions(obs, p);
    REQUIRE(r.size() == 1);
    CHECK(r[0] == RegressionEvent{47000, 2, 0});
}

TEST_CASE("regressions into one sentence are deduplicated within the window") {
    auto p = testing::bundled("superdeterminism");
    std::vector<GazeObservation> obs{word_obs(p, first_word_of(p, 3), 0)};
    for (std::int64_t t = 500; t <= 2000; t += 500) obs.push_back(word_obs(p, first_word_of(p, 1), t));
    auto r = detect_regressions(obs, p);
    REQUIRE(r.size() == 2);
    CHECK(r[0].at_ms == 500);
    CHECK(r[1].at_ms == 1500);
}

TEST_CASE("instruction sentences never cause regressions or skips") {
    auto p = testing::bundled("superdeterminism");
    auto instr = p.sentence_count() - 1;
    REQUIRE_FALSE(p.sentence(instr).content);
    std::vector<GazeObservation> obs{word_obs(p, first_word_of(p, instr), 0),
                                     word_obs(p, first_word_of(p, 0), 500)};
    CHECK(detect_regressions(obs, p).empty());
    auto s = detect_skips(obs, p);
    for (const auto& k : s) CHECK(p.sentence(k.sentence_index).content);
}

TEST_CASE("off-text: word, object, object, word") {
    auto p = testing::bundled("superdeterminism");
    std::vector<GazeObservation> obs{word_obs(p, 0, 46000), obj_obs(46500), obj_obs(47000),
                                     word_obs(p, 0, 47500)};
    auto o = detect_offtext(obs);
    REQUIRE(o.size() == 1);
    CHECK(o[0].start_ms == 46500);
    CHECK(o[0].duration_ms == 1000);
    CHECK(o[0].attended_label == "monitor bezel");
}

TEST_CASE("off-text: a single none sample is not a pause") {
    std::vector<GazeObservation> obs{{ObservationKind::None, "", "", 0, {}}};
    CHECK(detect_offtext(obs).empty());
}

TEST_CASE("skip: untouched content sentences") {
    auto p = testing::bundled("water_cycle");
    std::vector<GazeObservation> obs;
    for (std::size_t s = 0; s < p.sentence_count(); ++s)
        if (s != 2) obs.push_back(word_obs(p, first_word_of(p, s), static_cast<std::int64_t>(s) * 500));
    auto sk = detect_skips(obs, p);
    REQUIRE(sk.size() == 1);
    CHECK(sk[0].sentence_index == 2);
    CHECK(sk[0].sentence_text == p.sentence(2).text);
}

TEST_CASE("rendering has explicit negative lines") {
    auto p = testing::bundled("water_cycle");
    auto r = analyze_behavior({}, p);
    CHECK(r.rendered_text.find("# Eye tracking") == 0);
    CHECK(r.rendered_text.find("There were no significant fixations.") != std::string::npos);
    CHECK(r.rendered_text.find("# Need help (if any)\n(pending need inference)") != std::string::npos);
    CHECK(r.skips.size() == 6);
}

TEST_CASE("detector parameters are validated") {
    DetectorParams bad;
    bad.fixation_min_looks = 0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("report JSON round-trip") {
    auto p = testing::bundled("superdeterminism");
    auto sched = parse_schedule(testing::slurp(testing::data_dir() / "fixtures" / "superdeterminism.schedule"));
    auto layout = make_default_layout(p);
    auto trace = realize_schedule(sched, p, layout);
    std::vector<GazeObservation> obs;
    for (const auto& s : trace) obs.push_back(ground_sample(s, layout, p));
    auto r = analyze_behavior(obs, p);
    auto back = report_from_json(report_to_json(r));
    CHECK(back == r);
}

TEST_CASE("detectors equal the brute-force oracle on random traces") {
    for (std::uint64_t seed = 1; seed <= 60; ++seed) {
        auto gen = oracle::random_observations(seed);
        const auto& p = gen.passage;
        const auto& obs = gen.observations;
        CAPTURE(seed);
        DetectorParams params = gen.params;
        auto fx = detect_fixations(obs, p, params);
        auto fo = oracle::fixations(obs, params);
        REQUIRE(fx.size() == fo.size());
        for (std::size_t i = 0; i < fx.size(); ++i) {
            CHECK(text::normalize_surface(fx[i].target_surface) == fo[i].key);
            CHECK(fx[i].look_count == fo[i].looks);
            CHECK(fx[i].look_times_ms == fo[i].times);
        }
        CHECK(detect_regressions(obs, p, params) == oracle::regressions(obs, p, params));
        CHECK(detect_offtext(obs, params) == oracle::offtext(obs, params));
        auto sk = detect_skips(obs, p);
        auto so = oracle::skips(obs, p);
        REQUIRE(sk.size() == so.size());
        for (std::size_t i = 0; i < sk.size(); ++i) CHECK(sk[i].sentence_index == so[i]);
    }
}
