#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "gazeguide/errors.hpp"
#include "gazeguide/triggers.hpp"

#include <random>
#include <thread>

using namespace gazeguide;

TEST_CASE("evaluate_trigger examples") {
    TriggerPolicy boundary;
    TriggerState s;
    CHECK_FALSE(evaluate_trigger(boundary, s));
    s.reading_finished = true;
    CHECK(evaluate_trigger(boundary, s));
    s.has_run = true;
    CHECK_FALSE(evaluate_trigger(boundary, s));

    auto interval = parse_trigger_policy("interval:10000");
    TriggerState t;
    t.now_ms = 9999;
    CHECK_FALSE(evaluate_trigger(interval, t));
    t.now_ms = 10000;
    CHECK(evaluate_trigger(interval, t));

    auto demand = parse_trigger_policy("ondemand");
    TriggerState q;
    CHECK_FALSE(evaluate_trigger(demand, q));
    q.user_query = true;
    CHECK(evaluate_trigger(demand, q));

    auto event = parse_trigger_policy("event:fixation.look_count>=4");
    BehaviorReport r;
    FixationEvent a, b;
    a.look_count = 2;
    b.look_count = 6;
    r.fixations = {a};
    TriggerState e;
    e.new_events = &r;
    CHECK_FALSE(evaluate_trigger(event, e));
    r.fixations = {a, b};
    CHECK(evaluate_trigger(event, e));
}

TEST_CASE("policy strings") {
    for (const char* s : {"boundary", "interval:250", "ondemand", "event:fixation.look_count>=4",
                          "event:offtext.duration_ms>1500|regression.to_sentence==2|skip"}) {
        auto p = parse_trigger_policy(s);
        CHECK(format_trigger_policy(p) == s);
        CHECK(parse_trigger_policy(format_trigger_policy(p)) == p);
    }
    CHECK(parse_trigger_policy("event").event_rule == parse_event_rule("fixation.look_count>=4"));
    for (const char* bad : {"", "sometimes", "interval:", "interval:0", "interval:-5", "interval:1x",
                            "event:fixation.duration_ms>1", "event:gaze", "event:fixation.look_count>>4",
                            "event:fixation|", "boundary:1"})
        CHECK_THROWS_AS(parse_trigger_policy(bad), ValidationError);
}

TEST_CASE("event rule operators") {
    BehaviorReport r;
    r.offtext = {{0, 1000, 1500, ""}};
    CHECK(event_rule_matches(parse_event_rule("offtext.duration_ms>1000"), r));
    CHECK_FALSE(event_rule_matches(parse_event_rule("offtext.duration_ms<1500"), r));
    CHECK(event_rule_matches(parse_event_rule("offtext.duration_ms<=1500"), r));
    CHECK(event_rule_matches(parse_event_rule("offtext.duration_ms!=1"), r));
    CHECK(event_rule_matches(parse_event_rule("any"), r));
    CHECK_FALSE(event_rule_matches(parse_event_rule("any"), BehaviorReport{}));
    CHECK_FALSE(event_rule_matches(parse_event_rule("fixation"), r));
}

TEST_CASE("boundary gate fires exactly once across random poll schedules") {
    std::mt19937_64 rng(2024);
    for (int run = 0; run < 1000; ++run) {
        TriggerGate gate(parse_trigger_policy("boundary"));
        std::int64_t t = 0;
        std::int64_t finish_at = static_cast<std::int64_t>(rng() % 60000);
        int polls = 1 + static_cast<int>(rng() % 400);
        int fired = 0;
        std::int64_t fired_at = -1;
        for (int i = 0; i < polls; ++i) {
            t += static_cast<std::int64_t>(rng() % 500);
            if (gate.poll(t >= finish_at, t)) {
                ++fired;
                fired_at = t;
            }
        }
        if (t >= finish_at) {
            CHECK(fired == 1);
            CHECK(fired_at >= finish_at);
        } else {
            CHECK(fired == 0);
        }
    }
}

TEST_CASE("interval gate fires floor(T/interval) times within one") {
    std::mt19937_64 rng(7);
    for (int run = 0; run < 200; ++run) {
        std::int64_t interval = 100 + static_cast<std::int64_t>(rng() % 5000);
        std::int64_t total = static_cast<std::int64_t>(rng() % 120000);
        TriggerGate gate(TriggerPolicy{TriggerKind::FixedInterval, interval, {}});
        std::int64_t t = 0;
        int fired = 0;
        while (t < total) {
            t = std::min(total, t + 1 + static_cast<std::int64_t>(rng() % interval));
            fired += gate.poll(false, t);
        }
        auto expected = total / interval;
        CAPTURE(interval);
        CAPTURE(total);
        CHECK(std::abs(fired - expected) <= 1);
    }
}

TEST_CASE("concurrent boundary polls fire once") {
    for (int run = 0; run < 50; ++run) {
        TriggerGate gate(parse_trigger_policy("boundary"));
        std::atomic<int> wins{0};
        std::vector<std::thread> threads;
        for (int i = 0; i < 4; ++i)
            threads.emplace_back([&] {
                for (int k = 0; k < 200; ++k) wins += gate.poll(k > 50, k);
            });
        for (auto& th : threads) th.join();
        CHECK(wins == 1);
        CHECK(gate.fired() == 1);
    }
}
