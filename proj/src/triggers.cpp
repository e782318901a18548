#include "gazeguide/triggers.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include <charconv>

namespace gazeguide {

std::string_view to_string(TriggerKind kind) {
    switch (kind) {
    case TriggerKind::Boundary: return "boundary";
    case TriggerKind::FixedInterval: return "interval";
    case TriggerKind::OnDemand: return "ondemand";
    case TriggerKind::Event: return "event";
    }
    return "boundary";
}

namespace {

const char* const kOps[] = {">=", "<=", "==", "!=", ">", "<"};

bool field_allowed(std::string_view kind, std::string_view field) {
    if (kind == "fixation") return field == "look_count";
    if (kind == "regression") return field == "to_sentence" || field == "from_sentence";
    if (kind == "offtext") return field == "duration_ms";
    if (kind == "skip") return field == "sentence_index";
    return false;
}

EventClause parse_clause(std::string_view s) {
    auto t = text::trim(s);
    EventClause c;
    auto dot = t.find('.');
    if (dot == std::string::npos) {
        c.kind = t;
    } else {
        c.kind = t.substr(0, dot);
        std::string rest = t.substr(dot + 1);
        std::size_t at = std::string::npos;
        for (const char* op : kOps) {
            auto p = rest.find(op);
            if (p != std::string::npos && (at == std::string::npos || p < at || (p == at && std::string_view(op).size() > c.op.size()))) {
                at = p;
                c.op = op;
            }
        }
        if (at == std::string::npos) throw ValidationError("event clause '" + t + "' has no comparison");
        c.field = text::trim(rest.substr(0, at));
        auto num = text::trim(rest.substr(at + c.op.size()));
        auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), c.value);
        if (ec != std::errc() || ptr != num.data() + num.size() || num.empty())
            throw ValidationError("event clause '" + t + "' has a bad number");
        if (!field_allowed(c.kind, c.field))
            throw ValidationError("unknown field '" + c.field + "' for '" + c.kind + "' events");
    }
    if (c.kind != "fixation" && c.kind != "regression" && c.kind != "offtext" && c.kind != "skip" && c.kind != "any")
        throw ValidationError("unknown event kind '" + c.kind + "'");
    if (c.kind == "any" && !c.field.empty()) throw ValidationError("'any' takes no field");
    return c;
}

bool compare(double lhs, std::string_view op, double rhs) {
    if (op == ">=") return lhs >= rhs;
    if (op == "<=") return lhs <= rhs;
    if (op == ">") return lhs > rhs;
    if (op == "<") return lhs < rhs;
    if (op == "==") return lhs == rhs;
    return lhs != rhs;
}

bool clause_matches(const EventClause& c, const BehaviorReport& e) {
    auto test = [&](double v) { return c.field.empty() || compare(v, c.op, c.value); };
    if (c.kind == "any")
        return !e.fixations.empty() || !e.regressions.empty() || !e.offtext.empty() || !e.skips.empty();
    if (c.kind == "fixation") {
        for (const auto& f : e.fixations)
            if (test(f.look_count)) return true;
    } else if (c.kind == "regression") {
        for (const auto& r : e.regressions)
            if (test(static_cast<double>(c.field == "from_sentence" ? r.from_sentence : r.to_sentence))) return true;
    } else if (c.kind == "offtext") {
        for (const auto& o : e.offtext)
            if (test(static_cast<double>(o.duration_ms))) return true;
    } else {
        for (const auto& s : e.skips)
            if (test(static_cast<double>(s.sentence_index))) return true;
    }
    return false;
}

std::string format_number(double v) {
    auto s = std::to_string(v);
    s.erase(s.find_last_not_of('0') + 1);
    if (s.back() == '.') s.pop_back();
    return s;
}

} // namespace

EventRule parse_event_rule(std::string_view spec) {
    EventRule rule;
    std::size_t start = 0;
    while (start <= spec.size()) {
        auto bar = spec.find('|', start);
        auto part = spec.substr(start, bar == std::string_view::npos ? std::string_view::npos : bar - start);
        if (text::trim(part).empty()) throw ValidationError("empty clause in event rule");
        rule.clauses.push_back(parse_clause(part));
        if (bar == std::string_view::npos) break;
        start = bar + 1;
    }
    return rule;
}

std::string format_event_rule(const EventRule& rule) {
    std::string out;
    for (const auto& c : rule.clauses) {
        if (!out.empty()) out += '|';
        out += c.kind;
        if (!c.field.empty()) out += "." + c.field + c.op + format_number(c.value);
    }
    return out;
}

bool event_rule_matches(const EventRule& rule, const BehaviorReport& events) {
    for (const auto& c : rule.clauses)
        if (clause_matches(c, events)) return true;
    return false;
}

void TriggerPolicy::validate() const {
    if (kind == TriggerKind::FixedInterval && interval_ms <= 0)
        throw ValidationError("interval_ms must be positive");
    if (kind != TriggerKind::FixedInterval && interval_ms != 0)
        throw ValidationError("interval_ms applies to fixed_interval only");
    if (kind == TriggerKind::Event && event_rule.clauses.empty()) throw ValidationError("event policy needs a rule");
}

TriggerPolicy parse_trigger_policy(std::string_view spec) {
    TriggerPolicy p;
    auto colon = spec.find(':');
    auto head = text::to_lower(spec.substr(0, colon));
    auto arg = colon == std::string_view::npos ? std::string() : std::string(spec.substr(colon + 1));
    if (head == "boundary" && colon == std::string_view::npos) {
        p.kind = TriggerKind::Boundary;
    } else if (head == "interval" || head == "fixed_interval") {
        p.kind = TriggerKind::FixedInterval;
        auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), p.interval_ms);
        if (ec != std::errc() || ptr != arg.data() + arg.size() || arg.empty())
            throw ValidationError("interval policy needs a millisecond count, e.g. interval:10000");
    } else if ((head == "ondemand" || head == "on_demand") && colon == std::string_view::npos) {
        p.kind = TriggerKind::OnDemand;
    } else if (head == "event") {
        p.kind = TriggerKind::Event;
        p.event_rule = parse_event_rule(arg.empty() ? "fixation.look_count>=4" : arg);
    } else {
        throw ValidationError("unknown trigger policy '" + std::string(spec) + "'");
    }
    p.validate();
    return p;
}

std::string format_trigger_policy(const TriggerPolicy& p) {
    switch (p.kind) {
    case TriggerKind::FixedInterval: return "interval:" + std::to_string(p.interval_ms);
    case TriggerKind::Event: return "event:" + format_event_rule(p.event_rule);
    default: return std::string(to_string(p.kind));
    }
}

bool evaluate_trigger(const TriggerPolicy& policy, const TriggerState& s) {
    switch (policy.kind) {
    case TriggerKind::Boundary: return s.reading_finished && !s.has_run;
    case TriggerKind::FixedInterval: return policy.interval_ms > 0 && s.now_ms - s.last_run_ms >= policy.interval_ms;
    case TriggerKind::OnDemand: return s.user_query;
    case TriggerKind::Event: return s.new_events && event_rule_matches(policy.event_rule, *s.new_events);
    }
    return false;
}

TriggerGate::TriggerGate(TriggerPolicy policy) : policy_(std::move(policy)) { policy_.validate(); }

TriggerGate::TriggerGate(const TriggerGate& o)
    : policy_(o.policy_), has_run_(o.has_run_.load()), last_run_ms_(o.last_run_ms_.load()), fired_(o.fired_.load()) {}

TriggerGate& TriggerGate::operator=(const TriggerGate& o) {
    policy_ = o.policy_;
    has_run_ = o.has_run_.load();
    last_run_ms_ = o.last_run_ms_.load();
    fired_ = o.fired_.load();
    return *this;
}

bool TriggerGate::poll(bool reading_finished, std::int64_t now_ms, bool user_query,
                       const BehaviorReport* new_events) {
    TriggerState s;
    s.reading_finished = reading_finished;
    s.now_ms = now_ms;
    s.last_run_ms = last_run_ms_.load();
    s.has_run = has_run_.load();
    s.user_query = user_query;
    s.new_events = new_events;
    if (!evaluate_trigger(policy_, s)) return false;

    bool won = true;
    if (policy_.kind == TriggerKind::Boundary) {
        bool expected = false;
        won = has_run_.compare_exchange_strong(expected, true);
    } else if (policy_.kind == TriggerKind::FixedInterval) {
        // Anchor to the interval grid so late polls do not drift the schedule.
        auto last = s.last_run_ms;
        auto anchored = now_ms - (now_ms - last) % policy_.interval_ms;
        won = last_run_ms_.compare_exchange_strong(last, anchored);
        if (won) has_run_.store(true);
    } else {
        has_run_.store(true);
        last_run_ms_.store(now_ms);
    }
    if (won) fired_.fetch_add(1);
    return won;
}

void TriggerGate::reset() {
    has_run_.store(false);
    last_run_ms_.store(0);
    fired_.store(0);
}

} // namespace gazeguide
