#pragma once

#include "gazeguide/behavior.hpp"

#include <atomic>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace gazeguide {

enum class TriggerKind { Boundary, FixedInterval, OnDemand, Event };

std::string_view to_string(TriggerKind kind);

/// One clause of an event rule: "<kind>[.<field><op><value>]", e.g.
/// "fixation.look_count>=4", "offtext.duration_ms>1500", "regression".
struct EventClause {
    std::string kind;
    std::string field;
    std::string op;
    double value = 0;
    bool operator==(const EventClause&) const = default;
};

/// Clauses joined with "|"; the rule holds when any clause matches any event.
struct EventRule {
    std::vector<EventClause> clauses;
    bool operator==(const EventRule&) const = default;
};

/// Throws ValidationError.
EventRule parse_event_rule(std::string_view spec);
std::string format_event_rule(const EventRule& rule);
bool event_rule_matches(const EventRule& rule, const BehaviorReport& events);

struct TriggerPolicy {
    TriggerKind kind = TriggerKind::Boundary;
    std::int64_t interval_ms = 0;
    EventRule event_rule;

    void validate() const;
    bool operator==(const TriggerPolicy&) const = default;
};

/// "boundary", "interval:<ms>", "ondemand", "event[:<rule>]" (default rule
/// "fixation.look_count>=4"). Throws ValidationError.
TriggerPolicy parse_trigger_policy(std::string_view spec);
std::string format_trigger_policy(const TriggerPolicy& policy);

struct TriggerState {
    bool reading_finished = false;
    std::int64_t now_ms = 0;
    std::int64_t last_run_ms = 0;
    /// Whether analysis already ran in this reading episode.
    bool has_run = false;
    bool user_query = false;
    /// Events detected since the last run.
    const BehaviorReport* new_events = nullptr;
};

bool evaluate_trigger(const TriggerPolicy& policy, const TriggerState& state);

/// Stateful wrapper for one reading episode. poll() is lock-free and safe to
/// call from several threads; each firing is reported to exactly one caller.
class TriggerGate {
public:
    explicit TriggerGate(TriggerPolicy policy);
    /// Copies take a snapshot of the counters; not atomic with concurrent polls.
    TriggerGate(const TriggerGate& other);
    TriggerGate& operator=(const TriggerGate& other);

    bool poll(bool reading_finished, std::int64_t now_ms, bool user_query = false,
              const BehaviorReport* new_events = nullptr);

    const TriggerPolicy& policy() const { return policy_; }
    int fired() const { return fired_.load(); }
    void reset();

private:
    TriggerPolicy policy_;
    std::atomic<bool> has_run_{false};
    std::atomic<std::int64_t> last_run_ms_{0};
    std::atomic<int> fired_{0};
};

} // namespace gazeguide
