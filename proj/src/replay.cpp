#include "gazeguide/replay.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include "json.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>

namespace gazeguide {

using ojson = nlohmann::ordered_json;

std::optional<std::string> UserPolicy::reply(std::size_t index) const {
    if (index >= static_cast<std::size_t>(max_user_turns)) return std::nullopt;
    switch (kind) {
    case UserPolicyKind::AlwaysAffirm: return std::string("yes");
    case UserPolicyKind::AlwaysDeny: return std::string("no");
    case UserPolicyKind::Scripted:
        if (index < replies.size()) return replies[index];
        return std::nullopt;
    }
    return std::nullopt;
}

UserPolicy parse_user_policy(std::string_view spec) {
    UserPolicy p;
    auto s = text::trim(spec);
    if (s == "affirm" || s == "always-affirm") {
        p.kind = UserPolicyKind::AlwaysAffirm;
    } else if (s == "deny" || s == "always-deny") {
        p.kind = UserPolicyKind::AlwaysDeny;
    } else if (s.starts_with("script:")) {
        p.kind = UserPolicyKind::Scripted;
        auto rest = s.substr(7);
        std::size_t start = 0;
        while (true) {
            auto bar = rest.find('|', start);
            p.replies.emplace_back(text::trim(rest.substr(start, bar == std::string_view::npos ? bar : bar - start)));
            if (bar == std::string_view::npos) break;
            start = bar + 1;
        }
        p.max_user_turns = static_cast<int>(p.replies.size());
    } else {
        throw ValidationError("unknown user policy '" + std::string(spec) + "'");
    }
    return p;
}

std::string format_user_policy(const UserPolicy& p) {
    switch (p.kind) {
    case UserPolicyKind::AlwaysAffirm: return "affirm";
    case UserPolicyKind::AlwaysDeny: return "deny";
    case UserPolicyKind::Scripted: {
        std::string out = "script:";
        for (std::size_t i = 0; i < p.replies.size(); ++i) {
            if (i) out += '|';
            out += p.replies[i];
        }
        return out;
    }
    }
    return {};
}

std::string_view to_string(BackendKind kind) { return kind == BackendKind::Rule ? "rule" : "llm"; }

std::optional<BackendKind> parse_backend_kind(std::string_view s) {
    if (s == "rule") return BackendKind::Rule;
    if (s == "llm") return BackendKind::Llm;
    return std::nullopt;
}

const AnalysisResult& SessionRecord::analysis() const {
    static const AnalysisResult empty;
    return analyses.empty() ? empty : analyses.back();
}

bool SessionRecord::operator==(const SessionRecord& o) const {
    return session_id == o.session_id && participant_id == o.participant_id && passage_id == o.passage_id &&
           condition == o.condition && policy == o.policy && user_policy == o.user_policy &&
           trace_ref == o.trace_ref && observations == o.observations && report == o.report &&
           analyses == o.analyses && transcript == o.transcript && metrics == o.metrics;
}

namespace {

LlmClient& need_llm(const ReplayBackends& b) {
    if (!b.llm) throw ValidationError("llm backend selected but no LLM client configured");
    return *b.llm;
}

// Events in `now` that were not yet present at the last firing.
BehaviorReport new_events(const BehaviorReport& now, const BehaviorReport& at_last_run, bool has_run,
                          std::int64_t last_run_ms, bool include_skips) {
    BehaviorReport d;
    d.passage_id = now.passage_id;
    std::map<std::string, int> seen;
    for (const auto& f : at_last_run.fixations) seen[f.target_surface] = f.look_count;
    for (const auto& f : now.fixations) {
        auto it = seen.find(f.target_surface);
        if (it == seen.end() || f.look_count > it->second) d.fixations.push_back(f);
    }
    for (const auto& r : now.regressions)
        if (!has_run || r.at_ms > last_run_ms) d.regressions.push_back(r);
    for (const auto& o : now.offtext)
        if (!has_run || o.end_ms > last_run_ms) d.offtext.push_back(o);
    if (include_skips) {
        for (const auto& s : now.skips) {
            bool old = std::any_of(at_last_run.skips.begin(), at_last_run.skips.end(),
                                   [&](const SkipEvent& k) { return k.sentence_index == s.sentence_index; });
            if (!old) d.skips.push_back(s);
        }
    }
    return d;
}

std::shared_ptr<AssistantBackend> make_assistant(const ReplayBackends& b) {
    if (b.assistant == BackendKind::Llm) return std::make_shared<LlmAssistant>(b.llm, b.retries);
    return std::make_shared<ScriptedAssistant>();
}

std::int64_t unix_ms_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

} // namespace

AnalysisResult analyze_condition(AnalysisMode condition, std::span<const GazeObservation> obs,
                                 const BehaviorReport& report, const PassageModel& passage, const ReplayBackends& b,
                                 std::int64_t t_ms) {
    if (condition == AnalysisMode::TextOnly) {
        if (b.analysis == BackendKind::Llm) return infer_needs_text_only(passage, need_llm(b), b.retries, t_ms);
        if (b.corpus.empty()) return infer_needs_text_only_rules(passage, std::span(&passage, 1), t_ms);
        return infer_needs_text_only_rules(passage, b.corpus, t_ms);
    }
    if (b.analysis == BackendKind::Llm)
        return infer_needs_llm(report, obs, passage, need_llm(b), b.retries, b.llm_input, t_ms);
    return infer_needs_rules(report, passage, t_ms);
}

ReadingEpisode::ReadingEpisode(std::string session_id, const PassageModel& passage, LayoutMap layout,
                               TriggerPolicy policy, DetectorParams params, Analyzer analyzer)
    : passage_(&passage), layout_(std::move(layout)), params_(params), analyzer_(std::move(analyzer)),
      list_(std::move(session_id), params.sample_period_ms), gate_(std::move(policy)) {
    params_.validate();
}

void ReadingEpisode::set_layout(LayoutMap layout) {
    if (!list_.empty()) throw ValidationError("layout is fixed once samples have arrived");
    layout_ = std::move(layout);
}

void ReadingEpisode::fire(std::int64_t t_ms, const BehaviorReport& report) {
    analyses_.push_back(analyzer_(list_.observations(), report, t_ms));
    at_last_run_ = report;
    last_run_ms_ = t_ms;
}

bool ReadingEpisode::append(const GazeSample& sample) {
    if (finished_) throw ValidationError("reading already finished");
    append_sample(list_, sample, layout_, *passage_);
    last_t_ms_ = sample.t_ms;
    const auto kind = gate_.policy().kind;
    if (kind == TriggerKind::Boundary || kind == TriggerKind::OnDemand) return false;
    auto saved = gate_;
    try {
        if (kind == TriggerKind::Event) {
            auto report = analyze_behavior(list_.observations(), *passage_, params_);
            auto delta = new_events(report, at_last_run_, gate_.fired() > 0, last_run_ms_, false);
            if (!gate_.poll(false, sample.t_ms, false, &delta)) return false;
            fire(sample.t_ms, report);
            return true;
        }
        if (!gate_.poll(false, sample.t_ms)) return false;
        fire(sample.t_ms, analyze_behavior(list_.observations(), *passage_, params_));
        return true;
    } catch (...) {
        gate_ = saved;
        throw;
    }
}

bool ReadingEpisode::finish() {
    if (finished_) throw ValidationError("reading already finished");
    auto report = analyze_behavior(list_.observations(), *passage_, params_);
    const auto kind = gate_.policy().kind;
    auto delta = new_events(report, at_last_run_, gate_.fired() > 0, last_run_ms_, true);
    auto saved = gate_;
    bool fired = false;
    try {
        fired = gate_.poll(true, last_t_ms_, kind == TriggerKind::OnDemand,
                           kind == TriggerKind::Event ? &delta : nullptr);
        if (fired) fire(last_t_ms_, report);
    } catch (...) {
        gate_ = saved;
        throw;
    }
    report_ = std::move(report);
    finished_ = true;
    return fired;
}

SessionRecord replay(std::span<const GazeSample> trace, const PassageModel& passage, const LayoutMap& layout,
                     const ReplayOptions& opt, const ReplayBackends& backends) {
    auto started = std::chrono::steady_clock::now();
    opt.policy.validate();
    opt.params.validate();
    if (backends.assistant == BackendKind::Llm) need_llm(backends);

    SessionRecord rec;
    rec.started_unix_ms = unix_ms_now();
    rec.session_id = opt.session_id;
    rec.participant_id = opt.participant_id;
    rec.passage_id = passage.passage_id();
    rec.condition = opt.condition;
    rec.policy = format_trigger_policy(opt.policy);
    rec.user_policy = format_user_policy(opt.user);
    rec.trace_ref = opt.trace_ref;

    ReadingEpisode episode(opt.session_id, passage, layout, opt.policy, opt.params,
                           [&](std::span<const GazeObservation> obs, const BehaviorReport& report, std::int64_t t) {
                               return analyze_condition(opt.condition, obs, report, passage, backends, t);
                           });
    for (const auto& sample : trace) episode.append(sample);
    episode.finish();
    const std::int64_t t_end = episode.end_ms();
    rec.observations = episode.observations();
    rec.report = episode.report();
    rec.analyses = episode.analyses();

    AnalysisResult convo_analysis = rec.analysis();
    convo_analysis.mode = opt.condition;
    std::shared_ptr<const PassageModel> shared(std::shared_ptr<void>{}, &passage);
    Session session(opt.session_id, shared, convo_analysis, make_assistant(backends), opt.session);
    std::int64_t t = t_end + opt.turn_gap_ms;
    session.open(t);
    for (std::size_t i = 0; session.state() != SessionState::Closed; ++i) {
        auto reply = opt.user.reply(i);
        if (!reply) break;
        t += opt.turn_gap_ms;
        session.user_turn(*reply, t);
    }
    rec.transcript = session.transcript();
    rec.transcript.analysis_mode = opt.condition;
    rec.metrics = conversation_metrics(rec.transcript);
    rec.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    return rec;
}

namespace {

void write_file(const std::filesystem::path& p, const std::string& contents) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + p.string());
    out << contents;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string_view> lines_of(std::string_view s) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (start < s.size()) {
        auto nl = s.find('\n', start);
        auto line = s.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
        if (!text::trim(line).empty()) out.push_back(line);
        if (nl == std::string_view::npos) break;
        start = nl + 1;
    }
    return out;
}

std::string observation_record_line(const GazeObservation& o) {
    auto j = ojson::parse(format_observation_line(o));
    if (o.word_index) j["word_index"] = *o.word_index;
    return j.dump();
}

GazeObservation parse_observation_record_line(std::string_view line) {
    ojson j;
    try {
        j = ojson::parse(line);
    } catch (const ojson::parse_error& e) {
        throw SchemaViolation(std::string("observation line is not JSON: ") + e.what());
    }
    std::optional<std::size_t> wi;
    if (j.is_object() && j.contains("word_index")) {
        if (!j["word_index"].is_number_unsigned()) throw SchemaViolation("word_index must be a non-negative integer");
        wi = j["word_index"].get<std::size_t>();
        j.erase("word_index");
    }
    auto o = parse_observation_line(j.dump());
    o.word_index = wi;
    return o;
}

} // namespace

void write_record(const std::filesystem::path& dir, const SessionRecord& r, std::span<const GazeSample> trace) {
    std::filesystem::create_directories(dir);
    ojson meta;
    meta["session_id"] = r.session_id;
    meta["participant_id"] = r.participant_id;
    meta["passage_id"] = r.passage_id;
    meta["condition"] = std::string(to_string(r.condition));
    meta["policy"] = r.policy;
    meta["user_policy"] = r.user_policy;
    meta["trace_ref"] = r.trace_ref;
    meta["metrics"] = {{"user_words", r.metrics.user_words},
                       {"turns", r.metrics.turns},
                       {"assistant_words", r.metrics.assistant_words}};
    meta["started_unix_ms"] = r.started_unix_ms;
    meta["elapsed_ms"] = r.elapsed_ms;
    write_file(dir / "record.json", meta.dump(2) + "\n");
    if (!trace.empty()) write_file(dir / "trace.jsonl", format_trace(trace));
    std::string obs;
    for (const auto& o : r.observations) obs += observation_record_line(o) + "\n";
    write_file(dir / "observations.jsonl", obs);
    write_file(dir / "report.json", report_to_json(r.report, 2) + "\n");
    std::string an;
    for (const auto& a : r.analyses) an += analysis_to_json(a) + "\n";
    write_file(dir / "analysis.jsonl", an);
    write_file(dir / "transcript.jsonl", transcript_to_jsonl(r.transcript));
}

SessionRecord read_record(const std::filesystem::path& dir) {
    SessionRecord r;
    ojson meta;
    try {
        meta = ojson::parse(read_file(dir / "record.json"));
        r.session_id = meta.at("session_id").get<std::string>();
        r.participant_id = meta.value("participant_id", "");
        r.passage_id = meta.at("passage_id").get<std::string>();
        auto mode = parse_analysis_mode(meta.at("condition").get<std::string>());
        if (!mode) throw SchemaViolation("record.json: bad condition");
        r.condition = *mode;
        r.policy = meta.value("policy", "");
        r.user_policy = meta.value("user_policy", "");
        r.trace_ref = meta.value("trace_ref", "");
        const auto& m = meta.at("metrics");
        r.metrics.user_words = m.at("user_words").get<std::size_t>();
        r.metrics.turns = m.at("turns").get<std::size_t>();
        r.metrics.assistant_words = m.at("assistant_words").get<std::size_t>();
        r.started_unix_ms = meta.value("started_unix_ms", std::int64_t{0});
        r.elapsed_ms = meta.value("elapsed_ms", 0.0);
    } catch (const ojson::exception& e) {
        throw SchemaViolation(dir.string() + "/record.json: " + e.what());
    }
    auto obs = read_file(dir / "observations.jsonl");
    for (auto line : lines_of(obs)) r.observations.push_back(parse_observation_record_line(line));
    r.report = report_from_json(read_file(dir / "report.json"));
    auto analyses = read_file(dir / "analysis.jsonl");
    for (auto line : lines_of(analyses)) r.analyses.push_back(analysis_from_json(line));
    r.transcript = transcript_from_jsonl(read_file(dir / "transcript.jsonl"), r.condition);
    return r;
}

std::vector<SessionRecord> read_records(const std::filesystem::path& root) {
    std::vector<SessionRecord> out;
    if (!std::filesystem::is_directory(root)) throw ValidationError("not a directory: " + root.string());
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory() && std::filesystem::exists(e.path() / "record.json"))
            out.push_back(read_record(e.path()));
    std::sort(out.begin(), out.end(),
              [](const SessionRecord& a, const SessionRecord& b) { return a.session_id < b.session_id; });
    return out;
}

namespace {

int thread_count(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

// Runs body(i) for i in [0, n) in parallel; rethrows the lowest-index failure.
template <class Body>
void parallel_for(std::size_t n, int threads, Body body) {
    std::vector<std::exception_ptr> errors(n);
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count(threads))
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

SessionRecord run_job(const ReplayJob& j, const ReplayBackends& b) {
    if (!j.passage || !j.layout) throw ValidationError("replay job without passage or layout");
    return replay(j.trace, *j.passage, *j.layout, j.options, b);
}

JudgeVerdict judge_one(const JudgeJob& j, const ClassifierSpec& spec, RuleJudgeOptions o) {
    if (!j.transcript || !j.analysis) throw ValidationError("judge job without transcript or analysis");
    if (j.passage) o.passage = j.passage;
    return rule_judge(*j.transcript, *j.analysis, spec, o);
}

} // namespace

std::vector<SessionRecord> replay_batch(std::span<const ReplayJob> jobs, const ReplayBackends& b, int threads) {
    std::vector<SessionRecord> out(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) { out[i] = run_job(jobs[i], b); });
    return out;
}

std::vector<SessionRecord> replay_batch_serial(std::span<const ReplayJob> jobs, const ReplayBackends& b) {
    std::vector<SessionRecord> out;
    out.reserve(jobs.size());
    for (const auto& j : jobs) out.push_back(run_job(j, b));
    return out;
}

std::vector<BehaviorReport> analyze_batch(std::span<const AnalyzeJob> jobs, const DetectorParams& params,
                                          int threads) {
    params.validate();
    std::vector<BehaviorReport> out(jobs.size());
    parallel_for(jobs.size(), threads, [&](std::size_t i) {
        if (!jobs[i].passage) throw ValidationError("analyze job without passage");
        out[i] = analyze_behavior(jobs[i].observations, *jobs[i].passage, params);
    });
    return out;
}

std::vector<BehaviorReport> analyze_batch_serial(std::span<const AnalyzeJob> jobs, const DetectorParams& params) {
    params.validate();
    std::vector<BehaviorReport> out;
    out.reserve(jobs.size());
    for (const auto& j : jobs) {
        if (!j.passage) throw ValidationError("analyze job without passage");
        out.push_back(analyze_behavior(j.observations, *j.passage, params));
    }
    return out;
}

std::vector<std::vector<JudgeVerdict>> judge_batch(std::span<const JudgeJob> jobs, const JudgeRegistry& registry,
                                                   const RuleJudgeOptions& options, int threads) {
    const auto k = registry.classifiers.size();
    std::vector<std::vector<JudgeVerdict>> out(jobs.size(), std::vector<JudgeVerdict>(k));
    parallel_for(jobs.size() * k, threads, [&](std::size_t idx) {
        out[idx / k][idx % k] = judge_one(jobs[idx / k], registry.classifiers[idx % k], options);
    });
    return out;
}

std::vector<std::vector<JudgeVerdict>> judge_batch_serial(std::span<const JudgeJob> jobs,
                                                          const JudgeRegistry& registry,
                                                          const RuleJudgeOptions& options) {
    std::vector<std::vector<JudgeVerdict>> out;
    out.reserve(jobs.size());
    for (const auto& j : jobs) {
        auto& row = out.emplace_back();
        for (const auto& spec : registry.classifiers) row.push_back(judge_one(j, spec, options));
    }
    return out;
}

std::vector<SessionScores> score_records(std::span<const SessionRecord> records, const JudgeRegistry& registry,
                                         std::span<const PassageModel> passages, int threads) {
    std::vector<JudgeJob> jobs;
    jobs.reserve(records.size());
    for (const auto& r : records) {
        const PassageModel* p = nullptr;
        for (const auto& candidate : passages)
            if (candidate.passage_id() == r.passage_id) p = &candidate;
        if (!p) throw ValidationError("record " + r.session_id + " names unknown passage '" + r.passage_id + "'");
        jobs.push_back({&r.transcript, &r.analysis(), p});
    }
    auto verdicts = judge_batch(jobs, registry, {}, threads);
    std::vector<SessionScores> out;
    out.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i)
        out.push_back(score_session(records[i].session_id, records[i].participant_id, records[i].condition,
                                    verdicts[i], records[i].metrics));
    return out;
}

} // namespace gazeguide
