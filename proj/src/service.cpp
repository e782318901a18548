#include "gazeguide/service.hpp"

#include "gazeguide/errors.hpp"
#include "gazeguide/text.hpp"

#include "httplib.h"
#include "json.hpp"

#include <chrono>
#include <ctime>
#include <deque>
#include <fstream>
#include <random>
#include <sstream>

namespace gazeguide {

using ojson = nlohmann::ordered_json;

namespace {

std::int64_t unix_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string iso8601(std::int64_t ms) {
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[40];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms % 1000));
    return out;
}

ServiceResponse json_response(int status, const ojson& body) { return {status, body.dump(), "application/json"}; }

ServiceResponse error(int status, const std::string& message) {
    return json_response(status, {{"error", message}, {"status", status}});
}

ojson parse_body(const std::string& body) {
    if (text::trim(body).empty()) return ojson::object();
    auto j = ojson::parse(body);
    if (!j.is_object()) throw SchemaViolation("request body must be a JSON object");
    return j;
}

ojson turn_json(const Turn& t) { return ojson::parse(transcript_to_jsonl(SessionTranscript{{t}, {}})); }

ojson sample_json(const GazeSample& s) { return ojson::parse(format_trace_line(s)); }

ojson layout_to_json(const LayoutMap& l) {
    ojson j;
    j["frame"] = {l.frame_width_px, l.frame_height_px};
    auto& boxes = j["word_boxes"] = ojson::array();
    for (const auto& b : l.word_boxes) boxes.push_back({b.x0, b.y0, b.x1, b.y1});
    auto& regions = j["object_regions"] = ojson::array();
    for (const auto& r : l.object_regions)
        regions.push_back(
            {{"label", r.label}, {"description", r.description}, {"box", {r.box.x0, r.box.y0, r.box.x1, r.box.y1}}});
    return j;
}

Box box_from(const ojson& j) {
    if (!j.is_array() || j.size() != 4) throw SchemaViolation("box must be [x0,y0,x1,y1]");
    for (const auto& v : j)
        if (!v.is_number()) throw SchemaViolation("box coordinates must be numbers");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

LayoutMap layout_from_json(const ojson& j) {
    LayoutMap l;
    if (j.contains("frame")) {
        const auto& f = j["frame"];
        if (!f.is_array() || f.size() != 2 || !f[0].is_number_integer() || !f[1].is_number_integer())
            throw SchemaViolation("frame must be [width_px,height_px]");
        l.frame_width_px = f[0].get<int>();
        l.frame_height_px = f[1].get<int>();
    }
    if (!j.contains("word_boxes") || !j["word_boxes"].is_array()) throw SchemaViolation("word_boxes array required");
    for (const auto& b : j["word_boxes"]) l.word_boxes.push_back(box_from(b));
    if (j.contains("object_regions")) {
        if (!j["object_regions"].is_array()) throw SchemaViolation("object_regions must be an array");
        for (const auto& r : j["object_regions"]) {
            if (!r.is_object() || !r.contains("label") || !r["label"].is_string() || !r.contains("box"))
                throw SchemaViolation("object region needs label and box");
            l.object_regions.push_back({r["label"].get<std::string>(), r.value("description", ""), box_from(r["box"])});
        }
    }
    return l;
}

// Assistant backend that journals every reply and can replay them after a restart.
class JournaledAssistant : public AssistantBackend {
public:
    explicit JournaledAssistant(std::shared_ptr<AssistantBackend> inner) : inner_(std::move(inner)) {}

    std::string respond(const TurnRequest& request) override {
        if (!playback_.empty()) {
            auto r = std::move(playback_.front());
            playback_.pop_front();
            return r;
        }
        auto r = inner_->respond(request);
        captured_.push_back(r);
        return r;
    }

    std::deque<std::string> playback_;
    std::vector<std::string> captured_;

private:
    std::shared_ptr<AssistantBackend> inner_;
};

} // namespace

std::string descriptor_to_json(const SessionDescriptor& d) {
    ojson j;
    j["session_id"] = d.session_id;
    j["passage_id"] = d.passage_id;
    j["condition"] = std::string(to_string(d.condition));
    j["policy"] = d.policy;
    j["participant_id"] = d.participant_id;
    j["created_at"] = d.created_at;
    j["state"] = d.state;
    return j.dump();
}

struct ServiceCore::Entry {
    std::mutex mu;
    SessionDescriptor desc;
    std::int64_t created_unix_ms = 0;
    const PassageModel* passage = nullptr;
    std::filesystem::path dir;
    std::unique_ptr<ReadingEpisode> episode;
    std::deque<AnalysisResult> analysis_playback;
    std::vector<AnalysisResult> captured_analyses;
    std::optional<AnalysisResult> gaze_analysis;
    std::optional<AnalysisResult> text_analysis;
    std::shared_ptr<JournaledAssistant> assistant;
    std::unique_ptr<Session> session;
    std::vector<std::string> ratings;
    bool restoring = false;

    void append(const std::string& file, const std::string& contents) const {
        if (restoring) return;
        std::ofstream out(dir / file, std::ios::binary | std::ios::app);
        if (!out) throw Error("cannot write journal " + (dir / file).string());
        out << contents;
        out.flush();
    }
    void journal(const ojson& event) const { append("events.jsonl", event.dump() + "\n"); }

    // Journals analyses and assistant replies produced by the last command.
    void flush_captured() {
        for (const auto& a : captured_analyses) {
            journal({{"op", "analysis"}, {"analysis", ojson::parse(analysis_to_json(a))}});
            append("analysis.jsonl", analysis_to_json(a) + "\n");
        }
        captured_analyses.clear();
        if (assistant) {
            for (const auto& r : assistant->captured_) journal({{"op", "reply"}, {"text", r}});
            assistant->captured_.clear();
        }
    }

    void export_turns(std::size_t from) const {
        const auto& turns = session->transcript().turns;
        SessionTranscript tail{{turns.begin() + static_cast<std::ptrdiff_t>(from), turns.end()}, desc.condition};
        append("transcript.jsonl", transcript_to_jsonl(tail));
    }

    void sync_state() { desc.state = session ? std::string(to_string(session->state())) : "READING"; }
};

ServiceCore::ServiceCore(ServiceOptions options) : options_(std::move(options)) {
    if ((options_.analysis == BackendKind::Llm || options_.assistant == BackendKind::Llm) && !options_.llm)
        throw ValidationError("llm backend selected but no LLM client configured");
    auto root = options_.data_dir / "sessions";
    std::filesystem::create_directories(root);
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory() && std::filesystem::exists(e.path() / "events.jsonl")) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) restore(d);
}

ServiceCore::~ServiceCore() = default;

std::size_t ServiceCore::session_count() const {
    std::shared_lock lock(mu_);
    return sessions_.size();
}

const PassageModel* ServiceCore::passage(const std::string& id) const {
    for (const auto& p : options_.passages)
        if (p.passage_id() == id) return &p;
    return nullptr;
}

std::shared_ptr<ServiceCore::Entry> ServiceCore::find(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

std::string ServiceCore::new_session_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    while (true) {
        char buf[24];
        std::snprintf(buf, sizeof buf, "s%04llx%08llx", static_cast<unsigned long long>(++counter_ & 0xffff),
                      static_cast<unsigned long long>(rng() & 0xffffffffULL));
        if (!sessions_.count(buf)) return buf;
    }
}

ServiceResponse ServiceCore::list_passages() const {
    auto arr = ojson::array();
    for (const auto& p : options_.passages)
        arr.push_back({{"passage_id", p.passage_id()}, {"title", p.title()}, {"word_count", p.word_count()}});
    return json_response(200, arr);
}

ServiceResponse ServiceCore::get_passage(const std::string& id) const {
    const auto* p = passage(id);
    if (!p) return error(404, "unknown passage '" + id + "'");
    ojson j;
    j["passage_id"] = p->passage_id();
    j["title"] = p->title();
    j["raw_text"] = p->raw_text();
    auto& sentences = j["sentences"] = ojson::array();
    for (const auto& s : p->sentences())
        sentences.push_back({{"sentence_index", s.sentence_index}, {"text", s.text}, {"content", s.content}});
    auto& words = j["words"] = ojson::array();
    for (const auto& w : p->words())
        words.push_back({{"word_index", w.word_index},
                         {"sentence_index", w.sentence_index},
                         {"surface", w.surface},
                         {"token", p->raw_text().substr(w.char_span.start, w.char_span.size())}});
    return json_response(200, j);
}

ServiceResponse ServiceCore::create_session(const std::string& body, const std::string& key) {
    ojson req;
    try {
        req = parse_body(body);
    } catch (const std::exception& e) {
        return error(400, e.what());
    }
    if (!key.empty()) {
        std::shared_lock lock(mu_);
        auto it = idempotency_.find(key);
        if (it != idempotency_.end()) {
            auto entry = sessions_.at(it->second);
            std::lock_guard g(entry->mu);
            return json_response(201, ojson::parse(descriptor_to_json(entry->desc)));
        }
    }
    if (!req.contains("passage_id") || !req["passage_id"].is_string()) return error(400, "passage_id required");
    auto pid = req["passage_id"].get<std::string>();
    const auto* p = passage(pid);
    if (!p) return error(404, "unknown passage '" + pid + "'");
    auto mode = parse_analysis_mode(req.value("condition", "gaze"));
    if (!req.value("condition", ojson("gaze")).is_string() || !mode) return error(400, "condition must be gaze or text_only");
    TriggerPolicy policy;
    try {
        policy = parse_trigger_policy(req.value("policy", "boundary"));
    } catch (const std::exception& e) {
        return error(400, e.what());
    }

    std::unique_lock lock(mu_);
    if (!key.empty()) {
        auto it = idempotency_.find(key);
        if (it != idempotency_.end())
            return json_response(201, ojson::parse(descriptor_to_json(sessions_.at(it->second)->desc)));
    }
    SessionDescriptor desc;
    desc.session_id = new_session_id();
    desc.passage_id = pid;
    desc.condition = *mode;
    desc.policy = format_trigger_policy(policy);
    desc.participant_id = req.value("participant_id", "");
    desc.idempotency_key = key;
    auto now = unix_ms();
    desc.created_at = iso8601(now);
    auto e = build_entry(std::move(desc), policy, *p, now);
    std::filesystem::create_directories(e->dir);
    ojson ev{{"op", "create"}, {"descriptor", ojson::parse(descriptor_to_json(e->desc))},
             {"idempotency_key", key}, {"created_unix_ms", e->created_unix_ms}};
    e->journal(ev);
    sessions_[e->desc.session_id] = e;
    if (!key.empty()) idempotency_[key] = e->desc.session_id;
    return json_response(201, ojson::parse(descriptor_to_json(e->desc)));
}

std::shared_ptr<ServiceCore::Entry> ServiceCore::build_entry(SessionDescriptor desc, const TriggerPolicy& policy,
                                                             const PassageModel& passage,
                                                             std::int64_t created_unix_ms) const {
    auto e = std::make_shared<Entry>();
    e->desc = std::move(desc);
    e->created_unix_ms = created_unix_ms;
    e->passage = &passage;
    e->dir = options_.data_dir / "sessions" / e->desc.session_id;
    auto* raw = e.get();
    const auto condition = e->desc.condition;
    ReplayBackends backends;
    backends.analysis = options_.analysis;
    backends.llm = options_.llm;
    backends.retries = options_.llm_retries;
    backends.corpus = options_.passages;
    const auto* p = &passage;
    e->episode = std::make_unique<ReadingEpisode>(
        e->desc.session_id, passage, make_default_layout(passage), policy, options_.params,
        [raw, condition, backends, p](std::span<const GazeObservation> obs, const BehaviorReport& report,
                                      std::int64_t t) {
            if (!raw->analysis_playback.empty()) {
                auto a = std::move(raw->analysis_playback.front());
                raw->analysis_playback.pop_front();
                return a;
            }
            auto a = analyze_condition(condition, obs, report, *p, backends, t);
            raw->captured_analyses.push_back(a);
            return a;
        });
    return e;
}

ServiceResponse ServiceCore::list_sessions() const {
    std::vector<std::shared_ptr<Entry>> entries;
    {
        std::shared_lock lock(mu_);
        for (const auto& [id, e] : sessions_) entries.push_back(e);
    }
    auto arr = ojson::array();
    for (const auto& e : entries) {
        std::lock_guard g(e->mu);
        arr.push_back(ojson::parse(descriptor_to_json(e->desc)));
    }
    return json_response(200, arr);
}

ServiceResponse ServiceCore::get_session(const std::string& id) const {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    std::lock_guard g(e->mu);
    return json_response(200, ojson::parse(descriptor_to_json(e->desc)));
}

ServiceResponse ServiceCore::put_layout(const std::string& id, const std::string& body) {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    std::lock_guard g(e->mu);
    if (e->episode->finished() || !e->episode->observations().empty())
        return error(409, "layout must be registered before any gaze sample");
    LayoutMap layout;
    try {
        auto j = parse_body(body);
        layout = j.contains("layout") && j["layout"].is_string() ? parse_layout(j["layout"].get<std::string>())
                                                                 : layout_from_json(j);
        validate_layout(layout, *e->passage);
    } catch (const ojson::exception& ex) {
        return error(400, ex.what());
    } catch (const SchemaViolation& ex) {
        return error(400, ex.what());
    } catch (const ValidationError& ex) {
        return error(422, ex.what());
    }
    e->episode->set_layout(layout);
    e->journal({{"op", "layout"}, {"layout", format_layout(layout)}});
    e->append("layout.txt", format_layout(layout));
    return json_response(200, {{"word_boxes", layout.word_boxes.size()},
                                {"object_regions", layout.object_regions.size()}});
}

ServiceResponse ServiceCore::get_layout(const std::string& id) const {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    std::lock_guard g(e->mu);
    return json_response(200, layout_to_json(e->episode->layout()));
}

ServiceResponse ServiceCore::post_gaze(const std::string& id, const std::string& body) {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    std::vector<GazeSample> samples;
    try {
        auto j = parse_body(body);
        const auto& arr = j.contains("samples") ? j["samples"] : j;
        if (!arr.is_array()) throw SchemaViolation("samples array required");
        for (const auto& s : arr) samples.push_back(parse_trace_line(s.dump()));
    } catch (const std::exception& ex) {
        return error(400, ex.what());
    }
    std::lock_guard g(e->mu);
    if (e->episode->finished()) return error(409, "session is not reading");
    std::int64_t last = e->episode->observations().empty() ? std::numeric_limits<std::int64_t>::min()
                                                           : e->episode->observations().back().t_ms;
    std::vector<GazeSample> accepted;
    std::size_t rejected = 0;
    for (const auto& s : samples) {
        if (s.t_ms < last)
            return error(422, "sample at t=" + std::to_string(s.t_ms) + " ms follows t=" + std::to_string(last) + " ms");
        try {
            validate_sample(s);
        } catch (const ValidationError&) {
            ++rejected;
            continue;
        }
        last = s.t_ms;
        accepted.push_back(s);
    }
    const auto before = e->episode->observations().size();
    std::size_t appended = 0;
    int status = 200;
    std::string failure;
    try {
        for (const auto& s : accepted) {
            ++appended;
            e->episode->append(s);
        }
    } catch (const BackendError& ex) {
        status = 503;
        failure = ex.what();
    }
    ojson ev{{"op", "gaze"}, {"samples", ojson::array()}};
    std::string trace;
    for (std::size_t i = 0; i < appended; ++i) {
        ev["samples"].push_back(sample_json(accepted[i]));
        trace += format_trace_line(accepted[i]) + "\n";
    }
    if (appended) {
        e->journal(ev);
        e->append("trace.jsonl", trace);
        const auto& obs = e->episode->observations();
        e->append("observations.jsonl", format_observation_log(std::span(obs).subspan(before)));
    }
    e->flush_captured();
    ojson out{{"accepted", appended},
              {"rejected", rejected + (accepted.size() - appended)},
              {"observations", e->episode->observations().size()},
              {"analyses", e->episode->analyses().size()}};
    if (status != 200) out["error"] = failure;
    return json_response(status, out);
}

ServiceResponse ServiceCore::finish(const std::string& id) {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    std::lock_guard g(e->mu);
    if (e->episode->finished()) return error(409, "reading already finished");

    const auto condition = e->desc.condition;
    const auto other = condition == AnalysisMode::Gaze ? AnalysisMode::TextOnly : AnalysisMode::Gaze;
    ReplayBackends backends;
    backends.analysis = options_.analysis;
    backends.llm = options_.llm;
    backends.retries = options_.llm_retries;
    backends.corpus = options_.passages;
    AnalysisResult comparison;
    try {
        const auto& obs = e->episode->observations();
        auto t_end = e->episode->end_ms();
        if (!e->analysis_playback.empty()) {
            comparison = std::move(e->analysis_playback.front());
            e->analysis_playback.pop_front();
        } else {
            comparison = analyze_condition(other, obs, analyze_behavior(obs, *e->passage, options_.params), *e->passage,
                                           backends, t_end);
            e->captured_analyses.push_back(comparison);
        }
        e->episode->finish();
    } catch (const BackendError& ex) {
        e->captured_analyses.clear();
        return error(503, ex.what());
    }

    AnalysisResult convo;
    if (!e->episode->analyses().empty()) convo = e->episode->analyses().back();
    convo.mode = condition;
    if (e->episode->analyses().empty()) convo.produced_at_ms = e->episode->end_ms();
    (condition == AnalysisMode::Gaze ? e->gaze_analysis : e->text_analysis) = convo;
    (condition == AnalysisMode::Gaze ? e->text_analysis : e->gaze_analysis) = comparison;

    std::shared_ptr<AssistantBackend> inner;
    if (options_.assistant == BackendKind::Llm) inner = std::make_shared<LlmAssistant>(options_.llm, options_.llm_retries);
    else inner = std::make_shared<ScriptedAssistant>();
    auto playback = e->assistant ? std::move(e->assistant->playback_) : std::deque<std::string>{};
    e->assistant = std::make_shared<JournaledAssistant>(inner);
    e->assistant->playback_ = std::move(playback);
    std::shared_ptr<const PassageModel> shared(std::shared_ptr<void>{}, e->passage);
    e->session = std::make_unique<Session>(e->desc.session_id, shared, convo, e->assistant, options_.session);
    auto opening = e->session->open(e->episode->end_ms());

    e->journal({{"op", "finish"}});
    e->flush_captured();
    e->export_turns(0);
    e->sync_state();
    ojson out;
    out["analysis"] = ojson::parse(analysis_to_json(convo));
    out["opening"] = turn_json(opening);
    out["session"] = ojson::parse(descriptor_to_json(e->desc));
    return json_response(200, out);
}

ServiceResponse ServiceCore::chat(const std::string& id, const std::string& body) {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    std::string text;
    std::optional<std::size_t> expected;
    std::optional<std::int64_t> t_override;
    try {
        auto j = parse_body(body);
        if (!j.contains("text") || !j["text"].is_string()) throw SchemaViolation("text required");
        text = j["text"].get<std::string>();
        if (j.contains("turn_index")) expected = j["turn_index"].get<std::size_t>();
        if (j.contains("t_ms")) t_override = j["t_ms"].get<std::int64_t>();
    } catch (const std::exception& ex) {
        return error(400, ex.what());
    }
    std::lock_guard g(e->mu);
    if (!e->session) return error(409, "conversation has not started; finish reading first");
    if (e->session->state() == SessionState::Closed) return error(410, "session is closed");
    const auto before = e->session->transcript().turns.size();
    if (expected && *expected != before)
        return error(409, "out of turn: expected turn_index " + std::to_string(before));
    std::int64_t t = t_override ? *t_override : unix_ms() - e->created_unix_ms;
    t = std::max(t, e->session->transcript().turns.back().t_ms);
    Turn reply;
    try {
        reply = e->session->user_turn(text, t);
    } catch (const BackendError& ex) {
        e->assistant->captured_.clear();
        return error(503, ex.what());
    }
    e->flush_captured();
    e->journal({{"op", "chat"}, {"text", text}, {"t_ms", t}});
    e->export_turns(before);
    e->sync_state();
    const auto& turns = e->session->transcript().turns;
    ojson out;
    out["user_turn"] = turn_json(turns[before]);
    out["turn"] = turn_json(reply);
    out["state"] = e->desc.state;
    out["turn_index"] = turns.size();
    return json_response(200, out);
}

ServiceResponse ServiceCore::transcript(const std::string& id) const {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    std::lock_guard g(e->mu);
    if (!e->session) return {200, "", "application/x-ndjson"};
    return {200, transcript_to_jsonl(e->session->transcript()), "application/x-ndjson"};
}

ServiceResponse ServiceCore::analysis(const std::string& id, const std::string& mode_text) const {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    std::lock_guard g(e->mu);
    auto mode = mode_text.empty() ? std::optional(e->desc.condition) : parse_analysis_mode(mode_text);
    if (!mode) return error(400, "mode must be gaze or text_only");
    if (!e->session) return error(409, "analysis is available after reading finishes");
    const auto& a = *mode == AnalysisMode::Gaze ? e->gaze_analysis : e->text_analysis;
    return json_response(200, ojson::parse(analysis_to_json(*a)));
}

ServiceResponse ServiceCore::post_rating(const std::string& id, const std::string& body) {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    ojson rating;
    try {
        auto j = parse_body(body);
        bool any = false;
        for (const char* k : {"accuracy", "confidence", "personalization"}) {
            if (!j.contains(k)) continue;
            if (!j[k].is_number_integer() || j[k].get<int>() < 1 || j[k].get<int>() > 7)
                return error(422, std::string(k) + " must be an integer from 1 to 7");
            rating[k] = j[k];
            any = true;
        }
        if (j.contains("mode")) {
            if (!j["mode"].is_string() || !parse_analysis_mode(j["mode"].get<std::string>()))
                return error(422, "mode must be gaze or text_only");
            rating["mode"] = std::string(to_string(*parse_analysis_mode(j["mode"].get<std::string>())));
        }
        if (j.contains("preference")) {
            if (!j["preference"].is_string() || !parse_analysis_mode(j["preference"].get<std::string>()))
                return error(422, "preference must be gaze or text_only");
            rating["preference"] = std::string(to_string(*parse_analysis_mode(j["preference"].get<std::string>())));
            any = true;
        }
        if (j.contains("order")) rating["order"] = j["order"];
        if (j.contains("seed")) rating["seed"] = j["seed"];
        if (!any) return error(422, "rating needs accuracy, confidence, personalization or preference");
    } catch (const std::exception& ex) {
        return error(400, ex.what());
    }
    std::lock_guard g(e->mu);
    rating["t_ms"] = unix_ms() - e->created_unix_ms;
    e->journal({{"op", "rating"}, {"rating", rating}});
    e->append("ratings.jsonl", rating.dump() + "\n");
    e->ratings.push_back(rating.dump());
    return json_response(201, rating);
}

ServiceResponse ServiceCore::ratings(const std::string& id) const {
    auto e = find(id);
    if (!e) return error(404, "unknown session '" + id + "'");
    std::lock_guard g(e->mu);
    auto arr = ojson::array();
    for (const auto& r : e->ratings) arr.push_back(ojson::parse(r));
    return json_response(200, arr);
}

void ServiceCore::restore(const std::filesystem::path& dir) {
    std::ifstream in(dir / "events.jsonl", std::ios::binary);
    std::vector<ojson> events;
    std::string line;
    try {
        while (std::getline(in, line))
            if (!text::trim(line).empty()) events.push_back(ojson::parse(line));
    } catch (const ojson::exception& ex) {
        throw SchemaViolation((dir / "events.jsonl").string() + ": " + ex.what());
    }
    if (events.empty() || events[0].value("op", "") != "create")
        throw SchemaViolation((dir / "events.jsonl").string() + ": journal must start with a create event");

    std::shared_ptr<Entry> e;
    try {
        const auto& d = events[0].at("descriptor");
        SessionDescriptor desc;
        desc.session_id = d.at("session_id").get<std::string>();
        desc.passage_id = d.at("passage_id").get<std::string>();
        auto mode = parse_analysis_mode(d.at("condition").get<std::string>());
        if (!mode) throw SchemaViolation("bad condition");
        desc.condition = *mode;
        desc.policy = d.at("policy").get<std::string>();
        desc.participant_id = d.value("participant_id", "");
        desc.created_at = d.at("created_at").get<std::string>();
        desc.idempotency_key = events[0].value("idempotency_key", "");
        const auto* p = passage(desc.passage_id);
        if (!p) throw SchemaViolation("unknown passage '" + desc.passage_id + "'");
        auto policy = parse_trigger_policy(desc.policy);
        e = build_entry(std::move(desc), policy, *p, events[0].value("created_unix_ms", std::int64_t{0}));
    } catch (const std::exception& ex) {
        throw SchemaViolation(dir.string() + ": bad create event: " + ex.what());
    }
    e->dir = dir;
    e->restoring = true;
    {
        std::unique_lock lock(mu_);
        sessions_[e->desc.session_id] = e;
        if (!e->desc.idempotency_key.empty()) idempotency_[e->desc.idempotency_key] = e->desc.session_id;
    }
    e->assistant = std::make_shared<JournaledAssistant>(std::make_shared<ScriptedAssistant>());
    for (const auto& ev : events) {
        auto op = ev.value("op", "");
        if (op == "analysis") e->analysis_playback.push_back(analysis_from_json(ev["analysis"].dump()));
        if (op == "reply") e->assistant->playback_.push_back(ev["text"].get<std::string>());
    }
    auto fail = [&](const ServiceResponse& r) {
        if (r.status >= 300) throw SchemaViolation(dir.string() + ": journal replay failed: " + r.body);
    };
    for (std::size_t i = 1; i < events.size(); ++i) {
        const auto& ev = events[i];
        auto op = ev.value("op", "");
        const auto& id = e->desc.session_id;
        if (op == "layout") fail(put_layout(id, ojson{{"layout", ev["layout"]}}.dump()));
        else if (op == "gaze") fail(post_gaze(id, ojson{{"samples", ev["samples"]}}.dump()));
        else if (op == "finish") fail(finish(id));
        else if (op == "chat") fail(chat(id, ojson{{"text", ev["text"]}, {"t_ms", ev["t_ms"]}}.dump()));
        else if (op == "rating") {
            std::lock_guard g(e->mu);
            e->ratings.push_back(ev["rating"].dump());
        }
    }
    std::lock_guard g(e->mu);
    e->restoring = false;
    if (!e->analysis_playback.empty() || !e->assistant->playback_.empty())
        throw SchemaViolation(dir.string() + ": journal holds unused analyses or replies");
}

void mount_routes(httplib::Server& server, ServiceCore& core) {
    const auto origin = core.options().cors_origin;
    const auto token = core.options().token;

    server.set_pre_routing_handler([origin, token](const httplib::Request& req, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization, Idempotency-Key");
        if (req.method == "OPTIONS") {
            res.status = 204;
            return httplib::Server::HandlerResponse::Handled;
        }
        if (!token.empty() && req.path.starts_with("/v1/") && req.get_header_value("Authorization") != "Bearer " + token) {
            res.status = 401;
            res.set_content(R"({"error":"missing or wrong bearer token","status":401})", "application/json");
            return httplib::Server::HandlerResponse::Handled;
        }
        return httplib::Server::HandlerResponse::Unhandled;
    });

    auto send = [](httplib::Response& res, const ServiceResponse& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    auto wrap = [send](auto fn) {
        return [send, fn](const httplib::Request& req, httplib::Response& res) {
            try {
                send(res, fn(req));
            } catch (const ValidationError& e) {
                send(res, error(422, e.what()));
            } catch (const std::exception& e) {
                send(res, error(500, e.what()));
            }
        };
    };
    auto id = [](const httplib::Request& r) { return r.matches[1].str(); };

    server.Get("/v1/health", wrap([](const httplib::Request&) { return json_response(200, {{"ok", true}}); }));
    server.Get("/v1/passages", wrap([&core](const httplib::Request&) { return core.list_passages(); }));
    server.Get(R"(/v1/passages/([^/]+))", wrap([&core, id](const httplib::Request& r) { return core.get_passage(id(r)); }));
    server.Post("/v1/sessions", wrap([&core](const httplib::Request& r) {
                    return core.create_session(r.body, r.get_header_value("Idempotency-Key"));
                }));
    server.Get("/v1/sessions", wrap([&core](const httplib::Request&) { return core.list_sessions(); }));
    server.Get(R"(/v1/sessions/([^/]+))", wrap([&core, id](const httplib::Request& r) { return core.get_session(id(r)); }));
    server.Put(R"(/v1/sessions/([^/]+)/layout)",
               wrap([&core, id](const httplib::Request& r) { return core.put_layout(id(r), r.body); }));
    server.Get(R"(/v1/sessions/([^/]+)/layout)",
               wrap([&core, id](const httplib::Request& r) { return core.get_layout(id(r)); }));
    server.Post(R"(/v1/sessions/([^/]+)/gaze)",
                wrap([&core, id](const httplib::Request& r) { return core.post_gaze(id(r), r.body); }));
    server.Post(R"(/v1/sessions/([^/]+)/finish)",
                wrap([&core, id](const httplib::Request& r) { return core.finish(id(r)); }));
    server.Post(R"(/v1/sessions/([^/]+)/chat)",
                wrap([&core, id](const httplib::Request& r) { return core.chat(id(r), r.body); }));
    server.Get(R"(/v1/sessions/([^/]+)/transcript)",
               wrap([&core, id](const httplib::Request& r) { return core.transcript(id(r)); }));
    server.Get(R"(/v1/sessions/([^/]+)/analysis)", wrap([&core, id](const httplib::Request& r) {
                   return core.analysis(id(r), r.get_param_value("mode"));
               }));
    server.Post(R"(/v1/sessions/([^/]+)/ratings)",
                wrap([&core, id](const httplib::Request& r) { return core.post_rating(id(r), r.body); }));
    server.Get(R"(/v1/sessions/([^/]+)/ratings)",
               wrap([&core, id](const httplib::Request& r) { return core.ratings(id(r)); }));

    if (!core.options().ui_dir.empty()) {
        if (!server.set_mount_point("/", core.options().ui_dir.string()))
            throw ValidationError("ui directory not found: " + core.options().ui_dir.string());
    }
}

int serve(ServiceCore& core, const std::string& host, int port) {
    httplib::Server server;
    mount_routes(server, core);
    if (!server.listen(host, port)) return 1;
    return 0;
}

} // namespace gazeguide
