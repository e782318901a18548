#include "gazeguide/behavior.hpp"
#include "gazeguide/config.hpp"
#include "gazeguide/errors.hpp"
#include "gazeguide/gaze.hpp"
#include "gazeguide/judge.hpp"
#include "gazeguide/needs.hpp"
#include "gazeguide/passage.hpp"
#include "gazeguide/replay.hpp"
#include "gazeguide/service.hpp"
#include "gazeguide/session.hpp"
#include "gazeguide/sim.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace gazeguide;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& contents) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + p.string());
    out << contents;
}

Config load_settings(const std::string& path) {
    Config c = path.empty() ? Config{} : load_config(path);
    apply_env_overrides(c);
    return c;
}

std::shared_ptr<LlmClient> llm_client(const Config& c) {
    if (c.llm.endpoint.empty()) throw ValidationError("llm backend needs llm.endpoint (config file or GAZEGUIDE_LLM_ENDPOINT)");
    return std::make_shared<HttpLlmClient>(c.llm);
}

LayoutMap layout_for(const std::string& path, const PassageModel& passage) {
    if (path.empty()) return make_default_layout(passage);
    auto l = load_layout_file(path);
    validate_layout(l, passage);
    return l;
}

AnalysisMode parse_condition(const std::string& s) {
    auto m = parse_analysis_mode(s);
    if (!m) throw ValidationError("condition must be gaze or text");
    return *m;
}

BackendKind parse_backend(const std::string& s) {
    auto b = parse_backend_kind(s);
    if (!b) throw ValidationError("backend must be rule or llm");
    return *b;
}

std::string default_passages() { return (fs::path(GAZEGUIDE_DATA_DIR) / "passages").string(); }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gazeguide: gaze-grounded reading assistance engine"};
    app.require_subcommand(1);

    std::string passage_path, script_path, out, layout_path, layout_out, schedule_path, trace_path;
    std::string condition = "gaze", policy = "boundary", backend = "rule", assistant = "rule", user = "affirm";
    std::string session_id = "replay", participant, config_path, corpus_dir = default_passages();
    std::uint64_t seed = 0;
    bool seed_set = false;

    auto* simulate = app.add_subcommand("simulate", "Synthesize a trace and labels from a reader script");
    simulate->add_option("--passage", passage_path, "Passage file")->required();
    simulate->add_option("--script", script_path, "Reader script JSON")->required();
    simulate->add_option("--seed", seed, "Overrides the script seed")->each([&](const std::string&) { seed_set = true; });
    simulate->add_option("--layout", layout_path, "Layout file (default grid when omitted)");
    simulate->add_option("--out", out, "Output directory")->required();

    auto* realize = app.add_subcommand("realize", "Turn a hand-written look schedule into a trace");
    realize->add_option("--passage", passage_path, "Passage file")->required();
    realize->add_option("--schedule", schedule_path, "Schedule file")->required();
    realize->add_option("--layout", layout_path, "Layout file (default grid when omitted)");
    realize->add_option("--layout-out", layout_out, "Write the layout used");
    realize->add_option("--out", out, "Trace output file")->required();

    auto* replay_cmd = app.add_subcommand("replay", "Run one session end to end from a trace");
    replay_cmd->add_option("--trace", trace_path, "Trace JSONL")->required();
    replay_cmd->add_option("--passage", passage_path, "Passage file")->required();
    replay_cmd->add_option("--layout", layout_path, "Layout file (default grid when omitted)");
    replay_cmd->add_option("--condition", condition, "gaze or text")->capture_default_str();
    replay_cmd->add_option("--policy", policy, "boundary, interval:MS, ondemand or event[:RULE]")->capture_default_str();
    replay_cmd->add_option("--backend", backend, "Analysis backend: rule or llm")->capture_default_str();
    replay_cmd->add_option("--assistant", assistant, "Assistant backend: rule or llm")->capture_default_str();
    replay_cmd->add_option("--user", user, "affirm, deny or script:a|b|c")->capture_default_str();
    replay_cmd->add_option("--session-id", session_id)->capture_default_str();
    replay_cmd->add_option("--participant", participant);
    replay_cmd->add_option("--corpus", corpus_dir, "Passages for the rule text-only analysis")->capture_default_str();
    replay_cmd->add_option("--config", config_path, "Config file (key=value or JSON)");
    replay_cmd->add_option("--out", out, "Session record directory")->required();

    std::string pred_path, labels_path;
    auto* score = app.add_subcommand("score", "Score detector output against ground-truth labels");
    score->add_option("--pred", pred_path, "report.json, or an observation log with --passage")->required();
    score->add_option("--labels", labels_path, "labels.json")->required();
    score->add_option("--passage", passage_path, "Passage file, needed for observation logs");

    std::string transcript_path, registry_path, judge_kind = "rule", analysis_path, classifier;
    auto* judge = app.add_subcommand("judge", "Judge a transcript against the classifier registry");
    judge->add_option("--transcript", transcript_path, "Transcript JSONL")->required();
    judge->add_option("--registry", registry_path, "Registry JSON")->required();
    judge->add_option("--judge", judge_kind, "rule or llm")->capture_default_str();
    judge->add_option("--analysis", analysis_path, "Analysis JSON or JSONL (last line used)");
    judge->add_option("--passage", passage_path, "Passage file for the on-topic check");
    judge->add_option("--classifier", classifier, "Only this classifier");
    judge->add_option("--config", config_path, "Config file (key=value or JSON)");

    std::string records_dir, pairs_path;
    auto* compare = app.add_subcommand("compare", "Aggregate paired session records by condition");
    compare->add_option("--records", records_dir, "Directory of session records")->required();
    compare->add_option("--pairs", pairs_path, "participant_id,gaze_session,text_only_session CSV")->required();
    compare->add_option("--registry", registry_path, "Registry JSON")
        ->default_val((fs::path(GAZEGUIDE_DATA_DIR) / "registry" / "judge_registry.json").string());
    compare->add_option("--passages", corpus_dir, "Passage directory")->capture_default_str();
    compare->add_option("--out", out, "Write scores.csv, pair_diffs.csv and summary.json here");

    int port = 8080;
    std::string host = "127.0.0.1", data_dir = "gazeguide-data", ui_dir, token;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--port", port)->capture_default_str();
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--data-dir", data_dir, "Session journal root")->capture_default_str();
    serve_cmd->add_option("--passages", corpus_dir, "Passage directory")->capture_default_str();
    serve_cmd->add_option("--ui-dir", ui_dir, "Static UI assets");
    serve_cmd->add_option("--token", token, "Bearer token (overrides service.token)");
    serve_cmd->add_option("--backend", backend, "Analysis backend: rule or llm")->capture_default_str();
    serve_cmd->add_option("--assistant", assistant, "Assistant backend: rule or llm")->capture_default_str();
    serve_cmd->add_option("--config", config_path, "Config file (key=value or JSON)");

    auto* analyze = app.add_subcommand("analyze", "Print the behavior report and analysis for a trace");
    analyze->add_option("--trace", trace_path, "Trace JSONL")->required();
    analyze->add_option("--passage", passage_path, "Passage file")->required();
    analyze->add_option("--layout", layout_path, "Layout file (default grid when omitted)");
    analyze->add_option("--condition", condition, "gaze or text")->capture_default_str();
    analyze->add_option("--backend", backend, "rule or llm")->capture_default_str();
    analyze->add_option("--corpus", corpus_dir, "Passages for the rule text-only analysis")->capture_default_str();
    analyze->add_option("--config", config_path, "Config file (key=value or JSON)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*simulate) {
            auto passage = load_passage_file(passage_path);
            auto script = load_script_file(script_path);
            if (seed_set) script.seed = seed;
            auto layout = layout_for(layout_path, passage);
            auto synth = synthesize_trace(script, passage, layout);
            fs::create_directories(out);
            spit(fs::path(out) / "trace.jsonl", format_trace(synth.samples));
            spit(fs::path(out) / "labels.json", format_labels(synth.labels));
            spit(fs::path(out) / "layout.txt", format_layout(layout));
            spit(fs::path(out) / "script.json", format_script(script));
            std::cout << synth.samples.size() << " samples, " << synth.labels.size() << " labels -> " << out << "\n";
        } else if (*realize) {
            auto passage = load_passage_file(passage_path);
            auto layout = layout_for(layout_path, passage);
            auto samples = realize_schedule(parse_schedule(slurp(schedule_path)), passage, layout);
            spit(out, format_trace(samples));
            if (!layout_out.empty()) spit(layout_out, format_layout(layout));
            std::cout << samples.size() << " samples -> " << out << "\n";
        } else if (*replay_cmd) {
            auto passage = load_passage_file(passage_path);
            auto layout = layout_for(layout_path, passage);
            auto trace = load_trace_file(trace_path);
            auto corpus = load_passage_dir(corpus_dir);
            ReplayOptions o;
            o.session_id = session_id;
            o.participant_id = participant;
            o.trace_ref = fs::absolute(trace_path).string();
            o.condition = parse_condition(condition);
            o.policy = parse_trigger_policy(policy);
            o.user = parse_user_policy(user);
            ReplayBackends b;
            b.analysis = parse_backend(backend);
            b.assistant = parse_backend(assistant);
            b.corpus = corpus;
            if (b.analysis == BackendKind::Llm || b.assistant == BackendKind::Llm) {
                auto cfg = load_settings(config_path);
                b.llm = llm_client(cfg);
                b.retries = cfg.llm.retries;
            }
            auto rec = replay(trace, passage, layout, o, b);
            write_record(out, rec, trace);
            std::cout << analysis_to_json(rec.analysis(), 2) << "\n"
                      << rec.transcript.turns.size() << " turns, " << rec.elapsed_ms << " ms -> " << out << "\n";
        } else if (*score) {
            BehaviorReport pred;
            if (fs::path(pred_path).extension() == ".jsonl") {
                if (passage_path.empty()) throw ValidationError("--passage is required for an observation log");
                auto passage = load_passage_file(passage_path);
                std::vector<GazeObservation> obs;
                std::istringstream in(slurp(pred_path));
                for (std::string line; std::getline(in, line);)
                    if (!line.empty()) {
                        auto j = nlohmann::json::parse(line);
                        j.erase("word_index");
                        obs.push_back(parse_observation_line(j.dump()));
                    }
                pred = analyze_behavior(obs, passage);
            } else {
                pred = report_from_json(slurp(pred_path));
            }
            auto scores = score_detectors(pred, parse_labels(slurp(labels_path)));
            std::cout << format_scores(scores) << "\n";
        } else if (*judge) {
            auto transcript = transcript_from_jsonl(slurp(transcript_path));
            auto registry = load_registry(registry_path);
            AnalysisResult analysis;
            if (!analysis_path.empty()) {
                auto text = slurp(analysis_path);
                if (fs::path(analysis_path).extension() == ".jsonl") {
                    std::istringstream in(text);
                    std::string line;
                    text.clear();
                    while (std::getline(in, line))
                        if (!line.empty()) text = line;
                }
                analysis = analysis_from_json(text);
            }
            std::optional<PassageModel> passage;
            if (!passage_path.empty()) passage = load_passage_file(passage_path);
            std::shared_ptr<LlmClient> client;
            Config cfg;
            if (judge_kind == "llm") {
                cfg = load_settings(config_path);
                client = llm_client(cfg);
            } else if (judge_kind != "rule") {
                throw ValidationError("judge must be rule or llm");
            }
            RuleJudgeOptions ro;
            if (passage) ro.passage = &*passage;
            for (const auto& spec : registry.classifiers) {
                if (!classifier.empty() && spec.name != classifier) continue;
                JudgeVerdict v = client ? judge_transcript(transcript, analysis, spec, *client,
                                                           cfg.judge_model.empty() ? cfg.llm.model : cfg.judge_model,
                                                           cfg.llm.retries)
                                        : rule_judge(transcript, analysis, spec, ro);
                nlohmann::ordered_json j;
                j["classifier"] = v.classifier_name;
                j["value"] = v.value ? nlohmann::ordered_json(*v.value) : nlohmann::ordered_json(nullptr);
                if (v.nested)
                    j["nested"] = {{"addressed_count", v.nested->addressed_count},
                                   {"total_needs", v.nested->total_needs}};
                j["decidable"] = v.decidable;
                j["judge_model"] = v.judge_model;
                std::cout << j.dump() << "\n";
            }
        } else if (*compare) {
            auto records = read_records(records_dir);
            auto passages = load_passage_dir(corpus_dir);
            auto registry = load_registry(registry_path);
            auto scores = score_records(records, registry, passages);
            auto summary = aggregate_conditions(scores, parse_pairing_csv(slurp(pairs_path)));
            if (!out.empty()) {
                spit(fs::path(out) / "scores.csv", scores_to_csv(scores));
                spit(fs::path(out) / "pair_diffs.csv", pair_diffs_to_csv(summary));
                spit(fs::path(out) / "summary.json", summary_to_json(summary) + "\n");
            }
            std::cout << summary_to_json(summary) << "\n";
        } else if (*serve_cmd) {
            auto cfg = load_settings(config_path);
            ServiceOptions o;
            o.data_dir = data_dir;
            o.passages = load_passage_dir(corpus_dir);
            o.ui_dir = ui_dir;
            o.token = token.empty() ? cfg.service_token : token;
            o.analysis = parse_backend(backend);
            o.assistant = parse_backend(assistant);
            if (o.analysis == BackendKind::Llm || o.assistant == BackendKind::Llm) {
                o.llm = llm_client(cfg);
                o.llm_retries = cfg.llm.retries;
            }
            ServiceCore core(std::move(o));
            std::cerr << "gazeguide serving on http://" << host << ":" << port << " (" << core.session_count()
                      << " sessions restored)\n";
            if (serve(core, host, port) != 0) throw ValidationError("cannot listen on " + host + ":" + std::to_string(port));
        } else if (*analyze) {
            auto passage = load_passage_file(passage_path);
            auto layout = layout_for(layout_path, passage);
            auto trace = load_trace_file(trace_path);
            auto corpus = load_passage_dir(corpus_dir);
            ActionList list("analyze");
            for (const auto& s : trace) append_sample(list, s, layout, passage);
            auto report = analyze_behavior(list.observations(), passage);
            ReplayBackends b;
            b.analysis = parse_backend(backend);
            b.corpus = corpus;
            if (b.analysis == BackendKind::Llm) {
                auto cfg = load_settings(config_path);
                b.llm = llm_client(cfg);
                b.retries = cfg.llm.retries;
            }
            auto t_end = trace.empty() ? 0 : trace.back().t_ms;
            auto a = analyze_condition(parse_condition(condition), list.observations(), report, passage, b, t_end);
            std::cout << a.observations_text << "\n\nIntervention: " << a.intervention << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const BackendError& e) {
        std::cerr << "backend failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
