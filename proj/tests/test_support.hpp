#pragma once

#include "gazeguide/passage.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testing {

inline std::filesystem::path data_dir() { return GAZEGUIDE_DATA_DIR; }

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline gazeguide::PassageModel bundled(const std::string& id) {
    return gazeguide::load_passage_file(data_dir() / "passages" / (id + ".txt"));
}

} // namespace testing

#include "gazeguide/behavior.hpp"
#include "gazeguide/gaze.hpp"
#include "gazeguide/sim.hpp"

namespace testing {

struct B2 {
    gazeguide::PassageModel passage;
    gazeguide::LayoutMap layout;
    std::vector<gazeguide::GazeSample> trace;
    std::vector<gazeguide::GazeObservation> obs;
    gazeguide::BehaviorReport report;
};

inline B2 b2_scenario() {
    B2 b{bundled("superdeterminism"), {}, {}, {}, {}};
    b.layout = gazeguide::make_default_layout(b.passage);
    auto sched = gazeguide::parse_schedule(slurp(data_dir() / "fixtures" / "superdeterminism.schedule"));
    b.trace = gazeguide::realize_schedule(sched, b.passage, b.layout);
    gazeguide::ActionList list;
    for (const auto& s : b.trace) gazeguide::append_sample(list, s, b.layout, b.passage);
    b.obs = list.observations();
    b.report = gazeguide::analyze_behavior(b.obs, b.passage);
    return b;
}

} // namespace testing

#include "gazeguide/judge.hpp"
#include "gazeguide/session.hpp"

namespace testing {

struct WordStudy {
    std::vector<gazeguide::SessionTranscript> transcripts;
    std::vector<gazeguide::SessionScores> scores;
    gazeguide::PairingMap pairing;
};

// Rebuilds transcripts from per-turn user word counts, then scores them.
inline WordStudy word_study() {
    using namespace gazeguide;
    static const char* filler[] = {"could", "you", "go", "over", "the", "second", "part", "again"};
    WordStudy w;
    std::istringstream in(slurp(data_dir() / "corpus" / "word_study.csv"));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
        SessionTranscript t;
        t.analysis_mode = *parse_analysis_mode(cols[2]);
        std::int64_t now = 0;
        t.turns.push_back({Speaker::Assistant, "It seems a part might have been tricky?", now, SessionState::Opening,
                           "", false});
        std::stringstream parts(cols[3]);
        for (std::string n; std::getline(parts, n, ';');) {
            std::string text;
            for (int i = 0; i < std::stoi(n); ++i) text += std::string(i ? " " : "") + filler[i % 8];
            t.turns.push_back({Speaker::User, text, now += 1000, SessionState::Monitoring, "", false});
            t.turns.push_back({Speaker::Assistant, "Sure.", now += 1000, SessionState::Monitoring, "", false});
        }
        auto metrics = conversation_metrics(t);
        w.scores.push_back(score_session(cols[1], cols[0], t.analysis_mode, {}, metrics));
        w.transcripts.push_back(std::move(t));
    }
    w.pairing = parse_pairing_csv(slurp(data_dir() / "corpus" / "word_study_pairs.csv"));
    return w;
}

} // namespace testing
