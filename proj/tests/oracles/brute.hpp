#pragma once

// Brute-force reference detectors. Deliberately quadratic and written without
// the production helpers' data structures so the two can disagree.

#include "gazeguide/behavior.hpp"
#include "gazeguide/text.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using namespace gazeguide;

inline std::optional<std::size_t> word_of(const GazeObservation& o, const PassageModel& p) {
    if (o.kind != ObservationKind::Word) return std::nullopt;
    return resolve_observation(o, p);
}

struct FixationSummary {
    std::string key;
    int looks = 0;
    std::vector<std::int64_t> times;
    bool operator==(const FixationSummary&) const = default;
};

inline std::vector<FixationSummary> fixations(const std::vector<GazeObservation>& obs,
                                              const DetectorParams& params) {
    std::vector<std::string> keys;
    for (const auto& o : obs) {
        if (o.kind != ObservationKind::Word) continue;
        auto k = text::normalize_surface(o.content);
        if (k.empty() || (params.ignore_function_words && text::is_function_word(k))) continue;
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    std::vector<FixationSummary> out;
    for (const auto& k : keys) {
        FixationSummary f{k, 0, {}};
        for (const auto& o : obs)
            if (o.kind == ObservationKind::Word && text::normalize_surface(o.content) == k) {
                ++f.looks;
                f.times.push_back(o.t_ms);
            }
        if (f.looks >= params.fixation_min_looks) out.push_back(f);
    }
    // bubble sort: most looks first, then earliest first look, then key
    for (std::size_t i = 0; i < out.size(); ++i)
        for (std::size_t j = 0; j + 1 < out.size() - i; ++j) {
            auto& a = out[j];
            auto& b = out[j + 1];
            bool swap = a.looks < b.looks ||
                        (a.looks == b.looks && (a.times[0] > b.times[0] ||
                                                (a.times[0] == b.times[0] && a.key > b.key)));
            if (swap) std::swap(a, b);
        }
    return out;
}

inline std::vector<RegressionEvent> regressions(const std::vector<GazeObservation>& obs,
                                                const PassageModel& p, const DetectorParams& params) {
    std::vector<RegressionEvent> out;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        auto w = word_of(obs[i], p);
        if (!w) continue;
        auto s = p.word(*w).sentence_index;
        if (!p.sentence(s).content) continue;
        // farthest content sentence reached strictly before i
        std::optional<std::size_t> far;
        for (std::size_t j = 0; j < i; ++j) {
            auto wj = word_of(obs[j], p);
            if (!wj) continue;
            auto sj = p.word(*wj).sentence_index;
            if (!p.sentence(sj).content) continue;
            if (!far || sj > *far) far = sj;
        }
        if (!far || s >= *far) continue;
        // only the latest event into s matters for the window
        std::optional<std::int64_t> last;
        for (const auto& e : out)
            if (e.to_sentence == s) last = e.at_ms;
        bool recent = last && obs[i].t_ms - *last < params.regression_dedupe_window_ms;
        if (!recent) out.push_back({obs[i].t_ms, *far, s});
    }
    return out;
}

inline std::vector<OffTextEvent> offtext(const std::vector<GazeObservation>& obs,
                                         const DetectorParams& params) {
    std::vector<OffTextEvent> out;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i].kind == ObservationKind::Word) continue;
        if (i > 0 && obs[i - 1].kind != ObservationKind::Word) continue;
        std::size_t len = 0;
        while (i + len < obs.size() && obs[i + len].kind != ObservationKind::Word) ++len;
        if (static_cast<int>(len) < params.offtext_min_run) continue;
        OffTextEvent e;
        e.start_ms = obs[i].t_ms;
        e.end_ms = obs[i + len - 1].t_ms;
        e.duration_ms = e.end_ms - e.start_ms + params.sample_period_ms;
        int best = 0;
        for (std::size_t a = i; a < i + len; ++a) {
            if (obs[a].kind != ObservationKind::Object) continue;
            int n = 0;
            bool earlier = false;
            for (std::size_t b = i; b < i + len; ++b) {
                if (obs[b].kind == ObservationKind::Object && obs[b].content == obs[a].content) {
                    ++n;
                    if (b < a) earlier = true;
                }
            }
            if (!earlier && n > best) {
                best = n;
                e.attended_label = obs[a].content;
            }
        }
        out.push_back(e);
    }
    return out;
}

inline std::vector<std::size_t> skips(const std::vector<GazeObservation>& obs, const PassageModel& p) {
    std::vector<std::size_t> out;
    for (std::size_t s = 0; s < p.sentence_count(); ++s) {
        if (!p.sentence(s).content) continue;
        bool seen = false;
        for (const auto& o : obs) {
            auto w = word_of(o, p);
            if (w && p.word(*w).sentence_index == s) seen = true;
        }
        if (!seen) out.push_back(s);
    }
    return out;
}

// Grounding: every box containing the point, pick lexicographic min (distance², index).
inline GazeObservation ground(const GazeSample& s, const LayoutMap& layout, const PassageModel& p) {
    std::vector<std::pair<double, std::size_t>> hits;
    for (std::size_t i = 0; i < layout.word_boxes.size(); ++i) {
        const auto& b = layout.word_boxes[i];
        if (s.x >= b.x0 && s.x <= b.x1 && s.y >= b.y0 && s.y <= b.y1) {
            double dx = s.x - (b.x0 + b.x1) / 2, dy = s.y - (b.y0 + b.y1) / 2;
            hits.emplace_back(dx * dx + dy * dy, i);
        }
    }
    GazeObservation o;
    o.t_ms = s.t_ms;
    if (!hits.empty()) {
        auto best = *std::min_element(hits.begin(), hits.end());
        const auto& w = p.word(best.second);
        o.kind = ObservationKind::Word;
        o.content = w.surface;
        o.context = sentence_context(p.sentence(w.sentence_index));
        o.word_index = best.second;
        return o;
    }
    for (const auto& r : layout.object_regions) {
        const auto& b = r.box;
        if (s.x >= b.x0 && s.x <= b.x1 && s.y >= b.y0 && s.y <= b.y1) {
            o.kind = ObservationKind::Object;
            o.content = r.label;
            o.context = r.description;
            return o;
        }
    }
    return o;
}

} // namespace oracle
