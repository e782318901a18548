#pragma once

// Random reader scripts with non-overlapping injections.

#include "gazeguide/errors.hpp"
#include "gazeguide/sim.hpp"
#include "gazeguide/text.hpp"

#include <random>
#include <set>

namespace oracle {

inline gazeguide::ReaderScript random_script(std::uint64_t seed, const gazeguide::PassageModel& p) {
    using namespace gazeguide;
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    std::vector<std::size_t> content;
    for (const auto& s : p.sentences())
        if (s.content) content.push_back(s.sentence_index);

    ReaderScript sc;
    sc.passage_id = p.passage_id();
    sc.seed = seed;
    sc.base_wpm = 120.0 + static_cast<double>(pick(281));

    std::set<std::size_t> skipped;
    if (content.size() > 2 && pick(2)) {
        auto s = content[pick(content.size())];
        skipped.insert(s);
        InjectedEvent ev;
        ev.kind = InjectionKind::Skip;
        ev.target = s;
        sc.injected_events.push_back(ev);
    }
    std::vector<std::size_t> read;
    for (auto s : content)
        if (!skipped.count(s)) read.push_back(s);

    std::set<std::string> fixated;
    for (std::size_t k = pick(4); k > 0; --k) {
        auto s = read[pick(read.size())];
        const auto& sent = p.sentence(s);
        auto w = sent.first_word + pick(sent.word_count);
        auto key = text::normalize_surface(p.word(w).surface);
        if (!text::is_content_word(key) || !fixated.insert(key).second) continue;
        InjectedEvent ev;
        ev.kind = InjectionKind::Fixate;
        ev.target = p.word(w).surface;
        ev.magnitude = 2 + static_cast<std::int64_t>(pick(4));
        sc.injected_events.push_back(ev);
    }

    std::set<std::size_t> regress_targets;
    for (std::size_t k = pick(3); k > 0 && read.size() > 1; --k) {
        auto i = 1 + pick(read.size() - 1);
        auto to = read[pick(i)];
        if (!regress_targets.insert(to).second) continue;
        InjectedEvent ev;
        ev.kind = InjectionKind::Regress;
        ev.target = to;
        ev.after_sentence = read[i];
        ev.magnitude = 1 + static_cast<std::int64_t>(pick(2));
        sc.injected_events.push_back(ev);
    }

    std::set<std::size_t> pause_after;
    for (std::size_t k = pick(3); k > 0; --k) {
        auto s = read[pick(read.size())];
        if (!pause_after.insert(s).second) continue;
        InjectedEvent ev;
        ev.kind = InjectionKind::Offtext;
        ev.target = s;
        ev.magnitude = 500 * (2 + static_cast<std::int64_t>(pick(5)));
        if (pick(2)) ev.label = "monitor bezel";
        sc.injected_events.push_back(ev);
    }
    return sc;
}

/// First script from `seed` upward that the generator accepts.
inline std::pair<gazeguide::ReaderScript, gazeguide::SynthesizedTrace>
valid_random_script(std::uint64_t seed, const gazeguide::PassageModel& p, const gazeguide::LayoutMap& l) {
    for (std::uint64_t s = seed;; s += 7919) {
        auto sc = random_script(s, p);
        try {
            auto tr = gazeguide::synthesize_trace(sc, p, l);
            return {sc, tr};
        } catch (const gazeguide::ScriptInvalid&) {
        }
    }
}

} // namespace oracle
