#!/usr/bin/env python3
"""Builds data/corpus/word_study.csv and data/corpus/word_study_pairs.csv.

36 participants, one gaze and one text_only session each. Per-session user
word totals are drawn from a seeded skewed distribution, then nudged until the
condition totals hit the targets exactly (gaze 2062, text_only 2997) with
spreads close to the targets. Each total is split over a number of user turns.

    python3 tools/fixtures/make_word_study.py
"""

import pathlib
import random
import statistics

ROOT = pathlib.Path(__file__).resolve().parents[2]
OUT = ROOT / "data" / "corpus"

N = 36
TARGETS = {"gaze": (2062, 66.57, 7.22), "text_only": (2997, 91.62, 8.39)}


def totals(rng, total, sd):
    best = None
    for _ in range(4000):
        xs = [max(3, int(rng.lognormvariate(3.6, 0.95))) for _ in range(N)]
        scale = total / sum(xs)
        xs = [max(3, round(x * scale)) for x in xs]
        diff = total - sum(xs)
        order = sorted(range(N), key=lambda i: -xs[i])
        k = 0
        while diff != 0:
            i = order[k % N]
            step = 1 if diff > 0 else -1
            if xs[i] + step >= 3:
                xs[i] += step
                diff -= step
            k += 1
        err = abs(statistics.stdev(xs) - sd)
        if best is None or err < best[0]:
            best = (err, xs)
    return best[1]


def split(rng, words, mean_turns):
    turns = max(1, min(words, round(rng.gauss(mean_turns, 2.0))))
    cuts = sorted(rng.sample(range(1, words), turns - 1)) if turns > 1 else []
    bounds = [0] + cuts + [words]
    return [bounds[i + 1] - bounds[i] for i in range(turns)]


def main():
    rng = random.Random(20240611)
    rows = []
    per_condition = {c: totals(rng, t, sd) for c, (t, sd, _) in TARGETS.items()}
    for i in range(N):
        pid = f"p{i + 1:02d}"
        for cond, (_, _, mean_turns) in TARGETS.items():
            parts = split(rng, per_condition[cond][i], mean_turns)
            rows.append(f"{pid},{pid}-{cond},{cond},{';'.join(map(str, parts))}")
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "word_study.csv").write_text(
        "participant_id,session_id,condition,user_turn_words\n" + "\n".join(rows) + "\n")
    pairs = [f"p{i + 1:02d},p{i + 1:02d}-gaze,p{i + 1:02d}-text_only" for i in range(N)]
    (OUT / "word_study_pairs.csv").write_text(
        "participant_id,gaze_session,text_only_session\n" + "\n".join(pairs) + "\n")
    for cond in TARGETS:
        xs = per_condition[cond]
        print(cond, sum(xs), round(sum(xs) / N, 2), round(statistics.stdev(xs), 2))


if __name__ == "__main__":
    main()
