#!/usr/bin/env python3
"""Builds data/fixtures/superdeterminism.schedule.

The pinned looks are the golden scenario's timestamps; every other 0.5 s
tick is filled by a reader walking the passage. Filler ticks use function
words freely and each other word at most once, so they never add a fixation.

    python3 tools/fixtures/make_b2_schedule.py > data/fixtures/superdeterminism.schedule
    build/tools/gazeguide realize --passage data/passages/superdeterminism.txt \
        --schedule data/fixtures/superdeterminism.schedule \
        --layout-out data/fixtures/superdeterminism.layout \
        --out data/fixtures/superdeterminism.trace.jsonl
"""

import pathlib
import re
import sys

ROOT = pathlib.Path(__file__).resolve().parents[2]
PASSAGE = ROOT / "data" / "passages" / "superdeterminism.txt"

FUNCTION = {
    "a", "and", "are", "from", "have", "how", "in", "is", "it", "its", "no", "of", "one",
    "so", "such", "than", "that", "the", "this", "to", "when", "could",
}
PUNCT = ".,;:!?'\"()[]"

PERIOD_MS = 500
END_MS = 120_000

# (seconds, surface, sentence); "o:" and "none" targets are written as-is.
PINNED = [
    (10.0, "Superdeterminism", 0),
    (12.0, "theorem", 1),
    (18.0, "variables", 2),
    (24.0, "hidden-variable", 2),
    (27.0, "models", 2),
    (30.0, "models", 2),
    (33.0, "theorem", 3),
    (37.0, "relation", 4),
    (38.0, "determine", 4),
    (42.0, "variables", 5),
    (43.0, "correlated", 5),
    (43.5, "correlated", 5),
    (44.0, "Please", 7),
    (46.0, "o:monitor bezel", None),
    (46.5, "o:monitor bezel", None),
    (47.0, "Superdeterminism", 0),
    (47.5, "Superdeterminism", 0),
    (48.0, "Superdeterminism", 0),
    (48.5, "Superdeterminism", 0),
    (49.0, "theorem", 3),
    (52.0, "theorem", 3),
    (52.5, "correlated", 5),
    (53.0, "theorem", 1),
    (53.5, "theorem", 1),
    (54.0, "correlated", 5),
    (55.0, "Superdeterminism", 0),
    (61.0, "o:monitor bezel", None),
    (61.5, "o:monitor bezel", None),
    (62.0, "theorem", 3),
    (68.0, "correlated", 5),
    (77.0, "theorem", 3),
    (78.0, "hidden", 5),
    (79.0, "hidden", 5),
    (83.0, "models", 6),
    (85.0, "models", 6),
    (92.0, "relation", 4),
    (93.0, "determine", 4),
    (94.0, "variables", 4),
    (95.0, "independence", 4),
]

# Sentence the reader's eyes rest on between pinned looks, by start time.
FILLER = [
    (0.0, 8),     # instruction line first
    (10.5, 1),
    (12.5, 2),
    (30.5, 3),
    (36.0, 4),
    (39.5, 5),
    (44.5, 5),
    (49.5, 5),
    (55.5, 6),
    (79.5, 6),
    (86.0, 4),
    (95.5, 6),
    (105.0, 8),
]


def norm(tok):
    return tok.strip(PUNCT).lower()


def sentences(raw):
    body = raw.split("\n", 2)[2]
    content, _, instr = body.partition("\n---\n")
    out = []
    for block in (content, instr):
        for para in re.split(r"\n\s*\n", block):
            para = para.strip()
            if para:
                out.extend(s for s in re.split(r"(?<=[.!?])\s+", para) if s)
    return [[t.strip(PUNCT) for t in s.split()] for s in out]


def main():
    sents = sentences(PASSAGE.read_text())
    pinned = {round(t * 1000): (surface, s) for t, surface, s in PINNED}
    reserved = {norm(surface) for _, surface, s in PINNED if s is not None}
    used = set()
    cursor = {}

    def filler(s):
        words = sents[s]
        start = cursor.get(s, 0)
        for k in range(len(words)):
            i = (start + k) % len(words)
            key = norm(words[i])
            if key in FUNCTION or (key not in used and key not in reserved):
                cursor[s] = i + 1
                if key not in FUNCTION:
                    used.add(key)
                return words[i], s
        sys.exit(f"sentence {s} ran out of filler words")

    lines = []
    for t in range(0, END_MS, PERIOD_MS):
        if t in pinned:
            surface, s = pinned[t]
        else:
            s = [sent for start, sent in FILLER if round(start * 1000) <= t][-1]
            surface, s = filler(s)
        if s is None:
            target = surface
        else:
            occ = [norm(w) for w in sents[s]].index(norm(surface))
            k = [norm(w) for w in sents[s][:occ + 1]].count(norm(surface)) - 1
            target = f"w:{surface}@{s}" + (f"#{k}" if k else "")
        lines.append(f"{t / 1000:g} {target}")
    print("# 0.5 s sample schedule; regenerate with tools/fixtures/make_b2_schedule.py")
    print("\n".join(lines))


if __name__ == "__main__":
    main()
