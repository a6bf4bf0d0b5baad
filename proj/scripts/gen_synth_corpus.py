#!/usr/bin/env python3
"""Deterministic synthetic chunking corpora.

Emits three-column "token POS IOB-tag" sentences over a small grammar:

    NP  ->  NOUN | DET NOUN | DET ADJ NOUN | today/tomorrow
    VP  ->  VERB | AUX VERB
    PP  ->  PREP            (the following NP is its own chunk)
    ADVP -> ADV | very ADV

Ambiguity is built in on purpose: some surface forms serve as both noun and
verb (watch, park, play, light) or as both adjective and adverb (fast, hard),
and bare temporal NPs follow object NPs so adjacent B-NP B-NP boundaries
occur.  Per-token taggers have to resolve these from context; chunk-level
models can use span structure.

The companion corpora under data/ were produced with:

    python3 scripts/gen_synth_corpus.py --sentences 20  --seed 7  --out data/toy20.txt
    python3 scripts/gen_synth_corpus.py --sentences 300 --seed 11 --out data/synth300.txt
"""

import argparse
import random

DET = ["the", "a", "this", "that"]
ADJ = ["red", "big", "old", "small", "young", "fast", "hard"]
NOUN = ["cat", "dog", "bird", "house", "tree", "car", "man", "woman",
        "watch", "park", "play", "light"]
VERB = ["sees", "likes", "finds", "takes", "makes",
        "watch", "park", "play", "light"]
AUX = ["can", "will", "may"]
ADV = ["quickly", "slowly", "often", "fast", "hard"]
PREP = ["in", "on", "near"]
CONJ = ["and", "but"]
TEMPORAL = ["today", "tomorrow"]


def np_chunk(rng):
    r = rng.random()
    if r < 0.22:
        return [(rng.choice(NOUN), "N")]
    if r < 0.62:
        return [(rng.choice(DET), "D"), (rng.choice(NOUN), "N")]
    return [(rng.choice(DET), "D"), (rng.choice(ADJ), "J"),
            (rng.choice(NOUN), "N")]


def vp_chunk(rng):
    if rng.random() < 0.35:
        return [(rng.choice(AUX), "A"), (rng.choice(VERB), "V")]
    return [(rng.choice(VERB), "V")]


def advp_chunk(rng):
    if rng.random() < 0.3:
        return [("very", "R"), (rng.choice(ADV), "R")]
    return [(rng.choice(ADV), "R")]


def sentence(rng):
    """Returns a list of (label-or-None, [(token, pos), ...]) chunks."""
    chunks = [("NP", np_chunk(rng)), ("VP", vp_chunk(rng)),
              ("NP", np_chunk(rng))]
    if rng.random() < 0.3:  # adjacent NP boundary: "... the dog today"
        chunks.append(("NP", [(rng.choice(TEMPORAL), "N")]))
    if rng.random() < 0.5:
        chunks.append(("PP", [(rng.choice(PREP), "P")]))
        chunks.append(("NP", np_chunk(rng)))
    if rng.random() < 0.35:
        chunks.append(("ADVP", advp_chunk(rng)))
    if rng.random() < 0.25:
        chunks.append((None, [(rng.choice(CONJ), "C")]))
        chunks.append(("NP", np_chunk(rng)))
        chunks.append(("VP", vp_chunk(rng)))
    chunks.append((None, [(".", ".")]))
    return chunks


def render(chunks):
    lines = []
    for label, tokens in chunks:
        for i, (tok, pos) in enumerate(tokens):
            if label is None:
                tag = "O"
            else:
                tag = ("B-" if i == 0 else "I-") + label
            lines.append(f"{tok} {pos} {tag}")
    return "\n".join(lines)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sentences", type=int, required=True)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--out", required=True)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    blocks = [render(sentence(rng)) for _ in range(args.sentences)]
    with open(args.out, "w") as f:
        f.write("\n\n".join(blocks) + "\n")
    print(f"wrote {args.sentences} sentences to {args.out}")


if __name__ == "__main__":
    main()
