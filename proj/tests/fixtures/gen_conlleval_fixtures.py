#!/usr/bin/env python3
"""Generates frozen scoring fixtures for the chunk-F1 parity tests.

This is an independent reference implementation of the classic CoNLL
chunk-evaluation walk (the startOfChunk/endOfChunk state machine over
gold/predicted tag columns).  The C++ scorer takes a different route --
tag repair followed by span extraction and exact span matching -- so
agreement on these cases is evidence of equivalence, not shared code.

Run from the repository root:
    python3 tests/fixtures/gen_conlleval_fixtures.py > tests/fixtures/conlleval_cases.txt
"""

import random


def split_tag(tag):
    if "-" in tag:
        head, typ = tag.split("-", 1)
    else:
        head, typ = tag, ""
    return head, typ


def start_of_chunk(prev_tag, tag, prev_type, typ):
    if prev_tag == "B" and tag == "B":
        return True
    if prev_tag == "I" and tag == "B":
        return True
    if prev_tag == "O" and tag == "B":
        return True
    if prev_tag == "O" and tag == "I":
        return True
    if tag != "O" and tag != "." and prev_type != typ:
        return True
    return False


def end_of_chunk(prev_tag, tag, prev_type, typ):
    if prev_tag == "B" and tag == "B":
        return True
    if prev_tag == "B" and tag == "O":
        return True
    if prev_tag == "I" and tag == "B":
        return True
    if prev_tag == "I" and tag == "O":
        return True
    if prev_tag != "O" and prev_tag != "." and prev_type != typ:
        return True
    return False


def evaluate(sentences):
    """sentences: list of list of (gold, pred) tag pairs."""
    correct_chunk = found_correct = found_guessed = 0
    in_correct = False
    last_correct, last_correct_type = "O", ""
    last_guessed, last_guessed_type = "O", ""

    def step(gold, pred):
        nonlocal correct_chunk, found_correct, found_guessed, in_correct
        nonlocal last_correct, last_correct_type, last_guessed, last_guessed_type
        correct_tag, correct_type = split_tag(gold)
        guessed_tag, guessed_type = split_tag(pred)
        end_correct = end_of_chunk(last_correct, correct_tag, last_correct_type, correct_type)
        end_guessed = end_of_chunk(last_guessed, guessed_tag, last_guessed_type, guessed_type)
        start_correct = start_of_chunk(last_correct, correct_tag, last_correct_type, correct_type)
        start_guessed = start_of_chunk(last_guessed, guessed_tag, last_guessed_type, guessed_type)
        if in_correct:
            if end_correct and end_guessed and last_guessed_type == last_correct_type:
                in_correct = False
                correct_chunk += 1
            elif end_correct != end_guessed or guessed_type != correct_type:
                in_correct = False
        if start_correct and start_guessed and guessed_type == correct_type:
            in_correct = True
        if start_correct:
            found_correct += 1
        if start_guessed:
            found_guessed += 1
        last_correct, last_correct_type = correct_tag, correct_type
        last_guessed, last_guessed_type = guessed_tag, guessed_type

    for sentence in sentences:
        for gold, pred in sentence:
            step(gold, pred)
        step("O", "O")  # sentence boundary flushes any open chunk
    if in_correct:
        correct_chunk += 1

    precision = 100.0 * correct_chunk / found_guessed if found_guessed > 0 else 0.0
    recall = 100.0 * correct_chunk / found_correct if found_correct > 0 else 0.0
    fb1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, fb1, found_correct, found_guessed, correct_chunk


def random_tag_stream(rng, length, labels, malformed_rate):
    tags = []
    for _ in range(length):
        r = rng.random()
        if r < 0.35:
            tags.append("O")
        else:
            label = rng.choice(labels)
            if rng.random() < malformed_rate:
                tags.append(rng.choice(["B-", "I-"]) + label)
            else:
                # Mostly well-formed: continue the previous chunk or open one.
                if tags and tags[-1] != "O" and tags[-1][2:] == label and rng.random() < 0.5:
                    tags.append("I-" + label)
                else:
                    tags.append("B-" + label)
    return tags


def mutate(rng, tags, labels):
    """Derive a prediction from gold with realistic error modes."""
    pred = list(tags)
    for i in range(len(pred)):
        r = rng.random()
        if r < 0.10:
            pred[i] = "O"
        elif r < 0.18:
            pred[i] = rng.choice(["B-", "I-"]) + rng.choice(labels)
        elif r < 0.24 and pred[i] != "O":
            head, typ = split_tag(pred[i])
            pred[i] = ("I-" if head == "B" else "B-") + typ
    return pred


def hand_cases():
    cases = []
    # Self-evaluation of the running example sentence: three phrases, F1 100.
    fig = ["O", "B-NP", "B-VP", "I-VP", "B-ADJP", "I-ADJP"]
    cases.append([list(zip(fig, fig))])
    # One boundary error out of two chunks.
    cases.append([[("B-NP", "B-NP"), ("I-NP", "I-NP"), ("B-VP", "B-VP"), ("O", "I-VP")]])
    # All-O prediction against real chunks.
    cases.append([[("B-NP", "O"), ("I-NP", "O"), ("B-VP", "O")]])
    # Prediction invents chunks on an all-O gold.
    cases.append([[("O", "B-NP"), ("O", "I-NP"), ("O", "O")]])
    # Unrepaired input on both sides: I after O opens a chunk.
    cases.append([[("O", "O"), ("I-NP", "I-NP"), ("I-NP", "B-NP")]])
    # Label confusion with exact boundaries.
    cases.append([[("B-NP", "B-VP"), ("I-NP", "I-VP"), ("O", "O")]])
    # Adjacent chunks of the same label: B B vs one long chunk.
    cases.append([[("B-NP", "B-NP"), ("B-NP", "I-NP"), ("B-NP", "B-NP")]])
    # Chunk running to the sentence end on both sides.
    cases.append([[("O", "O"), ("B-PP", "B-PP"), ("I-PP", "I-PP")]])
    # Single-token sentences.
    cases.append([[("B-NP", "B-NP")], [("O", "O")], [("I-VP", "B-VP")]])
    # Empty prediction overlap at sentence boundaries across sentences.
    cases.append([[("B-NP", "B-NP"), ("I-NP", "I-NP")],
                  [("I-NP", "I-NP"), ("O", "B-NP")]])
    return cases


def main():
    rng = random.Random(20260814)
    label_pools = [["NP"], ["NP", "VP"], ["NP", "VP", "PP"],
                   ["NP", "VP", "PP", "ADJP"], ["loc", "time.period", "air_code"]]
    cases = hand_cases()
    while len(cases) < 99:
        labels = rng.choice(label_pools)
        n_sent = 1 + rng.randrange(6)
        malformed = rng.choice([0.0, 0.0, 0.1, 0.4])
        case = []
        for _ in range(n_sent):
            length = 1 + rng.randrange(14)
            gold = random_tag_stream(rng, length, labels, malformed)
            style = rng.random()
            if style < 0.15:
                pred = list(gold)  # perfect
            elif style < 0.25:
                pred = random_tag_stream(rng, length, labels, malformed)  # unrelated
            else:
                pred = mutate(rng, gold, labels)
            case.append(list(zip(gold, pred)))
        cases.append(case)
    # One large realistic case.
    labels = ["NP", "VP", "PP", "ADJP", "ADVP", "SBAR"]
    big = []
    for _ in range(50):
        length = 3 + rng.randrange(20)
        gold = random_tag_stream(rng, length, labels, 0.05)
        big.append(list(zip(gold, mutate(rng, gold, labels))))
    cases.append(big)

    assert len(cases) == 100
    for idx, case in enumerate(cases):
        print(f"# case {idx}")
        for si, sentence in enumerate(case):
            if si > 0:
                print()
            for gold, pred in sentence:
                print(f"{gold} {pred}")
        p, r, f, ng, nf, nc = evaluate(case)
        print(f"== {p:.2f} {r:.2f} {f:.2f} {ng} {nf} {nc}")
        print()


if __name__ == "__main__":
    main()
