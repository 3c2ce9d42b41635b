#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Writes the bundled synthetic corpus and test fixtures under data/."""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent / "data"

LEXICON = {
    "Anger": ["angry", "furious", "annoyed", "mad", "hate", "rude", "unfair", "yelled"],
    "Disgust": ["disgusting", "gross", "awful", "nasty", "filthy", "sick", "horrible", "rotten"],
    "Fear": ["afraid", "scared", "nervous", "worried", "terrified", "panic", "danger", "anxious"],
    "Happiness": ["happy", "glad", "great", "wonderful", "love", "excited", "lucky", "enjoy", "fun"],
    "Sadness": ["sad", "sorry", "lonely", "miss", "shame", "lost", "cried", "tired", "down"],
    "Surprise": ["surprised", "wow", "amazing", "unexpected", "shocked", "sudden", "really", "excellent", "incredible"],
    "Neutral": ["interview", "about", "weather", "office", "fine", "okay", "plan", "tea", "job"],
}
ADJECTIVES = ["excellent", "nervous", "new", "late", "little", "long", "busy", "quiet", "early", "tired"]

TEMPLATES = {
    "Anger": ["i am so {w} about the {n} .", "that was {w} of them !", "he {w} at me at the {n} ."],
    "Disgust": ["the {n} was {w} .", "that smell is {w} !", "what a {w} {n} ."],
    "Fear": ["i am {w} about the {n} .", "i feel {w} tonight .", "the {n} makes me {w} ."],
    "Happiness": ["i am so {w} today !", "the {n} was {w} .", "we had a {w} time at the {n} ."],
    "Sadness": ["i feel {w} since the {n} .", "i {w} my old {n} .", "they turned me down at the {n} ."],
    "Surprise": ["{w} , i did not expect the {n} !", "that is {w} news about the {n} .", "{w} ? you got the {n} ?"],
    "Neutral": ["how about the {n} ?", "the {n} starts at nine .", "let us talk about the {n} ."],
}
NOUNS = ["party", "meeting", "trip", "exam", "game", "dinner", "concert", "office", "park", "class"]


def turn(rng, label):
    t = rng.choice(TEMPLATES[label])
    return {"text": t.format(w=rng.choice(LEXICON[label]), n=rng.choice(NOUNS)), "label": label}


def synthetic(n, seed, min_turns=3, max_turns=6):
    rng = random.Random(seed)
    labels = list(LEXICON)
    out = []
    for i in range(n):
        k = rng.randint(min_turns, max_turns)
        first = labels[i % len(labels)]
        turns = [turn(rng, first)] + [turn(rng, rng.choice(labels)) for _ in range(k - 1)]
        out.append({"turns": turns})
    return out


def write_jsonl(path, dialogues):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(d, ensure_ascii=False) + "\n" for d in dialogues))


def main():
    lexicon = sorted({w for ws in LEXICON.values() for w in ws})
    assert len(lexicon) == 60, len(lexicon)
    syn = ROOT / "synthetic"
    syn.mkdir(parents=True, exist_ok=True)
    (syn / "lexicon.txt").write_text("# emotion lexicon, one word per line\n" + "\n".join(lexicon) + "\n")
    (syn / "adjectives.txt").write_text("# adjectives\n" + "\n".join(ADJECTIVES) + "\n")
    write_jsonl(syn / "corpus.jsonl", synthetic(40, 11))

    fx = ROOT / "fixtures"
    write_jsonl(fx / "dialogues12.jsonl", synthetic(12, 12))

    # Eight 3-turn dialogues with distinct openings: one example each.
    rng = random.Random(8)
    labels = list(LEXICON)
    overfit = []
    for i, noun in enumerate(NOUNS[:8]):
        a, c = labels[i % 7], labels[(i + 5) % 7]
        overfit.append({"turns": [
            {"text": f"tell me about the {noun} .", "label": "Neutral"},
            {"text": TEMPLATES[a][i % 3].format(w=LEXICON[a][i % len(LEXICON[a])], n=noun), "label": a},
            turn(rng, c),
        ]})
    write_jsonl(fx / "overfit8.jsonl", overfit)

    table3 = {"turns": [
        {"text": "How about your interview ?", "label": "Neutral"},
        {"text": "They turned me down .", "label": "Sadness"},
        {"text": "Why ? You are so excellent .", "label": "Surprise"},
        {"text": "I think the only reason is that I was too nervous during the interview and I couldn't "
                 "express myself the way I wanted to .", "label": "Sadness"},
        {"text": "What a shame ! You should have showed yourself to them !", "label": "Sadness"},
        {"text": "I suggest you hunt for a job on the Internet .", "label": "Neutral"},
    ]}
    write_jsonl(fx / "table3_example1.jsonl", [table3])
    words = ["about", "interview", "turned", "down", "so", "excellent", "only", "reason", "too", "nervous",
             "express", "shame"]
    (fx / "table3_lexicon.txt").write_text("\n".join(words) + "\n")


if __name__ == "__main__":
    main()
