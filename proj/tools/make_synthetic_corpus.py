#!/usr/bin/env python3
# Copyright 2026 The namasag Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Writes the bundled synthetic sound-waves corpus (data/synthetic_ki.csv).

Responses are assembled from idea fragments whose presence tracks the
rating: 1 = no idea, 2 = only an incorrect mechanism, 3 = a conclusion
without a mechanism, 4 = a conclusion with one mechanism, 5 = a conclusion
with linked mechanisms.
"""

import argparse
import csv
import random

DONT_KNOW = ["I don't know", "idk", "i dont know really", "not sure idk", "no idea"]
OFF_TOPIC = ["the glass is pretty", "we did this in class", "it is a cup", "because science"]
INCORRECT = [
    "the sound bounces off the water",
    "water blocks sound",
    "the water mutes the ringing",
    "sound echoes in the empty glass",
    "sound moves faster in water",
    "sound sinks in water",
    "sound moves more in air",
]
CONCLUSION = [
    "the pitch is different",
    "the pitch is lower in the full glass",
    "pitch higher in the empty glass",
    "the full glass has a lower pitch",
    "the frequency is different",
]
MECHANISM = [
    "water has more mass",
    "the full glass vibrates less",
    "the empty glass vibrates more",
    "water is more dense than air",
    "higher frequency in the empty glass",
    "the mass is different so the vibration is different",
    "lower frequency in water",
]
LINKS = [
    "because more mass makes it vibrate slower",
    "so the vibration is slower and the pitch is lower",
    "which means a lower frequency and lower pitch",
]
FILLER = ["I think", "well", "basically", "when you tap it", "", "", "so"]


def response(rating, rng):
    parts = [rng.choice(FILLER)]
    if rating == 1:
        parts.append(rng.choice(DONT_KNOW if rng.random() < 0.7 else OFF_TOPIC))
    elif rating == 2:
        parts.append(rng.choice(INCORRECT))
        if rng.random() < 0.4:
            parts.append(rng.choice(INCORRECT))
    elif rating == 3:
        parts.append(rng.choice(CONCLUSION))
        if rng.random() < 0.4:
            parts.append(rng.choice(INCORRECT))
    elif rating == 4:
        parts.append(rng.choice(CONCLUSION))
        parts.append("because " + rng.choice(MECHANISM))
    else:
        parts.append(rng.choice(CONCLUSION))
        parts.append("because " + rng.choice(MECHANISM))
        parts.append(rng.choice(LINKS))
    text = " ".join(p for p in parts if p).strip()
    return text[0].upper() + text[1:] + "."


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="data/synthetic_ki.csv")
    ap.add_argument("--per-class", type=int, default=48)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    rows = []
    for rating in range(1, 6):
        for _ in range(args.per_class):
            rows.append((rating, response(rating, rng)))
    rng.shuffle(rows)
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "text", "rating"])
        for i, (rating, text) in enumerate(rows):
            w.writerow([f"s{i + 1:04d}", text, rating])


if __name__ == "__main__":
    main()
