#!/usr/bin/env python3
"""Writes metadata.tsv: 1000 lines, 988 valid records, 12 malformed.

Two heavy uploaders tag hundreds of photos "square" and "square format"
while everyday tags are spread thinly over many users, so photo-count
and user-count rankings disagree.
"""
import random
import sys
from pathlib import Path
from urllib.parse import quote_plus

SEED = 20160811
LINES = 1000

COMMON = ["sunset", "beach", "water", "sky", "nature", "clouds", "dog",
          "cat", "flower", "tree", "snow", "bridge", "night", "portrait",
          "street", "car", "bird", "food", "park", "family"]
LOCATIONS = ["london", "paris", "california", "new york"]
NUMBERS = ["2014", "2013", "2015", "365"]
NONENGLISH = ["chien", "playa", "agua"]
SENSITIVE = ["nude"]
APP = ["square", "square format", "iphoneography", "instagram app"]
APP_USERS = ["u901", "u902"]
WORDS = ["a", "the", "at", "on", "walk", "day", "view", "evening",
         "morning", "old", "little", "my", "with"]


def photo_line(rng, pid, user, tags):
    subject = [t for t in tags if " " not in t][:2]
    title = " ".join(rng.sample(WORDS, 2) + subject)
    desc = " ".join(rng.sample(WORDS, 3) + subject[:1]) if rng.random() < .6 else ""
    enc_tags = ",".join(quote_plus(t.upper() if rng.random() < .1 else t)
                        for t in tags)
    return "\t".join([pid, user, quote_plus(title), quote_plus(desc), enc_tags])


def main(out):
    rng = random.Random(SEED)
    users = ["u%03d" % i for i in range(1, 61)]
    weights = [1.0 / (1 + i) ** 0.6 for i in range(len(COMMON))]
    lines = []
    valid = 0
    while valid < LINES - 12:
        pid = "p%05d" % valid
        if valid % 10 < 3:
            user = APP_USERS[valid % 2]
            tags = APP[:2 + rng.randrange(3)] + rng.sample(COMMON[10:], 1)
        else:
            user = rng.choice(users)
            n = 1 + rng.randrange(4)
            tags = []
            while len(tags) < n:
                t = rng.choices(COMMON, weights)[0]
                if t not in tags:
                    tags.append(t)
            extra = rng.random()
            if extra < .08:
                tags.append(rng.choice(LOCATIONS))
            elif extra < .14:
                tags.append(rng.choice(NUMBERS))
            elif extra < .18:
                tags.append(rng.choice(NONENGLISH))
            elif extra < .19:
                tags.append(rng.choice(SENSITIVE))
        lines.append(photo_line(rng, pid, user, tags))
        valid += 1
    bad = [
        "p90001\tu001\tmissing\ttags",
        "p90002\tu002\tno description",
        "p90003\tu003",
        "p90004",
        "\tu004\ttitle\tdesc\tsunset",
        "\tu005\ttitle\tdesc\tbeach",
        "\tu006\ttitle\tdesc\twater",
        "p90008\tu007\tbad%zzescape\tdesc\tsunset",
        "p90009\tu008\ttitle\tdesc%2\tbeach",
        "p90010\tu009\ttitle\tdesc\tsky,%G1",
        lines[5].replace("\tu", "\tu9", 1),
        lines[17],
    ]
    # Spread malformed lines through the file at fixed positions.
    for i, b in enumerate(bad):
        lines.insert(40 + 80 * i, b)
    assert len(lines) == LINES
    Path(out).write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else
         Path(__file__).with_name("metadata.tsv"))
