"""Regenerate the bundled synthetic name pools in src/retmem/data/.

Names are built from syllables with a fixed seed, so the files are reproducible.
Run once; the outputs are committed.
"""

import random
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "retmem" / "data"

SEED_FIRST = ["Dominick", "Dirk", "Ty", "Vera", "Mark", "Alma", "Bruno", "Celia", "Doran", "Edith"]
SEED_LAST = ["Alphonso", "Alosa", "Baumkirchner", "Bayless", "Castellan", "Dunmore", "Eskildsen", "Farrow"]

ONSETS = ["b", "br", "c", "ch", "d", "dr", "f", "g", "gr", "h", "j", "k", "l", "m", "n", "p", "r", "s", "st", "t", "th", "v", "w", "z"]
VOWELS = ["a", "e", "i", "o", "u", "ai", "ea", "io", "ou"]
CODAS = ["", "n", "r", "l", "s", "th", "m", "x", "nd", "rt"]
FIRST_ENDS = ["", "a", "o", "ie", "en", "el", "ina", "us"]
LAST_ENDS = ["son", "ley", "man", "berg", "ton", "ford", "er", "ski", "ez", "ard", "ini", "well"]


def syllable(rng):
    return rng.choice(ONSETS) + rng.choice(VOWELS) + rng.choice(CODAS)


def build(rng, seeds, ends, n, syllables):
    out = list(seeds)
    seen = {s.lower() for s in seeds}
    while len(out) < n:
        word = "".join(syllable(rng) for _ in range(rng.choice(syllables))) + rng.choice(ends)
        word = word.capitalize()
        if 3 <= len(word) <= 12 and word.lower() not in seen and word.lower() != "and":
            seen.add(word.lower())
            out.append(word)
    return out


def main():
    rng = random.Random(20230519)
    first = build(rng, SEED_FIRST, FIRST_ENDS, 400, (1, 2))
    last = build(rng, SEED_LAST, LAST_ENDS, 400, (1, 2, 2))
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "first_names.txt").write_text("\n".join(first) + "\n", encoding="utf-8")
    (DATA / "last_names.txt").write_text("\n".join(last) + "\n", encoding="utf-8")
    print(f"wrote {len(first)} first and {len(last)} last names")


if __name__ == "__main__":
    main()
