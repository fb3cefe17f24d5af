"""Sentence selection, tokenization, and vocabulary shared by all models."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

TOKENIZER_VERSION = "ws-punct-1"

PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
RESERVED = (PAD, UNK, BOS, EOS)

# Abbreviations whose trailing period never ends a sentence.
ABBREVIATIONS = frozenset({
    "e.g.", "i.e.", "etc.", "cf.", "vs.", "al.", "spp.", "sp.",
    "subsp.", "var.", "approx.", "ca.", "fig.", "no.", "st.",
})

# Number with decimals first, then words with internal hyphens, then any
# single non-space symbol.
_TOKEN_RE = re.compile(r"\d+(?:\.\d+)+|\w+(?:-\w+)*|[^\w\s]")

_TERMINATORS = ".?!"


def first_sentence(text: str) -> str:
    """Prefix of `text` up to the first sentence terminator.

    A terminator is '.', '?' or '!' followed by whitespace and an
    uppercase letter (or end of text), unless the word it closes is a
    known abbreviation.  Without a terminator the whole text is returned;
    the result is always a prefix of the input.
    """
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _TERMINATORS:
            # word ending at this period, for the abbreviation guard
            start = i
            while start > 0 and not text[start - 1].isspace():
                start -= 1
            word = text[start:i + 1].lower()
            j = i + 1
            while j < n and text[j].isspace():
                j += 1
            at_end = j >= n
            next_upper = not at_end and text[j].isupper()
            if (at_end or (next_upper and j > i + 1)) and word not in ABBREVIATIONS:
                return text[:i + 1]
        i += 1
    return text


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and split punctuation into its own
    tokens; intra-word hyphens and decimal points stay attached."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    """Ordered token list with reserved control tokens at fixed indices."""

    tokens: list[str]
    counts: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if tuple(self.tokens[:4]) != RESERVED:
            raise ValueError("vocabulary must start with the reserved tokens")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def pad_id(self) -> int:
        return 0

    @property
    def unk_id(self) -> int:
        return 1

    @property
    def bos_id(self) -> int:
        return 2

    @property
    def eos_id(self) -> int:
        return 3

    def encode(self, tokens) -> list[int]:
        unk = self.unk_id
        return [self.index.get(t, unk) for t in tokens]

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self.tokens:
                fh.write(f"{tok}\t{self.counts.get(tok, 0)}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        tokens, counts = [], {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                tok, _, count = line.rstrip("\n").partition("\t")
                tokens.append(tok)
                counts[tok] = int(count) if count else 0
        return cls(tokens, counts)


def build_vocab(corpus, min_count: int = 2) -> Vocabulary:
    """Vocabulary over token sequences: frequency >= min_count, ordered by
    (frequency desc, token asc); everything else maps to UNK."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    freq = Counter()
    for seq in corpus:
        freq.update(seq)
    kept = sorted((t for t, c in freq.items() if c >= min_count and t not in RESERVED),
                  key=lambda t: (-freq[t], t))
    counts = {t: 0 for t in RESERVED}
    counts.update((t, freq[t]) for t in kept)
    return Vocabulary(list(RESERVED) + kept, counts)
