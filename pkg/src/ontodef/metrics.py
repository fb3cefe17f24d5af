"""Corpus and sentence scoring: BLEU1-4, METEOR, and NIST.

Scores are stored on a [0, 1] scale (NIST excepted, which is unbounded
below ~log2 |vocab| per n-gram) and multiplied by 100 for display.
Single reference per example.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field

from .textprep import TOKENIZER_VERSION

BLEU_EPS = 1e-9
NIST_MAX_N = 5
# brevity factor is 0.5 when the candidate is 2/3 of the reference length
NIST_BETA = math.log(0.5) / math.log(2.0 / 3.0) ** 2
SMOOTHING_MODE = f"sentence-epsilon-{BLEU_EPS:g}"


def ngram_counts(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


# --------------------------------------------------------------------- BLEU

def _clipped_counts(candidate, reference, n):
    cand = ngram_counts(candidate, n)
    ref = ngram_counts(reference, n)
    clipped = sum(min(c, ref[g]) for g, c in cand.items())
    return clipped, sum(cand.values())


def _brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len == 0:
        return 0.0
    return min(1.0, math.exp(1.0 - ref_len / cand_len))


def bleu_n(candidate, reference, n: int) -> float:
    """Sentence BLEU: geometric mean of clipped 1..n-gram precisions times
    the brevity penalty; zero precisions get epsilon smoothing."""
    if not 1 <= n <= 4:
        raise ValueError("n must be in 1..4")
    if len(candidate) == 0:
        return 0.0
    log_sum = 0.0
    for i in range(1, n + 1):
        clipped, total = _clipped_counts(candidate, reference, i)
        # constant-epsilon substitution keeps BLEU monotone in n
        p = clipped / total if clipped > 0 else BLEU_EPS
        log_sum += math.log(p)
    return _brevity_penalty(len(candidate), len(reference)) * math.exp(log_sum / n)


def corpus_bleu_n(pairs, n: int) -> float:
    """Corpus BLEU: n-gram counts aggregated before the geometric mean;
    no smoothing at this level."""
    if not 1 <= n <= 4:
        raise ValueError("n must be in 1..4")
    clipped_total = [0] * n
    count_total = [0] * n
    cand_len = ref_len = 0
    for candidate, reference in pairs:
        cand_len += len(candidate)
        ref_len += len(reference)
        for i in range(1, n + 1):
            clipped, total = _clipped_counts(candidate, reference, i)
            clipped_total[i - 1] += clipped
            count_total[i - 1] += total
    log_sum = 0.0
    for clipped, total in zip(clipped_total, count_total):
        if clipped == 0 or total == 0:
            return 0.0
        log_sum += math.log(clipped / total)
    return _brevity_penalty(cand_len, ref_len) * math.exp(log_sum / n)


# ------------------------------------------------------------------- METEOR

_VOWELS = "aeiou"


def _cons(word, i):
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        return i == 0 or not _cons(word, i - 1)
    return True


def _measure(stem):
    # number of VC blocks in [C](VC)^m[V]
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        vowel = not _cons(stem, i)
        if prev_vowel and not vowel:
            m += 1
        prev_vowel = vowel
    return m


def _has_vowel(stem):
    return any(not _cons(stem, i) for i in range(len(stem)))


def _ends_double_cons(word):
    return (len(word) >= 2 and word[-1] == word[-2] and _cons(word, len(word) - 1))


def _ends_cvc(word):
    if len(word) < 3:
        return False
    if not (_cons(word, len(word) - 3) and not _cons(word, len(word) - 2)
            and _cons(word, len(word) - 1)):
        return False
    return word[-1] not in "wxy"


_STEP2 = (("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
          ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
          ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
          ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
          ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
          ("logi", "log"))

_STEP3 = (("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
          ("ical", "ic"), ("ful", ""), ("ness", ""))

_STEP4 = ("al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
          "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize")


def porter_stem(word: str) -> str:
    """Classic Porter (1980) stemmer for the METEOR stem-match stage."""
    w = word.lower()
    if len(w) <= 2:
        return w

    # step 1a
    if w.endswith("sses"):
        w = w[:-2]
    elif w.endswith("ies"):
        w = w[:-2]
    elif w.endswith("ss"):
        pass
    elif w.endswith("s"):
        w = w[:-1]

    # step 1b
    if w.endswith("eed"):
        if _measure(w[:-3]) > 0:
            w = w[:-1]
    else:
        fired = False
        if w.endswith("ed") and _has_vowel(w[:-2]):
            w = w[:-2]
            fired = True
        elif w.endswith("ing") and _has_vowel(w[:-3]):
            w = w[:-3]
            fired = True
        if fired:
            if w.endswith(("at", "bl", "iz")):
                w += "e"
            elif _ends_double_cons(w) and not w.endswith(("l", "s", "z")):
                w = w[:-1]
            elif _measure(w) == 1 and _ends_cvc(w):
                w += "e"

    # step 1c
    if w.endswith("y") and _has_vowel(w[:-1]):
        w = w[:-1] + "i"

    # step 2
    for suffix, replacement in _STEP2:
        if w.endswith(suffix):
            stem = w[:-len(suffix)]
            if _measure(stem) > 0:
                w = stem + replacement
            break

    # step 3
    for suffix, replacement in _STEP3:
        if w.endswith(suffix):
            stem = w[:-len(suffix)]
            if _measure(stem) > 0:
                w = stem + replacement
            break

    # step 4
    for suffix in _STEP4:
        if w.endswith(suffix):
            stem = w[:-len(suffix)]
            if _measure(stem) > 1:
                if suffix == "ion" and not stem.endswith(("s", "t")):
                    break
                w = stem
            break

    # step 5a
    if w.endswith("e"):
        stem = w[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            w = stem

    # step 5b
    if _measure(w) > 1 and _ends_double_cons(w) and w.endswith("l"):
        w = w[:-1]
    return w


def _align_stage(cand_keys, ref_keys, cand_free, ref_free):
    """Pair equal keys in order of occurrence (i-th free candidate
    occurrence with i-th free reference occurrence)."""
    ref_slots: dict[str, list[int]] = {}
    for j in ref_free:
        ref_slots.setdefault(ref_keys[j], []).append(j)
    pairs = []
    for i in cand_free:
        slots = ref_slots.get(cand_keys[i])
        if slots:
            pairs.append((i, slots.pop(0)))
    return pairs


def meteor(candidate, reference, synonym_lookup=None) -> float:
    """METEOR with exact and Porter-stem match stages.

    Fmean = 10PR / (R + 9P), fragmentation penalty 0.5 * (chunks/matches)^3.
    `synonym_lookup` maps a token to an equivalence key; it is a no-op by
    default and only used as a third match stage when provided.
    """
    if not candidate or not reference:
        return 0.0
    stages = [lambda t: t, porter_stem]
    if synonym_lookup is not None:
        stages.append(synonym_lookup)

    cand_free = list(range(len(candidate)))
    ref_free = list(range(len(reference)))
    matches = []
    for stage in stages:
        cand_keys = [stage(t) for t in candidate]
        ref_keys = [stage(t) for t in reference]
        pairs = _align_stage(cand_keys, ref_keys, cand_free, ref_free)
        matches.extend(pairs)
        taken_c = {i for i, _ in pairs}
        taken_r = {j for _, j in pairs}
        cand_free = [i for i in cand_free if i not in taken_c]
        ref_free = [j for j in ref_free if j not in taken_r]

    m = len(matches)
    if m == 0:
        return 0.0
    matches.sort()
    chunks = 1 + sum(1 for (c0, r0), (c1, r1) in zip(matches, matches[1:])
                     if c1 != c0 + 1 or r1 != r0 + 1)
    precision = m / len(candidate)
    recall = m / len(reference)
    fmean = 10.0 * precision * recall / (recall + 9.0 * precision)
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1.0 - penalty)


def load_synonym_table(path):
    """token<TAB>equivalence-key lines -> lookup callable for meteor()."""
    table = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            tok, _, key = line.rstrip("\n").partition("\t")
            if tok:
                table[tok] = key or tok
    return lambda t: table.get(t, t)


# --------------------------------------------------------------------- NIST

def nist_info_table(references, max_n: int = NIST_MAX_N) -> dict:
    """info(w1..wn) = log2(count(w1..wn-1) / count(w1..wn)) over the
    reference corpus; the empty prefix counts every unigram position."""
    counts = Counter()
    for ref in references:
        counts[()] += len(ref)
        for n in range(1, max_n + 1):
            counts.update(ngram_counts(ref, n))
    info = {}
    for gram, c in counts.items():
        if gram == ():
            continue
        prefix_count = counts.get(gram[:-1], 0)
        if prefix_count > 0 and c > 0:
            info[gram] = math.log2(prefix_count / c)
    return info


def _nist_brevity(cand_len: int, ref_len: int) -> float:
    if cand_len == 0 or ref_len == 0:
        return 0.0
    ratio = min(cand_len / ref_len, 1.0)
    return math.exp(NIST_BETA * math.log(ratio) ** 2)


def _nist_fractions(candidate, reference, info, max_n):
    nums = [0.0] * max_n
    denoms = [0] * max_n
    for n in range(1, max_n + 1):
        cand = ngram_counts(candidate, n)
        ref = ngram_counts(reference, n)
        denoms[n - 1] = sum(cand.values())
        for gram, c in cand.items():
            matched = min(c, ref[gram])
            if matched and gram in info:
                nums[n - 1] += matched * info[gram]
    return nums, denoms


def nist(candidate, reference, info_table=None, max_n: int = NIST_MAX_N) -> float:
    """Sentence NIST against one reference; the info table defaults to
    weights computed from that reference alone."""
    if len(candidate) == 0:
        return 0.0
    info = info_table if info_table is not None else nist_info_table([reference], max_n)
    nums, denoms = _nist_fractions(candidate, reference, info, max_n)
    core = sum(num / denom for num, denom in zip(nums, denoms) if denom > 0)
    return core * _nist_brevity(len(candidate), len(reference))


def corpus_nist(pairs, max_n: int = NIST_MAX_N) -> float:
    pairs = list(pairs)
    info = nist_info_table([ref for _c, ref in pairs], max_n)
    nums = [0.0] * max_n
    denoms = [0] * max_n
    cand_len = ref_len = 0
    for candidate, reference in pairs:
        cand_len += len(candidate)
        ref_len += len(reference)
        seg_nums, seg_denoms = _nist_fractions(candidate, reference, info, max_n)
        nums = [a + b for a, b in zip(nums, seg_nums)]
        denoms = [a + b for a, b in zip(denoms, seg_denoms)]
    core = sum(num / denom for num, denom in zip(nums, denoms) if denom > 0)
    return core * _nist_brevity(cand_len, ref_len)


# ------------------------------------------------------------------ reports

@dataclass
class MetricReport:
    model: str
    corpus_scores: dict
    per_example: list
    example_count: int
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"model": self.model, "corpus_scores": self.corpus_scores,
                "per_example": self.per_example,
                "example_count": self.example_count, "config": self.config}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(d["model"], d["corpus_scores"], d["per_example"],
                   d["example_count"], d.get("config", {}))

    def save(self, json_path, csv_path=None) -> None:
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)
            fh.write("\n")
        if csv_path:
            fields = ["node_id", "bleu1", "bleu2", "bleu3", "bleu4", "meteor", "nist"]
            with open(csv_path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.DictWriter(fh, fieldnames=fields)
                writer.writeheader()
                for row in self.per_example:
                    writer.writerow({k: row[k] for k in fields})

    @classmethod
    def load(cls, json_path) -> "MetricReport":
        with open(json_path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def score_run(records, model_name: str | None = None,
              synonym_lookup=None) -> MetricReport:
    """Score a generation run: corpus BLEU1-4, mean sentence METEOR, and
    corpus NIST, plus per-example sentence scores."""
    records = list(records)
    if not records:
        raise ValueError("cannot score an empty run")
    model = model_name if model_name is not None else records[0].model
    pairs = [(r.generated, r.reference) for r in records]
    info = nist_info_table([ref for _c, ref in pairs])
    per_example = []
    for rec in records:
        row = {"node_id": rec.node_id}
        for n in range(1, 5):
            row[f"bleu{n}"] = bleu_n(rec.generated, rec.reference, n)
        row["meteor"] = meteor(rec.generated, rec.reference, synonym_lookup)
        row["nist"] = nist(rec.generated, rec.reference, info)
        per_example.append(row)
    corpus_scores = {f"bleu{n}": corpus_bleu_n(pairs, n) for n in range(1, 5)}
    corpus_scores["meteor"] = sum(r["meteor"] for r in per_example) / len(per_example)
    corpus_scores["nist"] = corpus_nist(pairs)
    return MetricReport(model, corpus_scores, per_example, len(records),
                        {"tokenizer_version": TOKENIZER_VERSION,
                         "smoothing": SMOOTHING_MODE,
                         "synonym_stage": synonym_lookup is not None})
