"""Token edit distance, WER/CER, corpus pooling, and per-language splits.

The backtrace resolves cost ties preferring substitution, then insertion,
then deletion, so the S/D/I decomposition is deterministic. Corpus WER is
pooled (summed edits over summed reference lengths), not averaged per
utterance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .augment import LabeledWord
from .errors import MetricError

# Language bucket for insertions that precede any reference word in an
# empty-reference alignment.
UNDETERMINED = "und"


@dataclass(frozen=True)
class EditStats:
    """Alignment error counts against a reference of ``ref_len`` tokens."""

    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    ref_len: int = 0

    def __post_init__(self) -> None:
        if min(self.substitutions, self.deletions, self.insertions, self.ref_len) < 0:
            raise MetricError("edit stats must be nonnegative")
        if self.substitutions + self.deletions > self.ref_len:
            raise MetricError("substitutions + deletions exceed reference length")

    @property
    def total_edits(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def wer(self) -> float:
        if self.ref_len == 0:
            raise MetricError("WER undefined for empty reference")
        return self.total_edits / self.ref_len

    def __add__(self, other: "EditStats") -> "EditStats":
        return EditStats(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_len + other.ref_len,
        )


def _alignment(ref: Sequence, hyp: Sequence) -> list[tuple[str, int, int]]:
    """Minimal-cost alignment as (op, ref_index, hyp_index) steps.

    Ops are match/sub/ins/del; ties during backtrace prefer substitution
    over insertion over deletion.
    """
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        row = dist[i]
        prev = dist[i - 1]
        r = ref[i - 1]
        for j in range(1, m + 1):
            same = prev[j - 1] if r == hyp[j - 1] else prev[j - 1] + 1
            row[j] = min(same, row[j - 1] + 1, prev[j] + 1)
    steps: list[tuple[str, int, int]] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i][j] == dist[i - 1][j - 1]:
            steps.append(("match", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + 1:
            steps.append(("sub", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif j > 0 and dist[i][j] == dist[i][j - 1] + 1:
            steps.append(("ins", i - 1, j - 1))
            j -= 1
        else:
            steps.append(("del", i - 1, j - 1))
            i -= 1
    steps.reverse()
    return steps


def edit_distance(ref: Sequence, hyp: Sequence) -> EditStats:
    """Levenshtein alignment statistics with unit costs."""
    subs = dels = ins = 0
    for op, _, _ in _alignment(ref, hyp):
        if op == "sub":
            subs += 1
        elif op == "del":
            dels += 1
        elif op == "ins":
            ins += 1
    return EditStats(subs, dels, ins, len(ref))


def wer_corpus(pairs) -> float:
    """Pooled corpus WER over (reference tokens, hypothesis tokens) pairs."""
    total = EditStats()
    for ref, hyp in pairs:
        total = total + edit_distance(ref, hyp)
    if total.ref_len == 0:
        raise MetricError("corpus WER undefined: zero reference tokens")
    return total.total_edits / total.ref_len


def cer(ref: str, hyp: str) -> float:
    """Character error rate; spaces count as characters."""
    if not ref:
        raise MetricError("CER undefined for empty reference")
    return edit_distance(list(ref), list(hyp)).wer()


def wer_by_language(
    ref: Sequence[LabeledWord], hyp: Sequence[str]
) -> dict[str, EditStats]:
    """Split one global alignment's errors by reference-word language.

    Substitutions and deletions belong to their reference word's language;
    insertions to the nearest preceding reference word's language (initial
    insertions to the first reference word, or ``und`` if there is none).
    Per-language stats sum exactly to the global ``edit_distance`` result.
    """
    words = [lw.word for lw in ref]
    langs = [lw.lang for lw in ref]
    counts: dict[str, dict[str, int]] = {}

    def bump(lang: str, op: str) -> None:
        counts.setdefault(lang, {"sub": 0, "del": 0, "ins": 0, "len": 0})[op] += 1

    for lang in langs:
        bump(lang, "len")
    first_lang = langs[0] if langs else UNDETERMINED
    for op, ref_idx, _ in _alignment(words, hyp):
        if op == "match":
            continue
        if op == "ins":
            lang = langs[ref_idx] if ref_idx >= 0 else first_lang
        else:
            lang = langs[ref_idx]
        bump(lang, op)
    return {
        lang: EditStats(c["sub"], c["del"], c["ins"], c["len"])
        for lang, c in sorted(counts.items())
    }
