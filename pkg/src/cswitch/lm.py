"""Word n-gram language models with backoff scoring and ARPA I/O.

Models are trained from tokenized transcripts and stored as per-order
tables of (log probability, backoff weight) entries, the same shape the
ARPA text format serializes. Scores are kept in natural log internally;
the public query API and the ARPA boundary speak log10.

Estimators: maximum likelihood (tests only, assigns zero mass to unseen
events), add-k, and interpolated Kneser-Ney with a single fixed discount.
Backoff weights are always the leftover probability mass of a context
divided by the lower-order mass of its unseen continuations, which makes
every conditional distribution sum to one by construction.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ArpaError, LmError

SOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

LN10 = math.log(10.0)
NEG_INF = float("-inf")

# Placeholder log10 probability for context-only entries (the all-<s>
# histories), mirroring the usual ARPA convention.
DUMMY_LOG10 = -99.0


class SmoothingFallbackWarning(UserWarning):
    """Raised when a degenerate corpus forces a smoothing substitution."""


@dataclass(frozen=True)
class Smoothing:
    """Estimator selector: mle, add_k(k > 0), or kneser_ney(0 < discount < 1)."""

    kind: str
    k: float = 0.0
    discount: float = 0.75

    def __post_init__(self) -> None:
        if self.kind not in ("mle", "add_k", "kneser_ney"):
            raise LmError(f"unknown smoothing kind {self.kind!r}")
        if self.kind == "add_k" and not self.k > 0:
            raise LmError(f"add_k requires k > 0, got {self.k}")
        if self.kind == "kneser_ney" and not 0 < self.discount < 1:
            raise LmError(f"kneser_ney requires discount in (0, 1), got {self.discount}")

    @classmethod
    def mle(cls) -> "Smoothing":
        return cls("mle")

    @classmethod
    def add_k(cls, k: float) -> "Smoothing":
        return cls("add_k", k=k)

    @classmethod
    def kneser_ney(cls, discount: float = 0.75) -> "Smoothing":
        return cls("kneser_ney", discount=discount)


@dataclass
class Entry:
    """One n-gram: natural-log probability and optional natural-log backoff."""

    logp: float
    bow: float | None = None


@dataclass
class NGramModel:
    """Order-stratified n-gram tables plus the prediction vocabulary.

    ``tables[n]`` maps n-word tuples to entries. The vocabulary contains
    every trainable word plus the sentinels ``</s>`` and ``<unk>``; ``<s>``
    appears only inside histories.
    """

    order: int
    tables: dict[int, dict[tuple[str, ...], Entry]]
    vocab: frozenset = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if not 1 <= self.order <= 5:
            raise LmError(f"order must be in [1, 5], got {self.order}")

    def lookup(self, word: str) -> str:
        """Map a raw token to its in-vocabulary form."""
        if word in self.vocab or word == SOS:
            return word
        return UNK


def count_ngrams(
    sentences: Iterable[Sequence[str]], order: int
) -> dict[int, Counter]:
    """Count all n-gram windows (n = 1..order) over sentinel-padded sentences.

    Each sentence gets order-1 leading ``<s>`` and one trailing ``</s>``.
    Windows ending in ``<s>`` are context-only and are not counted.
    """
    if order < 1:
        raise LmError(f"order must be >= 1, got {order}")
    counts: dict[int, Counter] = {n: Counter() for n in range(1, order + 1)}
    for sent in sentences:
        for word in sent:
            if not word:
                raise LmError("empty word in training sentence")
            if word in (SOS, EOS, UNK):
                raise LmError(f"reserved sentinel {word!r} in training sentence")
        padded = [SOS] * (order - 1) + list(sent) + [EOS]
        for n in range(1, order + 1):
            table = counts[n]
            for i in range(len(padded) - n + 1):
                gram = tuple(padded[i : i + n])
                if gram[-1] != SOS:
                    table[gram] += 1
    return counts


def _group_by_context(table: dict) -> dict:
    grouped: dict[tuple, dict[str, float]] = {}
    for gram, count in table.items():
        grouped.setdefault(gram[:-1], {})[gram[-1]] = count
    return grouped


def _adjusted_counts(raw: dict[int, Counter], order: int) -> dict[int, dict]:
    """Kneser-Ney adjusted counts: raw at the top order and for n-grams
    starting with ``<s>``, distinct-left-extension counts elsewhere."""
    adjusted: dict[int, dict] = {order: dict(raw[order])}
    for n in range(order - 1, 0, -1):
        extensions: Counter = Counter()
        for gram in raw[n + 1]:
            extensions[gram[1:]] += 1
        level = {}
        for gram, count in raw[n].items():
            if gram[0] == SOS:
                level[gram] = count
            else:
                level[gram] = extensions.get(gram, 0)
        adjusted[n] = level
    return adjusted


def _conditional_nats(tables: dict, h: tuple, w: str) -> float:
    entry = tables.get(len(h) + 1, {}).get(h + (w,))
    if entry is not None:
        return entry.logp
    if not h:
        return NEG_INF
    ctx = tables.get(len(h), {}).get(h)
    bow = ctx.bow if ctx is not None and ctx.bow is not None else 0.0
    return bow + _conditional_nats(tables, h[1:], w)


def _context_backoffs(tables: dict, n: int) -> None:
    """Fill backoff weights of level-n entries from level-(n+1) leftover mass."""
    seen_by_ctx: dict[tuple, list[str]] = {}
    for gram in tables[n + 1]:
        if gram[-1] == SOS:  # context-only carrier, not a prediction
            continue
        seen_by_ctx.setdefault(gram[:-1], []).append(gram[-1])
    for h, entry in tables[n].items():
        seen = seen_by_ctx.get(h)
        if not seen:
            entry.bow = None
            continue
        num = 1.0 - math.fsum(math.exp(tables[n + 1][h + (w,)].logp) for w in seen)
        den = 1.0 - math.fsum(
            math.exp(_conditional_nats(tables, h[1:], w)) for w in seen
        )
        if num < 1e-12:
            num = 0.0
        if den < 1e-12:
            den = 0.0
        if den == 0.0:
            entry.bow = 0.0  # nothing left below either; weight is unused
        elif num == 0.0:
            entry.bow = NEG_INF  # no residual mass (exact for MLE)
        else:
            entry.bow = math.log(num) - math.log(den)


def train(
    sentences: Iterable[Sequence[str]], order: int, smoothing: Smoothing
) -> NGramModel:
    """Estimate an n-gram model; deterministic for fixed input."""
    sents = [list(s) for s in sentences]
    if not any(sents):
        raise LmError("training requires at least one non-empty sentence")
    raw = count_ngrams(sents, order)
    vocab = frozenset(w for s in sents for w in s) | {EOS, UNK}

    if smoothing.kind == "kneser_ney" and _kn_degenerate(raw, order, smoothing.discount):
        warnings.warn(
            "Kneser-Ney discounting would remove all probability mass on this "
            "corpus; falling back to add_k(0.1)",
            SmoothingFallbackWarning,
            stacklevel=2,
        )
        smoothing = Smoothing.add_k(0.1)

    if smoothing.kind == "kneser_ney":
        counts = _adjusted_counts(raw, order)
    else:
        counts = {n: dict(raw[n]) for n in raw}

    tables: dict[int, dict[tuple, Entry]] = {n: {} for n in range(1, order + 1)}
    vocab_sorted = sorted(vocab)
    uniform = 1.0 / len(vocab)

    for n in range(1, order + 1):
        grouped = _group_by_context(counts[n])
        for h, continuations in grouped.items():
            total = float(sum(continuations.values()))
            if total <= 0:
                continue
            if smoothing.kind == "mle":
                for w, c in continuations.items():
                    tables[n][h + (w,)] = Entry(math.log(c / total))
            elif smoothing.kind == "add_k":
                k = smoothing.k
                denom = total + k * len(vocab)
                words = vocab_sorted if n == 1 else continuations
                for w in words:
                    c = continuations.get(w, 0)
                    tables[n][h + (w,)] = Entry(math.log((c + k) / denom))
            else:  # kneser_ney
                d = smoothing.discount
                n_types = sum(1 for c in continuations.values() if c > 0)
                interp = d * n_types / total
                words = vocab_sorted if n == 1 else continuations
                for w in words:
                    c = continuations.get(w, 0)
                    if n == 1:
                        lower = uniform
                    else:
                        lower = math.exp(_conditional_nats(tables, h[1:], w))
                    p = max(c - d, 0.0) / total + interp * lower
                    tables[n][h + (w,)] = Entry(math.log(p))
        # Context-only carriers for the all-<s> histories of this length.
        if n < order:
            sos_ctx = (SOS,) * n
            if sos_ctx not in tables[n]:
                tables[n][sos_ctx] = Entry(DUMMY_LOG10 * LN10)
        if n > 1:
            _context_backoffs(tables, n - 1)

    return NGramModel(order=order, tables=tables, vocab=vocab)


def _kn_degenerate(raw: dict[int, Counter], order: int, discount: float) -> bool:
    """True when every top-order count is 1 and discounting would leave some
    context with no probability mass. Unreachable for discounts in (0, 1),
    but kept as the guard behind the documented add_k fallback."""
    top = raw[order]
    if not top or any(c != 1 for c in top.values()):
        return False
    grouped = _group_by_context(top)
    return any(
        sum(conts.values()) - discount * len(conts) <= 0.0
        for conts in grouped.values()
    )


def score_word(model: NGramModel, history: Sequence[str], word: str) -> float:
    """log10 P(word | history) with backoff; OOV tokens score as ``<unk>``."""
    h = tuple(model.lookup(t) for t in history)
    if len(h) >= model.order:
        h = h[len(h) - model.order + 1 :]
    return _conditional_nats(model.tables, h, model.lookup(word)) / LN10


def score_words(model: NGramModel, words: Sequence[str]) -> list[float]:
    """Per-word log10 scores with ``<s>``-padded histories (no ``</s>`` term)."""
    history: list[str] = [SOS] * (model.order - 1)
    scores = []
    for w in words:
        scores.append(score_word(model, history, w))
        history.append(w)
    return scores


def score_sentence(model: NGramModel, words: Sequence[str]) -> float:
    """log10 probability of a sentence, including the ``</s>`` transition."""
    history = [SOS] * (model.order - 1) + list(words)
    return math.fsum(score_words(model, words)) + score_word(model, history, EOS)


def fusion_word_score(model: NGramModel, preceding: Sequence[str], word: str) -> float:
    """Shallow-fusion per-word score: log10 P(word | <s>-padded preceding)."""
    history = (SOS,) * (model.order - 1) + tuple(preceding)
    return score_word(model, history, word)


def perplexity(model: NGramModel, sentences: Iterable[Sequence[str]]) -> float:
    """10^(-average log10 probability per token), counting one ``</s>`` per sentence."""
    total = 0.0
    tokens = 0
    for sent in sentences:
        total += score_sentence(model, sent)
        tokens += len(sent) + 1
    if tokens == 0:
        raise LmError("perplexity requires at least one scored token")
    return 10.0 ** (-total / tokens)


def observed_contexts(model: NGramModel) -> set:
    """Histories with at least one explicitly stored continuation."""
    ctxs = set()
    for n in range(2, model.order + 1):
        for gram in model.tables[n]:
            ctxs.add(gram[:-1])
    if model.tables.get(1):
        ctxs.add(())
    return ctxs


def probability_mass(model: NGramModel, history: Sequence[str]) -> float:
    """Sum of P(w | history) over the whole prediction vocabulary."""
    h = tuple(history)
    return math.fsum(
        math.exp(_conditional_nats(model.tables, h, w)) for w in model.vocab
    )


# --- ARPA serialization -------------------------------------------------

def write_arpa(model: NGramModel, path) -> None:
    """Serialize to ARPA text. Values are log10 with 12 decimal places so
    multi-hop backoff queries survive a round trip well inside 1e-6."""
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\\data\\\n")
        for n in range(1, model.order + 1):
            handle.write(f"ngram {n}={len(model.tables[n])}\n")
        for n in range(1, model.order + 1):
            handle.write(f"\n\\{n}-grams:\n")
            for gram in sorted(model.tables[n]):
                entry = model.tables[n][gram]
                logp = entry.logp / LN10
                if logp == NEG_INF or logp < DUMMY_LOG10:
                    logp = DUMMY_LOG10
                line = f"{logp:.12f}\t{' '.join(gram)}"
                if entry.bow is not None:
                    bow = entry.bow / LN10
                    if bow == NEG_INF or bow < DUMMY_LOG10:
                        bow = DUMMY_LOG10
                    line += f"\t{bow:.12f}"
                handle.write(line + "\n")
        handle.write("\n\\end\\\n")


def read_arpa(path) -> NGramModel:
    """Parse an ARPA file; raises ArpaError with a line number on any defect."""
    declared: dict[int, int] = {}
    tables: dict[int, dict[tuple, Entry]] = {}
    state = "preamble"
    current = 0
    ended = False
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            stripped = line.strip()
            if not stripped:
                continue
            if stripped == "\\data\\":
                if state != "preamble":
                    raise ArpaError(f"line {line_no}: unexpected \\data\\")
                state = "header"
                continue
            if stripped == "\\end\\":
                ended = True
                break
            if state == "header" and stripped.startswith("ngram "):
                body = stripped[len("ngram ") :]
                if "=" not in body:
                    raise ArpaError(f"line {line_no}: malformed ngram count line")
                n_text, count_text = body.split("=", 1)
                try:
                    n, count = int(n_text), int(count_text)
                except ValueError:
                    raise ArpaError(f"line {line_no}: non-numeric ngram count") from None
                declared[n] = count
                tables[n] = {}
                continue
            if stripped.startswith("\\") and stripped.endswith("-grams:"):
                try:
                    current = int(stripped[1:].split("-")[0])
                except ValueError:
                    raise ArpaError(f"line {line_no}: malformed section header") from None
                if current not in declared:
                    raise ArpaError(f"line {line_no}: section {current} not declared in header")
                state = "body"
                continue
            if state == "body" and current:
                fields = stripped.split("\t")
                if len(fields) == 1:
                    # Tolerate space-separated files from other toolkits.
                    toks = stripped.split()
                    if len(toks) == current + 1:
                        fields = [toks[0], " ".join(toks[1:])]
                    elif len(toks) == current + 2:
                        fields = [toks[0], " ".join(toks[1:-1]), toks[-1]]
                if len(fields) not in (2, 3):
                    raise ArpaError(f"line {line_no}: malformed n-gram line")
                try:
                    logp = float(fields[0])
                except ValueError:
                    raise ArpaError(f"line {line_no}: non-numeric log probability") from None
                gram = tuple(fields[1].split(" "))
                if len(gram) != current:
                    raise ArpaError(
                        f"line {line_no}: {len(gram)}-gram in \\{current}-grams: section"
                    )
                bow = None
                if len(fields) == 3 and fields[2]:
                    try:
                        bow = float(fields[2]) * LN10
                    except ValueError:
                        raise ArpaError(f"line {line_no}: non-numeric backoff") from None
                tables[current][gram] = Entry(logp * LN10, bow)
                continue
            if state == "preamble":
                raise ArpaError(f"line {line_no}: expected \\data\\ header")
            raise ArpaError(f"line {line_no}: unexpected content {stripped!r}")
    if not declared:
        raise ArpaError("missing \\data\\ header")
    if not ended:
        raise ArpaError("missing \\end\\ terminator")
    for n, count in declared.items():
        have = len(tables.get(n, {}))
        if have != count:
            raise ArpaError(f"declared ngram {n}={count} but found {have} entries")
    order = max(declared)
    for n in range(1, order + 1):
        tables.setdefault(n, {})
    vocab = frozenset(g[0] for g in tables[1] if g[0] != SOS) | {EOS, UNK}
    return NGramModel(order=order, tables=tables, vocab=vocab)
