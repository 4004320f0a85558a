"""CTC decoding and loss: greedy collapse, prefix beam search with n-gram
shallow fusion, the exact forward loss, and an exhaustive small-instance
decoder used as a verification oracle.

All probability arithmetic is natural-log double precision with
log-sum-exp; nothing ever round-trips through the probability domain.
The beam and the exhaustive decoder share one fusion formula:

    combined = acoustic_logp + lm_weight * ln(10) * lm_log10
               + word_bonus * completed_word_count

where the word LM is charged once per completed word (at each space
emission and for the final word at end of utterance).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .augment import SPACE, Vocabulary
from .errors import DecodeError, LogitError
from .lm import LN10, NGramModel, fusion_word_score

NEG_INF = float("-inf")


def _ladd(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@dataclass
class LogitMatrix:
    """Per-frame log scores: T rows, one column per vocabulary symbol."""

    utterance_id: str
    frame_rate: float
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        self.validate()

    @property
    def num_frames(self) -> int:
        return self.values.shape[0]

    @property
    def num_symbols(self) -> int:
        return self.values.shape[1]

    def validate(self) -> None:
        if self.values.ndim != 2:
            raise LogitError(f"logit matrix must be 2-D, got shape {self.values.shape}")
        t, v = self.values.shape
        if t < 1:
            raise LogitError("logit matrix needs at least one frame")
        if v < 2:
            raise LogitError("logit matrix needs blank plus at least one symbol")
        if not self.frame_rate > 0:
            raise LogitError(f"frame rate must be positive, got {self.frame_rate}")
        if self.normalized:
            lse = _row_logsumexp(self.values)
            worst = float(np.abs(lse).max())
            if worst > 1e-6:
                raise LogitError(
                    f"matrix flagged normalized but a row's log-sum-exp is {worst:.3e}"
                )


def _row_logsumexp(values: np.ndarray) -> np.ndarray:
    peak = values.max(axis=1, keepdims=True)
    safe = np.where(np.isfinite(peak), peak, 0.0)
    return (safe + np.log(np.exp(values - safe).sum(axis=1, keepdims=True))).ravel()


def normalize(raw: LogitMatrix) -> LogitMatrix:
    """Log-softmax each row so its log-sum-exp is zero; argmaxes unchanged."""
    bad = ~np.isfinite(raw.values)
    if bad.any():
        frame = int(np.nonzero(bad.any(axis=1))[0][0])
        raise LogitError(f"non-finite value in frame {frame}")
    shifted = raw.values - _row_logsumexp(raw.values)[:, None]
    return LogitMatrix(
        utterance_id=raw.utterance_id,
        frame_rate=raw.frame_rate,
        values=shifted,
        normalized=True,
    )


def _check_vocab(m: LogitMatrix, vocab: Vocabulary) -> None:
    if m.num_symbols != len(vocab):
        raise DecodeError(
            f"logit matrix has {m.num_symbols} symbols but vocabulary has {len(vocab)}"
        )


def collapse(indices, blank: int = 0) -> list[int]:
    """CTC collapse: merge repeats, then drop blanks."""
    out = []
    prev = -1
    for idx in indices:
        if idx != prev and idx != blank:
            out.append(idx)
        prev = idx
    return out


def greedy_decode(m: LogitMatrix, vocab: Vocabulary) -> str:
    """Best-per-frame decoding; ties go to the lowest symbol index."""
    _check_vocab(m, vocab)
    path = np.argmax(m.values, axis=1)
    return "".join(vocab.symbols[i] for i in collapse(path.tolist()))


def ctc_loss(m: LogitMatrix, target, vocab: Vocabulary) -> float:
    """Negative log of the total probability of all alignments collapsing
    to ``target`` (a sequence of non-blank vocabulary symbols)."""
    _check_vocab(m, vocab)
    if not m.normalized:
        raise LogitError("ctc_loss requires a normalized logit matrix")
    labels = []
    for sym in target:
        if sym == vocab.symbols[0]:
            raise DecodeError("target may not contain the blank symbol")
        if sym not in vocab:
            raise DecodeError(f"target symbol {sym!r} not in vocabulary")
        labels.append(vocab.index(sym))
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    t_count = m.num_frames
    if t_count < len(labels) + repeats:
        raise DecodeError(
            f"target too long: {len(labels)} labels with {repeats} adjacent repeats "
            f"need at least {len(labels) + repeats} frames, have {t_count}"
        )
    values = m.values
    if not labels:
        return -float(values[:, 0].sum())
    ext = [0]
    for lab in labels:
        ext.extend((lab, 0))
    s_count = len(ext)
    ext_arr = np.array(ext)
    # skips are legal into a label state that differs from the one two back
    can_skip = np.zeros(s_count, dtype=bool)
    for s in range(2, s_count):
        can_skip[s] = ext[s] != 0 and ext[s] != ext[s - 2]
    alpha = np.full(s_count, NEG_INF)
    alpha[0] = values[0, 0]
    alpha[1] = values[0, ext[1]]
    for t in range(1, t_count):
        stay = alpha
        step = np.concatenate(([NEG_INF], alpha[:-1]))
        skip = np.concatenate(([NEG_INF, NEG_INF], alpha[:-2]))
        skip = np.where(can_skip, skip, NEG_INF)
        merged = np.logaddexp(np.logaddexp(stay, step), skip)
        alpha = merged + values[t, ext_arr]
    return -float(np.logaddexp(alpha[-1], alpha[-2]))


@dataclass
class DecodeParams:
    """Beam-search and shallow-fusion settings."""

    beam_width: int = 100
    lm_weight: float = 1.5
    word_bonus: float = 1.0
    lm: NGramModel | None = None

    def __post_init__(self) -> None:
        if self.beam_width < 1:
            raise DecodeError(f"beam width must be >= 1, got {self.beam_width}")
        if not math.isfinite(self.lm_weight) or self.lm_weight < 0:
            raise DecodeError(f"lm weight must be finite and >= 0, got {self.lm_weight}")
        if not math.isfinite(self.word_bonus):
            raise DecodeError(f"word bonus must be finite, got {self.word_bonus}")


@dataclass(frozen=True)
class ScoredHypothesis:
    """One decoded candidate with its fusion-score breakdown."""

    text: str
    acoustic_logp: float
    lm_log10: float
    combined: float


def _words_of(text: str) -> list[str]:
    return [w for w in text.split(SPACE) if w]


def _fusion_lm_log10(lm: NGramModel | None, words) -> float:
    if lm is None:
        return 0.0
    total = 0.0
    for i, w in enumerate(words):
        total += fusion_word_score(lm, words[:i], w)
    return total


def _score_text(
    text: str,
    acoustic: float,
    lm: NGramModel | None,
    lm_weight: float,
    word_bonus: float,
) -> ScoredHypothesis:
    words = _words_of(text)
    lm_log10 = _fusion_lm_log10(lm, words) if lm is not None and lm_weight > 0 else 0.0
    combined = acoustic + lm_weight * LN10 * lm_log10 + word_bonus * len(words)
    return ScoredHypothesis(text, acoustic, lm_log10, combined)


def exhaustive_decode(
    m: LogitMatrix,
    vocab: Vocabulary,
    lm: NGramModel | None = None,
    lm_weight: float = 1.5,
    word_bonus: float = 1.0,
) -> ScoredHypothesis:
    """Enumerate every frame path, aggregate the exact marginal probability
    of each collapsed string, and return the best fused hypothesis.

    Verification oracle only: refuses instances with more than 1e6 paths.
    """
    _check_vocab(m, vocab)
    t_count, v_count = m.values.shape
    if v_count**t_count > 10**6:
        raise DecodeError(
            f"exhaustive decode guard exceeded: {v_count}^{t_count} paths"
        )
    rows = m.values.tolist()
    marginals: dict[str, float] = {}
    for path in itertools.product(range(v_count), repeat=t_count):
        logp = 0.0
        for t, idx in enumerate(path):
            logp += rows[t][idx]
        text = "".join(vocab.symbols[i] for i in collapse(path))
        prev = marginals.get(text, NEG_INF)
        marginals[text] = _ladd(prev, logp)
    best: ScoredHypothesis | None = None
    for text in sorted(marginals):
        hyp = _score_text(text, marginals[text], lm, lm_weight, word_bonus)
        if best is None or hyp.combined > best.combined:
            best = hyp
    assert best is not None
    return best


@dataclass
class _Prefix:
    """Search state for one collapsed prefix."""

    text: str
    words: tuple
    partial: str
    lm_log10: float
    word_count: int
    p_blank: float = NEG_INF
    p_nonblank: float = NEG_INF

    def total(self) -> float:
        return _ladd(self.p_blank, self.p_nonblank)


def beam_decode(
    m: LogitMatrix, vocab: Vocabulary, params: DecodeParams
) -> list[ScoredHypothesis]:
    """CTC prefix beam search with word-level shallow fusion.

    Per-prefix blank/non-blank mass is tracked in log space; with a beam at
    least as wide as the number of reachable prefixes the top hypothesis is
    exactly the exhaustive-decode argmax. Ties break toward the
    lexicographically smaller text, so results are scheduling-independent.
    """
    _check_vocab(m, vocab)
    if not m.normalized:
        raise LogitError("beam_decode requires a normalized logit matrix")
    use_lm = params.lm is not None and params.lm_weight > 0
    if params.lm is not None and SPACE not in vocab:
        raise DecodeError("vocabulary lacks the space symbol required for LM fusion")
    lm = params.lm
    alpha_ln10 = params.lm_weight * LN10
    beta = params.word_bonus
    order_ctx = (lm.order - 1) if use_lm else 0
    word_cache: dict[tuple, float] = {}

    def completed_word_score(words: tuple, word: str) -> float:
        key = (words[-order_ctx:] if order_ctx else (), word)
        if key not in word_cache:
            word_cache[key] = fusion_word_score(lm, words, word)
        return word_cache[key]

    def extend_state(st: _Prefix, symbol: str) -> _Prefix:
        if symbol == SPACE:
            words, partial = st.words, ""
            lm_log10, wc = st.lm_log10, st.word_count
            if st.partial:
                if use_lm:
                    lm_log10 += completed_word_score(st.words, st.partial)
                words = st.words + (st.partial,)
                wc += 1
            return _Prefix(st.text + symbol, words, partial, lm_log10, wc)
        return _Prefix(
            st.text + symbol, st.words, st.partial + symbol, st.lm_log10, st.word_count
        )

    symbols = vocab.symbols
    beams: dict[tuple, _Prefix] = {
        (): _Prefix("", (), "", 0.0, 0, p_blank=0.0, p_nonblank=NEG_INF)
    }
    for row in m.values.tolist():
        cands: dict[tuple, _Prefix] = {}

        def bucket(key: tuple, parent: _Prefix | None, symbol: str | None) -> _Prefix:
            st = cands.get(key)
            if st is None:
                if parent is None:
                    base = beams[key]
                    st = _Prefix(base.text, base.words, base.partial, base.lm_log10, base.word_count)
                else:
                    st = extend_state(parent, symbol)
                cands[key] = st
            return st

        for key, st in beams.items():
            total = st.total()
            stay = bucket(key, None, None)
            stay.p_blank = _ladd(stay.p_blank, total + row[0])
            last = key[-1] if key else -1
            for ci in range(1, len(symbols)):
                p = row[ci]
                if p == NEG_INF:
                    continue
                if ci == last:
                    stay.p_nonblank = _ladd(stay.p_nonblank, st.p_nonblank + p)
                    grown = bucket(key + (ci,), st, symbols[ci])
                    grown.p_nonblank = _ladd(grown.p_nonblank, st.p_blank + p)
                else:
                    grown = bucket(key + (ci,), st, symbols[ci])
                    grown.p_nonblank = _ladd(grown.p_nonblank, total + p)

        ranked = sorted(
            cands.items(),
            key=lambda kv: (
                -(kv[1].total() + alpha_ln10 * kv[1].lm_log10 + beta * kv[1].word_count),
                kv[1].text,
            ),
        )
        beams = dict(ranked[: params.beam_width])

    hyps = []
    for st in beams.values():
        lm_log10, wc = st.lm_log10, st.word_count
        if st.partial:
            if use_lm:
                lm_log10 += completed_word_score(st.words, st.partial)
            wc += 1
        acoustic = st.total()
        combined = acoustic + alpha_ln10 * lm_log10 + beta * wc
        hyps.append(ScoredHypothesis(st.text, acoustic, lm_log10, combined))
    hyps.sort(key=lambda h: (-h.combined, h.text))
    return hyps
