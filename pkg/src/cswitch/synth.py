"""Synthetic code-switched corpus with a controllable acoustic channel.

Two disjoint artificial lexicons ("eng-like" and "bantu-like") share one
consonant inventory but use disjoint vowel sets, so the word sets can
never collide while the character sets overlap the way real code-switched
text does. Word sequences are sampled from a seeded per-language bigram
grammar with a configurable switch probability; each transcript character
(including spaces) is rendered to a frame triple (symbol, symbol, blank)
and the log scores are perturbed with Gaussian noise of the given
temperature before per-frame log-softmax.

All randomness flows from one u64 seed through a numpy PCG64 generator,
so a fixed seed reproduces the corpus byte for byte.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import BLANK, SPACE, Vocabulary, build_vocab, write_vocab
from .corpus import LanguageSpan, Utterance, write_manifest
from .cslg import write_cslg
from .ctc import LogitMatrix, normalize
from .errors import PipelineError

CONSONANTS = "bdfghklmnprstw"
ENG_VOWELS = "eio"
BANTU_VOWELS = "au"

FRAMES_PER_CHAR = 3
CLEAN_MARGIN = 6.0


@dataclass(frozen=True)
class SynthParams:
    seed: int = 42
    n_utts: int = 100
    eng_lexicon: int = 30
    bantu_lexicon: int = 30
    switch_prob: float = 0.3
    noise: float = 0.0
    frame_rate: float = 50.0
    min_words: int = 3
    max_words: int = 8

    def __post_init__(self) -> None:
        if self.n_utts < 1 or self.eng_lexicon < 1 or self.bantu_lexicon < 1:
            raise PipelineError("synth sizes must be positive")
        if not 0.0 <= self.switch_prob <= 1.0:
            raise PipelineError(f"switch_prob must be in [0, 1], got {self.switch_prob}")
        if self.noise < 0:
            raise PipelineError(f"noise must be nonnegative, got {self.noise}")
        if self.min_words < 1 or self.max_words < self.min_words:
            raise PipelineError("bad utterance length bounds")


def _make_word(rng: np.random.Generator, vowels: str, syllables: int) -> str:
    parts = []
    for _ in range(syllables):
        parts.append(CONSONANTS[rng.integers(len(CONSONANTS))])
        parts.append(vowels[rng.integers(len(vowels))])
    return "".join(parts)


def _make_lexicon(
    rng: np.random.Generator, vowels: str, size: int, min_syll: int, max_syll: int
) -> list[str]:
    words: list[str] = []
    seen = set()
    attempts = 0
    while len(words) < size:
        attempts += 1
        if attempts > 200 * size:
            raise PipelineError(
                f"cannot draw {size} distinct words over vowels {vowels!r}"
            )
        syllables = int(rng.integers(min_syll, max_syll + 1))
        word = _make_word(rng, vowels, syllables)
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


@dataclass(frozen=True)
class _Grammar:
    """Seeded bigram source grammar over one lexicon."""

    lexicon: tuple[str, ...]
    initial: tuple[str, ...]
    successors: dict

    @classmethod
    def build(cls, rng: np.random.Generator, lexicon: list[str]) -> "_Grammar":
        k = min(3, len(lexicon))
        successors = {}
        for word in lexicon:
            picks = rng.choice(len(lexicon), size=k, replace=False)
            successors[word] = tuple(lexicon[i] for i in picks)
        n_init = min(5, len(lexicon))
        init = rng.choice(len(lexicon), size=n_init, replace=False)
        return cls(tuple(lexicon), tuple(lexicon[i] for i in init), successors)

    def start(self, rng: np.random.Generator) -> str:
        return self.initial[rng.integers(len(self.initial))]

    def next_word(self, rng: np.random.Generator, prev: str) -> str:
        options = self.successors[prev]
        weights = (0.6, 0.3, 0.1)[: len(options)]
        total = sum(weights)
        r = rng.random() * total
        acc = 0.0
        for opt, w in zip(options, weights):
            acc += w
            if r <= acc:
                return opt
        return options[-1]


@dataclass(frozen=True)
class SynthCorpus:
    utterances: list
    logits: dict
    vocab: Vocabulary
    params: SynthParams


def synthesize(params: SynthParams) -> SynthCorpus:
    """Generate utterances, their logit matrices, and the shared vocabulary."""
    rng = np.random.Generator(np.random.PCG64(params.seed))
    eng_words = _make_lexicon(rng, ENG_VOWELS, params.eng_lexicon, 1, 2)
    bantu_words = _make_lexicon(rng, BANTU_VOWELS, params.bantu_lexicon, 2, 3)
    overlap = set(eng_words) & set(bantu_words)
    if overlap:
        raise PipelineError(f"lexicons collide on {sorted(overlap)[:5]}")
    grammars = {
        "eng": _Grammar.build(rng, eng_words),
        "zul": _Grammar.build(rng, bantu_words),
    }

    sequences = []
    for _ in range(params.n_utts):
        n_words = int(rng.integers(params.min_words, params.max_words + 1))
        lang = "eng" if rng.random() < 0.5 else "zul"
        word = grammars[lang].start(rng)
        seq = [(word, lang)]
        for _ in range(n_words - 1):
            if rng.random() < params.switch_prob:
                lang = "zul" if lang == "eng" else "eng"
                word = grammars[lang].start(rng)
            else:
                word = grammars[lang].next_word(rng, word)
            seq.append((word, lang))
        sequences.append(seq)

    transcripts = [" ".join(w for w, _ in seq) for seq in sequences]
    vocab = build_vocab(transcripts, scheme="plain")

    slot_dur = FRAMES_PER_CHAR / params.frame_rate

    def slot_time(slot: int) -> float:
        # quantize to the manifest's millisecond precision
        return round(slot * slot_dur, 3)

    utterances = []
    logits = {}
    for u, seq in enumerate(sequences):
        utt_id = f"synth-{u:04d}"
        spans = []
        slot = 0  # index into the character stream, spaces included
        run_words: list[str] = []
        run_lang = seq[0][1]
        run_start = 0
        for i, (word, lang) in enumerate(seq):
            space_slot = None
            if i > 0:
                space_slot = slot  # inter-word space occupies one slot
                slot += 1
            if lang != run_lang:
                # close the run; the switching space stays unannotated
                spans.append(
                    LanguageSpan(
                        run_lang,
                        slot_time(run_start),
                        slot_time(space_slot),
                        " ".join(run_words),
                    )
                )
                run_words = []
                run_lang = lang
            if not run_words:
                run_start = slot
            run_words.append(word)
            slot += len(word)
        spans.append(
            LanguageSpan(
                run_lang, slot_time(run_start), slot_time(slot), " ".join(run_words)
            )
        )
        duration = slot_time(slot)
        utt = Utterance(
            id=utt_id, lang_pair="zul-eng", duration_s=duration, spans=tuple(spans)
        )
        utterances.append(utt)

        text = transcripts[u]
        t_count = FRAMES_PER_CHAR * len(text)
        v_count = len(vocab)
        values = np.full((t_count, v_count), -CLEAN_MARGIN)
        for c, ch in enumerate(text):
            idx = vocab.index(ch)
            base = FRAMES_PER_CHAR * c
            values[base, idx] = 0.0
            values[base + 1, idx] = 0.0
            values[base + 2, 0] = 0.0  # blank separates repeated characters
        values = values + rng.normal(0.0, params.noise, size=values.shape)
        raw = LogitMatrix(
            utterance_id=utt_id,
            frame_rate=params.frame_rate,
            values=values,
            normalized=False,
        )
        logits[utt_id] = normalize(raw)

    return SynthCorpus(utterances=utterances, logits=logits, vocab=vocab, params=params)


def synth_corpus(out_dir: str | Path, params: SynthParams) -> dict:
    """Write a synthetic corpus to disk; returns the artifact paths."""
    out = Path(out_dir)
    logits_dir = out / "logits"
    logits_dir.mkdir(parents=True, exist_ok=True)
    corpus = synthesize(params)
    manifest_path = out / "manifest.jsonl"
    write_manifest(corpus.utterances, manifest_path)
    vocab_path = out / "vocab.json"
    write_vocab(corpus.vocab, vocab_path)
    for utt in corpus.utterances:
        write_cslg(corpus.logits[utt.id], corpus.vocab.symbols, logits_dir / f"{utt.id}.cslg")
    return {
        "manifest": manifest_path,
        "logits_dir": logits_dir,
        "vocab": vocab_path,
    }
