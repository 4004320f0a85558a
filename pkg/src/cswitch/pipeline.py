"""End-to-end experiment pipeline: train an n-gram LM from the manifest,
decode every utterance's logit file, score hypotheses, and write a
reproducible report. Also hosts the evaluation helpers shared with the
standalone ``evaluate`` and ``lid-eval`` commands.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import augment, lm, metrics
from .corpus import Utterance, flat_transcript, load_manifest
from .cslg import read_cslg
from .ctc import DecodeParams, LogitMatrix, beam_decode, greedy_decode
from .errors import PipelineError
from .langid import FrameLabels, SILENCE, frames_from_spans, lid_cross_entropy
from .metrics import EditStats, edit_distance, wer_by_language

VALID_ORDERS = (0, 2, 3)


@dataclass(frozen=True)
class ExperimentConfig:
    """One pipeline run: manifest + logits in, hypotheses + report out."""

    manifest: Path
    logits_dir: Path
    vocab: Path
    out_dir: Path
    scheme: str = "plain"
    lm_order: int = 0
    beam_width: int = 100
    lm_weight: float = 1.5
    word_bonus: float = 1.0
    smoothing: lm.Smoothing = field(default_factory=lm.Smoothing.kneser_ney)
    seed: int = 0
    workers: int = 1

    def __post_init__(self) -> None:
        if self.lm_order not in VALID_ORDERS:
            raise PipelineError(f"lm order must be one of {VALID_ORDERS}, got {self.lm_order}")
        if self.scheme not in augment.SCHEMES:
            raise PipelineError(f"unknown scheme {self.scheme!r}")
        if self.workers < 1:
            raise PipelineError(f"workers must be >= 1, got {self.workers}")
        for path, name in ((self.manifest, "manifest"), (self.vocab, "vocab")):
            if not Path(path).is_file():
                raise PipelineError(f"{name} file not found: {path}")
        if not Path(self.logits_dir).is_dir():
            raise PipelineError(f"logits directory not found: {self.logits_dir}")


@dataclass
class UttScore:
    utt_id: str
    reference: str
    hypothesis: str
    stats: EditStats

    def wer(self) -> float:
        return self.stats.wer()


@dataclass
class EvalReport:
    """Corpus-level scores plus the per-utterance breakdown."""

    wer: float
    cer: float
    edits: EditStats
    per_language: dict
    utts: list

    def worst(self, n: int = 10) -> list:
        ranked = sorted(self.utts, key=lambda u: (-u.wer(), u.utt_id))
        return ranked[:n]

    def to_text(self, worst_n: int = 10) -> str:
        e = self.edits
        lines = [
            f"WER {self.wer:.4f}  (S={e.substitutions} D={e.deletions} "
            f"I={e.insertions} N={e.ref_len})",
            f"CER {self.cer:.4f}",
        ]
        for lang, stats in sorted(self.per_language.items()):
            if stats.ref_len:
                lines.append(f"WER[{lang}] {stats.wer():.4f}  (N={stats.ref_len})")
            else:
                lines.append(f"WER[{lang}] n/a  (N=0, I={stats.insertions})")
        if worst_n:
            lines.append(f"worst {min(worst_n, len(self.utts))} utterances:")
            for u in self.worst(worst_n):
                lines.append(
                    f"  {u.utt_id} wer={u.wer():.4f} ref={u.reference!r} hyp={u.hypothesis!r}"
                )
        return "\n".join(lines)

    def to_records(self) -> str:
        rows = [
            json.dumps(
                {
                    "type": "summary",
                    "wer": self.wer,
                    "cer": self.cer,
                    "substitutions": self.edits.substitutions,
                    "deletions": self.edits.deletions,
                    "insertions": self.edits.insertions,
                    "ref_len": self.edits.ref_len,
                    "per_language": {
                        lang: {
                            "substitutions": s.substitutions,
                            "deletions": s.deletions,
                            "insertions": s.insertions,
                            "ref_len": s.ref_len,
                        }
                        for lang, s in sorted(self.per_language.items())
                    },
                },
                sort_keys=True,
            )
        ]
        for u in self.utts:
            rows.append(
                json.dumps(
                    {
                        "type": "utterance",
                        "id": u.utt_id,
                        "ref": u.reference,
                        "hyp": u.hypothesis,
                        "wer": u.stats.total_edits / u.stats.ref_len if u.stats.ref_len else None,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(rows)


def evaluate_hypotheses(
    utts: list[Utterance], hyps: dict, scheme: str = "plain"
) -> EvalReport:
    """Score hypotheses against manifest references on the plain view."""
    utt_scores = []
    edits = EditStats()
    per_lang: dict[str, EditStats] = {}
    cer_edits = 0
    cer_len = 0
    for utt in utts:
        if utt.id not in hyps:
            raise PipelineError(f"no hypothesis for utterance {utt.id!r}")
        reference = flat_transcript(utt)
        hypothesis = augment.plain_view(hyps[utt.id], scheme)
        stats = edit_distance(reference.split(), hypothesis.split())
        utt_scores.append(UttScore(utt.id, reference, hypothesis, stats))
        edits = edits + stats
        cer_stats = edit_distance(list(reference), list(hypothesis))
        cer_edits += cer_stats.total_edits
        cer_len += cer_stats.ref_len
        for lang, lang_stats in wer_by_language(
            augment.labeled_words(utt), hypothesis.split()
        ).items():
            per_lang[lang] = per_lang.get(lang, EditStats()) + lang_stats
    if edits.ref_len == 0:
        raise PipelineError("no reference tokens to score")
    return EvalReport(
        wer=edits.total_edits / edits.ref_len,
        cer=cer_edits / cer_len,
        edits=edits,
        per_language=per_lang,
        utts=utt_scores,
    )


def read_hypotheses(path: str | Path) -> dict:
    """Parse an ``id<TAB>text`` hypotheses file."""
    hyps: dict[str, str] = {}
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if "\t" not in line:
                raise PipelineError(f"line {line_no}: expected 'id<TAB>text'")
            utt_id, text = line.split("\t", 1)
            hyps[utt_id] = text
    return hyps


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _decode_one(
    matrix: LogitMatrix, vocab, params: DecodeParams | None
) -> str:
    if params is None:
        return greedy_decode(matrix, vocab)
    return beam_decode(matrix, vocab, params)[0].text


def run_pipeline(config: ExperimentConfig) -> EvalReport:
    """Execute one experiment; writes hypotheses, report, and run manifest."""
    utts = load_manifest(config.manifest)
    vocab = augment.read_vocab(config.vocab)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    logits_dir = Path(config.logits_dir)
    missing = [u.id for u in utts if not (logits_dir / f"{u.id}.cslg").is_file()]
    if missing:
        shown = ", ".join(missing[:20])
        more = "" if len(missing) <= 20 else f" (+{len(missing) - 20} more)"
        raise PipelineError(f"missing logit files for: {shown}{more}")

    lm_path = None
    params = None
    if config.lm_order > 0:
        sentences = [augment.render(u, config.scheme).split() for u in utts]
        model = lm.train(sentences, config.lm_order, config.smoothing)
        lm_path = out / f"lm-{config.lm_order}gram.arpa"
        lm.write_arpa(model, lm_path)
        params = DecodeParams(
            beam_width=config.beam_width,
            lm_weight=config.lm_weight,
            word_bonus=config.word_bonus,
            lm=model,
        )

    def decode_task(utt: Utterance) -> str:
        matrix, symbols = read_cslg(logits_dir / f"{utt.id}.cslg")
        if list(symbols) != list(vocab.symbols):
            raise PipelineError(
                f"vocabulary mismatch for {utt.id!r}: logit file has {len(symbols)} "
                f"symbols, vocab has {len(vocab.symbols)}"
            )
        return _decode_one(matrix, vocab, params)

    if config.workers == 1:
        texts = [decode_task(u) for u in utts]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            texts = list(pool.map(decode_task, utts))

    hyp_path = out / "hypotheses.tsv"
    with open(hyp_path, "w", encoding="utf-8") as handle:
        for utt, text in zip(utts, texts):
            handle.write(f"{utt.id}\t{text}\n")

    report = evaluate_hypotheses(utts, dict(zip((u.id for u in utts), texts)), config.scheme)
    report_path = out / "report.txt"
    report_path.write_text(report.to_text() + "\n", encoding="utf-8")
    (out / "report.jsonl").write_text(report.to_records() + "\n", encoding="utf-8")

    artifacts = {"hypotheses.tsv": _sha256(hyp_path)}
    if lm_path is not None:
        artifacts[lm_path.name] = _sha256(lm_path)
    run_manifest = {
        "config": {
            "manifest": str(config.manifest),
            "logits_dir": str(config.logits_dir),
            "vocab": str(config.vocab),
            "scheme": config.scheme,
            "lm_order": config.lm_order,
            "beam_width": config.beam_width,
            "lm_weight": config.lm_weight,
            "word_bonus": config.word_bonus,
            "smoothing": config.smoothing.kind,
            "workers": config.workers,
        },
        "seed": config.seed,
        "wer": report.wer,
        "artifacts": artifacts,
    }
    (out / "run.json").write_text(
        json.dumps(run_manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report


@dataclass
class LidUttScore:
    utt_id: str
    accuracy: float
    cross_entropy: float
    frames: int


@dataclass
class LidReport:
    accuracy: float
    cross_entropy: float
    utts: list

    def to_text(self) -> str:
        lines = [
            f"frame accuracy {self.accuracy:.4f}",
            f"cross-entropy {self.cross_entropy:.4f}",
        ]
        for u in self.utts:
            lines.append(
                f"  {u.utt_id} acc={u.accuracy:.4f} ce={u.cross_entropy:.4f} frames={u.frames}"
            )
        return "\n".join(lines)

    def to_records(self) -> str:
        rows = [
            json.dumps(
                {
                    "type": "summary",
                    "accuracy": self.accuracy,
                    "cross_entropy": self.cross_entropy,
                },
                sort_keys=True,
            )
        ]
        for u in self.utts:
            rows.append(
                json.dumps(
                    {
                        "type": "utterance",
                        "id": u.utt_id,
                        "accuracy": u.accuracy,
                        "cross_entropy": u.cross_entropy,
                        "frames": u.frames,
                    },
                    sort_keys=True,
                )
            )
        return "\n".join(rows)


def lid_eval_corpus(utts: list[Utterance], posteriors_dir: str | Path) -> LidReport:
    """Score frame-level language-ID posterior files against span labels."""
    posteriors_dir = Path(posteriors_dir)
    missing = [u.id for u in utts if not (posteriors_dir / f"{u.id}.cslg").is_file()]
    if missing:
        raise PipelineError(f"missing posterior files for: {', '.join(missing[:20])}")
    matched = 0
    counted = 0
    ce_total = 0.0
    ce_frames = 0
    utt_scores = []
    for utt in utts:
        matrix, classes = read_cslg(posteriors_dir / f"{utt.id}.cslg")
        post = np.exp(matrix.values)
        gold = frames_from_spans(utt, matrix.frame_rate, matrix.num_frames)
        pred_labels = tuple(classes[i] for i in np.argmax(post, axis=1))
        pred = FrameLabels(labels=pred_labels, frame_rate=matrix.frame_rate)
        pairs = [
            (p, g)
            for p, g in zip(pred.labels, gold.labels)
            if p != SILENCE and g != SILENCE
        ]
        utt_matched = sum(1 for p, g in pairs if p == g)
        ce = lid_cross_entropy(post, classes, gold)
        n_scored = sum(1 for g in gold.labels if g != SILENCE)
        utt_scores.append(
            LidUttScore(
                utt.id,
                utt_matched / len(pairs) if pairs else math.nan,
                ce,
                len(pairs),
            )
        )
        matched += utt_matched
        counted += len(pairs)
        ce_total += ce * n_scored
        ce_frames += n_scored
    if counted == 0:
        raise PipelineError("no non-silence frames to score")
    return LidReport(
        accuracy=matched / counted,
        cross_entropy=ce_total / ce_frames,
        utts=utt_scores,
    )
