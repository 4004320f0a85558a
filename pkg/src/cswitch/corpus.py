"""Data model and manifest I/O for code-switched utterances.

A corpus is a line-delimited UTF-8 manifest, one JSON record per line with
keys ``id``, ``audio`` (optional), ``lang_pair``, ``duration``, ``spans``.
Each span has ``lang``, ``start``, ``end``, ``text``. Times are written with
three decimal places (millisecond precision). Transcripts are stored
lowercase-plain; cased and tagged views are derived, never stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ManifestError

LANGUAGES = ("eng", "zul", "xho", "sot", "tsn")
LANG_PAIRS = ("zul-eng", "xho-eng", "sot-eng", "tsn-eng")


def bantu_of(lang_pair: str) -> str:
    """The non-English member of a language pair."""
    if lang_pair not in LANG_PAIRS:
        raise ManifestError(f"unknown lang_pair {lang_pair!r}")
    return lang_pair.split("-")[0]


@dataclass(frozen=True)
class LanguageSpan:
    """A timestamped, language-labeled stretch of transcript."""

    lang: str
    start_s: float
    end_s: float
    text: str

    def __post_init__(self) -> None:
        if self.lang not in LANGUAGES:
            raise ManifestError(f"span language {self.lang!r} is not one of {LANGUAGES}")
        if not self.start_s >= 0:
            raise ManifestError(f"span start {self.start_s} must be >= 0")
        if not self.end_s > self.start_s:
            raise ManifestError(f"span end {self.end_s} must exceed start {self.start_s}")
        t = self.text
        if not t:
            raise ManifestError("span text must be non-empty")
        if t != t.strip(" "):
            raise ManifestError(f"span text {t!r} has leading/trailing space")
        if "  " in t:
            raise ManifestError(f"span text {t!r} contains a double space")
        if "<" in t or ">" in t:
            raise ManifestError(f"span text {t!r} contains a tag delimiter")

    @property
    def words(self) -> list[str]:
        return self.text.split(" ")


@dataclass(frozen=True)
class Utterance:
    """One corpus record: ordered non-overlapping spans inside an audio clip."""

    id: str
    lang_pair: str
    duration_s: float
    spans: tuple[LanguageSpan, ...]
    audio_ref: str | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ManifestError("utterance id must be non-empty")
        if self.lang_pair not in LANG_PAIRS:
            raise ManifestError(
                f"utterance {self.id!r}: lang_pair {self.lang_pair!r} is not one of {LANG_PAIRS}"
            )
        if not self.duration_s > 0:
            raise ManifestError(f"utterance {self.id!r}: duration must be positive")
        object.__setattr__(self, "spans", tuple(self.spans))
        allowed = {"eng", bantu_of(self.lang_pair)}
        prev_end = 0.0
        for i, span in enumerate(self.spans):
            if span.lang not in allowed:
                raise ManifestError(
                    f"utterance {self.id!r}: span language {span.lang!r} not in pair {self.lang_pair}"
                )
            if i > 0 and span.start_s < prev_end:
                raise ManifestError(
                    f"utterance {self.id!r}: spans overlap at {span.start_s:.3f}s"
                )
            prev_end = span.end_s
        if self.spans and prev_end > self.duration_s + 1e-9:
            raise ManifestError(
                f"utterance {self.id!r}: last span ends at {prev_end:.3f}s, "
                f"after duration {self.duration_s:.3f}s"
            )


def flat_transcript(utt: Utterance) -> str:
    """Span texts joined by single spaces, in span order."""
    return " ".join(span.text for span in utt.spans)


@dataclass
class CorpusStats:
    """Utterance counts and summed duration (hours) per language pair."""

    counts: dict[str, int] = field(default_factory=dict)
    hours: dict[str, float] = field(default_factory=dict)

    def rows(self) -> list[tuple[str, int, float]]:
        """(pair, count, hours rounded to 2 decimals) for every pair."""
        return [
            (pair, self.counts.get(pair, 0), round(self.hours.get(pair, 0.0), 2))
            for pair in LANG_PAIRS
        ]


def corpus_stats(utts: Iterable[Utterance]) -> CorpusStats:
    """Count utterances and sum durations per pair.

    Durations are summed with exact compensated summation so the result does
    not depend on record order even at 1e5-record scale.
    """
    per_pair: dict[str, list[float]] = {pair: [] for pair in LANG_PAIRS}
    counts = {pair: 0 for pair in LANG_PAIRS}
    for utt in utts:
        counts[utt.lang_pair] += 1
        per_pair[utt.lang_pair].append(utt.duration_s)
    hours = {pair: math.fsum(durs) / 3600.0 for pair, durs in per_pair.items()}
    return CorpusStats(counts=counts, hours=hours)


def _require(record: dict, key: str, line_no: int):
    if key not in record:
        raise ManifestError(f"line {line_no}: missing field {key!r}")
    return record[key]


def _parse_record(record: dict, line_no: int) -> Utterance:
    utt_id = _require(record, "id", line_no)
    if not isinstance(utt_id, str):
        raise ManifestError(f"line {line_no}: field 'id' must be a string")
    lang_pair = _require(record, "lang_pair", line_no)
    duration = _require(record, "duration", line_no)
    if not isinstance(duration, (int, float)) or isinstance(duration, bool):
        raise ManifestError(f"line {line_no}: field 'duration' must be a number")
    raw_spans = _require(record, "spans", line_no)
    if not isinstance(raw_spans, list):
        raise ManifestError(f"line {line_no}: field 'spans' must be an array")
    spans = []
    for j, raw in enumerate(raw_spans):
        if not isinstance(raw, dict):
            raise ManifestError(f"line {line_no}: span {j} must be an object")
        for key in ("lang", "start", "end", "text"):
            if key not in raw:
                raise ManifestError(f"line {line_no}: span {j} missing field {key!r}")
        for key in ("start", "end"):
            if not isinstance(raw[key], (int, float)) or isinstance(raw[key], bool):
                raise ManifestError(f"line {line_no}: span {j} field {key!r} must be a number")
        spans.append(
            LanguageSpan(
                lang=raw["lang"],
                start_s=float(raw["start"]),
                end_s=float(raw["end"]),
                text=raw["text"],
            )
        )
    audio = record.get("audio")
    if audio is not None and not isinstance(audio, str):
        raise ManifestError(f"line {line_no}: field 'audio' must be a string")
    return Utterance(
        id=utt_id,
        lang_pair=lang_pair,
        duration_s=float(duration),
        spans=tuple(spans),
        audio_ref=audio,
    )


def iter_manifest(path: str | Path) -> Iterator[Utterance]:
    """Stream utterances from a manifest without loading the whole file."""
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            line = line.strip("\n")
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"line {line_no}: not valid JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise ManifestError(f"line {line_no}: record must be a JSON object")
            utt = _parse_record(record, line_no)
            if utt.id in seen:
                raise ManifestError(f"line {line_no}: duplicate utterance id {utt.id!r}")
            seen.add(utt.id)
            yield utt


def load_manifest(path: str | Path) -> list[Utterance]:
    """Load and validate a whole manifest, preserving record order."""
    return list(iter_manifest(path))


def _span_json(span: LanguageSpan) -> str:
    return (
        f'{{"lang": {json.dumps(span.lang)}, "start": {span.start_s:.3f}, '
        f'"end": {span.end_s:.3f}, "text": {json.dumps(span.text, ensure_ascii=False)}}}'
    )


def record_line(utt: Utterance) -> str:
    """Serialize one utterance in canonical key order with 3-decimal times."""
    parts = [f'"id": {json.dumps(utt.id)}']
    if utt.audio_ref is not None:
        parts.append(f'"audio": {json.dumps(utt.audio_ref)}')
    parts.append(f'"lang_pair": {json.dumps(utt.lang_pair)}')
    parts.append(f'"duration": {utt.duration_s:.3f}')
    parts.append('"spans": [' + ", ".join(_span_json(s) for s in utt.spans) + "]")
    return "{" + ", ".join(parts) + "}"


def write_manifest(utts: Iterable[Utterance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for utt in utts:
            handle.write(record_line(utt))
            handle.write("\n")
