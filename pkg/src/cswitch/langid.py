"""Frame-level language identification: gold labels from span timestamps,
accuracy and cross-entropy metrics, and the weighted multi-task loss that
combines a CTC term with a language-ID term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .corpus import Utterance
from .errors import LidError

SILENCE = "sil"

DEFAULT_FRAME_RATE = 50.0  # 20 ms frames


@dataclass(frozen=True)
class FrameLabels:
    """Per-frame labels over {eng, Bantu-of-pair, sil}."""

    labels: tuple[str, ...]
    frame_rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(self.labels))
        if not self.frame_rate > 0:
            raise LidError(f"frame rate must be positive, got {self.frame_rate}")

    def __len__(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class MultiTaskWeights:
    """Loss mix for joint CTC + language-ID training; CTC always dominates."""

    ctc_weight: float

    def __post_init__(self) -> None:
        if not 0.5 < self.ctc_weight <= 1.0:
            raise LidError(
                f"ctc_weight must lie in (0.5, 1.0], got {self.ctc_weight}"
            )


def frames_from_spans(
    utt: Utterance, frame_rate: float = DEFAULT_FRAME_RATE, num_frames: int | None = None
) -> FrameLabels:
    """Label each frame with the language owning the majority of its interval.

    Frame i covers [i/rate, (i+1)/rate). Frames outside every span are
    silence; overlap ties go to the earlier span.
    """
    if not frame_rate > 0:
        raise LidError(f"frame rate must be positive, got {frame_rate}")
    if num_frames is None:
        num_frames = max(1, math.ceil(utt.duration_s * frame_rate - 1e-9))
    if num_frames < 1:
        raise LidError(f"need at least one frame, got {num_frames}")
    labels = []
    for i in range(num_frames):
        lo = i / frame_rate
        hi = (i + 1) / frame_rate
        best_lang = SILENCE
        best_overlap = 0.0
        for span in utt.spans:
            overlap = min(hi, span.end_s) - max(lo, span.start_s)
            if overlap > best_overlap + 1e-12:
                best_overlap = overlap
                best_lang = span.lang
        labels.append(best_lang)
    return FrameLabels(labels=tuple(labels), frame_rate=frame_rate)


def lid_accuracy(
    pred: FrameLabels, gold: FrameLabels, ignore_silence: bool = True
) -> float:
    """Fraction of matching frames.

    With ``ignore_silence`` (the default) frames marked silence on either
    side are excluded from both numerator and denominator, which keeps the
    metric symmetric in its arguments.
    """
    if len(pred) != len(gold):
        raise LidError(
            f"length mismatch: {len(pred)} predicted vs {len(gold)} gold frames"
        )
    if ignore_silence:
        pairs = [
            (p, g)
            for p, g in zip(pred.labels, gold.labels)
            if p != SILENCE and g != SILENCE
        ]
    else:
        pairs = list(zip(pred.labels, gold.labels))
    if not pairs:
        raise LidError("no frames left to score")
    matches = sum(1 for p, g in pairs if p == g)
    return matches / len(pairs)


def lid_cross_entropy(posteriors, classes, gold: FrameLabels) -> float:
    """Mean negative log posterior of the gold label over non-silence frames.

    ``posteriors`` holds one probability row per frame over ``classes``.
    """
    post = np.asarray(posteriors, dtype=np.float64)
    if post.ndim != 2:
        raise LidError(f"posteriors must be 2-D, got shape {post.shape}")
    if post.shape[0] != len(gold):
        raise LidError(
            f"length mismatch: {post.shape[0]} posterior rows vs {len(gold)} gold frames"
        )
    if post.shape[1] != len(classes):
        raise LidError(
            f"{post.shape[1]} posterior columns but {len(classes)} class names"
        )
    sums = post.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-6:
        frame = int(np.abs(sums - 1.0).argmax())
        raise LidError(f"posterior row {frame} sums to {sums[frame]:.8f}, not 1")
    index = {name: i for i, name in enumerate(classes)}
    total = 0.0
    counted = 0
    for t, label in enumerate(gold.labels):
        if label == SILENCE:
            continue
        if label not in index:
            raise LidError(f"gold label {label!r} not among classes {list(classes)}")
        p = float(post[t, index[label]])
        total += -math.log(p) if p > 0 else math.inf
        counted += 1
    if counted == 0:
        raise LidError("all frames are silence; nothing to score")
    return total / counted


def multitask_loss(l_ctc: float, l_lid: float, weights: MultiTaskWeights) -> float:
    """Weighted sum of the two task losses: w*ctc + (1-w)*lid."""
    if not 0.5 < weights.ctc_weight <= 1.0:
        raise LidError(f"ctc_weight must lie in (0.5, 1.0], got {weights.ctc_weight}")
    if l_ctc < 0 or l_lid < 0:
        raise LidError("losses must be nonnegative")
    w = weights.ctc_weight
    return w * l_ctc + (1.0 - w) * l_lid
