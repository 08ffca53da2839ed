"""Error rates, eavesdropper accuracy and plug-in mutual information."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .protocols import RoundRecord

DEFAULT_THRESHOLD = 0.05


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix2:
    n00: int = 0
    n01: int = 0
    n10: int = 0
    n11: int = 0

    def __post_init__(self):
        if min(self.n00, self.n01, self.n10, self.n11) < 0:
            raise ValueError("counts must be nonnegative")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, int]]) -> ConfusionMatrix2:
        n = [0, 0, 0, 0]
        for x, y in pairs:
            n[2 * x + y] += 1
        return cls(*n)

    @property
    def total(self) -> int:
        return self.n00 + self.n01 + self.n10 + self.n11

    def transposed(self) -> ConfusionMatrix2:
        return ConfusionMatrix2(self.n00, self.n10, self.n01, self.n11)


@dataclass(frozen=True)
class DetectionVerdict:
    qber: float
    threshold: float
    detected: bool


def completed(records: Iterable[RoundRecord]) -> list[RoundRecord]:
    return [r for r in records if not r.aborted]


def qber(records: Sequence[RoundRecord]) -> float:
    """Fraction of completed rounds where Bob's key bit differs from Alice's."""
    done = completed(records)
    if not done:
        raise AnalysisError("QBER is undefined without completed rounds")
    return sum(r.k_bob != r.k_alice for r in done) / len(done)


def eve_accuracy(records: Sequence[RoundRecord]) -> float:
    guessed = [r for r in completed(records) if r.eve_guess is not None]
    if not guessed:
        raise AnalysisError("no eavesdropper guesses were recorded")
    return sum(r.eve_guess == r.k_alice for r in guessed) / len(guessed)


def entropy(probs: Iterable[float]) -> float:
    return -sum(p * math.log2(p) for p in probs if p > 0)


def binary_entropy(p: float) -> float:
    return entropy((p, 1.0 - p))


def mutual_information(m: ConfusionMatrix2) -> float:
    """Plug-in estimate of I(X;Y) in bits, with 0 log 0 = 0."""
    n = m.total
    if n <= 0:
        raise AnalysisError("mutual information needs at least one sample")
    joint = ((m.n00, m.n01), (m.n10, m.n11))
    px = [(joint[x][0] + joint[x][1]) / n for x in (0, 1)]
    py = [(joint[0][y] + joint[1][y]) / n for y in (0, 1)]
    info = 0.0
    for x in (0, 1):
        for y in (0, 1):
            pxy = joint[x][y] / n
            if pxy > 0:
                info += pxy * math.log2(pxy / (px[x] * py[y]))
    # plug-in sums can land a rounding error below 0 for independent counts
    return max(0.0, info)


def key_confusion(records: Sequence[RoundRecord]) -> ConfusionMatrix2:
    return ConfusionMatrix2.from_pairs((r.k_alice, r.k_bob) for r in completed(records))


def eve_confusion(records: Sequence[RoundRecord]) -> ConfusionMatrix2:
    return ConfusionMatrix2.from_pairs(
        (r.k_alice, r.eve_guess) for r in completed(records) if r.eve_guess is not None
    )


def detection_verdict(qber_value: float, threshold: float = DEFAULT_THRESHOLD) -> DetectionVerdict:
    """Flag an eavesdropper when the error rate strictly exceeds the threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return DetectionVerdict(qber_value, threshold, qber_value > threshold)
