"""PSNR-threshold baseline for p% JND prediction, plus PSNR from pixel data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class PsnrCurve:
    """PSNR in dB at distortion levels 1..N for one image."""

    image_id: int
    psnr: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.psnr, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("PSNR curve must be a nonempty 1-D sequence")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
            raise DomainError("PSNR values must be finite and positive")
        object.__setattr__(self, "psnr", arr)

    @property
    def n_levels(self) -> int:
        return int(self.psnr.size)

    def at(self, level: int) -> float:
        if not (1 <= level <= self.n_levels):
            raise DomainError(f"level {level} outside curve range 1..{self.n_levels}")
        return float(self.psnr[level - 1])


class BaselinePrediction(NamedTuple):
    level: int
    saturated: bool  # PSNR never dropped to the threshold; clamped at N


def psnr_db(reference, distorted, max_value: float = 255.0) -> float:
    """10 log10(max^2 / MSE) with the MSE averaged over all pixels and channels.

    Identical inputs (zero MSE) return the +inf sentinel.
    """
    ref = np.asarray(reference, dtype=float)
    dist = np.asarray(distorted, dtype=float)
    if ref.shape != dist.shape:
        raise DomainError(f"shape mismatch: {ref.shape} vs {dist.shape}")
    if max_value <= 0:
        raise DomainError("max_value must be positive")
    mse = float(np.mean((ref - dist) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def baseline_threshold(train_psnr_at_jnd) -> float:
    vals = np.asarray(train_psnr_at_jnd, dtype=float).ravel()
    if vals.size == 0:
        raise DomainError("threshold needs at least one training PSNR value")
    return float(np.mean(vals))


def predict_jnd_baseline(curve: PsnrCurve, t: float) -> BaselinePrediction:
    """Smallest level whose PSNR has dropped to the threshold, scanning 1, 2, ...

    Mirrors the increment-and-reencode loop: stop at the first level D with
    psnr(D) <= t.  Curves need not be monotone; the first crossing wins.  If
    no level satisfies the threshold the prediction saturates at N.
    """
    hit = np.nonzero(curve.psnr <= t)[0]
    if hit.size == 0:
        return BaselinePrediction(level=curve.n_levels, saturated=True)
    return BaselinePrediction(level=int(hit[0]) + 1, saturated=False)
