"""Fingerprint distance, the threshold rule, calibration and accuracy tallies."""

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .errors import CalibrationOverlap, EmptyCalibrationSet, MalformedDocument

__all__ = [
    "ConfusionMatrix",
    "ProximityDecision",
    "ProximityDistance",
    "ThresholdPolicy",
    "calibrate",
    "decide",
    "euclidean_distance",
    "euclidean_distances",
    "tally",
]


@dataclass(frozen=True, order=True)
class ProximityDistance:
    value: float
    n_dims: int = 1

    def __post_init__(self):
        if not (self.value >= 0.0 and math.isfinite(self.value)):
            raise ValueError(f"distance must be finite and >= 0, got {self.value!r}")
        if self.n_dims < 1:
            raise ValueError("n_dims must be >= 1")

    def __float__(self):
        return float(self.value)


class ProximityDecision(str, Enum):
    ACCEPT = "accept"
    REJECT = "reject"

    @property
    def accepted(self):
        return self is ProximityDecision.ACCEPT


@dataclass(frozen=True)
class ThresholdPolicy:
    """Distance threshold, relaxed multiplicatively by ``tolerance``.

    ``overlap`` is set by :func:`calibrate` when the near and far calibration
    sets were not separable; it is not serialized.
    """

    threshold: float
    tolerance: float = 0.0
    overlap: bool = field(default=False, compare=False)

    def __post_init__(self):
        for name in ("threshold", "tolerance"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be a finite non-negative number, got {v!r}")
            object.__setattr__(self, name, float(v))

    @property
    def effective_threshold(self):
        return self.threshold * (1.0 + self.tolerance)

    def with_tolerance(self, tolerance):
        return ThresholdPolicy(self.threshold, tolerance, self.overlap)

    def to_dict(self):
        return {"threshold": self.threshold, "tolerance": self.tolerance}

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "threshold" not in d:
            raise MalformedDocument("policy must be an object with a 'threshold' field")
        try:
            return cls(d["threshold"], d.get("tolerance", 0.0))
        except ValueError as exc:
            raise MalformedDocument(str(exc)) from None

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def loads(cls, raw):
        try:
            return cls.from_dict(json.loads(raw))
        except json.JSONDecodeError as exc:
            raise MalformedDocument(f"invalid policy JSON: {exc}") from None


def euclidean_distance(p):
    """Euclidean norm of the RSSI difference of an :class:`AlignedPair`, in dB."""
    return ProximityDistance(math.sqrt(_kernels.sq_distance(p.rssi_a, p.rssi_b)), len(p.bssids))


def euclidean_distances(rssi_a, rssi_b):
    """Row-wise distances for two (k, n) arrays of already-aligned RSSI vectors."""
    return np.sqrt(_kernels.row_sq_distances(rssi_a, rssi_b))


def decide(d, policy):
    # strictly below: d == effective threshold is a rejection
    if float(d) < policy.effective_threshold:
        return ProximityDecision.ACCEPT
    return ProximityDecision.REJECT


def _values(ds):
    out = [float(d) for d in ds]
    for v in out:
        if not math.isfinite(v):
            raise ValueError(f"calibration distance is not finite: {v!r}")
    return out


def calibrate(near, far=None):
    """Derive a threshold from co-located ("near") and separated ("far") pair distances.

    Without far samples the threshold is the largest near distance. With
    separable far samples it is the midpoint of the gap. Overlapping sets fall
    back to the largest near distance and raise a :class:`CalibrationOverlap`
    warning.
    """
    near_v = _values(near)
    if not near_v:
        raise EmptyCalibrationSet("calibration needs at least one near distance")
    hi_near = max(near_v)
    far_v = _values(far) if far is not None else []
    if not far_v:
        return ThresholdPolicy(hi_near, 0.0)
    lo_far = min(far_v)
    if lo_far > hi_near:
        return ThresholdPolicy((hi_near + lo_far) / 2.0, 0.0)
    warnings.warn(
        f"near max {hi_near:.3f} >= far min {lo_far:.3f}; using near max as threshold",
        CalibrationOverlap,
        stacklevel=2,
    )
    return ThresholdPolicy(hi_near, 0.0, overlap=True)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Outcome cells: true success, true failure, false success, false failure.

    Cells are counts for tallied outcomes; they may also hold rates (e.g. the
    published percentages), in which case ``accuracy`` is still well defined.
    """

    ts: float = 0
    tf: float = 0
    fs: float = 0
    ff: float = 0

    @property
    def n(self):
        return self.ts + self.tf + self.fs + self.ff

    @property
    def accuracy(self):
        n = self.n
        return (self.ts + self.tf) / n if n > 0 else 0.0

    def to_dict(self):
        return {
            "ts": self.ts,
            "tf": self.tf,
            "fs": self.fs,
            "ff": self.ff,
            "accuracy": round(self.accuracy, 4),
        }

    def __add__(self, other):
        return ConfusionMatrix(self.ts + other.ts, self.tf + other.tf, self.fs + other.fs, self.ff + other.ff)


def tally(outcomes):
    """Count ``(decision, within_range)`` pairs into a :class:`ConfusionMatrix`."""
    ts = tf = fs = ff = 0
    for decision, within in outcomes:
        accepted = ProximityDecision(decision).accepted
        if accepted and within:
            ts += 1
        elif not accepted and not within:
            tf += 1
        elif accepted:
            fs += 1
        else:
            ff += 1
    return ConfusionMatrix(ts, tf, fs, ff)
