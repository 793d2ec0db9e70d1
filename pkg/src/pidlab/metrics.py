"""Tracking-error indices and step-response statistics.

The three indices are plain discrete sums over all loops and steps (no
sample-time factor, which cannot change a tuner's argmin):

    IAE  = sum_k sum_i |e_i(k)|
    ISE  = sum_k sum_i e_i(k)^2
    ITSE = sum_k sum_i k * e_i(k)^2     (k zero-based, so the first sample
                                         has weight zero)

Step statistics use a 2% settling band, 10%->90% rise, and overshoot
measured against the reference (not the empirical final value, which may
carry steady-state error).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidInputError, NotSettledError, RiseTimeUndefinedError

SETTLING_BAND = 0.02
RISE_LO = 0.10
RISE_HI = 0.90


@dataclass(frozen=True)
class ErrorTrajectory:
    """Per-step error vectors (one component per loop) plus the sample time."""

    errors: tuple[tuple[float, ...], ...]
    ts: float

    def __post_init__(self):
        if len(self.errors) == 0:
            raise InvalidInputError("error trajectory must be non-empty")
        if not self.ts > 0:
            raise InvalidInputError(f"sample time must be positive, got {self.ts}")
        for k, row in enumerate(self.errors):
            for v in row:
                if not math.isfinite(v):
                    raise InvalidInputError(f"non-finite error at step {k}: {v!r}")


@dataclass(frozen=True)
class StepStats:
    overshoot_pct: float
    rise_time_s: float
    settling_time_s: float


def iae(traj: ErrorTrajectory) -> float:
    """Sum of absolute errors over all steps and loops."""
    return sum(abs(v) for row in traj.errors for v in row)


def ise(traj: ErrorTrajectory) -> float:
    """Sum of squared errors over all steps and loops."""
    return sum(v * v for row in traj.errors for v in row)


def itse(traj: ErrorTrajectory) -> float:
    """Sum of squared errors weighted by the zero-based step index."""
    return sum(k * v * v for k, row in enumerate(traj.errors) for v in row)


def _overshoot_pct(y: Sequence[float], reference: float) -> float:
    return 100.0 * max(0.0, max(y) - reference) / abs(reference)


def _rise_indices(y: Sequence[float], reference: float) -> tuple[int, int] | None:
    """First crossings of 10% and 90% of the reference, None if 90% never reached."""
    k10 = k90 = None
    for k, v in enumerate(y):
        frac = v / reference
        if k10 is None and frac >= RISE_LO:
            k10 = k
        if frac >= RISE_HI:
            k90 = k
            break
    if k90 is None:
        return None
    assert k10 is not None  # 10% crossing precedes 90%
    return k10, k90


def _last_outside_band(y: Sequence[float], reference: float) -> int | None:
    band = SETTLING_BAND * abs(reference)
    last = None
    for k, v in enumerate(y):
        if abs(v - reference) > band:
            last = k
    return last


def step_stats(y: Sequence[float], reference: float, ts: float) -> StepStats:
    """Overshoot, rise time and settling time of a step response.

    Raises RiseTimeUndefinedError if y never reaches 90% of the reference
    and NotSettledError if the trajectory ends outside the 2% band.
    """
    if reference == 0 or not math.isfinite(reference):
        raise InvalidInputError("reference must be finite and non-zero")
    if len(y) == 0:
        raise InvalidInputError("response must be non-empty")
    if not all(math.isfinite(v) for v in y):
        raise InvalidInputError("response contains non-finite samples")
    if not ts > 0:
        raise InvalidInputError(f"sample time must be positive, got {ts}")

    rise = _rise_indices(y, reference)
    if rise is None:
        raise RiseTimeUndefinedError("response never reached 90% of the reference")
    last_out = _last_outside_band(y, reference)
    if last_out is not None and last_out == len(y) - 1:
        raise NotSettledError("response ends outside the 2% settling band")
    return StepStats(
        overshoot_pct=_overshoot_pct(y, reference),
        rise_time_s=(rise[1] - rise[0]) * ts,
        settling_time_s=0.0 if last_out is None else (last_out + 1) * ts,
    )


def step_stats_record(y: Sequence[float], reference: float, ts: float) -> dict:
    """Serializable step statistics that tolerate undefined rise/settling.

    Overshoot is always computable; rise and settling become None with an
    ``error`` tag when undefined.  This is the shape stored in experiment
    reports.
    """
    if reference == 0 or not math.isfinite(reference):
        raise InvalidInputError("reference must be finite and non-zero")
    if len(y) == 0:
        raise InvalidInputError("response must be non-empty")
    record: dict = {
        "overshoot_pct": _overshoot_pct(y, reference),
        "rise_time_s": None,
        "settling_time_s": None,
        "error": None,
    }
    rise = _rise_indices(y, reference)
    if rise is not None:
        record["rise_time_s"] = (rise[1] - rise[0]) * ts
    last_out = _last_outside_band(y, reference)
    if last_out is None:
        record["settling_time_s"] = 0.0
    elif last_out < len(y) - 1:
        record["settling_time_s"] = (last_out + 1) * ts
    if rise is None:
        record["error"] = "rise-time-undefined"
    elif record["settling_time_s"] is None:
        record["error"] = "not-settled"
    return record
