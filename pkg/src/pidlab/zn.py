"""Ziegler-Nichols baseline tuning.

Open-loop route: characterize a step response as first-order-plus-dead-time
(FOPDT) with the two-point 28.3%/63.2% method, then apply the classical
open-loop table.  Closed-loop route: grow a proportional gain until the
loop sustains constant-amplitude oscillation, then apply the classical
closed-loop table.

Closed-loop rules implemented (kp, Ti, Td):
    P   ->  0.5*Ku,  inf,     0
    PI  ->  0.45*Ku, Pu/1.2,  0
    PID ->  0.6*Ku,  Pu/2,    Pu/8
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import fmean
from typing import Sequence

from .errors import (
    FitError,
    InvalidInputError,
    InvalidParameterError,
    NoUltimateGainError,
    NotSettledError,
    PlantDivergenceError,
    UltimateDivergenceError,
    UnboundedGainError,
)

# Sustained oscillation: this many successive peaks with pairwise amplitude
# ratios inside [1/PEAK_RATIO_TOL, PEAK_RATIO_TOL].
SUSTAINED_PEAKS = 6
PEAK_RATIO_TOL = 1.1
_OSC_DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class FopdtParams:
    """First-order-plus-dead-time characterization of a step response."""

    T: float
    L: float
    K_process: float

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidParameterError(f"time constant must be positive, got {self.T}")
        if self.L < 0:
            raise InvalidParameterError(f"dead time must be non-negative, got {self.L}")


@dataclass(frozen=True)
class UltimateParams:
    """Proportional gain and period of marginal closed-loop oscillation."""

    Ku: float
    Pu: float

    def __post_init__(self):
        if not (self.Ku > 0 and self.Pu > 0):
            raise InvalidParameterError("ultimate gain and period must be positive")


def _first_crossing(y: Sequence[float], threshold: float, ts: float) -> float | None:
    """Time of the first upward crossing of threshold, linearly interpolated
    between samples.  Sub-sample interpolation keeps the two-point fit usable
    on responses that settle within a handful of samples."""
    for k, v in enumerate(y):
        if v >= threshold:
            if k == 0:
                return 0.0
            prev = y[k - 1]
            frac = (threshold - prev) / (v - prev) if v != prev else 0.0
            return (k - 1 + frac) * ts
    return None


def fit_fopdt(step_response: Sequence[float], step_amplitude: float, ts: float) -> FopdtParams:
    """Two-point FOPDT fit of a settled step response.

    y_ss is the mean of the last 10% of samples (which must vary by < 1%);
    T = 1.5*(t_632 - t_283), L = max(0, t_632 - T), K = y_ss/amplitude.
    """
    n = len(step_response)
    if n < 10:
        raise InvalidInputError(f"need at least 10 samples to fit, got {n}")
    if step_amplitude == 0:
        raise InvalidInputError("step amplitude must be non-zero")
    if not ts > 0:
        raise InvalidInputError(f"sample time must be positive, got {ts}")
    tail = step_response[n - max(1, n // 10):]
    y_ss = fmean(tail)
    if y_ss == 0:
        raise FitError("steady-state value is zero; no gain to fit")
    if max(tail) - min(tail) > 0.01 * abs(y_ss):
        raise NotSettledError("last 10% of the response varies by more than 1%")

    # Normalize so negative-gain responses cross the same thresholds.
    normalized = [v / y_ss for v in step_response]
    t283 = _first_crossing(normalized, 0.283, ts)
    t632 = _first_crossing(normalized, 0.632, ts)
    if t283 is None or t632 is None:
        raise FitError("response never crossed the 28.3%/63.2% thresholds")
    if not t632 > t283:
        raise FitError(f"non-monotone crossings: t_283={t283:g}, t_632={t632:g}")
    T = 1.5 * (t632 - t283)
    L = max(0.0, t632 - T)
    return FopdtParams(T=T, L=L, K_process=y_ss / step_amplitude)


def zn_open_loop(f: FopdtParams, kind: str) -> tuple[float, float, float]:
    """Open-loop tuning table; returns (kp, Ti, Td) with Ti = inf for P."""
    if f.L == 0:
        raise UnboundedGainError("zero dead time makes the open-loop rules unbounded")
    ratio = f.T / f.L
    if kind == "P":
        return (ratio, math.inf, 0.0)
    if kind == "PI":
        return (0.9 * ratio, f.L / 0.3, 0.0)
    if kind == "PID":
        return (1.2 * ratio, 2.0 * f.L, 0.5 * f.L)
    raise InvalidParameterError(f"unknown controller kind {kind!r}")


def zn_closed_loop(u: UltimateParams, kind: str) -> tuple[float, float, float]:
    """Closed-loop (ultimate gain/period) tuning table."""
    if kind == "P":
        return (0.5 * u.Ku, math.inf, 0.0)
    if kind == "PI":
        return (0.45 * u.Ku, u.Pu / 1.2, 0.0)
    if kind == "PID":
        return (0.6 * u.Ku, u.Pu / 2.0, u.Pu / 8.0)
    raise InvalidParameterError(f"unknown controller kind {kind!r}")


def _peaks(y: Sequence[float]) -> list[tuple[float, float]]:
    """(position, height) of strict local maxima, refined by fitting a
    parabola through each maximum and its neighbors.

    Sub-sample refinement matters: when the oscillation period is not an
    integer number of samples, raw sampled peak heights wobble by more than
    the stationarity band even for perfectly constant-amplitude cycles.
    """
    out = []
    for i in range(1, len(y) - 1):
        a, b, c = y[i - 1], y[i], y[i + 1]
        if not (b > a and b > c):
            continue
        denom = a - 2.0 * b + c
        if denom == 0.0:
            out.append((float(i), b))
        else:
            offset = 0.5 * (a - c) / denom
            out.append((i + offset, b - 0.125 * (a - c) * (a - c) / denom))
    return out


def _sustained_oscillation(y_tail: Sequence[float]) -> float | None:
    """Mean peak spacing (in samples) if the tail holds sustained constant-
    amplitude oscillation, else None.

    Amplitude stationarity over the last SUSTAINED_PEAKS peaks, rather than
    zero-crossing counting, so decaying ringing is not declared sustained.
    Each crest is measured against the mean of the interleaved troughs:
    a settling transient shifts crests and troughs together, so the
    difference tracks the true oscillation envelope.
    """
    crests = _peaks(y_tail)
    troughs = [(pos, -height) for pos, height in _peaks([-v for v in y_tail])]
    if len(crests) < SUSTAINED_PEAKS or not troughs:
        return None
    last = crests[-SUSTAINED_PEAKS:]
    start = last[0][0]
    local_troughs = [h for pos, h in troughs if pos >= start] or [troughs[-1][1]]
    baseline = fmean(local_troughs)
    amps = [height - baseline for _, height in last]
    floor = 1e-8 * max(1.0, abs(baseline))
    if min(amps) <= floor:
        return None
    if max(amps) / min(amps) > PEAK_RATIO_TOL:
        return None
    spacings = [b[0] - a[0] for a, b in zip(last, last[1:])]
    return fmean(spacings)


def _p_only_response(plant, loop_index: int, kp: float, sim_len: int) -> list[float]:
    """Closed loop with a pure proportional controller on one channel, unit
    step reference on that channel, zero input elsewhere."""
    state = plant.initial_state()
    ys = []
    for _ in range(sim_len):
        y = plant.output(state)
        yi = y[loop_index]
        if not math.isfinite(yi) or abs(yi) > _OSC_DIVERGENCE_LIMIT:
            raise PlantDivergenceError(len(ys))
        u = [0.0] * plant.n_inputs
        u[loop_index] = kp * (1.0 - yi)
        u = plant.saturate(u)
        state, _ = plant.step(state, u)
        ys.append(yi)
    return ys


def find_ultimate(
    plant,
    loop_index: int,
    kp_start: float = 0.05,
    growth: float = 1.05,
    max_kp: float = 1000.0,
    sim_len: int = 2000,
    ts: float = 0.01,
) -> UltimateParams:
    """Grow a P-only gain geometrically until the selected loop sustains
    constant-amplitude oscillation; Ku is the first such gain, Pu the mean
    peak spacing times ts.

    The returned Ku is therefore accurate to within one growth factor.
    """
    if not kp_start > 0:
        raise InvalidParameterError(f"kp_start must be positive, got {kp_start}")
    if not growth > 1:
        raise InvalidParameterError(f"growth must exceed 1, got {growth}")
    if not 0 <= loop_index < plant.n_outputs:
        raise InvalidParameterError(f"loop index {loop_index} out of range")
    kp = kp_start
    prev_kp: float | None = None
    while kp <= max_kp:
        try:
            ys = _p_only_response(plant, loop_index, kp, sim_len)
        except PlantDivergenceError:
            raise UltimateDivergenceError(stable_kp=prev_kp, diverged_kp=kp) from None
        tail = ys[len(ys) // 3:]
        spacing = _sustained_oscillation(tail)
        if spacing is not None:
            return UltimateParams(Ku=kp, Pu=spacing * ts)
        prev_kp = kp
        kp *= growth
    raise NoUltimateGainError(
        f"no sustained oscillation on loop {loop_index} up to kp={max_kp:g}"
    )


def tuning_record(
    method: str, loop: int, kp: float, Ti: float, Td: float, fit: dict
) -> dict:
    """Serializable tuning result: {"method", "loop", "kp", "Ti", "Td", "fit"}."""
    return {
        "method": method,
        "loop": loop,
        "kp": kp,
        "Ti": None if math.isinf(Ti) else Ti,
        "Td": Td,
        "fit": fit,
    }
