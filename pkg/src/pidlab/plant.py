"""Discrete-time two-input/two-output nonlinear benchmark plant.

The plant is a pair of coupled second-order difference equations with a
rational nonlinearity on output 1 and a sine nonlinearity on output 2:

    y1(k) = a1*y1(k-1)*y2(k-1) / (1 + a2*y1(k-1)^2 + a3*y2(k-1)^2)
            + a4*u1(k-2) + a5*u1(k-1) + a6*u2(k-1)
    y2(k) = b1*y2(k-1)*sin(y2(k-2)) / (1 + b2*y2(k-1)^2 + b3*y1(k-1)^2)
            + b4*u2(k-2) + b5*u2(k-1) + b6*u1(k-1)

The plant is purely discrete: time is a step index k, and a sample time is
attached only when results are reported in seconds.  All operations are
pure functions over immutable state, so simulations can run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Sequence

from .errors import ConfigurationError, InvalidInputError, PlantDivergenceError

# Output magnitude beyond which a simulation is declared diverged.  Gain
# search explores destabilizing controllers, so this must fail fast rather
# than silently produce inf/NaN.
DIVERGENCE_LIMIT = 1e6


@dataclass(frozen=True)
class PlantParams:
    """Coefficients of the two output equations.  Defaults are the standard
    benchmark values."""

    a1: float = 0.7
    a2: float = 1.0
    a3: float = 1.0
    a4: float = 0.3
    a5: float = 1.0
    a6: float = 0.2
    b1: float = 0.5
    b2: float = 1.0
    b3: float = 1.0
    b4: float = 0.5
    b5: float = 1.0
    b6: float = 0.2

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise InvalidInputError(f"plant parameter {f.name} is not finite: {v!r}")


@dataclass(frozen=True)
class PlantState:
    """Last two samples of each output and input, plus the step index.

    Histories are stored oldest-first: ``y1_hist == (y1(k-2), y1(k-1))``.
    """

    y1_hist: tuple[float, float] = (0.0, 0.0)
    y2_hist: tuple[float, float] = (0.0, 0.0)
    u1_hist: tuple[float, float] = (0.0, 0.0)
    u2_hist: tuple[float, float] = (0.0, 0.0)
    k: int = 0

    def __post_init__(self):
        for name in ("y1_hist", "y2_hist", "u1_hist", "u2_hist"):
            h = getattr(self, name)
            if len(h) != 2:
                raise InvalidInputError(f"{name} must hold exactly 2 samples, got {len(h)}")
            if not all(math.isfinite(v) for v in h):
                raise InvalidInputError(f"{name} contains a non-finite sample: {h!r}")
        if self.k < 0:
            raise InvalidInputError(f"step index must be non-negative, got {self.k}")


@dataclass(frozen=True)
class InputBounds:
    """Symmetric actuator saturation limits."""

    lo: float = -2.0
    hi: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise InvalidInputError("input bounds must be finite")
        if not self.lo < self.hi:
            raise InvalidInputError(f"input bounds require lo < hi, got [{self.lo}, {self.hi}]")


@dataclass(frozen=True)
class Sample:
    """One logged simulation step: inputs applied at k and the output seen at k."""

    k: int
    u: tuple[float, ...]
    y: tuple[float, ...]


def saturate(u: Sequence[float], bounds: InputBounds) -> tuple[float, ...]:
    """Clamp every input component into [lo, hi]."""
    out = []
    for i, v in enumerate(u):
        if not math.isfinite(v):
            raise InvalidInputError(f"input component {i} is not finite: {v!r}")
        out.append(min(max(v, bounds.lo), bounds.hi))
    return tuple(out)


def output(state: PlantState, params: PlantParams) -> tuple[float, float]:
    """Output at the current step, computed purely from the state histories.

    The current inputs do not enter: both equations carry at least one step
    of delay, which is what lets a feedback loop read y(k) before choosing
    u(k).
    """
    p = params
    y1m2, y1m1 = state.y1_hist
    y2m2, y2m1 = state.y2_hist
    u1m2, u1m1 = state.u1_hist
    u2m2, u2m1 = state.u2_hist
    y1 = (
        p.a1 * y1m1 * y2m1 / (1.0 + p.a2 * y1m1 * y1m1 + p.a3 * y2m1 * y2m1)
        + p.a4 * u1m2
        + p.a5 * u1m1
        + p.a6 * u2m1
    )
    y2 = (
        p.b1 * y2m1 * math.sin(y2m2) / (1.0 + p.b2 * y2m1 * y2m1 + p.b3 * y1m1 * y1m1)
        + p.b4 * u2m2
        + p.b5 * u2m1
        + p.b6 * u1m1
    )
    return (y1, y2)


def plant_step(
    state: PlantState, params: PlantParams, u: Sequence[float]
) -> tuple[PlantState, tuple[float, float]]:
    """Advance one step: return y(k) from the current histories and the state
    with u and y shifted in.

    The caller is responsible for saturating ``u`` first, so that what is
    logged is what was actually applied.
    """
    if len(u) != 2:
        raise InvalidInputError(f"expected 2 input components, got {len(u)}")
    y1, y2 = output(state, params)
    if (
        not (math.isfinite(y1) and math.isfinite(y2))
        or abs(y1) > DIVERGENCE_LIMIT
        or abs(y2) > DIVERGENCE_LIMIT
    ):
        raise PlantDivergenceError(state.k)
    new_state = PlantState(
        y1_hist=(state.y1_hist[1], y1),
        y2_hist=(state.y2_hist[1], y2),
        u1_hist=(state.u1_hist[1], float(u[0])),
        u2_hist=(state.u2_hist[1], float(u[1])),
        k=state.k + 1,
    )
    return new_state, (y1, y2)


def simulate_open_loop(
    params: PlantParams,
    u_sequence: Sequence[Sequence[float]],
    bounds: InputBounds = InputBounds(),
) -> list[Sample]:
    """Drive the plant with a fixed input sequence from zero initial state.

    Inputs are saturated before application; divergence propagates as an
    error.  Row k logs the applied u(k) and the output y(k) observed at the
    same step.
    """
    if len(u_sequence) == 0:
        raise InvalidInputError("input sequence must be non-empty")
    state = PlantState()
    samples: list[Sample] = []
    for k, u in enumerate(u_sequence):
        u_sat = saturate(u, bounds)
        state, y = plant_step(state, params, u_sat)
        samples.append(Sample(k=k, u=u_sat, y=y))
    return samples


def trajectory_to_csv(samples: Sequence[Sample], ts: float) -> str:
    """Render a trajectory as CSV with header ``k,t,u1,u2,y1,y2``.

    t = k*ts; values carry 12 significant digits.
    """
    lines = ["k,t,u1,u2,y1,y2"]
    for s in samples:
        lines.append(
            f"{s.k},{s.k * ts:.12g},{s.u[0]:.12g},{s.u[1]:.12g},{s.y[0]:.12g},{s.y[1]:.12g}"
        )
    return "\n".join(lines) + "\n"


def parse_trajectory_csv(text: str) -> list[Sample]:
    """Parse the ``k,t,u1,u2,y1,y2`` trajectory format back into samples."""
    lines = [ln for ln in text.strip().splitlines() if ln]
    if not lines or lines[0].split(",") != ["k", "t", "u1", "u2", "y1", "y2"]:
        raise ConfigurationError("trajectory CSV must start with header k,t,u1,u2,y1,y2")
    samples = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 6:
            raise ConfigurationError(f"malformed trajectory row: {ln!r}")
        k = int(parts[0])
        u = (float(parts[2]), float(parts[3]))
        y = (float(parts[4]), float(parts[5]))
        samples.append(Sample(k=k, u=u, y=y))
    return samples


class BenchmarkPlant:
    """Generic discrete-plant interface over the benchmark equations.

    Tuners and loops only rely on ``n_inputs``/``n_outputs``,
    ``initial_state``, ``output``, ``step`` and ``saturate``, so test
    doubles with the same surface can stand in for the real plant.
    """

    n_inputs = 2
    n_outputs = 2

    def __init__(self, params: PlantParams = PlantParams(), bounds: InputBounds = InputBounds()):
        self.params = params
        self.bounds = bounds

    def initial_state(self) -> PlantState:
        return PlantState()

    def output(self, state: PlantState) -> tuple[float, float]:
        return output(state, self.params)

    def step(self, state: PlantState, u: Sequence[float]) -> tuple[PlantState, tuple[float, float]]:
        return plant_step(state, self.params, u)

    def saturate(self, u: Sequence[float]) -> tuple[float, ...]:
        return saturate(u, self.bounds)
