"""Particle swarm optimizer with linearly decaying inertia.

Velocity and position updates (componentwise, minimization):

    v' = w*v + c1*r1*(pbest - x) + c2*r2*(gbest - x),  clamped to +/-v_max
    x' = clamp(x + v', lo, hi)
    w(t) = w_max - (w_max - w_min)/max_iter * t

Reproducibility contract: all random draws come from one seeded generator
in a fixed order: initial positions (particle-major, one vector per
particle), then initial velocities (particle-major), then per iteration and
per particle the r1 vector followed by the r2 vector.  Draws happen
single-threaded even when objective evaluations run concurrently, so equal
seeds give bitwise-identical results.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, InvalidInputError, ObjectiveError

THREADS_ENV_VAR = "PSO_PID_THREADS"


@dataclass(frozen=True)
class PsoConfig:
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    pop_size: int = 20
    max_iter: int = 30
    c1: float = 2.0
    c2: float = 2.0
    w_min: float = 0.5
    w_max: float = 0.9
    v_max: tuple[float, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi) or len(self.lo) == 0:
            raise ConfigurationError("lo and hi must be non-empty and equally sized")
        if any(not l < h for l, h in zip(self.lo, self.hi)):
            raise ConfigurationError("each dimension requires lo < hi")
        if self.pop_size < 2:
            raise ConfigurationError(f"population size must be >= 2, got {self.pop_size}")
        if self.max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {self.max_iter}")
        if not self.w_min <= self.w_max:
            raise ConfigurationError("inertia bounds require w_min <= w_max")
        if self.v_max is None:
            # Default velocity cap: 20% of the search range per dimension.
            vm = tuple(0.2 * (h - l) for l, h in zip(self.lo, self.hi))
        else:
            vm = tuple(float(v) for v in self.v_max)
            if len(vm) != len(self.lo):
                raise ConfigurationError("v_max dimension mismatch")
        if any(not v > 0 for v in vm):
            raise ConfigurationError("velocity caps must be positive")
        object.__setattr__(self, "v_max", vm)

    @property
    def dim(self) -> int:
        return len(self.lo)


@dataclass
class Particle:
    x: np.ndarray
    v: np.ndarray
    pbest: np.ndarray
    pbest_f: float


@dataclass(frozen=True)
class SwarmResult:
    gbest: tuple[float, ...]
    gbest_f: float
    history: tuple[float, ...]


def inertia(iteration: int, cfg: PsoConfig) -> float:
    """Linear inertia schedule: w_max at iteration 0, w_min at max_iter."""
    if not 0 <= iteration <= cfg.max_iter:
        raise InvalidInputError(
            f"iteration {iteration} outside [0, {cfg.max_iter}]"
        )
    return cfg.w_max - (cfg.w_max - cfg.w_min) / cfg.max_iter * iteration


def update_velocity(
    p: Particle,
    gbest: np.ndarray,
    w: float,
    cfg: PsoConfig,
    r1: np.ndarray,
    r2: np.ndarray,
) -> np.ndarray:
    if not (len(r1) == len(r2) == cfg.dim == p.x.size == len(gbest)):
        raise ConfigurationError("velocity update dimension mismatch")
    v = w * p.v + cfg.c1 * r1 * (p.pbest - p.x) + cfg.c2 * r2 * (np.asarray(gbest) - p.x)
    vm = np.asarray(cfg.v_max)
    return np.clip(v, -vm, vm)


def update_position(x: np.ndarray, v: np.ndarray, cfg: PsoConfig) -> np.ndarray:
    if not (x.size == v.size == cfg.dim):
        raise ConfigurationError("position update dimension mismatch")
    return np.clip(x + v, np.asarray(cfg.lo), np.asarray(cfg.hi))


def _evaluation_pool() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "0")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV_VAR} must be an integer, got {raw!r}")
    # auto: sequential; objectives here are CPU-bound pure Python, so extra
    # threads only add overhead; explicit values > 1 are honored.
    return 1 if n <= 0 else n


def _evaluate(
    objective: Callable[[np.ndarray], float],
    xs: list[np.ndarray],
    pool: ThreadPoolExecutor | None,
) -> list[float]:
    if pool is None:
        fs = [objective(x) for x in xs]
    else:
        fs = list(pool.map(objective, xs))
    for i, f in enumerate(fs):
        if not math.isfinite(f):
            raise ObjectiveError(particle=i, value=f)
    return [float(f) for f in fs]


def optimize(
    objective: Callable[[np.ndarray], float],
    cfg: PsoConfig,
    _draw_r: Callable[[int], np.ndarray] | None = None,
    _capture: dict | None = None,
) -> SwarmResult:
    """Minimize a total objective over [lo, hi]^d.

    The objective must return a finite value everywhere (a large penalty
    sentinel for infeasible points is fine).  ``_draw_r`` and ``_capture``
    are test seams: the first replaces the per-particle r1/r2 draws, the
    second receives the final particle list.

    Returns the best-ever position with its value and the per-iteration
    gbest trace (history[0] is the post-initialization value).
    """
    rng = np.random.default_rng(cfg.seed)
    lo = np.asarray(cfg.lo)
    hi = np.asarray(cfg.hi)
    vm = np.asarray(cfg.v_max)
    d = cfg.dim
    draw = _draw_r if _draw_r is not None else rng.random

    xs = [rng.uniform(lo, hi) for _ in range(cfg.pop_size)]
    vs = [rng.uniform(-vm, vm) for _ in range(cfg.pop_size)]

    n_threads = _evaluation_pool()
    pool = ThreadPoolExecutor(max_workers=n_threads) if n_threads > 1 else None
    try:
        fs = _evaluate(objective, xs, pool)
        particles = [
            Particle(x=x, v=v, pbest=x.copy(), pbest_f=f)
            for x, v, f in zip(xs, vs, fs)
        ]
        g = min(range(cfg.pop_size), key=lambda i: particles[i].pbest_f)
        gbest = particles[g].pbest.copy()
        gbest_f = particles[g].pbest_f
        history = [gbest_f]

        for t in range(cfg.max_iter):
            w = inertia(t, cfg)
            for p in particles:
                r1 = draw(d)
                r2 = draw(d)
                p.v = update_velocity(p, gbest, w, cfg, r1, r2)
                p.x = update_position(p.x, p.v, cfg)
            fs = _evaluate(objective, [p.x for p in particles], pool)
            for p, f in zip(particles, fs):
                if f <= p.pbest_f:
                    p.pbest_f = f
                    p.pbest = p.x.copy()
                    if f <= gbest_f:
                        gbest_f = f
                        gbest = p.x.copy()
            history.append(gbest_f)
    finally:
        if pool is not None:
            pool.shutdown()

    if _capture is not None:
        _capture["particles"] = particles
    return SwarmResult(
        gbest=tuple(float(v) for v in gbest),
        gbest_f=gbest_f,
        history=tuple(history),
    )


def convergence_to_csv(result: SwarmResult) -> str:
    """Render the gbest trace as CSV with header ``iter,gbest_f``."""
    lines = ["iter,gbest_f"]
    for i, f in enumerate(result.history):
        lines.append(f"{i},{f!r}")
    return "\n".join(lines) + "\n"
