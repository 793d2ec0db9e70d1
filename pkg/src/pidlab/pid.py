"""Discrete PID control law in decentralized (one loop per output) form.

The control law is positional:

    u(k) = kp*e(k) + ki*I(k) + kd*(e(k) - e(k-1)),   I(k) = I(k-1) + e(k)

The accumulator includes the current sample, i.e. the integral channel is
z/(z-1) = 1/(1-z^-1).  The derivative acts on the error.  Anti-windup, when
requested, clamps the accumulator symmetrically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigurationError, InvalidInputError, InvalidParameterError


@dataclass(frozen=True)
class PidGains:
    """Per-loop proportional, integral and derivative gains."""

    kp: float
    ki: float
    kd: float

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"gain {name} is not finite")


@dataclass(frozen=True)
class MimoPidGains:
    """One PidGains triple per controlled output (diagonal controller)."""

    loops: tuple[PidGains, ...]

    def __post_init__(self):
        if len(self.loops) == 0:
            raise ConfigurationError("controller needs at least one loop")


@dataclass(frozen=True)
class PidState:
    """Integrator value and previous error; zero before the first call."""

    integral: float = 0.0
    prev_error: float = 0.0

    def reset(self) -> "PidState":
        return PidState()


def pid_step(
    gains: PidGains,
    state: PidState,
    e: float,
    windup_limit: float | None = None,
) -> tuple[float, PidState]:
    """One controller update for error sample e; returns (u, next state)."""
    if not math.isfinite(e):
        raise InvalidInputError(f"error sample is not finite: {e!r}")
    integral = state.integral + e
    if windup_limit is not None:
        integral = min(max(integral, -windup_limit), windup_limit)
    u = gains.kp * e + gains.ki * integral + gains.kd * (e - state.prev_error)
    return u, PidState(integral=integral, prev_error=e)


def mimo_pid_step(
    gains: MimoPidGains,
    states: Sequence[PidState],
    e: Sequence[float],
    windup_limits: Sequence[float] | None = None,
) -> tuple[tuple[float, ...], tuple[PidState, ...]]:
    """Apply each loop's PID to its own error component (diagonal C(z))."""
    n = len(gains.loops)
    if len(states) != n or len(e) != n:
        raise ConfigurationError(
            f"loop count mismatch: {n} gains, {len(states)} states, {len(e)} errors"
        )
    if windup_limits is not None and len(windup_limits) != n:
        raise ConfigurationError("windup limit count must match loop count")
    us = []
    new_states = []
    for i in range(n):
        limit = None if windup_limits is None else windup_limits[i]
        u, s = pid_step(gains.loops[i], states[i], e[i], limit)
        us.append(u)
        new_states.append(s)
    return tuple(us), tuple(new_states)


def zn_form_to_gain_form(kp: float, Ti: float, Td: float) -> PidGains:
    """Convert (kp, Ti, Td) tuning-rule form to gain form: ki = kp/Ti, kd = kp*Td.

    Ti may be math.inf (pure P controller), giving ki = 0.
    """
    if not Ti > 0:
        raise InvalidParameterError(f"integral time must be positive, got {Ti}")
    ki = kp / Ti if math.isfinite(Ti) else 0.0
    return PidGains(kp=kp, ki=ki, kd=kp * Td)


def gains_to_dict(g: PidGains) -> dict:
    """Report serialization: {"kp": ..., "ki": ..., "kd": ...}."""
    return {"kp": g.kp, "ki": g.ki, "kd": g.kd}


def gains_from_dict(d: dict) -> PidGains:
    return PidGains(kp=float(d["kp"]), ki=float(d["ki"]), kd=float(d["kd"]))
