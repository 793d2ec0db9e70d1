"""Exception types shared across the package.

Two broad families matter to callers: configuration/usage mistakes
(ConfigurationError and friends, CLI exit code 2) and numerical failures
discovered while simulating or tuning (NumericalError and friends, CLI
exit code 3).
"""

from __future__ import annotations


class PidLabError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(PidLabError):
    """An operation received a value outside its domain (non-finite, empty, ...)."""


class InvalidParameterError(PidLabError):
    """A tuning or model parameter violates its constraints (e.g. Ti <= 0)."""


class ConfigurationError(PidLabError):
    """Inconsistent dimensions, bad config files, or mismatched settings."""


class NumericalError(PidLabError):
    """A computation failed numerically (divergence, singular update, ...)."""


class PlantDivergenceError(NumericalError):
    """Simulated output left the finite/bounded region."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"plant output diverged at step {step}")


class NotSettledError(NumericalError):
    """A response never reached (or did not stay in) its steady-state band."""


class RiseTimeUndefinedError(NumericalError):
    """A response never reached 90% of the reference, so rise time is undefined."""


class FitError(NumericalError):
    """A model fit produced degenerate or non-monotone characteristics."""


class UnboundedGainError(NumericalError):
    """Open-loop tuning rules blow up (zero apparent dead time)."""


class NoUltimateGainError(NumericalError):
    """The ultimate-gain search exhausted its range without sustained oscillation."""


class UltimateDivergenceError(NumericalError):
    """The ultimate-gain search diverged before oscillating.

    Carries the last gain that simulated cleanly and the gain that diverged.
    """

    def __init__(self, stable_kp: float | None, diverged_kp: float):
        self.stable_kp = stable_kp
        self.diverged_kp = diverged_kp
        super().__init__(
            f"loop diverged at kp={diverged_kp:g} before oscillating "
            f"(last clean kp: {stable_kp if stable_kp is not None else 'none'})"
        )


class IdentificationDivergedError(NumericalError):
    """Covariance blow-up during recursive identification."""


class ObjectiveError(NumericalError):
    """An optimization objective returned a non-finite value."""

    def __init__(self, particle: int, value: float):
        self.particle = particle
        self.value = value
        super().__init__(f"objective returned non-finite value {value!r} for particle {particle}")
