"""Takagi-Sugeno fuzzy MISO model with recursive weighted least squares.

Each of the r rules holds an affine local model over lagged outputs and
inputs; rule firing strengths are normalized Gaussians over an antecedent
vector.  The model output is linear in the stacked consequent parameters:

    phi_i = mu_i * [y(k-1)..y(k-n), u(k-1)..u(k-n), 1]     (per-rule block)
    phi   = [phi_1 .. phi_r]                               (stacked)
    y_hat = theta . phi

so the consequents are estimated online by RWLS:

    L  = P phi / (1/mu_k + phi' P phi)
    th = th + L (y - phi' th)
    P  = P - L phi' P          (re-symmetrized each step)

Different output channels are identified independently; a single channel's
updates are strictly sequential.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    IdentificationDivergedError,
    InvalidInputError,
    NumericalError,
)

logger = logging.getLogger(__name__)

# Covariance blow-up guard for identify(): trace(P) beyond this multiple of
# the initial scale aborts the run.
_COVARIANCE_BLOWUP = 1e12


@dataclass(frozen=True)
class MembershipSpec:
    """Per-rule Gaussian antecedent parameters (centers and widths)."""

    centers: np.ndarray  # shape (r, n_antecedent)
    widths: np.ndarray   # shape (r, n_antecedent)

    def __post_init__(self):
        object.__setattr__(self, "centers", np.atleast_2d(np.asarray(self.centers, float)))
        object.__setattr__(self, "widths", np.atleast_2d(np.asarray(self.widths, float)))
        if self.centers.shape != self.widths.shape:
            raise ConfigurationError("centers and widths must have the same shape")
        if self.centers.shape[0] < 1:
            raise ConfigurationError("need at least one rule")
        if not np.all(self.widths > 0):
            raise ConfigurationError("membership widths must be positive")

    @property
    def r(self) -> int:
        return self.centers.shape[0]


@dataclass(frozen=True)
class TsModel:
    """Rule count, lag depth, memberships and per-rule consequent vectors.

    ``theta`` has shape (r, 2*lags + 1): output lags, input lags, bias.
    """

    r: int
    lags: int
    memberships: MembershipSpec
    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", np.asarray(self.theta, float))
        if self.r != self.memberships.r:
            raise ConfigurationError(
                f"rule count {self.r} does not match membership spec ({self.memberships.r})"
            )
        if self.theta.shape != (self.r, 2 * self.lags + 1):
            raise ConfigurationError(
                f"theta must have shape ({self.r}, {2 * self.lags + 1}), got {self.theta.shape}"
            )


@dataclass(frozen=True)
class RwlsState:
    """Stacked parameter estimate with its covariance."""

    theta_hat: np.ndarray
    P: np.ndarray
    alpha0: float

    def __post_init__(self):
        object.__setattr__(self, "theta_hat", np.asarray(self.theta_hat, float))
        object.__setattr__(self, "P", np.asarray(self.P, float))
        p = self.theta_hat.size
        if self.P.shape != (p, p):
            raise ConfigurationError(f"covariance must be {p}x{p}, got {self.P.shape}")
        if not np.allclose(self.P, self.P.T, atol=1e-9):
            raise NumericalError("covariance lost symmetry beyond 1e-9")

    @classmethod
    def initial(cls, n_params: int, alpha0: float = 1e4) -> "RwlsState":
        return cls(theta_hat=np.zeros(n_params), P=alpha0 * np.eye(n_params), alpha0=alpha0)


def memberships(model: TsModel, antecedent: Sequence[float]) -> np.ndarray:
    """Normalized rule firing strengths for one antecedent vector."""
    x = np.asarray(antecedent, float)
    spec = model.memberships
    if x.shape != (spec.centers.shape[1],):
        raise ConfigurationError(
            f"antecedent must have {spec.centers.shape[1]} components, got {x.shape}"
        )
    z = (x - spec.centers) / spec.widths
    w = np.exp(-np.sum(z * z, axis=1))
    total = w.sum()
    if total == 0.0:
        logger.warning("all rule activations underflowed; falling back to uniform weights")
        return np.full(spec.r, 1.0 / spec.r)
    return w / total


def build_regressor(
    model: TsModel,
    y_hist: Sequence[float],
    u_hist: Sequence[float],
    mu: Sequence[float],
) -> np.ndarray:
    """Stacked regressor: per-rule block mu_i * [y lags, u lags, 1].

    Histories are most-recent-first: ``y_hist[0]`` is y(k-1).
    """
    n = model.lags
    if len(y_hist) < n or len(u_hist) < n:
        raise InvalidInputError(
            f"need {n} lagged samples, got {len(y_hist)} outputs / {len(u_hist)} inputs"
        )
    if len(mu) != model.r:
        raise ConfigurationError(f"expected {model.r} rule weights, got {len(mu)}")
    base = np.concatenate([np.asarray(y_hist[:n], float), np.asarray(u_hist[:n], float), [1.0]])
    return np.concatenate([m * base for m in np.asarray(mu, float)])


def predict(model: TsModel, phi: Sequence[float]) -> float:
    """Model output for a stacked regressor (inner product with theta)."""
    phi = np.asarray(phi, float)
    flat = model.theta.reshape(-1)
    if phi.shape != flat.shape:
        raise ConfigurationError(f"regressor must have {flat.size} entries, got {phi.size}")
    return float(flat @ phi)


def rwls_update(state: RwlsState, phi: Sequence[float], y: float, mu_k: float) -> RwlsState:
    """One weighted recursive least-squares update."""
    if not mu_k > 0:
        raise InvalidInputError(f"sample weight must be positive, got {mu_k}")
    if not math.isfinite(y):
        raise InvalidInputError(f"target is not finite: {y!r}")
    phi = np.asarray(phi, float)
    P = state.P
    Pphi = P @ phi
    denom = 1.0 / mu_k + float(phi @ Pphi)
    if denom <= 0:
        raise NumericalError(f"non-positive RWLS denominator {denom!r}")
    L = Pphi / denom
    theta = state.theta_hat + L * (y - float(phi @ state.theta_hat))
    P_new = P - np.outer(L, Pphi)
    P_new = (P_new + P_new.T) / 2.0  # suppress floating-point symmetry drift
    return RwlsState(theta_hat=theta, P=P_new, alpha0=state.alpha0)


@dataclass(frozen=True)
class TsIdentifyConfig:
    """Settings for identify(): rule count, lag depth, initial covariance
    scale, held-out fraction, and optional explicit membership placement
    (defaults to a uniform grid over the observed antecedent ranges)."""

    rules: int = 4
    lags: int = 2
    alpha0: float = 1e4
    holdout_frac: float = 0.2
    centers: np.ndarray | None = None
    widths: np.ndarray | None = None

    def __post_init__(self):
        if self.rules < 1:
            raise ConfigurationError("need at least one rule")
        if self.lags < 1:
            raise ConfigurationError("need at least one lag")
        if not self.alpha0 > 0:
            raise ConfigurationError("alpha0 must be positive")
        if not 0 < self.holdout_frac < 1:
            raise ConfigurationError("holdout fraction must be in (0, 1)")


@dataclass(frozen=True)
class FitReport:
    rmse_train: float
    rmse_holdout: float
    n_train: int
    n_holdout: int

    def to_dict(self) -> dict:
        return {
            "rmse_train": self.rmse_train,
            "rmse_holdout": self.rmse_holdout,
            "n_train": self.n_train,
            "n_holdout": self.n_holdout,
        }


def _unpack_log(io_log: Sequence[tuple]) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
    ys = []
    u_own = []
    u_other: list[float] | None = None
    for u, y in io_log:
        ys.append(float(y))
        if np.isscalar(u):
            u_own.append(float(u))
        else:
            u = tuple(u)
            u_own.append(float(u[0]))
            if len(u) > 1:
                if u_other is None:
                    u_other = []
                u_other.append(float(u[1]))
    if u_other is not None and len(u_other) != len(u_own):
        raise InvalidInputError("mixed scalar and vector inputs in io log")
    return (
        np.asarray(ys),
        np.asarray(u_own),
        None if u_other is None else np.asarray(u_other),
    )


def _antecedent(y, u_own, u_other, k: int, n: int) -> np.ndarray:
    """Antecedent at step k: own output and input lags, plus the other
    channel's previous input when available."""
    parts = [y[k - j] for j in range(1, n + 1)]
    parts += [u_own[k - j] for j in range(1, n + 1)]
    if u_other is not None:
        parts.append(u_other[k - 1])
    return np.asarray(parts)


def _grid_memberships(antecedents: np.ndarray, rules: int) -> MembershipSpec:
    """Rule centers on a uniform grid across each antecedent's observed
    range; widths equal the grid spacing (floor 1.0 on degenerate ranges)."""
    lo = antecedents.min(axis=0)
    hi = antecedents.max(axis=0)
    span = hi - lo
    centers = np.empty((rules, antecedents.shape[1]))
    widths = np.empty_like(centers)
    for d in range(antecedents.shape[1]):
        if span[d] == 0:
            centers[:, d] = lo[d]
            widths[:, d] = 1.0
        elif rules == 1:
            centers[:, d] = (lo[d] + hi[d]) / 2.0
            widths[:, d] = span[d]
        else:
            centers[:, d] = np.linspace(lo[d], hi[d], rules)
            widths[:, d] = span[d] / (rules - 1)
    return MembershipSpec(centers=centers, widths=widths)


def identify(
    io_log: Sequence[tuple], config: TsIdentifyConfig = TsIdentifyConfig()
) -> tuple[TsModel, FitReport]:
    """Estimate rule consequents from input/output data by streaming RWLS.

    ``io_log`` is a sequence of (u, y) pairs; u is either the scalar own
    input or a (u_own, u_other) pair whose second component only enters the
    antecedent.  The per-sample weight is the firing strength of the
    dominant rule.  The report carries one-step-ahead RMSE on a held-out
    tail (last ``holdout_frac`` of usable samples).
    """
    r, n = config.rules, config.lags
    n_params = r * (2 * n + 1)
    if len(io_log) <= n_params:
        raise InvalidInputError(
            f"need more than {n_params} samples to identify, got {len(io_log)}"
        )
    y, u_own, u_other = _unpack_log(io_log)
    ks = range(n, len(y))
    antecedents = np.array([_antecedent(y, u_own, u_other, k, n) for k in ks])
    n_hold = max(1, int(round(config.holdout_frac * len(antecedents))))
    n_train = len(antecedents) - n_hold
    if n_train <= n_params:
        raise InvalidInputError("not enough training samples after the holdout split")

    if config.centers is not None and config.widths is not None:
        spec = MembershipSpec(centers=config.centers, widths=config.widths)
    else:
        spec = _grid_memberships(antecedents[:n_train], r)
    model = TsModel(r=r, lags=n, memberships=spec, theta=np.zeros((r, 2 * n + 1)))

    state = RwlsState.initial(n_params, config.alpha0)
    train_sq = 0.0
    for idx, k in enumerate(ks):
        if idx >= n_train:
            break
        mu = memberships(model, antecedents[idx])
        phi = build_regressor(
            model, y[k - n:k][::-1], u_own[k - n:k][::-1], mu
        )
        err = y[k] - float(state.theta_hat @ phi)
        train_sq += err * err
        state = rwls_update(state, phi, y[k], float(mu.max()))
        if np.trace(state.P) > _COVARIANCE_BLOWUP * state.alpha0:
            raise IdentificationDivergedError(
                f"covariance trace exceeded {_COVARIANCE_BLOWUP:g} x alpha0 at sample {k}"
            )

    fitted = TsModel(
        r=r, lags=n, memberships=spec, theta=state.theta_hat.reshape(r, 2 * n + 1)
    )
    hold_sq = 0.0
    for idx in range(n_train, len(antecedents)):
        k = n + idx
        mu = memberships(fitted, antecedents[idx])
        phi = build_regressor(fitted, y[k - n:k][::-1], u_own[k - n:k][::-1], mu)
        err = y[k] - predict(fitted, phi)
        hold_sq += err * err
    report = FitReport(
        rmse_train=math.sqrt(train_sq / n_train),
        rmse_holdout=math.sqrt(hold_sq / n_hold),
        n_train=n_train,
        n_holdout=n_hold,
    )
    return fitted, report


def simulate_model(model: TsModel, u_own, u_other=None, n_steps: int | None = None):
    """Free-run generator: feed the model's own outputs back as lags.

    Used to synthesize in-class data for identification tests.
    """
    u_own = np.asarray(u_own, float)
    n_steps = len(u_own) if n_steps is None else n_steps
    n = model.lags
    y = np.zeros(n_steps)
    for k in range(n, n_steps):
        ant = _antecedent(y, u_own, u_other, k, n)
        mu = memberships(model, ant)
        phi = build_regressor(model, y[k - n:k][::-1], u_own[k - n:k][::-1], mu)
        y[k] = predict(model, phi)
    return y


def model_to_dict(model: TsModel) -> dict:
    return {
        "r": model.r,
        "lags": model.lags,
        "centers": model.memberships.centers.tolist(),
        "widths": model.memberships.widths.tolist(),
        "theta": model.theta.tolist(),
    }


def model_from_dict(d: dict) -> TsModel:
    spec = MembershipSpec(centers=np.asarray(d["centers"]), widths=np.asarray(d["widths"]))
    return TsModel(r=int(d["r"]), lags=int(d["lags"]), memberships=spec, theta=np.asarray(d["theta"]))


def save_model(model: TsModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> TsModel:
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def io_log_from_samples(samples, channel: int) -> list[tuple]:
    """Build a per-channel io log ((u_own, u_other), y) from plant samples."""
    if channel not in (0, 1):
        raise ConfigurationError(f"channel must be 0 or 1, got {channel}")
    other = 1 - channel
    return [((s.u[channel], s.u[other]), s.y[channel]) for s in samples]


def io_log_from_csv(text: str, channel: int) -> list[tuple]:
    """Ingest the plant trajectory CSV format for one output channel."""
    from .plant import parse_trajectory_csv

    return io_log_from_samples(parse_trajectory_csv(text), channel)
