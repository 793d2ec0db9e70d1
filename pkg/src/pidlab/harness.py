"""Experiment orchestration: closed-loop wiring, tuning pipelines, reports.

The flow at each closed-loop step k:

    e(k) = reference - y(k)
    u(k) = saturate(PID(e(k)))       (anti-windup: |integral_i| <= hi/max(ki_i, eps))
    plant consumes u(k); y(k+1) follows from its histories

Divergence during a closed loop is data, not an error: the run is returned
partial and tagged, and optimization objectives map it to a fixed penalty
sentinel.

``run_comparison`` produces the full baseline-vs-swarm study: open-loop
(and, when an ultimate gain exists, closed-loop) Ziegler-Nichols tuning,
then one swarm run per performance index per seed, with the median-scoring
seed of each index promoted to that index's representative controller.
All artifacts (report.json, trajectory and convergence CSVs, tables.md)
are deterministic for equal configs: rerunning with the same seeds gives
byte-identical files.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import metrics, pid, plant, pso, tsfuzzy, zn
from .errors import ConfigurationError, PidLabError
from .metrics import ErrorTrajectory
from .pid import MimoPidGains, PidGains
from .plant import BenchmarkPlant, InputBounds, PlantParams, Sample

PENALTY_SENTINEL = 1e12
_WINDUP_EPS = 1e-9

INDEX_FUNCTIONS = {"iae": metrics.iae, "ise": metrics.ise, "itse": metrics.itse}
PSO_METHODS = ("pso-iae", "pso-ise", "pso-itse")


# ---------------------------------------------------------------------------
# Configuration (the JSON config-file schema; unknown keys are rejected)


class PlantSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")
    a: list[float] = Field(default=[0.7, 1.0, 1.0, 0.3, 1.0, 0.2])
    b: list[float] = Field(default=[0.5, 1.0, 1.0, 0.5, 1.0, 0.2])

    @field_validator("a", "b")
    @classmethod
    def _six_finite(cls, v):
        if len(v) != 6 or not all(math.isfinite(x) for x in v):
            raise ValueError("expected 6 finite coefficients")
        return v


class SaturationSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")
    lo: float = -2.0
    hi: float = 2.0

    @model_validator(mode="after")
    def _ordered(self):
        if not self.lo < self.hi:
            raise ValueError("saturation requires lo < hi")
        return self


class GainBoundsSettings(BaseModel):
    """Per-gain search interval for the swarm.

    The default upper bound is matched to the benchmark's stability margin
    (its outputs respond within one or two samples, so useful gains are
    order one); widen it for slower plants.
    """

    model_config = ConfigDict(extra="forbid")
    lo: float = 0.0
    hi: float = 2.0

    @model_validator(mode="after")
    def _ordered(self):
        if not self.lo < self.hi:
            raise ValueError("gain bounds require lo < hi")
        return self


class PsoSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")
    pop_size: int = Field(default=20, ge=2)
    max_iter: int = Field(default=30, ge=1)
    c1: float = 2.0
    c2: float = 2.0
    w_min: float = 0.5
    w_max: float = 0.9
    v_max: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _inertia_ordered(self):
        if not self.w_min <= self.w_max:
            raise ValueError("inertia bounds require w_min <= w_max")
        return self


class ZnSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")
    step_amplitude: float = 1.0
    open_sim_len: int = Field(default=400, ge=20)
    kp_start: float = Field(default=0.05, gt=0)
    growth: float = Field(default=1.05, gt=1)
    max_kp: float = Field(default=1000.0, gt=0)
    ultimate_sim_len: int = Field(default=2000, ge=100)


class IdentifySettings(BaseModel):
    model_config = ConfigDict(extra="forbid")
    rules: int = Field(default=4, ge=1)
    lags: int = Field(default=2, ge=1)
    alpha0: float = Field(default=1e4, gt=0)
    samples: int = Field(default=1500, ge=50)
    holdout_frac: float = Field(default=0.2, gt=0, lt=1)
    seed: int = 0


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    plant: PlantSettings = Field(default_factory=PlantSettings)
    saturation: SaturationSettings = Field(default_factory=SaturationSettings)
    reference: list[float] = Field(default=[1.0, 1.0])
    sim_len: int = Field(default=500, ge=10)
    ts: float = Field(default=0.01, gt=0)
    gain_bounds: GainBoundsSettings = Field(default_factory=GainBoundsSettings)
    pso: PsoSettings = Field(default_factory=PsoSettings)
    index: Literal["iae", "ise", "itse"] = "iae"
    seeds: list[int] = Field(default=list(range(10)), min_length=1)
    zn: ZnSettings = Field(default_factory=ZnSettings)
    identify: IdentifySettings = Field(default_factory=IdentifySettings)
    gains: list[list[float]] | None = None
    out_dir: str | None = None

    @field_validator("reference")
    @classmethod
    def _two_channels(cls, v):
        if len(v) != 2 or not all(math.isfinite(x) for x in v):
            raise ValueError("reference must hold 2 finite values")
        return v

    @field_validator("gains")
    @classmethod
    def _gain_shape(cls, v):
        if v is None:
            return v
        if len(v) != 2 or any(len(loop) != 3 for loop in v):
            raise ValueError("gains must be two [kp, ki, kd] triples")
        return v


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path} is not valid JSON: {exc}") from exc
    return validate_config(raw)


def validate_config(raw: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except Exception as exc:  # pydantic.ValidationError
        raise ConfigurationError(f"invalid config: {exc}") from exc


def config_digest(cfg: ExperimentConfig) -> dict:
    """Config as stored in reports: everything except the output location,
    so equal experiments serialize identically regardless of where they ran."""
    return cfg.model_dump(exclude={"out_dir"})


def plant_from_config(cfg: ExperimentConfig) -> BenchmarkPlant:
    a, b = cfg.plant.a, cfg.plant.b
    params = PlantParams(
        a1=a[0], a2=a[1], a3=a[2], a4=a[3], a5=a[4], a6=a[5],
        b1=b[0], b2=b[1], b3=b[2], b4=b[3], b5=b[4], b6=b[5],
    )
    return BenchmarkPlant(params=params, bounds=InputBounds(lo=cfg.saturation.lo, hi=cfg.saturation.hi))


def gains_from_vector(vec: Sequence[float]) -> MimoPidGains:
    """Decode the 6-vector [kp1, ki1, kd1, kp2, ki2, kd2]."""
    if len(vec) != 6:
        raise ConfigurationError(f"gain vector must have 6 entries, got {len(vec)}")
    v = [float(x) for x in vec]
    return MimoPidGains(loops=(PidGains(*v[0:3]), PidGains(*v[3:6])))


def windup_limits(gains: MimoPidGains, bounds: InputBounds) -> tuple[float, ...]:
    """Integral clamp per loop: the integral term alone can just saturate the
    actuator (|ki * integral| <= hi) but not wind further."""
    return tuple(bounds.hi / max(g.ki, _WINDUP_EPS) for g in gains.loops)


# ---------------------------------------------------------------------------
# Closed loop


@dataclass(frozen=True)
class ClosedLoopResult:
    samples: list[Sample]
    errors: ErrorTrajectory
    diverged: bool
    diverged_step: int | None


def closed_loop(
    plant_model: BenchmarkPlant,
    gains: MimoPidGains,
    reference: Sequence[float],
    sim_len: int,
    ts: float,
) -> ClosedLoopResult:
    """Run the decentralized loop for sim_len steps from zero initial state.

    On divergence the partial trajectory is returned tagged, never raised.
    The recurrence is inlined for speed but reproduces the plant and pid
    modules' arithmetic exactly (asserted by tests).
    """
    if len(gains.loops) != 2 or len(reference) != 2:
        raise ConfigurationError("closed loop expects a 2-output plant configuration")
    if sim_len < 1:
        raise ConfigurationError("sim_len must be at least 1")
    p = plant_model.params
    a1, a2, a3, a4, a5, a6 = p.a1, p.a2, p.a3, p.a4, p.a5, p.a6
    b1, b2, b3, b4, b5, b6 = p.b1, p.b2, p.b3, p.b4, p.b5, p.b6
    lo, hi = plant_model.bounds.lo, plant_model.bounds.hi
    g1, g2 = gains.loops
    kp1, ki1, kd1 = g1.kp, g1.ki, g1.kd
    kp2, ki2, kd2 = g2.kp, g2.ki, g2.kd
    wl1, wl2 = windup_limits(gains, plant_model.bounds)
    r1, r2 = float(reference[0]), float(reference[1])
    limit = plant.DIVERGENCE_LIMIT
    sin = math.sin

    y1m1 = y1m2 = y2m1 = y2m2 = 0.0
    u1m1 = u1m2 = u2m1 = u2m2 = 0.0
    i1 = i2 = pe1 = pe2 = 0.0
    samples: list[Sample] = []
    errors: list[tuple[float, float]] = []
    diverged = False
    diverged_step = None

    for k in range(sim_len):
        y1 = (
            a1 * y1m1 * y2m1 / (1.0 + a2 * y1m1 * y1m1 + a3 * y2m1 * y2m1)
            + a4 * u1m2 + a5 * u1m1 + a6 * u2m1
        )
        y2 = (
            b1 * y2m1 * sin(y2m2) / (1.0 + b2 * y2m1 * y2m1 + b3 * y1m1 * y1m1)
            + b4 * u2m2 + b5 * u2m1 + b6 * u1m1
        )
        if not (math.isfinite(y1) and math.isfinite(y2)) or abs(y1) > limit or abs(y2) > limit:
            diverged = True
            diverged_step = k
            break
        e1 = r1 - y1
        e2 = r2 - y2
        i1 = min(max(i1 + e1, -wl1), wl1)
        i2 = min(max(i2 + e2, -wl2), wl2)
        u1 = kp1 * e1 + ki1 * i1 + kd1 * (e1 - pe1)
        u2 = kp2 * e2 + ki2 * i2 + kd2 * (e2 - pe2)
        pe1 = e1
        pe2 = e2
        u1 = min(max(u1, lo), hi)
        u2 = min(max(u2, lo), hi)
        samples.append(Sample(k=k, u=(u1, u2), y=(y1, y2)))
        errors.append((e1, e2))
        y2m2 = y2m1
        y2m1 = y2
        y1m2 = y1m1
        y1m1 = y1
        u1m2 = u1m1
        u1m1 = u1
        u2m2 = u2m1
        u2m1 = u2

    if not errors:
        # Divergence at k=0 is impossible from zero state, but keep the
        # contract total: a single zero-error row.
        errors.append((r1, r2))
    return ClosedLoopResult(
        samples=samples,
        errors=ErrorTrajectory(errors=tuple(errors), ts=ts),
        diverged=diverged,
        diverged_step=diverged_step,
    )


def make_objective(cfg: ExperimentConfig, index: str | None = None) -> Callable:
    """Objective over the 6-gain vector: the chosen error index of the
    closed loop, with the penalty sentinel for diverged runs."""
    chosen = index or cfg.index
    if chosen not in INDEX_FUNCTIONS:
        raise ConfigurationError(f"unknown index {chosen!r}")
    metric = INDEX_FUNCTIONS[chosen]
    plant_model = plant_from_config(cfg)
    reference = tuple(cfg.reference)
    sim_len, ts = cfg.sim_len, cfg.ts

    def objective(vec) -> float:
        result = closed_loop(plant_model, gains_from_vector(vec), reference, sim_len, ts)
        if result.diverged:
            return PENALTY_SENTINEL
        return metric(result.errors)

    return objective


# ---------------------------------------------------------------------------
# Tuning pipelines


def tune_zn_open(cfg: ExperimentConfig) -> dict:
    """Per-loop open-loop characterization (step one input, read the paired
    output) followed by the open-loop PID table."""
    plant_model = plant_from_config(cfg)
    amp = cfg.zn.step_amplitude
    records = []
    loops = []
    for i in range(2):
        u = [0.0, 0.0]
        u[i] = amp
        samples = plant.simulate_open_loop(
            plant_model.params, [tuple(u)] * cfg.zn.open_sim_len, plant_model.bounds
        )
        response = [s.y[i] for s in samples]
        fit = zn.fit_fopdt(response, amp, cfg.ts)
        kp, Ti, Td = zn.zn_open_loop(fit, "PID")
        loops.append(pid.zn_form_to_gain_form(kp, Ti, Td))
        records.append(
            zn.tuning_record(
                "zn-open", i, kp, Ti, Td,
                {"T": fit.T, "L": fit.L, "K_process": fit.K_process},
            )
        )
    return {"tuning": records, "gains": MimoPidGains(loops=tuple(loops))}


def tune_zn_closed(cfg: ExperimentConfig) -> dict:
    """Per-loop ultimate-gain search followed by the closed-loop PID table."""
    plant_model = plant_from_config(cfg)
    records = []
    loops = []
    for i in range(2):
        ult = zn.find_ultimate(
            plant_model,
            i,
            kp_start=cfg.zn.kp_start,
            growth=cfg.zn.growth,
            max_kp=cfg.zn.max_kp,
            sim_len=cfg.zn.ultimate_sim_len,
            ts=cfg.ts,
        )
        kp, Ti, Td = zn.zn_closed_loop(ult, "PID")
        loops.append(pid.zn_form_to_gain_form(kp, Ti, Td))
        records.append(
            zn.tuning_record("zn-closed", i, kp, Ti, Td, {"Ku": ult.Ku, "Pu": ult.Pu})
        )
    return {"tuning": records, "gains": MimoPidGains(loops=tuple(loops))}


def pso_config_for(cfg: ExperimentConfig, seed: int) -> pso.PsoConfig:
    gb = cfg.gain_bounds
    dims = 6
    v_max = None if cfg.pso.v_max is None else (cfg.pso.v_max,) * dims
    return pso.PsoConfig(
        lo=(gb.lo,) * dims,
        hi=(gb.hi,) * dims,
        pop_size=cfg.pso.pop_size,
        max_iter=cfg.pso.max_iter,
        c1=cfg.pso.c1,
        c2=cfg.pso.c2,
        w_min=cfg.pso.w_min,
        w_max=cfg.pso.w_max,
        v_max=v_max,
        seed=seed,
    )


def tune_pso(cfg: ExperimentConfig, index: str, seed: int) -> dict:
    result = pso.optimize(make_objective(cfg, index), pso_config_for(cfg, seed))
    return {
        "seed": seed,
        "index": index,
        "gains_vector": list(result.gbest),
        "objective_value": result.gbest_f,
        "history": list(result.history),
    }


def evaluate_gains(cfg: ExperimentConfig, gains: MimoPidGains) -> dict:
    """Closed-loop run plus all three indices and per-loop step statistics."""
    plant_model = plant_from_config(cfg)
    result = closed_loop(plant_model, gains, tuple(cfg.reference), cfg.sim_len, cfg.ts)
    indices = {name: fn(result.errors) for name, fn in INDEX_FUNCTIONS.items()}
    stats = [
        metrics.step_stats_record([s.y[i] for s in result.samples], cfg.reference[i], cfg.ts)
        for i in range(2)
    ]
    return {
        "result": result,
        "indices": indices,
        "step_stats": stats,
        "gains": [pid.gains_to_dict(g) for g in gains.loops],
        "diverged": result.diverged,
    }


def _median_index(values: list[float]) -> int:
    """Position of the upper-middle element after sorting: a single
    representative run, deterministic for even counts."""
    order = sorted(range(len(values)), key=lambda i: (values[i], i))
    return order[len(values) // 2]


def build_comparison(cfg: ExperimentConfig) -> tuple[dict, dict]:
    """Full study; returns (report dict, {filename: content}).

    File contents are produced here rather than written so that service
    clients receive exactly the bytes a local run would put on disk.
    """
    files: dict[str, str] = {}
    methods: dict = {}

    for name, tuner in (("zn-open", tune_zn_open), ("zn-closed", tune_zn_closed)):
        try:
            tuned = tuner(cfg)
        except PidLabError as exc:
            methods[name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
            continue
        evaluation = evaluate_gains(cfg, tuned["gains"])
        traj_name = f"traj_{name}.csv"
        files[traj_name] = plant.trajectory_to_csv(evaluation["result"].samples, cfg.ts)
        methods[name] = {
            "status": "ok",
            "tuning": tuned["tuning"],
            "gains": evaluation["gains"],
            "indices": evaluation["indices"],
            "step_stats": evaluation["step_stats"],
            "diverged": evaluation["diverged"],
            "trajectory_csv": traj_name,
        }

    for index in ("iae", "ise", "itse"):
        name = f"pso-{index}"
        per_seed = []
        for seed in cfg.seeds:
            run = tune_pso(cfg, index, seed)
            conv_name = f"conv_{name}_{seed}.csv"
            files[conv_name] = pso.convergence_to_csv(
                pso.SwarmResult(
                    gbest=tuple(run["gains_vector"]),
                    gbest_f=run["objective_value"],
                    history=tuple(run["history"]),
                )
            )
            run["convergence_csv"] = conv_name
            per_seed.append(run)
        median = _median_index([r["objective_value"] for r in per_seed])
        best = per_seed[median]
        gains = gains_from_vector(best["gains_vector"])
        evaluation = evaluate_gains(cfg, gains)
        traj_name = f"traj_{name}.csv"
        files[traj_name] = plant.trajectory_to_csv(evaluation["result"].samples, cfg.ts)
        methods[name] = {
            "status": "ok",
            "index": index,
            "per_seed": [
                {
                    "seed": r["seed"],
                    "gains_vector": r["gains_vector"],
                    "objective_value": r["objective_value"],
                    "convergence_csv": r["convergence_csv"],
                }
                for r in per_seed
            ],
            "median_seed": best["seed"],
            "gains": evaluation["gains"],
            "objective_value": best["objective_value"],
            "indices": evaluation["indices"],
            "step_stats": evaluation["step_stats"],
            "diverged": evaluation["diverged"],
            "trajectory_csv": traj_name,
        }

    report = {
        "schema_version": 1,
        "config": config_digest(cfg),
        "methods": methods,
    }
    files["report.json"] = report_to_json(report)
    files["tables.md"] = render_tables(report)
    return report, files


def report_to_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def write_files(files: dict, out_dir) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for name, content in sorted(files.items()):
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(content)
        paths.append(path)
    return paths


def run_comparison(cfg: ExperimentConfig, out_dir=None) -> dict:
    """Run the full study and write every artifact under out_dir."""
    target = out_dir or cfg.out_dir
    if target is None:
        raise ConfigurationError("an output directory is required")
    report, files = build_comparison(cfg)
    write_files(files, target)
    return report


# ---------------------------------------------------------------------------
# Tables and identification helpers


def _fmt(v, nd=4) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.{nd}f}"
    return str(v)


def render_tables(report: dict) -> str:
    """Markdown digest: optimized gains and step statistics per loop."""
    methods = report["methods"]
    order = [m for m in ("zn-open", "zn-closed", *PSO_METHODS) if m in methods]
    out = ["# Tuning comparison", ""]
    for loop in (0, 1):
        out.append(f"## Optimized PID parameters (y{loop + 1})")
        out.append("")
        out.append("| Tuning method | kp | ki | kd |")
        out.append("|---|---|---|---|")
        for m in order:
            entry = methods[m]
            if entry.get("status") != "ok":
                out.append(f"| {m} | failed | | |")
                continue
            g = entry["gains"][loop]
            out.append(f"| {m} | {_fmt(g['kp'])} | {_fmt(g['ki'])} | {_fmt(g['kd'])} |")
        out.append("")
    for loop in (0, 1):
        out.append(f"## Step response performance (y{loop + 1})")
        out.append("")
        out.append("| Tuning method | Overshoot (%) | Rise time (s) | Settling time (s) |")
        out.append("|---|---|---|---|")
        for m in order:
            entry = methods[m]
            if entry.get("status") != "ok":
                out.append(f"| {m} | failed | | |")
                continue
            s = entry["step_stats"][loop]
            settling = s["settling_time_s"]
            settling_txt = _fmt(settling) if settling is not None else "not settled"
            out.append(
                f"| {m} | {_fmt(s['overshoot_pct'])} | {_fmt(s['rise_time_s'])} | {settling_txt} |"
            )
        out.append("")
    for m in order:
        entry = methods[m]
        if entry.get("status") == "failed":
            out.append(f"- `{m}` failed: {entry['error']}")
    return "\n".join(out).rstrip() + "\n"


def generate_excitation(cfg: ExperimentConfig) -> list[Sample]:
    """Open-loop run under seeded uniform random inputs inside the actuator
    bounds, for identification experiments."""
    rng = np.random.default_rng(cfg.identify.seed)
    n = cfg.identify.samples
    lo, hi = cfg.saturation.lo, cfg.saturation.hi
    us = [(float(rng.uniform(lo, hi)), float(rng.uniform(lo, hi))) for _ in range(n)]
    plant_model = plant_from_config(cfg)
    return plant.simulate_open_loop(plant_model.params, us, plant_model.bounds)


def identify_channels(
    cfg: ExperimentConfig, samples: list[Sample] | None = None, channels: Sequence[int] = (0, 1)
) -> list[dict]:
    """Identify one fuzzy model per requested output channel."""
    if samples is None:
        samples = generate_excitation(cfg)
    ident = cfg.identify
    ts_cfg = tsfuzzy.TsIdentifyConfig(
        rules=ident.rules,
        lags=ident.lags,
        alpha0=ident.alpha0,
        holdout_frac=ident.holdout_frac,
    )
    results = []
    for ch in channels:
        model, fit = tsfuzzy.identify(tsfuzzy.io_log_from_samples(samples, ch), ts_cfg)
        results.append(
            {"channel": ch, "model": tsfuzzy.model_to_dict(model), "report": fit.to_dict()}
        )
    return results
