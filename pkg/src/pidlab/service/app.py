"""HTTP service exposing the tuning lab.

Stateless compute endpoints over the core package: every request carries a
full experiment config and responses embed file contents verbatim, so a
remote client writes exactly the bytes a local run would produce.

Error mapping: configuration/usage problems return 400 (or 422 from
request validation); numerical failures (divergence, failed fits, no
ultimate gain) return 409.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, harness, pid, plant, pso
from ..errors import (
    ConfigurationError,
    InvalidInputError,
    InvalidParameterError,
    PidLabError,
)
from . import schemas

_CONFIG_ERRORS = (ConfigurationError, InvalidInputError, InvalidParameterError)


def create_app() -> FastAPI:
    app = FastAPI(title="pidlab", version=__version__)

    @app.exception_handler(PidLabError)
    async def _pidlab_error(request: Request, exc: PidLabError):
        status = 400 if isinstance(exc, _CONFIG_ERRORS) else 409
        return JSONResponse(
            status_code=status,
            content=schemas.ErrorResponse(error=type(exc).__name__, detail=str(exc)).model_dump(),
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(version=__version__)

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        cfg = req.config
        if req.mode == "open":
            steps = req.steps if req.steps is not None else [1.0, 1.0]
            if len(steps) != 2:
                raise ConfigurationError("open-loop steps must hold 2 amplitudes")
            plant_model = harness.plant_from_config(cfg)
            samples = plant.simulate_open_loop(
                plant_model.params, [tuple(steps)] * cfg.sim_len, plant_model.bounds
            )
            return schemas.SimulateResponse(
                mode="open",
                csv=plant.trajectory_to_csv(samples, cfg.ts),
                diverged=False,
            )
        gains_spec = req.gains if req.gains is not None else cfg.gains
        if gains_spec is None:
            raise ConfigurationError("closed-loop simulation needs gains (request or config)")
        gains = pid.MimoPidGains(
            loops=tuple(pid.PidGains(*[float(v) for v in loop]) for loop in gains_spec)
        )
        evaluation = harness.evaluate_gains(cfg, gains)
        return schemas.SimulateResponse(
            mode="closed",
            csv=plant.trajectory_to_csv(evaluation["result"].samples, cfg.ts),
            diverged=evaluation["diverged"],
            indices=evaluation["indices"],
            step_stats=evaluation["step_stats"],
        )

    @app.post("/tune/zn", response_model=schemas.TuneZnResponse)
    def tune_zn(req: schemas.TuneZnRequest):
        tuners = {"zn-open": harness.tune_zn_open, "zn-closed": harness.tune_zn_closed}
        out: dict[str, dict] = {}
        for name in req.methods:
            try:
                tuned = tuners[name](req.config)
            except PidLabError as exc:
                out[name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
                continue
            out[name] = {
                "status": "ok",
                "tuning": tuned["tuning"],
                "gains": [pid.gains_to_dict(g) for g in tuned["gains"].loops],
            }
        return schemas.TuneZnResponse(methods=out)

    @app.post("/tune/pso", response_model=schemas.TunePsoResponse)
    def tune_pso(req: schemas.TunePsoRequest):
        cfg = req.config
        index = req.index or cfg.index
        seed = req.seed if req.seed is not None else cfg.seeds[0]
        run = harness.tune_pso(cfg, index, seed)
        gains = harness.gains_from_vector(run["gains_vector"])
        evaluation = harness.evaluate_gains(cfg, gains)
        conv = pso.convergence_to_csv(
            pso.SwarmResult(
                gbest=tuple(run["gains_vector"]),
                gbest_f=run["objective_value"],
                history=tuple(run["history"]),
            )
        )
        return schemas.TunePsoResponse(
            index=index,
            seed=seed,
            gains_vector=run["gains_vector"],
            gains=evaluation["gains"],
            objective_value=run["objective_value"],
            history=run["history"],
            convergence_csv=conv,
            indices=evaluation["indices"],
            step_stats=evaluation["step_stats"],
        )

    @app.post("/identify", response_model=schemas.IdentifyResponse)
    def identify(req: schemas.IdentifyRequest):
        cfg = req.config
        if req.csv is not None:
            samples = plant.parse_trajectory_csv(req.csv)
            io_csv = None
        else:
            samples = harness.generate_excitation(cfg)
            io_csv = plant.trajectory_to_csv(samples, cfg.ts)
        results = harness.identify_channels(cfg, samples, channels=req.channels)
        return schemas.IdentifyResponse(results=results, io_csv=io_csv)

    @app.post("/compare", response_model=schemas.CompareResponse)
    def compare(req: schemas.CompareRequest):
        report, files = harness.build_comparison(req.config)
        return schemas.CompareResponse(report=report, files=files)

    @app.post("/report/tables", response_model=schemas.RenderTablesResponse)
    def report_tables(req: schemas.RenderTablesRequest):
        if "methods" not in req.report:
            raise ConfigurationError("report is missing its 'methods' section")
        return schemas.RenderTablesResponse(tables_md=harness.render_tables(req.report))

    return app


app = create_app()
