"""Command-line client for the tuning lab.

The CLI is a thin client of the HTTP API: by default it talks to the
service in-process (same request/response schemas, no socket), and with
``--server URL`` it targets a running instance instead.  Responses embed
file contents, which the CLI writes under ``--out``.

Exit codes: 0 success, 2 configuration/usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import os
import sys

import httpx

from . import __version__
from .errors import ConfigurationError, PidLabError
from .harness import ExperimentConfig, load_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ApiError(Exception):
    def __init__(self, status: int, body):
        self.status = status
        self.body = body
        super().__init__(f"HTTP {status}: {body}")


class Client:
    """Minimal JSON-over-HTTP client with an in-process default transport."""

    def __init__(self, server: str | None):
        self.server = server

    def post(self, path: str, payload: dict) -> dict:
        return asyncio.run(self._request("POST", path, payload))

    def get(self, path: str) -> dict:
        return asyncio.run(self._request("GET", path, None))

    async def _request(self, method: str, path: str, payload: dict | None) -> dict:
        if self.server is None:
            from .service.app import app

            transport = httpx.ASGITransport(app=app)
            base_url = "http://pidlab.internal"
        else:
            transport = None
            base_url = self.server
        async with httpx.AsyncClient(
            transport=transport, base_url=base_url, timeout=None
        ) as client:
            response = await client.request(method, path, json=payload)
        if response.status_code >= 400:
            try:
                body = response.json()
            except ValueError:
                body = response.text
            raise ApiError(response.status_code, body)
        return response.json()


def _write(out_dir: str, name: str, content: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)
    return path


def _dump_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def _load_cfg(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.model_copy(
            update={
                "seeds": [args.seed],
                "identify": cfg.identify.model_copy(update={"seed": args.seed}),
            }
        )
    return cfg


def _cfg_payload(cfg: ExperimentConfig) -> dict:
    return cfg.model_dump(exclude={"out_dir"})


def _parse_floats(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigurationError(f"{flag} expects comma-separated numbers: {exc}") from exc


def _cmd_simulate(args, client: Client) -> int:
    cfg = _load_cfg(args)
    payload: dict = {"config": _cfg_payload(cfg), "mode": args.mode}
    if args.steps is not None:
        payload["steps"] = _parse_floats(args.steps, "--steps")
    if args.gains is not None:
        vals = _parse_floats(args.gains, "--gains")
        if len(vals) != 6:
            raise ConfigurationError("--gains expects 6 comma-separated values")
        payload["gains"] = [vals[0:3], vals[3:6]]
    data = client.post("/simulate", payload)
    path = _write(args.out, f"traj_simulate_{args.mode}.csv", data["csv"])
    print(f"wrote {path}")
    if data.get("indices"):
        print("indices:", json.dumps(data["indices"], sort_keys=True))
    if data.get("diverged"):
        print("warning: simulation diverged; trajectory is partial")
    return EXIT_OK


def _cmd_tune_zn(args, client: Client) -> int:
    cfg = _load_cfg(args)
    data = client.post("/tune/zn", {"config": _cfg_payload(cfg)})
    path = _write(args.out, "zn_tuning.json", _dump_json(data))
    for name, entry in data["methods"].items():
        if entry["status"] == "ok":
            print(f"{name}: " + json.dumps(entry["tuning"], sort_keys=True))
        else:
            print(f"{name}: failed ({entry['error']})")
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_tune_pso(args, client: Client) -> int:
    cfg = _load_cfg(args)
    payload = {"config": _cfg_payload(cfg)}
    if args.index:
        payload["index"] = args.index
    if args.seed is not None:
        payload["seed"] = args.seed
    data = client.post("/tune/pso", payload)
    stem = f"pso_{data['index']}_seed{data['seed']}"
    conv = data.pop("convergence_csv")
    path = _write(args.out, f"{stem}.json", _dump_json(data))
    conv_path = _write(args.out, f"conv_pso-{data['index']}_{data['seed']}.csv", conv)
    print(
        f"best {data['index']} = {data['objective_value']:.6g} "
        f"gains = {data['gains_vector']}"
    )
    print(f"wrote {path}")
    print(f"wrote {conv_path}")
    return EXIT_OK


def _cmd_identify(args, client: Client) -> int:
    cfg = _load_cfg(args)
    payload: dict = {"config": _cfg_payload(cfg)}
    if args.io_csv:
        try:
            with open(args.io_csv, encoding="utf-8") as fh:
                payload["csv"] = fh.read()
        except OSError as exc:
            raise ConfigurationError(f"cannot read io CSV {args.io_csv}: {exc}") from exc
    data = client.post("/identify", payload)
    for entry in data["results"]:
        ch = entry["channel"]
        path = _write(args.out, f"ts_model_ch{ch}.json", _dump_json(entry["model"]))
        print(f"channel {ch}: holdout RMSE = {entry['report']['rmse_holdout']:.6g} -> {path}")
    _write(args.out, "identify_report.json", _dump_json(data["results"]))
    if data.get("io_csv"):
        path = _write(args.out, "identify_io.csv", data["io_csv"])
        print(f"wrote excitation log {path}")
    return EXIT_OK


def _cmd_compare(args, client: Client) -> int:
    cfg = _load_cfg(args)
    data = client.post("/compare", {"config": _cfg_payload(cfg)})
    for name in sorted(data["files"]):
        _write(args.out, name, data["files"][name])
    print(f"wrote {len(data['files'])} files to {args.out}")
    for name, entry in sorted(data["report"]["methods"].items()):
        if entry.get("status") != "ok":
            print(f"{name}: failed ({entry.get('error')})")
            continue
        stats = entry["step_stats"]
        brief = "; ".join(
            f"y{i + 1} ov={s['overshoot_pct']:.1f}% "
            f"st={s['settling_time_s'] if s['settling_time_s'] is not None else 'not settled'}"
            for i, s in enumerate(stats)
        )
        print(f"{name}: {brief}")
    return EXIT_OK


def _cmd_report(args, client: Client) -> int:
    report_path = args.report or os.path.join(args.out, "report.json")
    try:
        with open(report_path, encoding="utf-8") as fh:
            report = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read report {report_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"report {report_path} is not valid JSON: {exc}") from exc
    data = client.post("/report/tables", {"report": report})
    path = _write(args.out, "tables.md", data["tables_md"])
    print(f"wrote {path}")
    return EXIT_OK


def _cmd_serve(args, client: Client) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pidlab",
        description="PID auto-tuning lab: simulate, tune (Ziegler-Nichols / particle swarm), "
        "identify, and compare controllers on the benchmark plant.",
    )
    parser.add_argument("--version", action="version", version=f"pidlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config JSON (defaults apply when omitted)")
        p.add_argument("--out", default="pidlab-out", help="output directory (default: %(default)s)")
        p.add_argument("--seed", type=int, help="override the config's seed(s)")
        p.add_argument("--server", help="base URL of a running service (default: in-process)")

    p = sub.add_parser("simulate", help="open- or closed-loop simulation")
    common(p)
    p.add_argument("--mode", choices=["open", "closed"], default="closed")
    p.add_argument("--steps", help="open loop: step amplitudes 'u1,u2' (default 1,1)")
    p.add_argument("--gains", help="closed loop: 'kp1,ki1,kd1,kp2,ki2,kd2'")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("tune-zn", help="Ziegler-Nichols open- and closed-loop tuning")
    common(p)
    p.set_defaults(func=_cmd_tune_zn)

    p = sub.add_parser("tune-pso", help="one swarm tuning run")
    common(p)
    p.add_argument("--index", choices=["iae", "ise", "itse"], help="objective index")
    p.set_defaults(func=_cmd_tune_pso)

    p = sub.add_parser("identify", help="fit fuzzy models from input/output data")
    common(p)
    p.add_argument("--io-csv", help="existing trajectory CSV; generated when omitted")
    p.set_defaults(func=_cmd_identify)

    p = sub.add_parser("compare", help="full baseline-vs-swarm comparison study")
    common(p)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("report", help="re-render tables.md from a stored report.json")
    common(p)
    p.add_argument("--report", help="report path (default: <out>/report.json)")
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    client = Client(getattr(args, "server", None))
    try:
        return args.func(args, client)
    except ApiError as exc:
        detail = exc.body.get("detail") if isinstance(exc.body, dict) else exc.body
        print(f"error ({exc.status}): {detail}", file=sys.stderr)
        return EXIT_CONFIG if exc.status in (400, 422) else EXIT_NUMERICAL
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PidLabError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
