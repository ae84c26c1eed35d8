"""``qsd`` command line.

Exit status: 0 on success, 2 on invalid input (bad model, schedule, config
or flags), 1 on internal failures.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as exp
from .errors import ConfigError, QSDError
from .fleming_viot import run_fv_batch
from .io import csv_text, dumps, load_model, write_text
from .sa import run_sa_batch
from .schedules import parse_schedule
from .spectral import psi_knots, qsd_exact


def _vector(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _initial_state(text: str):
    if text == "sample-from-x0":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("X0 must be a state index or 'sample-from-x0'") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        write_text(out, text)
    else:
        sys.stdout.write(text)


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model JSON file with p_hat, p0 and optional labels")
    p.add_argument("--renormalize", action="store_true", help="renormalise rows before validation")


def _run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--replicas", type=int, default=1, help="independent replicas (default 1)")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default QSD_WORKERS or CPU count)")
    p.add_argument("--backend", choices=("numba", "numpy"), default=None, help="kernel backend (default QSD_BACKEND or numba)")
    p.add_argument("--x0", type=_vector, default=None, help="initial measure, comma separated (default uniform)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qsd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model file")
    _model_args(p)

    p = sub.add_parser("exact", help="QSD, eigenvalue, spectrum and rate constant as JSON")
    _model_args(p)
    p.add_argument("--tol", type=float, default=1e-12, help="eigen-residual tolerance (default 1e-12)")
    p.add_argument("--out", default=None, help="output JSON path (default stdout)")

    p = sub.add_parser("sa", help="run the reinforced walk and write checkpoints as CSV")
    _model_args(p)
    _run_args(p)
    p.add_argument("--schedule", default="power:A=1,alpha=1,beta=0", help='step schedule, e.g. "power:A=1,alpha=1,beta=0", "harmonic-shift", "weights:a=0"')
    p.add_argument("--steps", type=int, required=True, help="number of steps")
    p.add_argument("--X0", type=_initial_state, default="sample-from-x0", help="initial state index or 'sample-from-x0'")
    p.add_argument("--ratio", type=float, default=1.25, help="geometric checkpoint ratio (default 1.25)")
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")

    p = sub.add_parser("fv", help="run the Fleming-Viot particle system and write the path as CSV")
    _model_args(p)
    _run_args(p)
    p.add_argument("--N", type=int, required=True, help="number of particles")
    p.add_argument("--T", type=float, required=True, help="time horizon (N moves per unit time)")
    p.add_argument("--knots", type=int, default=512, help="number of output times (default 512)")
    p.add_argument("--out", default=None, help="output CSV path (default stdout)")

    p = sub.add_parser("exp", help="run an experiment from a JSON config")
    p.add_argument("kind", choices=("rate", "clt", "law", "fvdev"))
    p.add_argument("--config", required=True, help="experiment JSON config")
    p.add_argument("--out", default=None, help="report JSON path (default stdout)")
    p.add_argument("--csv", default=None, help="per-replica CSV path (overrides the config's csv)")
    p.add_argument("--workers", type=int, default=None, help="worker threads (default QSD_WORKERS or CPU count)")
    return parser


# ------------------------------------------------------------------ commands


def cmd_validate(args) -> str:
    chain = load_model(args.model, args.renormalize)
    return dumps({"valid": True, "d": chain.d, "chain_sha256": chain.digest()})


def cmd_exact(args) -> str:
    chain = load_model(args.model, args.renormalize)
    out = qsd_exact(chain, args.tol).to_json()
    out["chain_sha256"] = chain.digest()
    return dumps(out)


def cmd_sa(args) -> str:
    chain = load_model(args.model, args.renormalize)
    schedule = parse_schedule(args.schedule)
    nu = qsd_exact(chain).nu
    b = run_sa_batch(
        chain, schedule, args.steps, args.x0, args.X0, args.seed, args.replicas,
        ratio=args.ratio, workers=args.workers, backend=args.backend,
    )
    err = b.err_l1(nu)
    d = chain.d
    header = ["replica", "n", "tau", "gamma", "err_l1", "absorptions"] + [f"x_{k + 1}" for k in range(d)]
    rows = (
        [int(r), int(b.n[c]), b.tau[c], b.gamma[c], err[i, c], int(b.absorptions[i, c]), *b.x[i, c]]
        for i, r in enumerate(b.replicas)
        for c in range(len(b.n))
    )
    return csv_text(header, rows)


def cmd_fv(args) -> str:
    chain = load_model(args.model, args.renormalize)
    x0 = np.full(chain.d, 1.0 / chain.d) if args.x0 is None else np.asarray(args.x0)
    _, paths, _ = run_fv_batch(chain, args.N, args.T, x0, args.seed, args.replicas, workers=args.workers, backend=args.backend)
    steps = paths.shape[1] - 1
    psi = psi_knots(chain, x0, 1.0 / args.N, steps)
    idx = np.unique(np.round(np.linspace(0, steps, max(args.knots, 2))).astype(np.int64))
    d = chain.d
    header = ["replica", "t"] + [f"x_{k + 1}" for k in range(d)] + [f"psi_{k + 1}" for k in range(d)] + ["dev_l1"]
    rows = []
    for r in range(paths.shape[0]):
        x = paths[r, idx] / args.N
        dev = np.abs(x - psi[idx]).sum(axis=1)
        for m, n in enumerate(idx):
            rows.append([r, float(n / args.N), *x[m], *psi[n], dev[m]])
    return csv_text(header, rows)


_EXP_KEYS = {
    "common": {"model", "seed", "replicas", "backend", "csv", "renormalize"},
    "rate": {"schedule", "steps", "x0", "X0", "ratio", "decades"},
    "clt": {"schedule", "n_targets", "x0", "X0"},
    "law": {"schedule", "n", "x0", "X0"},
    "fvdev": {"N_list", "T", "x0", "equilibrium"},
}
_EXP_REQUIRED = {
    "rate": {"schedule", "steps"},
    "clt": {"schedule", "n_targets"},
    "law": {"schedule", "n"},
    "fvdev": {"N_list", "T"},
}


def _load_config(path: str, kind: str) -> tuple[dict, Path]:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    allowed = _EXP_KEYS["common"] | _EXP_KEYS[kind]
    unknown = set(cfg) - allowed
    if unknown:
        raise ConfigError(f"unknown config keys for {kind}: {sorted(unknown)}")
    missing = ({"model"} | _EXP_REQUIRED[kind]) - set(cfg)
    if missing:
        raise ConfigError(f"missing config keys for {kind}: {sorted(missing)}")
    return cfg, p.parent


def cmd_exp(args) -> tuple[str, str | None, str | None]:
    cfg, base = _load_config(args.config, args.kind)
    model = cfg["model"]
    if isinstance(model, str) and not Path(model).is_absolute():
        model = str(base / model)
    chain = load_model(model, bool(cfg.get("renormalize", False)))
    seed = int(cfg.get("seed", 0))
    replicas = int(cfg.get("replicas", 1))
    run = dict(workers=args.workers, backend=cfg.get("backend"))
    x0 = cfg.get("x0")
    X0 = cfg.get("X0", "sample-from-x0")
    d = chain.d
    if args.kind == "rate":
        schedule = parse_schedule(cfg["schedule"])
        rep, _ = exp.rate_experiment(
            chain, schedule, int(cfg["steps"]), replicas, seed, x0, X0,
            ratio=float(cfg.get("ratio", 1.25)), decades=float(cfg.get("decades", 2.0)), **run,
        )
        rows = ([r, a, b] for r, (a, b) in enumerate(zip(rep.slopes_tau, rep.slopes_ln_n)))
        table = csv_text(["replica", "slope_tau", "slope_ln_n"], rows)
    elif args.kind == "clt":
        schedule = parse_schedule(cfg["schedule"])
        rep, b = exp.clt_experiment(chain, schedule, cfg["n_targets"], replicas, seed, x0, X0, **run)
        nu = qsd_exact(chain).nu
        rows = (
            [int(r), int(b.n[c]), b.gamma[c], *((b.x[i, c] - nu) / np.sqrt(b.gamma[c]))]
            for i, r in enumerate(b.replicas)
            for c in range(len(b.n))
        )
        table = csv_text(["replica", "n", "gamma"] + [f"y_{k + 1}" for k in range(d)], rows)
    elif args.kind == "law":
        schedule = parse_schedule(cfg["schedule"])
        rep, b = exp.law_experiment(chain, schedule, cfg["n"], replicas, seed, x0, X0, **run)
        rows = ([int(r), int(b.n[c]), int(b.current[i, c])] for i, r in enumerate(b.replicas) for c in range(len(b.n)))
        table = csv_text(["replica", "n", "state"], rows)
    else:
        if x0 is None:
            x0 = [1.0 / d] * d
        rep, fv_rows = exp.fv_deviation_experiment(chain, cfg["N_list"], float(cfg["T"]), x0, replicas, seed, **run)
        table = csv_text(["N", "replica", "sup_l1"], fv_rows)
    report = rep.to_json()
    eq = cfg.get("equilibrium") if args.kind == "fvdev" else None
    if eq is not None:
        if not isinstance(eq, dict) or set(eq) - {"N", "window"} or not {"N", "window"} <= set(eq):
            raise ConfigError('equilibrium must be {"N": int, "window": [lo, hi]}')
        report["equilibrium"] = exp.fv_equilibrium(chain, int(eq["N"]), tuple(eq["window"]), replicas, seed, **run).to_json()
    report["config"] = cfg
    return dumps(report), table, args.csv or cfg.get("csv")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "validate":
            _emit(cmd_validate(args), None)
        elif args.command == "exact":
            _emit(cmd_exact(args), args.out)
        elif args.command == "sa":
            _emit(cmd_sa(args), args.out)
        elif args.command == "fv":
            _emit(cmd_fv(args), args.out)
        else:
            text, table, csv_path = cmd_exp(args)
            _emit(text, args.out)
            if csv_path:
                write_text(csv_path, table)
    except FileNotFoundError as exc:
        print(f"error [io.NotFound]: {exc}", file=sys.stderr)
        return 2
    except QSDError as exc:
        status = 2 if isinstance(exc, ValueError) else 1
        print(f"error [{exc.code}]: {exc}", file=sys.stderr)
        return status
    except ValueError as exc:
        print(f"error [cli.InvalidArgument]: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"internal error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
