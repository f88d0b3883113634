"""Command-line entry point.

Every subcommand resolves its configuration as built-in defaults, then an
optional ``--config`` file (flat ``key = value`` lines or a previously written
``manifest.json``), then explicit flags. The fully resolved configuration is
echoed into ``manifest.json`` next to the artifacts, so passing that manifest
back through ``--config`` reproduces the run.

Exit codes: 0 on success, 1 when a computation fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import metadata
from pathlib import Path
from typing import Callable

import numpy as np

from . import io
from .config import JOBS_ENV, OUT_DIR_ENV
from .equilibria import all_equilibria, saddle_point
from .errors import SkillflowError
from .estimation import current_state, estimate_params, predict_outcome, read_sessions
from .model import ModelParams, PhaseState, params_from_mapping, validate_params
from .performance import crossing_curve, crossing_time, performance_gap
from .separatrix import SdeMethod, basin_grid, cell_centres, compute_separatrix, psi_approx
from .simulate import DiscreteSimConfig, SdeConfig, integrate_ode, simulate_discrete, simulate_sde


class UsageError(Exception):
    """Bad flags, config keys or parameter values."""


# -- option types -------------------------------------------------------------


def _floatlist(v) -> tuple[float, ...]:
    if isinstance(v, (list, tuple)):
        return tuple(float(x) for x in v)
    return tuple(float(x) for x in str(v).replace(";", ",").split(",") if x.strip())


def _bool(v) -> bool:
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in {"1", "true", "yes", "on"}:
        return True
    if s in {"0", "false", "no", "off", ""}:
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _optional(conv):
    def f(v):
        return None if v is None or (isinstance(v, str) and v.strip().lower() in {"", "none", "null"}) else conv(v)

    f.__name__ = conv.__name__
    return f


@dataclass(frozen=True)
class Opt:
    conv: Callable
    default: object
    help: str


PARAM_OPTS = {
    "theta_a": Opt(float, 0.5, "AI skill"),
    "kappa": Opt(float, 3.0, "delegation rate"),
    "delta": Opt(float, 2.0, "skill decay rate"),
    "theta_d": Opt(float, 0.0, "default skill under non-use"),
    "variant": Opt(_optional(str), None, "model variant tag (Simplified, General, NoAI, JaggedAI, ...)"),
    "theta_tilde_a": Opt(_optional(float), None, "perceived AI skill (MisperceivedAI)"),
    "alpha": Opt(_optional(float), None, "downward delegation factor (Asymmetric)"),
    "q": Opt(_optional(float), None, "detection probability (DetectionPenalty)"),
    "support": Opt(_optional(_floatlist), None, "comma list of AI skills (JaggedAI)"),
    "weights": Opt(_optional(_floatlist), None, "comma list of probabilities (JaggedAI)"),
}

_INIT = {
    "theta0": Opt(float, 0.4, "initial skill"),
    "p0": Opt(float, 0.3, "initial delegation level"),
}


# -- subcommands --------------------------------------------------------------
#
# Each runner takes the resolved config, the model parameters and the output
# directory. It writes its artifacts and returns (output paths, summary).


def _init(cfg) -> PhaseState:
    return PhaseState(cfg["theta0"], cfg["p0"])


def run_simulate(cfg, params, out: Path):
    mode = cfg["mode"]
    if mode == "ode":
        traj = integrate_ode(params, _init(cfg), cfg["t_end"], cfg["step"], record_every=cfg["record_every"])
    elif mode == "discrete":
        traj = simulate_discrete(params, _init(cfg), DiscreteSimConfig.for_horizon(cfg["eta"], cfg["t_end"], cfg["seed"]))
        if cfg["record_every"] > 1:
            idx = np.unique(np.append(np.arange(0, len(traj), cfg["record_every"]), len(traj) - 1))
            traj = type(traj)(traj.times[idx], traj.theta[idx], traj.p[idx], traj.terminal, None, traj.meta)
    elif mode == "sde":
        sde = SdeConfig(cfg["sigma"], cfg["sde_step"], cfg["seed"], cfg["t_end"])
        traj = simulate_sde(params, _init(cfg), sde, record_every=cfg["record_every"])
    else:
        raise UsageError(f"mode must be ode, discrete or sde, got {mode!r}")
    paths = [io.write_trajectory(out / "trajectory.csv", traj), io.write_json(out / "trajectory.json", traj.to_dict())]
    fin = traj.final
    return paths, {"theta_final": fin.theta, "p_final": fin.p, "terminal": traj.terminal.value}


def run_equilibria(cfg, params, out: Path):
    eqs = all_equilibria(params)
    path = io.write_json(out / "equilibria.json", {"params": params.to_dict(), "equilibria": [e.to_dict() for e in eqs]})
    s = eqs[-1].state
    return [path], {"n_equilibria": len(eqs), "saddle_theta": s.theta, "saddle_p": s.p}


def run_separatrix(cfg, params, out: Path):
    sep = compute_separatrix(params, cfg["resolution"])
    try:
        approx = psi_approx(params).to_dict()
    except SkillflowError as exc:
        approx = {"error": type(exc).__name__, "message": str(exc)}
    info = {"saddle": sep.saddle.to_dict(), "saddle_index": sep.saddle_index, "n_nodes": len(sep.theta), "approximation": approx}
    paths = [io.write_separatrix(out / "separatrix.csv", sep), io.write_json(out / "separatrix.json", info)]
    return paths, {"saddle_theta": sep.saddle.theta, "saddle_p": sep.saddle.p}


def run_basin(cfg, params, out: Path):
    th, pp = cell_centres(cfg["n_theta"]), cell_centres(cfg["n_p"])
    if cfg["method"] == "deterministic":
        method = "deterministic"
    elif cfg["method"] == "sde":
        method = SdeMethod(cfg["sigma"], cfg["n_samples"], cfg["seed"], cfg["sde_step"], cfg["sde_t_end"])
    else:
        raise UsageError(f"method must be deterministic or sde, got {cfg['method']!r}")
    grid = basin_grid(params, th, pp, method)
    info = {"method": grid.method, "meta": grid.meta, "shape": list(grid.cells.shape),
            "layout": "rows are theta cell centres, columns are p cell centres"}
    paths = [io.write_basin(out / "basin.csv", grid), io.write_json(out / "basin.json", info)]
    if method == "deterministic":
        summary = {"high_fraction": float(np.mean(grid.cells == "High"))}
    else:
        summary = {"high_fraction": float(np.mean(grid.cells))}
    return paths, summary


def run_gap(cfg, params, out: Path):
    series = performance_gap(params, _init(cfg), cfg["t_end"], cfg["step"])
    return [io.write_gap(out / "gap.csv", series)], {"gap_final": float(series.gap[-1])}


def run_crossing(cfg, params, out: Path):
    res = crossing_time(params, _init(cfg), cfg["t_max"], step=cfg["step"])
    path = io.write_json(out / "crossing.json", res.to_dict())
    return [path], {"t_c": res.t_c, "t_star": res.t_star, "sign_changes": res.sign_changes}


def _value_list(cfg) -> tuple[float, ...]:
    if cfg.get("values") is not None:
        return cfg["values"]
    spec = cfg.get("range")
    if spec is None:
        return ()
    try:
        start, stop, step = (float(x) for x in str(spec).split(":"))
    except ValueError:
        raise UsageError(f"range must be start:stop:step, got {spec!r}") from None
    if step <= 0.0:
        raise UsageError("range step must be positive")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    # rounding keeps 0.4 + k * 0.01 printable as the decimal the user typed
    return tuple(float(np.round(start + k * step, 12)) for k in range(max(0, n)))


def run_crossing_curve(cfg, params, out: Path):
    vals = _value_list(cfg)
    rows = crossing_curve(params, _init(cfg), vals, t_max=cfg["t_max"])
    path = io.write_csv(
        out / "crossing_curve.csv",
        ("theta_a", "t_c", "t_star", "sign_changes"),
        ((v, r.t_c, r.t_star, r.sign_changes) for v, r in rows),
    )
    return [path], {"n_points": len(rows)}


def run_estimate(cfg, params, out: Path):
    if not cfg["input"]:
        raise UsageError("estimate needs --input")
    try:
        records = read_sessions(cfg["input"])
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read sessions: {exc}") from None
    est = estimate_params(records, literal_theta_a=cfg["literal_theta_a"])
    cur = current_state(records)
    if cfg["theta"] is not None or cfg["p"] is not None:
        cur = PhaseState(cur.theta if cfg["theta"] is None else cfg["theta"], cur.p if cfg["p"] is None else cfg["p"])
    doc = est.to_dict()
    try:
        doc["saddle"] = saddle_point(est.model_params()).to_dict()
        pred = predict_outcome(est, cur)
        doc["prediction"] = pred.to_dict()
    except SkillflowError as exc:
        doc["prediction"] = {"error": type(exc).__name__, "message": str(exc)}
        pred = None
    doc["current_state"] = cur.to_dict()
    path = io.write_json(out / "estimate.json", doc)
    summary = dict(doc["estimates"])
    summary["label"] = pred.label if pred else "error"
    return [path], summary


@dataclass(frozen=True)
class Command:
    run: Callable
    opts: dict
    params: bool = True
    help: str = ""
    seeded: bool = False


COMMANDS: dict[str, Command] = {
    "simulate": Command(
        run_simulate,
        {
            **_INIT,
            "t_end": Opt(float, 50.0, "model-time horizon"),
            "mode": Opt(str, "ode", "ode, discrete or sde"),
            "step": Opt(_optional(float), None, "RK4 step (default 1e-3)"),
            "eta": Opt(float, 1e-3, "discrete learning rate; one round is 2*eta of model time"),
            "sigma": Opt(float, 0.1, "SDE noise level"),
            "sde_step": Opt(float, 1e-2, "Euler-Maruyama step"),
            "seed": Opt(int, 0, "random seed"),
            "record_every": Opt(int, 1, "keep every n-th state"),
        },
        help="integrate one trajectory (ODE, discrete learner or SDE)",
        seeded=True,
    ),
    "equilibria": Command(run_equilibria, {}, help="fixed points with kinds and eigen-data"),
    "separatrix": Command(
        run_separatrix,
        {"resolution": Opt(_optional(int), None, "number of resampled nodes (default 512)")},
        help="basin boundary through the saddle and its piecewise-linear approximation",
    ),
    "basin": Command(
        run_basin,
        {
            "n_theta": Opt(int, 21, "grid cells along theta"),
            "n_p": Opt(int, 21, "grid cells along p"),
            "method": Opt(str, "deterministic", "deterministic or sde"),
            "sigma": Opt(float, 0.1, "SDE noise level"),
            "n_samples": Opt(int, 200, "SDE paths per cell"),
            "seed": Opt(int, 0, "random seed"),
            "sde_step": Opt(float, 1e-2, "Euler-Maruyama step"),
            "sde_t_end": Opt(float, 100.0, "SDE horizon"),
        },
        help="basin labels (or high-skill probabilities) on a grid of cell centres",
        seeded=True,
    ),
    "gap": Command(
        run_gap,
        {**_INIT, "t_end": Opt(float, 20.0, "horizon"), "step": Opt(_optional(float), None, "RK4 step")},
        help="assisted minus unassisted loss over time",
    ),
    "crossing": Command(
        run_crossing,
        {**_INIT, "t_max": Opt(_optional(float), None, "scan cap"), "step": Opt(_optional(float), None, "RK4 step")},
        help="time after which the assisted learner is worse for good",
    ),
    "crossing-curve": Command(
        run_crossing_curve,
        {
            **_INIT,
            "values": Opt(_optional(_floatlist), None, "comma list of AI skills"),
            "range": Opt(_optional(str), "0.4:0.9:0.01", "start:stop:step of AI skills (inclusive)"),
            "t_max": Opt(_optional(float), None, "scan cap"),
        },
        help="crossing time as a function of AI skill",
    ),
    "estimate": Command(
        run_estimate,
        {
            "input": Opt(_optional(str), None, "session CSV"),
            "literal_theta_a": Opt(_bool, False, "average the per-session AI losses before inverting"),
            "theta": Opt(_optional(float), None, "override the current skill"),
            "p": Opt(_optional(float), None, "override the current delegation level"),
        },
        params=False,
        help="fit parameters from session logs and predict the long-run outcome",
    ),
}

SWEEP_OPTS = {
    "op": Opt(_optional(str), None, "subcommand to run at each point"),
    "vary": Opt(_optional(str), None, "key to vary"),
    "values": Opt(_optional(_floatlist), None, "comma list of values"),
    "range": Opt(_optional(str), None, "start:stop:step of values (inclusive)"),
}


# -- configuration ------------------------------------------------------------


def _all_opts(cmd: Command) -> dict:
    return {**(PARAM_OPTS if cmd.params else {}), **cmd.opts}


def _load_config(path: str, command: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"bad JSON config: {exc}") from None
        if "config" in doc and "command" in doc:
            if doc["command"] != command:
                raise UsageError(f"manifest is for {doc['command']!r}, not {command!r}")
            doc = doc["config"]
        return {str(k).replace("-", "_"): v for k, v in doc.items()}
    from .model import parse_keyvalue

    try:
        return parse_keyvalue(text)
    except Exception as exc:  # configparser raises several unrelated types
        raise UsageError(f"bad config file: {exc}") from None


def _convert(opts: dict, raw: dict, where: str) -> dict:
    out = {}
    for k, v in raw.items():
        if k not in opts:
            raise UsageError(f"unknown key {k!r} in {where}")
        try:
            out[k] = opts[k].conv(v)
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad value for {k}: {exc}") from None
    return out


def resolve(command: str, file_cfg: dict, flags: dict) -> dict:
    """Defaults, then file, then flags."""
    opts = _all_opts(COMMANDS[command])
    cfg = {k: o.default for k, o in opts.items()}
    cfg.update(_convert(opts, file_cfg, "config"))
    cfg.update(_convert(opts, flags, "flags"))
    return cfg


def build_params(cfg: dict) -> ModelParams:
    keys = ("theta_a", "kappa", "delta", "theta_d", "variant", "theta_tilde_a", "alpha", "q", "support", "weights")
    m = {k: cfg[k] for k in keys if cfg.get(k) is not None}
    try:
        params = params_from_mapping(m)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"bad parameters: {exc}") from None
    report = validate_params(params)
    if not report.ok:
        raise UsageError("; ".join(i.message for i in report.errors))
    cfg["variant"] = params.variant.tag
    return params


# -- execution ----------------------------------------------------------------


def execute(command: str, cfg: dict, out: Path):
    """Run one resolved command; returns (output paths, summary)."""
    cmd = COMMANDS[command]
    params = build_params(cfg) if cmd.params else None
    out.mkdir(parents=True, exist_ok=True)
    return cmd.run(cfg, params, out)


def _point(args):
    op, cfg, out = args
    try:
        paths, summary = execute(op, cfg, Path(out))
        return [str(p) for p in paths], summary, None
    except (SkillflowError, UsageError) as exc:
        return [], {}, f"{type(exc).__name__}: {exc}"


def run_sweep(cfg: dict, extra: dict, out: Path, jobs: int):
    op, vary = cfg["op"], cfg["vary"]
    if op not in COMMANDS:
        raise UsageError(f"sweep op must be one of {sorted(COMMANDS)}, got {op!r}")
    opts = _all_opts(COMMANDS[op])
    if vary not in opts:
        raise UsageError(f"cannot vary {vary!r} for {op}")
    base = resolve(op, {}, extra)
    values = _value_list(cfg)
    tasks = []
    for i, v in enumerate(values):
        point = dict(base)
        point[vary] = opts[vary].conv(v)
        tasks.append((op, point, str(out / f"point_{i:03d}")))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_point, tasks))  # map keeps submission order
    else:
        results = [_point(t) for t in tasks]
    keys = sorted({k for _, s, _ in results for k in s})
    out.mkdir(parents=True, exist_ok=True)
    index = out / "index.csv"
    with index.open("w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["index", vary, "status", *keys, "dir", "error"])
        for i, (v, (paths, summary, err)) in enumerate(zip(values, results)):
            cells = [io.fmt(summary[k]) if k in summary else "" for k in keys]
            w.writerow([i, io.fmt(v), "ok" if err is None else "error", *cells, f"point_{i:03d}", err or ""])
    paths = [index] + [Path(p) for r in results for p in r[0]]
    failed = sum(err is not None for _, _, err in results)
    sweep_cfg = {**cfg, "base": base}
    return paths, (failed, len(tasks)), sweep_cfg


def _version() -> str:
    try:
        return metadata.version("skillflow")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(out: Path, command: str, cfg: dict, paths, started: float, seeds=None) -> Path:
    rel = sorted(os.path.relpath(p, out) for p in paths)
    doc = {
        "command": command,
        "config": cfg,
        "seeds": seeds or {},
        "version": _version(),
        "outputs": rel,
        "wall_time": time.perf_counter() - started,
    }
    return io.write_json(out / "manifest.json", doc)


# -- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _add_opts(p: argparse.ArgumentParser, opts: dict) -> None:
    for k, o in opts.items():
        default = "" if o.default is None else f" (default {o.default})"
        p.add_argument("--" + k.replace("_", "-"), dest=k, default=argparse.SUPPRESS, help=o.help + default)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file or manifest.json to start from")
    p.add_argument("--out", help=f"output directory (env {OUT_DIR_ENV}, default ./skillflow-out)")
    p.add_argument("--error-json", action="store_true", help="print failures as JSON on stderr")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skillflow", description="Skill and delegation dynamics: simulate, analyse, sweep, estimate.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, cmd in COMMANDS.items():
        p = sub.add_parser(name, help=cmd.help, description=cmd.help)
        _add_common(p)
        _add_opts(p, _all_opts(cmd))
    p = sub.add_parser("sweep", help="run one subcommand over a list of values", description=(
        "Run OP once per value of VARY. Other keys of OP may be given in --config or with --set KEY=VALUE."))
    _add_common(p)
    _add_opts(p, SWEEP_OPTS)
    _add_opts(p, PARAM_OPTS)
    # options of every op; the chosen op rejects the ones it does not take
    shared = {}
    for cmd in COMMANDS.values():
        for k, o in cmd.opts.items():
            if k not in SWEEP_OPTS and k not in PARAM_OPTS:
                shared.setdefault(k, Opt(o.conv, None, o.help))
    _add_opts(p, shared)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="fixed option for OP")
    p.add_argument("--jobs", type=int, help=f"worker processes (env {JOBS_ENV}, default all CPUs)")
    return parser


def _jobs(ns) -> int:
    if getattr(ns, "jobs", None):
        return max(1, ns.jobs)
    env = os.environ.get(JOBS_ENV, "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _out_dir(ns) -> Path:
    return Path(ns.out or os.environ.get(OUT_DIR_ENV) or "skillflow-out")


def _main(argv) -> int:
    ns = make_parser().parse_args(argv)
    started = time.perf_counter()
    out = _out_dir(ns)
    meta = {"config", "out", "error_json", "command", "set", "jobs"}
    flags = {k: v for k, v in vars(ns).items() if k not in meta}
    if ns.command == "sweep":
        file_cfg = _load_config(ns.config, "sweep") if ns.config else {}
        base = file_cfg.pop("base", {}) if isinstance(file_cfg.get("base"), dict) else {}
        sweep_keys = set(SWEEP_OPTS)
        cfg = {k: o.default for k, o in SWEEP_OPTS.items()}
        cfg.update(_convert(SWEEP_OPTS, {k: v for k, v in file_cfg.items() if k in sweep_keys}, "config"))
        cfg.update(_convert(SWEEP_OPTS, {k: v for k, v in flags.items() if k in sweep_keys}, "flags"))
        if not cfg["op"] or not cfg["vary"]:
            raise UsageError("sweep needs --op and --vary")
        extra = dict(base)
        extra.update({k: v for k, v in file_cfg.items() if k not in sweep_keys})
        extra.update({k: v for k, v in flags.items() if k not in sweep_keys})
        for item in ns.set:
            if "=" not in item:
                raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
            k, v = item.split("=", 1)
            extra[k.strip().replace("-", "_")] = v.strip()
        paths, failed, sweep_cfg = run_sweep(cfg, extra, out, _jobs(ns))
        seeds = {"seed": sweep_cfg["base"]["seed"]} if "seed" in sweep_cfg["base"] else {}
        write_manifest(out, "sweep", sweep_cfg, paths, started, seeds)
        failed, total = failed
        if failed:
            print(f"{failed} of {total} sweep points failed; see index.csv", file=sys.stderr)
            return 1
        return 0
    file_cfg = _load_config(ns.config, ns.command) if ns.config else {}
    cfg = resolve(ns.command, file_cfg, flags)
    paths, _ = execute(ns.command, cfg, out)
    seeds = {"seed": cfg["seed"]} if COMMANDS[ns.command].seeded else {}
    write_manifest(out, ns.command, cfg, paths, started, seeds)
    return 0


def _report(exc: Exception, code: int, as_json: bool) -> int:
    if as_json:
        doc = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(doc, sort_keys=True), file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    as_json = "--error-json" in argv
    try:
        return _main(argv)
    except UsageError as exc:
        return _report(exc, 2, as_json)
    except SkillflowError as exc:
        return _report(exc, 1, as_json)


if __name__ == "__main__":
    sys.exit(main())
