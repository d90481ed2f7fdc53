"""Command line front end: ``run``, ``check``, ``oracle-compare`` and ``sweep``.

Configuration is a JSON document with the sections ``params``, ``grid``,
``stepping``, ``initial``, ``entropy``, ``outputs``, ``oracle`` and ``sweep``
plus a top-level ``seed``. Missing keys take defaults; unknown keys are
rejected. ``--set section.key=value`` overrides single entries, with the value
parsed as JSON when possible and as a plain string otherwise.

Exit codes: 0 success, 1 failed check, 2 solver abort, 3 configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core_types import TAIL_BUDGET, ConfigError, ModelParams, build_grid
from .equilibrium import CONSTRAINT_MODES, SHAPES, InitialSpec, make_initial
from .hypocoercivity import default_delta, theory_constants
from .inequality_lab import COLUMNS, fit_decay_rate
from .transport_solver import MODES, VELOCITY_RULES, SolverAbort, StepConfig, run

log = logging.getLogger("runtumble")

EXIT_OK, EXIT_CHECK, EXIT_ABORT, EXIT_CONFIG = 0, 1, 2, 3

DEFAULTS = {
    "params": {"chi": 0.5, "alpha": 0.0, "sigma_override": None, "mode": "nonlinear"},
    "grid": {"L": 20.0, "n_cells": 4000},
    "stepping": {"cfl": 0.4, "t_final": 10.0, "diag_stride": 1, "watchdog_stride": 10,
                 "velocity": "centering", "fit_from": 1.0},
    "initial": {"shape": "gaussian_bump", "amplitude": 0.01, "center": 0.5, "width": 1.0, "seed": 0,
                "constraint_mode": "project_all", "compatible_origin": False},
    "entropy": {"delta_mode": "paper", "delta_value": None, "p_assumed": 0.0},
    "outputs": {"series_path": "series.csv", "snapshots": [], "snapshot_path": "snapshots.json",
                "report_path": "report.json"},
    "oracle": {"t_final": 1.0, "tol": 1e-12, "refinements": 3, "window": 0.5},
    "sweep": {"chi": [0.3, 0.5, 0.7], "alpha": [0.0], "amplitude": [0.01], "n_cells": [2000], "jobs": 1},
    "seed": 0,
}

# keys whose default is None, with the type they take when set
_NULLABLE = {("params", "sigma_override"): float, ("entropy", "delta_value"): float}


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    mode: str
    L: float
    n_cells: int
    stepping: StepConfig
    fit_from: float
    initial: InitialSpec
    delta: float
    p_assumed: float
    outputs: dict
    oracle: dict
    sweep: dict
    seed: int
    raw: dict


def _merge(base: dict, doc: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in doc.items():
        name = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"{name}: unknown key")
        default = base[key]
        if isinstance(default, dict):
            if not isinstance(val, dict):
                raise ConfigError(f"{name}: expected a table")
            out[key] = _merge(default, val, name + ".")
        else:
            out[key] = _coerce(name, default, val)
    return out


def _coerce(name: str, default, val):
    section_key = tuple(name.split("."))
    if default is None:
        if val is None:
            return None
        typ = _NULLABLE.get(section_key, float)
        return _coerce(name, typ(0), val)
    if isinstance(default, bool):
        if not isinstance(val, bool):
            raise ConfigError(f"{name}: expected a boolean, got {val!r}")
        return val
    if isinstance(default, int):
        if isinstance(val, bool) or not (isinstance(val, int) or (isinstance(val, float) and val.is_integer())):
            raise ConfigError(f"{name}: expected an integer, got {val!r}")
        return int(val)
    if isinstance(default, float):
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"{name}: expected a number, got {val!r}")
        return float(val)
    if isinstance(default, str):
        if not isinstance(val, str):
            raise ConfigError(f"{name}: expected a string, got {val!r}")
        return val
    if isinstance(default, list):
        if not isinstance(val, list):
            raise ConfigError(f"{name}: expected a list, got {val!r}")
        return list(val)
    raise ConfigError(f"{name}: unsupported value {val!r}")


def _set_dotted(doc: dict, key: str, value):
    parts = key.split(".")
    node = doc
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{key}: cannot descend into a scalar")
    node[parts[-1]] = value


def parse_overrides(items) -> dict:
    doc: dict = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        _set_dotted(doc, key.strip(), value)
    return doc


def _deep_update(a: dict, b: dict) -> dict:
    out = copy.deepcopy(a)
    for k, v in b.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = v
    return out


def _guard(key: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def parse_config(text: str, overrides: dict | None = None) -> RunConfig:
    """Validate a JSON document (empty means all defaults) and fill defaults.

    Raises
    ------
    ConfigError
        For malformed documents, unknown keys, wrong types and violated
        preconditions; the message starts with the offending key.
    """
    text = text.strip()
    try:
        doc = json.loads(text) if text else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config: top level must be an object")
    if overrides:
        doc = _deep_update(doc, overrides)
    raw = _merge(DEFAULTS, doc)

    pr = raw["params"]
    if pr["mode"] not in MODES:
        raise ConfigError(f"params.mode: must be one of {MODES}")
    if not 0 < pr["chi"] < 1:
        raise ConfigError("params.chi: chi must be in (0,1)")
    if not pr["alpha"] >= 0:
        raise ConfigError("params.alpha: alpha must be >= 0")
    params = _guard("params.sigma_override", ModelParams, pr["chi"], pr["alpha"], sigma=pr["sigma_override"])

    gr = raw["grid"]
    if not gr["L"] > 0:
        raise ConfigError("grid.L: must be > 0")
    key = "grid.n_cells" if gr["n_cells"] % 2 or gr["n_cells"] < 16 else "grid.L"
    _guard(key, build_grid, params, gr["L"], gr["n_cells"])

    st = raw["stepping"]
    if st["velocity"] not in VELOCITY_RULES:
        raise ConfigError(f"stepping.velocity: must be one of {VELOCITY_RULES}")
    if not 0 < st["cfl"] <= 1:
        raise ConfigError("stepping.cfl: must be in (0,1]")
    if not st["t_final"] >= 0:
        raise ConfigError("stepping.t_final: must be >= 0")
    for k in ("diag_stride", "watchdog_stride"):
        if st[k] < 1:
            raise ConfigError(f"stepping.{k}: must be >= 1")
    if not st["fit_from"] >= 0:
        raise ConfigError("stepping.fit_from: must be >= 0")

    ini = raw["initial"]
    if ini["shape"] not in SHAPES:
        raise ConfigError(f"initial.shape: must be one of {SHAPES}")
    if ini["constraint_mode"] not in CONSTRAINT_MODES:
        raise ConfigError(f"initial.constraint_mode: must be one of {CONSTRAINT_MODES}")
    for k in ("amplitude", "width"):
        if not ini[k] > 0 and not (k == "amplitude" and ini[k] == 0):
            raise ConfigError(f"initial.{k}: must be {'>= 0' if k == 'amplitude' else '> 0'}")
    initial = InitialSpec(**ini)

    en = raw["entropy"]
    if not 0 <= en["p_assumed"] < 1:
        raise ConfigError("entropy.p_assumed: must be in [0,1)")
    if en["delta_mode"] == "paper":
        delta = default_delta(params, en["p_assumed"])
    elif en["delta_mode"] == "manual":
        if en["delta_value"] is None or not 0 < en["delta_value"] < 1:
            raise ConfigError("entropy.delta_value: manual mode needs a value in (0,1)")
        delta = en["delta_value"]
    else:
        raise ConfigError("entropy.delta_mode: must be 'paper' or 'manual'")

    out = raw["outputs"]
    snaps = out["snapshots"]
    if any(isinstance(s, bool) or not isinstance(s, (int, float)) or s < 0 for s in snaps):
        raise ConfigError("outputs.snapshots: must be a list of nonnegative times")
    if any(s > st["t_final"] for s in snaps):
        raise ConfigError("outputs.snapshots: times must not exceed stepping.t_final")

    orc = raw["oracle"]
    if orc["refinements"] < 2:
        raise ConfigError("oracle.refinements: need at least 2 grids")
    if not 0 < orc["window"] <= 1:
        raise ConfigError("oracle.window: must be in (0,1]")
    sw = raw["sweep"]
    for k in ("chi", "alpha", "amplitude", "n_cells"):
        if not sw[k]:
            raise ConfigError(f"sweep.{k}: must be a nonempty list")
    for c in sw["chi"]:
        _guard("sweep.chi", ModelParams, c)
    if sw["jobs"] < 1:
        raise ConfigError("sweep.jobs: must be >= 1")

    stepping = StepConfig(cfl=st["cfl"], t_final=st["t_final"], diag_stride=st["diag_stride"],
                          watchdog_stride=st["watchdog_stride"], delta=delta,
                          snapshots=tuple(float(s) for s in snaps), velocity=st["velocity"])
    return RunConfig(params, pr["mode"], gr["L"], gr["n_cells"], stepping, st["fit_from"], initial,
                     delta, en["p_assumed"], out, orc, sw, raw["seed"], raw)


# --- outputs ---------------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return repr(float(x)) if not math.isfinite(x) else f"{float(x):.17g}"


def write_series(path: Path, series) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for row in series.rows():
            w.writerow([_fmt(v) for v in row])


def write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, allow_nan=True)


def _snapshots_doc(traj) -> dict:
    return {
        "y": traj.grid.y.tolist(),
        "snapshots": [{"t": t, "u": W.u.values.tolist(), "v": W.v.values.tolist()}
                      for t, W in sorted(traj.snapshots.items())],
    }


def _rate_summary(series, t0: float, t1: float) -> dict:
    t, wy = series.column("t"), series.column("normWy2")
    try:
        fit = fit_decay_rate(t, wy, (t0, t1))
    except ValueError as exc:
        return {"error": str(exc)}
    return asdict(fit)


# --- commands --------------------------------------------------------------------------------

def _simulate(cfg: RunConfig):
    g = build_grid(cfg.params, cfg.L, cfg.n_cells)
    W = make_initial(cfg.initial, cfg.params, g).W
    return run(W, cfg.params, cfg.stepping, cfg.mode, raise_on_abort=False)


def cmd_run(cfg: RunConfig, base: Path) -> int:
    traj, series = _simulate(cfg)
    write_series(base / cfg.outputs["series_path"], series)
    write_json(base / cfg.outputs["snapshot_path"], _snapshots_doc(traj))
    report = {"command": "run", "config": cfg.raw, "records": len(series),
              "rate_normWy2": _rate_summary(series, cfg.fit_from, cfg.stepping.t_final)}
    if traj.aborted is not None:
        report["abort"] = {"kind": traj.aborted.kind, "message": str(traj.aborted)}
        write_json(base / cfg.outputs["report_path"], report)
        log.error("solver abort: %s", traj.aborted)
        return EXIT_ABORT
    write_json(base / cfg.outputs["report_path"], report)
    log.info("run finished: %d records, rate %s", len(series), report["rate_normWy2"].get("gamma_hat"))
    return EXIT_OK


def _suite_kwargs(cfg: RunConfig) -> dict:
    chi, L, n, eps = cfg.params.chi, cfg.L, cfg.n_cells, cfg.initial.amplitude
    tf = cfg.stepping.t_final
    return {
        1: dict(chi=chi, L=L, n_cells=n),
        2: dict(chi=chi, L=L), 3: dict(chi=chi, L=L), 4: dict(chi=chi, alpha=cfg.params.alpha, L=L),
        5: dict(chi=chi, L=L), 6: dict(chi=chi, L=L),
        7: dict(chi=chi, L=L, n_cells=n, amplitude=eps),
        8: dict(chi=chi, L=L, n_cells=n, amplitude=eps),
        9: dict(chi=chi, L=L, n_cells=n, amplitude=eps, t_final=tf, fit_from=cfg.fit_from),
        10: dict(chi=chi, L=L, n_cells=n, amplitude=eps, t_final=tf, fit_from=cfg.fit_from),
        11: dict(chi=chi, L=L, n_cells=n, amplitude=eps, t_final=cfg.oracle["t_final"], tol=cfg.oracle["tol"]),
        12: {}, 13: dict(chi=chi, L=L, n_cells=n),
    }


def cmd_check(cfg: RunConfig, base: Path, only=None) -> int:
    from .suite import CRITERIA

    kwargs = _suite_kwargs(cfg)
    checks = []
    failed = False
    for k, fn in CRITERIA.items():
        if only and k not in only:
            continue
        try:
            results = fn(**kwargs[k])
        except SolverAbort as exc:
            results = []
            checks.append({"name": f"criterion {k}", "passed": False, "measured": None, "tolerance": None,
                           "details": {"abort": str(exc)}})
            failed = True
        for r in results:
            d = r.to_dict()
            d["name"] = f"{k}: {d['name']}"
            checks.append(d)
            failed |= not r.passed
        ok = all(r.passed for r in results) and bool(results)
        print(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}", flush=True)
    write_json(base / cfg.outputs["report_path"], {"command": "check", "config": cfg.raw, "checks": checks})
    return EXIT_CHECK if failed else EXIT_OK


def cmd_oracle(cfg: RunConfig, base: Path) -> int:
    from .characteristics_oracle import XdotPath, duhamel_solve, weighted_l1_distance
    from .suite import orders

    p, tf = cfg.params, cfg.oracle["t_final"]
    ns = [cfg.n_cells // 2**k for k in reversed(range(cfg.oracle["refinements"]))]
    for n in ns:
        _guard("grid.n_cells", build_grid, p, cfg.L, n)
    g = build_grid(p, cfg.L, ns[-1])
    W = make_initial(cfg.initial, p, g).W
    cfg_o = StepConfig(cfl=cfg.stepping.cfl, t_final=tf, velocity=cfg.stepping.velocity)
    traj, _ = run(W, p, cfg_o, "nonlinear", diagnostics=False)
    paths = {"zero": (XdotPath.constant(0.0, tf), "linearized"),
             "frozen": (XdotPath.from_trajectory(traj), "nonlinear")}
    table = []
    for label, (path, mode) in paths.items():
        dists = []
        for n in ns:
            g = build_grid(p, cfg.L, n)
            W = make_initial(cfg.initial, p, g).W
            tr, _ = run(W, p, cfg_o, mode, xdot_path=path, diagnostics=False)
            Wo = duhamel_solve(W, path, tf, cfg.oracle["tol"], p, window=cfg.oracle["window"])
            dists.append(weighted_l1_distance(tr.final, Wo))
        o = [math.nan] + orders(dists).tolist()
        for n, d, oo in zip(ns, dists, o):
            table.append({"path": label, "n_cells": n, "h": 2 * cfg.L / n, "distance": d, "order": oo})
            print(f"{label:7s} n={n:6d} distance={d:.6e} order={oo:.3f}")
    write_json(base / cfg.outputs["report_path"], {"command": "oracle-compare", "config": cfg.raw,
                                                   "table": table})
    return EXIT_OK


def _sweep_point(args):
    raw, point, idx, base = args
    chi, alpha, eps, n = point
    # widen the domain where a small chi would break the tail budget
    rate = min(2 * chi, 2 * chi + math.sqrt(alpha))
    L = max(raw["grid"]["L"], math.ceil(TAIL_BUDGET / rate))
    doc = _deep_update(raw, {"params": {"chi": chi, "alpha": alpha}, "grid": {"n_cells": n, "L": float(L)},
                             "initial": {"amplitude": eps}})
    cfg = parse_config(json.dumps(doc))
    traj, series = _simulate(cfg)
    stem = Path(cfg.outputs["series_path"])
    path = base / stem.with_name(f"{stem.stem}_{idx:03d}{stem.suffix or '.csv'}")
    write_series(path, series)
    rate = _rate_summary(series, cfg.fit_from, cfg.stepping.t_final)
    cs = theory_constants(cfg.params)
    gamma = cs.gamma_alpha0 if alpha == 0 else cs.gamma_alpha
    return {"chi": chi, "alpha": alpha, "amplitude": eps, "n_cells": n, "L": L, "series": str(path),
            "gamma_hat": rate.get("gamma_hat", math.nan), "r2": rate.get("r2", math.nan),
            "two_gamma_theory": 2 * gamma,
            "abort": None if traj.aborted is None else traj.aborted.kind}


def cmd_sweep(cfg: RunConfig, base: Path) -> int:
    sw = cfg.sweep
    points = list(itertools.product(sw["chi"], sw["alpha"], sw["amplitude"], sw["n_cells"]))
    raw = {k: v for k, v in cfg.raw.items() if k != "sweep"}
    jobs = [(raw, pt, i, base) for i, pt in enumerate(points)]
    if sw["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=sw["jobs"]) as ex:
            rows = list(ex.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    for r in rows:
        print(f"chi={r['chi']:.3g} alpha={r['alpha']:.3g} eps={r['amplitude']:.3g} n={r['n_cells']} "
              f"gamma_hat={r['gamma_hat']:.4g} 2gamma_theory={r['two_gamma_theory']:.4g}"
              + (f" abort={r['abort']}" if r["abort"] else ""))
    write_json(base / cfg.outputs["report_path"], {"command": "sweep", "config": cfg.raw, "summary": rows})
    return EXIT_ABORT if any(r["abort"] for r in rows) else EXIT_OK


COMMANDS = {"run": cmd_run, "check": cmd_check, "oracle-compare": cmd_oracle, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="runtumble", description=__doc__.split("\n\n")[0])
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", type=Path, help="JSON configuration file (default: all defaults)")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="override a dotted key, e.g. params.chi=0.3")
    ap.add_argument("--out-dir", type=Path, default=Path("."), help="base directory for output paths")
    ap.add_argument("--only", type=int, action="append", help="check: run only these criteria")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        text = args.config.read_text() if args.config else ""
        cfg = parse_config(text, parse_overrides(args.overrides))
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "check":
            return cmd_check(cfg, args.out_dir, args.only)
        return COMMANDS[args.command](cfg, args.out_dir)
    except SolverAbort as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
