"""Command-line batch driver.

Every subcommand runs one or more cells (the cartesian product of the
``sweep`` axes of the configuration), writes one JSON report and one CSV table
per cell, and an ``index.json`` summarising all cells.  Wall times go to a
separate ``timings.json`` so that the reports themselves are reproducible byte
for byte.

Exit status: 0 on success, 1 if any hard invariant failed, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import itertools
import json
import math
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import ConfigError, InvalidInputError, ObliqueRegError
from .report import NormReport, to_jsonable

KINDS = ("regdist", "mollify", "extend", "solve", "probe", "counterexample")
DOMAIN_TYPES = ("flat", "tilted", "sawtooth", "sine", "cusp", "wedge", "table")

TOLERANCE_PROFILES = {
    "default": {"contraction": 1e-6, "oscillation": 1e-3, "young_factor": 1.02, "jacobian": 0.5,
                "harmonicity": 1e-10, "solver_rtol": 1e-10},
    "strict": {"contraction": 1e-9, "oscillation": 1e-6, "young_factor": 1.0, "jacobian": 0.5,
               "harmonicity": 1e-12, "solver_rtol": 1e-12},
}

_number_or_list = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}}]}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": list(KINDS)},
        "domain": {
            "type": "object",
            "properties": {"type": {"enum": list(DOMAIN_TYPES)}},
            "required": ["type"],
        },
        "R": {"type": "number", "exclusiveMinimum": 0},
        "x0": {"type": "number"},
        "operator": {
            "type": "object",
            "properties": {
                "type": {"enum": ["laplacian", "constant"]},
                "matrix": {"type": "array"},
                "drift": {"type": "array"},
                "a0": {"type": "number"},
            },
            "required": ["type"],
        },
        "bc": {
            "type": "object",
            "properties": {
                "b": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "b0": {"type": "number", "minimum": 0},
                "alpha": {"type": "number"},
            },
            "required": ["b"],
        },
        "p": _number_or_list,
        "grid": {"type": "integer", "minimum": 5},
        "samples": {"type": "integer", "minimum": 1},
        "trials": {"type": "integer", "minimum": 1},
        "datum": {"enum": ["one", "y1", "sin3"]},
        "exact": {"enum": ["sin_cosh", "quadratic"]},
        "f": {"type": "number"},
        "probe": {"enum": ["model", "main"]},
        "theta": {"type": "number"},
        "example": {"enum": ["cusp", "wedge"]},
        "theta0": {"type": "number"},
        "eps": {"type": "number"},
        "beta": {"type": "number"},
        "levels": {"type": "integer", "minimum": 8},
        "sweep": {"type": "object", "additionalProperties": {"type": "array"}},
        "seed": {"type": "integer"},
        "tolerances": {"type": "object", "additionalProperties": {"type": "number"}},
    },
    "additionalProperties": False,
}

DEFAULTS = {
    "domain": {"type": "sawtooth", "slope": 0.05, "period": 0.5, "level": 0.0, "delta": 1.0, "R0": 10.0},
    "R": 1.0,
    "x0": 0.0,
    "operator": {"type": "laplacian"},
    "bc": {"b": [0.0, 1.0], "b0": 0.0},
    "grid": 33,
    "samples": 200,
    "trials": 100,
    "datum": "sin3",
    "f": 1.0,
    "probe": "model",
    "theta": 0.1,
    "levels": 40,
}


# ----------------------------------------------------------------------------------
# configuration


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(to_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def validate_config(cfg: dict) -> None:
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/" + "/".join(str(p) for p in err.absolute_path)
        raise ConfigError(f"{path}: {err.message}", path=path)
    for axis in cfg.get("sweep", {}):
        head = axis.split(".")[0]
        if head not in CONFIG_SCHEMA["properties"] or head in ("sweep", "kind", "seed", "tolerances"):
            raise ConfigError(f"/sweep/{axis}: unknown parameter", path=f"/sweep/{axis}")
        if "." in axis and head not in ("domain", "operator", "bc"):
            raise ConfigError(f"/sweep/{axis}: only domain, operator and bc have sub-parameters",
                              path=f"/sweep/{axis}")


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file", path="")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})", path="")
    if not isinstance(cfg, dict):
        raise ConfigError("the configuration must be a JSON object", path="/")
    return cfg


def _set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        node = node.setdefault(k, {})
    node[keys[-1]] = value


def expand_cells(cfg: dict) -> list:
    """Cartesian product of the sweep axes (sorted by name); an empty axis yields no cells."""
    sweep = cfg.get("sweep", {})
    base = {k: v for k, v in cfg.items() if k != "sweep"}
    axes = sorted(sweep)
    cells = []
    for combo in itertools.product(*(sweep[a] for a in axes)):
        cell = copy.deepcopy(base)
        for a, v in zip(axes, combo):
            _set_path(cell, a, v)
        cells.append({"params": dict(zip(axes, combo)), "config": cell})
    return cells


def _merged(cfg: dict) -> dict:
    out = copy.deepcopy(DEFAULTS)
    for k, v in cfg.items():
        if k in ("domain", "operator", "bc") and isinstance(v, dict) and k in out and v.get("type", None) \
                in (None, out[k].get("type")):
            out[k] = {**out[k], **v}
        else:
            out[k] = copy.deepcopy(v)
    return out


# ----------------------------------------------------------------------------------
# cell runners


def _setup(cfg):
    from .geometry import cyl_neighborhood, domain_from_config

    dom_cfg = dict(cfg["domain"])
    dom = domain_from_config(dom_cfg)
    x0 = float(cfg.get("x0", 0.0))
    point = np.array([x0, float(dom.height(np.array([x0])))])
    return cyl_neighborhood(dom, point, float(cfg["R"]))


def _operator(cfg):
    from .solver import EllipticOperator

    op = cfg["operator"]
    if op["type"] == "laplacian":
        return EllipticOperator.laplacian()
    return EllipticOperator.constant(op["matrix"], op.get("drift", [0.0, 0.0]), op.get("a0", 0.0))


def _bc(cfg):
    from .geometry import ObliqueField

    bc = cfg["bc"]
    return ObliqueField.constant(bc["b"], bc.get("b0", 0.0), bc.get("alpha", 1.0))


def _scalar_p(cfg):
    p = cfg.get("p", 2.0)
    if isinstance(p, list):
        raise InvalidInputError("p must be a single number here; sweep it with the sweep section")
    return float(p)


def _run_regdist(cfg, tol):
    from .regdist import RegDistField, verify_regdist

    cyl = _setup(cfg)
    rng = np.random.default_rng(cfg["seed"])
    rep = verify_regdist(RegDistField(cyl.domain), cyl.sample(int(cfg["samples"]), rng),
                         contraction_tol=tol["contraction"], oscillation_tol=tol["oscillation"])
    return rep, [] if rep.metadata["pass"] else ["regularized distance bounds violated"]


def _run_mollify(cfg, tol):
    from .mollification import verify_young_bounds
    from .regdist import RegDistField

    cyl = _setup(cfg)
    p = _scalar_p(cfg)
    rep = verify_young_bounds(RegDistField(cyl.domain), cyl, p, trials=int(cfg["trials"]), seed=cfg["seed"])
    bound = rep["young_bound"] * tol["young_factor"]
    failures = []
    if rep["lp_ratio_max"] > bound or rep["w1p_ratio_max"] > bound:
        failures.append(f"Young bound exceeded: {rep['lp_ratio_max']:.4g}, {rep['w1p_ratio_max']:.4g} > {bound:.4g}")
    if rep["jacobian_min"] < tol["jacobian"]:
        failures.append("Jacobian below 1/2")
    if rep["containment_failures"]:
        failures.append("mollification nodes left Omega_2R")
    return rep, failures


_DATA = {"one": lambda yp: np.ones(np.shape(yp)[:-1]),
         "y1": lambda yp: np.asarray(yp)[..., 0],
         "sin3": lambda yp: np.sin(3 * np.asarray(yp)[..., 0])}


def _run_extend(cfg, tol):
    from .extension import extend_neumann
    from .regdist import RegDistField

    cyl = _setup(cfg)
    res = extend_neumann(_DATA[cfg["datum"]], cyl, RegDistField(cyl.domain), p=_scalar_p(cfg), n=int(cfg["grid"]))
    return res.to_report(), []


def _run_solve(cfg, tol):
    from .solver import manufactured, probe_main_estimate

    cyl = _setup(cfg)
    op, bc = _operator(cfg), _bc(cfg)
    if "exact" in cfg:
        exact, f, g = manufactured(cfg["exact"], op, bc)
        dirichlet = exact
    else:
        exact, f, g, dirichlet = None, float(cfg["f"]), 0.0, 0.0
    rep, sol = probe_main_estimate(cyl, op, bc, f, g, p=_scalar_p(cfg), n=int(cfg["grid"]), dirichlet=dirichlet,
                                   exact=exact, theta=float(cfg["theta"]), return_solution=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["y1", "y2", "z1", "z2", "u"])
    z1, z2 = np.meshgrid(sol.problem.z1, sol.problem.z2, indexing="ij")
    for row in zip(sol.y[..., 0].ravel(), sol.y[..., 1].ravel(), z1.ravel(), z2.ravel(), sol.values.ravel()):
        w.writerow([repr(float(v)) for v in row])
    return rep, [], {"solution.csv": buf.getvalue()}


def _run_probe(cfg, tol):
    from .solver import probe_model_problem

    if cfg["probe"] == "main":
        return _run_solve(cfg, tol)
    cyl = _setup(cfg)
    rep = probe_model_problem(cyl, _operator(cfg), f=float(cfg["f"]), p=_scalar_p(cfg), n=int(cfg["grid"]))
    return rep, []


def _run_counterexample(cfg, tol):
    from .counterexamples import CuspExample, WedgeExample, certify_cusp, certify_wedge

    kind = cfg.get("example", "wedge")
    levels = int(cfg["levels"])
    failures = []
    if kind == "cusp":
        ex = CuspExample(p=_scalar_p(cfg), eps=float(cfg.get("eps", 1.0)), beta=float(cfg.get("beta", 0.5)),
                         R=float(cfg["R"]))
        rep = certify_cusp(ex, levels=levels)
    else:
        p = cfg.get("p", [4.0, 5.0, 5.5, 6.5, 8.0])
        p_list = [float(v) for v in (p if isinstance(p, list) else [p])]
        ex = WedgeExample(theta0=float(cfg.get("theta0", 3 * math.pi / 4)), R=float(cfg["R"]))
        rep = certify_wedge(ex, p_list, seed=cfg["seed"], levels=levels)
        for key in ("harmonicity_residual", "face_residual"):
            if rep[key] > tol["harmonicity"]:
                failures.append(f"{key} = {rep[key]:.3g}")
    failures += [f"verdict mismatch: {v['quantity']}" for v in rep.verdicts if not v["match"]]
    return rep, failures


RUNNERS = {
    "regdist": _run_regdist,
    "mollify": _run_mollify,
    "extend": _run_extend,
    "solve": _run_solve,
    "probe": _run_probe,
    "counterexample": _run_counterexample,
}


def run_cell(kind: str, cell_config: dict, tolerances: dict) -> dict:
    """Run one cell; exceptions are captured as invariant failures."""
    cfg = _merged(cell_config)
    cfg.setdefault("seed", 0)
    start = time.perf_counter()
    files = {}
    try:
        out = RUNNERS[kind](cfg, tolerances)
        rep, failures = out[0], out[1]
        files = out[2] if len(out) > 2 else {}
        error = None
    except ObliqueRegError as exc:
        rep, failures, error = NormReport(), [f"{type(exc).__name__}: {exc}"], type(exc).__name__
    except Exception as exc:  # noqa: BLE001 - a crashing cell must not stop the sweep
        rep = NormReport()
        failures = [f"{type(exc).__name__}: {exc}"]
        error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
    return {"report": rep.to_dict(), "failures": failures, "error": error, "files": files,
            "wall_time": time.perf_counter() - start}


# ----------------------------------------------------------------------------------
# orchestration


def _verdict_csv(verdicts) -> str:
    buf = io.StringIO()
    if verdicts:
        keys = sorted({k for v in verdicts for k in v})
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for v in verdicts:
            w.writerow(to_jsonable(v))
    return buf.getvalue()


def run(kind: str, cfg: dict, out: str | Path, jobs: int = 1, seed: int | None = None,
        profile: str = "default") -> int:
    """Validate, expand and execute a configuration; returns the exit status."""
    cfg = dict(cfg)
    if "kind" in cfg and cfg["kind"] != kind:
        raise ConfigError(f"/kind: configuration is for {cfg['kind']!r}, not {kind!r}", path="/kind")
    cfg["kind"] = kind
    if seed is not None:
        cfg["seed"] = int(seed)
    cfg.setdefault("seed", 0)
    validate_config(cfg)
    tol = dict(TOLERANCE_PROFILES[profile])
    tol.update(cfg.get("tolerances", {}))
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)
    cells = expand_cells(cfg)
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_cell, kind, c["config"], tol) for c in cells]
            results = [f.result() for f in futures]
    else:
        results = [run_cell(kind, c["config"], tol) for c in cells]

    index, timings = [], {}
    status = 0
    for i, (cell, res) in enumerate(zip(cells, results)):
        name = f"cell_{i:04d}"
        rep = res["report"]
        doc = {
            "version": __version__,
            "config_hash": digest,
            "kind": kind,
            "seed": cfg["seed"],
            "params": cell["params"],
            "config": _merged(cell["config"]),
            "tolerances": tol,
            "failures": res["failures"],
            "error": res["error"],
            "report": rep,
        }
        (out / f"{name}.json").write_text(json.dumps(to_jsonable(doc), sort_keys=True, indent=2) + "\n")
        (out / f"{name}.csv").write_text(NormReport.from_dict(rep).to_csv())
        for suffix, text in sorted(res["files"].items()):
            (out / f"{name}_{suffix}").write_text(text)
        if rep.get("verdicts"):
            (out / f"{name}_verdicts.csv").write_text(_verdict_csv(rep["verdicts"]))
        index.append({"cell": name, "params": cell["params"], "ok": not res["failures"],
                      "failures": res["failures"], "warnings": rep.get("warnings", []),
                      "key_values": {k: v["value"] for k, v in rep.get("entries", {}).items()
                                     if v.get("kind") in ("ratio", "slope", "order")}})
        timings[name] = res["wall_time"]
        if res["failures"]:
            status = 1
    summary = {"version": __version__, "config_hash": digest, "kind": kind, "seed": cfg["seed"],
               "cells": index}
    (out / "index.json").write_text(json.dumps(to_jsonable(summary), sort_keys=True, indent=2) + "\n")
    (out / "timings.json").write_text(json.dumps(timings, sort_keys=True, indent=2) + "\n")
    return status


def report_index(artifact_dir: str | Path) -> dict:
    """One row per cell file with parameters, key ratios, verdicts and wall time."""
    d = Path(artifact_dir)
    rows, unreadable, warnings = [], [], []
    timings = {}
    tpath = d / "timings.json"
    if tpath.exists():
        try:
            timings = json.loads(tpath.read_text())
        except json.JSONDecodeError:
            unreadable.append(tpath.name)
    files = sorted(d.glob("cell_*.json"))
    if not files:
        warnings.append(f"no cell reports in {d}")
    for path in files:
        try:
            doc = json.loads(path.read_text())
            rep = doc["report"]
        except (json.JSONDecodeError, KeyError, TypeError):
            unreadable.append(path.name)
            continue
        entries = rep.get("entries", {})
        rows.append({
            "cell": path.stem,
            "version": doc.get("version"),
            "kind": doc.get("kind"),
            "params": doc.get("params", {}),
            "ok": not doc.get("failures"),
            "key_values": {k: v["value"] for k, v in entries.items() if v.get("kind") in ("ratio", "slope", "order")},
            "verdicts": {v["quantity"]: v["observed"] for v in rep.get("verdicts", [])},
            "wall_time": timings.get(path.stem),
        })
    return {"rows": rows, "unreadable": unreadable, "warnings": warnings}


def _table_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell", "version", "kind", "ok", "params", "key_values", "verdicts", "wall_time"])
    for r in rows:
        w.writerow([r["cell"], r["version"], r["kind"], r["ok"], json.dumps(r["params"], sort_keys=True),
                    json.dumps(to_jsonable(r["key_values"]), sort_keys=True),
                    json.dumps(r["verdicts"], sort_keys=True), r["wall_time"]])
    return buf.getvalue()


# ----------------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="obliquereg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", default="obliquereg-out", help="output directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for sweeps")
        sp.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
        sp.add_argument("--tolerance-profile", choices=sorted(TOLERANCE_PROFILES), default="default")

    for kind in ("regdist", "extend", "solve", "probe"):
        common(sub.add_parser(kind, help=f"run {kind} cells"))
    sp = sub.add_parser("mollify", help="run mollification cells")
    common(sp)
    sp.add_argument("--check-young", action="store_true", help="verify the Young-type bounds (default action)")
    sp.add_argument("--trials", type=int)
    sp = sub.add_parser("counterexample", help="certify the cusp or wedge example")
    common(sp)
    sp.add_argument("example", choices=["cusp", "wedge"])
    sp.add_argument("--theta0", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--beta", type=float)
    sp.add_argument("--p", type=float, nargs="+")
    sp.add_argument("--R", type=float)
    sp = sub.add_parser("report", help="summarise an output directory")
    sp.add_argument("directory")
    sp.add_argument("--out", help="write the summary CSV here instead of stdout")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "report":
        summary = report_index(args.directory)
        for w in summary["warnings"]:
            print(f"warning: {w}", file=sys.stderr)
        for u in summary["unreadable"]:
            print(f"unreadable: {u}", file=sys.stderr)
        table = _table_csv(summary["rows"])
        if args.out:
            Path(args.out).write_text(table)
        else:
            sys.stdout.write(table)
        return 0
    try:
        cfg = load_config(args.config)
        if args.command == "counterexample":
            cfg["example"] = args.example
            for key in ("theta0", "eps", "beta", "R"):
                if getattr(args, key) is not None:
                    cfg[key] = getattr(args, key)
            if args.p is not None:
                cfg["p"] = args.p if args.example == "wedge" or len(args.p) > 1 else args.p[0]
        if args.command == "mollify" and args.trials is not None:
            cfg["trials"] = args.trials
        status = run(args.command, cfg, args.out, jobs=max(1, args.jobs), seed=args.seed,
                     profile=args.tolerance_profile)
    except ConfigError as exc:
        print(f"config error at {exc.path or '/'}: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}/index.json (exit status {status})")
    return status


if __name__ == "__main__":
    sys.exit(main())
