"""Command-line entry point: ``nonisopot <subcommand> [flags]``.

Parameters resolve as flags over ``--config`` JSON values over per-command
defaults.  Exit codes: 0 success, 1 validation error or bad usage, 2 solver
non-convergence.  ``NONISOPOT_WORKERS`` caps the BLAS thread pool.
"""

import argparse
import contextlib
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import io as nio
from ._validation import ValidationError, check_aperture, check_dim
from .capacity import CapacityProblem, ball_capacity_profile, capacity
from .carleson import (
    ExperimentConfig,
    capacity_condition_ratio,
    embed_const_K,
    equivalence_experiment,
    random_ball_measure,
    tent_ball_ratio,
)
from .geometry import ball, build_grid
from .holomorphic import admissible_max, hs_norm, random_polynomial, tl_norm
from .potentials import (
    PotentialParams,
    continuity_criterion,
    energy,
    holo_potential_norm,
    lump_measure,
    node_potential,
    spread_measure_plan,
    wolff_ratio,
)
from .weights import BallFamily, ap_constant, doubling_order, tail_bound_ratio, weight_from_descriptor

WORKERS_ENV = "NONISOPOT_WORKERS"

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGED = 0, 1, 2

# Parameter flags shared by every subcommand; ``None`` means "not given".
PARAMS = {
    "n": int,
    "p": float,
    "s": float,
    "q": float,
    "alpha": float,
    "lam": float,
    "eps": float,
    "resolution": int,
    "L": int,
    "seed": int,
}

COMMON_DEFAULTS = {"n": 1, "p": 2.0, "s": 0.3, "q": 2.0, "alpha": 2.0, "lam": None, "eps": 0.0,
                   "resolution": 256, "L": None, "seed": 0}

DEFAULTS = {
    "grid": {},
    "weight-diag": {"n": 2, "resolution": 32, "radius": 0.125, "t": None},
    "norms": {"s": 0.5, "count": 20, "degree": 12},
    "potentials": {"measures": 10, "holo": False},
    "capacity": {"center": None, "radius": 0.25, "nodes": None, "tol": None, "method": "auto"},
    "ball-capacity": {"s": 0.25, "resolution": 1024, "radii": [0.25, 0.125, 0.0625, 0.03125, 0.015625],
                      "center": None, "tol": None},
    "tents": {"measures": 10, "atoms": 24, "max_level": 6},
    "equivalence": {"measures": 10, "atoms": 24, "resolutions": [256, 512], "base_resolution": 32, "max_level": 6},
    "continuity": {"zeta0": None, "refine": 2},
    "wolff-ratio": {"measures": 20},
}

EXTRA_FLAGS = {
    "radius": float,
    "t": float,
    "count": int,
    "degree": int,
    "measures": int,
    "atoms": int,
    "max_level": int,
    "base_resolution": int,
    "refine": int,
    "tol": float,
    "method": str,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


@dataclass
class RunConfig:
    """Resolved command, parameter block and output paths."""

    command: str
    params: dict
    out: str = "-"
    summary: str | None = None
    sources: dict = field(default_factory=dict)

    def resolved(self):
        """The config embedded in outputs: command and parameters, without paths."""
        return {"command": self.command, "params": dict(sorted(self.params.items()))}


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser():
    parser = _Parser(prog="nonisopot", description="Weighted nonisotropic potential theory on the sphere.")
    parser.add_argument("--version", action="version", version=f"nonisopot {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand", parser_class=_Parser)
    helps = {
        "grid": "build a quadrature grid (JSON)",
        "weight-diag": "A_p constant, doubling order and tail ratios of a weight",
        "norms": "Hardy-Sobolev, Triebel-Lizorkin and area norms of seeded polynomials",
        "potentials": "energies, Wolff integrals and holomorphic potential norms of spread measures",
        "capacity": "capacity of a node set (JSON result)",
        "ball-capacity": "capacities of concentric balls and their log-log slope",
        "tents": "tent-over-ball ratios of seeded ball measures",
        "equivalence": "embedding constants of the Riesz and Cauchy-type operators",
        "continuity": "singular-integral continuity indicator at a point",
        "wolff-ratio": "energy over Wolff integral for spread measures",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="JSON file of parameter values")
        p.add_argument("--out", help="primary output path, '-' for stdout")
        p.add_argument("--summary", help="JSON summary path")
        for key, typ in PARAMS.items():
            p.add_argument(f"--{key}", type=typ, default=None)
        for key in DEFAULTS[name]:
            if key in PARAMS:
                continue
            flag = "--" + key.replace("_", "-")
            if key in EXTRA_FLAGS:
                p.add_argument(flag, dest=key, type=EXTRA_FLAGS[key], default=None)
            elif key == "holo":
                p.add_argument(flag, dest=key, action="store_const", const=True, default=None)
            elif key == "nodes":
                p.add_argument(flag, dest=key, help="JSON file with a list of node indices", default=None)
            elif key in ("resolutions",):
                p.add_argument(flag, dest=key, type=lambda t: [int(x) for x in t.split(",")], default=None)
            else:
                p.add_argument(flag, dest=key, type=_floats, default=None, help="comma-separated numbers")
    return parser


def resolve(args):
    """Merge defaults, config file and flags into a :class:`RunConfig`."""
    params = dict(COMMON_DEFAULTS)
    params.update(DEFAULTS[args.command])
    sources = {k: "default" for k in params}
    out, summary = "-", None
    if args.config:
        data = nio.read_json(args.config)
        if not isinstance(data, dict):
            raise ValidationError("the config file must hold a JSON object")
        block = data.get("params", data)
        unknown = set(block) - set(params) - {"out", "summary", "command"}
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        for k, v in block.items():
            if k in params:
                params[k] = v
                sources[k] = "config"
        out = data.get("out", block.get("out", out))
        summary = data.get("summary", block.get("summary", summary))
    for k in params:
        v = getattr(args, k, None)
        if v is not None:
            params[k] = v
            sources[k] = "flag"
    out = args.out if args.out is not None else out
    summary = args.summary if args.summary is not None else summary
    return RunConfig(args.command, params, out, summary, sources)


def _weight_descriptor(cfg):
    eps = cfg["eps"]
    if eps:
        if cfg["n"] != 2:
            raise ValidationError("a power weight (eps != 0) needs n = 2")
        return {"kind": "power", "eps": float(eps)}
    return {"kind": "constant", "c": 1.0}


def _setup(cfg):
    n = check_dim(cfg["n"])
    grid = build_grid(n, cfg["resolution"])
    w = weight_from_descriptor(_weight_descriptor(cfg), grid)
    return grid, w


def _params(cfg):
    return PotentialParams(cfg["p"], cfg["s"], cfg["n"], cfg["lam"], cfg["q"])


def _point(values, n, name):
    values = list(values)
    if len(values) != 2 * n:
        raise ValidationError(f"{name} needs {2 * n} numbers (re, im per coordinate)")
    z = np.array([complex(values[2 * i], values[2 * i + 1]) for i in range(n)])
    norm = np.linalg.norm(z)
    if not abs(norm - 1.0) < 1e-6:
        raise ValidationError(f"{name} must lie on the unit sphere (|z| = {norm:.6g})")
    return z / norm


# subcommands -----------------------------------------------------------------


def cmd_grid(cfg):
    grid, w = _setup(cfg)
    return {"json": nio.grid_to_dict(grid, w)}


def cmd_weight_diag(cfg):
    grid, w = _setup(cfg)
    p = cfg["p"]
    tau = doubling_order(w, grid)
    t = tau if cfg["t"] is None else cfg["t"]
    zeta = grid.nodes[0]
    r = cfg["radius"]
    rows = [
        {"metric": "ap_constant", "value": ap_constant(w, p, grid, BallFamily.default(grid, w))},
        {"metric": "doubling_order", "value": tau},
        {"metric": "tail_upper", "value": tail_bound_ratio(w, p, t + 0.5, zeta, r, grid, "upper")},
        {"metric": "tail_lower", "value": tail_bound_ratio(w, p, max(t - 0.5, 0.1), zeta, r, grid, "lower")},
    ]
    return {"rows": rows, "columns": ["metric", "value"], "summary": {r["metric"]: r["value"] for r in rows}}


def cmd_norms(cfg):
    grid, w = _setup(cfg)
    p, s, q, alpha = cfg["p"], cfg["s"], cfg["q"], check_aperture(cfg["alpha"])
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for i in range(cfg["count"]):
        f = random_polynomial(grid.dim, cfg["degree"], rng)
        hardy = hs_norm(f, p, 0.0, w, grid)
        maximal = float(np.dot(grid.weights * w.values, admissible_max(f, grid.nodes, alpha, grid) ** p) ** (1 / p))
        rows.append({
            "function_id": i,
            "hs_norm": hs_norm(f, p, s, w, grid),
            "tl_radial": tl_norm(f, p, q, s, w, grid, "radial"),
            "tl_area": tl_norm(f, p, q, s, w, grid, "area", alpha),
            "hardy_norm": hardy,
            "maximal_norm": maximal,
            "area0_norm": tl_norm(f, p, 2.0, 0.0, w, grid, "area", alpha, 1),
        })
    return {"rows": rows}


def _spread_measures(cfg, grid):
    rng = np.random.default_rng(cfg["seed"])
    plans = [spread_measure_plan(grid.dim, rng) for _ in range(cfg["measures"])]
    return [lump_measure(c, m, r, grid) for c, m, r in plans]


def cmd_potentials(cfg):
    grid, w = _setup(cfg)
    params = _params(cfg)
    rows = []
    for k, nu in enumerate(_spread_measures(cfg, grid)):
        E, iw, ratio = wolff_ratio(nu, params, w, grid, cfg["L"], diagonal="cell")
        row = {"measure_id": k, "mass": nu.total, "energy": E, "I_W": iw, "ratio": ratio,
               "K_max": float(node_potential(nu, params.s, grid, "cell").max())}
        if cfg["holo"]:
            which = "U" if params.p < 2 else "V"
            norm = holo_potential_norm(nu, params, w, grid, which, L=cfg["L"])
            row.update({"holo": which, "holo_norm": norm, "holo_ratio": norm**params.p / energy(
                nu, params, w, grid, diagonal="cell")})
        rows.append(row)
    return {"rows": rows}


def cmd_capacity(cfg):
    grid, w = _setup(cfg)
    params = _params(cfg)
    if cfg["nodes"] is not None:
        E = np.asarray(nio.read_json(cfg["nodes"]) if isinstance(cfg["nodes"], str) else cfg["nodes"])
    else:
        center = grid.nodes[0] if cfg["center"] is None else _point(cfg["center"], grid.dim, "center")
        E = ball(grid, center, cfg["radius"])
    res = capacity(CapacityProblem(E, params, w, grid, tol=cfg["tol"], method=cfg["method"]))
    out = nio.capacity_result_to_dict(res)
    out["E"] = np.asarray(E).tolist()
    return {"json": out, "converged": res.converged}


def cmd_ball_capacity(cfg):
    grid, w = _setup(cfg)
    center = None if cfg["center"] is None else _point(cfg["center"], grid.dim, "center")
    out = ball_capacity_profile(_params(cfg), w, grid, cfg["radii"], center=center, tol=cfg["tol"])
    converged = all(r["converged"] for r in out["rows"])
    return {"rows": out["rows"], "summary": {"slope": out["slope"], "degenerate": out["degenerate"]},
            "converged": converged}


def cmd_tents(cfg):
    grid, w = _setup(cfg)
    params = _params(cfg)
    rng = np.random.default_rng(cfg["seed"])
    base = build_grid(grid.dim, 32 if grid.dim == 1 else 8)
    family = BallFamily(base.nodes, 2.0 ** -np.arange(1, 5))
    sets = [ball(grid, grid.nodes[0], 2.0**-k) for k in range(1, 4)]
    rows = []
    for k in range(cfg["measures"]):
        mu = random_ball_measure(base.nodes, rng, cfg["atoms"], cfg["max_level"])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            tr = tent_ball_ratio(mu, w, params, cfg["alpha"], family, grid)
            cr, _ = capacity_condition_ratio(mu, sets, params, w, grid, cfg["alpha"])
        rows.append({"measure_id": k, "mass": float(mu.masses.sum()), "tent_ball_ratio": tr,
                     "capacity_ratio": cr, "embed_const_K": embed_const_K(mu, params, w, grid)})
    return {"rows": rows}


def cmd_equivalence(cfg):
    conf = ExperimentConfig(
        seed=cfg["seed"], measures=cfg["measures"], atoms=cfg["atoms"], n=cfg["n"], p=cfg["p"], s=cfg["s"],
        eps=cfg["eps"], alpha=cfg["alpha"], resolutions=tuple(cfg["resolutions"]),
        base_resolution=cfg["base_resolution"], max_level=cfg["max_level"],
    )
    rows, summary = equivalence_experiment(conf)
    return {"rows": rows, "summary": summary}


def cmd_continuity(cfg):
    params = _params(cfg)
    n = params.n
    zeta0 = np.eye(n, dtype=complex)[0] if cfg["zeta0"] is None else _point(cfg["zeta0"], n, "zeta0")
    coarse, fine, ratio = continuity_criterion(zeta0, params, _weight_descriptor(cfg), cfg["resolution"],
                                               cfg["refine"])
    row = {"n_minus_sp": n - params.s * params.p, "resolution": cfg["resolution"], "refine": cfg["refine"],
           "coarse": coarse, "fine": fine, "ratio": ratio}
    return {"rows": [row], "summary": row}


def cmd_wolff_ratio(cfg):
    grid, w = _setup(cfg)
    params = _params(cfg)
    rows = []
    for k, nu in enumerate(_spread_measures(cfg, grid)):
        E, iw, ratio = wolff_ratio(nu, params, w, grid, cfg["L"], diagonal="cell")
        rows.append({"measure_id": k, "E": E, "I_W": iw, "ratio": ratio})
    return {"rows": rows, "columns": ["measure_id", "E", "I_W", "ratio"]}


COMMANDS = {
    "grid": cmd_grid,
    "weight-diag": cmd_weight_diag,
    "norms": cmd_norms,
    "potentials": cmd_potentials,
    "capacity": cmd_capacity,
    "ball-capacity": cmd_ball_capacity,
    "tents": cmd_tents,
    "equivalence": cmd_equivalence,
    "continuity": cmd_continuity,
    "wolff-ratio": cmd_wolff_ratio,
}


def validate(cfg):
    """Checks every parameter the command could touch before any computation."""
    p = cfg.params
    check_dim(p["n"])
    if not isinstance(p["resolution"], int) or p["resolution"] < 4:
        raise ValidationError("resolution must be an integer >= 4")
    check_aperture(p["alpha"])
    if p["q"] is not None and not (p["q"] >= 1 or p["q"] == math.inf):
        raise ValidationError("q must lie in [1, inf]")
    if p["L"] is not None and p["L"] < 1:
        raise ValidationError("L must be at least 1")
    if not -1.0 < p["eps"]:
        raise ValidationError("eps must exceed -1")
    if cfg.command not in ("grid", "weight-diag"):
        PotentialParams(p["p"], p["s"], p["n"], p["lam"], p["q"])
    for key in ("measures", "count", "atoms", "refine"):
        if key in p and not p[key] >= 1:
            raise ValidationError(f"{key} must be positive")


def _write_text(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def emit(cfg, result):
    config = cfg.resolved()
    if "json" in result:
        _write_text(cfg.out, nio.dumps_json({"version": __version__, "config": config, "result": result["json"]}))
    else:
        _write_text(cfg.out, nio.csv_text(result["rows"], result.get("columns"), config))
    if cfg.summary:
        payload = result.get("summary", {"rows": len(result.get("rows", []))})
        _write_text(cfg.summary, nio.dumps_json({"version": __version__, "config": config, "summary": payload}))


@contextlib.contextmanager
def _worker_limit():
    value = os.environ.get(WORKERS_ENV)
    if not value:
        yield
        return
    try:
        workers = int(value)
    except ValueError:
        raise ValidationError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None
    if workers < 1:
        raise ValidationError(f"{WORKERS_ENV} must be positive")
    from threadpoolctl import threadpool_limits

    with threadpool_limits(limits=workers):
        yield


def run(argv=None):
    """Run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_help())
        cfg = resolve(args)
        validate(cfg)
        with _worker_limit():
            result = COMMANDS[cfg.command](cfg.params)
        emit(cfg, result)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except (ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"nonisopot: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not result.get("converged", True):
        print("nonisopot: solver did not converge; results written with status 'inexact'", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
