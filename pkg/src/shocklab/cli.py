"""Command-line surface: solve | flow | oracle | phase | reproduce.

Configuration is JSON validated against CONFIG_SCHEMA before any computation;
outputs are CSV tables (17 significant digits, locale independent) plus one
summary.json per run that echoes the fully resolved configuration.  Exit
codes: 0 ok, 2 config error, 3 numeric/precondition error, 4 non-convergence.
The SHOCKLAB_OUT environment variable overrides --out.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import continuum as _cont
from . import flows as _flw
from . import lattice as _lat
from . import oracle as _orc
from . import presets as _pre
from . import shocks as _shk
from .couplings import CouplingVector
from .errors import ConfigError, ShocklabError

_COUPLING_KEY = r"^[tT][0-9]+$"

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "preset": {"type": "string"},
        "couplings": {
            "type": "object",
            "additionalProperties": False,
            "patternProperties": {_COUPLING_KEY: {"type": "number"}},
            "properties": {"N": {"type": "integer", "minimum": 1}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "M": {"type": "integer", "minimum": 1},
                "x_max": {"type": "number", "exclusiveMinimum": 0},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
                "continuation_steps": {"type": "integer", "minimum": 1},
                "max_total_steps": {"type": "integer", "minimum": 1},
                "right_closure": {"type": "string"},
                "buffer_width": {"type": "integer", "minimum": 0},
            },
        },
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "window": {"type": "integer", "minimum": 2},
                "amp_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "flow": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "start": {"type": "string", "enum": ["gaussian", "string"]},
                "legs": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "additionalProperties": False,
                        "required": ["k", "target"],
                        "properties": {
                            "k": {"type": "integer", "minimum": 1},
                            "target": {"type": "number"},
                            "h": {"type": "number", "exclusiveMinimum": 0},
                            "mode": {"type": "string", "enum": ["lattice", "matrix"]},
                        },
                    },
                },
                "compare_with_string": {"type": "boolean"},
                "snapshot_stride": {"type": "integer", "minimum": 1},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_max": {"type": "integer", "minimum": 1, "maximum": 30},
                "hankel_n_max": {"type": "integer", "minimum": 1, "maximum": 29},
            },
        },
        "phase": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "x_range": {"type": "array", "items": {"type": "number"},
                            "minItems": 2, "maxItems": 2},
                "t6_range": {"type": "array", "items": {"type": "number"},
                             "minItems": 2, "maxItems": 2},
                "grid": {"type": "array", "items": {"type": "integer", "minimum": 2},
                         "minItems": 2, "maxItems": 2},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


def fmt(value) -> str:
    """17-significant-digit, locale-independent field; empty for missing."""
    if value is None:
        return ""
    v = float(value)
    if math.isnan(v):
        return ""
    return f"{v:.17g}"


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from err
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as err:
        raise ConfigError(f"config schema violation: {err.message}") from err
    coup = cfg.get("couplings", {})
    raw = [k for k in coup if k.startswith("t")]
    scaled = [k for k in coup if k.startswith("T")]
    if raw and scaled:
        raise ConfigError("specify either raw t couplings or rescaled T couplings, not both")
    for key in raw + scaled:
        idx = int(key[1:])
        if idx <= 0 or idx % 2 != 0:
            raise ConfigError(f"coupling index in {key!r} must be a positive even integer")


def _couplings_from_config(cfg: dict, scale_override: int | None) -> CouplingVector:
    coup = dict(cfg.get("couplings", {}))
    N = int(coup.pop("N", _pre.DEFAULT_N))
    if scale_override is not None:
        N = scale_override
    raw = {int(k[1:]): v for k, v in coup.items() if k.startswith("t")}
    scaled = {int(k[1:]): v for k, v in coup.items() if k.startswith("T")}
    if raw:
        return CouplingVector(raw, N)
    return CouplingVector.from_rescaled(scaled, N)


def _out_dir(args, cfg: dict) -> Path:
    env = os.environ.get("SHOCKLAB_OUT")
    if env:
        out = Path(env)
    elif args.out is not None:
        out = Path(args.out)
    elif "output" in cfg and "dir" in cfg["output"]:
        out = Path(cfg["output"]["dir"])
    else:
        out = Path("shocklab_out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) if not isinstance(v, str) else v for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_summary(path: Path, command: str, config: dict, results: dict) -> None:
    payload = {
        "provenance": {
            "tool": "shocklab",
            "version": __version__,
            "command": command,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        },
        "config": config,
        "results": results,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _solver_opts(cfg: dict) -> dict:
    opts = dict(cfg.get("solver", {}))
    opts.pop("M", None)
    opts.pop("x_max", None)
    return opts


def _resolved_config(cfg: dict, c: CouplingVector, extra: dict) -> dict:
    resolved = {k: v for k, v in cfg.items() if k != "couplings"}
    resolved["couplings"] = {f"t{idx}": val for idx, val in c.entries.items()}
    resolved["couplings"]["N"] = c.scale_N
    resolved.update(extra)
    return resolved


def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    c = _couplings_from_config(cfg, args.scale_N)
    solver_cfg = cfg.get("solver", {})
    M = solver_cfg.get("M")
    if M is None:
        M = int(round(solver_cfg.get("x_max", 0.5) * c.scale_N))
    cmp_cfg = cfg.get("compare", {})
    window = cmp_cfg.get("window", _shk.DEFAULT_WINDOW)
    amp_tol = cmp_cfg.get("amp_tol", _shk.DEFAULT_AMP_TOL)

    win = _lat.solve_string(c, M, **_solver_opts(cfg))
    trace = _lat.order_parameter(win, c.scale_N)
    report = _shk.compare(trace, c, window=window, amp_tol=amp_tol)

    out = _out_dir(args, cfg)
    rows = []
    for i in range(len(report.x)):
        rows.append([report.x[i], report.u_lattice[i],
                     report.branches[i, 0], report.branches[i, 1], report.branches[i, 2],
                     report.deviation[i]])
    _write_csv(out / "solve.csv",
               ["x", "u_lattice", "u_branch1", "u_branch2", "u_branch3", "deviation"], rows)
    results = {
        "oscillation": {"flag": bool(report.oscillating), "onset_x": report.onset_x},
        "smooth_max_deviation": report.smooth_max_deviation,
        "residual_max": float(np.max(np.abs(_lat.string_residual(win, c)))),
        "M": M,
    }
    _write_summary(out / "summary.json", "solve",
                   _resolved_config(cfg, c, {"solver": {**solver_cfg, "M": M}}), results)
    return 0


def cmd_flow(args) -> int:
    cfg = _load_config(args.config)
    c = _couplings_from_config(cfg, args.scale_N)
    solver_cfg = cfg.get("solver", {})
    M = solver_cfg.get("M")
    if M is None:
        M = int(round(solver_cfg.get("x_max", 0.5) * c.scale_N))
    flow_cfg = cfg.get("flow", {})
    start_kind = flow_cfg.get("start", "string")
    legs = [_flw.FlowLeg(k=leg["k"], target=leg["target"], h=leg.get("h"),
                         mode=leg.get("mode", "lattice"))
            for leg in flow_cfg.get("legs", [])]

    if start_kind == "gaussian":
        start = _lat.LatticeWindow(np.arange(1, M + 1, dtype=float),
                                   right_closure=solver_cfg.get("right_closure", "clamp"),
                                   couplings=CouplingVector({}, c.scale_N))
    else:
        start = _lat.solve_string(c, M, **_solver_opts(cfg))

    stride = flow_cfg.get("snapshot_stride")
    if stride is None and any(leg.mode == "matrix" for leg in legs):
        stride = 100
    result = _flw.integrate_flow(start, legs, snapshot_stride=stride)
    final = result.window
    out = _out_dir(args, cfg)

    compare_with = flow_cfg.get("compare_with_string", False)
    B_string = None
    if compare_with and final.couplings is not None:
        B_string = _lat.solve_string(final.couplings, M, **_solver_opts(cfg)).B

    rows = []
    for n in range(1, final.M + 1):
        row = [float(n), final.B[n - 1]]
        if B_string is not None:
            ref = B_string[n - 1]
            row += [ref, abs(final.B[n - 1] - ref) / max(abs(ref), 1e-300)]
        else:
            row += [None, None]
        rows.append(row)
    _write_csv(out / "flow.csv", ["n", "B", "B_string", "rel_deviation"], rows)

    drift = None
    if result.snapshots:
        drift = _flw.spectrum_drift(result.snapshots)
    results = {
        "steps": result.steps,
        "min_positivity": result.min_positivity,
        "spectrum_drift": drift,
        "final_couplings": {f"t{i}": v for i, v in final.couplings.entries.items()}
        if final.couplings else {},
    }
    if B_string is not None:
        rep = slice(0, final.M - final.buffer_width)
        results["max_rel_deviation_vs_string"] = float(np.max(
            np.abs(final.B[rep] - B_string[rep]) / np.maximum(np.abs(B_string[rep]), 1e-300)))
    _write_summary(out / "summary.json", "flow",
                   _resolved_config(cfg, c, {"solver": {**solver_cfg, "M": M}}), results)
    return 0


def cmd_oracle(args) -> int:
    cfg = _load_config(args.config)
    c = _couplings_from_config(cfg, args.scale_N)
    ocfg = cfg.get("oracle", {})
    n_max = ocfg.get("n_max", 20)
    hankel_n = min(ocfg.get("hankel_n_max", 12), n_max)

    w = _orc.WeightSpec(c)
    res = _orc.stieltjes_recurrence(w, n_max)
    B_hankel = np.full(n_max, np.nan)
    try:
        hk = _orc.hankel_result(w, hankel_n)
        B_hankel[:hankel_n] = hk.B
    except ShocklabError:
        pass

    out = _out_dir(args, cfg)
    rows = []
    max_disagreement = 0.0
    for n in range(1, n_max + 1):
        bh = B_hankel[n - 1]
        rel = abs(res.B[n - 1] - bh) / abs(res.B[n - 1]) if np.isfinite(bh) else None
        if rel is not None:
            max_disagreement = max(max_disagreement, rel)
        flag = "1" if (rel is not None and rel > 1e-8) else "0"
        rows.append([float(n), res.tau[n], res.log_tau[n], res.B[n - 1], bh,
                     rel, flag])
    _write_csv(out / "oracle.csv",
               ["n", "tau", "log_tau", "B_stieltjes", "B_hankel", "route_rel_diff",
                "flagged"], rows)
    _write_csv(out / "moments.csv", ["order", "moment"],
               [[float(k), res.moments[k]] for k in range(len(res.moments))])
    results = {
        "n_max": n_max,
        "hankel_n_max": hankel_n,
        "max_route_disagreement": max_disagreement,
        "quadrature": res.report,
        "convergence_warning": c.convergence_warning,
    }
    _write_summary(out / "summary.json", "oracle", _resolved_config(cfg, c, {}), results)
    return 0


def cmd_phase(args) -> int:
    cfg = _load_config(args.config)
    c = _couplings_from_config(cfg, args.scale_N)
    pcfg = cfg.get("phase", {})
    x_range = tuple(pcfg.get("x_range", (0.1, 0.35)))
    t6_range = tuple(pcfg.get("t6_range", (-0.0125, -0.002)))
    grid = tuple(pcfg.get("grid", (61, 61)))

    T = c.rescaled()
    polys = _cont.critical_set(c, x_range, t6_range, grid=grid)
    xs = np.linspace(x_range[0], x_range[1], grid[0])
    ts = np.linspace(t6_range[0], t6_range[1], grid[1])
    rows = []
    counts = {"single-minimum": 0, "coexistence": 0, "critical": 0}
    for x in xs:
        for t6 in ts:
            cc = CouplingVector.from_rescaled({**T, 6: t6}, c.scale_N)
            p = _cont.classify(float(x), cc)
            counts[p.phase] += 1
            rows.append([float(x), float(t6), p.delta, p.phase, float(p.accessible_roots)])

    out = _out_dir(args, cfg)
    _write_csv(out / "phase_grid.csv",
               ["x", "T6", "delta", "phase", "accessible_roots"], rows)
    crows = []
    for pid, poly in enumerate(polys):
        for x, t6 in poly:
            crows.append([float(pid), x, t6])
    _write_csv(out / "critical_set.csv", ["polyline", "x", "T6"], crows)
    results = {
        "phase_counts": counts,
        "n_polylines": len(polys),
        "n_contour_points": int(sum(len(p) for p in polys)),
    }
    _write_summary(out / "summary.json", "phase",
                   _resolved_config(cfg, c, {"phase": {"x_range": list(x_range),
                                                       "t6_range": list(t6_range),
                                                       "grid": list(grid)}}), results)
    return 0


def cmd_reproduce(args) -> int:
    cfg = _load_config(args.config)
    name = args.preset or cfg.get("preset")
    if not name:
        raise ConfigError("reproduce needs a preset (--preset or config.preset)")
    N = args.scale_N
    if N is None:
        N = cfg.get("couplings", {}).get("N")
    payload = _pre.run_preset(name, N=N)
    out = _out_dir(args, cfg)

    kind = payload["kind"]
    if kind == "compare":
        rows = []
        for i in range(len(payload["x"])):
            b = payload["branches"][i]
            rows.append([payload["x"][i], payload["u_lattice"][i], b[0], b[1], b[2],
                         payload["deviation"][i]])
        _write_csv(out / f"{name}.csv",
                   ["x", "u_lattice", "u_branch1", "u_branch2", "u_branch3", "deviation"],
                   rows)
        results = {"oscillation": payload["oscillation"],
                   "smooth_max_deviation": payload["smooth_max_deviation"]}
    elif kind == "continuum":
        rows = []
        for i in range(len(payload["x"])):
            b = payload["branches"][i]
            rows.append([payload["x"][i], b[0], b[1], b[2],
                         float(payload["root_counts"][i]),
                         float(payload["accessible_counts"][i]),
                         float(payload["negative_minimum_counts"][i])])
        _write_csv(out / f"{name}.csv",
                   ["x", "u_branch1", "u_branch2", "u_branch3", "n_real",
                    "n_accessible", "n_negative_minima"], rows)
        results = {"catastrophes": payload["catastrophes"],
                   "root_counts": sorted(set(payload["root_counts"]))}
    elif kind == "critical":
        crows = []
        for pid, poly in enumerate(payload["polylines"]):
            for x, t6 in poly:
                crows.append([float(pid), x, t6])
        _write_csv(out / f"{name}.csv", ["polyline", "x", "T6"], crows)
        results = {"n_polylines": len(payload["polylines"]),
                   "n_contour_points": int(sum(len(p) for p in payload["polylines"]))}
    else:  # free-energy
        header = ["u"] + [f"F_T6_{t}" for t in payload["params"]["t6_values"]]
        rows = []
        for i, u in enumerate(payload["u"]):
            row = [u] + [payload["curves"][str(t)][i] for t in payload["params"]["t6_values"]]
            rows.append(row)
        _write_csv(out / f"{name}.csv", header, rows)
        results = {"stationary": payload["stationary"]}

    cfg_echo = dict(cfg)
    cfg_echo["preset"] = name
    cfg_echo["couplings"] = {**cfg.get("couplings", {}),
                             "N": payload["params"]["N"]}
    _write_summary(out / "summary.json", "reproduce", cfg_echo,
                   {"params": payload["params"], **results})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shocklab",
        description="Dispersive-regularisation laboratory for even matrix models")
    parser.add_argument("--version", action="version", version=f"shocklab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func in [("solve", cmd_solve), ("flow", cmd_flow), ("oracle", cmd_oracle),
                       ("phase", cmd_phase), ("reproduce", cmd_reproduce)]:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON configuration file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--scale-N", dest="scale_N", type=int, default=None,
                       help="override the lattice scale N")
        p.add_argument("--preset", default=None, help="figure preset name")
        p.add_argument("--seed", type=int, default=None, help="reserved")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for grid sweeps (current sweeps are sequential)")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print(json.dumps({"error": {"type": "ConfigError",
                                    "message": "--threads must be >= 1"}}))
        return 2
    try:
        return args.func(args)
    except ShocklabError as err:
        detail = {"type": type(err).__name__, "message": str(err)}
        if getattr(err, "time", None) is not None:
            detail["time"] = err.time
        if getattr(err, "residual", None) is not None:
            detail["residual"] = err.residual
        print(json.dumps({"error": detail}))
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
