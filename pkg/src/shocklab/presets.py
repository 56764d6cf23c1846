"""Named parameter regimes (fig1a..fig4b) plus runnable recipes.

Only the regime-defining coupling values are hard-coded; the scale N defaults
to 200 everywhere and is always overridable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import continuum as _cont
from . import lattice as _lat
from . import shocks as _shk
from .couplings import CouplingVector
from .errors import ConfigError

DEFAULT_N = 200


@dataclass(frozen=True)
class Preset:
    name: str
    kind: str                      # "compare" | "continuum" | "critical" | "free-energy"
    rescaled: dict[int, float]     # regime couplings T_{2j}
    x_max: float = 0.5             # lattice window extent for compare runs
    x_range: tuple[float, float] = (-0.35, 0.5)   # sweep range for continuum runs
    t6_range: tuple[float, float] = (-0.0125, -0.002)
    x_probe: float = 0.22          # free-energy slice
    t6_values: tuple[float, ...] = ()
    u_range: tuple[float, float] = (0.0, 1.8)


PRESETS: dict[str, Preset] = {
    "fig1a": Preset("fig1a", "compare", {2: 0.0, 4: 0.1, 6: -0.01}),
    "fig1b": Preset("fig1b", "compare", {2: 0.0, 4: 0.1, 6: -0.008}),
    "fig2a": Preset("fig2a", "critical", {2: 0.0, 4: 0.1},
                    x_range=(0.1, 0.35), t6_range=(-0.0125, -0.002)),
    "fig2b": Preset("fig2b", "free-energy", {2: 0.0, 4: 0.1},
                    x_probe=0.22, t6_values=(-0.0067, -0.0051)),
    "fig3a": Preset("fig3a", "continuum", {2: 1.0, 4: -0.25, 6: -0.25},
                    x_range=(-0.35, 0.5)),
    "fig3b": Preset("fig3b", "compare", {2: 1.0, 4: -0.25, 6: -0.25}),
    "fig3c": Preset("fig3c", "continuum", {2: 1.0, 4: 0.25, 6: -0.25},
                    x_range=(-0.35, 0.5)),
    "fig3d": Preset("fig3d", "compare", {2: 1.0, 4: 0.25, 6: -0.25}),
    "fig4a": Preset("fig4a", "continuum", {2: 0.25, 4: -1.0, 6: -0.5},
                    x_range=(-0.1, 0.5)),
    "fig4b": Preset("fig4b", "compare", {2: 0.25, 4: -1.0, 6: -0.5}),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


catastrophe_points = _cont.catastrophe_points


def _compare_run(preset: Preset, N: int, window: int, amp_tol: float, **solver_opts):
    c = CouplingVector.from_rescaled(preset.rescaled, N)
    M = int(round(preset.x_max * N))
    win = _lat.solve_string(c, M, **solver_opts)
    trace = _lat.order_parameter(win, N)
    report = _shk.compare(trace, c, window=window, amp_tol=amp_tol)
    return {
        "kind": "compare",
        "preset": preset.name,
        "params": {"rescaled": {str(k): v for k, v in preset.rescaled.items()},
                   "N": N, "M": M},
        "x": report.x.tolist(),
        "u_lattice": report.u_lattice.tolist(),
        "u_continuum": report.u_continuum.tolist(),
        "branches": report.branches.tolist(),
        "deviation": report.deviation.tolist(),
        "oscillation": {"flag": bool(report.oscillating),
                        "onset_x": report.onset_x,
                        "n_maxima": len(report.envelope_max),
                        "n_minima": len(report.envelope_min)},
        "smooth_max_deviation": report.smooth_max_deviation,
    }


def _continuum_run(preset: Preset, N: int, n_points: int = 341):
    c = CouplingVector.from_rescaled(preset.rescaled, N)
    xs = np.linspace(preset.x_range[0], preset.x_range[1], n_points)
    branches = np.full((len(xs), 3), np.nan)
    counts, acc_counts, neg_min_counts = [], [], []
    for i, x in enumerate(xs):
        roots = _cont.solve_eos(_cont.eos_coefficients(c, x))
        vals = roots.values
        branches[i, :min(3, len(vals))] = vals[:3]
        counts.append(len(roots))
        acc_counts.append(len(roots.accessible))
        neg_min_counts.append(sum(1 for r in roots if r.kind == "local-min" and r.u < 0))
    cat = catastrophe_points(c)
    return {
        "kind": "continuum",
        "preset": preset.name,
        "params": {"rescaled": {str(k): v for k, v in preset.rescaled.items()}, "N": N},
        "x": xs.tolist(),
        "branches": branches.tolist(),
        "root_counts": counts,
        "accessible_counts": acc_counts,
        "negative_minimum_counts": neg_min_counts,
        "catastrophes": [{"x": x, "u": u} for x, u in cat],
    }


def _critical_run(preset: Preset, N: int, grid=(81, 81)):
    c = CouplingVector.from_rescaled(preset.rescaled, N)
    polys = _cont.critical_set(c, preset.x_range, preset.t6_range, grid=grid)
    xs = np.linspace(preset.x_range[0], preset.x_range[1], grid[0])
    ts = np.linspace(preset.t6_range[0], preset.t6_range[1], grid[1])
    T = preset.rescaled
    table = []
    for x in xs:
        for t6 in ts:
            cc = CouplingVector.from_rescaled({**T, 6: t6}, N)
            p = _cont.classify(x, cc)
            table.append((float(x), float(t6), p.delta, p.phase, p.accessible_roots))
    return {
        "kind": "critical",
        "preset": preset.name,
        "params": {"rescaled": {str(k): v for k, v in preset.rescaled.items()}, "N": N,
                   "x_range": list(preset.x_range), "t6_range": list(preset.t6_range),
                   "grid": list(grid)},
        "polylines": [p.tolist() for p in polys],
        "phase_table": table,
    }


def _free_energy_run(preset: Preset, N: int, n_points: int = 361):
    us = np.linspace(preset.u_range[0], preset.u_range[1], n_points)
    curves = {}
    stationary = {}
    for t6 in preset.t6_values:
        c = CouplingVector.from_rescaled({**preset.rescaled, 6: t6}, N)
        curves[str(t6)] = _cont.free_energy(us, preset.x_probe, c).tolist()
        roots = _cont.solve_eos(_cont.eos_coefficients(c, preset.x_probe))
        stationary[str(t6)] = [
            {"u": r.u, "kind": r.kind, "accessible": r.accessible,
             "F": float(_cont.free_energy(r.u, preset.x_probe, c))}
            for r in roots]
    return {
        "kind": "free-energy",
        "preset": preset.name,
        "params": {"rescaled": {str(k): v for k, v in preset.rescaled.items()},
                   "N": N, "x": preset.x_probe, "t6_values": list(preset.t6_values)},
        "u": us.tolist(),
        "curves": curves,
        "stationary": stationary,
    }


def run_preset(name: str, N: int | None = None, window: int = _shk.DEFAULT_WINDOW,
               amp_tol: float = _shk.DEFAULT_AMP_TOL, **solver_opts) -> dict:
    """Execute a figure preset and return its full result payload."""
    preset = get_preset(name)
    N = DEFAULT_N if N is None else int(N)
    if preset.kind == "compare":
        return _compare_run(preset, N, window, amp_tol, **solver_opts)
    if preset.kind == "continuum":
        return _continuum_run(preset, N)
    if preset.kind == "critical":
        return _critical_run(preset, N)
    return _free_energy_run(preset, N)
