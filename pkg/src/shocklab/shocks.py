"""Lattice-vs-continuum comparison, oscillation detection, convergence studies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import continuum as _cont
from . import lattice as _lat
from .couplings import CouplingVector
from .errors import InvalidInputError, InvalidProbeError, NoBranchError

#: detector defaults, tuned so the smooth figure regimes stay quiet at N = 200
DEFAULT_WINDOW = 12
DEFAULT_AMP_TOL = 1e-3


@dataclass(frozen=True)
class OscillationScan:
    flag: bool
    onset_x: float | None
    maxima: tuple[tuple[float, float], ...]   # (x, u) local maxima
    minima: tuple[tuple[float, float], ...]


def _local_extrema(u: np.ndarray):
    """Indices and kinds (+1 max / -1 min) of strict discrete local extrema."""
    idx, kinds = [], []
    for i in range(1, len(u) - 1):
        if u[i] > u[i - 1] and u[i] > u[i + 1]:
            idx.append(i)
            kinds.append(1)
        elif u[i] < u[i - 1] and u[i] < u[i + 1]:
            idx.append(i)
            kinds.append(-1)
    return np.array(idx, dtype=int), np.array(kinds, dtype=int)


def detect_oscillations(trace: _lat.OrderParameterTrace, window: int = DEFAULT_WINDOW,
                        amp_tol: float = DEFAULT_AMP_TOL) -> OscillationScan:
    """Flag dispersive oscillations in an order-parameter trace.

    A sliding window of ``window`` samples is flagged when it contains an
    alternating run of at least two local extrema (one overshoot pair) whose
    adjacent peak-to-trough amplitude exceeds ``amp_tol``; the onset is the
    smallest x of a flagged window.  A degenerate catastrophe regularises
    into a single resolvable overshoot pair at moderate N, so the pair, not
    a longer run, is the detection unit.
    """
    n = len(trace)
    if n < 2 * window + 1:
        raise InvalidInputError(f"need at least {2 * window + 1} samples, got {n}")
    x, u = trace.x, trace.u
    idx, kinds = _local_extrema(u)
    maxima = tuple((float(x[i]), float(u[i])) for i, k in zip(idx, kinds) if k > 0)
    minima = tuple((float(x[i]), float(u[i])) for i, k in zip(idx, kinds) if k < 0)

    flag = False
    onset = None
    if len(idx) >= 2:
        for start in range(0, n - window + 1):
            stop = start + window
            sel = np.where((idx >= start) & (idx < stop))[0]
            if len(sel) < 2:
                continue
            ok = any(kinds[a] != kinds[b] and abs(u[idx[b]] - u[idx[a]]) > amp_tol
                     for a, b in zip(sel, sel[1:]))
            if ok:
                flag = True
                onset = float(x[start])
                break
    return OscillationScan(flag=flag, onset_x=onset, maxima=maxima, minima=minima)


@dataclass(frozen=True)
class ComparisonReport:
    x: np.ndarray
    u_lattice: np.ndarray
    u_continuum: np.ndarray        # NaN where no accessible branch
    deviation: np.ndarray          # NaN where no accessible branch
    branches: np.ndarray           # (len(x), 3) real roots ascending, NaN-padded
    smooth_max_deviation: float
    oscillating: bool
    onset_x: float | None
    envelope_max: tuple[tuple[float, float], ...]
    envelope_min: tuple[tuple[float, float], ...]


def compare(trace: _lat.OrderParameterTrace, c: CouplingVector,
            window: int = DEFAULT_WINDOW, amp_tol: float = DEFAULT_AMP_TOL) -> ComparisonReport:
    """Evaluate the continuum branch on the trace grid and report deviations.

    The deviation branch starts from the equilibrium branch at the left edge
    and continues by nearest-root tracking; in multivalued regions this keeps
    the branch continuously connected from the left.
    """
    x = trace.x
    n_pts = len(x)
    branches = np.full((n_pts, 3), np.nan)
    u_cont = np.full(n_pts, np.nan)
    prev = None
    for i, xi in enumerate(x):
        roots = _cont.solve_eos(_cont.eos_coefficients(c, xi))
        vals = roots.values
        branches[i, :min(3, len(vals))] = vals[:3]
        acc = [r.u for r in roots.accessible]
        if not acc:
            continue
        if prev is None:
            pick = _cont.equilibrium_branch(c, xi)
            if pick is None:
                continue
        else:
            pick = min(acc, key=lambda v: abs(v - prev))
        u_cont[i] = pick
        prev = pick
    if np.all(np.isnan(u_cont)):
        raise NoBranchError("no accessible continuum branch anywhere on the grid")

    deviation = trace.u - u_cont
    if n_pts >= 2 * window + 1:
        scan = detect_oscillations(trace, window=window, amp_tol=amp_tol)
    else:
        scan = OscillationScan(flag=False, onset_x=None, maxima=(), minima=())

    smooth = np.abs(deviation)
    if scan.flag and scan.onset_x is not None:
        smooth = smooth[x < scan.onset_x]
    finite = smooth[np.isfinite(smooth)]
    smooth_max = float(np.max(finite)) if len(finite) else math.nan
    return ComparisonReport(
        x=x, u_lattice=trace.u, u_continuum=u_cont, deviation=deviation,
        branches=branches, smooth_max_deviation=smooth_max,
        oscillating=scan.flag, onset_x=scan.onset_x,
        envelope_max=scan.maxima, envelope_min=scan.minima)


@dataclass(frozen=True)
class ConvergenceStudy:
    rows: tuple[tuple[int, float, float], ...]   # (N, probed x, deviation)
    order: float                                  # fitted decay order p


def convergence_study(c: CouplingVector, n_list, x_probe: float,
                      x_max: float = 0.5, **solver_opts) -> ConvergenceStudy:
    """Lattice/continuum deviation at a smooth probe point for several scales N.

    The couplings are held fixed in rescaled form while N varies; the probe is
    snapped to the nearest lattice site of each scale.  Raises
    InvalidProbeError when the probe sits in a multivalued region.
    """
    T = c.rescaled()
    probe_phase = _cont.classify(x_probe, c)
    degenerate = c.max_j <= 3 and _cont.discriminant(
        x_probe, T.get(2, 0.0), T.get(4, 0.0), T.get(6, 0.0)).degenerate
    if c.max_j <= 3 and not degenerate and probe_phase.delta > -_cont.DELTA_TIE_TOL:
        raise InvalidProbeError(f"probe x={x_probe} is not strictly single-valued")
    cands = [r for r in probe_phase.roots if r.accessible and r.kind != "local-max"]
    if len(cands) != 1:
        raise InvalidProbeError(f"probe x={x_probe} has no unique accessible branch")

    rows = []
    for N in n_list:
        cn = CouplingVector.from_rescaled(T, int(N))
        M = int(round(x_max * N))
        win = _lat.solve_string(cn, M, **solver_opts)
        n_site = int(round(x_probe * N))
        if n_site < 1 or n_site > len(win.reported):
            raise InvalidProbeError(f"probe x={x_probe} outside the reported window at N={N}")
        x_snap = n_site / N
        u_lat = win.B[n_site - 1] / N
        u_c = _cont.equilibrium_branch(cn, x_snap)
        if u_c is None:
            raise InvalidProbeError(f"no accessible branch at snapped probe x={x_snap}")
        rows.append((int(N), x_snap, float(abs(u_lat - u_c))))

    logs = [(math.log(N), math.log(max(dev, 1e-300))) for N, _, dev in rows]
    if len(logs) >= 2:
        xs = np.array([a for a, _ in logs])
        ys = np.array([b for _, b in logs])
        slope = float(np.polyfit(xs, ys, 1)[0])
        order = -slope
    else:
        order = math.nan
    return ConvergenceStudy(rows=tuple(rows), order=order)
