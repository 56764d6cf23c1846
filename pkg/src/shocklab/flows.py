"""Even-hierarchy flows: lattice form, Lax-matrix form, and a fixed-step integrator.

The lattice form evolves the Volterra variables,

    dB_n/dt_{2k} = B_n (V^(2k)_{n+1} - V^(2k)_{n-1}),

while the matrix form evolves the zero-diagonal Jacobi matrix L by the
commutator dL/dt_{2k} = [ (L^2k)_s / 2, L ], where (.)_s is the strictly
upper minus strictly lower triangular split.  Both are stepped with the
classical fourth-order explicit scheme at fixed step size; matrix mode is a
dense validation path capped at dimension 200.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .couplings import CouplingVector
from .errors import (BlowUpError, InstabilityError, InvalidInputError)
from .lattice import LatticeWindow, _v_all

MATRIX_MODE_MAX_DIM = 200

#: growth factor on max|B| that aborts a leg as unstable
_GROWTH_LIMIT = 1e6


@dataclass(frozen=True)
class LaxMatrix:
    """Symmetric tridiagonal matrix with zero diagonal; b holds the off-diagonal."""

    b: np.ndarray

    def __post_init__(self):
        arr = np.array(self.b, dtype=float)
        if arr.ndim != 1 or np.any(arr <= 0.0):
            raise InvalidInputError("off-diagonal entries must be a 1-D positive array")
        arr.setflags(write=False)
        object.__setattr__(self, "b", arr)

    @property
    def dimension(self) -> int:
        return len(self.b) + 1

    def dense(self) -> np.ndarray:
        L = np.zeros((self.dimension, self.dimension))
        idx = np.arange(len(self.b))
        L[idx, idx + 1] = self.b
        L[idx + 1, idx] = self.b
        return L

    @classmethod
    def from_window(cls, window: LatticeWindow) -> "LaxMatrix":
        return cls(np.sqrt(window.B))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.dense())


@dataclass(frozen=True)
class FlowLeg:
    k: int
    target: float
    h: float | None = None
    mode: str = "lattice"

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError(f"flow index must be >= 1, got {self.k}")
        if self.h is not None and self.h <= 0.0:
            raise InvalidInputError("step size must be positive")
        if self.mode not in ("lattice", "matrix"):
            raise InvalidInputError(f"unknown flow mode {self.mode!r}")


@dataclass(frozen=True)
class FlowSchedule:
    legs: tuple[FlowLeg, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "legs", tuple(self.legs))

    def __len__(self):
        return len(self.legs)

    def __iter__(self):
        return iter(self.legs)


def default_step(delta: float) -> float:
    return min(1e-3, abs(delta) / 1000.0) if delta != 0.0 else 1e-3


def flow_rhs(window: LatticeWindow, k: int, c: CouplingVector | None = None) -> np.ndarray:
    """Right-hand side B_n (V^(2k)_{n+1} - V^(2k)_{n-1}) over the window."""
    V = _v_all(window, k, c)  # sites 0..M+1
    return window.B * (V[2:] - V[:-2])


def _skew_split(A: np.ndarray) -> np.ndarray:
    upper = np.triu(A, 1)
    return upper - upper.T


def matrix_flow_rhs(L: LaxMatrix, k: int) -> np.ndarray:
    """Dense commutator [ (L^2k)_s / 2, L ]; validation mode only."""
    if L.dimension > MATRIX_MODE_MAX_DIM:
        raise InvalidInputError(
            f"matrix mode capped at dimension {MATRIX_MODE_MAX_DIM}, got {L.dimension}")
    dense = L.dense()
    S = 0.5 * _skew_split(np.linalg.matrix_power(dense, 2 * k))
    return S @ dense - dense @ S


@dataclass(frozen=True)
class FlowResult:
    """Final window plus trajectory diagnostics."""

    window: LatticeWindow
    min_positivity: float
    steps: int
    snapshots: tuple[LaxMatrix, ...] = ()


def _rk4(y: np.ndarray, t: float, h: float, f) -> np.ndarray:
    # divergence is detected after the step; silence transient overflow
    with np.errstate(over="ignore", invalid="ignore"):
        k1 = f(y, t)
        k2 = f(y + 0.5 * h * k1, t + 0.5 * h)
        k3 = f(y + 0.5 * h * k2, t + 0.5 * h)
        k4 = f(y + h * k3, t + h)
        return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_flow(start: LatticeWindow, sched: FlowSchedule | list,
                   snapshot_stride: int | None = None) -> FlowResult:
    """Integrate the scheduled legs from ``start`` with fixed-step RK4.

    Couplings ride along: each leg moves t_{2k} from its current value to the
    leg target, and closure ghosts are evaluated at the instantaneous
    couplings.  Matrix-mode legs evolve the dense Lax matrix (hard-wall
    truncation) and can record snapshots every ``snapshot_stride`` steps.

    Raises BlowUpError if positivity is lost and InstabilityError if the
    window norm grows by more than a factor of 1e6.
    """
    if isinstance(sched, (list, tuple)):
        sched = FlowSchedule(tuple(sched))
    c = start.couplings if start.couplings is not None else CouplingVector({})
    B = start.B.copy()
    min_pos = float(np.min(B)) if len(B) else math.inf
    ref = max(1.0, float(np.max(np.abs(B))) if len(B) else 1.0)
    total_steps = 0
    snapshots: list[LaxMatrix] = []

    for leg in sched:
        idx = 2 * leg.k
        t0 = c.t(idx)
        delta = leg.target - t0
        if delta == 0.0:
            continue
        h = leg.h if leg.h is not None else default_step(delta)
        steps = max(1, math.ceil(abs(delta) / h))
        h_eff = delta / steps

        if leg.mode == "matrix":
            if len(B) + 1 > MATRIX_MODE_MAX_DIM:
                raise InvalidInputError(
                    f"matrix mode capped at dimension {MATRIX_MODE_MAX_DIM}")
            L = LaxMatrix(np.sqrt(B)).dense()

            def f_mat(Lm, t):
                S = 0.5 * _skew_split(np.linalg.matrix_power(Lm, 2 * leg.k))
                return S @ Lm - Lm @ S

            if snapshot_stride:
                snapshots.append(LaxMatrix(np.diagonal(L, 1).copy()))
            for i in range(steps):
                L = _rk4(L, t0 + i * h_eff, h_eff, f_mat)
                total_steps += 1
                off = np.diagonal(L, 1)
                if not np.all(np.isfinite(off)):
                    raise InstabilityError(f"matrix leg diverged at t_{idx}={t0 + (i + 1) * h_eff}")
                m = float(np.min(off))
                if m <= 0.0:
                    raise BlowUpError("off-diagonal entry hit zero",
                                      time=t0 + (i + 1) * h_eff)
                min_pos = min(min_pos, m * m)
                if snapshot_stride and (i + 1) % snapshot_stride == 0:
                    snapshots.append(LaxMatrix(off.copy()))
            B = np.asarray(off) ** 2
            c = c.with_entry(idx, leg.target)
            continue

        closure = start.right_closure

        def f_lat(Bv, t):
            w = LatticeWindow(Bv, right_closure=closure, buffer_width=0,
                              couplings=c.with_entry(idx, t))
            V = _v_all(w, leg.k)
            return Bv * (V[2:] - V[:-2])

        for i in range(steps):
            B = _rk4(B, t0 + i * h_eff, h_eff, f_lat)
            total_steps += 1
            if not np.all(np.isfinite(B)):
                raise InstabilityError(f"lattice leg diverged at t_{idx}={t0 + (i + 1) * h_eff}")
            m = float(np.min(B))
            min_pos = min(min_pos, m)
            if m <= 0.0:
                raise BlowUpError("window entry hit zero", time=t0 + (i + 1) * h_eff)
            if float(np.max(np.abs(B))) > _GROWTH_LIMIT * ref:
                raise InstabilityError(
                    f"window norm grew beyond 1e6x at t_{idx}={t0 + (i + 1) * h_eff}")
        c = c.with_entry(idx, leg.target)

    window = LatticeWindow(B, right_closure=start.right_closure,
                           buffer_width=start.buffer_width, couplings=c)
    return FlowResult(window=window, min_positivity=min_pos, steps=total_steps,
                      snapshots=tuple(snapshots))


def spectrum_drift(snapshots) -> float:
    """Max-norm drift of the sorted Lax spectrum across a trajectory."""
    snaps = list(snapshots)
    if not snaps:
        raise InvalidInputError("at least one snapshot required")
    if snaps[0].dimension > MATRIX_MODE_MAX_DIM:
        raise InvalidInputError(f"matrix mode capped at dimension {MATRIX_MODE_MAX_DIM}")
    ref = np.sort(snaps[0].eigenvalues())
    drift = 0.0
    for s in snaps[1:]:
        drift = max(drift, float(np.max(np.abs(np.sort(s.eigenvalues()) - ref))))
    return drift
