"""Semi-infinite lattice of squared recurrence coefficients and the string equation.

State is a finite window B_1..B_M of the positive Volterra variables
B_n = b_n^2.  Sites n <= 0 are identically zero; the right edge is closed by
one of three ghost rules (hard zero, clamp to the continuum branch, linear
extrapolation).  The string equation ties the window to the couplings
site-by-site:

    B_n - sum_j 2j * t_{2j} * V^(2j)_n = n,

with the hierarchy densities V^(2)_n = B_n,
V^(4)_n = B_n (B_{n-1} + B_n + B_{n+1}),
V^(6)_n = B_n (B_{n-1} B_{n+1} + V^(4)_{n-1} + V^(4)_n + V^(4)_{n+1}),
and, for general k, the telescoped diagonal of the 2k-th power of the
zero-diagonal Jacobi matrix:  V^(2k)_n = sum_{j<=n} (-1)^(n-j) (L^2k)_jj.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import continuum as _cont
from .couplings import CouplingVector
from .errors import (InvalidInputError, NoConvergenceError,
                     NonphysicalSolutionError, OutOfRangeError)

CLOSURE_ZERO = "zero"
CLOSURE_CLAMP = "clamp"
CLOSURE_EXTRAPOLATE = "extrapolate"

_CLOSURE_ALIASES = {
    "zero": CLOSURE_ZERO,
    "clamp": CLOSURE_CLAMP,
    "clamp-to-continuum-branch": CLOSURE_CLAMP,
    "extrapolate": CLOSURE_EXTRAPOLATE,
    "linear-extrapolation": CLOSURE_EXTRAPOLATE,
}


def default_buffer_width(M: int, q: int) -> int:
    return max(2 * max(q, 1), math.ceil(0.05 * M))


def _clamp_root(c: CouplingVector, x: float):
    """Continuum value used to clamp a ghost site, or None when ambiguous.

    The branch is well-defined when exactly one accessible stationary point
    that is not a local maximum exists at this x; coexistence regions fall
    back to extrapolation.
    """
    roots = _cont.solve_eos(_cont.eos_coefficients(c, x))
    cands = [r for r in roots if r.accessible and r.kind != "local-max"]
    if len(cands) == 1:
        return cands[0].u
    return None


@dataclass(frozen=True)
class LatticeWindow:
    """Immutable window of Volterra variables with boundary-closure metadata."""

    B: np.ndarray
    right_closure: str = CLOSURE_ZERO
    buffer_width: int | None = None
    couplings: CouplingVector | None = None

    def __post_init__(self):
        arr = np.array(self.B, dtype=float)
        if arr.ndim != 1:
            raise InvalidInputError("window values must be one-dimensional")
        arr.setflags(write=False)
        object.__setattr__(self, "B", arr)
        closure = _CLOSURE_ALIASES.get(self.right_closure)
        if closure is None:
            raise InvalidInputError(f"unknown right closure {self.right_closure!r}")
        object.__setattr__(self, "right_closure", closure)
        if self.buffer_width is None:
            q = self.couplings.max_j if self.couplings is not None else 1
            object.__setattr__(self, "buffer_width", default_buffer_width(len(arr), q))

    @property
    def M(self) -> int:
        return len(self.B)

    @property
    def is_physical(self) -> bool:
        return bool(np.all(self.B > 0.0)) if self.M else True

    @property
    def reported(self) -> np.ndarray:
        """Window values with the right-edge buffer excluded."""
        return self.B[: max(self.M - self.buffer_width, 0)]

    def right_ghosts(self, count: int, c: CouplingVector | None = None) -> np.ndarray:
        """Ghost values B_{M+1}..B_{M+count} per the closure rule."""
        if count <= 0:
            return np.zeros(0)
        c = c if c is not None else self.couplings
        if self.right_closure == CLOSURE_ZERO:
            return np.zeros(count)
        if self.right_closure == CLOSURE_EXTRAPOLATE or c is None:
            return self._extrapolated(count)
        ghosts = np.empty(count)
        N = c.scale_N
        for i in range(1, count + 1):
            u = _clamp_root(c, (self.M + i) / N)
            if u is not None:
                ghosts[i - 1] = N * u
            else:
                ghosts[i - 1] = self._extrapolated(i)[-1]
        return ghosts

    def _extrapolated(self, count: int) -> np.ndarray:
        if self.M == 0:
            return np.zeros(count)
        last = self.B[-1]
        slope = self.B[-1] - self.B[-2] if self.M >= 2 else last
        return last + slope * np.arange(1, count + 1)

    def extended(self, pad: int, c: CouplingVector | None = None) -> np.ndarray:
        """[B_{1-pad}, ..., B_{M+pad}] with left zeros and right ghosts."""
        return np.concatenate([np.zeros(pad), self.B, self.right_ghosts(pad, c)])


@dataclass(frozen=True)
class OrderParameterTrace:
    """Rescaled samples (x, u) = (n/N, B_n/N) over the reported window."""

    N: int
    x: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        u = np.array(self.u, dtype=float)
        if x.shape != u.shape:
            raise InvalidInputError("x and u must have the same shape")
        if x.size > 1:
            dx = np.diff(x)
            if np.any(dx <= 0) or not np.allclose(dx, 1.0 / self.N, rtol=1e-9, atol=1e-15):
                raise InvalidInputError("x must increase uniformly with spacing 1/N")
        x.setflags(write=False)
        u.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "u", u)

    def __len__(self):
        return len(self.x)


def order_parameter(window: LatticeWindow, N: int) -> OrderParameterTrace:
    """Interpolation data (n/N, B_n/N) for the reported sites."""
    B = window.reported
    n = np.arange(1, len(B) + 1, dtype=float)
    return OrderParameterTrace(N=N, x=n / N, u=B / N)


# ---------------------------------------------------------------------------
# V-functions
# ---------------------------------------------------------------------------

def _v_explicit_range(E: np.ndarray, offset: int, k: int, n_lo: int, n_hi: int) -> np.ndarray:
    """V^(2k) (k <= 3) at sites n_lo..n_hi from extended values E.

    ``E[offset + s]`` holds B_s; callers guarantee E covers s in
    [n_lo - (k-1), n_hi + (k-1)].
    """
    i0, i1 = offset + n_lo, offset + n_hi  # inclusive index range of sites
    if k == 1:
        return E[i0:i1 + 1].copy()
    if k == 2:
        return E[i0:i1 + 1] * (E[i0 - 1:i1] + E[i0:i1 + 1] + E[i0 + 1:i1 + 2])
    if k == 3:
        c = E[i0 - 1:i1 + 2]  # sites n_lo-1 .. n_hi+1
        v4 = c * (E[i0 - 2:i1 + 1] + c + E[i0:i1 + 3])
        core = E[i0:i1 + 1]
        return core * (E[i0 - 1:i1] * E[i0 + 1:i1 + 2] + v4[:-2] + v4[1:-1] + v4[2:])
    raise InvalidInputError(f"explicit form only covers k <= 3, got k={k}")


def _banded_powers(bb: np.ndarray, power: int) -> list[list[np.ndarray]]:
    """Diagonals of L^a, a = 0..power, for the zero-diagonal Jacobi matrix.

    ``bb[i]`` is the off-diagonal entry L[i, i+1] (0-based).  Each power is a
    list of diagonals d = 0..a with entry arrays of length P-d, where
    diagonals[d][i] = (L^a)[i, i+d].
    """
    P = len(bb) + 1
    mats = [[np.ones(P)], [np.zeros(P), bb.astype(float)]]
    for _ in range(2, power + 1):
        C = mats[-1]
        bw = len(C) - 1
        R = []
        for d in range(bw + 2):
            out = np.zeros(max(P - d, 0))
            # term C[i, i+d-1] * bb[i+d-1]
            if d >= 1:
                if d - 1 <= bw:
                    m = P - d
                    out[:m] += C[d - 1][:m] * bb[d - 1:d - 1 + m]
            else:  # d == 0: C[i, i-1] * bb[i-1] = C[1][i-1] * bb[i-1]
                if bw >= 1:
                    out[1:] += C[1] * bb
            # term C[i, i+d+1] * bb[i+d]
            if d + 1 <= bw:
                m = P - d - 1
                out[:m] += C[d + 1][:m] * bb[d:d + m]
            R.append(out)
        mats.append(R)
    return mats


def _v_general_range(E: np.ndarray, offset: int, k: int, n_hi: int) -> np.ndarray:
    """V^(2k) at sites 0..n_hi by telescoping the diagonal of L^(2k)."""
    P = n_hi + k  # matrix dimension; D_j exact for j <= n_hi needs b to site n_hi+k-1
    bb = np.sqrt(np.maximum(E[offset + 1: offset + P], 0.0))  # b_1..b_{P-1}
    diag = _banded_powers(bb, 2 * k)[2 * k][0]  # (L^2k)_jj, j = 1..P (0-based)
    V = np.zeros(n_hi + 1)
    for n in range(1, n_hi + 1):
        V[n] = diag[n - 1] - V[n - 1]
    return V


def _v_all(window: LatticeWindow, k: int, c: CouplingVector | None = None,
           n_hi: int | None = None) -> np.ndarray:
    """V^(2k) at sites 0..n_hi (default 0..M+1)."""
    M = window.M
    if n_hi is None:
        n_hi = M + 1
    pad = k + max(n_hi - M, 0)
    E = window.extended(pad, c)
    if k <= 3:
        return _v_explicit_range(E, pad - 1, k, 0, n_hi)
    return _v_general_range(E, pad - 1, k, n_hi)


def v_explicit(window: LatticeWindow, n: int, k: int) -> float:
    """Printed hierarchy density V^(2k)_n for k = 1, 2, 3."""
    if k not in (1, 2, 3):
        raise InvalidInputError(f"v_explicit requires k in {{1,2,3}}, got {k}")
    if not 0 <= n <= window.M:
        raise OutOfRangeError(f"site {n} outside window 0..{window.M}")
    E = window.extended(k)
    return float(_v_explicit_range(E, k - 1, k, n, n)[0])


def v_general(window: LatticeWindow, n: int, k: int) -> float:
    """V^(2k)_n for any k >= 1 via the telescoped matrix-power diagonal."""
    if k < 1:
        raise InvalidInputError(f"flow index must be positive, got {k}")
    if not 0 <= n <= window.M:
        raise OutOfRangeError(f"site {n} outside window 0..{window.M}")
    if n == 0:
        return 0.0
    pad = k
    E = window.extended(pad)
    return float(_v_general_range(E, pad - 1, k, n)[n])


# ---------------------------------------------------------------------------
# String equation
# ---------------------------------------------------------------------------

def string_residual(window: LatticeWindow, c: CouplingVector | None = None,
                    rescaled: bool = False) -> np.ndarray:
    """Site-wise defect B_n - sum_j 2j t_{2j} V^(2j)_n - n over the window.

    With ``rescaled=True`` the equivalent view u_n - sum_j 2j T_{2j} W_n^(2j) - x
    (i.e. the same array divided by N) is returned.
    """
    c = c if c is not None else window.couplings
    if c is None:
        c = CouplingVector({})
    M = window.M
    n = np.arange(1, M + 1, dtype=float)
    res = window.B - n
    for idx, t_val in c.entries.items():
        if t_val == 0.0:
            continue
        j = idx // 2
        V = _v_all(window, j, c, n_hi=M)
        res = res - (2.0 * j * t_val) * V[1:]
    return res / c.scale_N if rescaled else res


def _dv_band_explicit(E: np.ndarray, offset: int, k: int, M: int) -> np.ndarray:
    """Band of dV^(2k)_n / dB_{n+o} for o in [-(k-1), k-1], n = 1..M.

    Returned array has shape (2k-1, M); row r holds offset o = r - (k-1).
    Entries referring to sites outside 1..M+ghosts are still filled (the
    caller folds ghost columns separately).
    """
    i = offset + np.arange(1, M + 1)  # extended index of site n
    if k == 1:
        return np.ones((1, M))
    if k == 2:
        band = np.empty((3, M))
        band[0] = E[i]                       # d/dB_{n-1}
        band[1] = E[i - 1] + 2 * E[i] + E[i + 1]
        band[2] = E[i]                       # d/dB_{n+1}
        return band
    if k == 3:
        Bm2, Bm1, B0, Bp1, Bp2 = E[i - 2], E[i - 1], E[i], E[i + 1], E[i + 2]
        v4m = Bm1 * (Bm2 + Bm1 + B0)
        v40 = B0 * (Bm1 + B0 + Bp1)
        v4p = Bp1 * (B0 + Bp1 + Bp2)
        G = Bm1 * Bp1 + v4m + v40 + v4p
        band = np.empty((5, M))
        band[0] = B0 * Bm1
        band[1] = B0 * (Bp1 + Bm2 + 2 * Bm1 + 2 * B0)
        band[2] = G + 2 * B0 * (Bm1 + B0 + Bp1)
        band[3] = B0 * (Bm1 + 2 * B0 + 2 * Bp1 + Bp2)
        band[4] = B0 * Bp1
        return band
    raise InvalidInputError("explicit derivative only covers k <= 3")


def _dv_band_general(E: np.ndarray, offset: int, k: int, M: int) -> np.ndarray:
    """Band of dV^(2k)_n / dB_{n+o} via matrix-power differentiation."""
    P = M + k
    bb = np.sqrt(np.maximum(E[offset + 1: offset + P], 0.0))
    mats = _banded_powers(bb, 2 * k)
    p = 2 * k

    def entry(a: int, row: int, col: int) -> float:
        """(L^a)[row, col] with 0-based indices."""
        d = abs(row - col)
        if d >= len(mats[a]):
            return 0.0
        lo = min(row, col)
        diag = mats[a][d]
        return diag[lo] if lo < len(diag) else 0.0

    # dD_j/db_m, nonzero for j in [m-k+1, m+k] (1-based sites)
    def dD_db(j: int, m: int) -> float:
        jr, mr = j - 1, m - 1  # 0-based matrix indices; b_m couples (mr, mr+1)
        tot = 0.0
        for a in range(p):
            tot += (entry(a, jr, mr) * entry(p - 1 - a, mr + 1, jr)
                    + entry(a, jr, mr + 1) * entry(p - 1 - a, mr, jr))
        return tot

    band = np.zeros((2 * k - 1, M))
    for n in range(1, M + 1):
        for o in range(-(k - 1), k):
            m = n + o
            if m < 1:
                continue
            acc = 0.0
            for j in range(max(1, m - k + 1), min(n, m + k) + 1):
                acc += (-1.0) ** (n - j) * dD_db(j, m)
            bm = bb[m - 1] if m - 1 < len(bb) else 0.0
            if bm != 0.0:
                band[o + k - 1, n - 1] = acc / (2.0 * bm)
    return band


def string_jacobian(window: LatticeWindow, c: CouplingVector | None = None) -> np.ndarray:
    """Banded Jacobian of the string residual in LAPACK banded storage.

    Shape is (2q-1, M) with halfwidths (q-1, q-1):
    ab[q-1 + n - m, m] = d residual_n / d B_m (0-based n, m).
    Ghost-site dependence of the linear-extrapolation closure is folded into
    the last two columns (it stays inside the band).
    """
    c = c if c is not None else window.couplings
    if c is None:
        c = CouplingVector({})
    M = window.M
    q = max(c.max_j, 1)
    kl = ku = q - 1
    ab = np.zeros((kl + ku + 1, M))
    ab[ku, :] = 1.0  # d B_n / d B_n

    pad = q
    E = window.extended(pad, c)
    ghosts_linear = window.right_closure == CLOSURE_EXTRAPOLATE

    # clamp closure may fall back to extrapolation pointwise; detect which
    # ghost sites are extrapolated so their B-dependence is folded too.
    ghost_dep = np.zeros(pad, dtype=bool)
    if window.right_closure == CLOSURE_EXTRAPOLATE:
        ghost_dep[:] = True
    elif window.right_closure == CLOSURE_CLAMP:
        for i in range(1, pad + 1):
            ghost_dep[i - 1] = _clamp_root(c, (M + i) / c.scale_N) is None

    for idx, t_val in c.entries.items():
        if t_val == 0.0:
            continue
        j = idx // 2
        if j <= 3:
            band = _dv_band_explicit(E, pad - 1, j, M)
        else:
            band = _dv_band_general(E, pad - 1, j, M)
        w = 2.0 * j * t_val
        for o in range(-(j - 1), j):
            vals = band[o + j - 1]
            for n in range(1, M + 1):
                m = n + o
                if m < 1:
                    continue
                if m <= M:
                    ab[ku + (n - 1) - (m - 1), m - 1] -= w * vals[n - 1]
                else:
                    i = m - M  # ghost B_{M+i}
                    if not ghost_dep[i - 1]:
                        continue
                    # B_{M+i} = B_M + i (B_M - B_{M-1})
                    if M >= 1:
                        ab[ku + (n - 1) - (M - 1), M - 1] -= w * vals[n - 1] * (1.0 + i)
                    if M >= 2:
                        ab[ku + (n - 1) - (M - 2), M - 2] -= w * vals[n - 1] * (-float(i))
    return ab


def _newton(B0: np.ndarray, c: CouplingVector, closure: str, tol: float,
            max_iter: int, max_halvings: int = 30):
    """Damped Newton iteration on the window; returns the solved array."""
    q = max(c.max_j, 1)
    kl = ku = q - 1
    B = B0.copy()

    def residual_of(arr):
        win = LatticeWindow(arr, right_closure=closure, buffer_width=0, couplings=c)
        return string_residual(win, c)

    r = residual_of(B)
    rnorm = float(np.max(np.abs(r))) if len(r) else 0.0
    for _ in range(max_iter):
        if rnorm < tol:
            return B
        win = LatticeWindow(B, right_closure=closure, buffer_width=0, couplings=c)
        ab = string_jacobian(win, c)
        step = solve_banded((kl, ku), ab, -r)
        lam = 1.0
        for _ in range(max_halvings + 1):
            trial = B + lam * step
            if np.all(trial > 0.0):
                r_trial = residual_of(trial)
                t_norm = float(np.max(np.abs(r_trial)))
                if t_norm < rnorm or t_norm < tol:
                    B, r, rnorm = trial, r_trial, t_norm
                    break
            lam *= 0.5
        else:
            raise NoConvergenceError("line search stalled", residual=rnorm)
    if rnorm < tol:
        return B
    raise NoConvergenceError(f"Newton did not reach tolerance (residual {rnorm:.3e})",
                             residual=rnorm)


def solve_string(c: CouplingVector, M: int, *, tol: float = 1e-12,
                 max_iter: int = 40, continuation_steps: int = 50,
                 max_total_steps: int = 800, right_closure: str = CLOSURE_CLAMP,
                 buffer_width: int | None = None) -> LatticeWindow:
    """Solve the string equation on a window of M sites.

    Homotopy continuation runs from the free model (B_n = n) along the ray
    s * t, warm-starting a damped Newton iteration at every stage.  The stage
    step halves on Newton failure until the equivalent of ``max_total_steps``
    stages, then raises NoConvergenceError.

    Parameters
    ----------
    c : CouplingVector
        Target couplings (raw t values plus scale N).
    M : int
        Window length; must be at least 4q.
    tol : float
        Max-norm residual tolerance of the solved window.
    """
    q = max(c.max_j, 1)
    if M < 4 * q:
        raise InvalidInputError(f"window length {M} below 4q = {4 * q}")
    closure = _CLOSURE_ALIASES.get(right_closure)
    if closure is None:
        raise InvalidInputError(f"unknown right closure {right_closure!r}")

    B = np.arange(1, M + 1, dtype=float)
    if not c.is_zero:
        s = 0.0
        ds = 1.0 / continuation_steps
        min_ds = 1.0 / max_total_steps
        streak = 0
        last_residual = None
        while s < 1.0:
            target = min(1.0, s + ds)
            try:
                B = _newton(B, c.scaled(target), closure, tol, max_iter)
            except NoConvergenceError as err:
                last_residual = err.residual
                ds *= 0.5
                streak = 0
                if ds < min_ds:
                    raise NoConvergenceError(
                        f"continuation failed below step 1/{max_total_steps}",
                        residual=last_residual) from err
                continue
            s = target
            streak += 1
            if streak >= 2:
                ds = min(2.0 * ds, 1.0 / continuation_steps)
                streak = 0

    if buffer_width is None:
        buffer_width = default_buffer_width(M, q)
    window = LatticeWindow(B, right_closure=closure, buffer_width=buffer_width, couplings=c)
    if not window.is_physical:
        raise NonphysicalSolutionError("converged window has non-positive entries")
    return window
