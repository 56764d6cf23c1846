"""Independent ground truth from the eigenvalue-integral weight.

Everything here is computed directly from the even weight

    w(lam) = exp(-lam^2/2 + sum_j t_{2j} lam^(2j))

via adaptive composite Gauss-Legendre quadrature: moments m_k, tau values as
Hankel determinants of the moments (small n only; the determinants are
exponentially ill-conditioned), and the production route - three-term
recurrence coefficients of the orthogonal polynomials for w obtained by a
discretized Stieltjes/Lanczos procedure with full reorthogonalization.
The two routes cross-check each other; disagreement flags quadrature bugs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hankel as _hankel_matrix

from .couplings import CouplingVector
from .errors import (InadmissibleWeightError, InvalidInputError, OutOfRangeError,
                     PrecisionError, QuadratureFailureError)

#: default truncation radius for the free (Gaussian) weight
GAUSSIAN_RADIUS = 14.0

#: relative tail mass threshold fixing the truncation radius
_TAIL_LOG = math.log(1e-30)

_GL_ORDER = 48
_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


@dataclass(frozen=True)
class WeightSpec:
    """Even weight exp(-lam^2/2 + sum_j t_{2j} lam^(2j)); must be integrable."""

    couplings: CouplingVector

    def __post_init__(self):
        top = self.couplings.top_index
        if top != 0 and self.couplings.entries[top] >= 0.0:
            raise InadmissibleWeightError(
                f"top nonzero coupling t_{top} must be negative for an integrable weight")

    def log_weight(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = -0.5 * lam * lam
        for idx, val in self.couplings.entries.items():
            if val != 0.0:
                out = out + val * lam ** idx
        return out

    def weight(self, lam):
        return np.exp(self.log_weight(lam))

    def radius(self) -> float:
        """Truncation radius R with w(R)/max(w) below 1e-30."""
        if self.couplings.is_zero:
            return GAUSSIAN_RADIUS
        # move past every bump of the log-weight first
        dcoeffs = np.zeros(max(self.couplings.indices) )
        dcoeffs[1] = -1.0  # derivative of -lam^2/2
        for idx, val in self.couplings.entries.items():
            dcoeffs[idx - 1] += idx * val
        roots = np.roots(dcoeffs[::-1])
        real = [abs(r.real) for r in roots if abs(r.imag) < 1e-9]
        R = max(4.0, 1.05 * max(real, default=0.0))
        for _ in range(200):
            grid = np.linspace(0.0, R, 4097)
            logs = self.log_weight(grid)
            if logs[-1] - float(np.max(logs)) < _TAIL_LOG:
                return R
            R *= 1.2
        raise QuadratureFailureError("could not find a truncation radius")


def _gl_rule(order: int):
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _half_grid(R: float, panels: int, order: int = _GL_ORDER):
    """Composite Gauss-Legendre nodes/weights on [0, R]."""
    xg, wg = _gl_rule(order)
    edges = np.linspace(0.0, R, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wts = (half[:, None] * wg[None, :]).ravel()
    return nodes, wts


def _even_moments(w: WeightSpec, nodes, wts, max_order: int) -> np.ndarray:
    f = np.exp(w.log_weight(nodes)) * wts
    n_even = max_order // 2 + 1
    out = np.empty(n_even)
    power = np.ones_like(nodes)
    sq = nodes * nodes
    for i in range(n_even):
        out[i] = 2.0 * float(np.dot(power, f))
        power = power * sq
    return out


def _converged_grid(w: WeightSpec, max_order: int):
    """Refine panel count until all requested moments settle to 1e-13."""
    R = w.radius()
    panels = 8
    prev = None
    for _ in range(20):
        nodes, wts = _half_grid(R, panels)
        vals = _even_moments(w, nodes, wts, max_order)
        if prev is not None:
            scale = np.maximum(np.abs(vals), 1e-300)
            if float(np.max(np.abs(vals - prev) / scale)) < 1e-13:
                return nodes, wts, vals, {"radius": R, "panels": panels}
        prev = vals
        panels *= 2
    raise QuadratureFailureError(
        f"moment refinement did not converge within 20 doublings (R={R})")


def moments(w: WeightSpec, max_order: int) -> np.ndarray:
    """Moments m_0..m_max_order; odd entries are exactly zero by symmetry."""
    if max_order < 0:
        raise InvalidInputError("max_order must be non-negative")
    _, _, even, _ = _converged_grid(w, max_order)
    out = np.zeros(max_order + 1)
    out[::2] = even
    return out


def hankel_tau(moment_array, n: int) -> float:
    """tau_n as the n x n Hankel determinant det(m_{i+j}); tau_0 = 1.

    Precision collapses with n (the determinants are exponentially
    ill-conditioned); capped at n <= 30 in double precision.
    """
    if n < 0 or n > 30:
        raise OutOfRangeError(f"hankel route supports 0 <= n <= 30, got {n}")
    if n == 0:
        return 1.0
    m = np.asarray(moment_array, dtype=float)
    if len(m) < 2 * n - 1:
        raise InvalidInputError(f"need moments up to order {2 * n - 2}, got {len(m) - 1}")
    H = _hankel_matrix(m[:n], m[n - 1:2 * n - 1])
    sign, logdet = np.linalg.slogdet(H)
    if sign <= 0.0:
        raise PrecisionError(
            f"Hankel determinant lost positivity at n={n}; use the stieltjes route")
    tau = math.exp(logdet) if logdet < 709.0 else math.inf
    if math.isinf(tau):
        raise PrecisionError(f"tau_{n} overflows double precision; use log_tau")
    return tau


@dataclass(frozen=True)
class OracleResult:
    """Moments, tau values, and recurrence coefficients from one route."""

    moments: np.ndarray          # m_0 .. m_{2 n_max}
    tau: np.ndarray              # tau_0 .. tau_{n_max+1} (inf if overflowing)
    log_tau: np.ndarray          # log tau, always finite in range
    B: np.ndarray                # B_1 .. B_{n_max}
    method: str                  # "hankel" | "stieltjes"
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        if np.any(self.B <= 0.0):
            raise PrecisionError(f"{self.method} route lost positivity of B")
        finite = self.tau[np.isfinite(self.tau)]
        if np.any(finite <= 0.0):
            raise PrecisionError(f"{self.method} route produced non-positive tau")
        if np.any(self.moments[1::2] != 0.0):
            raise PrecisionError("odd moments must vanish for an even weight")


def _lanczos_jacobi(nodes: np.ndarray, weights: np.ndarray, n_max: int):
    """Jacobi-matrix coefficients of the discrete measure sum w_i delta(x_i).

    Lanczos on diag(nodes) with starting vector sqrt(weights), fully
    reorthogonalized.  Returns (alphas, betas) with len(betas) = n_max;
    B_k = betas[k-1]^2.
    """
    npts = len(nodes)
    if n_max >= npts:
        raise InvalidInputError("quadrature grid too small for requested order")
    Q = np.empty((npts, n_max + 1))
    v = np.sqrt(weights)
    v = v / np.linalg.norm(v)
    Q[:, 0] = v
    alphas = np.empty(n_max + 1)
    betas = np.empty(n_max)
    for j in range(n_max + 1):
        u = nodes * Q[:, j]
        alphas[j] = float(np.dot(Q[:, j], u))
        if j == n_max:
            break
        r = u - alphas[j] * Q[:, j]
        if j > 0:
            r -= betas[j - 1] * Q[:, j - 1]
        # full reorthogonalization, twice
        r -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ r)
        r -= Q[:, :j + 1] @ (Q[:, :j + 1].T @ r)
        beta = float(np.linalg.norm(r))
        if beta <= 0.0 or not math.isfinite(beta):
            raise PrecisionError(f"Lanczos breakdown at step {j + 1}")
        betas[j] = beta
        Q[:, j + 1] = r / beta
    return alphas, betas


def stieltjes_recurrence(w: WeightSpec, n_max: int) -> OracleResult:
    """Recurrence coefficients B_1..B_n_max of the weight's orthogonal polynomials.

    The weight is discretized on the converged quadrature grid and the Jacobi
    matrix is recovered by fully reorthogonalized Lanczos; tau values follow
    from the stable norm-product formula tau_n = prod_{k<n} h_k with
    h_0 = m_0 and h_k = h_{k-1} B_k.

    Parameters
    ----------
    w : WeightSpec
        Admissible even weight.
    n_max : int
        Number of recurrence coefficients requested (n_max <= 30 recommended;
        tau overflows double precision near n ~ 30).
    """
    if n_max < 1:
        raise InvalidInputError("n_max must be >= 1")
    half_nodes, half_wts, even, report = _converged_grid(w, 2 * n_max + 2)
    nodes = np.concatenate([-half_nodes[::-1], half_nodes])
    wts = np.concatenate([half_wts[::-1], half_wts])
    disc = wts * np.exp(w.log_weight(nodes))
    _, betas = _lanczos_jacobi(nodes, disc, n_max)
    B = betas**2

    m = np.zeros(2 * n_max + 1)
    m[::2] = even[: n_max + 1]

    log_h = np.empty(n_max + 1)
    log_h[0] = math.log(m[0])
    log_h[1:] = log_h[0] + np.cumsum(np.log(B))
    log_tau = np.zeros(n_max + 2)
    log_tau[1:] = np.cumsum(log_h)
    with np.errstate(over="ignore"):
        tau = np.exp(log_tau)
    return OracleResult(moments=m, tau=tau, log_tau=log_tau, B=B,
                        method="stieltjes", report=report)


def hankel_result(w: WeightSpec, n_max: int) -> OracleResult:
    """Small-n cross-check route: tau and B from Hankel determinants."""
    if n_max < 1:
        raise InvalidInputError("n_max must be >= 1")
    if n_max > 29:
        raise OutOfRangeError("hankel route supports n_max <= 29")
    m = moments(w, 2 * n_max)
    log_tau = np.zeros(n_max + 2)
    for n in range(1, n_max + 2):
        H = _hankel_matrix(m[:n], m[n - 1:2 * n - 1])
        sign, logdet = np.linalg.slogdet(H)
        if sign <= 0.0:
            raise PrecisionError(
                f"Hankel determinant lost positivity at n={n}; use the stieltjes route")
        log_tau[n] = logdet
    with np.errstate(over="ignore"):
        tau = np.exp(log_tau)
    B = np.exp(log_tau[2:] + log_tau[:-2] - 2.0 * log_tau[1:-1])
    return OracleResult(moments=m, tau=tau, log_tau=log_tau, B=B,
                        method="hankel", report={})


def gaussian_tau(n: int) -> float:
    """Closed-form free-model value tau_n(0) = (2 pi)^(n/2) prod_{j<n} j!."""
    out = (2.0 * math.pi) ** (n / 2.0)
    for j in range(1, n):
        out *= math.factorial(j)
    return out
