"""Continuum equation of state, free energy, and phase classification.

The leading-order continuum limit of the string equation is the polynomial
relation

    Omega(u) = -x + u - sum_j 2j * chi_j * T_{2j} * u^j = 0,
    chi_j = C(2j-1, j-1),

whose real roots are the stationary points of the free-energy density

    F(u) = -x*u + u^2/2 - sum_j (2j/(j+1)) * chi_j * T_{2j} * u^(j+1).

For three couplings the cubic discriminant of Omega separates the
single-minimum phase (Delta < 0) from the coexistence phase (Delta > 0);
Delta = 0 is the critical set.  Physical states have u >= 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .couplings import CouplingVector
from .errors import InvalidInputError, InvalidProbeError, MultivaluedRegionError

#: tie tolerance on the discriminant sign used for phase labels
DELTA_TIE_TOL = 1e-12

#: curvature tolerance separating minima/maxima from inflections
_CURVATURE_TOL = 1e-9


def chi(j: int) -> int:
    """Combinatorial weight C(2j-1, j-1): 1, 3, 10, 35, ..."""
    return math.comb(2 * j - 1, j - 1)


@dataclass(frozen=True)
class EquationOfState:
    """Polynomial Omega(u) at a fixed point x of the continuum axis."""

    x: float
    rescaled: dict[int, float]
    coeffs: np.ndarray  # ascending powers; coeffs[0] = -x

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def omega(self, u):
        return np.polynomial.polynomial.polyval(u, self.coeffs)

    def domega(self, u):
        return np.polynomial.polynomial.polyval(u, np.polynomial.polynomial.polyder(self.coeffs))


def eos_coefficients(c: CouplingVector, x: float) -> EquationOfState:
    """Coefficients of Omega(u) = -x + (1 - 2 T_2) u - 12 T_4 u^2 - 60 T_6 u^3 - ...

    The u^j coefficient for j >= 2 is -2j * chi_j * T_{2j}; higher couplings
    extend the same pattern.
    """
    T = c.rescaled()
    q = max(c.max_j, 1)
    coeffs = np.zeros(q + 1)
    coeffs[0] = -x
    coeffs[1] = 1.0
    for idx, val in T.items():
        j = idx // 2
        coeffs[j] -= 2 * j * chi(j) * val
    return EquationOfState(x=float(x), rescaled=T, coeffs=coeffs)


@dataclass(frozen=True)
class Root:
    u: float
    accessible: bool       # u >= 0
    kind: str              # "local-min" | "local-max" | "inflection"
    multiplicity: int = 1


@dataclass(frozen=True)
class RootSet:
    roots: tuple[Root, ...]  # ascending in u

    def __len__(self):
        return len(self.roots)

    def __iter__(self):
        return iter(self.roots)

    @property
    def values(self) -> np.ndarray:
        return np.array([r.u for r in self.roots])

    @property
    def accessible(self) -> tuple[Root, ...]:
        return tuple(r for r in self.roots if r.accessible)

    @property
    def accessible_minima(self) -> tuple[Root, ...]:
        return tuple(r for r in self.roots if r.accessible and r.kind == "local-min")


class Discriminant(float):
    """Cubic discriminant value; ``degenerate`` marks a sub-cubic fallback."""

    degenerate = False

    def __new__(cls, value, degenerate=False):
        obj = super().__new__(cls, value)
        obj.degenerate = degenerate
        return obj


def discriminant(x: float, t2: float, t4: float, t6: float) -> Discriminant:
    """Discriminant of the cubic Omega for rescaled couplings (T2, T4, T6).

    Falls back to the quadratic discriminant (flagged degenerate) when the
    cubic coefficient vanishes.
    """
    a = -60.0 * t6
    b = -12.0 * t4
    cc = 1.0 - 2.0 * t2
    d = -x
    if a == 0.0:
        return Discriminant(cc * cc - 4.0 * b * d, degenerate=True)
    val = (18.0 * a * b * cc * d - 4.0 * b**3 * d + b * b * cc * cc
           - 4.0 * a * cc**3 - 27.0 * a * a * d * d)
    return Discriminant(val)


def _label(eos: EquationOfState, u: float, scale: float) -> str:
    curv = eos.domega(u)
    if curv > _CURVATURE_TOL * scale:
        return "local-min"
    if curv < -_CURVATURE_TOL * scale:
        return "local-max"
    return "inflection"


def _polish(eos: EquationOfState, u: float, steps: int = 3) -> float:
    """A few guarded Newton corrections; keeps the best |Omega| seen."""
    best, best_val = u, abs(eos.omega(u))
    for _ in range(steps):
        d = eos.domega(u)
        if d == 0.0:
            break
        u = u - eos.omega(u) / d
        val = abs(eos.omega(u))
        if val < best_val:
            best, best_val = u, val
    return best


def _cubic_roots(coeffs: np.ndarray) -> list[tuple[float, int]]:
    """Real roots of a cubic with multiplicities, by closed form.

    Near-degenerate cases (|Delta| below the tie tolerance) are resolved
    through the derivative: a double root of Omega is a simple root of
    Omega', which the quadratic formula pins to machine precision.
    """
    d, cc, b, a = (float(v) for v in coeffs)
    scale = max(abs(a), abs(b), abs(cc), abs(d), 1.0)
    delta = (18.0 * a * b * cc * d - 4.0 * b**3 * d + b * b * cc * cc
             - 4.0 * a * cc**3 - 27.0 * a * a * d * d)
    # normalized tie test: Delta is degree 4 in the coefficients
    tie = DELTA_TIE_TOL * scale**4

    if abs(delta) <= tie:
        # double (or triple) root: candidate stationary points of the cubic
        disc2 = 4.0 * b * b - 12.0 * a * cc
        if disc2 <= 1e-10 * (4.0 * b * b + 12.0 * abs(a * cc) + 1e-300):
            # triple root
            return [(-b / (3.0 * a), 3)]
        sq = math.sqrt(disc2)
        cands = [(-2.0 * b + sq) / (6.0 * a), (-2.0 * b - sq) / (6.0 * a)]
        vals = [abs(a * u**3 + b * u * u + cc * u + d) for u in cands]
        u2 = cands[int(np.argmin(vals))]
        # remaining simple root from the root sum -b/a
        u1 = -b / a - 2.0 * u2
        eos_like = EquationOfState(0.0, {}, np.array([d, cc, b, a]))
        u1 = _polish(eos_like, u1)
        if abs(u1 - u2) <= 1e-9 * max(1.0, abs(u2)):
            return [(u2, 3)]
        return sorted([(u2, 2), (u1, 1)])

    # depressed cubic t^3 + p t + q, u = t - b/(3a)
    shift = b / (3.0 * a)
    p = (3.0 * a * cc - b * b) / (3.0 * a * a)
    q = (2.0 * b**3 - 9.0 * a * b * cc + 27.0 * a * a * d) / (27.0 * a**3)
    eos_like = EquationOfState(0.0, {}, np.array([d, cc, b, a]))
    if delta > 0.0:
        # three distinct real roots (requires p < 0)
        r = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * r)
        arg = min(1.0, max(-1.0, arg))
        phi = math.acos(arg)
        roots = [r * math.cos((phi - 2.0 * math.pi * k) / 3.0) - shift for k in range(3)]
        return sorted((_polish(eos_like, u), 1) for u in roots)
    # one real root: stable Cardano
    half_q = q / 2.0
    rad = math.sqrt(half_q * half_q + (p / 3.0) ** 3)
    w = -half_q - rad if half_q >= 0 else -half_q + rad
    s = math.copysign(abs(w) ** (1.0 / 3.0), w)
    t = s + (-p / 3.0 / s if s != 0.0 else 0.0)
    return [(_polish(eos_like, t - shift), 1)]


def _sturm_isolate(coeffs: np.ndarray) -> list[float]:
    """Real roots of a degree > 3 polynomial via Sturm bracketing + bisection."""
    poly = np.polynomial.polynomial
    chain = [np.trim_zeros(coeffs, "b"), poly.polyder(coeffs)]
    while len(chain[-1]) > 1:
        rem = poly.polydiv(chain[-2], chain[-1])[1]
        rem = np.trim_zeros(rem, "b")
        if rem.size == 0:
            break
        chain.append(-rem)

    def sign_changes(x):
        vals = [poly.polyval(x, c) for c in chain]
        signs = [v for v in vals if v != 0.0]
        return sum(1 for a, b in zip(signs, signs[1:]) if (a > 0) != (b > 0))

    # Cauchy bound on root magnitudes
    lead = coeffs[-1]
    bound = 1.0 + max(abs(c / lead) for c in coeffs[:-1])
    intervals = [(-bound, bound)]
    isolated = []
    while intervals:
        lo, hi = intervals.pop()
        n = sign_changes(lo) - sign_changes(hi)
        if n == 0:
            continue
        if n == 1 or hi - lo < 1e-13 * max(1.0, abs(lo), abs(hi)):
            isolated.append((lo, hi))
            continue
        mid = 0.5 * (lo + hi)
        intervals.extend([(lo, mid), (mid, hi)])

    roots = []
    for lo, hi in isolated:
        flo = poly.polyval(lo, coeffs)
        fhi = poly.polyval(hi, coeffs)
        if flo == 0.0:
            roots.append(lo)
            continue
        if fhi == 0.0:
            roots.append(hi)
            continue
        if (flo > 0) == (fhi > 0):
            # even-multiplicity cluster; take the midpoint
            roots.append(0.5 * (lo + hi))
            continue
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            fm = poly.polyval(mid, coeffs)
            if fm == 0.0 or hi - lo < 1e-15 * max(1.0, abs(mid)):
                break
            if (fm > 0) == (flo > 0):
                lo, flo = mid, fm
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return sorted(roots)


def solve_eos(eos: EquationOfState) -> RootSet:
    """All real roots of Omega to ~1e-12, labeled by accessibility and curvature."""
    coeffs = np.asarray(eos.coeffs, dtype=float)
    trimmed = np.trim_zeros(coeffs, "b")
    if trimmed.size == 0:
        raise InvalidInputError("equation of state is identically zero")
    deg = trimmed.size - 1
    if deg == 0:
        raise InvalidInputError("equation of state has no u dependence")
    if deg == 1:
        pairs = [(-trimmed[0] / trimmed[1], 1)]
    elif deg == 2:
        a, b, cc = trimmed[2], trimmed[1], trimmed[0]
        disc = b * b - 4.0 * a * cc
        if disc < 0.0:
            pairs = []
        elif disc == 0.0:
            pairs = [(-b / (2.0 * a), 2)]
        else:
            sq = math.sqrt(disc)
            u1 = (-b - math.copysign(sq, b)) / (2.0 * a)
            u0 = cc / (a * u1) if u1 != 0.0 else -b / a
            pairs = sorted([(u0, 1), (u1, 1)])
    elif deg == 3:
        pairs = _cubic_roots(trimmed)
    else:
        # deflate exact roots at u = 0 (x = 0 makes the constant term vanish);
        # Sturm bisection midpoints would otherwise land on them
        work = trimmed
        n_zero = 0
        while work[0] == 0.0:
            work = work[1:]
            n_zero += 1
        eos_t = EquationOfState(eos.x, eos.rescaled, work)
        if len(work) > 1:
            pairs = [(_polish(eos_t, u, steps=5), 1) for u in _sturm_isolate(work)]
        else:
            pairs = []
        if n_zero:
            pairs = sorted(pairs + [(0.0, n_zero)])

    scale = max(1.0, float(np.max(np.abs(trimmed))))
    roots = []
    for u, mult in pairs:
        kind = _label(eos, u, scale) if mult == 1 else "inflection"
        roots.append(Root(u=float(u), accessible=bool(u >= 0.0), kind=kind,
                          multiplicity=mult))
    return RootSet(tuple(sorted(roots, key=lambda r: r.u)))


def free_energy(u, x: float, c: CouplingVector):
    """Free-energy density F(u); dF/du = Omega by construction."""
    u = np.asarray(u, dtype=float)
    T = c.rescaled()
    out = -x * u + 0.5 * u * u
    for idx, val in T.items():
        j = idx // 2
        out = out - (2.0 * j / (j + 1.0)) * chi(j) * val * u ** (j + 1)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    rescaled: dict[int, float]
    delta: float
    phase: str                 # "single-minimum" | "coexistence" | "critical"
    accessible_roots: int
    roots: RootSet


def classify(x: float, c: CouplingVector) -> PhasePoint:
    """Phase label at (x, T) from the discriminant sign; counts u >= 0 roots."""
    T = c.rescaled()
    q = c.max_j
    eos = eos_coefficients(c, x)
    roots = solve_eos(eos)
    if q <= 3:
        dval = float(discriminant(x, T.get(2, 0.0), T.get(4, 0.0), T.get(6, 0.0)))
    else:
        # no closed-form discriminant beyond the cubic: label from root structure
        dval = math.nan
    if q <= 3:
        if abs(dval) <= DELTA_TIE_TOL:
            phase = "critical"
        elif dval > 0:
            phase = "coexistence"
        else:
            phase = "single-minimum"
    else:
        mins = sum(1 for r in roots if r.kind == "local-min")
        if any(r.multiplicity > 1 for r in roots):
            phase = "critical"
        elif mins >= 2:
            phase = "coexistence"
        else:
            phase = "single-minimum"
    return PhasePoint(x=float(x), rescaled=T, delta=dval, phase=phase,
                      accessible_roots=len(roots.accessible), roots=roots)


def equilibrium_branch(c: CouplingVector, x: float):
    """Equilibrium order parameter: the accessible local minimum with the
    lowest free energy (ties toward smaller u); None when no accessible
    stationary point exists."""
    roots = solve_eos(eos_coefficients(c, x))
    cands = [r for r in roots.accessible if r.kind != "local-max"]
    if not cands:
        return None
    best = None
    best_F = math.inf
    for r in sorted(cands, key=lambda r: r.u):
        F = free_energy(r.u, x, c)
        if best is None or F < best_F - 1e-15 * max(1.0, abs(best_F)):
            best, best_F = r.u, F
    return best


def _bisect_edge(f, lo, hi, flo, fhi, iters=80):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return 0.5 * (lo + hi)


def critical_set(c: CouplingVector, x_range, t6_range, grid=(64, 64)):
    """Zero-level contour of the cubic discriminant in the (x, T6) plane.

    T2 and T4 are taken from ``c``; T6 is swept.  Crossings are located by
    bisection along grid edges and chained into ordered polylines.  Returns a
    list of (n_points, 2) arrays with columns (x, T6); empty when the
    discriminant does not change sign on the window.
    """
    nx, nt = int(grid[0]), int(grid[1])
    if nx < 2 or nt < 2:
        raise InvalidInputError("critical_set grid needs at least 2 points per axis")
    T = c.rescaled()
    t2, t4 = T.get(2, 0.0), T.get(4, 0.0)
    xs = np.linspace(float(x_range[0]), float(x_range[1]), nx)
    ts = np.linspace(float(t6_range[0]), float(t6_range[1]), nt)
    vals = np.empty((nx, nt))
    for i, x in enumerate(xs):
        for j, t6 in enumerate(ts):
            vals[i, j] = discriminant(x, t2, t4, t6)

    # crossing points keyed by grid edge
    crossings = {}

    def edge_point(i, j, horizontal):
        key = (i, j, horizontal)
        if key in crossings:
            return crossings[key]
        if horizontal:  # edge (i,j)-(i+1,j), varying x
            f = lambda x: float(discriminant(x, t2, t4, ts[j]))
            lo, hi, flo, fhi = xs[i], xs[i + 1], vals[i, j], vals[i + 1, j]
            x0 = _bisect_edge(f, lo, hi, flo, fhi)
            pt = (x0, ts[j])
        else:  # edge (i,j)-(i,j+1), varying T6
            f = lambda t: float(discriminant(xs[i], t2, t4, t))
            lo, hi, flo, fhi = ts[j], ts[j + 1], vals[i, j], vals[i, j + 1]
            t0 = _bisect_edge(f, lo, hi, flo, fhi)
            pt = (xs[i], t0)
        crossings[key] = pt
        return pt

    segments = []
    for i in range(nx - 1):
        for j in range(nt - 1):
            corners = [vals[i, j], vals[i + 1, j], vals[i + 1, j + 1], vals[i, j + 1]]
            # edges: bottom, left, top, right; corner pairs to match
            edges = [(i, j, True), (i, j, False), (i, j + 1, True), (i + 1, j, False)]
            crossed = []
            pairs = [(0, 1), (0, 3), (3, 2), (1, 2)]
            for e, (a, b) in zip(edges, pairs):
                if (corners[a] > 0) != (corners[b] > 0):
                    crossed.append(e)
            if len(crossed) == 2:
                segments.append((crossed[0], crossed[1]))
            elif len(crossed) == 4:
                # saddle cell: split by the center sign
                center = float(discriminant(0.5 * (xs[i] + xs[i + 1]), t2, t4,
                                            0.5 * (ts[j] + ts[j + 1])))
                if (center > 0) == (corners[0] > 0):
                    segments.append((crossed[0], crossed[3]))
                    segments.append((crossed[1], crossed[2]))
                else:
                    segments.append((crossed[0], crossed[1]))
                    segments.append((crossed[2], crossed[3]))

    # chain segments into polylines (nodes are edges, degree <= 2 generically)
    adjacency = {}
    for a, b in segments:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)
    seen = set()
    polylines = []
    for start in sorted(adjacency):
        if start in seen or len(adjacency[start]) > 1:
            continue
        chain = [start]
        seen.add(start)
        while True:
            nxt = [n for n in adjacency[chain[-1]] if n not in seen]
            if not nxt:
                break
            chain.append(nxt[0])
            seen.add(nxt[0])
        polylines.append(chain)
    for start in sorted(adjacency):  # closed loops
        if start in seen:
            continue
        chain = [start]
        seen.add(start)
        while True:
            nxt = [n for n in adjacency[chain[-1]] if n not in seen]
            if not nxt:
                break
            chain.append(nxt[0])
            seen.add(nxt[0])
        chain.append(start)
        polylines.append(chain)

    out = []
    for chain in polylines:
        pts = np.array([edge_point(*e) for e in chain])
        out.append(pts)
    return out


def catastrophe_points(c: CouplingVector) -> list[tuple[float, float]]:
    """Turning points (x, u) of the single-valued relation x(u); empty if none.

    These bound the multivalued window of the equation of state.
    """
    eos = eos_coefficients(c, 0.0)
    dcoeffs = np.polynomial.polynomial.polyder(eos.coeffs)
    roots = np.roots(dcoeffs[::-1]) if len(dcoeffs) > 1 else np.array([])
    out = []
    for r in roots:
        if abs(r.imag) < 1e-10:
            u = float(r.real)
            # built at x = 0, so Omega(u) there is exactly x(u)
            x = float(np.polynomial.polynomial.polyval(u, eos.coeffs))
            out.append((x, u))
    return sorted(out)


@dataclass(frozen=True)
class TransportCheck:
    speed_defect: float          # vs 2k * chi_k * u^k from implicit differentiation
    printed_form_defect: float   # vs best-fit C * u^(2k-1)
    fitted_constant: float


def transport_consistency(c: CouplingVector, k: int, x_grid, delta: float) -> TransportCheck:
    """Check the hydrodynamic transport of the single-valued branch.

    Finite differences of the equation-of-state solution give u_T/u_x, which is
    compared with the characteristic speed 2k*chi_k*u^k implied by implicit
    differentiation; the defect against a fitted C*u^(2k-1) law is reported
    separately.

    Precondition: the tracked branch must have u_x != 0 on the grid (a
    constant-u region has no x-independent limit here and is rejected), and no
    gradient catastrophe may fall inside the grid.
    """
    xs = np.asarray(x_grid, dtype=float)
    if xs.size < 3:
        raise InvalidInputError("x grid needs at least 3 points")
    T = c.rescaled()
    idx = 2 * k

    def nearest_root(cc, x, anchor):
        roots = solve_eos(eos_coefficients(cc, x))
        return min((r.u for r in roots), key=lambda v: abs(v - anchor))

    # continuity-tracked branch with a per-point fold guard
    u0 = np.empty(len(xs))
    prev = None
    for i, x in enumerate(xs):
        eos = eos_coefficients(c, x)
        if prev is None:
            u = equilibrium_branch(c, x)
            if u is None:
                raise InvalidProbeError(f"no accessible branch at x={x}")
        else:
            u = nearest_root(c, x, prev)
        scale = max(1.0, float(np.max(np.abs(eos.coeffs))))
        if abs(eos.domega(u)) < 1e-6 * scale:
            raise MultivaluedRegionError(f"gradient catastrophe at grid point x={x}")
        u0[i] = u
        prev = u

    # a turning point of x(u) inside the grid range that touches the tracked
    # branch invalidates the study
    steps = np.abs(np.diff(u0))
    for x_t, u_t in catastrophe_points(c):
        if not (xs[0] < x_t < xs[-1]):
            continue
        i = int(np.searchsorted(xs, x_t))
        interp = u0[i - 1] + (u0[i] - u0[i - 1]) * (x_t - xs[i - 1]) / (xs[i] - xs[i - 1])
        local = 3.0 * float(np.max(steps[max(i - 2, 0):i + 1])) if len(steps) else 0.0
        if abs(u_t - interp) <= max(local, 1e-6):
            raise MultivaluedRegionError(
                f"gradient catastrophe inside the grid at x={x_t}")

    c_plus = CouplingVector.from_rescaled({**T, idx: T.get(idx, 0.0) + delta}, c.scale_N)
    c_minus = CouplingVector.from_rescaled({**T, idx: T.get(idx, 0.0) - delta}, c.scale_N)

    u_T = np.empty(len(xs))
    u_x = np.empty(len(xs))
    for i, x in enumerate(xs):
        u_T[i] = (nearest_root(c_plus, x, u0[i]) - nearest_root(c_minus, x, u0[i])) / (2 * delta)
        u_x[i] = (nearest_root(c, x + delta, u0[i]) - nearest_root(c, x - delta, u0[i])) / (2 * delta)

    if np.min(np.abs(u_x)) < 1e-8:
        raise InvalidProbeError("u_x vanishes on the grid; transport ratio undefined")
    ratio = u_T / u_x
    speed = 2.0 * k * chi(k) * u0**k
    defect = float(np.max(np.abs(ratio - speed)))

    basis = u0 ** (2 * k - 1)
    fitted = float(np.dot(ratio, basis) / np.dot(basis, basis))
    defect2 = float(np.max(np.abs(ratio - fitted * basis)))
    return TransportCheck(speed_defect=defect, printed_form_defect=defect2,
                          fitted_constant=fitted)
