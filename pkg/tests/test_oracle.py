import math

import numpy as np
import pytest

from shocklab import (CouplingVector, InadmissibleWeightError, LatticeWindow,
                      OutOfRangeError, WeightSpec, gaussian_tau,
                      hankel_result, hankel_tau, moments, stieltjes_recurrence,
                      string_residual)
from shocklab.oracle import _converged_grid, _even_moments, _half_grid

SQRT_2PI = math.sqrt(2.0 * math.pi)


def gaussian():
    return WeightSpec(CouplingVector({}, 100))


class TestWeight:
    def test_gaussian_radius(self):
        assert gaussian().radius() == 14.0

    def test_inadmissible_top_coupling(self):
        with pytest.raises(InadmissibleWeightError):
            WeightSpec(CouplingVector({4: 0.01}, 100))

    def test_negative_top_dominates(self):
        w = WeightSpec(CouplingVector({2: 0.8, 6: -1e-3}, 100))
        R = w.radius()
        grid = np.linspace(0.0, R, 2001)
        logs = w.log_weight(grid)
        assert logs[-1] - logs.max() < math.log(1e-30)


class TestMoments:
    def test_gaussian_values(self):
        m = moments(gaussian(), 6)
        assert m[0] == pytest.approx(SQRT_2PI, rel=1e-13)
        assert m[2] == pytest.approx(SQRT_2PI, rel=1e-13)
        assert m[4] == pytest.approx(3.0 * SQRT_2PI, rel=1e-13)
        assert m[6] == pytest.approx(15.0 * SQRT_2PI, rel=1e-13)

    def test_odd_moments_exactly_zero(self):
        m = moments(WeightSpec(CouplingVector({4: -0.01}, 100)), 9)
        assert np.all(m[1::2] == 0.0)

    def test_two_resolution_agreement(self):
        # doubling the converged panel count moves m_0 by less than 1e-12
        w = WeightSpec(CouplingVector({4: -0.01}, 100))
        nodes, wts, even, report = _converged_grid(w, 8)
        nodes2, wts2 = _half_grid(w.radius(), 2 * report["panels"])
        even2 = _even_moments(w, nodes2, wts2, 8)
        assert abs(even2[0] - even[0]) / even[0] < 1e-12


class TestHankel:
    def test_empty_determinant(self):
        assert hankel_tau(np.zeros(1), 0) == 1.0

    def test_gaussian_small_orders(self):
        m = moments(gaussian(), 10)
        assert hankel_tau(m, 1) == pytest.approx(SQRT_2PI, rel=1e-13)
        assert hankel_tau(m, 2) == pytest.approx(2.0 * math.pi, rel=1e-13)

    def test_order_cap(self):
        with pytest.raises(OutOfRangeError):
            hankel_tau(np.ones(80), 31)

    def test_insufficient_moments(self):
        from shocklab import InvalidInputError
        with pytest.raises(InvalidInputError):
            hankel_tau(np.ones(3), 5)

    def test_closed_form_free_model(self):
        res = hankel_result(gaussian(), 12)
        for n in range(1, 13):
            assert res.tau[n] == pytest.approx(gaussian_tau(n), rel=1e-9)


class TestStieltjes:
    def test_free_model_recurrence(self):
        res = stieltjes_recurrence(gaussian(), 20)
        assert np.max(np.abs(res.B - np.arange(1, 21))) < 1e-10

    def test_free_model_tau_closed_form(self):
        res = stieltjes_recurrence(gaussian(), 16)
        for n in range(1, 16):
            assert res.tau[n] == pytest.approx(gaussian_tau(n), rel=1e-10)

    def test_first_coefficient_is_moment_ratio(self):
        w = WeightSpec(CouplingVector({2: 0.1, 6: -2e-3}, 100))
        res = stieltjes_recurrence(w, 6)
        m = moments(w, 2)
        assert res.B[0] == pytest.approx(m[2] / m[0], rel=1e-12)

    def test_quartic_satisfies_string_equation(self):
        # the central correctness triangle, oracle side: recurrence data from
        # quadrature solves the site-wise string equation
        c = CouplingVector({4: -0.01}, 50)
        res = stieltjes_recurrence(WeightSpec(c), 24)
        win = LatticeWindow(res.B, right_closure="zero", buffer_width=0, couplings=c)
        r = string_residual(win, c)
        assert np.max(np.abs(r[:20])) < 1e-8

    def test_route_agreement(self):
        w = WeightSpec(CouplingVector({4: -0.01}, 100))
        st = stieltjes_recurrence(w, 12)
        hk = hankel_result(w, 12)
        rel = np.abs(st.B - hk.B) / st.B
        assert np.max(rel) < 1e-8

    def test_sextic_weight_matches_string_solver(self):
        # oracle equivalence at q = 3: quadrature recurrence data vs Newton
        from shocklab import solve_string
        c = CouplingVector({2: 0.02, 6: -1e-3}, 40)
        res = stieltjes_recurrence(WeightSpec(c), 20)
        win = solve_string(c, 40)
        rel = np.abs(res.B - win.B[:20]) / res.B
        assert np.max(rel) < 1e-6

    def test_positivity(self):
        res = stieltjes_recurrence(WeightSpec(CouplingVector({6: -1e-3}, 100)), 15)
        assert np.all(res.B > 0)
        assert np.all(res.tau[np.isfinite(res.tau)] > 0)

    def test_reflection_invariance(self):
        # mirrored quadrature grid gives the same coefficients
        from shocklab.oracle import _lanczos_jacobi
        w = WeightSpec(CouplingVector({4: -0.01}, 100))
        half_nodes, half_wts, _, _ = _converged_grid(w, 22)
        nodes = np.concatenate([-half_nodes[::-1], half_nodes])
        wts = np.concatenate([half_wts[::-1], half_wts])
        disc = wts * np.exp(w.log_weight(nodes))
        _, b1 = _lanczos_jacobi(nodes, disc, 10)
        _, b2 = _lanczos_jacobi(-nodes[::-1], disc[::-1], 10)
        assert np.max(np.abs(b1**2 - b2**2) / b1**2) < 1e-10

    def test_log_tau_always_finite(self):
        res = stieltjes_recurrence(gaussian(), 30)
        assert np.all(np.isfinite(res.log_tau))
