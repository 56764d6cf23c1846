import numpy as np
import pytest

from shocklab import (BlowUpError, CouplingVector, FlowLeg, InstabilityError,
                      InvalidInputError, LatticeWindow, LaxMatrix, flow_rhs,
                      integrate_flow, matrix_flow_rhs, solve_string,
                      spectrum_drift, string_residual)

from conftest import dense_lax


def commutator_oracle(B, k):
    """Dense-matrix oracle for the lattice right-hand side."""
    b = np.sqrt(B)
    L = dense_lax(b)
    P = np.linalg.matrix_power(L, 2 * k)
    S = 0.5 * (np.triu(P, 1) - np.triu(P, 1).T)
    dL = S @ L - L @ S
    return 2.0 * b * np.diagonal(dL, 1)


class TestLatticeRhs:
    def test_direct_evaluation(self):
        w = LatticeWindow(np.array([1.0, 2.0, 3.0]), right_closure="zero")
        rhs = flow_rhs(w, 1)
        assert rhs[1] == 2.0 * (3.0 - 1.0)

    def test_constant_profile_interior_is_stationary(self):
        w = LatticeWindow(np.full(30, 2.5), right_closure="extrapolate")
        for k in (1, 2, 3):
            rhs = flow_rhs(w, k)
            assert np.max(np.abs(rhs[k:-k])) < 1e-12

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_matches_commutator_oracle(self, rng, k):
        B = rng.uniform(0.5, 3.0, 20)
        w = LatticeWindow(B, right_closure="zero", buffer_width=0)
        b = np.sqrt(B)
        lat = flow_rhs(w, k)
        mat = commutator_oracle(B, k)
        scale = np.max(np.abs(mat)) + 1.0
        assert np.max(np.abs(lat - mat)) / scale < 1e-10


class TestMatrixRhs:
    def test_single_site_vanishes(self):
        L = LaxMatrix(np.array([1.0]))
        assert np.abs(matrix_flow_rhs(L, 1)).max() == 0.0

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_lax_form_preserved(self, rng, k):
        L = LaxMatrix(rng.uniform(0.5, 2.0, 19))
        R = matrix_flow_rhs(L, k)
        assert np.abs(np.diagonal(R)).max() < 1e-12
        beyond = R - np.diag(np.diagonal(R, 1), 1) - np.diag(np.diagonal(R, -1), -1)
        assert np.abs(beyond).max() < 1e-12

    def test_chain_rule_against_lattice(self, rng):
        B = rng.uniform(0.5, 3.0, 24)
        b = np.sqrt(B)
        w = LatticeWindow(B, right_closure="zero", buffer_width=0)
        for k in (1, 2):
            db = np.diagonal(matrix_flow_rhs(LaxMatrix(b), k), 1)
            dB = flow_rhs(w, k)
            assert np.max(np.abs(dB - 2.0 * b * db)) < 1e-10

    def test_dimension_cap(self):
        with pytest.raises(InvalidInputError):
            matrix_flow_rhs(LaxMatrix(np.ones(220)), 1)


class TestIntegrateFlow:
    def test_empty_schedule_is_identity(self):
        start = LatticeWindow(np.arange(1, 21.0), couplings=CouplingVector({}, 20))
        res = integrate_flow(start, [])
        assert np.array_equal(res.window.B, start.B)
        assert res.steps == 0

    def test_noop_leg(self):
        start = LatticeWindow(np.arange(1, 21.0), couplings=CouplingVector({}, 20))
        res = integrate_flow(start, [FlowLeg(k=2, target=0.0)])
        assert np.array_equal(res.window.B, start.B)

    def test_quartic_leg_matches_string_solution(self):
        # T_4 = -0.01 at N = 50 from free initial data
        N = 50
        start = LatticeWindow(np.arange(1, 41.0), right_closure="clamp",
                              couplings=CouplingVector({}, N))
        res = integrate_flow(start, [FlowLeg(k=2, target=-0.01 / N)])
        ref = solve_string(CouplingVector({4: -0.01 / N}, N), 40)
        rep = slice(0, 40 - ref.buffer_width)
        rel = np.abs(res.window.B[rep] - ref.B[rep]) / ref.B[rep]
        assert np.max(rel) < 1e-6

    def test_couplings_ride_along(self):
        start = LatticeWindow(np.arange(1, 31.0), right_closure="clamp",
                              couplings=CouplingVector({}, 30))
        res = integrate_flow(start, [FlowLeg(k=2, target=-1e-4),
                                     FlowLeg(k=3, target=-1e-6)])
        assert res.window.couplings.t(4) == pytest.approx(-1e-4)
        assert res.window.couplings.t(6) == pytest.approx(-1e-6)

    def test_commutativity_small_targets(self):
        N = 50
        t4, t6 = -0.01 / N, -0.002 / N**2
        start = LatticeWindow(np.arange(1, 61.0), right_closure="clamp",
                              couplings=CouplingVector({}, N))
        a = integrate_flow(start, [FlowLeg(2, t4, h=abs(t4) / 400),
                                   FlowLeg(3, t6, h=abs(t6) / 400)])
        b = integrate_flow(start, [FlowLeg(3, t6, h=abs(t6) / 400),
                                   FlowLeg(2, t4, h=abs(t4) / 400)])
        diff = np.abs(a.window.B - b.window.B)
        assert np.max(diff[:40]) < 5e-8

    def test_blow_up_reports_time(self):
        # one absurdly large backward step drives an entry negative
        start = LatticeWindow(np.arange(1, 21.0), right_closure="zero",
                              couplings=CouplingVector({}, 20))
        with pytest.raises(BlowUpError) as err:
            integrate_flow(start, [FlowLeg(k=1, target=-0.5, h=0.5)])
        assert err.value.time is not None

    def test_growth_guard(self):
        # oversized steps on a growing flow trip one of the guards
        start = LatticeWindow(np.arange(1, 61.0), right_closure="extrapolate",
                              couplings=CouplingVector({}, 60))
        with pytest.raises((InstabilityError, BlowUpError)):
            integrate_flow(start, [FlowLeg(k=2, target=0.05, h=0.01)])

    def test_string_equation_invariance_quick(self):
        # flowing a string solution moves it to the string solution at the
        # shifted couplings
        N = 30
        c0 = CouplingVector({4: -4e-3}, N)
        base = solve_string(c0, 40)
        dt = -1e-3 / N**2
        res = integrate_flow(base, [FlowLeg(k=3, target=dt, h=abs(dt) / 300)])
        r = string_residual(res.window, res.window.couplings)
        assert np.max(np.abs(r[:20])) < 1e-8


class TestSpectrum:
    def test_single_snapshot(self):
        assert spectrum_drift([LaxMatrix(np.ones(10))]) == 0.0

    def test_compact_perturbation_drift(self):
        B0 = np.ones(59)
        B0[25:34] += 0.2
        start = LatticeWindow(B0, right_closure="zero",
                              couplings=CouplingVector({}, 60))
        res = integrate_flow(start, [FlowLeg(k=1, target=0.1, h=1e-3, mode="matrix")],
                             snapshot_stride=20)
        assert len(res.snapshots) > 2
        assert spectrum_drift(res.snapshots) < 1e-8

    def test_fourth_order_convergence(self):
        B0 = np.ones(39)
        B0[15:24] += 0.3
        def endpoint(h):
            start = LatticeWindow(B0, right_closure="zero",
                                  couplings=CouplingVector({}, 40))
            res = integrate_flow(start, [FlowLeg(k=1, target=0.5, h=h, mode="matrix")])
            return res.window.B
        e1 = np.max(np.abs(endpoint(4e-2) - endpoint(2e-2)))
        e2 = np.max(np.abs(endpoint(2e-2) - endpoint(1e-2)))
        assert np.log2(e1 / e2) > 3.5

    def test_matrix_and_lattice_legs_agree(self):
        B0 = np.ones(49)
        B0[20:29] += 0.25
        leg_args = dict(k=1, target=0.2, h=1e-3)
        lat = integrate_flow(
            LatticeWindow(B0, right_closure="zero", couplings=CouplingVector({}, 50)),
            [FlowLeg(mode="lattice", **leg_args)])
        mat = integrate_flow(
            LatticeWindow(B0, right_closure="zero", couplings=CouplingVector({}, 50)),
            [FlowLeg(mode="matrix", **leg_args)])
        assert np.max(np.abs(lat.window.B - mat.window.B)) < 1e-10
