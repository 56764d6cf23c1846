import numpy as np
import pytest

from shocklab import (CouplingVector, InvalidInputError, InvalidProbeError,
                      NoBranchError, OrderParameterTrace, compare,
                      convergence_study, detect_oscillations, order_parameter,
                      solve_string)


def make_trace(u, N=100):
    u = np.asarray(u, dtype=float)
    x = np.arange(1, len(u) + 1) / N
    return OrderParameterTrace(N=N, x=x, u=u)


class TestDetector:
    def test_monotone_samples_are_quiet(self):
        trace = make_trace(np.linspace(0.1, 2.0, 60))
        scan = detect_oscillations(trace, window=12, amp_tol=1e-3)
        assert not scan.flag
        assert scan.onset_x is None
        assert scan.maxima == () and scan.minima == ()

    def test_oscillatory_tail_is_flagged(self):
        x = np.arange(1, 81) / 100
        u = x.copy()
        u[40:] += 0.05 * np.sin(np.arange(40) * 2.0)
        scan = detect_oscillations(make_trace(u), window=12, amp_tol=1e-3)
        assert scan.flag
        assert 0.3 < scan.onset_x < 0.45

    def test_amplitude_threshold_filters_ripples(self):
        x = np.arange(1, 81) / 100
        u = x + 1e-6 * np.sin(np.arange(80) * 2.0)
        scan = detect_oscillations(make_trace(u), window=12, amp_tol=1e-3)
        assert not scan.flag

    def test_single_extremum_not_flagged(self):
        u = np.concatenate([np.linspace(0, 1, 30), np.linspace(1, 0.2, 30)[1:]])
        scan = detect_oscillations(make_trace(u), window=12, amp_tol=1e-3)
        assert not scan.flag
        assert len(scan.maxima) == 1

    def test_envelope_extrema_are_genuine(self, rng):
        u = np.cumsum(rng.normal(0, 1e-2, 120)) + np.linspace(0, 1, 120)
        trace = make_trace(u)
        scan = detect_oscillations(trace, window=12, amp_tol=1e-4)
        for x_e, u_e in scan.maxima:
            i = int(round(x_e * trace.N)) - 1
            assert u[i] == u_e
            assert u[i] > u[i - 1] and u[i] > u[i + 1]
        for x_e, u_e in scan.minima:
            i = int(round(x_e * trace.N)) - 1
            assert u[i] < u[i - 1] and u[i] < u[i + 1]

    def test_minimum_sample_count(self):
        with pytest.raises(InvalidInputError):
            detect_oscillations(make_trace(np.linspace(0, 1, 10)), window=12)

    def test_no_false_positive_at_zero_coupling(self):
        for N in (50, 200):
            win = solve_string(CouplingVector({}, N), N)
            trace = order_parameter(win, N)
            scan = detect_oscillations(trace, window=12, amp_tol=1e-10)
            assert not scan.flag


class TestCompare:
    def test_free_model_deviation_vanishes(self):
        c = CouplingVector({}, 100)
        win = solve_string(c, 60)
        rep = compare(order_parameter(win, 100), c)
        assert np.nanmax(np.abs(rep.deviation)) < 1e-12
        assert not rep.oscillating

    def test_no_accessible_branch_raises(self):
        # T2 = 1 sends the only branch to u = -x < 0
        c = CouplingVector.from_rescaled({2: 1.0}, 100)
        trace = make_trace(np.linspace(0.1, 0.5, 40))
        with pytest.raises(NoBranchError):
            compare(trace, c)

    def test_determinism(self):
        c = CouplingVector.from_rescaled({2: 0.0, 4: 0.1, 6: -0.01}, 100)
        win = solve_string(c, 50)
        trace = order_parameter(win, 100)
        r1 = compare(trace, c)
        r2 = compare(trace, c)
        assert np.array_equal(r1.deviation, r2.deviation)
        assert np.array_equal(r1.branches, r2.branches, equal_nan=True)
        assert r1.smooth_max_deviation == r2.smooth_max_deviation

    def test_branch_columns_in_multivalued_region(self):
        c = CouplingVector.from_rescaled({2: 1.0, 4: -0.25, 6: -0.25}, 100)
        win = solve_string(c, 50)
        rep = compare(order_parameter(win, 100), c)
        inside = rep.x < 0.2
        assert np.all(np.isfinite(rep.branches[inside]))
        # the tracked branch is the single accessible one
        assert np.all(rep.u_continuum[inside] >= 0)


class TestConvergence:
    def test_free_model_round_off(self):
        st = convergence_study(CouplingVector({}, 100), [50, 100], 0.2)
        assert all(dev < 1e-13 for _, _, dev in st.rows)

    def test_smooth_regime_monotone_decay(self):
        c = CouplingVector.from_rescaled({2: 0.0, 4: 0.1, 6: -0.01}, 200)
        st = convergence_study(c, [50, 100, 200], 0.2)
        devs = [dev for _, _, dev in st.rows]
        assert devs[0] > devs[1] > devs[2]
        assert st.order > 1.5

    def test_probe_in_multivalued_region_rejected(self):
        c = CouplingVector.from_rescaled({2: 1.0, 4: -0.25, 6: -0.25}, 100)
        with pytest.raises(InvalidProbeError):
            convergence_study(c, [50, 100], 0.1)

    def test_probe_at_critical_point_rejected(self):
        c = CouplingVector.from_rescaled({2: 0.0, 4: 0.1, 6: -0.008}, 100)
        with pytest.raises(InvalidProbeError):
            convergence_study(c, [50, 100], 5.0 / 18.0)
