import pytest

from shocklab import CouplingVector, InvalidInputError


def test_rescaled_view():
    c = CouplingVector({2: 0.5, 4: -0.01, 6: 2e-4}, scale_N=10)
    assert c.T(2) == 0.5
    assert c.T(4) == pytest.approx(-0.1)
    assert c.T(6) == pytest.approx(0.02)
    assert c.rescaled() == {2: 0.5, 4: pytest.approx(-0.1), 6: pytest.approx(0.02)}


def test_from_rescaled_round_trip():
    T = {2: 0.1, 4: -0.3, 6: -0.008}
    c = CouplingVector.from_rescaled(T, 200)
    for idx, val in T.items():
        assert c.T(idx) == pytest.approx(val, rel=1e-15)


def test_missing_entries_are_zero():
    c = CouplingVector({4: -0.1}, 50)
    assert c.t(2) == 0.0
    assert c.t(8) == 0.0
    assert c.max_j == 2


@pytest.mark.parametrize("bad", [{3: 0.1}, {0: 0.1}, {-2: 0.1}])
def test_odd_or_nonpositive_indices_rejected(bad):
    with pytest.raises(InvalidInputError):
        CouplingVector(bad, 10)


def test_scale_must_be_positive_integer():
    with pytest.raises(InvalidInputError):
        CouplingVector({}, 0)


def test_convergence_warning_tracks_top_sign():
    assert not CouplingVector({4: -0.1}, 10).convergence_warning
    assert CouplingVector({4: 0.1}, 10).convergence_warning
    assert CouplingVector({4: 0.1, 6: -0.2}, 10).convergence_warning is False
    assert not CouplingVector({}, 10).convergence_warning
    # zero-valued top entry does not count
    assert CouplingVector({2: 0.3, 6: 0.0}, 10).top_index == 2


def test_scaled_and_increment():
    c = CouplingVector({4: -0.2}, 30)
    assert c.scaled(0.5).t(4) == pytest.approx(-0.1)
    c2 = c.with_increment(6, 1e-3)
    assert c2.t(6) == pytest.approx(1e-3)
    assert c2.t(4) == pytest.approx(-0.2)
    assert c.t(6) == 0.0  # original untouched


def test_entries_are_read_only():
    c = CouplingVector({4: -0.2}, 30)
    with pytest.raises(TypeError):
        c.entries[4] = 1.0
