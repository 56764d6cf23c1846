import numpy as np
import pytest

from shocklab import ConfigError, get_preset, run_preset
from shocklab.presets import PRESETS


def test_registry_is_complete():
    assert set(PRESETS) == {"fig1a", "fig1b", "fig2a", "fig2b", "fig3a",
                            "fig3b", "fig3c", "fig3d", "fig4a", "fig4b"}


def test_unknown_preset():
    with pytest.raises(ConfigError):
        get_preset("fig5x")


def test_only_regime_parameters_hardcoded():
    assert get_preset("fig3b").rescaled == {2: 1.0, 4: -0.25, 6: -0.25}
    assert get_preset("fig4b").rescaled == {2: 0.25, 4: -1.0, 6: -0.5}
    assert get_preset("fig1b").rescaled == {2: 0.0, 4: 0.1, 6: -0.008}


def test_default_scale_is_overridable():
    payload = run_preset("fig4a", N=50)
    assert payload["params"]["N"] == 50
    payload = run_preset("fig4a")
    assert payload["params"]["N"] == 200


def test_fig2a_contour_passes_through_critical_point():
    payload = run_preset("fig2a")
    target = np.array([5.0 / 18.0, -0.008])
    best = min(np.min(np.linalg.norm(np.asarray(p) - target, axis=1))
               for p in payload["polylines"])
    xr = get_preset("fig2a").x_range
    tr = get_preset("fig2a").t6_range
    cell = max((xr[1] - xr[0]) / 80, (tr[1] - tr[0]) / 80)
    assert best < 2 * cell


def test_fig4a_single_positive_branch():
    payload = run_preset("fig4a")
    xs = np.asarray(payload["x"])
    acc = np.asarray(payload["accessible_counts"])
    assert np.all(acc[xs > 1e-9] == 1)
    assert len(payload["catastrophes"]) == 2


def test_fig3a_negative_minimum_in_window():
    payload = run_preset("fig3a")
    xs = np.asarray(payload["x"])
    counts = np.asarray(payload["root_counts"])
    neg_min = np.asarray(payload["negative_minimum_counts"])
    cats = sorted(c["x"] for c in payload["catastrophes"])
    inside = (xs > cats[0] + 0.02) & (xs < cats[1] - 0.02)
    assert np.all(counts[inside] == 3)
    assert np.all(neg_min[inside] == 1)
