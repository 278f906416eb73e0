import math

import numpy as np
import pytest

from tlcim.device_model import (
    ClusterGeometry,
    DeviceParams,
    MarginCollapseError,
    ResistanceState,
    SelectorState,
    cluster_effective_resistance,
    optimal_mrs,
    restore_thresholds,
    sample_resistance,
    selector_state,
)


def grid_search_mrs(lrs: float, hrs: float) -> float:
    """Independent 1-D grid search of the min-ratio objective."""
    grid = np.geomspace(lrs, hrs, 200001)
    score = np.minimum(grid / lrs, hrs / grid)
    return float(grid[int(np.argmax(score))])


class TestOptimalMrs:
    def test_published_default_point(self):
        value = optimal_mrs(80e3, 1e6)
        assert abs(value - 282e3) / 282e3 < 0.005

    def test_matches_grid_search_oracle(self):
        assert optimal_mrs(100, 40000) == pytest.approx(2000)
        assert grid_search_mrs(100, 40000) == pytest.approx(2000, rel=1e-3)

    def test_geometric_mean_symmetry(self):
        assert optimal_mrs(100, 400) == pytest.approx(200)

    def test_ratios_balance_exactly(self):
        for lrs, hrs in [(80e3, 1e6), (1.0, 7.3), (2e2, 9e9)]:
            m = optimal_mrs(lrs, hrs)
            assert abs(m / lrs - hrs / m) / (hrs / m) < 1e-12

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            optimal_mrs(-1, 10)
        with pytest.raises(ValueError):
            optimal_mrs(10, 10)


class TestDeviceParams:
    def test_mrs_derived_by_default(self):
        assert DeviceParams().mrs_ohms == pytest.approx(math.sqrt(80e3 * 1e6))

    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            DeviceParams(lrs_ohms=1e6, hrs_ohms=80e3)
        with pytest.raises(ValueError):
            DeviceParams(mrs_ohms=50e3)


class TestSelector:
    def test_turn_on(self):
        assert selector_state(0.5, SelectorState.INSULATING) is SelectorState.METALLIC

    def test_holds_inside_band(self):
        assert selector_state(0.1, SelectorState.METALLIC) is SelectorState.METALLIC
        assert selector_state(0.1, SelectorState.INSULATING) is SelectorState.INSULATING

    def test_turn_off(self):
        assert selector_state(0.01, SelectorState.METALLIC) is SelectorState.INSULATING

    def test_sweep_has_exactly_one_transition_each_way(self):
        volts = list(np.linspace(0, 0.6, 121)) + list(np.linspace(0.6, 0, 121))
        state = SelectorState.INSULATING
        transitions = []
        for v in volts:
            new = selector_state(v, state)
            if new is not state:
                transitions.append(new)
            state = new
        assert transitions == [SelectorState.METALLIC, SelectorState.INSULATING]


class TestSampleResistance:
    def test_degenerate_sigma_is_exact(self):
        params = DeviceParams(gap_sigma_rel=0.0)
        rng = np.random.default_rng(0)
        assert sample_resistance(ResistanceState.LRS, params, rng) == 80e3

    def test_median_near_nominal(self):
        params = DeviceParams()
        rng = np.random.default_rng(1)
        samples = sample_resistance(ResistanceState.MRS, params, rng, size=100_000)
        assert abs(np.median(samples) - 282842.7) / 282842.7 < 0.01

    def test_three_sigma_coverage(self):
        # sigma_log = 0.1/3, so ~99.73% of HRS samples land within e^(+-0.1).
        params = DeviceParams()
        rng = np.random.default_rng(2)
        samples = sample_resistance(ResistanceState.HRS, params, rng, size=100_000)
        inside = np.mean((samples >= 1e6 * math.exp(-0.1)) & (samples <= 1e6 * math.exp(0.1)))
        assert 0.995 <= inside <= 0.999


class TestClusterEffectiveResistance:
    def test_series_only(self):
        assert cluster_effective_resistance(80e3, ClusterGeometry(1, 1), DeviceParams()) \
            == pytest.approx(120e3)

    def test_nodal_oracle_hrs(self):
        params = DeviceParams()
        got = cluster_effective_resistance(1e6, ClusterGeometry(60, 1), params)
        series = 40e3 + 1e6
        leak = 0.12e9 / 59
        want = 1.0 / (1.0 / series + 1.0 / leak)
        assert got == pytest.approx(want, rel=1e-12)
        assert got == pytest.approx(688.1e3, rel=1e-3)

    def test_nodal_oracle_mrs(self):
        params = DeviceParams()
        got = cluster_effective_resistance(282842.7, ClusterGeometry(60, 1), params)
        assert got == pytest.approx(278.6e3, rel=1e-3)

    def test_strictly_decreasing_in_n(self):
        params = DeviceParams()
        values = [cluster_effective_resistance(282842.7, ClusterGeometry(n, 1), params)
                  for n in (1, 2, 10, 30, 60)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_strictly_increasing_in_r_cell(self):
        params = DeviceParams()
        geom = ClusterGeometry(60, 4)
        values = [cluster_effective_resistance(r, geom, params)
                  for r in (80e3, 282.8e3, 1e6)]
        assert values[0] < values[1] < values[2]


class TestRestoreThresholds:
    def test_t1_series_only(self):
        t = restore_thresholds(DeviceParams(), ClusterGeometry(1, 1))
        assert t.t1_ohms == pytest.approx(math.sqrt(120e3 * 322842.7), rel=1e-6)
        assert t.t1_ohms == pytest.approx(196.8e3, rel=1e-3)

    def test_t2_with_leak(self):
        t = restore_thresholds(DeviceParams(), ClusterGeometry(60, 1))
        assert t.t2_ohms == pytest.approx(437.9e3, rel=1e-3)

    def test_independent_of_sigma(self):
        quiet = restore_thresholds(DeviceParams(gap_sigma_rel=0.0), ClusterGeometry(60, 4))
        noisy = restore_thresholds(DeviceParams(gap_sigma_rel=0.5), ClusterGeometry(60, 4))
        assert quiet == noisy

    def test_t3_defaults_to_t1(self):
        t = restore_thresholds(DeviceParams(), ClusterGeometry(60, 4))
        assert t.t3_ohms == t.t1_ohms

    def test_margins_positive_wherever_thresholds_exist(self):
        params = DeviceParams()
        for n in (1, 20, 60):
            for m in (1, 4):
                geom = ClusterGeometry(n, m)
                t = restore_thresholds(params, geom)
                eff = {s: cluster_effective_resistance(params.nominal(s), geom, params)
                       for s in ResistanceState}
                assert eff[ResistanceState.LRS] < t.t1_ohms < eff[ResistanceState.MRS]
                assert eff[ResistanceState.MRS] < t.t2_ohms < eff[ResistanceState.HRS]

    def test_margin_collapse_reports_colliding_values(self):
        # A tiny off-cluster leak shorts all states together.
        params = DeviceParams(off_leak_ohms=1e3)
        with pytest.raises(MarginCollapseError) as info:
            restore_thresholds(params, ClusterGeometry(60, 4))
        assert info.value.lo > 0 and info.value.hi > 0
