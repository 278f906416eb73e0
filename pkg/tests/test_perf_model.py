import math

import pytest

from tlcim.perf_model import (
    ARCHS,
    AreaParams,
    BC_256x256,
    EnergyParams,
    TC_256x250,
    TC_256x320,
    ThroughputConfig,
    Workload,
    cb_count,
    density_report,
    estimate_energy,
    mvm_cycles,
    peak_throughput_ratio,
    workload_cycles,
)
from tlcim.weight_mapper import LayerSpec
from tlcim.workloads import resnet18_workload, vgg9_workload


class TestCbCount:
    def test_binary_default(self):
        assert cb_count(256, 32) == 8

    def test_ternary_default(self):
        assert cb_count(256, 16) == 16

    def test_multibit_row_limit(self):
        assert cb_count(256, 11) == 24

    def test_validation(self):
        with pytest.raises(ValueError):
            cb_count(0, 16)


class TestMvmCycles:
    def test_binary(self):
        assert mvm_cycles("BC") == 8 * 8 * 8

    def test_ternary(self):
        assert mvm_cycles("TC") == 5 * 16 * 5

    def test_multibit_is_slower_than_bit_serial(self):
        cycles = mvm_cycles("BC_multibit", multibit=2, rows_active=11)
        assert cycles == 4 * 24 * 8
        assert cycles > mvm_cycles("BC")

    def test_no_mux_mode(self):
        assert mvm_cycles("BC", include_mux=False) == 64
        assert mvm_cycles("TC", include_mux=False) == 80

    def test_monotone_in_rows_active(self):
        values = [mvm_cycles("TC", rows_active=r) for r in (4, 8, 16)]
        assert values[0] >= values[1] >= values[2]

    def test_validation(self):
        with pytest.raises(ValueError):
            mvm_cycles("QC")
        with pytest.raises(ValueError):
            mvm_cycles("BC_multibit", multibit=2)


class TestThroughput:
    def test_peak_ratio_in_published_band(self):
        ratio = peak_throughput_ratio()
        assert ratio == pytest.approx(512 / 400)
        assert 1.25 <= ratio <= 1.35

    def test_reduced_adc_variant_matches_binary_throughput(self):
        assert peak_throughput_ratio(tc=TC_256x250) == pytest.approx(1.0)
        reduction = (BC_256x256.outputs - TC_256x250.outputs) / BC_256x256.outputs
        assert reduction * 100 == pytest.approx(21.875)
        assert abs(reduction * 100 - 21.9) <= 0.1

    def test_identical_schemes_give_unity(self):
        assert peak_throughput_ratio(tc=TC_256x320, bc=ThroughputConfig(
            5, 256, 16, 5, 32)) == pytest.approx(1.0)


class TestEstimateEnergy:
    def test_empty_workload_gives_zero_ledger(self):
        empty = Workload("empty", [], [])
        ledger = estimate_energy(empty, "TL")
        assert ledger.total_j == 0.0
        assert all(entry.count == 0 for entry in ledger.components.values())

    def test_ledger_additivity_and_traceability(self):
        ledger = estimate_energy(vgg9_workload(), "baseline1")
        total = sum(e.energy_j for e in ledger.components.values())
        assert ledger.total_j == total
        for entry in ledger.components.values():
            assert entry.energy_j == entry.count * entry.unit_j

    def test_off_chip_reload_bits(self):
        workload = vgg9_workload()
        ledger = estimate_energy(workload, "baseline1")
        weight_bits = sum(l.weights for l in workload.layers) * 8
        assert ledger.components["off_chip"].count == weight_bits
        assert ledger.components["off_chip"].unit_j == 4.2e-12

    def test_encoder_only_on_ternary_arch(self):
        workload = vgg9_workload()
        assert "encoder" in estimate_energy(workload, "TL").components
        assert "encoder" not in estimate_energy(workload, "baseline1").components

    @pytest.mark.parametrize("workload_fn", [resnet18_workload, vgg9_workload])
    def test_dram_baseline_ratio_band(self, workload_fn):
        workload = workload_fn()
        tl = estimate_energy(workload, "TL")
        b1 = estimate_energy(workload, "baseline1")
        ratio = tl.efficiency_ops_per_j / b1.efficiency_ops_per_j
        assert 2.3 <= ratio <= 3.1

    @pytest.mark.parametrize("workload_fn", [resnet18_workload, vgg9_workload])
    def test_reram_cim_baseline_ratio(self, workload_fn):
        workload = workload_fn()
        tl = estimate_energy(workload, "TL")
        b3 = estimate_energy(workload, "baseline3")
        ratio = tl.efficiency_ops_per_j / b3.efficiency_ops_per_j
        assert abs(ratio - 2.0) <= 0.5

    @pytest.mark.parametrize("workload_fn", [resnet18_workload, vgg9_workload])
    def test_single_level_baseline_ratio(self, workload_fn):
        workload = workload_fn()
        tl = estimate_energy(workload, "TL")
        b4 = estimate_energy(workload, "baseline4")
        ratio = tl.efficiency_ops_per_j / b4.efficiency_ops_per_j
        assert abs(ratio - 1.2) <= 0.15

    @pytest.mark.parametrize("workload_fn", [resnet18_workload, vgg9_workload])
    def test_equal_cim_energy_scenario(self, workload_fn):
        params = EnergyParams(tl_cim_energy=0.11e-12)
        workload = workload_fn()
        tl = estimate_energy(workload, "TL", params)
        b4 = estimate_energy(workload, "baseline4", params)
        assert tl.efficiency_ops_per_j / b4.efficiency_ops_per_j >= 1.15

    @pytest.mark.parametrize("workload_fn", [resnet18_workload, vgg9_workload])
    def test_efficiency_ordering(self, workload_fn):
        workload = workload_fn()
        eff = {arch: estimate_energy(workload, arch).efficiency_ops_per_j
               for arch in ARCHS}
        assert eff["TL"] > eff["baseline4"]
        assert eff["baseline4"] > max(eff["baseline1"], eff["baseline2"])
        assert eff["TL"] > eff["baseline3"]

    def test_unknown_arch(self):
        with pytest.raises(ValueError):
            estimate_energy(vgg9_workload(), "baseline9")


class TestWorkloadCycles:
    def test_replicas_halve_a_layer(self):
        layer = LayerSpec("conv", 64, 3, 128, name="mid")
        workload = Workload("w", [layer], [4])
        plain = workload_cycles(workload, "TL")
        doubled = workload_cycles(workload, "TL", replicas={"mid": 2})
        assert doubled["mid"] * 2 == plain["mid"]

    def test_total_sums_layers(self):
        workload = vgg9_workload()
        cycles = workload_cycles(workload, "TL")
        assert cycles["total"] == sum(v for k, v in cycles.items() if k != "total")


class TestDensityReport:
    def test_published_density_figures(self):
        report = density_report()
        assert round(report.tl_density_bits_per_um2, 2) == 60.47
        assert round(report.sl_density_bits_per_um2, 2) == 7.73
        assert abs(report.density_ratio_tl_over_sl - 7.82) <= 0.01
        assert abs(report.density_ratio_tl_over_sl - 7.8) <= 0.05

    def test_trit_bit_equivalence_isolated_factor(self):
        log3 = density_report(AreaParams(trit_bits=math.log2(3)))
        base = density_report()
        factor = math.log2(3) / 1.6
        assert log3.tl_density_bits_per_um2 == pytest.approx(
            base.tl_density_bits_per_um2 * factor)
        assert log3.sl_density_bits_per_um2 == base.sl_density_bits_per_um2

    def test_area_saving_with_calibrated_periphery(self):
        report = density_report()
        assert abs(report.area_saved_fraction - 0.891) <= 0.05

    def test_bits_per_cell(self):
        report = density_report()
        assert report.tl_trits_per_cell == 240
        assert report.tl_bits_per_cell == pytest.approx(384.0)
