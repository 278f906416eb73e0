import numpy as np
import pytest

from tlcim.device_model import ClusterGeometry
from tlcim.nvsram_array import SubarrayConfig
from tlcim.weight_mapper import (
    Block,
    LayerSpec,
    PlacementError,
    capacity_report,
    distribute,
    layer_to_matrix,
    map_model,
    place,
    planes_for_layer,
    split_blocks,
)
from tlcim.workloads import resnet18_workload


class TestLayerToMatrix:
    def test_conv(self):
        assert layer_to_matrix(LayerSpec("conv", 64, 3, 64)) == (576, 640)

    def test_dense(self):
        assert layer_to_matrix(LayerSpec("dense", 512, 1, 10)) == (512, 100)

    def test_degenerate(self):
        assert layer_to_matrix(LayerSpec("conv", 1, 1, 1, q=1)) == (1, 2)

    def test_validation(self):
        with pytest.raises(ValueError):
            LayerSpec("dense", 512, 3, 10)
        with pytest.raises(ValueError):
            LayerSpec("pool", 1, 1, 1)


class TestSplitBlocks:
    def test_conv_layer_tiling(self):
        blocks = split_blocks((576, 640))
        assert len(blocks) == 72
        assert all(b.rows == 16 and b.width == 320 for b in blocks)

    def test_single_block(self):
        assert len(split_blocks((16, 320))) == 1

    def test_edge_blocks(self):
        blocks = split_blocks((17, 321))
        assert len(blocks) == 4
        sizes = {(b.rows, b.width) for b in blocks}
        assert sizes == {(16, 320), (16, 1), (1, 320), (1, 1)}

    def test_row_major_order(self):
        blocks = split_blocks((32, 640))
        starts = [(b.row_start, b.col_start) for b in blocks]
        assert starts == [(0, 0), (0, 320), (16, 0), (16, 320)]


class TestDistribute:
    def _blocks(self, count):
        return split_blocks((16 * count, 320), layer="l")

    def test_even_split(self):
        result = distribute(self._blocks(72), 6)
        assert [len(lst) for lst in result.per_subarray] == [12] * 6

    def test_imbalance_at_most_one(self):
        result = distribute(self._blocks(7), 2)
        assert [len(lst) for lst in result.per_subarray] == [4, 3]

    def test_duplicate_fills_idle_subarray(self):
        blocks = self._blocks(12)
        result = distribute(blocks, 2, duplicate=True, primary_subarrays=1)
        assert result.replica_count == 2
        assert len(result.per_subarray[0]) == 12
        assert len(result.per_subarray[1]) == 12
        assert all(b.replica == 1 for b in result.per_subarray[1])

    def test_duplicate_respects_occupancy_threshold(self):
        blocks = self._blocks(4)
        result = distribute(blocks, 2, duplicate=True, primary_subarrays=1,
                            occupancy=[0.0, 0.9])
        assert result.replica_count == 1
        assert result.per_subarray[1] == []


class TestPlace:
    CFG = SubarrayConfig()
    GEO = ClusterGeometry()

    def test_single_full_block_occupies_first_plane(self):
        blocks = split_blocks((16, 320), layer="l")
        placement = place([blocks], self.CFG, self.GEO)
        (entry,) = placement.entries
        assert (entry.cluster, entry.source_line) == (0, 0)
        assert (entry.row_offset, entry.col_offset) == (0, 0)

    def test_smaller_block_fills_leftover_columns(self):
        blocks = [
            Block("l", 0, 0, 16, 0, 200),
            Block("l", 1, 16, 32, 0, 120),
            Block("l", 2, 32, 48, 0, 200),
        ]
        placement = place([blocks], self.CFG, self.GEO)
        by_index = {e.block.index: e for e in placement.entries}
        assert by_index[0].row_offset == 0 and by_index[0].col_offset == 0
        # the 120-wide block slots into the hole left on the first band
        assert by_index[1].row_offset == 0 and by_index[1].col_offset == 200
        # the second 200-wide block opens the next band
        assert by_index[2].row_offset == 16 and by_index[2].col_offset == 0

    def test_best_fit_prefers_widest_then_earliest(self):
        blocks = [
            Block("l", 0, 0, 16, 0, 200),
            Block("l", 1, 16, 32, 0, 60),
            Block("l", 2, 32, 48, 0, 100),
            Block("l", 3, 48, 64, 0, 100),
        ]
        placement = place([blocks], self.CFG, self.GEO)
        by_index = {e.block.index: e for e in placement.entries}
        # 100-wide block 2 beats the earlier 60-wide block 1 for the hole
        assert by_index[2].col_offset == 200 and by_index[2].row_offset == 0
        assert by_index[1].row_offset == 16

    def test_plane_advances_source_line_then_cluster(self):
        # 60 full planes fill cluster 0; the next block must land at (1, 0).
        per_plane = 16
        n_planes = 60
        blocks = split_blocks((16 * (per_plane * n_planes + 1), 320), layer="l")
        placement = place([blocks], self.CFG, self.GEO)
        last = placement.entries[-1]
        assert (last.cluster, last.source_line) == (1, 0)
        first_plane_addresses = {(e.cluster, e.source_line)
                                 for e in placement.entries[:per_plane]}
        assert first_plane_addresses == {(0, 0)}

    def test_layers_never_share_a_plane(self):
        a = split_blocks((16, 100), layer="a")
        b = split_blocks((16, 100), layer="b")
        placement = place([a + b], self.CFG, self.GEO)
        addresses = {e.block.layer: (e.cluster, e.source_line)
                     for e in placement.entries}
        assert addresses["a"] != addresses["b"]

    def test_no_overlap_bitmaps(self):
        rng = np.random.default_rng(3)
        blocks = []
        idx = 0
        for _ in range(40):
            rows = int(rng.integers(1, 17))
            width = int(rng.integers(1, 161)) * 2
            blocks.append(Block("l", idx, 0, rows, 0, width))
            idx += 1
        placement = place([blocks], self.CFG, self.GEO)
        placement.occupancy_bitmaps()  # raises on double assignment

    def test_capacity_error_names_block(self):
        geom = ClusterGeometry(1, 1)  # one plane only
        blocks = split_blocks((16 * 17, 320), layer="big")
        with pytest.raises(PlacementError, match="big#16"):
            place([blocks], self.CFG, geom)

    def test_unmapping_reproduces_layer_coordinates(self):
        layer = LayerSpec("conv", 7, 3, 11, name="l")
        dims = layer_to_matrix(layer)
        blocks = split_blocks(dims, layer="l")
        placement = place([blocks], self.CFG, self.GEO)
        coverage = np.zeros(dims, dtype=int)
        for e in placement.entries:
            b = e.block
            coverage[b.row_start:b.row_stop, b.col_start:b.col_stop] += 1
        assert (coverage == 1).all()

    def test_json_round_trip(self):
        blocks = split_blocks((48, 500), layer="l")
        placement = place([blocks], self.CFG, self.GEO)
        clone = type(placement).from_json(placement.to_json())
        assert clone == placement


class TestMapModel:
    def test_spreads_blocks_and_tracks_planes(self):
        layers = [LayerSpec("conv", 64, 3, 64, name="c1"),
                  LayerSpec("dense", 512, 1, 10, name="fc")]
        placement = map_model(layers, 3)
        subs = {e.subarray for e in placement.entries}
        assert subs == {0, 1, 2}
        assert placement.total_planes_used >= 3
        placement.occupancy_bitmaps()


class TestCapacity:
    def test_planes_for_small_layers(self):
        assert planes_for_layer(LayerSpec("conv", 3, 3, 64, name="conv1")) == 1
        assert planes_for_layer(LayerSpec("dense", 512, 1, 10, name="fc")) == 1
        assert planes_for_layer(LayerSpec("conv", 64, 3, 64)) == 5
        assert planes_for_layer(LayerSpec("conv", 512, 3, 512)) == 288

    def test_reference_model_needs_exactly_six_subarrays(self):
        layers = resnet18_workload().layers
        report = capacity_report(layers, "TL")
        assert report.total_weights == 11_173_962
        assert report.subarrays_needed == 6
        assert report.utilization <= 1.0

    def test_reference_model_on_single_level_arrays(self):
        layers = resnet18_workload().layers
        report = capacity_report(layers, "SL")
        assert abs(report.subarrays_needed - 76) <= 3

    def test_empty_model(self):
        report = capacity_report([], "TL")
        assert report.subarrays_needed == 0
        assert report.planes_used == 0

    def test_single_layer_exact_arithmetic(self):
        # 128x320-cell matrix = 2 planes = 16384 weights at 8192 per plane.
        layer = LayerSpec("dense", 128, 1, 128, name="d")
        report = capacity_report([layer], "TL")
        assert report.planes_used == 2
        assert report.subarrays_needed == 1
        assert report.utilization == pytest.approx(
            layer.weights * 5 / (2 * 256 * 160))

    def test_monotone_in_model_size(self):
        small = capacity_report([LayerSpec("conv", 64, 3, 64)], "TL")
        large = capacity_report([LayerSpec("conv", 64, 3, 64)] * 3, "TL")
        assert large.planes_used == 3 * small.planes_used

    def test_unknown_arch(self):
        with pytest.raises(ValueError):
            capacity_report([], "MLC")
