"""Behavioral simulator of a three-level-ReRAM-backed nvSRAM
compute-in-memory architecture: balanced-ternary codecs, device variation
and restore-yield Monte Carlo, a bit-exact ternary MAC array model, compact
weight mapping, and energy/throughput/density reporting against baseline
architectures."""

from .device_model import (
    ClusterGeometry,
    DeviceParams,
    MarginCollapseError,
    ModeSettings,
    ResistanceState,
    RestoreThresholds,
    cluster_effective_resistance,
    optimal_mrs,
    restore_thresholds,
    sample_resistance,
    selector_state,
)
from .nvsram_array import (
    AdcModel,
    StateError,
    Subarray,
    SubarrayConfig,
    cbl_cycle,
    discharge_count,
    static_leak_report,
)
from .trit_codec import (
    TritWord,
    from_balanced_ternary,
    input_trit_to_lines,
    quantize_weight_tensor,
    to_balanced_ternary,
    truncate_to_trits,
    weight_trit_to_bits,
)
from .weight_mapper import (
    Block,
    CapacityReport,
    LayerSpec,
    Placement,
    PlacementError,
    capacity_report,
    distribute,
    layer_to_matrix,
    map_model,
    place,
    split_blocks,
)
from .yield_mc import YieldReport, error_confusion_matrix, restore_yield, yield_sweep
from .perf_model import (
    AreaParams,
    EnergyLedger,
    EnergyParams,
    Workload,
    cb_count,
    density_report,
    estimate_energy,
    mvm_cycles,
    peak_throughput_ratio,
)
from .accuracy_harness import ErrorModel, EvalReport, QuantModel, evaluate, inject_trit_errors

__version__ = "0.1.0"
