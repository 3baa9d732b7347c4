"""Crosstalk characterization and simulation toolkit for transmon processors.

Pipeline: load a calibration snapshot, extract (drive, target, spectator)
triplets and schedule them into well-separated batches, run simultaneous
randomized benchmarking on a virtual backend with injectable ground-truth
crosstalk, build standard and crosstalk-aware noise models, and compare
them against virtual-measured layout sweeps of a chain benchmark circuit.
"""

__version__ = "0.1.0"

from .device import (
    Batch,
    CalibrationError,
    CollisionReport,
    CollisionThresholds,
    DeviceSnapshot,
    EdgeCalibration,
    QubitCalibration,
    Triplet,
    detect_collisions,
    enumerate_chains,
    extract_triplets,
    load_batches,
    load_snapshot,
    schedule_batches,
    validate_batches,
)
from .circuit import (
    Circuit,
    Gate,
    Schedule,
    TwirlRecord,
    active_qubits,
    map_to_native,
    randomized_compile,
    schedule,
)
from .simulator import (
    CliffordTableau,
    Counts,
    DensityMatrix,
    apply_channel,
    apply_gate,
    clifford_inverse,
    exact_distribution,
    sample_counts,
)
from .noise import (
    CrosstalkInjection,
    CrosstalkTable,
    DepolarizingParams,
    KrausChannel,
    NoiseModel,
    ThermalRelaxationParams,
    build_crosstalk_model,
    build_standard_model,
    depol_to_rate,
    depolarizing,
    inject_crosstalk,
    rate_to_depol,
    thermal_relaxation,
)
from .backend import PerCliffordDepolarizing, VirtualBackend
from .rb import (
    DESK_CONFIG,
    PAPER_CONFIG,
    DecayFit,
    RBConfig,
    RBPoint,
    build_rb_circuits,
    build_simultaneous_rb,
    characterize,
    fit_decay,
    sample_clifford,
)
from .bench import (
    ComparisonResult,
    FidelityRecord,
    TwirlSpec,
    compare,
    filter_outliers,
    hadamard_ladder,
    hellinger_fidelity,
    sweep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
