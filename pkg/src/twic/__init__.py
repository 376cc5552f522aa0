"""Numeric laboratory for the K-pair-user full-duplex two-way interference
channel aided by an instantaneous MIMO relay: beamformer construction,
slot-level simulation, and empirical degrees-of-freedom estimation."""

from .network import (
    ChannelRealization,
    NetworkConfig,
    StreamId,
    SymbolFrame,
    all_streams,
    generate_channel,
    load_scenario,
    relay_receive_matrix,
)
from .linalg import least_norm_solve, pinv_apply, rank_and_condition
from .beamforming import (
    BeamformerSet,
    ConstraintSpec,
    build_cognitive,
    build_full_2k,
    build_half_duplex,
    build_three_antenna,
    rotation_schedule,
    verify_constraints,
)
from .transceiver import (
    SlotResult,
    simulate_half_duplex_round,
    simulate_slot,
    tdma_baseline_round,
)
from .dof import (
    DofEstimate,
    SweepSpec,
    analytic_reference,
    compare,
    run_sweep,
)

__version__ = "0.1.0"
