"""Transceiver design and Monte Carlo simulation for over-the-air computation
in OFDM multiple-access systems under imperfect channel knowledge."""

from .benchmarks import (
    channel_inversion_policy,
    equal_power_policy,
    evaluate_policy,
    ignore_csi_policy,
)
from .channel import (
    DelaySpec,
    TapChannel,
    export_channel_state,
    import_channel_state,
    relative_delays,
    sample_estimated_channel,
    sample_rayleigh_channel,
    sample_tap_channel,
    substream,
    taps_to_subcarrier_gains,
)
from .harness import ExperimentSpec, ResultRow, preset_spec, run_experiment, write_results
from .metrics import (
    FloorReport,
    average_mse,
    floor_report,
    mse_floor_full,
    mse_floor_partial,
    mse_subcarrier,
    mse_subcarrier_terms,
    outage_indicator,
    outage_probability,
    per_subcarrier_mse,
)
from .model import (
    ChannelState,
    ConfigError,
    ReceivePolicy,
    SolveReport,
    SystemConfig,
    TransmitPolicy,
    align_phases,
    validate_config,
)
from .optim import (
    BisectionSettings,
    EllipsoidSettings,
    IterationLimitError,
    NoRootError,
    NonMonotoneError,
    bisect_decreasing,
    ellipsoid_maximize,
)
from .oracle import (
    GridSpec,
    empirical_mse,
    enumerate_min_outage,
    grid_search_joint,
    kkt_residuals,
    min_power_sweep,
)
from .simo import (
    AoSettings,
    mmse_receive_update,
    simo_outage_transmit_step,
    simo_transmit_update_avg,
    solve_simo_avg,
    solve_simo_outage,
)
from .siso import (
    DualState,
    InfeasibleSubcarrierError,
    siso_avg_inner,
    siso_outage_decision,
    siso_outage_subcarrier,
    solve_siso_avg,
    solve_siso_outage,
)

__version__ = "0.1.0"
