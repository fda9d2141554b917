"""The three comparison schemes: a design that ignores the channel estimation
error, equal power allocation, and channel inversion power control.

All benchmark transmit policies are paired with the MSE-optimal receive rule
for their fixed amplitudes (the sum-MMSE beamformer, iterated with phase
alignment to a fixed point); the caller evaluates the returned policies under
the true error variances.
"""

from __future__ import annotations

import numpy as np

from . import metrics
from .model import ChannelState, ReceivePolicy, SystemConfig, TransmitPolicy
from .simo import _safe_div, aligned_average_mse, mmse_receive_update


def receive_for_amplitudes(
    amplitudes: np.ndarray,
    channel: ChannelState,
    cfg: SystemConfig,
    max_iters: int = 50,
    tol: float = 1e-12,
) -> ReceivePolicy:
    """MSE-optimal beamformers for fixed amplitudes.

    The aligned coefficients depend on w and vice versa, so the sum-MMSE
    solve is iterated from phase-0 coefficients; every step is an exact
    minimizer, so the MSE is nonincreasing and the loop stops once it
    stabilizes. With one antenna the alignment is w-independent and a single
    step suffices; the scalar is then canonicalized to its magnitude (the
    aligned MSE is invariant to a common phase of w).
    """
    receive = mmse_receive_update(amplitudes, channel, cfg, previous=None)
    obj = aligned_average_mse(amplitudes, channel, receive, cfg)
    for _ in range(max_iters):
        receive = mmse_receive_update(amplitudes, channel, cfg, previous=receive)
        new_obj = aligned_average_mse(amplitudes, channel, receive, cfg)
        if obj - new_obj <= tol * max(1.0, obj):
            obj = new_obj
            break
        obj = new_obj
    if cfg.num_rx_antennas == 1:
        receive = ReceivePolicy(np.abs(receive.beamformers))
    return receive


def equal_power_policy(
    channel: ChannelState, cfg: SystemConfig
) -> tuple[TransmitPolicy, ReceivePolicy]:
    """Full power, split evenly over the subcarriers, phases aligned."""
    K, M = cfg.num_devices, cfg.num_subcarriers
    amp = np.sqrt(cfg.budgets / M)[:, None] * np.ones((K, M))
    receive = receive_for_amplitudes(amp, channel, cfg)
    return TransmitPolicy.from_amplitudes(amp, channel, receive), receive


def channel_inversion_policy(
    channel: ChannelState, cfg: SystemConfig
) -> tuple[TransmitPolicy, ReceivePolicy]:
    """Amplitudes proportional to the weakest device's channel norm over each
    subcarrier, inverted against the own (error-regularized) channel power."""
    M = cfg.num_subcarriers
    norms = np.linalg.norm(channel.estimated_gains, axis=2)  # (K, M)
    weakest = np.min(norms, axis=0)                          # (M,)
    denom = np.sqrt(norms**2 + cfg.err_vars[:, None])
    amp = np.sqrt(cfg.budgets / M)[:, None] * _safe_div(weakest[None, :], denom)
    receive = receive_for_amplitudes(amp, channel, cfg)
    return TransmitPolicy.from_amplitudes(amp, channel, receive), receive


def ignore_csi_policy(
    channel: ChannelState, cfg: SystemConfig, scenario: str
) -> tuple[TransmitPolicy, ReceivePolicy]:
    """Run the scenario's proposed solver with the error variances zeroed out.

    The returned policies are meant to be evaluated against the true error
    variances by the caller; no correction is applied after the fact.
    """
    from . import simo, siso  # deferred: the solvers initialize from this module

    blind = cfg.with_error_variances(np.zeros(cfg.num_devices))
    if scenario == "best_effort":
        solve = siso.solve_siso_avg if cfg.num_rx_antennas == 1 else simo.solve_simo_avg
    elif scenario == "error_constrained":
        solve = siso.solve_siso_outage if cfg.num_rx_antennas == 1 else simo.solve_simo_outage
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    policy, receive, _ = solve(channel, blind)
    return policy, receive


def evaluate_policy(
    pair: tuple[TransmitPolicy, ReceivePolicy],
    channel: ChannelState,
    cfg: SystemConfig,
    scenario: str,
) -> float:
    """Scenario metric of a policy pair under the true error variances."""
    policy, receive = pair
    if scenario == "best_effort":
        return metrics.average_mse(policy, channel, receive, cfg)
    return metrics.outage_probability(policy, channel, receive, cfg)
