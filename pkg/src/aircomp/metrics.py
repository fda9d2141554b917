"""Analytic computation-error metrics.

Per-subcarrier MSE decomposes into signal-misalignment, noise-induced and
CSI-related terms; phase-aligned coefficients are assumed throughout, so the
misalignment term uses |w^H h_hat| * amplitude. Asymptotic (infinite-power)
error floors are provided both for the full device set and for a partial
active set. All public values are true MSE (the 1/K^2 scaling included);
solvers use the unscaled helpers internally so threshold scaling stays in
one place.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import ChannelState, ReceivePolicy, SystemConfig, TransmitPolicy

OUTAGE_SLACK = 1e-10  # success at MSE <= Gamma + slack (absorbs solver tolerance)


def _terms_all(
    amplitudes: np.ndarray,   # (K, M)
    gains: np.ndarray,        # (K, M, N)
    w: np.ndarray,            # (M, N)
    err_vars: np.ndarray,     # (K,)
    noise_power: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unscaled per-subcarrier error terms, each (M,)."""
    inner = np.abs(np.einsum("mn,kmn->km", w.conj(), gains))  # |w^H h_hat|, (K, M)
    w2 = np.sum(np.abs(w) ** 2, axis=1)                       # (M,)
    misalign = np.sum((inner * amplitudes - 1.0) ** 2, axis=0)
    noise = w2 * noise_power
    csi = w2 * np.sum(err_vars[:, None] * amplitudes**2, axis=0)
    return misalign, noise, csi


def per_subcarrier_mse(
    policy: TransmitPolicy, channel: ChannelState, receive: ReceivePolicy, cfg: SystemConfig
) -> np.ndarray:
    """True-scale MSE for every subcarrier, shape (M,)."""
    mis, noi, csi = _terms_all(
        policy.amplitudes, channel.estimated_gains, receive.beamformers, cfg.err_vars, cfg.noise_power
    )
    return (mis + noi + csi) / cfg.num_devices**2


def mse_subcarrier_terms(
    amplitudes_m: np.ndarray, gains_m: np.ndarray, w_m: np.ndarray, cfg: SystemConfig
) -> tuple[float, float, float]:
    """(misalignment, noise, CSI) error terms of one subcarrier, true scale."""
    gains = np.asarray(gains_m, dtype=complex)
    if gains.ndim == 1:
        gains = gains.reshape(-1, 1)
    w = np.atleast_1d(np.asarray(w_m)).astype(complex).reshape(1, -1)
    amp = np.asarray(amplitudes_m, dtype=float).reshape(-1, 1)
    mis, noi, csi = _terms_all(amp, gains[:, None, :], w, cfg.err_vars, cfg.noise_power)
    k2 = cfg.num_devices**2
    return float(mis[0] / k2), float(noi[0] / k2), float(csi[0] / k2)


def mse_subcarrier(
    amplitudes_m: np.ndarray, gains_m: np.ndarray, w_m: np.ndarray, cfg: SystemConfig
) -> float:
    """Computation MSE of one subcarrier under phase-aligned coefficients."""
    return sum(mse_subcarrier_terms(amplitudes_m, gains_m, w_m, cfg))


def average_mse(
    policy: TransmitPolicy, channel: ChannelState, receive: ReceivePolicy, cfg: SystemConfig
) -> float:
    """Mean MSE over the M subcarriers."""
    return float(np.mean(per_subcarrier_mse(policy, channel, receive, cfg)))


def outage_indicator(mse_m: float, threshold: float) -> int:
    """1 when the subcarrier's MSE exceeds the threshold (boundary counts as
    success, with a small absolute slack for solver tolerance)."""
    return 0 if mse_m <= threshold + OUTAGE_SLACK else 1


def outage_flags(mse: np.ndarray, threshold: float) -> np.ndarray:
    return np.asarray(mse) > threshold + OUTAGE_SLACK


def outage_probability(
    policy: TransmitPolicy, channel: ChannelState, receive: ReceivePolicy, cfg: SystemConfig
) -> float:
    """Fraction of subcarriers whose computation failed (MSE above Gamma)."""
    mse = per_subcarrier_mse(policy, channel, receive, cfg)
    return float(np.mean(outage_flags(mse, cfg.mse_threshold)))


# ---------------------------------------------------------------------------
# Infinite-power error floors
# ---------------------------------------------------------------------------

def _floor_terms(gains_m: np.ndarray, err_vars: np.ndarray, w_m: Optional[np.ndarray]) -> np.ndarray:
    """Per-device floor contributions in [0, 1], shape (K,).

    With a beamformer: ||w||^2 s / (|w^H h|^2 + ||w||^2 s). Without one:
    s / (||h||^2 + s), which is exact for a single antenna and a lower bound
    (Cauchy-Schwarz) otherwise.
    """
    gains = np.asarray(gains_m, dtype=complex)
    if gains.ndim == 1:
        gains = gains.reshape(-1, 1)
    err = np.asarray(err_vars, dtype=float)
    if w_m is None:
        denom = np.sum(np.abs(gains) ** 2, axis=1) + err
    else:
        w = np.atleast_1d(np.asarray(w_m)).astype(complex)
        w2 = float(np.sum(np.abs(w) ** 2))
        if w2 == 0.0:
            raise ValueError("floor undefined for a zero beamformer")
        denom = np.abs(gains @ w.conj()) ** 2 + w2 * err
        err = w2 * err
    out = np.zeros_like(err)
    nz = denom > 0
    out[nz] = err[nz] / denom[nz]
    return out


def mse_floor_full(
    gains_m: np.ndarray, err_vars: np.ndarray, w_m: Optional[np.ndarray] = None
) -> float:
    """Minimum achievable subcarrier MSE as transmit powers grow unbounded.

    For one receive antenna (or when w_m is supplied) this is the exact
    limit; for several antennas without w_m it is the beamformer-independent
    lower bound.
    """
    terms = _floor_terms(gains_m, err_vars, w_m)
    return float(np.sum(terms)) / len(terms) ** 2


def mse_floor_partial(
    gains_m: np.ndarray,
    err_vars: np.ndarray,
    active_set: np.ndarray,
    w_m: Optional[np.ndarray] = None,
) -> float:
    """Floor when only the unconstrained devices (active_set True) transmit;
    each switched-off device contributes its full 1/K^2 misalignment."""
    terms = _floor_terms(gains_m, err_vars, w_m)
    active = np.asarray(active_set, dtype=bool)
    K = len(terms)
    return float(np.sum(np.where(active, terms, 1.0))) / K**2


@dataclass(frozen=True)
class FloorReport:
    """Per-subcarrier floors plus the active set they were computed under."""

    floor_full: np.ndarray     # (M,)
    floor_partial: np.ndarray  # (M,)
    active_set: np.ndarray     # (K,) bool; True = unconstrained device


def floor_report(
    channel: ChannelState,
    cfg: SystemConfig,
    active_set: Optional[np.ndarray] = None,
    receive: Optional[ReceivePolicy] = None,
) -> FloorReport:
    K, M = cfg.num_devices, cfg.num_subcarriers
    active = np.ones(K, dtype=bool) if active_set is None else np.asarray(active_set, dtype=bool)
    full = np.empty(M)
    partial = np.empty(M)
    for m in range(M):
        gains_m = channel.estimated_gains[:, m, :]
        w_m = None if receive is None else receive.beamformers[m]
        full[m] = mse_floor_full(gains_m, cfg.err_vars, w_m)
        partial[m] = mse_floor_partial(gains_m, cfg.err_vars, active, w_m)
    return FloorReport(floor_full=full, floor_partial=partial, active_set=active)
