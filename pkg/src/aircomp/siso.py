"""Globally optimal single-antenna solvers via Lagrange duality.

Average-MSE: for each price vector the per-subcarrier denoising factor solves
a monotone root condition (bisection) and the amplitudes follow a regularized
channel inversion; an ellipsoid ascent over the prices closes the dual, and a
short alternating polish sharpens the KKT residuals of the recovered primal.

Outage: the per-subcarrier subproblem is a priced minimum-power problem whose
solution is an on-off regularized channel inversion; each subcarrier is
served iff its priced power does not exceed the value of conceding the
outage. Dual ascent runs over the same price vector, and the recovered
served set is made power-feasible (and then greedily grown) because at a
dual kink the raw on-off rule can overshoot the budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import metrics
from .model import ChannelState, ReceivePolicy, SolveReport, SystemConfig, TransmitPolicy
from .optim import EllipsoidSettings, IterationLimitError, bisect_decreasing_batch, ellipsoid_maximize
from .simo import (
    _safe_div,
    default_ellipsoid_settings,
    mmse_receive_update,
    repair_served_set,
    simo_transmit_update_avg,
)

W_CLAMP = 1e-9  # denoising factor when zero-priced devices make the root condition vacuous


class InfeasibleSubcarrierError(ValueError):
    """The MSE threshold lies at or below the subcarrier's error floor."""


@dataclass(frozen=True)
class DualState:
    """Dual variables of the outage problem at a given price vector: the
    per-device power prices plus, per subcarrier, the MSE-constraint
    multiplier lam and the substitution v = lam * w^2 (NaN off the
    formula branch)."""

    dual_mu: np.ndarray  # (K,)
    lam: np.ndarray      # (M,)
    v: np.ndarray        # (M,)


# ---------------------------------------------------------------------------
# Average-MSE scenario
# ---------------------------------------------------------------------------

def _inner_avg(
    mu: np.ndarray, g2: np.ndarray, err: np.ndarray, noise: float, w_clamp: float = W_CLAMP
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-subcarrier minimizer of the priced objective at fixed prices.

    Returns (amplitudes (K, M), w (M,), priced objective per subcarrier).
    Only priced devices enter the root condition; when it has no root the
    infimum sits at w -> 0, where zero-priced amplitudes diverge, so w is
    clamped to a tiny positive value (the resulting enormous subgradient
    steers the dual ascent toward positive prices).
    """
    K, M = g2.shape
    active = mu > 0
    if np.any(active):
        f0 = np.sum(g2[active] / mu[active, None], axis=0)
    else:
        f0 = np.zeros(M)

    u = np.zeros(M)
    has_root = f0 > noise
    if np.any(has_root):
        cols = np.where(has_root)[0]
        g2a = g2[active][:, cols]
        erra = err[active][:, None]
        mua = mu[active][:, None]

        def root_lhs(u_vec: np.ndarray) -> np.ndarray:
            den = u_vec[None, :] * (g2a + erra) + mua
            return np.sum(g2a * mua / den**2, axis=0)

        bound = np.sum(_safe_div(g2a * mua, (g2a + erra) ** 2), axis=0)
        hi = np.sqrt(bound / noise)
        lo_b, hi_b = bisect_decreasing_batch(root_lhs, np.full(len(cols), noise), hi=hi, iters=110)
        u[cols] = 0.5 * (lo_b + hi_b)

    w = np.sqrt(u)
    if np.any(~active):
        w[~has_root] = w_clamp
    u_eff = w**2

    g = np.sqrt(g2)
    den = u_eff[None, :] * (g2 + err[:, None]) + mu[:, None]
    amp = _safe_div(w[None, :] * g, den)
    obj = (
        np.sum((w[None, :] * g * amp - 1.0) ** 2 + u_eff[None, :] * err[:, None] * amp**2
               + mu[:, None] * amp**2, axis=0)
        + u_eff * noise
    )
    return amp, w, obj


def siso_avg_inner(
    mu: np.ndarray, channel: ChannelState, cfg: SystemConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dual inner solution at the given prices: amplitudes, denoising factors
    and the per-subcarrier priced-objective contributions."""
    gains = channel.scalar_gains()
    g2 = np.abs(gains) ** 2
    return _inner_avg(np.asarray(mu, dtype=float), g2, cfg.err_vars, cfg.noise_power)


def _stationarity_residual(
    w: np.ndarray, mu: np.ndarray, g2: np.ndarray, err: np.ndarray, noise: float
) -> float:
    """Max deviation from the optimal-denoising root condition (one-sided at
    the w = 0 boundary)."""
    active = mu > 0
    if not np.any(active):
        return 0.0
    u = w**2
    den = u[None, :] * (g2[active] + err[active, None]) + mu[active, None]
    lhs = np.sum(g2[active] * mu[active, None] / den**2, axis=0)
    interior = w > 0
    resid = 0.0
    if np.any(interior):
        resid = float(np.max(np.abs(lhs[interior] - noise)))
    if np.any(~interior):
        f0 = np.sum(g2[active][:, ~interior] / mu[active, None], axis=0)
        resid = max(resid, float(np.max(np.maximum(f0 - noise, 0.0))))
    return resid


def solve_siso_avg(
    channel: ChannelState,
    cfg: SystemConfig,
    ellipsoid_settings: Optional[EllipsoidSettings] = None,
    polish_max_iters: int = 5000,
    stationarity_rtol: float = 1e-9,
) -> tuple[TransmitPolicy, ReceivePolicy, SolveReport]:
    """Global average-MSE minimizer for a single receive antenna."""
    channel.check_shape(cfg)
    if cfg.num_rx_antennas != 1:
        raise ValueError("solve_siso_avg requires a single receive antenna")
    K, M = cfg.num_devices, cfg.num_subcarriers
    gains = channel.scalar_gains()
    g2 = np.abs(gains) ** 2
    err, noise, budgets = cfg.err_vars, cfg.noise_power, cfg.budgets

    best_dual = -np.inf

    def dual(mu: np.ndarray) -> tuple[float, np.ndarray]:
        nonlocal best_dual
        amp, _, obj = _inner_avg(mu, g2, err, noise)
        value = float(np.sum(obj) - mu @ budgets)
        best_dual = max(best_dual, value)
        return value, np.sum(amp**2, axis=1) - budgets

    settings = ellipsoid_settings or default_ellipsoid_settings(cfg)
    try:
        mu_hat, _, iterations = ellipsoid_maximize(dual, K, settings)
        converged = True
    except IterationLimitError as err_limit:
        mu_hat, iterations, converged = err_limit.best_mu, err_limit.iterations, False

    # primal recovery + alternating KKT polish (shares the fixed point with
    # the dual inner solution, so this only sharpens residuals)
    amp, w, _ = _inner_avg(mu_hat, g2, err, noise)
    receive = ReceivePolicy(w)
    mu_dev = mu_hat
    residual = np.inf
    frozen = 0
    for _ in range(polish_max_iters):
        receive = mmse_receive_update(amp, channel, cfg, previous=receive)
        amp, mu_dev = simo_transmit_update_avg(receive, channel, cfg)
        prev_residual = residual
        residual = _stationarity_residual(receive.scalars(), mu_dev, g2, err, noise)
        if residual <= stationarity_rtol * noise:
            break
        # at extreme budget scales the alternation freezes short of the KKT
        # target (float resolution); the duality gap below still certifies
        # those solutions
        if abs(prev_residual - residual) <= 1e-9 * residual:
            frozen += 1
            if frozen >= 40:
                break
        else:
            frozen = 0

    policy = TransmitPolicy.from_amplitudes(amp, channel, receive)
    mse = metrics.per_subcarrier_mse(policy, channel, receive, cfg)
    average = float(np.mean(mse))
    gap = average - best_dual / (K * K * M)
    stationary = residual <= stationarity_rtol * noise
    near_optimal = gap <= 1e-6 * max(average, 1e-12)
    report = SolveReport(
        per_subcarrier_mse=mse,
        average_mse=average,
        outage_flags=metrics.outage_flags(mse, cfg.mse_threshold),
        dual_mu=mu_dev,
        iterations=iterations,
        converged=converged and (stationary or near_optimal),
        duality_gap=gap,
    )
    return policy, receive, report


# ---------------------------------------------------------------------------
# Outage scenario
# ---------------------------------------------------------------------------

def _classify_free_w(
    mu: np.ndarray, g2: np.ndarray, err: np.ndarray, noise: float, k2_gamma: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Minimum priced power per subcarrier with the denoising factor free.

    Returns (amplitudes, w, cost, v, feasible); cost is 0 where the threshold
    clears the partial floor (zero-priced devices alone suffice) and inf
    where it sits at or below the full floor.
    """
    K, M = g2.shape
    g = np.sqrt(g2)
    floor_terms = _safe_div(err[:, None], g2 + err[:, None])
    floor1 = np.sum(floor_terms, axis=0)
    active = mu > 0
    floor2 = np.sum(np.where(active[:, None], 1.0, floor_terms), axis=0)

    feasible = k2_gamma > floor1 * (1 + 1e-12) + 1e-15
    partial = feasible & (k2_gamma >= floor2 - 1e-12 * np.maximum(1.0, floor2))
    formula = feasible & ~partial

    amp = np.zeros_like(g2)
    w = np.zeros(M)
    cost = np.where(feasible, 0.0, np.inf)
    v = np.full(M, np.nan)

    if np.any(partial):
        cols = np.where(partial)[0]
        w[cols] = np.maximum(np.sqrt(np.maximum(k2_gamma - floor2[cols], 0.0) / noise), 1e-12)
        base = _safe_div(g[:, cols], w[None, cols] * (g2[:, cols] + err[:, None]))
        amp[:, cols] = np.where(active[:, None], 0.0, base)

    if np.any(formula):
        cols = np.where(formula)[0]
        g2_f = g2[:, cols]
        err_f = err[:, None]
        mu_f = mu[:, None]

        def constraint(v_vec: np.ndarray) -> np.ndarray:
            num = v_vec[None, :] * err_f + mu_f
            den = v_vec[None, :] * (g2_f + err_f) + mu_f
            terms = np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0)
            return np.sum(terms, axis=0)

        lo_b, hi_b = bisect_decreasing_batch(constraint, np.full(len(cols), k2_gamma), iters=110)
        v_cols = 0.5 * (lo_b + hi_b)
        den = v_cols[None, :] * (g2_f + err_f) + mu_f
        w_sq = np.sum(_safe_div(v_cols[None, :] * g2_f * mu_f, den**2), axis=0) / noise
        w_cols = np.sqrt(w_sq)
        degenerate = w_cols <= 0
        amp_cols = _safe_div(g[:, cols] * v_cols[None, :], w_cols[None, :] * den)
        amp[:, cols] = np.where(degenerate[None, :], 0.0, amp_cols)
        cost[cols] = np.where(degenerate, np.inf, np.sum(mu_f * amp[:, cols] ** 2, axis=0))
        feasible = feasible.copy()
        feasible[cols[degenerate]] = False
        w[cols] = w_cols
        v[cols] = v_cols
    return amp, w, cost, v, feasible


class SisoOutageCandidate(NamedTuple):
    """Lowest-priced-power way to serve one subcarrier at the given prices."""

    amplitudes: np.ndarray  # (K,)
    w: float
    cost: float             # sum_k mu_k * amplitude^2
    v: float                # lam * w^2 on the formula branch, NaN otherwise
    lam: float


class OutageDecision(NamedTuple):
    served: bool
    amplitudes: np.ndarray
    w: float
    indicator: int


def siso_outage_subcarrier(
    mu: np.ndarray, gains_m: np.ndarray, cfg: SystemConfig
) -> SisoOutageCandidate:
    """Solve the priced minimum-power problem for one subcarrier.

    Raises InfeasibleSubcarrierError when the threshold lies at or below the
    subcarrier's error floor (the outage is forced).
    """
    mu = np.asarray(mu, dtype=float)
    g2 = (np.abs(np.asarray(gains_m)).reshape(-1) ** 2)[:, None]
    K = cfg.num_devices
    k2_gamma = K * K * cfg.mse_threshold
    if 1.0 / K <= cfg.mse_threshold + metrics.OUTAGE_SLACK:
        return SisoOutageCandidate(np.zeros(K), 0.0, 0.0, np.nan, np.nan)
    amp, w, cost, v, feasible = _classify_free_w(mu, g2, cfg.err_vars, cfg.noise_power, k2_gamma)
    if not feasible[0]:
        raise InfeasibleSubcarrierError("threshold at or below the subcarrier error floor")
    lam = v[0] / w[0] ** 2 if np.isfinite(v[0]) and w[0] > 0 else np.nan
    return SisoOutageCandidate(amp[:, 0], float(w[0]), float(cost[0]), float(v[0]), float(lam))


def siso_outage_decision(candidate: SisoOutageCandidate, mu: Optional[np.ndarray] = None) -> OutageDecision:
    """Serve the subcarrier iff its priced power does not exceed the unit
    value of conceding the outage (ties kept: equal dual value, lower outage)."""
    if candidate.cost <= 1.0:
        return OutageDecision(True, candidate.amplitudes, candidate.w, 0)
    return OutageDecision(False, np.zeros_like(candidate.amplitudes), 0.0, 1)


def outage_dual_state(mu: np.ndarray, channel: ChannelState, cfg: SystemConfig) -> DualState:
    """Per-subcarrier MSE-constraint multipliers at the given prices."""
    gains = channel.scalar_gains()
    g2 = np.abs(gains) ** 2
    k2_gamma = cfg.num_devices**2 * cfg.mse_threshold
    _, w, _, v, _ = _classify_free_w(np.asarray(mu, dtype=float), g2, cfg.err_vars, cfg.noise_power, k2_gamma)
    lam = np.where((w > 0) & np.isfinite(v), v / np.where(w > 0, w**2, 1.0), np.nan)
    return DualState(dual_mu=np.asarray(mu, dtype=float), lam=lam, v=v)


def _trivial_outage_result(channel: ChannelState, cfg: SystemConfig, converged: bool = True):
    K, M = cfg.num_devices, cfg.num_subcarriers
    policy = TransmitPolicy(np.zeros((K, M)), np.zeros((K, M), dtype=complex))
    receive = ReceivePolicy(np.zeros((M, 1), dtype=complex))
    mse = metrics.per_subcarrier_mse(policy, channel, receive, cfg)
    report = SolveReport(
        per_subcarrier_mse=mse,
        average_mse=float(np.mean(mse)),
        outage_flags=metrics.outage_flags(mse, cfg.mse_threshold),
        dual_mu=np.zeros(K),
        iterations=0,
        converged=converged,
        duality_gap=0.0,
    )
    return policy, receive, report


def solve_siso_outage(
    channel: ChannelState,
    cfg: SystemConfig,
    ellipsoid_settings: Optional[EllipsoidSettings] = None,
) -> tuple[TransmitPolicy, ReceivePolicy, SolveReport]:
    """Global outage-probability minimizer for a single receive antenna."""
    channel.check_shape(cfg)
    if cfg.num_rx_antennas != 1:
        raise ValueError("solve_siso_outage requires a single receive antenna")
    K, M = cfg.num_devices, cfg.num_subcarriers
    budgets = cfg.budgets
    if 1.0 / K <= cfg.mse_threshold + metrics.OUTAGE_SLACK:
        return _trivial_outage_result(channel, cfg)

    gains = channel.scalar_gains()
    g2 = np.abs(gains) ** 2
    err, noise = cfg.err_vars, cfg.noise_power
    k2_gamma = K * K * cfg.mse_threshold

    floor1 = np.sum(_safe_div(err[:, None], g2 + err[:, None]), axis=0)
    if not np.any(k2_gamma > floor1 * (1 + 1e-12) + 1e-15):
        return _trivial_outage_result(channel, cfg)  # every subcarrier is a forced outage

    best_dual = -np.inf

    def dual(mu: np.ndarray) -> tuple[float, np.ndarray]:
        nonlocal best_dual
        amp, _, cost, _, feasible = _classify_free_w(mu, g2, err, noise, k2_gamma)
        value = float(np.sum(np.where(feasible, np.minimum(cost, 1.0), 1.0)) - mu @ budgets)
        best_dual = max(best_dual, value)
        served = feasible & (cost <= 1.0)
        return value, np.sum((amp * served[None, :]) ** 2, axis=1) - budgets

    settings = ellipsoid_settings or default_ellipsoid_settings(cfg)
    try:
        mu_hat, _, iterations = ellipsoid_maximize(dual, K, settings)
        converged = True
    except IterationLimitError as err_limit:
        mu_hat, iterations, converged = err_limit.best_mu, err_limit.iterations, False

    amp, w, cost, _, feasible = _classify_free_w(mu_hat, g2, err, noise, k2_gamma)
    served = repair_served_set(amp, cost, feasible, feasible & (cost <= 1.0), budgets)
    amp = amp * served[None, :]
    w = np.where(served, w, 0.0)

    receive = ReceivePolicy(w)
    policy = TransmitPolicy.from_amplitudes(amp, channel, receive)
    mse = metrics.per_subcarrier_mse(policy, channel, receive, cfg)
    outage_count = int(M - np.sum(served))
    report = SolveReport(
        per_subcarrier_mse=mse,
        average_mse=float(np.mean(mse)),
        outage_flags=~served,
        dual_mu=mu_hat,
        iterations=iterations,
        converged=converged,
        duality_gap=(outage_count - best_dual) / M,
    )
    return policy, receive, report
