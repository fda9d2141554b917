"""Alternating-optimization solvers for the multi-antenna case.

Average-MSE: alternate the per-subcarrier sum-MMSE receive update with the
per-device regularized-channel-inversion transmit update (power price found
by bisection). Outage: alternate the receive update with a dual-ascent
transmit step that decides per subcarrier between serving (on-off regularized
inversion) and conceding the outage.

Both solvers start from the better of the two heuristic benchmark policies,
so by the descent property the returned objective never loses to either
benchmark on the same realization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import metrics
from .model import ChannelState, ReceivePolicy, SolveReport, SystemConfig, TransmitPolicy, align_phases
from .optim import (
    EllipsoidSettings,
    IterationLimitError,
    bisect_decreasing_batch,
    ellipsoid_maximize,
)


@dataclass(frozen=True)
class AoSettings:
    """Alternating-optimization controls. max_iters defaults to 200 for the
    average-MSE solver and 100 for the outage solver when left None."""

    max_iters: Optional[int] = None
    rel_obj_tol: float = 1e-10
    init_mode: str = "best_of_benchmarks"  # equal_power | channel_inversion | best_of_benchmarks

    def __post_init__(self):
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.init_mode not in ("equal_power", "channel_inversion", "best_of_benchmarks"):
            raise ValueError(f"unknown init_mode {self.init_mode!r}")


def default_ellipsoid_settings(cfg: SystemConfig) -> EllipsoidSettings:
    """Initial ball sized so that dual optima (which scale like
    subcarrier-count over budget) are always contained."""
    radius = max(10.0, 10.0 * cfg.num_subcarriers / min(cfg.power_budgets))
    return EllipsoidSettings(initial_radius=radius)


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    num_b, den_b = np.broadcast_arrays(np.asarray(num, dtype=float), np.asarray(den, dtype=float))
    out = np.zeros(num_b.shape)
    ok = den_b > 0
    out[ok] = num_b[ok] / den_b[ok]
    return out


def effective_gains(receive: ReceivePolicy, channel: ChannelState) -> tuple[np.ndarray, np.ndarray]:
    """(|w^H h_hat| of shape (K, M), ||w||^2 of shape (M,))."""
    w = receive.beamformers
    inner = np.abs(np.einsum("mn,kmn->km", w.conj(), channel.estimated_gains))
    w2 = np.sum(np.abs(w) ** 2, axis=1)
    return inner, w2


def aligned_average_mse(
    amplitudes: np.ndarray, channel: ChannelState, receive: ReceivePolicy, cfg: SystemConfig
) -> float:
    """Average MSE under phase-aligned coefficients, without building policies."""
    mis, noi, csi = metrics._terms_all(
        amplitudes, channel.estimated_gains, receive.beamformers, cfg.err_vars, cfg.noise_power
    )
    return float(np.mean(mis + noi + csi)) / cfg.num_devices**2


# ---------------------------------------------------------------------------
# Receive update (sum-MMSE)
# ---------------------------------------------------------------------------

def mmse_receive_update(
    amplitudes: np.ndarray,
    channel: ChannelState,
    cfg: SystemConfig,
    previous: Optional[ReceivePolicy] = None,
) -> ReceivePolicy:
    """Per-subcarrier MMSE beamformer given the transmit amplitudes.

    Coefficients are phase-aligned to the previous beamformer (phase 0 when
    none exists yet). Subcarriers where every device is silent keep their
    previous beamformer; the matrix is Hermitian positive definite since the
    noise power is positive, so a linear solve is used, never an inverse.
    """
    amp = np.asarray(amplitudes, dtype=float)
    gains = channel.estimated_gains
    K, M, N = gains.shape
    if previous is not None:
        coef = align_phases(amp, channel, previous)
    else:
        coef = amp.astype(complex)

    amp2 = amp**2
    stacked = gains.transpose(1, 2, 0)                      # (M, N, K)
    A = (stacked * amp2.T[:, None, :]) @ stacked.conj().transpose(0, 2, 1)
    diag = amp2.T @ cfg.err_vars + cfg.noise_power          # (M,)
    A[:, np.arange(N), np.arange(N)] += diag[:, None]
    rhs = (stacked @ coef.T[:, :, None])[..., 0]            # (M, N)
    w = np.linalg.solve(A, rhs[..., None])[..., 0]

    silent = ~np.any(amp > 0, axis=0)
    if np.any(silent):
        if previous is not None:
            w[silent] = previous.beamformers[silent]
        else:
            w[silent] = 0.0
    return ReceivePolicy(w)


# ---------------------------------------------------------------------------
# Transmit update, average-MSE scenario
# ---------------------------------------------------------------------------

def _transmit_amplitudes_kkt(
    g_eff: np.ndarray,     # (K, M) = |w^H h_hat|
    w2: np.ndarray,        # (M,)  = ||w||^2
    err_vars: np.ndarray,  # (K,)
    budgets: np.ndarray,   # (K,)
    iters: int = 100,
) -> tuple[np.ndarray, np.ndarray]:
    """Regularized channel inversion with per-device power prices.

    amplitude = g / (g^2 + ||w||^2 s + mu), where mu = 0 if the unpriced
    solution already fits the budget and otherwise solves the power equality
    by bisection. The feasible endpoint of the final bracket is returned, so
    the budget is never exceeded.
    """
    denom0 = g_eff**2 + w2[None, :] * err_vars[:, None]
    base = _safe_div(g_eff, denom0)
    used0 = np.sum(base**2, axis=1)
    mu = np.zeros(len(budgets))
    amp = base.copy()

    need = used0 > budgets
    if np.any(need):
        g_n = g_eff[need]
        d_n = denom0[need]
        P_n = budgets[need]

        def power(mu_vec: np.ndarray) -> np.ndarray:
            return np.sum((g_n / (d_n + mu_vec[:, None])) ** 2, axis=1)

        hi = np.sqrt(np.sum(g_n**2, axis=1) / P_n)
        _, mu_hi = bisect_decreasing_batch(power, P_n, hi=hi, iters=iters)
        mu[need] = mu_hi
        amp[need] = g_n / (d_n + mu_hi[:, None])
    return amp, mu


def simo_transmit_update_avg(
    receive: ReceivePolicy, channel: ChannelState, cfg: SystemConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Optimal amplitudes for fixed beamformers; returns (amplitudes, mu)."""
    g_eff, w2 = effective_gains(receive, channel)
    return _transmit_amplitudes_kkt(g_eff, w2, cfg.err_vars, cfg.budgets)


def _init_policy(channel: ChannelState, cfg: SystemConfig, mode: str, scenario: str):
    from . import benchmarks  # deferred: benchmarks builds on this module

    candidates = []
    if mode in ("equal_power", "best_of_benchmarks"):
        candidates.append(benchmarks.equal_power_policy(channel, cfg))
    if mode in ("channel_inversion", "best_of_benchmarks"):
        candidates.append(benchmarks.channel_inversion_policy(channel, cfg))

    def score(pair):
        tx, rx = pair
        mse = metrics.per_subcarrier_mse(tx, channel, rx, cfg)
        if scenario == "error_constrained":
            flags = metrics.outage_flags(mse, cfg.mse_threshold)
            return (int(np.sum(flags)), float(np.mean(mse)))
        return (float(np.mean(mse)),)

    return min(candidates, key=score)


def solve_simo_avg(
    channel: ChannelState, cfg: SystemConfig, settings: Optional[AoSettings] = None
) -> tuple[TransmitPolicy, ReceivePolicy, SolveReport]:
    """Average-MSE minimization by alternating optimization.

    The objective history is monotone nonincreasing (each half-step is an
    exact minimizer); it is recorded in the report's objective_trace.
    """
    settings = settings or AoSettings()
    max_iters = settings.max_iters or 200
    channel.check_shape(cfg)

    tx0, receive = _init_policy(channel, cfg, settings.init_mode, "best_effort")
    amp = tx0.amplitudes
    mu = np.zeros(cfg.num_devices)
    trace = [aligned_average_mse(amp, channel, receive, cfg)]

    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        amp, mu = simo_transmit_update_avg(receive, channel, cfg)
        receive = mmse_receive_update(amp, channel, cfg, previous=receive)
        obj = aligned_average_mse(amp, channel, receive, cfg)
        prev = trace[-1]
        if obj > prev + 1e-12:
            raise ArithmeticError(f"objective increased: {prev} -> {obj}")
        trace.append(obj)
        if prev - obj <= settings.rel_obj_tol * max(prev, 1e-300):
            converged = True
            break

    policy = TransmitPolicy.from_amplitudes(amp, channel, receive)
    mse = metrics.per_subcarrier_mse(policy, channel, receive, cfg)
    report = SolveReport(
        per_subcarrier_mse=mse,
        average_mse=float(np.mean(mse)),
        outage_flags=metrics.outage_flags(mse, cfg.mse_threshold),
        dual_mu=mu,
        iterations=iterations,
        converged=converged,
        duality_gap=None,
        objective_trace=np.asarray(trace),
    )
    return policy, receive, report


# ---------------------------------------------------------------------------
# Outage scenario: dual-ascent transmit step under fixed beamformers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OutageStepResult:
    amplitudes: np.ndarray    # (K, M), zeros on conceded subcarriers
    dual_mu: np.ndarray       # (K,)
    served: np.ndarray        # (M,) bool
    forced: np.ndarray        # (M,) bool, threshold below the fixed-w floor
    dual_value: float         # best dual objective seen (count units)
    iterations: int
    converged: bool


def _classify_fixed_w(
    mu: np.ndarray,
    g_eff: np.ndarray,      # (K, M)
    w2: np.ndarray,         # (M,)
    err_vars: np.ndarray,
    target_u: np.ndarray,   # (M,) = K^2 Gamma - ||w||^2 sigma_z^2
    K: int,
):
    """Per-subcarrier minimum weighted power meeting the MSE constraint under
    fixed beamformers; returns (amplitudes, cost, feasible) with cost 0 where
    the constraint is free and inf where it cannot be met."""
    Kdev, M = g_eff.shape
    a = w2[None, :] * err_vars[:, None]                    # ||w||^2 s, (K, M)
    floor_terms = _safe_div(a, g_eff**2 + a)               # (K, M)
    floor1 = np.sum(floor_terms, axis=0)                   # K^2 * fixed-w floor
    active = mu > 0
    floor2 = np.sum(np.where(active[:, None], 1.0, floor_terms), axis=0)

    feasible = target_u > floor1 * (1 + 1e-12) + 1e-15
    free = feasible & (target_u >= K)
    partial = feasible & ~free & (target_u >= floor2 - 1e-12 * np.maximum(1.0, floor2))
    formula = feasible & ~free & ~partial

    amp = np.zeros_like(g_eff)
    cost = np.where(feasible, 0.0, np.inf)

    if np.any(partial):
        cols = np.where(partial)[0]
        base = _safe_div(g_eff[:, cols], g_eff[:, cols] ** 2 + a[:, cols])
        amp[:, cols] = np.where(active[:, None], 0.0, base)

    if np.any(formula):
        cols = np.where(formula)[0]
        g_f = g_eff[:, cols]
        a_f = a[:, cols]
        mu_col = mu[:, None]
        tgt = target_u[cols]

        def constraint(lam: np.ndarray) -> np.ndarray:
            r = mu_col / lam[None, :]  # lam > 0 along the whole bisection path
            num = (a_f + r) ** 2 + g_f**2 * a_f
            den = (g_f**2 + a_f + r) ** 2
            terms = np.where(den > 0, num / np.where(den > 0, den, 1.0), 1.0)
            return np.sum(terms, axis=0)

        lo, hi = bisect_decreasing_batch(constraint, tgt, iters=100)
        lam = 0.5 * (lo + hi)
        r = mu_col / lam[None, :]
        amp[:, cols] = _safe_div(g_f, g_f**2 + a_f + r)
        cost[cols] = np.sum(mu_col * amp[:, cols] ** 2, axis=0)
    return amp, cost, feasible


class SimoOutageCandidate(NamedTuple):
    """Lowest-priced-power way to serve one subcarrier under a fixed
    beamformer; cost is inf when the threshold sits at or below the
    fixed-beamformer floor plus the noise term."""

    amplitudes: np.ndarray  # (K,)
    cost: float             # sum_k mu_k * amplitude^2
    feasible: bool


def simo_outage_subcarrier(
    mu: np.ndarray, w_m: np.ndarray, gains_m: np.ndarray, cfg: SystemConfig
) -> SimoOutageCandidate:
    """Solve the priced minimum-power problem for one subcarrier with the
    beamformer fixed (thresholds shifted by its noise term)."""
    mu = np.asarray(mu, dtype=float)
    w = np.atleast_1d(np.asarray(w_m)).astype(complex)
    gains = np.asarray(gains_m, dtype=complex).reshape(cfg.num_devices, -1)
    g_eff = np.abs(gains @ w.conj())[:, None]           # (K, 1)
    w2 = np.array([float(np.sum(np.abs(w) ** 2))])
    target_u = cfg.num_devices**2 * cfg.mse_threshold - w2 * cfg.noise_power
    amp, cost, feasible = _classify_fixed_w(mu, g_eff, w2, cfg.err_vars, target_u, cfg.num_devices)
    return SimoOutageCandidate(amplitudes=amp[:, 0], cost=float(cost[0]), feasible=bool(feasible[0]))


def repair_served_set(
    amplitudes: np.ndarray,  # (K, M) candidate amplitudes
    cost: np.ndarray,        # (M,) weighted power of serving each subcarrier
    candidates: np.ndarray,  # (M,) bool, subcarriers that can be served at all
    served: np.ndarray,      # (M,) bool, initial on/off decision
    budgets: np.ndarray,
) -> np.ndarray:
    """Make the served set power-feasible, then grow it greedily.

    At a dual kink the cost-comparison decision can overshoot the budget (or
    park just past it and serve nothing), so: drop served subcarriers in
    decreasing cost order until all budgets hold, then re-add candidate
    subcarriers in increasing cost order while they fit. Serving one more
    subcarrier always improves the primal objective, so additions are free.
    """
    served = served.copy()
    power = amplitudes**2
    used = power[:, served].sum(axis=1)

    while np.any(used > budgets + 1e-12) and np.any(served):
        idx = np.where(served)[0]
        relief = power[:, idx].sum(axis=0)
        order = np.lexsort((relief, cost[idx]))  # primary: cost, tie: freed power
        drop = idx[order[-1]]
        served[drop] = False
        used -= power[:, drop]

    for m in np.argsort(cost, kind="stable"):
        if served[m] or not candidates[m] or not np.isfinite(cost[m]):
            continue
        if np.all(used + power[:, m] <= budgets + 1e-12):
            served[m] = True
            used += power[:, m]
    return served


def simo_outage_transmit_step(
    receive: ReceivePolicy,
    channel: ChannelState,
    cfg: SystemConfig,
    ellipsoid_settings: Optional[EllipsoidSettings] = None,
) -> OutageStepResult:
    """Minimize the outage count over amplitudes under fixed beamformers by
    dual ascent over the power prices, then recover a feasible served set."""
    K = cfg.num_devices
    budgets = cfg.budgets
    g_eff, w2 = effective_gains(receive, channel)
    target_u = K * K * cfg.mse_threshold - w2 * cfg.noise_power

    a = w2[None, :] * cfg.err_vars[:, None]
    floor1 = np.sum(_safe_div(a, g_eff**2 + a), axis=0)
    forced = ~(target_u > floor1 * (1 + 1e-12) + 1e-15)
    n_forced = int(np.sum(forced))

    best_dual = -np.inf

    def dual(mu: np.ndarray) -> tuple[float, np.ndarray]:
        nonlocal best_dual
        amp, cost, feasible = _classify_fixed_w(mu, g_eff, w2, cfg.err_vars, target_u, K)
        val_m = np.where(feasible, np.minimum(cost, 1.0), 1.0)
        value = float(np.sum(val_m) - mu @ budgets)
        served = feasible & (cost <= 1.0)
        sub = np.sum((amp * served[None, :]) ** 2, axis=1) - budgets
        best_dual = max(best_dual, value)
        return value, sub

    settings = ellipsoid_settings or default_ellipsoid_settings(cfg)
    try:
        mu_hat, _, iters = ellipsoid_maximize(dual, K, settings)
        converged = True
    except IterationLimitError as err:
        mu_hat, iters, converged = err.best_mu, err.iterations, False

    amp, cost, feasible = _classify_fixed_w(mu_hat, g_eff, w2, cfg.err_vars, target_u, K)
    served = repair_served_set(amp, cost, feasible, feasible & (cost <= 1.0), budgets)
    amp = amp * served[None, :]
    return OutageStepResult(
        amplitudes=amp,
        dual_mu=mu_hat,
        served=served,
        forced=forced,
        dual_value=best_dual,
        iterations=iters,
        converged=converged,
    )


def solve_simo_outage(
    channel: ChannelState, cfg: SystemConfig, settings: Optional[AoSettings] = None
) -> tuple[TransmitPolicy, ReceivePolicy, SolveReport]:
    """Outage-probability minimization by alternating the dual-ascent transmit
    step with the sum-MMSE receive update. The outage count can cycle, so the
    best iterate (fewest outages, then least priced power) is kept and the
    loop stops once the count has been stable for three iterations."""
    settings = settings or AoSettings()
    max_iters = settings.max_iters or 100
    channel.check_shape(cfg)
    K, M = cfg.num_devices, cfg.num_subcarriers

    if 1.0 / K <= cfg.mse_threshold + metrics.OUTAGE_SLACK:
        # averaging alone meets the threshold on every subcarrier
        policy = TransmitPolicy(np.zeros((K, M)), np.zeros((K, M), dtype=complex))
        receive = ReceivePolicy(np.zeros((M, cfg.num_rx_antennas), dtype=complex))
        mse = metrics.per_subcarrier_mse(policy, channel, receive, cfg)
        report = SolveReport(
            per_subcarrier_mse=mse,
            average_mse=float(np.mean(mse)),
            outage_flags=metrics.outage_flags(mse, cfg.mse_threshold),
            dual_mu=np.zeros(K),
            iterations=0,
            converged=True,
            duality_gap=0.0,
        )
        return policy, receive, report

    tx0, receive = _init_policy(channel, cfg, settings.init_mode, "error_constrained")
    best = None  # (count, priced_power, amplitudes, receive, mu, served, gap)
    prev_count = None
    stable = 0
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        step = simo_outage_transmit_step(receive, channel, cfg)
        count = int(M - np.sum(step.served))
        priced = float(step.dual_mu @ np.sum(step.amplitudes**2, axis=1))
        gap = (count - step.dual_value) / M
        key = (count, priced)
        if best is None or key < best[0]:
            best = (key, step.amplitudes, receive, step.dual_mu, step.served, gap)
        if prev_count is not None and count == prev_count:
            stable += 1
            if stable >= 3:
                converged = True
                break
        else:
            stable = 0
        prev_count = count
        receive = mmse_receive_update(step.amplitudes, channel, cfg, previous=receive)

    _, amp, receive, mu_hat, served, gap = best
    w = receive.beamformers.copy()
    w[~served] = 0.0  # conceded subcarriers fall back to the bare average
    receive = ReceivePolicy(w)
    policy = TransmitPolicy.from_amplitudes(amp, channel, receive)
    mse = metrics.per_subcarrier_mse(policy, channel, receive, cfg)
    report = SolveReport(
        per_subcarrier_mse=mse,
        average_mse=float(np.mean(mse)),
        outage_flags=~served,
        dual_mu=mu_hat,
        iterations=iterations,
        converged=converged,
        duality_gap=gap,
    )
    return policy, receive, report
