"""Independent verification: exhaustive grid search on tiny instances,
minimum-power sweeps, a sample-level empirical MSE, and KKT residual checks.

Nothing here reuses the solvers' root conditions or dual machinery; the only
closed form admitted is the exact minimizer of the (quadratic in w) MSE for
fixed amplitudes, which is elementary calculus rather than solver logic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import metrics
from .model import ChannelState, ReceivePolicy, SystemConfig, TransmitPolicy
from .simo import _safe_div


class DimensionTooLargeError(ValueError):
    """Instance exceeds the oracle's intentional size caps."""


@dataclass(frozen=True)
class GridSpec:
    points: int = 64        # grid points per amplitude dimension, per pass
    refinements: int = 2    # zoom passes (+-2 coarse cells around the incumbent)

    def __post_init__(self):
        if self.points < 8:
            raise ValueError("points must be at least 8")


def _unscaled_mse_grid(b_list, w, g, err, noise):
    """Unscaled subcarrier MSE on broadcastable amplitude grids b_list (one
    array per device) and denoising grid w."""
    mis = 0.0
    csi = 0.0
    for k, b in enumerate(b_list):
        mis = mis + (w * g[k] * b - 1.0) ** 2
        csi = csi + err[k] * b**2
    return mis + w**2 * (csi + noise)


def _best_w_mse_grid(b_list, g, err, noise):
    """Unscaled subcarrier MSE minimized over the real denoising factor, plus
    the minimizer (quadratic in w, so the optimum is exact)."""
    num = 0.0
    den = noise
    for k, b in enumerate(b_list):
        num = num + g[k] * b
        den = den + b**2 * (g[k] ** 2 + err[k])
    w = num / den
    return _unscaled_mse_grid(b_list, w, g, err, noise), w


class GridSearchResult(NamedTuple):
    amplitudes: np.ndarray  # (K, M)
    w: np.ndarray           # (M,)
    objective: float        # average MSE (best_effort) or outage count (error_constrained)


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    return np.linspace(lo, max(hi, lo + 1e-12), n)


def grid_search_joint(
    channel: ChannelState,
    cfg: SystemConfig,
    grid: Optional[GridSpec] = None,
    scenario: str = "best_effort",
) -> GridSearchResult:
    """Exhaustive minimization of the scenario objective over an amplitude
    product grid, power-infeasible points discarded; at every grid point the
    denoising factor is minimized exactly (the objective is quadratic in it,
    so no search is needed and no w-grid noise can misrank amplitude cells).

    Capped at K <= 2, M <= 2, N_r = 1. The product grid is enumerated through
    per-subcarrier tables combined under the per-device power masks, which is
    exact and keeps memory bounded.
    """
    grid = grid or GridSpec()
    K, M = cfg.num_devices, cfg.num_subcarriers
    if K > 2 or M > 2 or cfg.num_rx_antennas != 1:
        raise DimensionTooLargeError("grid search capped at K <= 2, M <= 2, N_r = 1")
    channel.check_shape(cfg)
    g = np.abs(channel.scalar_gains())  # (K, M)
    err, noise = cfg.err_vars, cfg.noise_power
    n = grid.points
    outage_mode = scenario == "error_constrained"
    k2_gamma = K * K * cfg.mse_threshold

    b_lo = np.zeros((K, M))
    b_hi = np.sqrt(cfg.budgets)[:, None] * np.ones((K, M))
    b_cap = b_hi.copy()

    best = None  # (objective key, amp (K, M), w (M,))
    for _ in range(1 + grid.refinements):
        axes_b = [[_axis(b_lo[k, m], b_hi[k, m], n) for m in range(M)] for k in range(K)]

        tables = []      # per m: objective over amplitude indices, w minimized out
        w_choice = []    # per m: the minimizing denoising factor per cell
        for m in range(M):
            if K == 1:
                b_grids = [axes_b[0][m]]
            else:
                b_grids = [axes_b[0][m][:, None], axes_b[1][m][None, :]]
            vals, w_best = _best_w_mse_grid(b_grids, g[:, m], err, noise)
            tables.append(vals)
            w_choice.append(np.broadcast_to(w_best, vals.shape))

        if outage_mode:
            score = [np.where(t <= k2_gamma + 1e-9 * max(1.0, k2_gamma), 0.0, 1.0) for t in tables]
            tie = tables
        else:
            score = tables
            tie = None

        cand = _combine_subcarriers(score, tie, axes_b, cfg.budgets, K, M)
        if cand is None:
            continue
        key, b_idx = cand
        amp = np.array([[axes_b[k][m][b_idx[k][m]] for m in range(M)] for k in range(K)])
        w = np.array(
            [w_choice[m][tuple(b_idx[k][m] for k in range(K))] for m in range(M)]
        )
        if best is None or key < best[0]:
            best = (key, amp, w)

        # zoom +-2 cells around the incumbent, clipped to the original box
        steps_b = (b_hi - b_lo) / (n - 1)
        b_lo = np.clip(best[1] - 2 * steps_b, 0.0, b_cap)
        b_hi = np.clip(best[1] + 2 * steps_b, 0.0, b_cap)

    key, amp, w = best
    if outage_mode:
        objective = float(key[0])
    else:
        objective = float(key[0]) / (K * K * M)
    return GridSearchResult(amplitudes=amp, w=w, objective=objective)


def _combine_subcarriers(score, tie, axes_b, budgets, K, M):
    """Minimize sum_m score_m over the product of per-subcarrier grids under
    the per-device power constraints. Returns ((primary, tiebreak), indices)
    with indices[k][m] the winning amplitude index."""
    if M == 1:
        total = score[0]
        tie_total = tie[0] if tie is not None else None
        flat = np.argmin(total if tie is None else total + 1e-9 * tie_total / np.maximum(tie_total.max(), 1e-300))
        idx = np.unravel_index(flat, total.shape)
        primary = total[idx]
        tiebreak = tie_total[idx] if tie is not None else 0.0
        return (float(primary), float(tiebreak)), [[idx[k]] for k in range(K)]

    if K == 1:
        v0 = axes_b[0][0] ** 2
        v1 = axes_b[0][1] ** 2
        feasible = v0[:, None] + v1[None, :] <= budgets[0] + 1e-12
        total = score[0][:, None] + score[1][None, :]
        total = np.where(feasible, total, np.inf)
        if tie is not None:
            tie_total = np.where(feasible, tie[0][:, None] + tie[1][None, :], np.inf)
            total = total + 1e-9 * np.where(np.isfinite(tie_total), tie_total, 0.0) / max(
                1.0, np.nanmax(np.where(np.isfinite(tie_total), tie_total, np.nan))
            )
        if not np.any(np.isfinite(total)):
            return None
        flat = np.argmin(total)
        i0, i1 = np.unravel_index(flat, total.shape)
        primary = score[0][i0] + score[1][i1]
        tiebreak = (tie[0][i0] + tie[1][i1]) if tie is not None else 0.0
        return (float(primary), float(tiebreak)), [[int(i0), int(i1)]]

    # K == 2, M == 2: chunk over the first index to bound memory
    n = score[0].shape[0]
    p1 = axes_b[0][0] ** 2
    p1b = axes_b[0][1] ** 2
    p2 = axes_b[1][0] ** 2
    p2b = axes_b[1][1] ** 2
    mask2 = p2[:, None] + p2b[None, :] <= budgets[1] + 1e-12     # (j0, j1)
    best_key = None
    best_idx = None
    chunk = max(1, 2**22 // (n * n * n))
    for start in range(0, n, chunk):
        stop = min(n, start + chunk)
        mask1 = p1[start:stop, None] + p1b[None, :] <= budgets[0] + 1e-12  # (i0, i1)
        total = score[0][start:stop, :, None, None] + score[1][None, None, :, :]
        total = np.where(mask1[:, None, :, None], total, np.inf)
        total = np.where(mask2[None, :, None, :], total, np.inf)
        if tie is not None:
            tie_total = tie[0][start:stop, :, None, None] + tie[1][None, None, :, :]
            total = total + 1e-9 * tie_total / max(1.0, float(np.max(tie[0])) + float(np.max(tie[1])))
        if not np.any(np.isfinite(total)):
            continue
        flat = np.argmin(total)
        i0, j0, i1, j1 = np.unravel_index(flat, total.shape)
        primary = score[0][start + i0, j0] + score[1][i1, j1]
        tiebreak = (tie[0][start + i0, j0] + tie[1][i1, j1]) if tie is not None else 0.0
        key = (float(primary), float(tiebreak))
        if best_key is None or key < best_key:
            best_key = key
            best_idx = [[int(start + i0), int(i1)], [int(j0), int(j1)]]
    if best_key is None:
        return None
    return best_key, best_idx


# ---------------------------------------------------------------------------
# Minimum priced power per subcarrier
# ---------------------------------------------------------------------------

class MinPowerResult(NamedTuple):
    feasible: bool
    cost: float             # minimal sum_k mu_k amplitude^2 (inf if infeasible)
    amplitudes: np.ndarray  # (K,)
    w: float


def min_power_sweep(
    gains_m: np.ndarray,
    w: Optional[float],
    threshold: float,
    mu: np.ndarray,
    cfg: SystemConfig,
    grid: Optional[GridSpec] = None,
) -> MinPowerResult:
    """Sweep amplitudes for the least priced power meeting the MSE constraint
    on one subcarrier, with the denoising factor either fixed or inner-optimal
    (exact quadratic minimization). Capped at K <= 2.

    The sweep range starts at a few inverse channel magnitudes per device and
    doubles whenever the incumbent presses the upper edge.
    """
    grid = grid or GridSpec()
    g = np.abs(np.asarray(gains_m)).reshape(-1)
    K = len(g)
    if K > 2:
        raise DimensionTooLargeError("min_power_sweep capped at K <= 2")
    mu = np.asarray(mu, dtype=float)
    err, noise = cfg.err_vars, cfg.noise_power
    k2_gamma = K * K * threshold
    slack = 1e-9 * max(1.0, k2_gamma)
    n = grid.points

    lo = np.zeros(K)
    hi = 6.0 / np.maximum(g, 0.2)
    for _ in range(4):  # expand if the optimum presses the edge
        res = _sweep_pass(g, err, noise, mu, k2_gamma + slack, w, lo, hi, n, grid.refinements)
        if res is None:
            return MinPowerResult(False, np.inf, np.zeros(K), 0.0)
        cost, amp, w_best, at_edge = res
        if not at_edge:
            return MinPowerResult(True, cost, amp, w_best)
        hi = hi * 2.0
    return MinPowerResult(True, cost, amp, w_best)


def _sweep_pass(g, err, noise, mu, limit_u, w_fixed, lo, hi, n, refinements):
    K = len(g)
    best = None
    lo, hi = lo.copy(), hi.copy()
    cap_lo, cap_hi = lo.copy(), hi.copy()
    for _ in range(1 + refinements):
        axes = [_axis(lo[k], hi[k], n) for k in range(K)]
        if K == 1:
            b_grids = [axes[0]]
        else:
            b_grids = [axes[0][:, None], axes[1][None, :]]
        if w_fixed is None:
            vals, w_grid = _best_w_mse_grid(b_grids, g, err, noise)
        else:
            vals = _unscaled_mse_grid(b_grids, float(w_fixed), g, err, noise)
            w_grid = np.broadcast_to(float(w_fixed), vals.shape)
        feasible = vals <= limit_u
        if not np.any(feasible):
            if best is None:
                return None
            break
        cost = sum(mu[k] * b_grids[k] ** 2 for k in range(K)) + 0.0 * vals
        cost = np.where(feasible, cost, np.inf)
        flat = np.argmin(cost)
        idx = np.unravel_index(flat, cost.shape)
        amp = np.array([axes[k][idx[k]] for k in range(K)])
        entry = (float(cost[idx]), amp, float(np.asarray(w_grid)[idx]))
        if best is None or entry[0] < best[0]:
            best = entry
        steps = (hi - lo) / (n - 1)
        lo = np.clip(best[1] - 2 * steps, cap_lo, cap_hi)
        hi = np.clip(best[1] + 2 * steps, cap_lo, cap_hi)
    cost, amp, w_best = best
    at_edge = bool(np.any(amp >= cap_hi - (cap_hi - cap_lo) / (n - 1)))
    return cost, amp, w_best, at_edge


# ---------------------------------------------------------------------------
# Outage enumeration (independent check for the on-off solver)
# ---------------------------------------------------------------------------

def enumerate_min_outage(
    channel: ChannelState, cfg: SystemConfig, grid: Optional[GridSpec] = None
) -> int:
    """Minimum achievable outage count by explicit on/off enumeration with
    per-subcarrier sweeps. Capped at K <= 2, M <= 2, N_r = 1."""
    grid = grid or GridSpec()
    K, M = cfg.num_devices, cfg.num_subcarriers
    if K > 2 or M > 2 or cfg.num_rx_antennas != 1:
        raise DimensionTooLargeError("outage enumeration capped at K <= 2, M <= 2, N_r = 1")
    g = np.abs(channel.scalar_gains())
    err, noise = cfg.err_vars, cfg.noise_power
    k2_gamma = K * K * cfg.mse_threshold
    slack = 1e-9 * max(1.0, k2_gamma)
    n = grid.points

    # per-subcarrier feasibility tables over amplitude grids capped by budget
    axes = [[_axis(0.0, np.sqrt(cfg.budgets[k]), n) for m in range(M)] for k in range(K)]
    feas = []
    for m in range(M):
        if K == 1:
            b_grids = [axes[0][m]]
        else:
            b_grids = [axes[0][m][:, None], axes[1][m][None, :]]
        vals, _ = _best_w_mse_grid(b_grids, g[:, m], err, noise)
        feas.append(vals <= k2_gamma + slack)

    def servable_alone(m: int) -> bool:
        return bool(np.any(feas[m]))

    if M == 1:
        return 0 if servable_alone(0) else 1

    # serve both: power couples the subcarriers per device
    both = False
    if servable_alone(0) and servable_alone(1):
        if K == 1:
            sweep = [
                min_power_sweep(channel.scalar_gains()[:, m], None, cfg.mse_threshold, np.ones(1), cfg, grid)
                for m in range(M)
            ]
            both = all(s.feasible for s in sweep) and sum(s.cost for s in sweep) <= cfg.budgets[0] + 1e-9
        else:
            p1 = [axes[0][m] ** 2 for m in range(M)]
            p2 = [axes[1][m] ** 2 for m in range(M)]
            chunk = max(1, 2**22 // (n * n * n))
            for start in range(0, n, chunk):
                stop = min(n, start + chunk)
                ok = feas[0][start:stop, :, None, None] & feas[1][None, None, :, :]
                ok &= (p1[0][start:stop, None, None, None] + p1[1][None, None, :, None]) <= cfg.budgets[0] + 1e-12
                ok &= (p2[0][None, :, None, None] + p2[1][None, None, None, :]) <= cfg.budgets[1] + 1e-12
                if np.any(ok):
                    both = True
                    break
    if both:
        return 0
    if servable_alone(0) or servable_alone(1):
        return 1
    return 2


# ---------------------------------------------------------------------------
# Sample-level empirical MSE
# ---------------------------------------------------------------------------

def empirical_mse(
    coefficients_m: np.ndarray,
    w_m: np.ndarray,
    gains_m: np.ndarray,
    cfg: SystemConfig,
    num_samples: int,
    rng: np.random.Generator,
) -> float:
    """Monte Carlo estimate of one subcarrier's computation MSE.

    Draws unit-variance CSCG sources, estimation errors and receiver noise,
    forms the recovered average from the received superposition and compares
    it with the true average; the analytic MSE formula never enters.
    """
    b = np.asarray(coefficients_m, dtype=complex).reshape(-1)
    K = len(b)
    gains = np.asarray(gains_m, dtype=complex).reshape(K, -1)
    N = gains.shape[1]
    w = np.atleast_1d(np.asarray(w_m)).astype(complex).reshape(N)
    err = cfg.err_vars
    total = 0.0
    done = 0
    chunk = max(1, min(num_samples, 200_000 // max(K * N, 1)))
    while done < num_samples:
        S = min(chunk, num_samples - done)
        s = (rng.standard_normal((S, K)) + 1j * rng.standard_normal((S, K))) / np.sqrt(2.0)
        e = (rng.standard_normal((S, K, N)) + 1j * rng.standard_normal((S, K, N))) / np.sqrt(2.0)
        e *= np.sqrt(err)[None, :, None]
        z = (rng.standard_normal((S, N)) + 1j * rng.standard_normal((S, N))) * np.sqrt(
            cfg.noise_power / 2.0
        )
        true_channel = gains[None, :, :] - e              # h = h_hat - e
        rx = np.einsum("skn,k,sk->sn", true_channel, b, s) + z
        recovered = (w.conj() @ rx.T) / K
        truth = np.mean(s, axis=1)
        total += float(np.sum(np.abs(recovered - truth) ** 2))
        done += S
    return total / num_samples


# ---------------------------------------------------------------------------
# KKT residuals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KktReport:
    stationarity: float  # max residual of the scenario's stationarity equalities
    slackness: float     # max |mu_k (power_k - P_k)|
    feasibility: float   # max positive power excess

    @property
    def max_residual(self) -> float:
        return max(self.stationarity, self.slackness, self.feasibility)


def kkt_residuals(
    solution: tuple[TransmitPolicy, ReceivePolicy, "object"],
    channel: ChannelState,
    cfg: SystemConfig,
    scenario: str = "best_effort",
) -> KktReport:
    """Residuals of the optimality system at a returned solution: the
    denoising-factor root condition and amplitude formula (best_effort) or
    the tightness of served subcarriers at the threshold (error_constrained),
    plus complementary slackness and power feasibility."""
    from .siso import _stationarity_residual  # local: avoids a module cycle

    policy, receive, report = solution
    mu = np.asarray(report.dual_mu, dtype=float)
    power = policy.power_used()
    budgets = cfg.budgets
    slackness = float(np.max(np.abs(mu * (power - budgets)))) if len(mu) else 0.0
    feasibility = float(np.max(np.maximum(power - budgets, 0.0)))

    g2 = np.abs(channel.scalar_gains()) ** 2 if cfg.num_rx_antennas == 1 else None
    if scenario == "best_effort":
        if g2 is None:
            raise ValueError("KKT residuals implemented for the single-antenna scenario")
        w = receive.scalars()
        stationarity = _stationarity_residual(w, mu, g2, cfg.err_vars, cfg.noise_power)
        den = (w**2)[None, :] * (g2 + cfg.err_vars[:, None]) + mu[:, None]
        formula = _safe_div(w[None, :] * np.sqrt(g2), den)
        stationarity = max(stationarity, float(np.max(np.abs(policy.amplitudes - formula))))
    elif scenario == "error_constrained":
        mse = metrics.per_subcarrier_mse(policy, channel, receive, cfg)
        served = ~np.asarray(report.outage_flags, dtype=bool)
        # zero-power served subcarriers (threshold met by averaging alone)
        # are interior-slack, not boundary points
        served &= np.any(policy.amplitudes > 0, axis=0)
        if np.any(served):
            stationarity = float(np.max(np.abs(mse[served] - cfg.mse_threshold)))
        else:
            stationarity = 0.0
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    return KktReport(stationarity=stationarity, slackness=slackness, feasibility=feasibility)
