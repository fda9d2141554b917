import numpy as np
import pytest

from aircomp import metrics, oracle
from aircomp.channel import substream
from aircomp.model import ReceivePolicy, SystemConfig, TransmitPolicy
from aircomp.siso import solve_siso_avg

from conftest import random_instance, unit_channel


def cfg_for(K=1, M=1, noise=1.0, P=(1.0,), err=(0.0,), threshold=0.5):
    return SystemConfig(K, M, 1, noise, tuple(P), tuple(err), threshold)


# -- grid search -------------------------------------------------------------

def test_grid_search_analytic_instance():
    res = oracle.grid_search_joint(unit_channel(1, 1), cfg_for())
    assert res.objective == pytest.approx(0.5, abs=1e-4)
    assert res.amplitudes[0, 0] == pytest.approx(1.0, abs=1e-2)
    assert res.w[0] == pytest.approx(0.5, abs=1e-2)


def test_grid_search_noise_dominated():
    # overwhelming noise: the all-off value 1/K is the best achievable (the
    # minimizer itself is a flat valley, so only value and w are pinned)
    res = oracle.grid_search_joint(unit_channel(1, 1), cfg_for(noise=1e6))
    assert res.objective == pytest.approx(1.0, abs=1e-3)
    assert res.w[0] == pytest.approx(0.0, abs=1e-3)


def test_grid_search_vanishing_power():
    res = oracle.grid_search_joint(unit_channel(1, 1), cfg_for(P=(1e-12,)))
    assert res.objective == pytest.approx(1.0, abs=1e-3)


def test_grid_search_dimension_cap():
    with pytest.raises(oracle.DimensionTooLargeError):
        oracle.grid_search_joint(unit_channel(3, 1), cfg_for(K=3, P=(1.0,) * 3, err=(0.0,) * 3))


def test_grid_search_never_beats_solver_by_much(rng):
    for seed in range(4):
        cfg, chan = random_instance(600 + seed, K=2, M=2)
        _, _, report = solve_siso_avg(chan, cfg)
        res = oracle.grid_search_joint(chan, cfg)
        assert report.average_mse <= res.objective + 1e-3
        assert res.objective <= report.average_mse + 1e-3


# -- minimum power sweep -----------------------------------------------------

def test_min_power_matches_analytic():
    res = oracle.min_power_sweep(np.array([1.0 + 0j]), None, 0.5, np.ones(1), cfg_for())
    assert res.feasible
    assert res.cost == pytest.approx(1.0, abs=1e-3)


def test_min_power_trivial_threshold():
    res = oracle.min_power_sweep(np.array([1.0 + 0j]), None, 1.2, np.ones(1), cfg_for(threshold=1.2))
    assert res.feasible
    assert res.cost == pytest.approx(0.0, abs=1e-9)


def test_min_power_below_floor_is_infeasible():
    cfg = cfg_for(err=(1.0,))
    res = oracle.min_power_sweep(np.array([1.0 + 0j]), None, 0.3, np.ones(1), cfg)
    assert not res.feasible
    assert res.cost == np.inf


def test_min_power_dimension_cap():
    with pytest.raises(oracle.DimensionTooLargeError):
        oracle.min_power_sweep(np.ones(3, dtype=complex), None, 0.5, np.ones(3), cfg_for(K=3, P=(1,)*3, err=(0,)*3))


# -- empirical MSE -----------------------------------------------------------

def test_empirical_perfect_inversion_is_zero():
    cfg = SystemConfig(1, 1, 1, 1e-12, (1.0,), (0.0,), 0.5)
    # noise must be positive per config, but the draw scale is negligible
    val = oracle.empirical_mse(
        np.array([1.0 + 0j]), np.array([1.0]), np.array([1.0 + 0j]), cfg, 2000, substream(1, "mc")
    )
    assert val <= 1e-10


def test_empirical_all_off_variance_of_average():
    cfg = cfg_for(K=2, err=(0.0, 0.0))
    val = oracle.empirical_mse(
        np.zeros(2, dtype=complex), np.array([0.0]), np.ones(2, dtype=complex), cfg, 100_000,
        substream(2, "mc"),
    )
    se = 0.5 / np.sqrt(100_000 / 8)
    assert abs(val - 0.5) <= 3 * se


def test_empirical_matches_analytic_instance():
    cfg = cfg_for()
    val = oracle.empirical_mse(
        np.array([1.0 + 0j]), np.array([0.5]), np.array([1.0 + 0j]), cfg, 1_000_000,
        substream(3, "mc"),
    )
    assert abs(val - 0.5) <= 0.005


def test_empirical_matches_analytic_random_policies(rng):
    for seed in range(5):
        cfg, chan = random_instance(700 + seed, K=2, M=1, N=2, err=(0.05, 0.5))
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        w *= rng.uniform(0.1, 0.6) / np.linalg.norm(w)
        receive = ReceivePolicy(w.reshape(1, 2))
        amp = rng.uniform(0, 1.0, (2, 1))
        policy = TransmitPolicy.from_amplitudes(amp, chan, receive)
        analytic = metrics.mse_subcarrier(amp[:, 0], chan.estimated_gains[:, 0, :], w, cfg)
        est = oracle.empirical_mse(
            policy.complex_coefficients[:, 0], w, chan.estimated_gains[:, 0, :], cfg,
            100_000, substream(800 + seed, "mc"),
        )
        se = analytic / np.sqrt(100_000 / 8)
        assert abs(est - analytic) <= 5 * max(se, 1e-4)


# -- KKT residuals -----------------------------------------------------------

def test_kkt_residuals_at_optimum():
    cfg, chan = random_instance(900, K=2, M=2)
    solution = solve_siso_avg(chan, cfg)
    rep = oracle.kkt_residuals(solution, chan, cfg, "best_effort")
    assert rep.stationarity <= 1e-8
    assert rep.slackness <= 1e-6 * min(cfg.power_budgets)
    assert rep.feasibility <= 1e-9


def test_kkt_detects_perturbed_beamformer():
    cfg, chan = random_instance(901, K=2, M=2)
    policy, receive, report = solve_siso_avg(chan, cfg)
    bent = ReceivePolicy(receive.beamformers + 0.1)
    rep = oracle.kkt_residuals((policy, bent, report), chan, cfg, "best_effort")
    assert rep.stationarity > 0.01


def test_kkt_residuals_outage_scenario(rng):
    from dataclasses import replace
    from aircomp.siso import solve_siso_outage

    cfg, chan = random_instance(902, K=2, M=4, err=(0.0, 0.3))
    floors = metrics.floor_report(chan, cfg).floor_full
    gamma = float(rng.uniform(np.min(floors) + 0.03, 1.0 / cfg.num_devices))
    cfg = replace(cfg, mse_threshold=gamma)
    solution = solve_siso_outage(chan, cfg)
    rep = oracle.kkt_residuals(solution, chan, cfg, "error_constrained")
    # served subcarriers sit on the threshold; budgets are never exceeded
    assert rep.stationarity <= 1e-6
    assert rep.feasibility <= 1e-9


def test_kkt_flags_power_violation():
    cfg = cfg_for(M=2)
    chan = unit_channel(1, 2)
    receive = ReceivePolicy(np.full((2, 1), 0.5, dtype=complex))
    policy = TransmitPolicy.from_amplitudes(np.ones((1, 2)), chan, receive)  # power 2 = 2P
    _, _, report = solve_siso_avg(chan, cfg)
    rep = oracle.kkt_residuals((policy, receive, report), chan, cfg, "best_effort")
    assert rep.feasibility == pytest.approx(1.0)  # excess equals P


# -- outage enumeration ------------------------------------------------------

def test_enumeration_trivial_cases():
    cfg = cfg_for(K=2, M=2, P=(1.0, 1.0), err=(0.0, 0.0), threshold=0.6)
    assert oracle.enumerate_min_outage(unit_channel(2, 2), cfg) == 0
    cfg = cfg_for(M=2, err=(1.0,), threshold=0.3)
    assert oracle.enumerate_min_outage(unit_channel(1, 2), cfg) == 2


def test_enumeration_budget_split_instance():
    cfg = cfg_for(M=2, P=(1.5,), threshold=0.5)
    assert oracle.enumerate_min_outage(unit_channel(1, 2), cfg) == 1
