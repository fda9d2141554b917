import numpy as np
import pytest

from aircomp import benchmarks, metrics
from aircomp.model import SystemConfig
from aircomp.siso import solve_siso_avg, solve_siso_outage

from conftest import random_instance, unit_channel


def cfg_for(K=1, M=1, N=1, noise=1.0, P=(1.0,), err=(0.0,), threshold=0.5):
    return SystemConfig(K, M, N, noise, tuple(P), tuple(err), threshold)


def test_equal_power_splits_budget():
    cfg = cfg_for(M=4)
    policy, _ = benchmarks.equal_power_policy(unit_channel(1, 4), cfg)
    assert np.allclose(policy.amplitudes, 0.5)
    assert policy.power_used()[0] == pytest.approx(1.0)


def test_equal_power_heterogeneous_budgets():
    cfg = cfg_for(K=2, P=(1.0, 4.0), err=(0.0, 0.0))
    policy, _ = benchmarks.equal_power_policy(unit_channel(2, 1), cfg)
    assert np.allclose(policy.amplitudes[:, 0], [1.0, 2.0])


def test_channel_inversion_weakest_reference():
    gains = np.zeros((2, 1, 1), dtype=complex)
    gains[0, 0, 0] = 1.0
    gains[1, 0, 0] = 2.0
    cfg = cfg_for(K=2, P=(1.0, 1.0), err=(0.0, 0.0))
    policy, _ = benchmarks.channel_inversion_policy(unit_channel(2, 1, gains=gains), cfg)
    assert np.allclose(policy.amplitudes[:, 0], [1.0, 0.5])


def test_channel_inversion_identical_channels_matches_equal_power():
    cfg = cfg_for(K=3, M=2, P=(1.0,) * 3, err=(0.0,) * 3)
    ci, _ = benchmarks.channel_inversion_policy(unit_channel(3, 2), cfg)
    assert np.allclose(ci.amplitudes, np.sqrt(1.0 / 2))


def test_channel_inversion_error_variance_shrinks_amplitudes():
    chan = unit_channel(2, 1)
    base = benchmarks.channel_inversion_policy(chan, cfg_for(K=2, P=(1.0, 1.0), err=(0.0, 0.0)))[0]
    noisy = benchmarks.channel_inversion_policy(chan, cfg_for(K=2, P=(1.0, 1.0), err=(0.5, 0.5)))[0]
    assert np.all(noisy.amplitudes < base.amplitudes)


def test_benchmarks_power_feasible(rng):
    for seed in range(4):
        cfg, chan = random_instance(500 + seed, K=3, M=4, N=2, err=(0.0, 0.6))
        for maker in (benchmarks.equal_power_policy, benchmarks.channel_inversion_policy):
            policy, _ = maker(chan, cfg)
            assert np.all(policy.power_used() <= cfg.budgets + 1e-12)


def test_ignore_csi_is_noop_without_errors(rng):
    cfg, chan = random_instance(510, K=2, M=3, err=(0.0, 0.0))
    pair = benchmarks.ignore_csi_policy(chan, cfg, "best_effort")
    blind_mse = benchmarks.evaluate_policy(pair, chan, cfg, "best_effort")
    _, _, report = solve_siso_avg(chan, cfg)
    assert blind_mse == pytest.approx(report.average_mse, abs=1e-9)


def test_ignore_csi_analytic_instance():
    # blind design lands on the perfect-CSI optimum; evaluated truthfully it
    # pays the full estimation-error penalty
    cfg = cfg_for(err=(1.0,))
    pair = benchmarks.ignore_csi_policy(unit_channel(1, 1), cfg, "best_effort")
    policy, receive = pair
    assert policy.amplitudes[0, 0] == pytest.approx(1.0, abs=1e-6)
    assert abs(receive.beamformers[0, 0]) == pytest.approx(0.5, abs=1e-6)
    evaluated = benchmarks.evaluate_policy(pair, unit_channel(1, 1), cfg, "best_effort")
    assert evaluated == pytest.approx(0.75, abs=1e-6)
    _, _, optimal = solve_siso_avg(unit_channel(1, 1), cfg)
    assert optimal.average_mse == pytest.approx(2.0 / 3.0, abs=1e-6)
    assert evaluated > optimal.average_mse


def test_proposed_dominates_benchmarks_both_scenarios(rng):
    for seed in range(3):
        cfg, chan = random_instance(520 + seed, K=2, M=4, err=(0.05, 0.35))
        floors = metrics.floor_report(chan, cfg).floor_full
        gamma = float(rng.uniform(np.min(floors) + 0.03, 1.0 / cfg.num_devices))
        cfg = SystemConfig(2, 4, 1, cfg.noise_power, cfg.power_budgets, cfg.error_variances, gamma)
        _, _, avg_rep = solve_siso_avg(chan, cfg)
        _, _, out_rep = solve_siso_outage(chan, cfg)
        for maker in (benchmarks.equal_power_policy, benchmarks.channel_inversion_policy):
            pair = maker(chan, cfg)
            assert avg_rep.average_mse <= benchmarks.evaluate_policy(pair, chan, cfg, "best_effort") + 1e-12
            assert np.mean(out_rep.outage_flags) <= benchmarks.evaluate_policy(
                pair, chan, cfg, "error_constrained"
            ) + 1e-12
