import numpy as np
import pytest

from aircomp.channel import sample_estimated_channel, sample_rayleigh_channel, substream
from aircomp.model import ChannelState, SystemConfig


def unit_channel(K: int, M: int, N: int = 1, gains=None) -> ChannelState:
    """Deterministic channel with all estimated gains equal to 1 (or given)."""
    est = np.ones((K, M, N), dtype=complex) if gains is None else np.asarray(gains, dtype=complex)
    return ChannelState(estimated_gains=est, error_variances=np.zeros(est.shape[0]), true_gains=est)


def random_instance(
    seed,
    K,
    M,
    N=1,
    power=(0.5, 4.0),
    err=(0.0, 0.5),
    noise=(0.3, 2.0),
    threshold=1.0,
    min_gain=0.25,
):
    """Seeded random scenario + channel; rejects channels with very small
    gains so oracle sweep ranges stay trustworthy."""
    rng = substream(seed, "instance")
    cfg = SystemConfig(
        num_devices=K,
        num_subcarriers=M,
        num_rx_antennas=N,
        noise_power=float(rng.uniform(*noise)),
        power_budgets=tuple(rng.uniform(*power, K)),
        error_variances=tuple(rng.uniform(*err, K)),
        mse_threshold=threshold,
    )
    while True:
        true_state = sample_rayleigh_channel(cfg, rng, "unit")
        channel = sample_estimated_channel(true_state, cfg.err_vars, rng)
        if np.min(np.abs(channel.estimated_gains)) >= min_gain:
            return cfg, channel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
