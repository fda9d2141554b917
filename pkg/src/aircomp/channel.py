"""Channel generation: per-subcarrier Rayleigh draws, the multi-tap OFDM model
with relative delays, and estimation-error injection.

Convention: CN(0, s) draws have Re and Im each N(0, s/2). All randomness comes
from explicitly passed numpy Generators; substream helpers let callers key
independent streams off one 64-bit master seed so results do not depend on
scheduling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .model import ChannelState, SystemConfig


def substream(master_seed: int, *key) -> np.random.Generator:
    """Independent generator derived from (master_seed, key...).

    Strings in the key are folded to integers so streams like
    ("channel", realization) and ("estimate", realization) never collide.
    """
    ints = [int(master_seed) & 0xFFFFFFFFFFFFFFFF]
    for part in key:
        if isinstance(part, str):
            ints.extend(part.encode())
        else:
            ints.append(int(part) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(ints))


def _cn_sample(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit-variance CSCG draw of the given shape."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Multi-tap model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DelaySpec:
    """Propagation timing parameters, all in seconds."""

    propagation_delays: np.ndarray  # alpha_k
    timing_advances: np.ndarray     # beta_k
    symbol_period: float            # T
    delay_spreads: np.ndarray       # tau_k

    def __post_init__(self):
        object.__setattr__(self, "propagation_delays", np.asarray(self.propagation_delays, dtype=float))
        object.__setattr__(self, "timing_advances", np.asarray(self.timing_advances, dtype=float))
        object.__setattr__(self, "delay_spreads", np.asarray(self.delay_spreads, dtype=float))
        if not self.symbol_period > 0:
            raise ValueError("symbol_period must be positive")


@dataclass(frozen=True)
class TapChannel:
    """Time-domain taps, shape (K, L, N_r), with leading zero taps per device.

    taps with index l < delay_pad[k] are exactly zero (residual timing offset
    after coarse synchronization); L must not exceed the cyclic prefix length.
    """

    taps: np.ndarray
    cp_length: int
    delay_pad: np.ndarray  # Delta_k, (K,) nonnegative ints

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=complex)
        pad = np.asarray(self.delay_pad, dtype=int)
        if taps.ndim != 3:
            raise ValueError("taps must have shape (K, L, N_r)")
        if taps.shape[1] > self.cp_length:
            raise ValueError("number of taps must not exceed cp_length")
        if np.any(pad < 0):
            raise ValueError("delay_pad entries must be nonnegative")
        for k in range(taps.shape[0]):
            if pad[k] > 0 and np.any(taps[k, : pad[k]] != 0):
                raise ValueError(f"device {k}: taps below its delay pad must be zero")
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "delay_pad", pad)

    @property
    def num_taps(self) -> int:
        return self.taps.shape[1]


def relative_delays(spec: DelaySpec) -> np.ndarray:
    """Residual delay per device after timing advance, referenced to the
    earliest arriving device; the minimum entry is exactly 0."""
    offset = spec.propagation_delays - spec.timing_advances
    return offset - np.min(offset)


def taps_to_subcarrier_gains(taps: TapChannel, num_subcarriers: int) -> np.ndarray:
    """Length-M DFT of the tap sequence per (device, antenna) -> (K, M, N_r).

    h_{k,m} = sum_l taps[k,l] * exp(-2j*pi*m*l/M). Tap indices at or beyond M
    fold onto l mod M (circular aliasing), though L <= cp_length << M in any
    sane configuration.
    """
    M = int(num_subcarriers)
    if M < 1:
        raise ValueError("num_subcarriers must be >= 1")
    K, L, N = taps.taps.shape
    folded = np.zeros((K, M, N), dtype=complex)
    for l in range(L):
        folded[:, l % M, :] += taps.taps[:, l, :]
    return np.fft.fft(folded, axis=1)


def sample_tap_channel(
    cfg: SystemConfig,
    spec: DelaySpec,
    rng: np.random.Generator,
    cp_length: int,
    tap_variances: Optional[np.ndarray] = None,
) -> TapChannel:
    """Random taps honoring the delay structure: device k occupies taps
    [Delta_k, L) with equal per-tap variance summing to tap_variances[k]
    (default 1)."""
    delays = relative_delays(spec)
    T = spec.symbol_period
    L = int(max(1, np.max(np.ceil((spec.delay_spreads + delays) / T))))
    if L > cp_length:
        raise ValueError("delay spread exceeds the cyclic prefix")
    pad = np.ceil(delays / T).astype(int)
    K, N = cfg.num_devices, cfg.num_rx_antennas
    total = np.ones(K) if tap_variances is None else np.asarray(tap_variances, dtype=float)
    taps = np.zeros((K, L, N), dtype=complex)
    for k in range(K):
        active = L - pad[k]
        if active <= 0:
            continue
        taps[k, pad[k]:] = _cn_sample(rng, (active, N)) * np.sqrt(total[k] / active)
    return TapChannel(taps=taps, cp_length=cp_length, delay_pad=pad)


# ---------------------------------------------------------------------------
# Direct per-subcarrier model (the experiments' default)
# ---------------------------------------------------------------------------

def sample_rayleigh_channel(
    cfg: SystemConfig,
    rng: np.random.Generator,
    variance_mode: Union[str, Sequence[float], np.ndarray] = "unit",
) -> ChannelState:
    """i.i.d. CN(0, sigma_h,k^2 I) true gains across devices and subcarriers.

    variance_mode: "unit" (all 1), "uniform" (sigma_h,k^2 ~ U[0.5, 1.5] drawn
    from rng, once per call), or an explicit per-device array.
    """
    K, M, N = cfg.num_devices, cfg.num_subcarriers, cfg.num_rx_antennas
    if isinstance(variance_mode, str):
        if variance_mode == "unit":
            var = np.ones(K)
        elif variance_mode == "uniform":
            var = rng.uniform(0.5, 1.5, size=K)
        else:
            raise ValueError(f"unknown variance_mode {variance_mode!r}")
    else:
        var = np.asarray(variance_mode, dtype=float)
        if var.shape != (K,):
            raise ValueError("per-device variance array must have length K")
    gains = _cn_sample(rng, (K, M, N)) * np.sqrt(var)[:, None, None]
    return ChannelState(
        estimated_gains=gains,
        error_variances=np.zeros(K),
        true_gains=gains,
    )


def sample_estimated_channel(
    true_state: ChannelState,
    error_variances: Sequence[float] | np.ndarray,
    rng: np.random.Generator,
) -> ChannelState:
    """Inject estimation error: h_hat = h + e, e ~ CN(0, sigma_e,k^2 I).

    The standard draw is taken before scaling, so reruns with the same rng
    seed and different error variances see perfectly correlated errors.
    """
    if true_state.true_gains is None:
        raise ValueError("true gains required to synthesize an estimate")
    h = true_state.true_gains
    err = np.asarray(error_variances, dtype=float)
    if err.shape != (h.shape[0],):
        raise ValueError("error_variances must have one entry per device")
    noise = _cn_sample(rng, h.shape) * np.sqrt(err)[:, None, None]
    return ChannelState(estimated_gains=h + noise, error_variances=err, true_gains=h)


# ---------------------------------------------------------------------------
# Persistence (replay exact realizations)
# ---------------------------------------------------------------------------

def export_channel_state(state: ChannelState, path: str) -> None:
    """Write a ChannelState to disk. ``.json`` stores nested [re, im] pairs;
    anything else is a .npz with row-major (K, M, N_r) complex128 arrays
    (interleaved re/im doubles on disk)."""
    if str(path).endswith(".json"):
        def pack(arr):
            stacked = np.stack([arr.real, arr.imag], axis=-1)
            return stacked.tolist()

        doc = {
            "estimated_gains": pack(state.estimated_gains),
            "error_variances": state.error_variances.tolist(),
        }
        if state.true_gains is not None:
            doc["true_gains"] = pack(state.true_gains)
        with open(path, "w") as fh:
            json.dump(doc, fh)
    else:
        arrays = {
            "estimated_gains": state.estimated_gains,
            "error_variances": state.error_variances,
        }
        if state.true_gains is not None:
            arrays["true_gains"] = state.true_gains
        with open(path, "wb") as fh:  # exact path; savez would append .npz
            np.savez(fh, **arrays)


def import_channel_state(path: str) -> ChannelState:
    if str(path).endswith(".json"):
        with open(path) as fh:
            doc = json.load(fh)

        def unpack(nested):
            arr = np.asarray(nested, dtype=float)
            return arr[..., 0] + 1j * arr[..., 1]

        true_gains = unpack(doc["true_gains"]) if "true_gains" in doc else None
        return ChannelState(
            estimated_gains=unpack(doc["estimated_gains"]),
            error_variances=np.asarray(doc["error_variances"], dtype=float),
            true_gains=true_gains,
        )
    data = np.load(path)
    true_gains = data["true_gains"] if "true_gains" in data.files else None
    return ChannelState(
        estimated_gains=data["estimated_gains"],
        error_variances=data["error_variances"],
        true_gains=true_gains,
    )
