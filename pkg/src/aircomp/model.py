"""Shared scenario configuration and transmit/receive policy types.

All types are immutable value objects; every operation here is a pure
function, so instances can be shared freely across worker threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

POWER_SLACK = 1e-9  # absolute slack on sum_m b^2 <= P_k (absorbs bisection tolerance)


class ConfigError(ValueError):
    """A SystemConfig invariant is violated; message names the offending field."""


@dataclass(frozen=True)
class SystemConfig:
    """Scenario parameters shared by every solver and the harness.

    Powers are linear (noise_power is the per-subcarrier noise variance,
    power_budgets the per-device total transmit power over all subcarriers).
    """

    num_devices: int            # K
    num_subcarriers: int        # M
    num_rx_antennas: int        # N_r
    noise_power: float          # sigma_z^2
    power_budgets: tuple        # P_k, length K
    error_variances: tuple      # sigma_e,k^2, length K
    mse_threshold: float        # Gamma (outage scenario only)

    def __post_init__(self):
        object.__setattr__(self, "power_budgets", tuple(float(p) for p in self.power_budgets))
        object.__setattr__(self, "error_variances", tuple(float(v) for v in self.error_variances))

    # -- array views -------------------------------------------------------

    @property
    def budgets(self) -> np.ndarray:
        return np.asarray(self.power_budgets, dtype=float)

    @property
    def err_vars(self) -> np.ndarray:
        return np.asarray(self.error_variances, dtype=float)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        return json.dumps(
            {
                "num_devices": self.num_devices,
                "num_subcarriers": self.num_subcarriers,
                "num_rx_antennas": self.num_rx_antennas,
                "noise_power": self.noise_power,
                "power_budgets": list(self.power_budgets),
                "error_variances": list(self.error_variances),
                "mse_threshold": self.mse_threshold,
            },
            indent=2,
        )

    @staticmethod
    def from_json(text: str) -> "SystemConfig":
        raw = json.loads(text)
        try:
            cfg = SystemConfig(
                num_devices=int(raw["num_devices"]),
                num_subcarriers=int(raw["num_subcarriers"]),
                num_rx_antennas=int(raw["num_rx_antennas"]),
                noise_power=float(raw["noise_power"]),
                power_budgets=tuple(raw["power_budgets"]),
                error_variances=tuple(raw["error_variances"]),
                mse_threshold=float(raw["mse_threshold"]),
            )
        except KeyError as exc:  # pragma: no cover - message detail only
            raise ConfigError(f"missing config field {exc.args[0]!r}") from None
        validate_config(cfg)
        return cfg

    def with_error_variances(self, err: np.ndarray | list | tuple) -> "SystemConfig":
        return replace(self, error_variances=tuple(float(v) for v in err))


def validate_config(cfg: SystemConfig) -> None:
    """Raise ConfigError unless every SystemConfig invariant holds."""
    if cfg.num_devices < 1:
        raise ConfigError("num_devices must be a positive integer")
    if cfg.num_subcarriers < 1:
        raise ConfigError("num_subcarriers must be a positive integer")
    if cfg.num_rx_antennas < 1:
        raise ConfigError("num_rx_antennas must be a positive integer")
    if not (cfg.noise_power > 0):
        raise ConfigError("noise_power must be positive")
    if len(cfg.power_budgets) != cfg.num_devices:
        raise ConfigError("power_budgets must have one entry per device")
    if any(not (p > 0) for p in cfg.power_budgets):
        raise ConfigError("power_budgets entries must be positive")
    if len(cfg.error_variances) != cfg.num_devices:
        raise ConfigError("error_variances must have one entry per device")
    if any(v < 0 for v in cfg.error_variances):
        raise ConfigError("error_variances entries must be nonnegative")
    if not (cfg.mse_threshold > 0):
        raise ConfigError("mse_threshold must be positive")


@dataclass(frozen=True)
class ChannelState:
    """Estimated per-subcarrier channel vectors; the solvers' sole channel input.

    estimated_gains has shape (K, M, N_r). true_gains is present when the
    realization was generated locally and absent when estimates are supplied
    externally. error_variances mirrors the config used at generation time.
    """

    estimated_gains: np.ndarray
    error_variances: np.ndarray
    true_gains: Optional[np.ndarray] = None

    def __post_init__(self):
        est = np.asarray(self.estimated_gains, dtype=complex)
        if est.ndim != 3:
            raise ValueError("estimated_gains must have shape (K, M, N_r)")
        if not np.all(np.isfinite(est)):
            raise ValueError("estimated_gains must be finite")
        object.__setattr__(self, "estimated_gains", est)
        object.__setattr__(self, "error_variances", np.asarray(self.error_variances, dtype=float))
        if self.true_gains is not None:
            tg = np.asarray(self.true_gains, dtype=complex)
            if tg.shape != est.shape:
                raise ValueError("true_gains shape must match estimated_gains")
            object.__setattr__(self, "true_gains", tg)

    @property
    def num_devices(self) -> int:
        return self.estimated_gains.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.estimated_gains.shape[1]

    @property
    def num_rx_antennas(self) -> int:
        return self.estimated_gains.shape[2]

    def scalar_gains(self) -> np.ndarray:
        """(K, M) complex gains for the single-antenna case."""
        if self.num_rx_antennas != 1:
            raise ValueError("scalar gains only defined for N_r = 1")
        return self.estimated_gains[:, :, 0]

    def check_shape(self, cfg: SystemConfig) -> None:
        want = (cfg.num_devices, cfg.num_subcarriers, cfg.num_rx_antennas)
        if self.estimated_gains.shape != want:
            raise ValueError(
                f"channel shape {self.estimated_gains.shape} does not match config {want}"
            )


@dataclass(frozen=True)
class ReceivePolicy:
    """Per-subcarrier receive beamformers, shape (M, N_r) complex.

    For N_r = 1 a real (M,) array is accepted and widened; the solvers for
    that case produce real nonnegative denoising factors.
    """

    beamformers: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.beamformers)
        if w.ndim == 1:
            w = w.astype(complex).reshape(-1, 1)
        else:
            w = w.astype(complex)
        if w.ndim != 2:
            raise ValueError("beamformers must have shape (M, N_r)")
        if not np.all(np.isfinite(w)):
            raise ValueError("beamformers must be finite")
        object.__setattr__(self, "beamformers", w)

    def scalars(self) -> np.ndarray:
        """(M,) real denoising factors for the single-antenna case."""
        if self.beamformers.shape[1] != 1:
            raise ValueError("scalar view only defined for N_r = 1")
        return self.beamformers[:, 0].real.copy()


def align_phases(amplitudes: np.ndarray, channel: ChannelState, receive: ReceivePolicy) -> np.ndarray:
    """Lift nonnegative amplitudes to complex coefficients with aligned phases.

    b_{k,m} = amp * h_hat^H w / |w^H h_hat|, so that w^H h_hat b is real
    nonnegative and equals amp * |w^H h_hat|. Where w^H h_hat = 0 the phase is
    0 by convention (the MSE does not depend on it there).
    """
    amp = np.asarray(amplitudes, dtype=float)
    gains = channel.estimated_gains                      # (K, M, N)
    w = receive.beamformers                              # (M, N)
    inner = np.einsum("mn,kmn->km", w.conj(), gains)     # w^H h_hat, (K, M)
    mag = np.abs(inner)
    phase = np.ones_like(inner)
    nz = mag > 0
    phase[nz] = inner[nz].conj() / mag[nz]
    return amp * phase


@dataclass(frozen=True)
class TransmitPolicy:
    """Per-device, per-subcarrier transmit amplitudes and complex coefficients.

    amplitudes (K, M) are nonnegative; complex_coefficients carry the phases
    (|b| == amplitude elementwise).
    """

    amplitudes: np.ndarray
    complex_coefficients: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=float)
        coef = np.asarray(self.complex_coefficients, dtype=complex)
        if amp.shape != coef.shape or amp.ndim != 2:
            raise ValueError("amplitudes and complex_coefficients must share shape (K, M)")
        if np.any(amp < 0):
            raise ValueError("amplitudes must be nonnegative")
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "complex_coefficients", coef)

    @staticmethod
    def from_amplitudes(
        amplitudes: np.ndarray, channel: ChannelState, receive: ReceivePolicy
    ) -> "TransmitPolicy":
        coef = align_phases(amplitudes, channel, receive)
        return TransmitPolicy(np.asarray(amplitudes, dtype=float), coef)

    def power_used(self) -> np.ndarray:
        """Per-device transmit power sum_m amplitude^2."""
        return np.sum(self.amplitudes**2, axis=1)

    def validate(self, cfg: SystemConfig) -> None:
        if self.amplitudes.shape != (cfg.num_devices, cfg.num_subcarriers):
            raise ValueError("policy shape does not match config")
        if not np.allclose(np.abs(self.complex_coefficients), self.amplitudes, atol=1e-12):
            raise ValueError("|complex coefficient| must equal amplitude")
        excess = self.power_used() - cfg.budgets
        if np.any(excess > POWER_SLACK):
            k = int(np.argmax(excess))
            raise ValueError(f"device {k} exceeds its power budget by {excess[k]:.3e}")


@dataclass(frozen=True)
class SolveReport:
    """Solver diagnostics: per-subcarrier MSE, duals and convergence info.

    objective_trace, when present, is the solver's objective after each outer
    iteration (index 0 is the starting point).
    """

    per_subcarrier_mse: np.ndarray  # (M,)
    average_mse: float
    outage_flags: np.ndarray        # (M,) bool
    dual_mu: np.ndarray             # (K,) nonnegative
    iterations: int
    converged: bool
    duality_gap: Optional[float] = None
    objective_trace: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "per_subcarrier_mse", np.asarray(self.per_subcarrier_mse, dtype=float))
        object.__setattr__(self, "outage_flags", np.asarray(self.outage_flags, dtype=bool))
        object.__setattr__(self, "dual_mu", np.asarray(self.dual_mu, dtype=float))
