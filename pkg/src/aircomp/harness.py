"""Monte Carlo experiment runner: sweeps power / error variance / device
count / antenna count across schemes, averaging the scenario metric over
seeded channel realizations, with CSV/JSON persistence.

Determinism: every realization draws from substreams keyed only by
(master_seed, purpose, realization index), so results are byte-identical
regardless of worker count, and all schemes at one (sweep value, realization)
consume the identical channel state. Power sweeps are in dB relative to a
unit noise floor: P_linear = 10^(dB/10) with sigma_z^2 = 1.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import benchmarks, metrics, simo, siso
from .channel import sample_estimated_channel, sample_rayleigh_channel, substream
from .model import ConfigError, SystemConfig, validate_config

SWEEP_AXES = ("power_db", "error_variance", "num_devices", "num_antennas")
SCHEMES = ("proposed", "ignore_csi", "equal_power", "channel_inversion")
SCENARIOS = ("best_effort", "error_constrained")
CSV_COLUMNS = (
    "sweep_name",
    "sweep_value",
    "scheme",
    "scenario",
    "metric",
    "stderr",
    "realizations",
    "seed",
    "floor",
)


class SpecError(ValueError):
    """ExperimentSpec validation failure."""


@dataclass(frozen=True)
class ExperimentSpec:
    base: SystemConfig
    sweep_axis: str
    sweep_values: tuple
    schemes: tuple
    scenario: str
    realizations: int = 500
    master_seed: int = 1
    include_floor: bool = False
    variance_profile: str = "uniform"  # per-device channel variances; "unit" for tests

    def __post_init__(self):
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        object.__setattr__(self, "schemes", tuple(self.schemes))

    def to_json(self) -> str:
        doc = {
            "base": json.loads(self.base.to_json()),
            "sweep_axis": self.sweep_axis,
            "sweep_values": list(self.sweep_values),
            "schemes": list(self.schemes),
            "scenario": self.scenario,
            "realizations": self.realizations,
            "master_seed": self.master_seed,
            "include_floor": self.include_floor,
            "variance_profile": self.variance_profile,
        }
        return json.dumps(doc, indent=2)

    @staticmethod
    def from_json(text: str) -> "ExperimentSpec":
        try:
            doc = json.loads(text)
            spec = ExperimentSpec(
                base=SystemConfig.from_json(json.dumps(doc["base"])),
                sweep_axis=doc["sweep_axis"],
                sweep_values=tuple(doc["sweep_values"]),
                schemes=tuple(doc["schemes"]),
                scenario=doc["scenario"],
                realizations=int(doc.get("realizations", 500)),
                master_seed=int(doc.get("master_seed", 1)),
                include_floor=bool(doc.get("include_floor", False)),
                variance_profile=doc.get("variance_profile", "uniform"),
            )
        except (KeyError, TypeError, ValueError, ConfigError) as exc:
            raise SpecError(f"invalid experiment spec: {exc}") from exc
        validate_spec(spec)
        return spec


def validate_spec(spec: ExperimentSpec) -> None:
    validate_config(spec.base)
    if spec.sweep_axis not in SWEEP_AXES:
        raise SpecError(f"sweep_axis must be one of {SWEEP_AXES}")
    if not spec.sweep_values:
        raise SpecError("sweep_values must be non-empty")
    if not spec.schemes:
        raise SpecError("schemes must be non-empty")
    for s in spec.schemes:
        if s not in SCHEMES:
            raise SpecError(f"unknown scheme {s!r}")
    if spec.scenario not in SCENARIOS:
        raise SpecError(f"scenario must be one of {SCENARIOS}")
    if spec.realizations < 1:
        raise SpecError("realizations must be positive")
    if spec.variance_profile not in ("uniform", "unit"):
        raise SpecError("variance_profile must be 'uniform' or 'unit'")
    if spec.sweep_axis in ("num_devices", "num_antennas"):
        for v in spec.sweep_values:
            if int(v) < 1:
                raise SpecError(f"{spec.sweep_axis} sweep values must be positive integers")
    if spec.sweep_axis == "error_variance":
        for v in spec.sweep_values:
            if v < 0:
                raise SpecError("error_variance sweep values must be nonnegative")


@dataclass(frozen=True)
class ResultRow:
    sweep_name: str
    sweep_value: float
    scheme: str
    scenario: str
    metric: float
    stderr: float
    realizations: int
    seed: int
    floor: Optional[float] = None
    flagged: bool = False  # some realization hit a solver iteration limit


def _apply_axis(base: SystemConfig, axis: str, value) -> SystemConfig:
    K = base.num_devices
    if axis == "power_db":
        p = 10.0 ** (float(value) / 10.0)
        return replace(base, power_budgets=(p,) * K)
    if axis == "error_variance":
        return replace(base, error_variances=(float(value),) * K)
    if axis == "num_devices":
        k = int(value)
        return replace(
            base,
            num_devices=k,
            power_budgets=(base.power_budgets[0],) * k,
            error_variances=(base.error_variances[0],) * k,
        )
    if axis == "num_antennas":
        return replace(base, num_rx_antennas=int(value))
    raise SpecError(f"unknown sweep axis {axis!r}")


def _solve_proposed(channel, cfg, scenario):
    if scenario == "best_effort":
        solve = siso.solve_siso_avg if cfg.num_rx_antennas == 1 else simo.solve_simo_avg
    else:
        solve = siso.solve_siso_outage if cfg.num_rx_antennas == 1 else simo.solve_simo_outage
    policy, receive, report = solve(channel, cfg)
    return (policy, receive), not report.converged


def _realization_task(cfg: SystemConfig, scenario: str, schemes, master_seed: int,
                      realization: int, sigma_h, include_floor: bool):
    """One seeded realization: draw the channel once, evaluate every scheme on
    it. Pure function of its arguments, so worker scheduling cannot matter."""
    rng_h = substream(master_seed, "channel", realization)
    true_state = sample_rayleigh_channel(cfg, rng_h, sigma_h[: cfg.num_devices])
    rng_e = substream(master_seed, "estimate", realization)
    channel = sample_estimated_channel(true_state, cfg.err_vars, rng_e)

    out = {}
    for scheme in schemes:
        flagged = False
        if scheme == "proposed":
            pair, flagged = _solve_proposed(channel, cfg, scenario)
        elif scheme == "ignore_csi":
            pair = benchmarks.ignore_csi_policy(channel, cfg, scenario)
        elif scheme == "equal_power":
            pair = benchmarks.equal_power_policy(channel, cfg)
        elif scheme == "channel_inversion":
            pair = benchmarks.channel_inversion_policy(channel, cfg)
        else:
            raise SpecError(f"unknown scheme {scheme!r}")
        out[scheme] = (benchmarks.evaluate_policy(pair, channel, cfg, scenario), flagged)

    floor = None
    if include_floor:
        floor = float(np.mean(metrics.floor_report(channel, cfg).floor_full))
    return out, floor


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> list[ResultRow]:
    """Execute the sweep; rows are ordered by (sweep value, scheme)."""
    validate_spec(spec)
    k_max = spec.base.num_devices
    if spec.sweep_axis == "num_devices":
        k_max = max(int(v) for v in spec.sweep_values)
    if spec.variance_profile == "uniform":
        sigma_h = substream(spec.master_seed, "sigma_h").uniform(0.5, 1.5, k_max)
    else:
        sigma_h = np.ones(k_max)

    rows: list[ResultRow] = []
    for value in spec.sweep_values:
        cfg = _apply_axis(spec.base, spec.sweep_axis, value)
        validate_config(cfg)
        args = [
            (cfg, spec.scenario, spec.schemes, spec.master_seed, r, sigma_h, spec.include_floor)
            for r in range(spec.realizations)
        ]
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_realization_star, args))
        else:
            results = [_realization_task(*a) for a in args]

        for scheme in spec.schemes:
            vals = np.array([res[0][scheme][0] for res in results])
            flagged = any(res[0][scheme][1] for res in results)
            rows.append(
                ResultRow(
                    sweep_name=spec.sweep_axis,
                    sweep_value=value,
                    scheme=scheme,
                    scenario=spec.scenario,
                    metric=float(np.mean(vals)),
                    stderr=_stderr(vals),
                    realizations=spec.realizations,
                    seed=spec.master_seed,
                    flagged=flagged,
                )
            )
        if spec.include_floor:
            floors = np.array([res[1] for res in results])
            rows.append(
                ResultRow(
                    sweep_name=spec.sweep_axis,
                    sweep_value=value,
                    scheme="floor",
                    scenario=spec.scenario,
                    metric=float(np.mean(floors)),
                    stderr=_stderr(floors),
                    realizations=spec.realizations,
                    seed=spec.master_seed,
                    floor=float(np.mean(floors)),
                )
            )
    rows.sort(key=lambda row: (row.sweep_value, row.scheme))
    return rows


def _realization_star(args):
    return _realization_task(*args)


def _stderr(vals: np.ndarray) -> float:
    if len(vals) < 2:
        return 0.0
    return float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def write_results(rows: list[ResultRow], path: str, format: str = "csv") -> None:
    """Persist result rows. CSV carries exactly the documented columns in a
    deterministic order; JSON additionally keeps the flagged annotation."""
    try:
        if format == "csv":
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(CSV_COLUMNS)
                for row in rows:
                    writer.writerow(
                        [
                            row.sweep_name,
                            repr(float(row.sweep_value)),
                            row.scheme,
                            row.scenario,
                            repr(float(row.metric)),
                            repr(float(row.stderr)),
                            row.realizations,
                            row.seed,
                            "" if row.floor is None else repr(float(row.floor)),
                        ]
                    )
        elif format == "json":
            doc = [
                {
                    "sweep_name": row.sweep_name,
                    "sweep_value": float(row.sweep_value),
                    "scheme": row.scheme,
                    "scenario": row.scenario,
                    "metric": row.metric,
                    "stderr": row.stderr,
                    "realizations": row.realizations,
                    "seed": row.seed,
                    "floor": row.floor,
                    "flagged": row.flagged,
                }
                for row in rows
            ]
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=2)
        else:
            raise SpecError(f"unknown output format {format!r}")
    except OSError as exc:
        raise OSError(f"writing results to {path!r} failed: {exc}") from exc


def read_results(path: str) -> list[ResultRow]:
    rows = []
    if str(path).endswith(".json"):
        with open(path) as fh:
            for doc in json.load(fh):
                rows.append(
                    ResultRow(
                        sweep_name=doc["sweep_name"],
                        sweep_value=doc["sweep_value"],
                        scheme=doc["scheme"],
                        scenario=doc["scenario"],
                        metric=doc["metric"],
                        stderr=doc["stderr"],
                        realizations=doc["realizations"],
                        seed=doc["seed"],
                        floor=doc.get("floor"),
                        flagged=doc.get("flagged", False),
                    )
                )
        return rows
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != CSV_COLUMNS:
            raise SpecError(f"unexpected CSV columns {reader.fieldnames}")
        for rec in reader:
            rows.append(
                ResultRow(
                    sweep_name=rec["sweep_name"],
                    sweep_value=float(rec["sweep_value"]),
                    scheme=rec["scheme"],
                    scenario=rec["scenario"],
                    metric=float(rec["metric"]),
                    stderr=float(rec["stderr"]),
                    realizations=int(rec["realizations"]),
                    seed=int(rec["seed"]),
                    floor=None if rec["floor"] == "" else float(rec["floor"]),
                )
            )
    return rows


# ---------------------------------------------------------------------------
# Figure presets (desk-scale reproductions of the experiment families)
# ---------------------------------------------------------------------------

_POWER_DB = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
_ERR_VARS = (0.05, 0.1, 0.2, 0.3, 0.4, 0.5)
_DEVICES = (2, 4, 6, 8, 10)
_ANTENNAS = (2, 4, 8, 16, 32)


def _base_cfg(num_rx_antennas: int, power_db: float = 30.0) -> SystemConfig:
    return SystemConfig(
        num_devices=5,
        num_subcarriers=128,
        num_rx_antennas=num_rx_antennas,
        noise_power=1.0,
        power_budgets=(10.0 ** (power_db / 10.0),) * 5,
        error_variances=(0.2,) * 5,
        mse_threshold=0.05,
    )


def _preset(nr, axis, values, scenario, include_floor):
    return ExperimentSpec(
        base=_base_cfg(nr),
        sweep_axis=axis,
        sweep_values=values,
        schemes=SCHEMES,
        scenario=scenario,
        include_floor=include_floor,
    )


PRESETS = {
    "fig2a": lambda: _preset(1, "power_db", _POWER_DB, "best_effort", True),
    "fig2b": lambda: _preset(1, "power_db", _POWER_DB, "error_constrained", False),
    "fig3a": lambda: _preset(1, "error_variance", _ERR_VARS, "best_effort", True),
    "fig3b": lambda: _preset(1, "error_variance", _ERR_VARS, "error_constrained", False),
    "fig4a": lambda: _preset(1, "num_devices", _DEVICES, "best_effort", True),
    "fig4b": lambda: _preset(1, "num_devices", _DEVICES, "error_constrained", False),
    "fig5a": lambda: _preset(4, "power_db", _POWER_DB, "best_effort", True),
    "fig5b": lambda: _preset(4, "power_db", _POWER_DB, "error_constrained", False),
    "fig6a": lambda: _preset(4, "num_antennas", _ANTENNAS, "best_effort", True),
    "fig6b": lambda: _preset(4, "num_antennas", _ANTENNAS, "error_constrained", False),
}


def preset_spec(name: str) -> ExperimentSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise SpecError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
