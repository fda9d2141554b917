"""Command-line interface.

    aircomp run --spec spec.json --out results.csv [--format csv|json] [--seed N] [--threads N]
    aircomp preset --name fig2a --out spec.json
    aircomp verify [--seed N]

Exit codes: 0 success, 1 verification failure, 2 spec validation failure,
3 I/O failure. The AIRCOMP_THREADS environment variable overrides --threads.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import harness, metrics, oracle, siso
from .channel import sample_estimated_channel, sample_rayleigh_channel, substream
from .model import ConfigError, ReceivePolicy, SystemConfig, TransmitPolicy


def _cmd_run(args) -> int:
    try:
        with open(args.spec) as fh:
            spec = harness.ExperimentSpec.from_json(fh.read())
    except OSError as exc:
        print(f"error: cannot read spec: {exc}", file=sys.stderr)
        return 3
    except (harness.SpecError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        spec = replace(spec, master_seed=args.seed)
    threads = args.threads
    env = os.environ.get("AIRCOMP_THREADS")
    if env:
        try:
            threads = int(env)
        except ValueError:
            print(f"error: AIRCOMP_THREADS must be an integer, got {env!r}", file=sys.stderr)
            return 2
    rows = harness.run_experiment(spec, threads=max(1, threads))
    try:
        harness.write_results(rows, args.out, format=args.format)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_preset(args) -> int:
    try:
        spec = harness.preset_spec(args.name)
    except harness.SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        with open(args.out, "w") as fh:
            fh.write(spec.to_json())
            fh.write("\n")
    except OSError as exc:
        print(f"error: cannot write {args.out!r}: {exc}", file=sys.stderr)
        return 3
    print(f"wrote preset {args.name} to {args.out}; run it with: aircomp run --spec {args.out}")
    return 0


# ---------------------------------------------------------------------------
# verify: quick independent-oracle battery
# ---------------------------------------------------------------------------

def _tiny_instance(rng, K, M):
    cfg = SystemConfig(
        num_devices=K,
        num_subcarriers=M,
        num_rx_antennas=1,
        noise_power=float(rng.uniform(0.3, 2.0)),
        power_budgets=tuple(rng.uniform(0.5, 4.0, K)),
        error_variances=tuple(rng.uniform(0.0, 0.5, K)),
        mse_threshold=1.0,
    )
    while True:
        true_state = sample_rayleigh_channel(cfg, rng, "unit")
        channel = sample_estimated_channel(true_state, cfg.err_vars, rng)
        if np.min(np.abs(channel.scalar_gains())) >= 0.25:
            return cfg, channel


def _check(name: str, ok: bool, detail: str = "") -> bool:
    print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail and not ok else ""))
    return ok


def _cmd_verify(args) -> int:
    rng = np.random.default_rng(args.seed)
    ok = True

    cfg_a = SystemConfig(1, 1, 1, 1.0, (1.0,), (0.0,), 0.5)
    chan_a = sample_rayleigh_channel(cfg_a, substream(0, "verify"), "unit")
    chan_a = sample_estimated_channel(chan_a, np.zeros(1), substream(0, "verify", 1))
    chan_a = type(chan_a)(
        estimated_gains=np.ones((1, 1, 1), dtype=complex),
        error_variances=np.zeros(1),
        true_gains=np.ones((1, 1, 1), dtype=complex),
    )
    policy, receive, report = siso.solve_siso_avg(chan_a, cfg_a)
    ok &= _check(
        "closed-form instance (unit channel, perfect estimate)",
        abs(policy.amplitudes[0, 0] - 1) < 1e-6
        and abs(receive.scalars()[0] - 0.5) < 1e-6
        and abs(report.average_mse - 0.5) < 1e-6,
        f"amp={policy.amplitudes[0,0]:.8f} w={receive.scalars()[0]:.8f} mse={report.average_mse:.8f}",
    )

    for i in range(3):
        cfg, channel = _tiny_instance(rng, K=int(rng.integers(1, 3)), M=int(rng.integers(1, 3)))
        _, _, rep = siso.solve_siso_avg(channel, cfg)
        grid = oracle.grid_search_joint(channel, cfg)
        ok &= _check(
            f"grid-search agreement, average MSE, instance {i}",
            rep.average_mse <= grid.objective + 1e-3 and grid.objective <= rep.average_mse + 1e-3,
            f"solver={rep.average_mse:.6e} grid={grid.objective:.6e}",
        )

    cfg, channel = _tiny_instance(rng, K=2, M=1)
    amp = rng.uniform(0, 1, (2, 1))
    receive = ReceivePolicy(np.full((1, 1), rng.uniform(0.2, 1.0), dtype=complex))
    policy = TransmitPolicy.from_amplitudes(amp, channel, receive)
    analytic = metrics.mse_subcarrier(
        policy.amplitudes[:, 0], channel.estimated_gains[:, 0, :], receive.beamformers[0], cfg
    )
    est = oracle.empirical_mse(
        policy.complex_coefficients[:, 0],
        receive.beamformers[0],
        channel.estimated_gains[:, 0, :],
        cfg,
        100_000,
        substream(args.seed, "verify-mc"),
    )
    se = max(analytic, 1e-6) / np.sqrt(100_000 / 8)
    ok &= _check(
        "sample-level MSE matches the analytic formula",
        abs(est - analytic) <= 5 * max(se, 1e-4),
        f"analytic={analytic:.6f} empirical={est:.6f}",
    )

    for i in range(3):
        cfg, channel = _tiny_instance(rng, K=int(rng.integers(1, 3)), M=2)
        floors = [
            metrics.mse_floor_full(channel.estimated_gains[:, m, 0], cfg.err_vars)
            for m in range(2)
        ]
        gamma = float(rng.uniform(max(floors) + 0.05, 1.0 / cfg.num_devices))
        cfg = replace(cfg, mse_threshold=gamma)
        _, _, rep = siso.solve_siso_outage(channel, cfg)
        enum_count = oracle.enumerate_min_outage(channel, cfg)
        solver_count = int(np.sum(rep.outage_flags))
        ok &= _check(
            f"outage count matches enumeration, instance {i}",
            solver_count == enum_count,
            f"solver={solver_count} enumeration={enum_count}",
        )

    cfg, channel = _tiny_instance(rng, K=2, M=2)
    solution = siso.solve_siso_avg(channel, cfg)
    kkt = oracle.kkt_residuals(solution, channel, cfg, "best_effort")
    ok &= _check(
        "KKT residuals at the returned optimum",
        kkt.stationarity <= 1e-8 * cfg.noise_power
        and kkt.slackness <= 1e-6 * min(cfg.power_budgets)
        and kkt.feasibility <= 1e-9,
        f"stationarity={kkt.stationarity:.2e} slackness={kkt.slackness:.2e} feas={kkt.feasibility:.2e}",
    )

    print("verification " + ("passed" if ok else "FAILED"))
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="aircomp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment spec")
    run_p.add_argument("--spec", required=True, help="path to an ExperimentSpec JSON file")
    run_p.add_argument("--out", required=True, help="output path")
    run_p.add_argument("--format", choices=("csv", "json"), default="csv")
    run_p.add_argument("--seed", type=int, default=None, help="override the spec's master seed")
    run_p.add_argument("--threads", type=int, default=1)
    run_p.set_defaults(func=_cmd_run)

    preset_p = sub.add_parser("preset", help="write a named figure preset as a spec file")
    preset_p.add_argument("--name", required=True)
    preset_p.add_argument("--out", required=True)
    preset_p.set_defaults(func=_cmd_preset)

    verify_p = sub.add_parser("verify", help="run the independent oracle battery")
    verify_p.add_argument("--seed", type=int, default=7)
    verify_p.set_defaults(func=_cmd_verify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
