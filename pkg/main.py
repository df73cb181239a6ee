#!/usr/bin/env python3
"""
FluctNet: Main Entry Point
==========================

Usage:
    python main.py steady   --config run.json --out output/   Steady state and ep
    python main.py cgf      --config run.json                 Critical window and e(alpha)
    python main.py rate     --config run.json                 Rate functions I, J and symmetry
    python main.py simulate --config run.json --seed 7        Monte Carlo e_t(alpha), Jarzynski
    python main.py scan     --config run.json                 1/kappa_c over a parameter grid
    python main.py regress                                    Analytic regression baseline

Exit codes: 0 success, 2 configuration or model error, 3 standing assumption
violated (controllability, structure), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

project_root = Path(__file__).parent
sys.path.insert(0, str(project_root))

from config import (  # noqa: E402
    ConfigError,
    FunctionalTag,
    NetworkPreset,
    OutputFormat,
    RunConfig,
    __version__,
    config,
    load_config,
)
from core.cgf import (  # noqa: E402
    CgfProfile,
    cgf_profile,
    cgf_spectral,
    critical_kappa,
    ep_from_noise,
    ep_from_sigma,
    kappa_zero,
    steady_state,
)
from core.errors import AssumptionError, DomainError, ModelError, NumericError  # noqa: E402
from core.ldp import (  # noqa: E402
    FunctionalKind,
    check_condition_r,
    clt_variance,
    condition_grid,
    large_deviations,
)
from core.metadata import ArtifactMetadata, write_json, write_table  # noqa: E402
from core.network import (  # noqa: E402
    SystemMatrices,
    build_system,
    ep_positivity_certificate,
    jacobi_chain_from_drive,
    network_from_config,
    require_controllable,
    system_from_config,
    triangular_network,
    validate_structure,
)
from core.riccati import RiccatiFamily  # noqa: E402
from core.simulation.oracle import transfer_oracle_cgf  # noqa: E402
from core.simulation.simulate import (  # noqa: E402
    clt_check,
    empirical_cgf,
    jarzynski_check,
    simulate_functionals,
    summarize,
)

logger = logging.getLogger("fluctnet")

COMMANDS = ("steady", "cgf", "rate", "simulate", "scan")
ROUTE_TOLERANCE = 1e-6
CLT_MIN_TRAJ = 32

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_NUMERIC = 4


# =============================================================================
# CONFIGURATION
# =============================================================================


def resolve_threads(cli_threads: Optional[int], run: RunConfig) -> int:
    if cli_threads is not None:
        return cli_threads
    env = os.environ.get("FLUCTNET_THREADS")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"FLUCTNET_THREADS={env!r} is not an integer") from exc
    return run.threads


def prepare_run(args: argparse.Namespace) -> RunConfig:
    """Load, override and validate the run configuration, then install its defaults."""
    print("Validating configuration...")
    run = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        run.simulation.seed = args.seed
    if args.format is not None:
        run.output.format = OutputFormat(args.format)
    if args.out is not None:
        run.output.directory = str(args.out)
    run.threads = resolve_threads(args.threads, run)

    errors = run.validate(command=args.command)
    if errors:
        print("\nCONFIGURATION ERRORS:")
        for err in errors:
            print(f"  [!] {err}")
        raise ConfigError("; ".join(errors))

    config.solver = run.solver
    config.grids = run.grids
    config.simulation = run.simulation
    print("  Configuration valid.")
    return run


def checked_system(run: RunConfig) -> SystemMatrices:
    """Build the network and enforce the standing assumptions."""
    sys_ = system_from_config(run.network)
    report = validate_structure(sys_)
    if not report.passed:
        raise AssumptionError(f"structural constraints violated: {report.failures()}")
    rank = require_controllable(sys_)
    print(f"  Network {sys_.name}: dim {sys_.dim}, {sys_.n_noise} reservoirs, rank {rank}")
    return sys_


# =============================================================================
# COMMANDS
# =============================================================================


def cmd_steady(sys_: SystemMatrices, run: RunConfig, meta: ArtifactMetadata) -> List[Path]:
    """Write steady.json: covariance, ep, controllability rank and structure report."""
    print("\n--- Steady State ---")
    state = steady_state(sys_)
    rank = require_controllable(sys_)
    report = validate_structure(sys_)
    eigs = np.linalg.eigvalsh(state.M)
    pairs: List[Tuple[float, float]] = []
    if run.network.preset != NetworkPreset.EXPLICIT or run.network.explicit.quasi_markov is None:
        pairs = ep_positivity_certificate(network_from_config(run.network))

    print(f"  ep = {state.ep:.10g}")
    print(f"  M spectrum in [{eigs[0]:.6g}, {eigs[-1]:.6g}]")
    payload = {
        "network": sys_.name,
        "dim": sys_.dim,
        "M": state.M,
        "ep": state.ep,
        "ep_sigma": ep_from_sigma(sys_, state.M),
        "ep_noise": ep_from_noise(sys_, state.M),
        "lyapunov_residual": state.lyapunov_residual,
        "controllability_rank": rank,
        "temperature_bounds": {
            "theta_min": sys_.theta_min,
            "theta_max": sys_.theta_max,
            "M_min_eig": eigs[0],
            "M_max_eig": eigs[-1],
        },
        "ep_positivity_pairs": [list(p) for p in pairs],
        "structure": report.to_dict(),
    }
    out = Path(run.output.directory)
    return [write_json(out / "steady.json", payload, meta)]


def cmd_cgf(sys_: SystemMatrices, run: RunConfig, meta: ArtifactMetadata) -> List[Path]:
    """Write cgf table: alpha, e_integral, e_spectral, e_prime on the closed window."""
    print("\n--- Cumulant Generating Function ---")
    profile = cgf_profile(sys_, run.grids.alpha_points, run.threads, with_integral=True)
    assert profile.e_integral is not None
    e_spectral = np.array([cgf_spectral(sys_, a) for a in profile.alpha_grid])

    interior = slice(1, -1) if profile.finite else slice(None)
    gap = float(np.max(np.abs(profile.e_integral[interior] - e_spectral[interior])))
    if not gap <= ROUTE_TOLERANCE:
        raise NumericError(f"integral and spectral routes differ by {gap:.2e}")

    kappa = "inf" if not profile.finite else f"{profile.kappa_c:.10g}"
    print(f"  kappa_c = {kappa} (kappa_0 = {kappa_zero(sys_):.10g})")
    print(f"  route agreement {gap:.2e}")
    meta = meta.with_extra(
        eps_minus=profile.eps_minus,
        eps_plus=profile.eps_plus,
        kappa_c=profile.kappa_c,
        kappa_0=kappa_zero(sys_),
        ep=profile.ep,
    )
    rows = zip(profile.alpha_grid, profile.e_integral, e_spectral, profile.e_prime)
    out = Path(run.output.directory)
    columns = ("alpha", "e_integral", "e_spectral", "e_prime")
    return [write_table(out / "cgf", columns, rows, meta, run.output.format.value)]


def _critical_profile(sys_: SystemMatrices) -> CgfProfile:
    eps_minus, eps_plus, kappa_c = critical_kappa(sys_)
    empty = np.empty(0)
    return CgfProfile(
        eps_minus=eps_minus,
        eps_plus=eps_plus,
        kappa_c=kappa_c,
        alpha_grid=empty,
        e_values=empty,
        e_prime=empty,
        method="critical",
        ep=steady_state(sys_).ep,
    )


def cmd_rate(sys_: SystemMatrices, run: RunConfig, meta: ArtifactMetadata) -> List[Path]:
    """Write rate table: s, I, J, symmetry for the configured functional."""
    print(f"\n--- Rate Functions ({run.functional.value}) ---")
    profile = _critical_profile(sys_)
    initial_cov = np.asarray(run.initial_cov, dtype=float) if run.initial_cov else None
    kind = FunctionalKind(tag=run.functional, initial_cov=initial_cov)
    family = RiccatiFamily(sys_, profile.kappa_c)

    result = large_deviations(sys_, kind, profile, family=family)
    condition = check_condition_r(sys_, condition_grid(profile.kappa_c), family=family)
    print(f"  {result.summary()}")
    print(f"  Condition (R) minimum eigenvalue {condition.min():.6g}")

    meta = meta.with_extra(
        functional=run.functional.value,
        alpha_minus=result.alpha_minus,
        alpha_plus=result.alpha_plus,
        eta_minus=result.eta_minus,
        eta_plus=result.eta_plus,
        kappa_c=profile.kappa_c,
        ep=result.ep,
        condition_R=bool(np.all(condition > 0)),
        min_condition_R=float(condition.min()),
        degenerate=result.degenerate,
        clamped=result.clamped,
    )
    rows = zip(result.s_grid, result.I_values, result.J_values, result.symmetry_values)
    out = Path(run.output.directory)
    columns = ("s", "I", "J", "symmetry")
    return [write_table(out / "rate", columns, rows, meta, run.output.format.value)]


def cmd_simulate(sys_: SystemMatrices, run: RunConfig, meta: ArtifactMetadata) -> List[Path]:
    """Write sim table (per-alpha estimates), jarzynski.json and optional samples."""
    sim = run.simulation
    assert sim.seed is not None
    print(f"\n--- Monte Carlo ({sim.n_traj} trajectories, t={sim.t_final}, dt={sim.dt}) ---")
    batch = simulate_functionals(
        sys_, sim.t_final, sim.dt, sim.n_traj, sim.seed, threads=run.threads
    )
    estimates = empirical_cgf(
        sys_, sim.alphas, sim.t_final, sim.n_traj, sim.seed, batch=batch
    )
    steps = int(round(sim.t_final / sim.dt))

    rows = []
    for est in estimates:
        oracle = math.nan
        if sim.oracle:
            try:
                oracle = transfer_oracle_cgf(sys_, est.alpha, sim.t_final, steps)
            except DomainError as exc:
                logger.warning(f"oracle unavailable at alpha={est.alpha}: {exc}")
        rows.append((est.alpha, est.value, est.stderr, est.ess, est.biased, oracle))
        print(f"  alpha={est.alpha:+.3f}: e_t = {est.value:.6g} +- {est.stderr:.2g}")

    jarzynski = jarzynski_check(batch)
    tde = summarize(batch.S_tde / sim.t_final)
    state = steady_state(sys_)
    print(f"  E[exp(-S)] = {jarzynski.mean:.6g} +- {jarzynski.stderr:.2g}")
    clt = {"clt_statistic": math.nan, "clt_critical_1pct": math.nan, "clt_normal": None}
    variance = 0.0 if state.ep <= 0.0 else clt_variance(sys_)
    if variance > 0.0 and sim.n_traj >= CLT_MIN_TRAJ:
        summary = clt_check(batch, variance)
        clt = {
            "clt_statistic": summary.statistic,
            "clt_critical_1pct": summary.critical_value,
            "clt_normal": summary.normal,
            "clt_variance_ratio": summary.variance_ratio,
        }
        print(f"  CLT A2 = {summary.statistic:.3f} (1% critical {summary.critical_value:.3f})")

    out = Path(run.output.directory)
    fmt = run.output.format.value
    columns = ("alpha", "e_t", "stderr", "ess", "biased", "oracle")
    written = [write_table(out / "sim", columns, rows, meta, fmt)]
    written.append(
        write_json(
            out / "jarzynski.json",
            {
                "alpha": 1.0,
                "mean": jarzynski.mean,
                "stderr": jarzynski.stderr,
                "n_traj": jarzynski.n_traj,
                "within_3_stderr": jarzynski.within(3.0),
                "tde_rate_mean": tde["mean"],
                "tde_rate_stderr": tde["stderr"],
                "ep": state.ep,
                **clt,
            },
            meta,
        )
    )
    if sim.write_samples:
        sample_columns = ("traj_id", "S_tde", "S_canonical")
        written.append(write_table(out / "samples", sample_columns, batch.rows(), meta, fmt))
    return written


def _scan_cell(evaluate: Callable[[], SystemMatrices]) -> Dict[str, float]:
    """kappa_c, ep and Condition (R) of one network; NaN cells on failure."""
    try:
        sys_ = evaluate()
        require_controllable(sys_)
        _, _, kappa_c = critical_kappa(sys_)
        ep = steady_state(sys_).ep
        family = RiccatiFamily(sys_, kappa_c)
        condition = check_condition_r(sys_, condition_grid(kappa_c), family=family)
        return {
            "kappa_c": kappa_c,
            "inverse_kappa_c": 0.0 if math.isinf(kappa_c) else 1.0 / kappa_c,
            "kappa_0": kappa_zero(sys_),
            "ep": ep,
            "min_condition_R": float(condition.min()),
        }
    except (ModelError, NumericError, DomainError) as exc:
        logger.warning(f"scan cell failed: {exc}")
        keys = ("kappa_c", "inverse_kappa_c", "kappa_0", "ep", "min_condition_R")
        return {key: math.nan for key in keys}


def cmd_scan(run: RunConfig, meta: ArtifactMetadata) -> List[Path]:
    """Write scan table over (u, v) for the triangular network or delta for a chain."""
    net = run.network
    scan = run.scan
    if net.preset == NetworkPreset.TRIANGULAR:
        tri = net.triangular
        cells = [(u, v) for u in scan.u_values for v in scan.v_values]
        print(f"\n--- Scan: triangular network, {len(cells)} (u, v) cells ---")

        def evaluate(cell: Tuple[float, float]) -> Dict[str, float]:
            u, v = cell
            return _scan_cell(
                lambda: build_system(triangular_network(u, v, tri.theta_bar, tri.a, tri.b, tri.gamma))
            )

        columns = ("u", "v", "inverse_kappa_c", "ep", "min_condition_R")
        keys = columns[2:]
    elif net.preset == NetworkPreset.CHAIN:
        chain = net.chain
        if chain.length < 2:
            raise ConfigError("SCAN: a chain scan needs at least two sites")
        cells = [(d,) for d in scan.delta_values]
        print(f"\n--- Scan: chain of {chain.length}, {len(cells)} delta values ---")
        theta_bar = 0.5 * (chain.thetas[0] + chain.thetas[1])
        delta_theta = chain.thetas[1] - chain.thetas[0]

        def evaluate(cell: Tuple[float, ...]) -> Dict[str, float]:
            (delta,) = cell
            return _scan_cell(
                lambda: build_system(
                    jacobi_chain_from_drive(
                        chain.length,
                        chain.b[0],
                        chain.a[0],
                        chain.gamma_bar,
                        delta,
                        theta_bar,
                        delta_theta,
                    )
                )
            )

        columns = ("delta", "kappa_c", "kappa_0", "ratio", "ep", "min_condition_R")
        keys = ("kappa_c", "kappa_0", "ratio", "ep", "min_condition_R")
    else:
        raise ConfigError("SCAN: requires the chain or triangular preset")

    with ThreadPoolExecutor(max_workers=max(1, run.threads)) as pool:
        results = list(pool.map(evaluate, cells))

    rows = []
    for cell, values in zip(cells, results):
        values = dict(values)
        values["ratio"] = values["kappa_c"] / values["kappa_0"]
        rows.append((*cell, *(values[k] for k in keys)))
    failed = sum(1 for values in results if math.isnan(values["ep"]))
    print(f"  {len(rows)} cells, {failed} failed")

    out = Path(run.output.directory)
    return [write_table(out / "scan", columns, rows, meta, run.output.format.value)]


def validate_regressions() -> bool:
    """Run analytic regressions against the stored baseline."""
    from core.simulation.regression import RegressionRunner

    print("\n--- Validating Analytic Regressions ---")
    report_dir = project_root / "output" / "reports"
    baseline = project_root / "tests" / "snapshots" / "analytic_baseline.json"

    runner = RegressionRunner()
    passed, _, failures = runner.compare_to_baseline(
        baseline_path=baseline, report_dir=report_dir
    )

    if passed:
        print("  Analytic regressions PASSED")
    else:
        print("  Analytic regressions FAILED:")
        for failure in failures:
            print(f"   - {failure}")
    return passed


# =============================================================================
# ENTRY POINT
# =============================================================================


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="FluctNet: fluctuations of harmonic networks")
    parser.add_argument("command", choices=COMMANDS + ("regress",), help="Analysis to run")
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.add_argument("--format", choices=[f.value for f in OutputFormat], help="Table format")
    parser.add_argument("--threads", type=int, help="Worker threads (env FLUCTNET_THREADS)")
    parser.add_argument("--seed", type=int, help="Monte Carlo seed")
    parser.add_argument("--verbose", action="store_true", help="Log solver progress")
    parser.add_argument("--summary", action="store_true", help="Show configuration summary")
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if args.command == "regress":
        return 0 if validate_regressions() else 1

    run_config = prepare_run(args)
    if args.summary:
        print(run_config.summary())

    meta = ArtifactMetadata.for_run(run_config, args.command)
    if args.command == "scan":
        written = cmd_scan(run_config, meta)
    else:
        sys_ = checked_system(run_config)
        handlers = {
            "steady": cmd_steady,
            "cgf": cmd_cgf,
            "rate": cmd_rate,
            "simulate": cmd_simulate,
        }
        written = handlers[args.command](sys_, run_config, meta)

    for path in written:
        print(f"  Written: {path}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    print(f"FluctNet v{__version__}")

    try:
        code = dispatch(args)
    except ConfigError as exc:
        print(f"\nConfiguration error: {exc}")
        return EXIT_CONFIG
    except AssumptionError as exc:
        print(f"\nAssumption violated: {exc}")
        return EXIT_ASSUMPTION
    except ModelError as exc:
        print(f"\nModel error: {exc}")
        return EXIT_CONFIG
    except (NumericError, DomainError) as exc:
        print(f"\nNumerical failure: {exc}")
        return EXIT_NUMERIC

    print("\nDone.")
    return code


if __name__ == "__main__":
    sys.exit(main())
