from __future__ import annotations

import time
import argparse
from pathlib import Path
from typing import Any, Callable
from dataclasses import asdict, dataclass as stdlib_dataclass, replace

import numpy as np

from .main import Setup
from .utils.log import crit, danger, error, info, warn
from .utils.errors import DimensionMismatch, EmptySupport, Infeasible, InvalidParams, LoggingException, ParseError, SingularSystem, TooLarge, TrivialNullSpace, ZeroColumn
from .utils.env import get_setup_attr, get_threads
from .utils.files import digest_files, make_output
from .utils.dataclass import validate_as
from .utils.parsing import parse_matrix_csv, parse_vector_csv
from .utils.format import write_json, write_matrix_csv, write_table_csv, write_vector_csv
from .utils.types import SolveMode
from .sparse.surrogate import SurrogateParams
from .sparse.solver import SolveResult, SolverConfig, solve_constrained, solve_equality
from .sparse.conditions import coherence, nsc_estimate, omp_guarantee_k, rip_constant, rip_l1_hypothesis, stability_bound, welch_bound
from .tdoa.scene import load_scene, load_scene_file, parse_delay_table, simulate_measurements, write_delay_table
from .tdoa.signals import DEFAULT_FS, DEFAULT_SAMPLES, extract_delays, simulate_signals
from .tdoa.locator import LocalizationResult, load_locator_config, locate
from .tdoa.sweep import aggregate, load_sweep_spec, run_sweep, write_baseline, write_summary, write_trials

__all__ = ["RunReport", "build_parser", "exit_code", "main", "cmd_solve", "cmd_analyze", "cmd_simulate", "cmd_locate", "cmd_sweep"]

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DIMENSION = 3
EXIT_INFEASIBLE = 4
EXIT_INTERNAL = 5


@stdlib_dataclass(frozen=True)
class RunReport:
    """
    Provenance written next to every command's outputs.

    :param command:         Subcommand name
    :param inputs_digest:   crc32 of every input file, joined in argument order
    :param seed:            Seed the command ran with
    :param outputs:         Files written by the command
    :param wall_time:       Seconds spent in the command
    """

    command: str
    inputs_digest: str
    seed: int
    outputs: tuple[str, ...]
    wall_time: float


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, DimensionMismatch):
        return EXIT_DIMENSION
    if isinstance(exc, (Infeasible, EmptySupport)):
        return EXIT_INFEASIBLE
    return EXIT_INTERNAL


def _params(caller: Any) -> SurrogateParams:
    return validate_as(SurrogateParams, dict(p=get_setup_attr("p", 0.1), q=get_setup_attr("q", 1.0)), caller, ParseError)


def _seed() -> int:
    return int(get_setup_attr("seed", 0))


def _write_report(stem: str, suffix: str, command: str, inputs: list[Any], outputs: list[Path], started: float, payload: dict[str, Any]) -> Path:
    report_path = make_output(stem, "json", suffix)
    run = RunReport(
        command,
        digest_files(inputs),
        _seed(),
        tuple(str(p) for p in [*outputs, report_path]),
        round(time.perf_counter() - started, 3),
    )
    write_json(report_path, {"run": asdict(run), **payload})
    for path in run.outputs:
        info(f"Wrote '{path}'", command)
    return report_path


def _trace_summary(result: SolveResult) -> dict[str, Any]:
    return dict(
        mode=result.mode.name.lower(),
        iterations=result.iterations,
        converged=result.converged,
        support=list(result.support),
        fixed_point_residual=result.fixed_point_residual,
        objective_trace=list(result.objective_trace),
        residual_ok=result.residual_ok,
        box_ok=result.box_ok,
    )


def cmd_solve(args: argparse.Namespace) -> Path:
    """
    Minimizes the surrogate norm for the system in MATRIX and B.
    Writes the solution, the objective trace and a json report with support and fixed-point residual.
    """
    started = time.perf_counter()
    A = parse_matrix_csv(args.matrix)
    b = parse_vector_csv(args.b)
    if A.shape[0] != b.shape[0]:
        raise error(f"The matrix has {A.shape[0]} rows but b has {b.shape[0]} entries.", cmd_solve, DimensionMismatch)

    params = _params(cmd_solve)
    mode = SolveMode[args.mode.upper()]
    if mode == SolveMode.EQUALITY:
        cfg = validate_as(SolverConfig, dict(max_iters=args.max_iters or get_setup_attr("max_iters", 200)), cmd_solve, ParseError)
        result = solve_equality(A, b, params, cfg)
    else:
        values = dict(max_iters=args.max_iters or 30, epsilon=args.epsilon, eta=args.eta, va_low=args.va_low, va_high=args.va_high)
        cfg = validate_as(SolverConfig, {k: v for k, v in values.items() if v is not None}, cmd_solve, ParseError)
        result = solve_constrained(A, b, params, cfg)
        if not result.feasible:
            danger("The final iterate violates the residual or box bound.", cmd_solve)

    stem = Path(args.matrix).stem
    solution = write_vector_csv(make_output(stem, "csv", "_solution"), result.x)
    trace = write_table_csv(make_output(stem, "csv", "_trace"), ("iteration", "objective"), list(enumerate(result.objective_trace)))
    payload = dict(p=params.p, q=params.q, **_trace_summary(result))
    return _write_report(stem, "_solve", "solve", [args.matrix, args.b], [solution, trace], started, payload)


def _guarded(fn: Callable[[], Any], *expected: type[LoggingException]) -> dict[str, Any]:
    try:
        return dict(value=fn())
    except expected as e:
        return dict(error=type(e).__name__, message=str(e))


def _nsc_section(A: np.ndarray, k: int, params: SurrogateParams | None, samples: int, seed: int) -> dict[str, Any]:
    try:
        estimate = nsc_estimate(A, k, params, n_samples=samples, seed=seed)
    except (TrivialNullSpace, InvalidParams) as e:
        return dict(error=type(e).__name__, message=str(e))
    section = dict(
        value=estimate.value,
        witness=estimate.witness,
        exact=estimate.exact,
        nullity=estimate.nullity,
        seed=estimate.seed,
        n_samples=estimate.n_samples,
    )
    if estimate.value < 1:
        section["stability_constant"] = stability_bound(estimate.value)
    return section


def cmd_analyze(args: argparse.Namespace) -> Path:
    """Coherence, OMP guarantee, optional RIP constants and sampled null space constants of MATRIX."""
    started = time.perf_counter()
    A = parse_matrix_csv(args.matrix)
    params = _params(cmd_analyze)
    seed = _seed()
    m, n = A.shape

    report: dict[str, Any] = dict(rows=m, cols=n, k=args.k)
    report["coherence"] = _guarded(lambda: coherence(A), ZeroColumn)
    report["welch_bound"] = welch_bound(m, n)
    report["omp_guarantee_k"] = _guarded(lambda: omp_guarantee_k(A), ZeroColumn)
    if args.rip:
        report["rip"] = dict(
            delta_k=_guarded(lambda: rip_constant(A, args.k), TooLarge, InvalidParams),
            l1_hypothesis=_guarded(lambda: dict(zip(("holds", "delta_2k"), rip_l1_hypothesis(A, args.k))), TooLarge, InvalidParams),
        )
    report["nsc"] = dict(
        h=dict(p=params.p, q=params.q, **_nsc_section(A, args.k, params, args.samples, seed)),
        l1=_nsc_section(A, args.k, None, args.samples, seed),
    )
    return _write_report(Path(args.matrix).stem, "_analysis", "analyze", [args.matrix], [], started, report)


def cmd_simulate(args: argparse.Namespace) -> Path:
    """Writes the measured delays of SCENE in nanoseconds, from the geometry or from simulated recordings."""
    started = time.perf_counter()
    scene, _ = load_scene(args.scene)
    seed = _seed()
    if args.signals:
        recordings = simulate_signals(scene, seed, args.fs, args.samples, args.signal_noise)
        table = extract_delays(recordings, args.fs, scene.K)
    else:
        table = simulate_measurements(scene, seed)

    stem = Path(args.scene).stem
    delays = write_delay_table(make_output(stem, "csv", "_delays"), table)
    payload = dict(receivers=len(scene.receivers), targets=scene.K, signals=bool(args.signals), noise_sigma_ns=scene.noise_sigma * 1e9)
    return _write_report(stem, "_simulate", "simulate", [args.scene], [delays], started, payload)


def _locate_payload(result: LocalizationResult) -> dict[str, Any]:
    return dict(
        positions=result.positions,
        indices=list(result.indices),
        matched_errors=list(result.matched_errors),
        rmse=result.rmse,
        fa_score=result.fa_score,
        initial_score=result.initial_score,
        epsilon=result.epsilon,
        no_suspects=result.no_suspects,
        suspects=list(result.suspects),
        refinement_log=[asdict(step) for step in result.refinement_log],
        solver=_trace_summary(result.solver_trace),
    )


def cmd_locate(args: argparse.Namespace) -> Path:
    """
    Localizes the emitters behind DELAYS with the receivers and grid of SCENE.
    Targets listed in the scene are treated as ground truth for the matched errors.
    """
    started = time.perf_counter()
    scene = load_scene_file(args.scene)
    table = parse_delay_table(args.delays)
    receivers = np.asarray(scene.receivers, dtype=np.float64)

    defaults = dict(K=table.K, c=scene.c, noise_sigma_ns=scene.noise_sigma_ns, threads=get_threads(), p=get_setup_attr("p", 0.1), q=get_setup_attr("q", 1.0))
    overrides = dict(K=args.K, p=args.p, q=args.q, max_iters=args.max_iters, threads=get_threads(args.threads) if args.threads is not None else None)
    cfg = load_locator_config(args.locator_config, defaults, overrides)

    truths = None
    if scene.targets:
        if len(scene.targets) == cfg.K:
            truths = np.asarray(scene.targets, dtype=np.float64)
        else:
            warn(f"The scene lists {len(scene.targets)} targets but {cfg.K} are located, skipping matched errors.", cmd_locate)

    result = locate(scene.to_grid(), receivers, table, cfg, truths)
    stem = Path(args.delays).stem
    positions = write_matrix_csv(make_output(stem, "csv", "_positions"), result.positions)
    return _write_report(stem, "_locate", "locate", [args.scene, args.delays, args.locator_config], [positions], started, _locate_payload(result))


def cmd_sweep(args: argparse.Namespace) -> Path:
    """Runs the Monte Carlo grid of SPEC and writes per-trial, per-cell and optional baseline tables."""
    started = time.perf_counter()
    spec = load_sweep_spec(args.spec)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    else:
        args.setup.edit("seed", spec.seed)

    records = run_sweep(spec, get_threads(args.threads), progress=not args.no_progress)
    summaries = aggregate(records)

    stem = Path(args.spec).stem
    outputs = [
        write_trials(make_output(stem, "csv", "_trials"), records),
        write_summary(make_output(stem, "csv", "_summary"), summaries),
    ]
    if spec.baseline:
        outputs.append(write_baseline(make_output(stem, "csv", "_baseline"), records))
    payload = dict(cells=len(summaries), trials=spec.trials, summary=[asdict(s) for s in summaries])
    return _write_report(stem, "_sweep", "sweep", [args.spec], outputs, started, payload)


def _global_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="Ini file with a [SETUP] section.")
    common.add_argument("--seed", type=int, default=None, help="Base seed.")
    common.add_argument("--p", type=float, default=None, help="Surrogate smoothing parameter.")
    common.add_argument("--q", type=float, default=None, help="Surrogate exponent in (0, 1].")
    common.add_argument("--max-iters", type=int, default=None, dest="max_iters", help="Solver iteration cap.")
    common.add_argument("--out-dir", default=None, dest="out_dir", help="Folder for every output.")
    common.add_argument("--threads", type=int, default=None, help="Worker threads, 0 for all cpus.")
    common.add_argument("--debug", action="store_true", default=None, help="Verbose logging.")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="logsparse", description="Sparse recovery with the logarithmic surrogate and TDOA multi-emitter localization.")
    commands = parser.add_subparsers(dest="command", required=True)

    solve = commands.add_parser("solve", parents=[common], help="Solve a sparse recovery problem.")
    solve.add_argument("matrix", help="Matrix csv with a 'rows,cols' header.")
    solve.add_argument("b", help="Right hand side csv.")
    solve.add_argument("--mode", choices=["equality", "constrained"], default="equality")
    solve.add_argument("--epsilon", type=float, default=None, help="Residual bound of the constrained model.")
    solve.add_argument("--eta", type=float, default=None, help="Box bound of the constrained model.")
    solve.add_argument("--va-low", type=float, default=None, dest="va_low")
    solve.add_argument("--va-high", type=float, default=None, dest="va_high")
    solve.set_defaults(handler=cmd_solve)

    analyze = commands.add_parser("analyze", parents=[common], help="Recovery conditions of a matrix.")
    analyze.add_argument("matrix")
    analyze.add_argument("--k", type=int, required=True, help="Sparsity level.")
    analyze.add_argument("--rip", action="store_true", help="Enumerate restricted isometry constants.")
    analyze.add_argument("--samples", type=int, default=2000, help="Null space samples per estimate.")
    analyze.set_defaults(handler=cmd_analyze)

    simulate = commands.add_parser("simulate", parents=[common], help="Simulate delay measurements of a scene.")
    simulate.add_argument("scene", help="Scene json.")
    simulate.add_argument("--signals", action="store_true", help="Extract delays from simulated recordings.")
    simulate.add_argument("--fs", type=float, default=DEFAULT_FS, help="Sampling rate of the recordings.")
    simulate.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="Samples per recording.")
    simulate.add_argument("--signal-noise", type=float, default=0.0, dest="signal_noise", help="Receiver noise standard deviation.")
    simulate.set_defaults(handler=cmd_simulate)

    loc = commands.add_parser("locate", parents=[common], help="Localize emitters from unlabeled delays.")
    loc.add_argument("scene", help="Scene json with receivers and grid.")
    loc.add_argument("delays", help="Delay table csv in nanoseconds.")
    loc.add_argument("--locator-config", default=None, dest="locator_config", help="Ini file with a [LOCATOR] section.")
    loc.add_argument("--K", type=int, default=None, help="Number of emitters. Defaults to the delay table's column count.")
    loc.set_defaults(handler=cmd_locate)

    sweep = commands.add_parser("sweep", parents=[common], help="Monte Carlo success and error grid.")
    sweep.add_argument("spec", help="Ini file with a [SWEEP] section.")
    sweep.add_argument("--no-progress", action="store_true", dest="no_progress")
    sweep.set_defaults(handler=cmd_sweep)
    return parser


def _setup(args: argparse.Namespace) -> Setup:
    setup = Setup(config_file=args.config)
    for attr in ("out_dir", "seed", "threads", "p", "q", "max_iters", "debug"):
        value = getattr(args, attr)
        if value is not None:
            setup.edit(attr, value)
    return setup


def main(argv: list[str] | None = None) -> int:
    """
    Runs one command and returns the process exit code.
    0 ok, 2 parse error, 3 dimension mismatch, 4 infeasible, 5 anything else.
    """
    args = build_parser().parse_args(argv)
    try:
        args.setup = _setup(args)
        args.handler(args)
    except LoggingException as e:
        if isinstance(e, (Infeasible, EmptySupport, SingularSystem)):
            # raised without logging by the solvers
            error(str(e), args.command)
        return exit_code(e)
    except Exception as e:
        crit(f"{type(e).__name__}: {e}", args.command)
        return EXIT_INTERNAL
    return EXIT_OK
