"""Command-line front end: ``solve``, ``gen`` and ``bench``

Exit codes: 0 on success, 1 on input or configuration errors, 2 when the
problem is infeasible, unbounded, non-convex or cannot be traversed.
"""
import csv
import sys
import json
import math
import time
import logging
import argparse
from typing import List, NamedTuple, Sequence

import numpy as np

from . import generators, retime
from .elimination import Strategy
from .errors import Infeasible, NonConvex, NotConverged, Unbounded, Untraversable
from .problem import dump_problem
from .retimer import OBJECTIVES, PathRetimer

logger = logging.getLogger(__name__)

PRESETS = ("simple", "simple-quadratic", "kinematic", "cable")
EXIT_OK, EXIT_INPUT, EXIT_PROBLEM = 0, 1, 2
SOLVE_ERRORS = (Infeasible, NonConvex, Unbounded, Untraversable, NotConverged)
INPUT_ERRORS = (ValueError, KeyError, OSError)


class BenchRecord(NamedTuple):

    """One row of the scaling table
    """

    N: int
    time_ns: int
    max_segments: int
    mean_segments: float
    objective: str


def build_preset(preset: str, N: int):
    """Problem of one of the built-in presets

    Raises
    ------
    ValueError
        Raised for an unknown preset
    """
    if preset == "simple":
        return generators.simple_benchmark(N)
    if preset == "simple-quadratic":
        return generators.simple_benchmark(N, quadratic=True)
    if preset == "kinematic":
        path = generators.circle_path(N, radius=0.5)
        return generators.kinematic_limits(path, vmax=1.0, amax=2.0)
    if preset == "cable":
        spec = generators.planar_cable_robot(generators.star_path(N))
        return generators.cable_robot_problem(spec)
    raise ValueError("Unknown preset '{}'; expected one of {}".format(preset, ", ".join(PRESETS)))


def _failure_document(err: Exception) -> dict:
    diagnostics = {"error": type(err).__name__, "message": str(err)}
    for name in ("step", "rows", "interval"):
        if getattr(err, name, None) is not None:
            diagnostics[name] = getattr(err, name)
    return {"status": "failed", "diagnostics": diagnostics}


def _write_document(retimer: PathRetimer, document: dict, output: str):
    if output:
        retimer.save_solution(document, output)
    else:
        json.dump(document, sys.stdout, sort_keys=True, indent=2, allow_nan=False)
        sys.stdout.write("\n")


def cmd_solve(retimer: PathRetimer, args) -> int:
    """Solve a problem file and write the solution document
    """
    problem = retimer.load(args.input)
    try:
        start = time.perf_counter_ns()
        profile = retimer.solve(problem, args.objective)
        elapsed = time.perf_counter_ns() - start
    except SOLVE_ERRORS as err:
        logger.error("%s: %s", type(err).__name__, err)
        _write_document(retimer, _failure_document(err), args.output)
        return EXIT_PROBLEM
    logger.info("Solved N = %d with the %s strategy in %.3f ms", problem.N, profile.strategy.value, elapsed / 1e6)

    if args.verify:
        try:
            report = retimer.verify(problem, profile)
        except SOLVE_ERRORS as err:
            # the solve stands; only the reference comparison failed
            logger.warning("Verification failed with %s: %s", type(err).__name__, err)
            report = {"error": type(err).__name__, "message": str(err)}
        if report is not None:
            profile.diagnostics["verify"] = report
    document = retimer.solution_document(problem, profile, emit_diagnostics=args.emit_diagnostics)
    _write_document(retimer, document, args.output)

    if args.csv:
        try:
            retime.export_csv(retimer.retime(profile, problem, dt=args.dt), args.csv)
        except Untraversable as err:
            logger.warning("No trajectory written: %s", err)
    return EXIT_OK


def cmd_gen(retimer: PathRetimer, args) -> int:
    """Write a built-in problem file
    """
    if args.preset not in PRESETS:
        raise ValueError("Unknown preset '{}'; expected one of {}".format(args.preset, ", ".join(PRESETS)))
    if args.N < 1:
        raise ValueError("N must be at least 1")
    problem = build_preset(args.preset, args.N)
    dump_problem(problem, args.output or "{}_{}.json".format(args.preset, args.N))
    return EXIT_OK


def bench_sizes(min_n: int, max_n: int, growth: float) -> List[int]:
    """Geometric sweep of problem sizes from ``min_n`` up to ``max_n``
    """
    if min_n < 2 or max_n < min_n:
        raise ValueError("Bench sizes must satisfy 2 <= min N <= max N")
    if growth <= 1:
        raise ValueError("Bench growth factor must exceed 1")
    sizes, n = [], float(min_n)
    while int(round(n)) <= max_n:
        if not sizes or int(round(n)) > sizes[-1]:
            sizes.append(int(round(n)))
        n *= growth
    return sizes


def run_bench(retimer: PathRetimer, sizes: Sequence[int], repetitions: int, objective: str,
              target: float = 0.0) -> List[BenchRecord]:
    """Median solve time of the benchmark problem at every size
    """
    if repetitions < 1:
        raise ValueError("Repetitions must be positive, got {}".format(repetitions))
    quadratic = objective == Strategy.QOPP.value
    records = []
    for N in sizes:
        problem = generators.simple_benchmark(N, quadratic=quadratic, target=target)
        times, profile = [], None
        for _ in range(repetitions):
            start = time.perf_counter_ns()
            profile = retimer.solve(problem, objective)
            times.append(time.perf_counter_ns() - start)
        if profile.diagnostics.get("residuals"):
            logger.warning("N = %d: residual check failed", N)
        counts = profile.segment_counts or [1]
        records.append(BenchRecord(N, int(np.median(times)), max(counts), float(np.mean(counts)),
                                   profile.strategy.value))
        logger.info("N = %d: %.3f ms", N, records[-1].time_ns / 1e6)
    return records


def scaling_slope(records: Sequence[BenchRecord]) -> float:
    """Slope of log(time) against log(N)
    """
    if len(records) < 2:
        return math.nan
    sizes = np.log([record.N for record in records])
    times = np.log([record.time_ns for record in records])
    return float(np.polyfit(sizes, times, 1)[0])


def segment_trace(retimer: PathRetimer, N: int, target: float = 0.0) -> List[int]:
    """Cost-to-go segment count at every step of one quadratic benchmark solve
    """
    problem = generators.simple_benchmark(N, quadratic=True, target=target)
    return retimer.solve(problem, Strategy.QOPP.value).segment_counts


def _write_rows(rows, header, output):
    fp = open(output, "w", newline="") if output else sys.stdout
    try:
        writer = csv.writer(fp)
        writer.writerow(header)
        writer.writerows(rows)
    finally:
        if output:
            fp.close()
            logger.info("Table saved successfully (filepath: %s)", output)


def cmd_bench(retimer: PathRetimer, args) -> int:
    """Run the scaling sweep and write the table as CSV
    """
    config = retimer.config["bench"]
    objective = args.objective if args.objective != "auto" else "topp"
    sizes = bench_sizes(args.min_n or config["min_n"], args.max_n or config["max_n"],
                        args.growth or config["growth"])
    repetitions = config["repetitions"] if args.repetitions is None else args.repetitions
    records = run_bench(retimer, sizes, repetitions, objective, config["target"])
    logger.info("log-log slope of solve time against N: %.3f", scaling_slope(records))
    _write_rows(records, BenchRecord._fields, args.output)

    if args.segments:
        counts = segment_trace(retimer, sizes[-1], config["target"])
        _write_rows(enumerate(counts), ("step", "segments"), args.segments)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="retime", description="Linear-time path retiming")
    parser.add_argument("-c", "--config", help="the path to the config file")
    parser.add_argument("-v", "--verbose", action="store_true", help="enable debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)

    solve = subparsers.add_parser("solve", help="solve a problem file")
    solve.add_argument("-i", "--input", required=True, help="problem file (JSON)")
    solve.add_argument("-o", "--output", help="solution file (JSON), stdout when omitted")
    solve.add_argument("--objective", choices=OBJECTIVES, help="override the configured objective")
    solve.add_argument("--verify", action="store_true", help="compare against the dense reference solver")
    solve.add_argument("--emit-diagnostics", action="store_true", help="include reach intervals")
    solve.add_argument("--dt", type=float, help="trajectory sampling step in seconds")
    solve.add_argument("--csv", help="trajectory output file (CSV)")

    gen = subparsers.add_parser("gen", help="write a built-in problem")
    gen.add_argument("preset", help="one of {}".format(", ".join(PRESETS)))
    gen.add_argument("N", type=int, help="number of intervals")
    gen.add_argument("-o", "--output", help="problem file (JSON)")

    bench = subparsers.add_parser("bench", help="measure solve time against N")
    bench.add_argument("--min-n", type=int, help="smallest N")
    bench.add_argument("--max-n", type=int, help="largest N")
    bench.add_argument("--growth", type=float, help="ratio between consecutive sizes")
    bench.add_argument("--repetitions", type=int, help="solves per size")
    bench.add_argument("--objective", choices=OBJECTIVES, default="topp", help="objective to benchmark")
    bench.add_argument("-o", "--output", help="bench table (CSV), stdout when omitted")
    bench.add_argument("--segments", help="segment count per step of the largest quadratic solve (CSV)")
    return parser


COMMANDS = {"solve": cmd_solve, "gen": cmd_gen, "bench": cmd_bench}


def main(argv: Sequence[str] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as err:
        # usage errors are input errors
        return EXIT_OK if err.code == 0 else EXIT_INPUT

    logging.basicConfig(format="%(levelname)s - %(message)s",
                        level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        retimer = PathRetimer(args.config)
        return COMMANDS[args.command](retimer, args)
    except SOLVE_ERRORS as err:
        logger.error("%s: %s", type(err).__name__, err)
        return EXIT_PROBLEM
    except INPUT_ERRORS as err:
        logger.error("%s: %s", type(err).__name__, err)
        return EXIT_INPUT
