"""Command-line workbench: sweep scenarios, collect results, summarise.

``metagrid run`` simulates every (resource count, deadline mode,
scheduler, seed) combination of the sweep and writes one results.csv with
the exact column set::

    seed,resource_count,deadline_mode,scheduler,total_cost_gd,
    jobs_completed,tasks_completed,ga_iterations,wall_time_s

Rows are buffered and written sorted by (resource_count, deadline_mode,
scheduler, seed), so reruns with the same inputs differ only in the
wall_time_s column.

``metagrid report`` turns a results.csv into per-deadline-mode summary
tables, a GA-iterations table, and a tidy plot_data.csv.

Exit codes: 0 success, 1 bad input or config, 2 internal solver failure.
(argparse itself exits 2 on malformed command lines.)
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import statistics
import sys
from collections.abc import Sequence
from pathlib import Path

from .ga import GaParams
from .simulator import (
    ScenarioMetrics,
    UnknownSchedulerError,
    jsonl_sink,
    list_schedulers,
    run_scenario,
)
from .workload import BadConfigError, DeadlineMode, ScenarioConfig

logger = logging.getLogger(__name__)

SEED_ENV_VAR = "METAGRID_SEED"

RESULT_COLUMNS = (
    "seed",
    "resource_count",
    "deadline_mode",
    "scheduler",
    "total_cost_gd",
    "jobs_completed",
    "tasks_completed",
    "ga_iterations",
    "wall_time_s",
)

DEFAULT_RESOURCE_COUNTS = (25, 50, 100, 150, 200)
DEFAULT_MODES = ("tight", "medium", "relaxed")
DEFAULT_SCHEDULERS = ("greedy", "mmc", "relaxed-mgn", "hga", "lpga")
QUICK_RESOURCE_COUNTS = (25,)
QUICK_MODES = ("medium",)
QUICK_JOB_COUNT = 12
QUICK_GA = GaParams(
    population_size=24, convergence_window=20, max_iterations=120
)


class MissingColumnsError(ValueError):
    """A results file does not carry the expected column set."""


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(part) for part in text.replace(",", " ").split()]
    except ValueError as exc:
        raise BadConfigError(f"bad {what} list: {text!r}") from exc


def _parse_name_list(text: str) -> list[str]:
    return [part for part in text.replace(",", " ").split() if part]


class Sweep:
    """Everything one ``run`` invocation will simulate."""

    def __init__(self) -> None:
        self.resource_counts: list[int] = list(DEFAULT_RESOURCE_COUNTS)
        self.deadline_modes: list[str] = list(DEFAULT_MODES)
        self.schedulers: list[str] = list(DEFAULT_SCHEDULERS)
        self.seeds: list[int] | None = None  # resolved later
        self.job_count: int = 50
        self.interval_s: float = 50.0
        self.ga = GaParams()


def _load_ini(path: Path, sweep: Sweep) -> None:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise BadConfigError(f"cannot read config file {path}")
    known_sections = {"sweep", "ga"}
    unknown = set(parser.sections()) - known_sections
    if unknown:
        raise BadConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")

    if parser.has_section("sweep"):
        section = parser["sweep"]
        handlers = {
            "resource_counts": lambda v: setattr(
                sweep, "resource_counts", _parse_int_list(v, "resource_counts")
            ),
            "deadline_modes": lambda v: setattr(
                sweep, "deadline_modes", _parse_name_list(v)
            ),
            "schedulers": lambda v: setattr(
                sweep, "schedulers", _parse_name_list(v)
            ),
            "seeds": lambda v: setattr(sweep, "seeds", _parse_int_list(v, "seeds")),
            "job_count": lambda v: setattr(sweep, "job_count", int(v)),
            "interval_s": lambda v: setattr(sweep, "interval_s", float(v)),
        }
        for key, value in section.items():
            if key not in handlers:
                raise BadConfigError(f"unknown [sweep] key: {key}")
            try:
                handlers[key](value)
            except ValueError as exc:
                raise BadConfigError(f"bad [sweep] value for {key}: {value!r}") from exc

    if parser.has_section("ga"):
        section = parser["ga"]
        kwargs = {}
        casts = {
            "population_size": int,
            "crossover_rate": float,
            "mutation_rate": float,
            "convergence_window": int,
            "max_iterations": int,
            "elitism": int,
        }
        for key, value in section.items():
            if key not in casts:
                raise BadConfigError(f"unknown [ga] key: {key}")
            try:
                kwargs[key] = casts[key](value)
            except ValueError as exc:
                raise BadConfigError(f"bad [ga] value for {key}: {value!r}") from exc
        try:
            sweep.ga = GaParams(**kwargs)
        except ValueError as exc:
            raise BadConfigError(str(exc)) from exc


def _resolve_seeds(sweep: Sweep, cli_seeds: str | None) -> list[int]:
    """Seed precedence: --seeds flag, then the environment, then the config
    file, then the default single seed 0."""
    if cli_seeds is not None:
        return _parse_int_list(cli_seeds, "seeds")
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        return _parse_int_list(env, "seeds")
    if sweep.seeds is not None:
        return sweep.seeds
    return [0]


def _format_row(seed: int, config: ScenarioConfig, metrics: ScenarioMetrics) -> dict:
    return {
        "seed": seed,
        "resource_count": config.resource_count,
        "deadline_mode": config.deadline_mode.value,
        "scheduler": metrics.scheduler,
        "total_cost_gd": repr(metrics.total_cost_gd),
        "jobs_completed": metrics.jobs_completed,
        "tasks_completed": metrics.tasks_completed,
        "ga_iterations": metrics.ga_iterations,
        "wall_time_s": f"{metrics.wall_time_s:.6f}",
    }


def cmd_run(args: argparse.Namespace) -> int:
    sweep = Sweep()
    if args.config is not None:
        _load_ini(Path(args.config), sweep)
    if args.quick:
        sweep.resource_counts = list(QUICK_RESOURCE_COUNTS)
        sweep.deadline_modes = list(QUICK_MODES)
        sweep.job_count = min(sweep.job_count, QUICK_JOB_COUNT)
        sweep.ga = QUICK_GA
    if args.schedulers is not None:
        sweep.schedulers = _parse_name_list(args.schedulers)
    seeds = _resolve_seeds(sweep, args.seeds)
    if args.quick:
        seeds = seeds[:1]

    known = set(list_schedulers())
    bad = [s for s in sweep.schedulers if s not in known]
    if bad:
        raise UnknownSchedulerError(
            f"unknown scheduler(s) {', '.join(bad)}; choose from {', '.join(sorted(known))}"
        )
    for mode in sweep.deadline_modes:
        DeadlineMode(mode)  # raises ValueError on a bad mode name

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    combos = [
        (count, mode, scheduler, seed)
        for count in sweep.resource_counts
        for mode in sweep.deadline_modes
        for scheduler in sweep.schedulers
        for seed in seeds
    ]
    events_fh = None
    if args.verbose:
        events_fh = (out_dir / "events.jsonl").open("w")
    try:
        for i, (count, mode, scheduler, seed) in enumerate(combos, start=1):
            config = ScenarioConfig(
                resource_count=count,
                deadline_mode=DeadlineMode(mode),
                job_count=sweep.job_count,
                rng_seed=seed,
                interval_s=sweep.interval_s,
            )
            logger.info(
                "[%d/%d] %s on %d resources, %s deadlines, seed %d",
                i, len(combos), scheduler, count, mode, seed,
            )
            sink = None
            if events_fh is not None:
                events_fh.write(
                    json.dumps(
                        {
                            "kind": "run-start",
                            "resource_count": count,
                            "deadline_mode": mode,
                            "scheduler": scheduler,
                            "seed": seed,
                        }
                    )
                    + "\n"
                )
                sink = jsonl_sink(events_fh)
            metrics = run_scenario(
                config, scheduler, ga_params=sweep.ga, event_sink=sink
            )
            rows.append(_format_row(seed, config, metrics))
    finally:
        if events_fh is not None:
            events_fh.close()

    rows.sort(
        key=lambda r: (
            r["resource_count"], r["deadline_mode"], r["scheduler"], r["seed"]
        )
    )
    out_path = out_dir / "results.csv"
    with out_path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} rows to {out_path}")
    return 0


def _read_results(path: Path) -> list[dict]:
    if not path.exists():
        raise BadConfigError(f"no such results file: {path}")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        fieldnames = reader.fieldnames or []
        missing = [c for c in RESULT_COLUMNS if c not in fieldnames]
        if missing:
            raise MissingColumnsError(
                f"{path} lacks column(s): {', '.join(missing)}"
            )
        return list(reader)


def cmd_report(args: argparse.Namespace) -> int:
    in_path = Path(args.results)
    rows = _read_results(in_path)
    out_dir = Path(args.out) if args.out is not None else in_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    modes = sorted({r["deadline_mode"] for r in rows})
    schedulers = sorted({r["scheduler"] for r in rows})
    counts = sorted({int(r["resource_count"]) for r in rows})

    def mean_of(sub: list[dict], column: str) -> float:
        return statistics.fmean(float(r[column]) for r in sub)

    def stdev_of(sub: list[dict], column: str) -> float:
        values = [float(r[column]) for r in sub]
        return statistics.stdev(values) if len(values) > 1 else 0.0

    written = []
    for mode in modes:
        table_path = out_dir / f"summary_{mode}.csv"
        with table_path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["resource_count"]
            for s in schedulers:
                header += [f"{s}_mean_cost_gd", f"{s}_stdev_cost_gd"]
            writer.writerow(header)
            for count in counts:
                row: list = [count]
                for scheduler in schedulers:
                    sub = [
                        r for r in rows
                        if r["deadline_mode"] == mode
                        and r["scheduler"] == scheduler
                        and int(r["resource_count"]) == count
                    ]
                    if sub:
                        row += [
                            repr(mean_of(sub, "total_cost_gd")),
                            repr(stdev_of(sub, "total_cost_gd")),
                        ]
                    else:
                        row += ["", ""]
                writer.writerow(row)
        written.append(table_path)

    iters_path = out_dir / "iterations.csv"
    with iters_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["scheduler", "resource_count", "median_ga_iterations", "mean_ga_iterations"]
        )
        for scheduler in schedulers:
            for count in counts:
                sub = [
                    r for r in rows
                    if r["scheduler"] == scheduler
                    and int(r["resource_count"]) == count
                ]
                if not sub:
                    continue
                values = [int(r["ga_iterations"]) for r in sub]
                writer.writerow(
                    [scheduler, count, statistics.median(values), statistics.fmean(values)]
                )
    written.append(iters_path)

    plot_path = out_dir / "plot_data.csv"
    with plot_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "deadline_mode", "resource_count", "scheduler",
                "mean_total_cost_gd", "mean_jobs_completed", "mean_tasks_completed",
            ]
        )
        for mode in modes:
            for count in counts:
                for scheduler in schedulers:
                    sub = [
                        r for r in rows
                        if r["deadline_mode"] == mode
                        and r["scheduler"] == scheduler
                        and int(r["resource_count"]) == count
                    ]
                    if not sub:
                        continue
                    writer.writerow(
                        [
                            mode, count, scheduler,
                            repr(mean_of(sub, "total_cost_gd")),
                            statistics.fmean(int(r["jobs_completed"]) for r in sub),
                            statistics.fmean(int(r["tasks_completed"]) for r in sub),
                        ]
                    )
    written.append(plot_path)

    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metagrid",
        description="Deadline/budget-constrained meta-scheduling workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate a sweep and write results.csv")
    run_p.add_argument("--config", help="INI file with [sweep] and [ga] sections")
    run_p.add_argument(
        "--quick", action="store_true",
        help="small smoke sweep (25 resources, medium deadlines, 1 seed)",
    )
    run_p.add_argument(
        "--seeds", help=f"comma-separated seeds (default: ${SEED_ENV_VAR} or 0)"
    )
    run_p.add_argument(
        "--schedulers",
        help=f"comma-separated subset of: {', '.join(list_schedulers())}",
    )
    run_p.add_argument("--out", default="results", help="output directory")
    run_p.add_argument("--verbose", action="store_true", help="progress logging")
    run_p.set_defaults(func=cmd_run)

    report_p = sub.add_parser("report", help="summarise a results.csv")
    report_p.add_argument("results", help="path to a results.csv from `metagrid run`")
    report_p.add_argument(
        "--out", help="directory for summary tables (default: alongside the input)"
    )
    report_p.add_argument("--verbose", action="store_true", help="progress logging")
    report_p.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (
        BadConfigError, MissingColumnsError, UnknownSchedulerError, ValueError, OSError
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        # internal solver failure (node-limit blowup, LP backend error)
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
