"""Experiment sweeps from the command line.

Config files hold ``key = value`` lines. Keys are either simulation
parameters (see :class:`uorasim.config.SimConfig`) or sweep settings:
``n_stas_list``, ``n_ra_list``, ``bandwidth_list`` (comma-separated, braces
optional), ``n_runs``, ``out``, ``trace``, ``oracle_tolerance``,
``oracle_cycles``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import statistics
import sys
import types
import typing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

from uorasim.analytics import saturation_throughput_estimate
from uorasim.config import DEFAULT_RU_TONES, SimConfig
from uorasim.engine import Simulator, format_trace
from uorasim.errors import ConfigError

log = logging.getLogger("uorasim")

RESULT_COLUMNS = [
    "bandwidth_mhz", "n_stas", "n_ra", "run", "seed", "throughput_mbps",
    "ra_success_rate", "ra_collision_rate", "ra_idle_rate", "mean_delay_us",
]
METRIC_COLUMNS = RESULT_COLUMNS[5:]
SUMMARY_COLUMNS = ["bandwidth_mhz", "n_stas", "n_ra", "runs"] + [
    f"{name}_{stat}" for name in METRIC_COLUMNS for stat in ("mean", "std")
]

DEFAULT_N_STAS = [9, 18, 27, 36, 45, 54, 63, 72, 81, 90, 99]
DEFAULT_N_RA = [1, 2, 4, 8]

EXIT_OK, EXIT_USAGE, EXIT_ORACLE = 0, 1, 2


@dataclass
class ExperimentSpec:
    base: SimConfig = field(default_factory=SimConfig)
    n_stas_list: list[int] = field(default_factory=lambda: list(DEFAULT_N_STAS))
    n_ra_list: list[int] = field(default_factory=lambda: list(DEFAULT_N_RA))
    bandwidth_list: list[int] = field(default_factory=lambda: [20])
    n_runs: int = 5
    out: str = "results"
    trace: bool = False
    oracle_tolerance: float = 0.10
    oracle_cycles: int = 20_000

    def validate(self) -> None:
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        for name in ("n_stas_list", "n_ra_list", "bandwidth_list"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        for point in self.points():
            self.point_config(*point)

    def points(self) -> list[tuple[int, int, int]]:
        return [
            (bw, n, ra)
            for bw in self.bandwidth_list
            for n in self.n_stas_list
            for ra in self.n_ra_list
        ]

    def point_config(self, bandwidth_mhz: int, n_stas: int, n_ra: int, run: int = 0) -> SimConfig:
        tones = DEFAULT_RU_TONES.get(bandwidth_mhz, self.base.ru_tones)
        if bandwidth_mhz == self.base.bandwidth_mhz:
            tones = self.base.ru_tones
        return self.base.replace(
            bandwidth_mhz=bandwidth_mhz, ru_tones=tones, n_stas=n_stas, n_ra=n_ra,
            seed=self.base.seed + run,
        )


_SPEC_LISTS = {"n_stas_list", "n_ra_list", "bandwidth_list"}
_SPEC_SCALARS = {"n_runs": int, "out": str, "trace": bool,
                 "oracle_tolerance": float, "oracle_cycles": int}


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_value(text: str, kind):
    if kind is bool:
        return _parse_bool(text)
    origin = typing.get_origin(kind)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(kind) if a is not type(None)]
        if text.lower() == "none":
            return None
        return _parse_value(text, args[0])
    return kind(text)


def _parse_int_list(text: str) -> list[int]:
    items = text.strip().strip("{}[]").split(",")
    return [int(x) for x in (i.strip() for i in items) if x]


def load_config(path: str | Path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    hints = typing.get_type_hints(SimConfig)
    sim_fields = {f.name for f in dataclasses.fields(SimConfig)}
    sim_values: dict = {}
    spec_values: dict = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key in sim_fields:
                sim_values[key] = _parse_value(value, hints[key])
            elif key in _SPEC_LISTS:
                spec_values[key] = _parse_int_list(value)
            elif key in _SPEC_SCALARS:
                spec_values[key] = _parse_value(value, _SPEC_SCALARS[key])
            else:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    try:
        base = SimConfig(**sim_values)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if "n_runs" in sim_values and "n_runs" not in spec_values:
        spec_values["n_runs"] = base.n_runs
    spec = ExperimentSpec(base=base, **spec_values)
    if "bandwidth_list" not in spec_values:
        spec.bandwidth_list = [base.bandwidth_mhz]
    if "n_ra_list" not in spec_values and "n_ra" in sim_values:
        spec.n_ra_list = [base.n_ra]
    if "n_stas_list" not in spec_values and "n_stas" in sim_values:
        spec.n_stas_list = [base.n_stas]
    spec.validate()
    return spec


# -- running ----------------------------------------------------------------


def _run_point(task: tuple[SimConfig, tuple, int, str | None]) -> dict:
    config, (bw, n, ra), run, trace_dir = task
    sim = Simulator(config, trace=trace_dir is not None)
    m = sim.run()
    if trace_dir is not None:
        name = f"trace_bw{bw}_n{n}_ra{ra}_run{run}.tsv"
        Path(trace_dir, name).write_text(format_trace(sim.trace))
    return {
        "bandwidth_mhz": bw, "n_stas": n, "n_ra": ra, "run": run, "seed": config.seed,
        "throughput_mbps": m.throughput_mbps,
        "ra_success_rate": m.ra_success_rate,
        "ra_collision_rate": m.ra_collision_rate,
        "ra_idle_rate": m.ra_idle_rate,
        "mean_delay_us": m.mean_delay_us,
    }


def summarize(rows: list[dict]) -> list[dict]:
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault((row["bandwidth_mhz"], row["n_stas"], row["n_ra"]), []).append(row)
    out = []
    for (bw, n, ra), group in sorted(groups.items()):
        entry = {"bandwidth_mhz": bw, "n_stas": n, "n_ra": ra, "runs": len(group)}
        for name in METRIC_COLUMNS:
            values = [r[name] for r in group]
            entry[f"{name}_mean"] = statistics.mean(values)
            entry[f"{name}_std"] = statistics.stdev(values) if len(values) > 1 else 0.0
        out.append(entry)
    return out


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})


def run_experiments(spec: ExperimentSpec, jobs: int = 1) -> list[dict]:
    """Run every (sweep point, replication) and write results.csv and summary.csv."""
    out = Path(spec.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        trace_dir = None
        if spec.trace:
            trace_dir = out / "traces"
            trace_dir.mkdir(exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot write to {out}: {exc}") from None
    tasks = [
        (spec.point_config(*point, run=run), point, run, str(trace_dir) if trace_dir else None)
        for point in spec.points()
        for run in range(spec.n_runs)
    ]
    log.info("running %d simulations with %d job(s)", len(tasks), jobs)
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_point, tasks))
    else:
        rows = [_run_point(t) for t in tasks]
    rows.sort(key=lambda r: (r["bandwidth_mhz"], r["n_stas"], r["n_ra"], r["run"]))
    try:
        _write_csv(out / "results.csv", RESULT_COLUMNS, rows)
        _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summarize(rows))
    except OSError as exc:
        raise ConfigError(f"cannot write results to {out}: {exc}") from None
    return rows


@dataclass
class OracleComparison:
    bandwidth_mhz: int
    n_stas: int
    n_ra: int
    simulated: float
    estimated: float
    deviation: float
    passed: bool


def compare_with_oracle(spec: ExperimentSpec, rows: list[dict], stream: TextIO | None = None) -> bool:
    """Compare mean simulated throughput with the analytic estimate per sweep point."""
    stream = stream or sys.stdout
    results = []
    for entry in summarize(rows):
        point = (entry["bandwidth_mhz"], entry["n_stas"], entry["n_ra"])
        sim = entry["throughput_mbps_mean"]
        est = saturation_throughput_estimate(
            spec.point_config(*point), cycles=spec.oracle_cycles, seed=spec.base.seed
        )
        if est > 0:
            dev = abs(sim - est) / est
        else:
            dev = 0.0 if sim == 0 else float("inf")
        results.append(OracleComparison(*point, sim, est, dev, dev <= spec.oracle_tolerance))
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(
            f"{status} bw={r.bandwidth_mhz} n_stas={r.n_stas} n_ra={r.n_ra} "
            f"sim={r.simulated:.3f}Mbps est={r.estimated:.3f}Mbps dev={r.deviation:.2%}",
            file=stream,
        )
    return all(r.passed for r in results)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uorasim", description="Run UORA throughput sweeps.")
    parser.add_argument("--config", help="key = value experiment file (defaults if omitted)")
    parser.add_argument("--out", help="output directory (overrides the config)")
    parser.add_argument("--seed", type=int, help="base seed; run r uses seed + r")
    parser.add_argument("--trace", action="store_true", help="write per-run event traces")
    parser.add_argument("--compare-oracle", action="store_true",
                        help="compare throughput with the analytic estimate")
    parser.add_argument("--jobs", type=int, default=1, help="parallel simulation processes")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        spec = load_config(args.config) if args.config else ExperimentSpec()
        if args.out:
            spec.out = args.out
        if args.seed is not None:
            spec.base = spec.base.replace(seed=args.seed)
        if args.trace:
            spec.trace = True
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        rows = run_experiments(spec, jobs=args.jobs)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.compare_oracle and not compare_with_oracle(spec, rows):
        return EXIT_ORACLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
