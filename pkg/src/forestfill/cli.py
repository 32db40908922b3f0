"""Command-line interface.

Four subcommands: ``simulate`` runs a configured study and writes a
metrics CSV plus a summary CSV next to it, ``impute`` completes one
CSV file, ``ampute`` punches missing values into a complete CSV, and
``summarize`` regroups an existing metrics CSV.

Exit codes: 0 success, 2 bad flags or config, 3 file I/O, 4 run-level
failure (too many failed replicates, unimputable input, or an
amputation that cannot hit its target proportion).

Every flag with an environment fallback reads ``FORESTFILL_<NAME>``
when the flag is absent; explicit flags always win.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import time
from pathlib import Path

from .amputation import PatternKind, ampute, scenario_patterns
from .dataset import read_csv, write_csv
from .errors import (
    AmputationFailure,
    ConfigError,
    CsvParseError,
    ForestfillError,
    ImputationFailure,
    InvalidInput,
    StudyFailure,
    UnimputableColumn,
)
from .forest import ForestParams
from .imputer import ImputerParams, impute, parse_strategy
from .metrics import METRICS_COLUMNS, ScenarioKind, metrics_csv_row, metrics_header
from .simulation import (
    DEFAULT_MASTER_SEED,
    ScenarioConfig,
    StudyResult,
    run_study,
)
from .stochastic import SeedSpec

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FAILURE = 4

ENV_PREFIX = "FORESTFILL_"

_STRATEGY_LABELS = ("sequential", "forests", "variables")


def _env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name)


def _resolve(flag_value, env_name: str, cast, default):
    """Flag > environment > default."""
    if flag_value is not None:
        return flag_value
    raw = _env(env_name)
    if raw is None:
        return default
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {ENV_PREFIX}{env_name}={raw!r}: {exc}") from exc


# -- config files -----------------------------------------------------------

_LIST_KEYS = {"scenarios", "patterns", "strategies"}
_INT_KEYS = {
    "n_obs",
    "replicates",
    "trees",
    "min_node_size",
    "max_iterations",
    "chunks",
    "workers",
    "master_seed",
}
_OPTIONAL_INT_KEYS = {"mtry", "max_depth"}
_CONFIG_KEYS = _LIST_KEYS | _INT_KEYS | _OPTIONAL_INT_KEYS


def parse_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` comments and blanks ignored."""
    raw: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"line {lineno}: expected key = value, got {line.strip()!r}")
            key, _, value = stripped.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in raw:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            if not value:
                raise ConfigError(f"line {lineno}: empty value for {key!r}")
            raw[key] = value
    return raw


def _config_int(raw: dict, key: str, default: int) -> int:
    if key not in raw:
        return default
    try:
        return int(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {raw[key]!r}") from exc


def _config_optional_int(raw: dict, key: str) -> int | None:
    if key not in raw or raw[key].lower() in ("none", "auto"):
        return None
    try:
        return int(raw[key])
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer or 'none', got {raw[key]!r}") from exc


def _config_list(raw: dict, key: str, default: list[str]) -> list[str]:
    if key not in raw:
        return default
    items = [item.strip() for item in raw[key].split(",") if item.strip()]
    if not items:
        raise ConfigError(f"{key} must name at least one item")
    return items


def build_configs(raw: dict, seed_override: int | None = None) -> list[ScenarioConfig]:
    """Cross scenarios × patterns into one ScenarioConfig per cell."""
    scenario_names = _config_list(raw, "scenarios", [k.value for k in ScenarioKind])
    pattern_names = _config_list(raw, "patterns", [k.value for k in PatternKind])
    strategy_names = _config_list(raw, "strategies", list(_STRATEGY_LABELS))

    try:
        scenarios = [ScenarioKind(name) for name in scenario_names]
    except ValueError as exc:
        raise ConfigError(f"unknown scenario: {exc}") from exc
    try:
        patterns = [PatternKind(name) for name in pattern_names]
    except ValueError as exc:
        raise ConfigError(f"unknown pattern: {exc}") from exc

    chunks = _config_int(raw, "chunks", 3)
    workers = _config_int(raw, "workers", 3)
    try:
        strategies = tuple(
            parse_strategy(name, chunks=chunks, workers=workers) for name in strategy_names
        )
    except InvalidInput as exc:
        raise ConfigError(str(exc)) from exc

    master_seed = seed_override
    if master_seed is None:
        master_seed = _config_int(raw, "master_seed", DEFAULT_MASTER_SEED)

    try:
        return [
            ScenarioConfig(
                scenario=scenario,
                pattern=pattern,
                strategies=strategies,
                n_obs=_config_int(raw, "n_obs", 200),
                n_replicates=_config_int(raw, "replicates", 500),
                n_trees=_config_int(raw, "trees", 100),
                mtry=_config_optional_int(raw, "mtry"),
                min_node_size=_config_int(raw, "min_node_size", 5),
                max_depth=_config_optional_int(raw, "max_depth"),
                max_iterations=_config_int(raw, "max_iterations", 10),
                master_seed=master_seed,
            )
            for scenario in scenarios
            for pattern in patterns
        ]
    except InvalidInput as exc:
        raise ConfigError(str(exc)) from exc


# -- summary tables ---------------------------------------------------------

_GROUP_KEYS = ("scenario", "pattern", "strategy")
_SUMMARY_METRICS = (
    "iterations",
    "rel_bias_mean_x1",
    "rel_bias_mean_x2",
    "rel_bias_sd_x1",
    "rel_bias_sd_x2",
    "coef_bias_intercept",
    "coef_bias_x1",
    "coef_bias_x2",
    "nrmse_true",
    "nrmse_oob",
    "corr_x1x2",
)


def _lower_quantile(sorted_vals: list[float], q: float) -> float:
    # Lower interpolation: the value at index floor(q * (n - 1)).
    return sorted_vals[math.floor(q * (len(sorted_vals) - 1))]


def _quantile_triple(values: list[float]) -> tuple[float, float, float]:
    finite = sorted(v for v in values if math.isfinite(v))
    if not finite:
        nan = float("nan")
        return nan, nan, nan
    return (
        _lower_quantile(finite, 0.5),
        _lower_quantile(finite, 0.25),
        _lower_quantile(finite, 0.75),
    )


def build_summary(rows: list[dict]) -> tuple[list[str], list[list[str]]]:
    """Group metric rows by (scenario, pattern, strategy).

    Groups keep first-appearance order.  Quantiles use the lower value
    at floor(q * (n - 1)) over finite entries only, so a rerun of the
    same input writes the same bytes.
    """
    if not rows:
        raise InvalidInput("no rows to summarize")
    needed = set(_GROUP_KEYS) | {"stopped_by"} | set(_SUMMARY_METRICS)
    missing = needed - set(rows[0])
    if missing:
        raise InvalidInput(f"missing columns: {', '.join(sorted(missing))}")

    iterations_all = [int(row["iterations"]) for row in rows]
    iter_lo = min(1, min(iterations_all))
    iter_hi = max(iterations_all)

    groups: dict[tuple[str, ...], list[dict]] = {}
    for row in rows:
        key = tuple(row[k] for k in _GROUP_KEYS)
        groups.setdefault(key, []).append(row)

    header = list(_GROUP_KEYS) + ["n", "frac_stopped_at_max"]
    header += [f"n_iter_{i}" for i in range(iter_lo, iter_hi + 1)]
    for metric in _SUMMARY_METRICS:
        header += [f"{metric}_median", f"{metric}_q25", f"{metric}_q75"]

    out_rows = []
    for key, members in groups.items():
        n = len(members)
        at_max = sum(1 for row in members if row["stopped_by"] == "max_iterations")
        counts = [0] * (iter_hi - iter_lo + 1)
        for row in members:
            counts[int(row["iterations"]) - iter_lo] += 1
        cells = list(key) + [str(n), repr(at_max / n)] + [str(c) for c in counts]
        for metric in _SUMMARY_METRICS:
            values = [float(row[metric]) for row in members]
            cells += [repr(q) for q in _quantile_triple(values)]
        out_rows.append(cells)
    return header, out_rows


def _write_summary_csv(path: Path, rows: list[dict]) -> None:
    header, out_rows = build_summary(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(out_rows)


def _sibling(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}.{tag}.csv")


# -- simulate ---------------------------------------------------------------

def _write_records_csv(path: Path, records, timings: bool) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(metrics_header(include_timing=timings))
        for record in records:
            writer.writerow(metrics_csv_row(record, include_timing=timings))


def _write_failures_csv(path: Path, failures) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scenario", "pattern", "replicate", "error"])
        for f in failures:
            writer.writerow([f.scenario, f.pattern, str(f.replicate), f.error])


def _records_as_dicts(records) -> list[dict]:
    return [dict(zip(METRICS_COLUMNS, metrics_csv_row(r))) for r in records]


def _emit_study(out: Path, result: StudyResult, timings: bool) -> None:
    _write_records_csv(out, result.records, timings)
    print(f"wrote {out}")
    if result.records:
        summary_path = _sibling(out, "summary")
        _write_summary_csv(summary_path, _records_as_dicts(result.records))
        print(f"wrote {summary_path}")
    if result.failures:
        failures_path = _sibling(out, "failures")
        _write_failures_csv(failures_path, result.failures)
        print(
            f"{len(result.failures)} replicate(s) failed; wrote {failures_path}",
            file=sys.stderr,
        )


def cmd_simulate(args: argparse.Namespace) -> int:
    seed = _resolve(args.seed, "SEED", int, None)
    threads = _resolve(args.threads, "THREADS", int, 1)
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")

    raw = parse_config_file(args.config)
    configs = build_configs(raw, seed_override=seed)
    total = sum(c.n_replicates for c in configs)
    print(
        f"{len(configs)} cell(s), {total} replicate(s), "
        f"{len(configs[0].strategies)} strateg(ies), threads={threads}",
        file=sys.stderr,
    )

    def progress(done: int, total_jobs: int) -> None:
        if done % 50 == 0 or done == total_jobs:
            print(f"replicates {done}/{total_jobs}", file=sys.stderr, flush=True)

    out = Path(args.out)
    t0 = time.perf_counter()
    try:
        result = run_study(configs, threads=threads, progress=progress)
    except StudyFailure as exc:
        _emit_study(out, exc.result, args.timings)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    elapsed = time.perf_counter() - t0
    _emit_study(out, result, args.timings)
    print(f"elapsed: {elapsed:.1f}s", file=sys.stderr)
    return EXIT_OK


# -- impute -----------------------------------------------------------------

def cmd_impute(args: argparse.Namespace) -> int:
    seed = _resolve(args.seed, "SEED", int, 0)
    threads = _resolve(args.threads, "THREADS", int, 1)
    trees = _resolve(args.trees, "TREES", int, 100)
    max_iter = _resolve(args.max_iter, "MAX_ITER", int, 10)
    chunks = _resolve(args.chunks, "CHUNKS", int, 3)
    workers = _resolve(args.workers, "WORKERS", int, 3)
    label = _resolve(args.strategy, "STRATEGY", str, "sequential")

    strategy = parse_strategy(label, chunks=chunks, workers=workers)
    params = ImputerParams(
        forest=ForestParams(
            n_trees=trees,
            mtry=args.mtry,
            min_node_size=args.min_node_size,
        ),
        max_iterations=max_iter,
        seed=SeedSpec(seed),
    )

    matrix, mask = read_csv(args.infile)
    result = impute(matrix, mask, params, strategy, threads=threads)
    write_csv(args.out, result.imputed)
    n_filled = int(mask.mask.sum())
    print(f"imputed {n_filled} cell(s) in {result.iterations_performed} iteration(s)")
    print(f"stopped by: {result.stopped_by.value}")
    if not math.isnan(result.oob_nrmse_final):
        print(f"oob nrmse: {result.oob_nrmse_final:.6f}")
    print(f"wrote {args.out}")
    return EXIT_OK


# -- ampute -----------------------------------------------------------------

def cmd_ampute(args: argparse.Namespace) -> int:
    seed = _resolve(args.seed, "SEED", int, 0)
    matrix, mask = read_csv(args.infile)
    if mask.any_missing():
        raise InvalidInput("input to ampute must be fully observed")
    if args.prop is not None and not 0.0 < args.prop < 1.0:
        raise ConfigError(f"prop must be in (0, 1), got {args.prop}")

    weight_column = 0
    if args.weight_col is not None:
        if args.weight_col not in matrix.column_names:
            raise ConfigError(f"no column named {args.weight_col!r}")
        weight_column = matrix.column_index(args.weight_col)

    kind = PatternKind(args.pattern)
    spec = scenario_patterns(
        kind,
        n_cols=matrix.n_cols,
        weight_column=weight_column,
        prop=args.prop if args.prop is not None else 0.5,
    )
    outcome = ampute(matrix, spec, SeedSpec(seed))
    write_csv(args.out, matrix, outcome.mask)
    print(f"realized proportion: {outcome.realized_prop:.4f}")
    print(f"logistic shift: {outcome.shift:.6f}")
    print(f"wrote {args.out}")
    return EXIT_OK


# -- summarize --------------------------------------------------------------

def cmd_summarize(args: argparse.Namespace) -> int:
    with open(args.infile, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and any(v is None for v in rows[-1].values()):
        raise InvalidInput("ragged csv: last row is short")
    _write_summary_csv(Path(args.out), rows)
    print(f"wrote {args.out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forestfill",
        description="Random-forest imputation and its simulation harness.",
        epilog=(
            "Environment fallbacks: FORESTFILL_SEED, FORESTFILL_THREADS, "
            "FORESTFILL_TREES, FORESTFILL_MAX_ITER, FORESTFILL_CHUNKS, "
            "FORESTFILL_WORKERS, FORESTFILL_STRATEGY."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a configured study")
    sim.add_argument("--config", required=True, help="key = value config file")
    sim.add_argument("--out", required=True, help="metrics CSV to write")
    sim.add_argument("--seed", type=int, default=None, help="override master seed")
    sim.add_argument("--threads", type=int, default=None, help="replicate worker processes")
    sim.add_argument(
        "--timings",
        action="store_true",
        help="append an elapsed_ms column (breaks byte-for-byte reruns)",
    )
    sim.set_defaults(func=cmd_simulate)

    imp = sub.add_parser("impute", help="complete one CSV file")
    imp.add_argument("--in", dest="infile", required=True, help="CSV with NA or empty cells")
    imp.add_argument("--out", required=True, help="completed CSV to write")
    imp.add_argument(
        "--strategy",
        choices=_STRATEGY_LABELS,
        default=None,
        help="execution strategy (default sequential)",
    )
    imp.add_argument("--trees", type=int, default=None, help="trees per forest (default 100)")
    imp.add_argument("--max-iter", type=int, default=None, help="iteration cap (default 10)")
    imp.add_argument("--chunks", type=int, default=None, help="forest chunks (default 3)")
    imp.add_argument("--workers", type=int, default=None, help="variable workers (default 3)")
    imp.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    imp.add_argument("--threads", type=int, default=None, help="threads inside one imputation")
    imp.add_argument("--mtry", type=int, default=None, help="features per split (default sqrt)")
    imp.add_argument("--min-node-size", type=int, default=5, help="split size floor (default 5)")
    imp.set_defaults(func=cmd_impute)

    amp = sub.add_parser("ampute", help="punch missing values into a complete CSV")
    amp.add_argument("--in", dest="infile", required=True, help="fully observed CSV")
    amp.add_argument("--out", required=True, help="CSV with NA cells to write")
    amp.add_argument(
        "--pattern",
        choices=[k.value for k in PatternKind],
        default=PatternKind.TWO_CELLS.value,
        help="which cells go missing together",
    )
    amp.add_argument("--prop", type=float, default=None, help="target row proportion (default 0.5)")
    amp.add_argument("--weight-col", default=None, help="column steering missingness (default first)")
    amp.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    amp.set_defaults(func=cmd_ampute)

    summ = sub.add_parser("summarize", help="group an existing metrics CSV")
    summ.add_argument("--in", dest="infile", required=True, help="metrics CSV")
    summ.add_argument("--out", required=True, help="summary CSV to write")
    summ.set_defaults(func=cmd_summarize)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CsvParseError, InvalidInput) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (StudyFailure, ImputationFailure, AmputationFailure, UnimputableColumn) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except ForestfillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
