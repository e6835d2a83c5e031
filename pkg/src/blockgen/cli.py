"""Command-line front end: generate, random, run, cfg, compare."""
from __future__ import annotations

import argparse
import json
import sys
from multiprocessing import Pool
from pathlib import Path
from typing import Optional, Sequence

from .cfg import build_super_cfg
from .harness import InsufficientData, compare_campaigns, random_campaign
from .program import BUNDLED, Program, ValidationError, bundled_text, parse_program
from .search import CampaignLog, SearchConfig, TestSuite, generate_suite
from .vm import RuntimeFault, StepConfig, run_test

DEFAULTS = {
    "budget_ms": 60000.0,
    "budget_evals": None,
    "seed": 0,
    "accel": None,
    "population": 10,
    "crossover": 0.8,
    "max_length": 50,
    "jobs": 1,
    "runs": 1,
    "out_dir": ".",
}

# acceleration used when neither flag nor config gives one
DEFAULT_ACCEL = {"generate": 5.0, "random": 1.0, "run": None}


class CliError(Exception):
    """Reported on stderr; the process exits with status 2."""


def _read_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CliError(f"config {path} must hold a JSON object")
    out = {}
    for key, value in doc.items():
        name = key.replace("-", "_")
        if name not in DEFAULTS:
            raise CliError(f"unknown config key {key!r}")
        out[name] = value
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Settings with precedence flags > config file > defaults."""
    settings = dict(DEFAULTS)
    settings.update(_read_config(getattr(args, "config", None)))
    for name in DEFAULTS:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    if settings["accel"] is None:
        settings["accel"] = DEFAULT_ACCEL.get(args.command)
    return settings


def load(path: str) -> Program:
    """Program from a file, falling back to the bundled corpus for bare names."""
    p = Path(path)
    try:
        if p.is_file():
            text = p.read_text(encoding="utf-8")
        elif p.name == str(path) and p.stem in BUNDLED:
            text = bundled_text(p.stem)
        else:
            raise CliError(f"program file not found: {path}")
        return parse_program(text)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{path} is not valid JSON: {exc}") from exc
    except ValidationError as exc:
        raise CliError(f"invalid program {path}: {exc}") from exc


def _write(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _seeds(settings: dict) -> list[int]:
    runs = int(settings["runs"])
    if runs < 1:
        raise CliError("--runs must be at least 1")
    return [int(settings["seed"]) + i for i in range(runs)]


def _step_config(accel) -> StepConfig:
    try:
        return StepConfig(acceleration=float(accel))
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad acceleration {accel!r}: {exc}") from exc


def _map(fn, jobs: list, n_jobs: int) -> list:
    if n_jobs > 1 and len(jobs) > 1:
        with Pool(min(n_jobs, len(jobs))) as pool:
            return pool.map(fn, jobs)
    return [fn(job) for job in jobs]


# ---------------------------------------------------------------------------
# coverage chart


def coverage_svg(series: Sequence[tuple[str, CampaignLog]], width: int = 640, height: int = 400) -> str:
    """Coverage-over-time line chart, one polyline per log, step-shaped."""
    left, right, top, bottom = 60, 20, 20, 50
    pw, ph = width - left - right, height - top - bottom
    t_max = max((log.rows[-1][0] for _, log in series if log.rows), default=0.0) or 1.0
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<g stroke="#999" stroke-width="1">'
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}"/>'
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}"/></g>',
    ]
    for pct in (0, 25, 50, 75, 100):
        y = top + ph * (1 - pct / 100)
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" font-size="11" text-anchor="end">{pct}%</text>')
    for i in range(5):
        t = t_max * i / 4
        x = left + pw * i / 4
        out.append(f'<text x="{x:.1f}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{t / 1000:.1f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" font-size="12" text-anchor="middle">'
               'time (s)</text>')
    for i, (name, log) in enumerate(series):
        color = colors[i % len(colors)]
        total = log.total or 1
        points = [(0.0, 0.0)]
        for t, _, c in log.rows:
            y = c / total
            points.append((t, points[-1][1]))
            points.append((t, y))
        coords = " ".join(f"{left + pw * t / t_max:.2f},{top + ph * (1 - y):.2f}" for t, y in points)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{left + pw - 4}" y="{top + 14 + 14 * i}" font-size="11" '
                   f'text-anchor="end" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# commands


def _search_job(job):
    program, config, step_config = job
    return generate_suite(program, config, step_config)


def cmd_generate(args) -> int:
    s = resolve(args)
    program = load(args.program)
    step_config = _step_config(s["accel"])
    try:
        configs = [SearchConfig(population_size=int(s["population"]), crossover_probability=float(s["crossover"]),
                                max_length=int(s["max_length"]), seed=seed,
                                max_wall_ms=None if s["budget_ms"] is None else float(s["budget_ms"]),
                                max_evaluations=None if s["budget_evals"] is None else int(s["budget_evals"]))
                   for seed in _seeds(s)]
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    results = _map(_search_job, [(program, c, step_config) for c in configs], int(s["jobs"]))
    out_dir = Path(s["out_dir"])
    single = len(configs) == 1
    series = []
    for config, (suite, log) in zip(configs, results):
        stem = "" if single else f"_seed{config.seed}"
        _write(out_dir / f"suite{stem}.json", suite.dumps())
        _write(out_dir / f"campaign{stem}.csv", log.to_csv())
        series.append((f"seed {config.seed}", log))
        print(f"seed {config.seed}: covered {len(set(suite.covered) & set(program.block_ids()))}/{suite.total} "
              f"blocks with {len(suite.tests)} tests after {log.rows[-1][1] if log.rows else 0} evaluations")
    if args.svg:
        _write(Path(args.svg), coverage_svg(series))
    return 0


def _random_job(job):
    program, step_config, budget, seed = job
    return random_campaign(program, step_config, budget, seed)


def cmd_random(args) -> int:
    s = resolve(args)
    program = load(args.program)
    step_config = _step_config(s["accel"])
    seeds = _seeds(s)
    logs = _map(_random_job, [(program, step_config, float(s["budget_ms"]), seed) for seed in seeds], int(s["jobs"]))
    out_dir = Path(s["out_dir"])
    series = []
    for seed, log in zip(seeds, logs):
        name = "random.csv" if len(seeds) == 1 else f"random_seed{seed}.csv"
        _write(out_dir / name, log.to_csv())
        series.append((f"seed {seed}", log))
        print(f"seed {seed}: covered {log.final_covered}/{log.total} blocks")
    if args.svg:
        _write(Path(args.svg), coverage_svg(series))
    return 0


def cmd_run(args) -> int:
    program = load(args.program)
    try:
        doc = json.loads(Path(args.suite).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise CliError(f"malformed suite {args.suite}: expected a JSON object")
        suite = TestSuite.from_json(doc)
    except OSError as exc:
        raise CliError(f"cannot read suite {args.suite}: {exc.strerror or exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"malformed suite {args.suite}: {exc}") from exc
    step_config = suite.step_config
    if args.accel is not None:
        step_config = StepConfig(step_config.step_duration_ms, float(args.accel), step_config.default_event_ms)
    targets = set(program.block_ids())
    covered: set[str] = set()
    traces = []
    try:
        for test in suite.tests:
            trace = run_test(program, step_config, suite.seed, test.events)
            covered |= trace.executed & targets
            traces.append(trace)
    except RuntimeFault as exc:
        raise CliError(f"replay failed: {exc}") from exc
    recorded = set(suite.covered) & targets
    report = {
        "program": program.name,
        "tests": len(suite.tests),
        "totalTargets": len(targets),
        "covered": len(covered),
        "recorded": len(recorded),
        "coverage": len(covered) / len(targets) if targets else 1.0,
        "match": covered == recorded,
        "missing": sorted(recorded - covered),
        "extra": sorted(covered - recorded),
    }
    if args.trace:
        lines = []
        for i, trace in enumerate(traces):
            for line in trace.to_jsonl().splitlines():
                lines.append(json.dumps({"test": i, **json.loads(line)}, sort_keys=True))
        _write(Path(args.trace), "".join(line + "\n" for line in lines))
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["match"] else 1


def cmd_cfg(args) -> int:
    program = load(args.program)
    dot = build_super_cfg(program).to_dot()
    if args.dot:
        _write(Path(args.dot), dot)
    else:
        sys.stdout.write(dot)
    return 0


def _load_logs(directory: str) -> list[CampaignLog]:
    d = Path(directory)
    if not d.is_dir():
        raise CliError(f"not a directory: {directory}")
    logs = []
    for path in sorted(d.glob("*.csv")):
        try:
            logs.append(CampaignLog.from_csv(path.read_text(encoding="utf-8")))
        except (KeyError, ValueError) as exc:
            raise CliError(f"malformed campaign log {path}: {exc}") from exc
    return logs


def cmd_compare(args) -> int:
    try:
        report = compare_campaigns(_load_logs(args.a), _load_logs(args.b))
    except InsufficientData as exc:
        raise CliError(str(exc)) from exc
    text = json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n"
    if args.out:
        _write(Path(args.out), text)
    sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockgen", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, budget=True):
        p.add_argument("--program", required=True,
                       help="program JSON file, or the name of a bundled program (" + ", ".join(BUNDLED) + ")")
        p.add_argument("--config", help="JSON file with default settings; flags take precedence")
        p.add_argument("--seed", type=int)
        p.add_argument("--accel", type=float, help="acceleration factor")
        p.add_argument("--out-dir")
        p.add_argument("--jobs", type=int, help="worker processes for independent runs")
        if budget:
            p.add_argument("--budget-ms", type=float, help="wall-equivalent budget per run")
            p.add_argument("--runs", type=int, help="number of runs with consecutive seeds")
            p.add_argument("--svg", help="write a coverage-over-time chart")

    g = sub.add_parser("generate", help="search for a test suite")
    common(g)
    g.add_argument("--budget-evals", type=int)
    g.add_argument("--population", type=int)
    g.add_argument("--crossover", type=float)
    g.add_argument("--max-length", type=int)
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("random", help="random-testing baseline")
    common(r)
    r.set_defaults(func=cmd_random)

    run = sub.add_parser("run", help="replay a suite and check its coverage")
    common(run, budget=False)
    run.add_argument("--suite", required=True)
    run.add_argument("--trace", help="write per-step JSONL traces")
    run.set_defaults(func=cmd_run)

    c = sub.add_parser("cfg", help="emit the super control-flow graph")
    c.add_argument("--program", required=True)
    c.add_argument("--dot", help="output path (stdout if omitted)")
    c.set_defaults(func=cmd_cfg)

    cmp_ = sub.add_parser("compare", help="effect size and significance of two sets of campaign logs")
    cmp_.add_argument("--a", required=True, help="directory of CSV logs")
    cmp_.add_argument("--b", required=True, help="directory of CSV logs")
    cmp_.add_argument("--out", help="also write the report here")
    cmp_.set_defaults(func=cmd_compare)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
