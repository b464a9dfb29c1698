"""Command-line front end: config parsing, dispatch, stable serialization.

Configs are line-oriented `key = value` text: `#` starts a comment, blank
lines are skipped, arrays are whitespace-separated numbers.  Recognized keys
are `a` and `b` (the rate arrays, required) plus the simulation keys
`horizon`, `seed`, `replicas`, `burn_in`, `initial_gaps`, and `cap`.  Unknown
and duplicate keys are hard errors carrying the line number, so a typo cannot
silently fall back to a default.

Serialization is bit-stable on purpose: the machine-readable report is
canonical JSON (fixed key order, two-space indent, shortest round-trip
decimals, trailing newline), CSV traces have a fixed header and 6-decimal
times, and human-readable numbers print with 12 significant digits.  Exit
codes: 0 ok, 1 verification failure, 2 usage or config error, 3 critical tie.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import __version__
from .core import CloudReport, RateSystem, validate
from .partition import analyze
from .simulate import RNG_FAMILY, SimConfig, empirical_speeds, run_replicas
from .verify import SimBudget, VerificationReport, verify_instance

EXIT_OK = 0
EXIT_VERIFICATION_FAILURE = 1
EXIT_USAGE = 2
EXIT_CRITICAL_TIE = 3


class ConfigError(ValueError):
    """Malformed config text; the message carries the location."""


@dataclass(frozen=True)
class ConfigFile:
    a: tuple[float, ...]
    b: tuple[float, ...]
    horizon: float | None = None
    seed: int | None = None
    replicas: int | None = None
    burn_in: float | None = None
    initial_gaps: tuple[int, ...] | None = None
    cap: int | None = None


_ARRAY_FLOAT_KEYS = ("a", "b")
_SCALAR_FLOAT_KEYS = ("horizon", "burn_in")
_SCALAR_INT_KEYS = ("seed", "replicas", "cap")
_ARRAY_INT_KEYS = ("initial_gaps",)
_ALL_KEYS = tuple(f.name for f in fields(ConfigFile))


def _parse_float(token: str, lineno: int, col: int) -> float:
    try:
        x = float(token)
    except ValueError:
        raise ConfigError(
            f"line {lineno}, column {col}: {token!r} is not a number"
        ) from None
    if not math.isfinite(x):
        raise ConfigError(
            f"line {lineno}, column {col}: {token!r} is not finite"
        )
    return x


def _parse_int(token: str, lineno: int, col: int) -> int:
    try:
        return int(token, 10)
    except ValueError:
        raise ConfigError(
            f"line {lineno}, column {col}: {token!r} is not an integer"
        ) from None


def parse_config(text: str) -> ConfigFile:
    """Parse config text; raises ConfigError with line/column diagnostics."""
    seen: dict[str, int] = {}
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        if "=" not in line:
            raise ConfigError(
                f"line {lineno}, column 1: expected 'key = value', "
                f"got {line.strip()!r}"
            )
        key_part, _, value_part = line.partition("=")
        key = key_part.strip()
        if not key:
            raise ConfigError(f"line {lineno}, column 1: missing key before '='")
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r} at line {lineno}")
        if key in seen:
            raise ConfigError(
                f"duplicate key {key!r} at line {lineno} "
                f"(first set at line {seen[key]})"
            )
        seen[key] = lineno

        tokens = value_part.split()
        if not tokens:
            raise ConfigError(
                f"line {lineno}, column {len(line.rstrip()) + 1}: "
                f"key {key!r} has no value"
            )

        def col_of(token: str) -> int:
            return line.index(token, len(key_part) + 1) + 1

        if key in _ARRAY_FLOAT_KEYS:
            values[key] = tuple(
                _parse_float(t, lineno, col_of(t)) for t in tokens
            )
        elif key in _ARRAY_INT_KEYS:
            parsed = tuple(_parse_int(t, lineno, col_of(t)) for t in tokens)
            if any(g < 0 for g in parsed):
                raise ConfigError(
                    f"line {lineno}: {key!r} entries must be non-negative"
                )
            values[key] = parsed
        else:
            if len(tokens) > 1:
                raise ConfigError(
                    f"line {lineno}, column {col_of(tokens[1])}: "
                    f"key {key!r} takes a single value"
                )
            if key in _SCALAR_FLOAT_KEYS:
                values[key] = _parse_float(tokens[0], lineno, col_of(tokens[0]))
            else:
                values[key] = _parse_int(tokens[0], lineno, col_of(tokens[0]))

    for req in ("a", "b"):
        if req not in values:
            raise ConfigError(f"missing required key {req!r}")
    if len(values["a"]) != len(values["b"]):
        raise ConfigError(
            f"length mismatch: 'a' has {len(values['a'])} entries, "
            f"'b' has {len(values['b'])}"
        )
    return ConfigFile(**values)


def format_config(cfg: ConfigFile) -> str:
    """Serialize a ConfigFile so that parse_config round-trips it exactly."""
    out = []
    for f in fields(ConfigFile):
        val = getattr(cfg, f.name)
        if val is None:
            continue
        if f.name in _ARRAY_FLOAT_KEYS:
            body = " ".join(repr(float(x)) for x in val)
        elif f.name in _ARRAY_INT_KEYS:
            body = " ".join(str(int(x)) for x in val)
        elif f.name in _SCALAR_FLOAT_KEYS:
            body = repr(float(val))
        else:
            body = str(int(val))
        out.append(f"{f.name} = {body}")
    return "\n".join(out) + "\n"


def _load_config(path: str) -> ConfigFile:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _rates(cfg: ConfigFile) -> RateSystem:
    return validate(np.asarray(cfg.a), np.asarray(cfg.b))


def _g(x: float) -> str:
    return f"{float(x):.12g}"


def report_document(report: CloudReport, seed: int | None) -> dict:
    """CloudReport as a canonically ordered plain dict (the JSON schema)."""
    return {
        "partition": [[p.ell, p.last] for p in report.partition],
        "rho": [float(x) for x in report.rho],
        "speeds": [float(x) for x in report.speeds],
        "cloud_speeds": [float(x) for x in report.cloud_speeds],
        "widths": [None if w is None else float(w)
                   for w in report.expected_widths],
        "flags": {
            "all_singletons": report.flags["all_singletons"],
            "single_cloud": report.flags["single_cloud"],
            "all_speeds_positive": report.flags["all_speeds_positive"],
            "critical_tie": report.flags["critical_tie"],
        },
        "clt": None if report.clt is None else {
            "speed": float(report.clt[0]),
            "sigma2": float(report.clt[1]),
        },
        "meta": {"seed": seed, "rng": RNG_FAMILY, "version": __version__},
    }


def render_json(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _labels(part) -> str:
    return "{" + ",".join(str(u) for u in part.labels) + "}"


def _render_human(report: CloudReport) -> str:
    n = report.partition.n_particles
    lines = [f"particles: {n}   gaps: {n - 1}",
             f"partition: {report.partition!r}"]
    for i, part in enumerate(report.partition):
        row = f"cloud {i + 1}: {_labels(part)}  speed {_g(report.cloud_speeds[i])}"
        w = report.expected_widths[i]
        if w is not None:
            row += f"  expected width {_g(w)}"
        lines.append(row)
    if n > 1:
        lines.append("rho:    " + " ".join(_g(x) for x in report.rho))
    lines.append("speeds: " + " ".join(_g(x) for x in report.speeds))
    fl = report.flags
    lines.append(
        "flags: "
        + " ".join(f"{k}={'true' if fl[k] else 'false'}"
                   for k in ("all_singletons", "single_cloud",
                             "all_speeds_positive", "critical_tie"))
    )
    if report.clt is not None:
        lines.append(f"clt: speed {_g(report.clt[0])}  "
                     f"sigma2 {_g(report.clt[1])}")
    if report.ties:
        lines.append(
            "critical tie at gap(s) "
            + ", ".join(str(g) for g in report.ties)
            + ": adjacent speeds or a boundary load sit at the decision "
              "threshold; the exact classification is unresolved"
        )
    return "\n".join(lines)


def _render_trace(report: CloudReport) -> str:
    steps = report.trace.steps
    lines = ["merge trace:"]
    for k, step in enumerate(steps):
        if step.merged is not None:
            head = f"iter {step.iteration}: merge parts " \
                   f"{step.merged + 1}+{step.merged + 2}"
        elif k == 0:
            head = "start"
        else:
            head = f"iter {step.iteration}: stop"
        lines.append(
            f"  {head:<24s} {step.partition!r}  speeds "
            + " ".join(_g(v) for v in step.speeds)
        )
    lines.append(f"  {report.trace.n_merges} merge(s)")
    return "\n".join(lines)


def cmd_analyze(path: str, json_out: bool = False,
                trace_merges: bool = False) -> int:
    try:
        cfg = _load_config(path)
        rates = _rates(cfg)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    report = analyze(rates)
    if json_out:
        sys.stdout.write(render_json(report_document(report, cfg.seed)))
    else:
        print(_render_human(report))
        if trace_merges:
            print(_render_trace(report))
    return EXIT_CRITICAL_TIE if report.flags["critical_tie"] else EXIT_OK


def _write_csv(path: str, runs, sample_times) -> None:
    n = runs[0].final_positions.size
    header = "replica,time," + ",".join(f"x_{i}" for i in range(1, n + 1))
    rows = [header]
    for r, stats in enumerate(runs):
        times, positions = stats.snapshots
        for t, pos in zip(times, positions):
            rows.append(
                f"{r},{t:.6f}," + ",".join(str(int(x)) for x in pos)
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def cmd_simulate(path: str, horizon: float | None = None,
                 seed: int | None = None, replicas: int | None = None,
                 out_csv: str | None = None) -> int:
    try:
        cfg = _load_config(path)
        rates = _rates(cfg)
        T = horizon if horizon is not None else cfg.horizon
        if T is None:
            raise ConfigError("horizon required (config key or --horizon)")
        run_seed = seed if seed is not None else (
            cfg.seed if cfg.seed is not None else 0)
        n_rep = replicas if replicas is not None else (
            cfg.replicas if cfg.replicas is not None else 1)
        if n_rep < 1:
            raise ConfigError("replicas must be at least 1")
        sample_times = tuple(np.linspace(0.0, T, 101))
        sim_cfg = SimConfig(
            horizon=float(T), seed=run_seed,
            initial_gaps=cfg.initial_gaps, burn_in=cfg.burn_in,
            sample_times=sample_times,
        )
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE

    runs = run_replicas(rates, sim_cfg, n_rep)

    print(f"# seed = {run_seed}")
    print(f"# rng = {RNG_FAMILY}")
    print(f"# version = {__version__}")
    print(f"# horizon = {_g(T)}   replicas = {n_rep}   "
          f"burn_in = {_g(runs[0].meta['burn_in'])}")
    speeds = np.stack([empirical_speeds(s, T) for s in runs])
    mean = speeds.mean(axis=0)
    lines = ["empirical speeds:"]
    if n_rep >= 2:
        se = speeds.std(axis=0, ddof=1) / math.sqrt(n_rep)
        for i in range(mean.size):
            lines.append(f"  particle {i + 1}: {_g(mean[i])} +- {_g(se[i])}")
    else:
        for i in range(mean.size):
            lines.append(f"  particle {i + 1}: {_g(mean[i])}")
    print("\n".join(lines))

    occ = sum(s.gap_occupation.marginals for s in runs)
    total = sum(s.gap_occupation.total_time for s in runs)
    if rates.n_gaps:
        print("gap occupation (mean, P[0..4]):")
        vals = np.arange(occ.shape[1])
        for g in range(rates.n_gaps):
            pmf = occ[g] / total
            mean_gap = float((vals * pmf).sum())
            head = " ".join(_g(p) for p in pmf[:5])
            print(f"  gap {g + 1}: mean {_g(mean_gap)}  {head}")
    print(f"events: {sum(s.event_count for s in runs)}")

    if out_csv is not None:
        try:
            _write_csv(out_csv, runs, sample_times)
        except OSError as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_USAGE
        print(f"wrote {out_csv}")
    return EXIT_OK


def _render_verification(report: VerificationReport) -> str:
    lines = [
        f"instance: a = {report.rates.a.tolist()}  b = {report.rates.b.tolist()}",
        f"budget: horizon {_g(report.budget.horizon)}, "
        f"{report.budget.replicas} replicas, seed {report.budget.seed}",
    ]
    for c in report.checks:
        row = f"[{c.status:>7s}] {c.name}"
        if c.discrepancy is not None and c.threshold is not None:
            row += f"  discrepancy {_g(c.discrepancy)} vs {_g(c.threshold)}"
        if c.note:
            row += f"  ({c.note})"
        lines.append(row)
    verdict = "CRITICAL TIE" if report.critical_tie else (
        "PASS" if report.all_passed else "FAIL")
    lines.append(f"result: {verdict}")
    return "\n".join(lines)


def cmd_verify(path: str, budget: float | None = None,
               seed: int | None = None) -> int:
    try:
        cfg = _load_config(path)
        rates = _rates(cfg)
        sim_budget = SimBudget(
            horizon=budget if budget is not None else (
                cfg.horizon if cfg.horizon is not None else 1e5),
            replicas=cfg.replicas if cfg.replicas is not None else 16,
            seed=seed if seed is not None else (
                cfg.seed if cfg.seed is not None else 0),
        )
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    report = verify_instance(rates, sim_budget, stationary_cap=cfg.cap)
    print(_render_verification(report))
    if report.critical_tie:
        return EXIT_CRITICAL_TIE
    return EXIT_OK if report.all_passed else EXIT_VERIFICATION_FAILURE


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="excloud",
        description="Long-run analysis and simulation of finite "
                    "heterogeneous exclusion processes on the integer lattice.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze",
                       help="cloud partition, loads, speeds, limit laws")
    p.add_argument("config", help="path to a config file")
    p.add_argument("--json", action="store_true",
                   help="machine-readable canonical JSON")
    p.add_argument("--trace-merges", action="store_true",
                   help="print the merge procedure step by step")

    p = sub.add_parser("simulate", help="Monte-Carlo runs with statistics")
    p.add_argument("config")
    p.add_argument("--horizon", type=float, help="simulated time units")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--replicas", type=int, help="independent runs")
    p.add_argument("--out-csv", help="write position snapshots as CSV")

    p = sub.add_parser("verify",
                       help="run every analysis-vs-oracle-vs-simulation check")
    p.add_argument("config")
    p.add_argument("--budget", type=float,
                   help="simulation horizon per check (default 1e5)")
    p.add_argument("--seed", type=int, help="master seed for all checks")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "analyze":
        return cmd_analyze(args.config, json_out=args.json,
                           trace_merges=args.trace_merges)
    if args.command == "simulate":
        if args.horizon is not None and args.horizon <= 0:
            print("error: --horizon must be positive", file=sys.stderr)
            return EXIT_USAGE
        if args.replicas is not None and args.replicas < 1:
            print("error: --replicas must be at least 1", file=sys.stderr)
            return EXIT_USAGE
        return cmd_simulate(args.config, horizon=args.horizon, seed=args.seed,
                            replicas=args.replicas, out_csv=args.out_csv)
    return cmd_verify(args.config, budget=args.budget, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
