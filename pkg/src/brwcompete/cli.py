"""Command-line entry point.

    brwcompete simulate     --config cfg.json --out DIR [--reps N --horizon T ...]
    brwcompete sweep        --config cfg.json --p-grid 0,1/10,1/5
    brwcompete shape        --config cfg.json --horizon 30 --reps 50
    brwcompete advantage    --config cfg.json [--direction 1,0 ...]
    brwcompete oracle-check --config cfg.json --horizon 2 --reps 50000

Every run writes its outputs plus ``manifest.json`` to the output directory.
``--from-manifest PATH`` repeats a run exactly from a manifest.

Exit status: 0 success, 1 usage or configuration error, 2 runtime abort.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import secrets
import sys
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

import jsonschema

from . import __version__
from .advantage import supercritical_report
from .engine import CountOverflowError, run
from .experiments import (
    ESTIMATORS,
    EstimateTable,
    EventProxySpec,
    axis_directions,
    best_threshold,
    classify_outcome,
    p_sweep,
)
from .laws import (
    TIE_BREAKS,
    ConfigError,
    CountMode,
    InitialCell,
    LawError,
    ReproductionLaw,
    TwoTypeConfig,
    as_fraction,
)

EXIT_OK, EXIT_USAGE, EXIT_ABORT = 0, 1, 2
OUT_ENV = "BRWCOMPETE_OUT"
SUBCOMMANDS = ("simulate", "sweep", "shape", "advantage", "oracle-check")

_rational = {
    "oneOf": [
        {"type": "integer", "minimum": 0},
        {"type": "string", "pattern": r"^\s*\d+\s*(/\s*\d+\s*)?$"},
        {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
    ]
}
_site = {"type": "array", "items": {"type": "integer"}, "minItems": 1}
_law = {
    "type": "object",
    "required": ["offspring", "displacement"],
    "additionalProperties": False,
    "properties": {
        "offspring": {
            "type": "array", "minItems": 1,
            "items": {"type": "array", "minItems": 3, "maxItems": 3,
                      "prefixItems": [{"type": "integer"}, {"type": "integer"}, {"type": "integer", "minimum": 1}]},
        },
        "displacement": {
            "type": "array", "minItems": 1,
            "items": {"type": "array", "minItems": 3, "maxItems": 3,
                      "prefixItems": [_site, {"type": "integer"}, {"type": "integer", "minimum": 1}]},
        },
    },
}
CONFIG_SCHEMA = {
    "type": "object",
    "required": ["dimension", "red"],
    "additionalProperties": False,
    "properties": {
        "dimension": {"type": "integer", "minimum": 1, "maximum": 6},
        "red": _law,
        "blue": {"oneOf": [_law, {"type": "null"}]},
        "p": _rational,
        "tie_break": {"enum": list(TIE_BREAKS)},
        "initial": {"type": "array", "items": {
            "type": "object", "required": ["site", "color"], "additionalProperties": False,
            "properties": {"site": _site, "color": {"enum": ["red", "blue"]},
                           "count": {"type": "integer", "minimum": 0}}}},
        "precolored": {"type": "array", "items": {
            "type": "object", "required": ["site", "color"], "additionalProperties": False,
            "properties": {"site": _site, "color": {"enum": ["red", "blue"]}}}},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "count_mode": {"type": "string"},
        "same_step_recolor": {"type": "boolean"},
        "validate": {"type": "boolean"},
        "experiment": {"type": "object"},
    },
}


class UsageError(Exception):
    pass


# config (de)serialisation -----------------------------------------------------

def _rational_json(q: Fraction):
    return [q.numerator, q.denominator]


def law_to_json(law: ReproductionLaw) -> dict:
    return {
        "offspring": [[k, w.numerator, w.denominator] for k, w in law.offspring_pmf],
        "displacement": [[list(y), w.numerator, w.denominator] for y, w in law.displacement_pmf],
    }


def law_from_json(d: int, obj: dict) -> ReproductionLaw:
    return ReproductionLaw(
        d,
        tuple(sorted((int(k), Fraction(n, m)) for k, n, m in obj["offspring"])),
        tuple(sorted((tuple(int(c) for c in y), Fraction(n, m)) for y, n, m in obj["displacement"])),
    )


def serialize_config(config: TwoTypeConfig, experiment: Optional[dict] = None) -> dict:
    out: dict[str, Any] = {
        "dimension": config.dimension,
        "red": law_to_json(config.red_law),
        "blue": law_to_json(config.blue_law) if config.blue_law is not None else None,
        "p": _rational_json(config.p),
        "tie_break": config.tie_break,
        "precolored": [{"site": list(z), "color": c} for z, c in config.precolored],
        "seed": config.master_seed,
        "count_mode": str(config.count_mode),
        "same_step_recolor": config.same_step_recolor,
        "validate": config.validate,
    }
    if config.initial is not None:
        out["initial"] = [{"site": list(c.site), "color": c.color, "count": c.count} for c in config.initial]
    if experiment:
        out["experiment"] = experiment
    return out


def _location(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


@dataclass
class ParsedConfig:
    config: TwoTypeConfig
    experiment: dict = field(default_factory=dict)
    seed_from_entropy: bool = False


def parse_config(source, overrides: Optional[dict] = None) -> ParsedConfig:
    """Read a JSON config from a path, JSON text, or an already-loaded dict.

    Structural errors raise :class:`ConfigError` naming the offending JSON
    path; law violations raise :class:`LawError` carrying the violation codes.
    A missing seed is drawn from OS entropy and flagged so it can be recorded.
    """
    if isinstance(source, dict):
        obj = json.loads(json.dumps(source))
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            try:
                text = Path(text).read_text()
            except OSError as exc:
                raise ConfigError(f"cannot read config {source}: {exc}") from exc
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON (line {exc.lineno}, column {exc.colno}): {exc.msg}") from exc
    obj.update({k: v for k, v in (overrides or {}).items() if v is not None})
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(obj), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigError("; ".join(f"at {_location(e)}: {e.message}" for e in errors))

    d = obj["dimension"]
    for name in ("red", "blue"):
        law = obj.get(name)
        if law:
            for i, (y, _, _) in enumerate(law["displacement"]):
                if len(y) != d:
                    raise ConfigError(f"at {name}/displacement/{i}: site {y} is not {d}-dimensional")
    red = law_from_json(d, obj["red"])
    blue = law_from_json(d, obj["blue"]) if obj.get("blue") else None
    seed_from_entropy = "seed" not in obj
    seed = obj["seed"] if not seed_from_entropy else secrets.randbits(64)
    initial = None
    if "initial" in obj:
        initial = tuple(InitialCell(tuple(c["site"]), c["color"], c.get("count", 1)) for c in obj["initial"])
    try:
        p = as_fraction(obj.get("p", 0))
    except (ValueError, ZeroDivisionError, TypeError) as exc:
        raise ConfigError(f"at p: {exc}") from exc
    config = TwoTypeConfig(
        red_law=red,
        blue_law=blue,
        p=p,
        tie_break=obj.get("tie_break", "coin"),
        initial=initial,
        precolored=tuple((tuple(c["site"]), c["color"]) for c in obj.get("precolored", [])),
        master_seed=seed,
        count_mode=CountMode.parse(obj.get("count_mode", "exact")),
        same_step_recolor=obj.get("same_step_recolor", False),
        validate=obj.get("validate", True),
    )
    return ParsedConfig(config, obj.get("experiment", {}), seed_from_entropy)


# output handling ------------------------------------------------------------

class OutputDir:
    """Single writer for all outputs of one invocation; records digests."""

    def __init__(self, path: Path):
        self.path = path
        path.mkdir(parents=True, exist_ok=True)
        self.digests: dict[str, str] = {}

    def write(self, name: str, data) -> Path:
        raw = data.encode() if isinstance(data, str) else data
        target = self.path / name
        target.write_bytes(raw)
        self.digests[name] = hashlib.sha256(raw).hexdigest()
        return target

    def manifest(self, subcommand: str, parsed: ParsedConfig, params: dict) -> dict:
        man = {
            "artifact_version": __version__,
            "subcommand": subcommand,
            "master_seed": parsed.config.master_seed,
            "seed_from_entropy": parsed.seed_from_entropy,
            "config": serialize_config(parsed.config, parsed.experiment),
            "params": params,
            "outputs": dict(sorted(self.digests.items())),
        }
        (self.path / "manifest.json").write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
        return man


def _parse_grid(text: str) -> list[Fraction]:
    try:
        return [as_fraction(t.strip()) for t in text.split(",") if t.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad --p-grid {text!r}: {exc}") from exc


def _parse_vector(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad direction {text!r}") from exc


def _params(args, parsed: ParsedConfig) -> dict:
    """Resolve run parameters: command line, then config ``experiment``, then defaults."""
    exp = parsed.experiment

    def pick(name, default):
        v = getattr(args, name, None)
        return v if v is not None else exp.get(name, default)

    horizon = int(pick("horizon", 2 if args.command == "oracle-check" else 30))
    proxy = EventProxySpec.default(max(horizon, 1))
    params = {
        "horizon": horizon,
        "reps": int(pick("reps", 50000 if args.command == "oracle-check" else 1)),
        "threads": int(pick("threads", 1)),
        "escape_radius": int(exp.get("escape_radius", proxy.escape_radius)),
        "stall_window": int(exp.get("stall_window", proxy.stall_window)),
        "snapshot_every": int(pick("snapshot_every", 0)),
        "verbose": bool(getattr(args, "verbose", False) or exp.get("verbose", False)),
    }
    if args.command == "sweep":
        grid = args.p_grid if args.p_grid is not None else exp.get("p_grid")
        if grid is None:
            raise UsageError("sweep needs --p-grid or experiment.p_grid")
        grid = _parse_grid(grid) if isinstance(grid, str) else [as_fraction(g) for g in grid]
        params["p_grid"] = [_rational_json(g) for g in grid]
    if args.command in ("advantage", "shape"):
        dirs = [list(_parse_vector(v)) for v in (args.direction or [])] or exp.get("directions")
        params["directions"] = dirs
        params["direction_norm_bound"] = int(exp.get("direction_norm_bound", 1))
    return params


# subcommands ------------------------------------------------------------------

def _cmd_simulate(parsed: ParsedConfig, params: dict, out: OutputDir) -> int:
    cfg = parsed.config
    horizon = params["horizon"]
    proxy = EventProxySpec(max(horizon, 1), params["escape_radius"], min(params["stall_window"], max(horizon, 1)))
    from .export import event_line, ndjson, snapshot_ppm

    events, records = [], []
    snaps: dict[str, bytes] = {}
    every = params["snapshot_every"]

    def snapshot(state):
        if state.generation % every == 0:
            snaps[f"snapshot_{state.generation:04d}.ppm"] = snapshot_ppm(state)

    for r in range(params["reps"]):
        observers = [snapshot] if (r == 0 and every > 0 and cfg.dimension == 2) else []
        try:
            summary = run(cfg, horizon, observers=observers, replication=r, keep_state=(r == 0))
        except CountOverflowError as exc:
            print(f"runtime abort in replication {r}: {exc}", file=sys.stderr)
            return EXIT_ABORT
        events.extend(event_line(h, r) for h in summary.history)
        if horizon >= 1:
            records.append(classify_outcome(summary, proxy))
        if r == 0 and cfg.dimension == 2:
            snaps["final.ppm"] = snapshot_ppm(summary.final)
    out.write("events.ndjson", "".join(e + "\n" for e in events))
    if records:
        table = EstimateTable.from_records(records, p=cfg.p, p_threshold=best_threshold(cfg), label="simulate")
        from .export import csv_text

        out.write("estimates.csv", csv_text(EstimateTable.CSV_HEADER, table.csv_rows()))
        if params["verbose"]:
            out.write("records.ndjson", ndjson(r.as_dict() for r in records))
    for name in sorted(snaps):
        out.write(name, snaps[name])
    return EXIT_OK


def _cmd_sweep(parsed: ParsedConfig, params: dict, out: OutputDir) -> int:
    from .export import csv_text, ndjson

    proxy = EventProxySpec(params["horizon"], params["escape_radius"], params["stall_window"])
    recs: dict = {}
    tables = p_sweep(parsed.config, [Fraction(n, d) for n, d in params["p_grid"]], proxy, params["reps"],
                     params["threads"], records_out=recs)
    rows = [row for t in tables for row in t.csv_rows()]
    out.write("sweep.csv", csv_text(EstimateTable.CSV_HEADER, rows))
    if params["verbose"]:
        out.write("records.ndjson", ndjson(dict(r.as_dict(), p=str(p)) for p, rs in recs.items() for r in rs))
    for t in tables:
        print(f"p={t.p} " + " ".join(f"{e}={t[e].estimate:.3f}" for e in ESTIMATORS))
    return EXIT_OK


def _cmd_shape(parsed: ParsedConfig, params: dict, out: OutputDir) -> int:
    from .advantage import rho_max
    from .export import csv_text, shape_overlay_ppm
    from .shape import direction_grid, projection_runs, speed_from_projections

    cfg = parsed.config
    dirs = [tuple(x) for x in params["directions"]] if params["directions"] else \
        direction_grid(cfg.dimension, params["direction_norm_bound"])
    T, reps = params["horizon"], params["reps"]
    if T <= 0 or reps <= 0:
        raise UsageError("shape needs a positive horizon and replication count")
    laws = [("red", cfg.red_law)] + ([("blue", cfg.blue_law)] if cfg.blue_law is not None else [])
    rows, profiles = [], {}
    for i, (name, law) in enumerate(laws):
        seed = cfg.master_seed if i == 0 else cfg.master_seed ^ 0xB10E
        proj = projection_runs(law, dirs, T, reps, seed, cfg.validate)
        profiles[name] = {}
        for j, x in enumerate(dirs):
            vals = proj[:, -1, j] / math.sqrt(sum(c * c for c in x)) / T
            radial = float(vals.mean())
            radial_se = float(vals.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
            profiles[name][x] = radial
            sp = speed_from_projections(proj[:, :, j], x, rho_max(law))
            rows.append((name, *x, f"{radial:.6f}", f"{radial_se:.6f}",
                         f"{sp.tau_hat:.6f}", f"{sp.standard_error:.6f}", int(sp.insufficient)))
    header = ["law"] + [f"x{i}" for i in range(cfg.dimension)] + \
        ["radial", "radial_se", "tau_hat", "tau_se", "insufficient"]
    out.write("shape.csv", csv_text(header, rows))
    if cfg.dimension == 2:
        out.write("shape.ppm", shape_overlay_ppm(profiles))
    return EXIT_OK


def _cmd_advantage(parsed: ParsedConfig, params: dict, out: OutputDir) -> int:
    cfg = parsed.config
    if cfg.blue_law is None:
        raise UsageError("advantage needs both a red and a blue law")
    dirs = [tuple(x) for x in params["directions"]] if params["directions"] else axis_directions(cfg.dimension)
    lines = []
    for x in dirs:
        try:
            lines.append(supercritical_report(cfg.red_law, cfg.blue_law, x).format())
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    out.write("advantage.txt", text)
    return EXIT_OK


def _cmd_oracle_check(parsed: ParsedConfig, params: dict, out: OutputDir) -> int:
    from .export import csv_text
    from .oracle import chi_square_two_sample, enumerate_exact, marginals, simulate_per_particle, total_variation

    cfg, T, reps = parsed.config, params["horizon"], params["reps"]
    if not 0 <= T <= 2 or reps <= 0:
        raise UsageError("oracle-check needs horizon 0..2 and a positive replication count")
    exact = enumerate_exact(cfg, T)
    hist = {"engine": Counter(), "particle": Counter()}
    marg = {"engine": [], "particle": []}
    for r in range(reps):
        for name, summary in (("engine", run(cfg, T, replication=r)),
                              ("particle", simulate_per_particle(cfg, T, replication=r))):
            hist[name][summary.occupancy] += 1
            marg[name].append(marginals(summary))
    rows = []
    for name in ("engine", "particle"):
        tv = total_variation(hist[name], exact)
        rows.append((f"{name}_vs_exact", "total_variation", f"{tv:.6f}", "0.01", tv <= 0.01, reps))
    for key in marg["engine"][0]:
        chi = chi_square_two_sample([m[key] for m in marg["engine"]], [m[key] for m in marg["particle"]])
        rows.append((f"engine_vs_particle:{key}", "chi2_pvalue", f"{chi.pvalue:.6f}", "0.001", chi.pvalue > 1e-3, reps))
    text = csv_text(("check", "statistic", "value", "threshold", "pass", "replications"), rows)
    sys.stdout.write(text)
    out.write("oracle.csv", text)
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "shape": _cmd_shape,
    "advantage": _cmd_advantage,
    "oracle-check": _cmd_oracle_check,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="brwcompete", description="Two-type branching random walk competition on Z^d.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SUBCOMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--from-manifest", dest="manifest", help="repeat the run recorded in a manifest.json")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./brwcompete-out)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--reps", type=int)
        sp.add_argument("--horizon", type=int)
        sp.add_argument("--p-grid", dest="p_grid")
        sp.add_argument("--tie-break", dest="tie_break", choices=TIE_BREAKS)
        sp.add_argument("--count-mode", dest="count_mode")
        sp.add_argument("--threads", type=int)
        sp.add_argument("--snapshot-every", dest="snapshot_every", type=int)
        sp.add_argument("--direction", action="append", help="integer direction like 1,0 (repeatable)")
        sp.add_argument("--verbose", action="store_true", help="also write per-replication NDJSON records")
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.manifest:
            man = json.loads(Path(args.manifest).read_text())
            if man.get("subcommand") != args.command:
                raise UsageError(f"manifest is for {man.get('subcommand')!r}, not {args.command!r}")
            parsed = parse_config(man["config"])
            params = man["params"]
        else:
            if not args.config:
                raise UsageError("--config or --from-manifest is required")
            overrides = {"seed": args.seed, "tie_break": args.tie_break, "count_mode": args.count_mode}
            parsed = parse_config(args.config, overrides)
            params = _params(args, parsed)
        out = OutputDir(Path(args.out or os.environ.get(OUT_ENV, "brwcompete-out")))
        status = _COMMANDS[args.command](parsed, params, out)
        man = out.manifest(args.command, parsed, params)
        if args.manifest:
            old = json.loads(Path(args.manifest).read_text()).get("outputs", {})
            same = old == man["outputs"]
            print(f"reproduced outputs: {'identical' if same else 'DIFFERENT'}", file=sys.stderr)
        return status
    except LawError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CountOverflowError, OverflowError) as exc:
        print(f"runtime abort: {exc}", file=sys.stderr)
        return EXIT_ABORT


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
