"""Command-line interface.

Exit codes: 0 success, 1 invalid input or parameters, 2 a statistical
verdict failed (``verify`` and ``experiment``).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .coding import (
    LatticePath,
    contour_from_height,
    contour_times,
    forest_from_walk,
    height_from_walk,
    walk_from_forest,
)
from .conditioned import (
    ConditionedForestSpec,
    is_feasible,
    sample_first_passage_bridge_walk,
)
from .errors import CondForestError, InfeasibleSpecError, NoCrossingError, ValidationError
from .invariance import ExperimentConfig, invariance_experiment
from .laws import parse_law
from .realtrees import excursion_metric
from .serialize import (
    deserialize,
    forest_to_json,
    lattice_path_to_csv,
    matrix_to_csv,
    real_path_to_csv,
    report_to_json,
)
from .stable import (
    RealPath,
    StableParams,
    approx_height_process,
    conditioned_forest_by_rescaling,
    default_epsilon,
    sample_stable_path,
    total_mass,
)
from .svg import line_chart
from .trees import Forest, sample_gw_forest
from .verify import DEFAULT_SUITES, SUITES, run_suites

log = logging.getLogger("condforest")

EXIT_OK, EXIT_INVALID, EXIT_VERDICT = 0, 1, 2

# defaults applied after the config file; None means "required when used"
DEFAULTS = {
    "law": "binary",
    "k": None,
    "n": None,
    "seed": None,
    "out": None,
    "size_cap": 10**8,
    "alpha": 2.0,
    "horizon": 1.0,
    "grid_n": 10_000,
    "s": None,
    "epsilon": None,
    "input": None,
    "to": "all",
    "n_values": "1000,10000",
    "samples": 500,
    "ks_threshold": 0.05,
    "suite": "all",
}

INT_KEYS = {"k", "n", "seed", "size_cap", "grid_n", "samples"}
FLOAT_KEYS = {"alpha", "horizon", "s", "epsilon", "ks_threshold"}


class UsageError(CondForestError):
    pass


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; dashes equal underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in INT_KEYS:
            return int(value)
        if key in FLOAT_KEYS:
            return float(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--{key.replace('_', '-')}: invalid number {value!r}") from exc
    return value


class Settings:
    """Resolved parameters: flags override the config file, which overrides defaults."""

    def __init__(self, args, config):
        self._values = {}
        for key, default in DEFAULTS.items():
            flag = getattr(args, key, None)
            if flag is not None:
                value = flag
            elif key in config:
                value = config[key]
            else:
                value = default
            self._values[key] = _coerce(key, value)

    def __getattr__(self, key):
        try:
            return self._values[key]
        except KeyError:
            raise AttributeError(key) from None

    def need(self, *keys):
        missing = [k for k in keys if self._values.get(k) is None]
        if missing:
            flags = ", ".join("--" + k.replace("_", "-") for k in missing)
            raise UsageError(f"missing required parameter(s): {flags}")


def _out_dir(settings) -> Path:
    settings.need("out")
    out = Path(settings.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {out} is not writable: {exc.strerror}") from exc
    return out


def _write(path: Path, text: str):
    path.write_text(text)
    log.info("wrote %s", path)


# -- commands ----------------------------------------------------------------------

def cmd_sample_forest(s: Settings) -> int:
    s.need("k", "seed")
    law = parse_law(s.law)
    out = _out_dir(s)
    forest = sample_gw_forest(law, s.k, s.seed, size_cap=s.size_cap)
    _write(out / "forest.json", forest_to_json(forest) + "\n")
    _write(out / "walk.csv", lattice_path_to_csv(walk_from_forest(forest)))
    return EXIT_OK


def cmd_condition(s: Settings) -> int:
    s.need("k", "n")
    law = parse_law(s.law)
    spec = ConditionedForestSpec(law, s.k, s.n)
    if not is_feasible(law, s.k, s.n):
        raise InfeasibleSpecError(
            f"infeasible: P(T_{s.k}={s.n})=0 for law {s.law}; no forest has "
            f"{s.k} trees and {s.n} vertices",
            0.0,
        )
    s.need("seed")
    out = _out_dir(s)
    walk = sample_first_passage_bridge_walk(spec, s.seed)
    _write(out / "forest.json", forest_to_json(forest_from_walk(walk)) + "\n")
    _write(out / "walk.csv", lattice_path_to_csv(walk))
    return EXIT_OK


def _load_forest_input(path: Path):
    text = path.read_text()
    if path.suffix == ".csv":
        obj = deserialize(text, "path-csv")
        if not isinstance(obj, LatticePath):
            raise ValidationError("transform needs a discrete (index,value) path")
        return forest_from_walk(obj)
    data = json.loads(text) if text.strip() else None
    if isinstance(data, dict) and "trees" in data:
        return deserialize(text, "forest-json")
    return Forest((deserialize(text, "tree-json"),))


def cmd_transform(s: Settings) -> int:
    s.need("input")
    path = Path(s.input)
    try:
        forest = _load_forest_input(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    out = _out_dir(s)
    targets = {"walk", "height", "contour", "forest", "distances"} if s.to == "all" else {s.to}
    unknown = targets - {"walk", "height", "contour", "forest", "distances"}
    if unknown:
        raise UsageError(f"--to: unknown target {sorted(unknown)[0]!r}")
    walk = walk_from_forest(forest)
    h = height_from_walk(walk)
    if "walk" in targets:
        _write(out / "walk.csv", lattice_path_to_csv(walk))
    if "height" in targets:
        lines = ["index,value"] + [f"{i},{int(v)}" for i, v in enumerate(h)]
        _write(out / "height.csv", "\n".join(lines) + "\n")
    if "contour" in targets:
        c = contour_from_height(h)
        t, v = c.half_grid()
        lines = ["t,value"] + [f"{ti!r},{vi!r}" for ti, vi in zip(t.tolist(), v.tolist())]
        _write(out / "contour.csv", "\n".join(lines) + "\n")
    if "forest" in targets:
        _write(out / "forest.json", forest_to_json(forest) + "\n")
    if "distances" in targets:
        c = contour_from_height(h)
        cpath = RealPath(float(c.duration), 1.0, c.values.astype(float))
        dist = excursion_metric(cpath, contour_times(h)[:-1]).dist
        _write(out / "distances.csv", matrix_to_csv(dist))
    return EXIT_OK


def cmd_stable_sim(s: Settings) -> int:
    s.need("seed")
    params = StableParams(s.alpha)
    out = _out_dir(s)
    path = sample_stable_path(params, s.horizon, s.grid_n, s.seed)
    eps = s.epsilon or default_epsilon(params, path.grid_step)
    _write(out / "path.csv", real_path_to_csv(path))
    _write(out / "height.csv", real_path_to_csv(approx_height_process(path, eps)))
    summary = {"alpha": s.alpha, "horizon": s.horizon, "grid_n": s.grid_n, "seed": s.seed,
               "epsilon": eps}
    if s.s is not None:
        summary["s"] = s.s
        summary["total_mass"] = total_mass(path, s.s)
        try:
            rf = conditioned_forest_by_rescaling(path, s.s, s.alpha, eps)
        except NoCrossingError as exc:
            summary["no_crossing"] = str(exc)
        else:
            summary.update(g=rf.g, terminal=float(rf.bridge.values[-1]), tolerance=rf.tolerance)
            _write(out / "bridge.csv", real_path_to_csv(rf.bridge))
            _write(out / "bridge_height.csv", real_path_to_csv(rf.heights))
            exc_json = [
                {"level": e.level, "start": e.start, "end": e.end} for e in rf.excursions.excursions
            ]
            _write(out / "excursions.json", json.dumps({"file": "bridge_height.csv",
                                                        "excursions": exc_json}, indent=2) + "\n")
    _write(out / "summary.json", report_to_json(summary))
    return EXIT_OK


def cmd_verify(s: Settings) -> int:
    s.need("seed")
    names = list(DEFAULT_SUITES) if s.suite == "all" else s.suite.split(",")
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise UsageError(f"--suite: unknown suite {unknown[0]!r}; choose from {', '.join(SUITES)}")
    results = run_suites(names, s.seed)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}: {r['detail']}")
    if s.out is not None:
        _write(_out_dir(s) / "verify.json", report_to_json({"seed": s.seed, "results": results}))
    return EXIT_OK if all(r["passed"] for r in results) else EXIT_VERDICT


def cmd_experiment(s: Settings) -> int:
    s.need("seed", "s")
    law = parse_law(s.law)
    try:
        n_values = tuple(int(v) for v in str(s.n_values).split(","))
    except ValueError as exc:
        raise UsageError(f"--n-values: expected comma-separated integers, got {s.n_values!r}") from exc
    config = ExperimentConfig(
        law=law,
        alpha_target=s.alpha,
        s=s.s,
        n_values=n_values,
        samples_per_n=s.samples,
        seed=s.seed,
        ks_threshold=s.ks_threshold,
    ).validate()
    out = _out_dir(s)
    report = invariance_experiment(config)
    report["version"] = __version__
    _write(out / "report.json", report_to_json(report))
    times = config.times
    lines = ["n," + ",".join(f"ks_{t}" for t in times) + ",sup_hc"]
    for row in report["per_n"]:
        lines.append(
            f"{row['n']}," + ",".join(repr(row["ks"][str(t)]) for t in times) + f",{row['sup_hc']!r}"
        )
    _write(out / "ks.csv", "\n".join(lines) + "\n")
    series = {
        f"KS t={t}": ([r["n"] for r in report["per_n"]], [r["ks"][str(t)] for r in report["per_n"]])
        for t in times
    }
    _write(out / "ks.svg", line_chart(series, "KS distance of walk marginals", "n", "KS",
                                      logx=True))
    hc = {"sup |C - H|": ([r["n"] for r in report["per_n"]], [r["sup_hc"] for r in report["per_n"]])}
    _write(out / "sup_hc.svg", line_chart(hc, "Contour vs height gap", "n", "sup", logx=True))
    v = report["verdicts"]
    print(json.dumps(v, sort_keys=True))
    return EXIT_OK if v["pass"] else EXIT_VERDICT


COMMANDS = {
    "sample-forest": cmd_sample_forest,
    "condition": cmd_condition,
    "transform": cmd_transform,
    "stable-sim": cmd_stable_sim,
    "verify": cmd_verify,
    "experiment": cmd_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condforest",
        description="Conditioned Galton-Watson forests, stable paths and their checks.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="flat key = value file; flags take precedence")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p, *names):
        for name in names:
            flag = "--" + name.replace("_", "-")
            p.add_argument(flag, dest=name, default=None)

    p = sub.add_parser("sample-forest", help="unconditioned Galton-Watson forest")
    common(p, "law", "k", "seed", "out", "size_cap")
    p = sub.add_parser("condition", help="forest conditioned on k trees and n vertices")
    common(p, "law", "k", "n", "seed", "out")
    p = sub.add_parser("transform", help="walk, height, contour and distances of a forest")
    common(p, "input", "to", "out")
    p = sub.add_parser("stable-sim", help="stable path, heights and conditioned bridge")
    common(p, "alpha", "horizon", "grid_n", "s", "epsilon", "seed", "out")
    p = sub.add_parser("verify", help="fast exact and statistical self-checks")
    common(p, "suite", "seed", "out")
    p = sub.add_parser("experiment", help="rescaled marginals against the limit law")
    common(p, "law", "alpha", "s", "n_values", "samples", "ks_threshold", "seed", "out")
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        print("condforest: error: a command is required", file=sys.stderr)
        return EXIT_INVALID
    try:
        config = read_config(args.config) if args.config else {}
        settings = Settings(args, config)
        return COMMANDS[args.command](settings)
    except (CondForestError, ValueError) as exc:
        print(f"condforest {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


def main():
    sys.exit(run())
