"""Command-line entry point: ``stitforest <command> [options]``.

Exit status is 0 on success, 1 on a runtime error, 2 on a configuration
error and 3 when ``--assert`` finds a failing check.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from . import rng as rngmod
from .errors import ConfigError, StitError
from .mondrian import AxisBox, WeightedMondrianSpec, diam_mondrian_bound, mondrian_sample
from .oblique import FeatureMatrix, oblique_sample
from .regress import Dataset, SamplerSpec, fit_forest, load_model, model_to_dict, predict_forest
from .tessellate import DiscreteDirectionalDistribution, stit_sample, tree_to_dict

CONFIG_VERSION = 1
EXPERIMENTS = ("rates", "suboptimality", "geometry", "equivalence", "bias")
COMMON_KEYS = {"version", "seed", "threads", "out"}


# -- outputs -----------------------------------------------------------------------------


class Outputs:
    """Files staged in memory and written together at the end of a run."""

    def __init__(self, directory: str):
        self.directory = directory
        self.files: list[tuple[str, str]] = []

    def add(self, name: str, text: str) -> str:
        path = os.path.join(self.directory, name)
        self.files.append((path, text))
        return path

    def commit(self) -> None:
        os.makedirs(self.directory, exist_ok=True)
        staged = []
        try:
            for path, text in self.files:
                tmp = f"{path}.tmp{os.getpid()}"
                with open(tmp, "w", newline="") as fh:
                    fh.write(text)
                staged.append((tmp, path))
        except OSError:
            for tmp, _ in staged:
                os.unlink(tmp)
            raise
        for tmp, path in staged:
            os.replace(tmp, path)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# -- configuration -----------------------------------------------------------------------


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    if "version" not in data:
        raise ConfigError("config is missing required field 'version'")
    if data["version"] != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {data['version']!r}")
    return data


def _check_keys(cfg: dict, allowed, required=()) -> dict:
    unknown = set(cfg) - set(allowed) - COMMON_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    missing = [k for k in required if k not in cfg]
    if missing:
        raise ConfigError(f"config is missing required field {missing[0]!r}")
    return {k: v for k, v in cfg.items() if k not in COMMON_KEYS}


def _build(cls, params: dict, extra=()):
    names = {f.name for f in dataclasses.fields(cls)}
    params = _check_keys(params, names | set(extra))
    try:
        return cls(**{k: v for k, v in params.items() if k in names}), params
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _sampler(raw) -> SamplerSpec:
    if not isinstance(raw, dict):
        raise ConfigError("'sampler' must be an object")
    try:
        return SamplerSpec.from_dict(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid sampler: {exc}") from exc


# -- commands ------------------------------------------------------------------------------


def cmd_sample_tessellation(cfg: dict, args, out: Outputs) -> str:
    params = _check_keys(cfg, {"sampler", "d", "window"}, required=("sampler",))
    spec = _sampler(params["sampler"])
    d = int(params.get("d", 2))
    low, high = params.get("window", [[0.0] * d, [1.0] * d])
    box = AxisBox(low, high)
    g = rngmod.stream(args.seed, rngmod.SAMPLE)
    if spec.kind == "mondrian":
        w = np.full(box.dim, 1.0 / box.dim) if spec.weights is None else np.asarray(spec.weights)
        tree = mondrian_sample(box, WeightedMondrianSpec(w, spec.lifetime), g)
    elif spec.kind == "stit":
        phi = DiscreteDirectionalDistribution(np.asarray(spec.directions), np.asarray(spec.weights))
        tree = stit_sample(box.polytope, spec.lifetime, phi, g)
    else:
        tree = oblique_sample(box.polytope, FeatureMatrix(np.asarray(spec.matrix)), spec.lifetime, g)
    path = out.add("tessellation.json", json.dumps(tree_to_dict(tree)))
    if args.plot and tree.dim == 2:
        from .labx.plots import tessellation_plot

        out.add("tessellation.svg", tessellation_plot(tree))
    return f"{path} ({tree.n_leaves} cells)"


def cmd_fit(cfg: dict, args, out: Outputs) -> str:
    params = _check_keys(cfg, {"data", "sampler", "M"}, required=("data", "sampler"))
    spec = _sampler(params["sampler"])
    data = Dataset.from_csv(params["data"])
    model = fit_forest(data, spec, int(params.get("M", 1)), args.seed, threads=args.threads)
    path = out.add("model.json", json.dumps(model_to_dict(model)))
    return f"{path} ({model.M} trees, n={data.n})"


def cmd_predict(cfg: dict, args, out: Outputs) -> str:
    params = _check_keys(cfg, {"model", "points"}, required=("model", "points"))
    model = load_model(params["model"])
    X = np.loadtxt(params["points"], delimiter=",", skiprows=1, ndmin=2)
    pred = predict_forest(model, X)
    header = [f"x{i}" for i in range(X.shape[1])] + ["prediction"]
    path = out.add("predictions.csv", csv_text(header, [list(x) + [p] for x, p in zip(X, pred)]))
    return f"{path} ({len(pred)} rows)"


def exp_rates(cfg: dict, args, out: Outputs) -> tuple[str, bool]:
    from .labx.rates import RateConfig, rate_experiment

    params = _check_keys(cfg, {f.name for f in dataclasses.fields(RateConfig)} | {"families", "slope_tolerance"})
    families = params.pop("families", ["oblique", "mondrian"])
    tol = float(params.pop("slope_tolerance", 0.15))
    params.pop("family", None)
    fits, ok = [], True
    for fam in families:
        try:
            rc = RateConfig(family=fam, **params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        fit = rate_experiment(rc, args.seed, args.threads)
        fits.append(fit)
        rows = [(p.n, p.lifetime, p.M, p.risk, p.stderr) for p in fit.grid]
        out.add(f"rates_{fam}.csv", csv_text(("n", "lambda", "M", "risk", "stderr"), rows))
        ok &= fit.within(tol)
    summary = [(f.family, f.multiplier, f.slope, f.slope_stderr, f.expected, f.within(tol)) for f in fits]
    path = out.add("rates_fit.csv", csv_text(("family", "multiplier", "slope", "slope_stderr", "expected", "pass"),
                                             summary))
    if args.plot:
        from .labx.plots import rate_plot

        out.add("rates.svg", rate_plot(fits))
    text = "; ".join(f"{f.family} slope {f.slope:.3f} (target {f.expected:.3f})" for f in fits)
    return f"{path}: {text}", ok


@dataclasses.dataclass
class SuboptConfig:
    a: list = dataclasses.field(default_factory=lambda: [1.0, 1.0])
    lifetimes: list = dataclasses.field(default_factory=lambda: [5.0, 10.0])
    weights: list = dataclasses.field(default_factory=lambda: [[0.5, 0.5], [0.7, 0.3]])
    sigma: float = 0.1
    n: int = 10_000
    replicates: int = 20
    n_test: int = 2000


def exp_suboptimality(cfg: dict, args, out: Outputs) -> tuple[str, bool]:
    from .labx.subopt import suboptimality_check

    sc, _ = _build(SuboptConfig, cfg)
    rows, ok = [], True
    for i, lam in enumerate(sc.lifetimes):
        for j, w in enumerate(sc.weights):
            if len(w) != len(sc.a):
                raise ConfigError("weights and a differ in length")
            r = suboptimality_check(sc.a, lam, w, sc.sigma, sc.n, sc.replicates, args.seed, n_test=sc.n_test,
                                    prefix=(i, j), threads=args.threads)
            rows.append((r.lifetime, *r.weights, r.empirical, r.stderr, r.bound, r.passed))
            ok &= r.passed
    header = ("lambda", *[f"w{i + 1}" for i in range(len(sc.a))], "empirical_risk", "stderr", "lower_bound", "pass")
    path = out.add("suboptimality.csv", csv_text(header, rows))
    if args.plot:
        from .labx.geometry import CheckRow
        from .labx.plots import check_plot

        checks = [CheckRow(f"lam{r[0]:g}_w{'_'.join(f'{x:g}' for x in r[1:-4])}", r[-4], r[-3], r[-2], r[-1])
                  for r in rows]
        out.add("suboptimality.svg", check_plot(checks, "single-tree risk vs lower bound"))
    return f"{path} ({sum(r[-1] for r in rows)}/{len(rows)} pass)", ok


def exp_geometry(cfg: dict, args, out: Outputs) -> tuple[str, bool]:
    from .labx.geometry import GeometryConfig, geometry_suite

    gc, _ = _build(GeometryConfig, cfg)
    rows = geometry_suite(gc, args.seed, args.threads)
    path = out.add("geometry.csv", csv_text(("check_id", "estimate", "stderr", "bound_or_target", "pass"), rows))
    if args.plot:
        from .labx.plots import check_plot

        out.add("geometry.svg", check_plot(rows, "geometry checks"))
    failed = [r.check_id for r in rows if not r.passed]
    note = f"; failing: {', '.join(failed)}" if failed else ""
    return f"{path} ({len(rows) - len(failed)}/{len(rows)} pass{note})", not failed


def exp_equivalence(cfg: dict, args, out: Outputs) -> tuple[str, bool]:
    from .labx.geometry import EquivalenceConfig, equivalence_experiment

    ec, _ = _build(EquivalenceConfig, cfg)
    rows = equivalence_experiment(ec, args.seed, args.threads)
    header = ("config", "pair", "p_direct", "p_lifted", "p_closed_form", "pooled_stderr", "pass")
    path = out.add("equivalence.csv", csv_text(header, rows))
    if args.plot:
        from .labx.geometry import CheckRow
        from .labx.plots import check_plot

        checks = [CheckRow(f"{r.config}_{r.pair}", r.p_lifted, r.pooled_stderr, r.p_direct, r.passed) for r in rows]
        out.add("equivalence.svg", check_plot(checks, "lifted / direct co-membership"))
    n_ok = sum(r.passed for r in rows)
    return f"{path} ({n_ok}/{len(rows)} pass)", n_ok == len(rows)


@dataclasses.dataclass
class BiasConfig:
    d: int = 1
    coords: list = dataclasses.field(default_factory=lambda: [0])
    weights: list | None = None
    lifetimes: list = dataclasses.field(default_factory=lambda: [2.0, 5.0, 10.0, 20.0])
    n_x: int = 2000
    n_mc: int = 200
    replicates: int = 50


def exp_bias(cfg: dict, args, out: Outputs) -> tuple[str, bool]:
    """Bias of a weighted-Mondrian tree for ``f(x) = sum_{i in coords} x_i`` against ``L^2 E[D^2] / lam^2``."""
    from .labx.risk import estimate_bias
    from .labx.targets import RidgeTarget

    bc, _ = _build(BiasConfig, cfg)
    coords = sorted(set(int(c) for c in bc.coords))
    if not coords or coords[-1] >= bc.d:
        raise ConfigError("coords must be non-empty indices below d")
    w = np.full(bc.d, 1.0 / bc.d) if bc.weights is None else np.asarray(bc.weights, dtype=float)
    s = len(coords)
    target = RidgeTarget(np.isin(np.arange(bc.d), coords)[None, :].astype(float))
    L = target.holder_constant(1.0)
    rows, ok = [], True
    for i, lam in enumerate(bc.lifetimes):
        spec = SamplerSpec("mondrian", float(lam), weights=tuple(w))
        est = estimate_bias(target, spec, "uniform-cube", bc.n_x, bc.n_mc, bc.replicates, args.seed, prefix=(i,),
                            threads=args.threads)
        bound = L ** 2 * diam_mondrian_bound(2, 0.0, s, float(w[coords].min())) / lam ** 2
        passed = est.bias <= bound + 3 * est.stderr
        rows.append((float(lam), est.bias, est.stderr, bound, passed))
        ok &= passed
    path = out.add("bias.csv", csv_text(("lambda", "bias", "stderr", "bound", "pass"), rows))
    if args.plot:
        from .labx.geometry import CheckRow
        from .labx.plots import check_plot

        out.add("bias.svg", check_plot([CheckRow(f"lam{r[0]:g}", *r[1:]) for r in rows], "bias vs Erlang bound"))
    return f"{path} ({sum(r[-1] for r in rows)}/{len(rows)} pass)", ok


EXPERIMENT_RUNNERS = {
    "rates": exp_rates,
    "suboptimality": exp_suboptimality,
    "geometry": exp_geometry,
    "equivalence": exp_equivalence,
    "bias": exp_bias,
}


# -- argument parsing ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (must carry a 'version' field)")
    common.add_argument("--seed", type=int, help="64-bit seed (default 0)")
    common.add_argument("--threads", type=int, help="worker processes (default 1)")
    common.add_argument("--out", help="output directory (default '.')")
    common.add_argument("--assert", dest="assert_", action="store_true",
                        help="exit 3 if any acceptance check fails")
    common.add_argument("--plot", action="store_true", help="also write SVG figures")

    parser = argparse.ArgumentParser(prog="stitforest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sample-tessellation", parents=[common], help="sample one tessellation to JSON")
    sub.add_parser("fit", parents=[common], help="fit a forest from a dataset CSV")
    sub.add_parser("predict", parents=[common], help="predict with a saved model")
    exp = sub.add_parser("experiment", parents=[common], help="run an experiment")
    exp.add_argument("kind", choices=EXPERIMENTS)
    return parser


def _resolve(args, cfg: dict):
    """CLI flags override config fields."""
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    threads = args.threads if args.threads is not None else cfg.get("threads", 1)
    outdir = args.out if args.out is not None else cfg.get("out", ".")
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError("threads must be a positive integer")
    args.seed, args.threads, args.out = seed, threads, outdir


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = load_config(args.config)
        _resolve(args, cfg)
        out = Outputs(args.out)
        ok = True
        if args.command == "experiment":
            summary, ok = EXPERIMENT_RUNNERS[args.kind](cfg, args, out)
        elif args.command == "fit":
            summary = cmd_fit(cfg, args, out)
        elif args.command == "predict":
            summary = cmd_predict(cfg, args, out)
        else:
            summary = cmd_sample_tessellation(cfg, args, out)
        out.commit()
    except ConfigError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 2
    except StitError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io.error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError, KeyError) as exc:
        print(f"runtime.error: {exc}", file=sys.stderr)
        return 1
    print(summary)
    if args.assert_ and not ok:
        print("assert: one or more checks failed", file=sys.stderr)
        return 3
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
