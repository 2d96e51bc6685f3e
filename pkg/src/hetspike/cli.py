"""Command-line front end.

Every subcommand reads one JSON document (``--config``) or a built-in preset
(``--preset``), validates it, runs, and writes plot-ready CSV/JSON plus a
``manifest.json`` into ``--out``.

Exit codes: 0 success, 2 configuration error, 3 numeric or solver error,
4 resource error.
"""
import argparse
import csv
import json
import math
import os
import platform
import sys
import time
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .errors import ConfigError, ExperimentAborted, HetspikeError, NumericError, ResourceError
from .evaluation import (
    ExperimentConfig, build_spec, default_workers, limit_rows, manifest, run_experiment, series_label,
)
from .limits import ProblemSpec, SolverOptions, mmse_from_saddle, solve_limit, wpca_analyze
from .model import InstanceSpec, dump_instance, make_hetero_pca, sample_instance
from .priors import DEFAULT_ORDER

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_RESOURCE = 0, 2, 3, 4


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------


class _Doc(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    def dump(self):
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)


class PriorDoc(_Doc):
    kind: Literal["gaussian", "discrete", "rademacher", "bernoulli"]
    atoms: Optional[list[float]] = None
    probs: Optional[list[float]] = None
    unnormalized: Optional[bool] = None
    p: Optional[float] = None

    @model_validator(mode="after")
    def _fields_match_kind(self):
        need = {"discrete": ("atoms", "probs"), "bernoulli": ("p",)}.get(self.kind, ())
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"prior kind {self.kind!r} needs {name!r}")
        allowed = set(need) | ({"unnormalized"} if self.kind == "discrete" else set())
        extra = [n for n in ("atoms", "probs", "unnormalized", "p") if n not in allowed and getattr(self, n) is not None]
        if extra:
            raise ValueError(f"prior kind {self.kind!r} does not take {extra}")
        return self


class TwoGroupDoc(_Doc):
    kind: Literal["two_group"]
    alpha: Optional[float] = None
    lambda_: Optional[float] = Field(None, alias="lambda")
    prior: Optional[PriorDoc] = None
    prior_v: Optional[PriorDoc] = None


class ThreeGroupDoc(_Doc):
    kind: Literal["three_group"]
    support: Optional[str] = None
    lambda_: Optional[float] = Field(None, alias="lambda")
    beta: list[float] = [1 / 3, 1 / 3, 1 / 3]
    prior: Optional[PriorDoc] = None


class HeteroPcaDoc(_Doc):
    kind: Literal["hetero_pca"]
    beta0: float
    betas: list[float]
    sigmas: list[float]
    prior: Optional[PriorDoc] = None


class CsbmDoc(_Doc):
    kind: Literal["csbm"]
    lambda_uu: Optional[float] = None
    lambda_uv: Optional[float] = None
    beta: list[float]
    prior: Optional[PriorDoc] = None


class ExplicitDoc(_Doc):
    kind: Literal["explicit"]
    beta: list[float]
    priors: list[PriorDoc]
    lambda_: list[list[float]] = Field(alias="lambda")
    r: Optional[list[float]] = None


ModelDoc = Annotated[
    Union[TwoGroupDoc, ThreeGroupDoc, HeteroPcaDoc, CsbmDoc, ExplicitDoc], Field(discriminator="kind")
]


class AxisDoc(_Doc):
    var: str
    values: list[Union[float, str]] = Field(min_length=1)


class SolverDoc(_Doc):
    damping: float = Field(0.5, ge=0, lt=1)
    max_iter: int = Field(20000, ge=1)
    tol: float = Field(1e-10, gt=0)
    random_starts: int = Field(32, ge=0)
    seed: int = Field(0, ge=0)
    order: int = Field(DEFAULT_ORDER, ge=8)

    def options(self):
        return SolverOptions(**self.model_dump())


_ALG_PARAMS = {
    "amp": {"T", "tol", "damping"},
    "gd": {"steps", "gamma", "schedule", "tol", "max_halvings"},
    "joint_pca": set(),
    "wpca": {"resolution"},
}


class AlgorithmDoc(_Doc):
    name: Literal["amp", "gd", "joint_pca", "wpca"]
    params: dict[str, Union[int, float, str]] = {}
    scoring: Literal["auto", "direct", "scaled"] = "auto"

    @model_validator(mode="after")
    def _known_params(self):
        bad = sorted(set(self.params) - _ALG_PARAMS[self.name])
        if bad:
            raise ValueError(f"unknown {self.name} parameter(s) {bad}")
        return self


class _RunDoc(_Doc):
    out: Optional[str] = None
    verbosity: int = Field(1, ge=0, le=2)


def _point_docs(model, sweep, series):
    """Model dictionaries for every (series, sweep) point, for validation."""
    base = model.dump()
    svals = [None] if series is None else series.values
    for s in svals:
        for v in sweep.values if sweep is not None else [None]:
            m = dict(base)
            if sweep is not None:
                m[sweep.var] = v
            if series is not None:
                m[series.var] = s
            yield m


def _check_points(model, sweep, series):
    fields = {f.alias or n for n, f in type(model).model_fields.items()}
    for axis, where in ((sweep, "sweep"), (series, "series")):
        if axis is not None and axis.var not in fields:
            raise ConfigError(f"{axis.var!r} is not a field of model kind {model.kind!r}", f"{where}.var")
    for m in _point_docs(model, sweep, series):
        try:
            build_spec(m)
        except KeyError as exc:
            raise ConfigError(f"model needs {exc.args[0]!r} (set it or sweep over it)", "model") from exc
        except (HetspikeError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc), "model") from exc


class LimitsDoc(_RunDoc):
    model: ModelDoc
    sweep: Optional[AxisDoc] = None
    series: Optional[AxisDoc] = None
    solver: SolverDoc = SolverDoc()

    @model_validator(mode="after")
    def _points(self):
        _check_points(self.model, self.sweep, self.series)
        return self


class WpcaDoc(_RunDoc):
    beta0: float = Field(gt=0)
    betas: list[float] = Field(min_length=1)
    sigmas: list[float] = Field(min_length=1)
    cross_check: bool = True
    solver: SolverDoc = SolverDoc()

    @model_validator(mode="after")
    def _lengths(self):
        if len(self.betas) != len(self.sigmas):
            raise ValueError("betas and sigmas must have equal length")
        if min(self.betas) <= 0 or min(self.sigmas) <= 0:
            raise ValueError("betas and sigmas must be positive")
        return self


class ExperimentDoc(_RunDoc):
    model: ModelDoc
    N: int = Field(gt=1)
    sweep: AxisDoc
    series: Optional[AxisDoc] = None
    algorithms: list[AlgorithmDoc] = []
    trials: int = Field(64, ge=1)
    base_seed: int = Field(0, ge=0, lt=2**64)
    metrics: list[Literal["diag_mse", "overlap"]] = ["diag_mse"]
    limits: bool = True
    solver: SolverDoc = SolverDoc()

    @model_validator(mode="after")
    def _points(self):
        _check_points(self.model, self.sweep, self.series)
        names = [a.name for a in self.algorithms]
        if len(set(names)) != len(names):
            raise ConfigError("each algorithm may appear once", "algorithms")
        if not self.algorithms and not self.limits:
            raise ConfigError("nothing to do: no algorithms and limits disabled", "algorithms")
        return self

    def experiment_config(self, trace=False):
        return ExperimentConfig(
            model=self.model.dump(), N=self.N, sweep_var=self.sweep.var, sweep_values=list(self.sweep.values),
            algorithms=[a.dump() for a in self.algorithms], trials=self.trials, base_seed=self.base_seed,
            series_var=self.series.var if self.series else None,
            series_values=list(self.series.values) if self.series else None,
            metrics=tuple(self.metrics), trace=trace, limits=self.limits,
        )


class SampleDoc(_RunDoc):
    model: ModelDoc
    N: int = Field(gt=1)
    seed: int = Field(0, ge=0, lt=2**64)
    format: Literal["bin", "csv"] = "bin"
    with_truth: bool = True
    memory_budget: int = Field(2 << 30, gt=0)

    @model_validator(mode="after")
    def _points(self):
        _check_points(self.model, None, None)
        return self


SCHEMAS = {"limits": LimitsDoc, "wpca": WpcaDoc, "experiment": ExperimentDoc, "sample": SampleDoc}


def parse_config(command, doc):
    """Validate ``doc`` against the schema of ``command``; raises ConfigError."""
    try:
        return SCHEMAS[command].model_validate(doc)
    except ValidationError as exc:
        err = exc.errors()[0]
        path = ".".join(str(p) for p in err["loc"])
        cause = err.get("ctx", {}).get("error")
        if isinstance(cause, ConfigError):
            raise ConfigError(cause.message, cause.path) from None
        raise ConfigError(err["msg"], path or None) from None


def dump_config(cfg):
    return cfg.dump()


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

FIG1_ALPHAS = [k / 31 for k in range(32)]
LAMBDA_GRID = [round(0.05 * i, 2) for i in range(1, 61)]
SIZE_TWO_SUPPORTS = ["(11,12)", "(11,22)", "(11,23)", "(12,13)", "(12,21)"]

_FIG1_ALGS = [
    {"name": "amp"},
    {"name": "gd", "params": {"gamma": 0.2}},
    {"name": "joint_pca"},
    {"name": "wpca"},
]

PRESETS = {
    "fig1a": ("experiment", {
        "model": {"kind": "two_group", "lambda": 2.0, "prior": {"kind": "gaussian"}},
        "N": 2048, "sweep": {"var": "alpha", "values": FIG1_ALPHAS},
        "algorithms": _FIG1_ALGS, "trials": 64, "base_seed": 0,
    }),
    "fig1b": ("experiment", {
        "model": {"kind": "two_group", "lambda": 2.0, "prior": {"kind": "rademacher"}},
        "N": 2048, "sweep": {"var": "alpha", "values": FIG1_ALPHAS},
        "algorithms": _FIG1_ALGS, "trials": 64, "base_seed": 0,
    }),
    "fig2a": ("experiment", {
        "model": {"kind": "three_group", "beta": [1 / 3, 1 / 3, 1 / 3], "prior": {"kind": "gaussian"}},
        "N": 3072, "sweep": {"var": "lambda", "values": LAMBDA_GRID},
        "series": {"var": "support", "values": SIZE_TWO_SUPPORTS},
        "algorithms": [], "trials": 1,
    }),
    "fig2b": ("experiment", {
        "model": {"kind": "three_group", "beta": [0.2, 0.4, 0.4], "prior": {"kind": "gaussian"}},
        "N": 3072, "sweep": {"var": "lambda", "values": LAMBDA_GRID},
        "series": {"var": "support", "values": SIZE_TWO_SUPPORTS},
        "algorithms": [], "trials": 1,
    }),
    "fig_appendix_d": ("experiment", {
        "model": {"kind": "two_group", "prior": {"kind": "bernoulli", "p": 0.1}, "prior_v": {"kind": "gaussian"}},
        "N": 1024, "sweep": {"var": "lambda", "values": [round(0.25 * i, 2) for i in range(1, 17)]},
        "series": {"var": "alpha", "values": [0.0, 0.25, 0.5, 0.75, 1.0]},
        "algorithms": [{"name": "amp"}], "trials": 32, "base_seed": 0,
    }),
}


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(row[k]) for k in header})


def _fmt(x):
    if isinstance(x, float):
        return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else repr(x))
    if isinstance(x, bool):
        return "true" if x else "false"
    return x


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _clean(x):
    """Replace non-finite floats with None so the JSON stays strict."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _manifest(command, cfg, files, extra=None):
    doc = {
        "command": command,
        "config": dump_config(cfg),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "files": sorted(files),
        "numba_disabled": os.environ.get("HETSPIKE_DISABLE_NUMBA", ""),
    }
    if extra:
        doc.update(extra)
    return _clean(doc)


def _warn_nonunique(points, stream):
    if not points:
        return
    print("=" * 64, file=stream)
    print("WARNING: the maximiser is not unique at these points;", file=stream)
    print("the MMSE there is a bound, not an exact limit.", file=stream)
    for p in points:
        print(f"  {p}", file=stream)
    print("=" * 64, file=stream)


def _log(cfg, level, msg):
    if cfg.verbosity >= level:
        print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_limits(cfg, out, args):
    opts = cfg.solver.options()
    rows, saddles, nonunique = [], [], []
    series = [None] if cfg.series is None else cfg.series.values
    sweep = [None] if cfg.sweep is None else cfg.sweep.values
    for s in series:
        prefix = "" if s is None else f"{_series_tag(cfg.series.var, s)}:"
        for v in sweep:
            m = cfg.model.dump()
            if cfg.sweep is not None:
                m[cfg.sweep.var] = v
            if s is not None:
                m[cfg.series.var] = s
            spec = build_spec(m)
            sp = solve_limit(spec, opts)
            mm = mmse_from_saddle(sp, spec)
            K = spec.K
            for k in range(K):
                rows.append({"sweep_value": v, "group_or_block": f"{prefix}{k + 1}",
                             "mmse": float(mm.vector_mmse[k]), "unique_flag": bool(sp.unique)})
            for k in range(K):
                for l in range(K):
                    rows.append({"sweep_value": v, "group_or_block": f"{prefix}{k + 1}{l + 1}",
                                 "mmse": float(mm.block_mmse[k, l]), "unique_flag": bool(sp.unique)})
            saddles.append({"series": s, "sweep_value": v, **sp.to_dict()})
            if not sp.unique:
                nonunique.append(f"{prefix}{v}")
            _log(cfg, 2, f"{prefix}{v}: q*={np.round(sp.q_star, 6).tolist()} unique={sp.unique}")
    _write_csv(os.path.join(out, "mmse.csv"), ["sweep_value", "group_or_block", "mmse", "unique_flag"], rows)
    if cfg.sweep is None and cfg.series is None:
        report = {k: v for k, v in saddles[0].items() if k not in ("series", "sweep_value")}
    else:
        report = {"sweep_var": cfg.sweep.var if cfg.sweep else None, "points": saddles}
    _write_json(os.path.join(out, "saddle.json"), _clean(report))
    _write_json(os.path.join(out, "manifest.json"), _manifest("limits", cfg, ["mmse.csv", "saddle.json"]))
    _warn_nonunique(nonunique, sys.stderr)
    return EXIT_OK


def _series_tag(var, value):
    if var == "support":
        from .model import support_label
        return support_label(value)
    return f"{var}={value}"


def cmd_wpca(cfg, out, args):
    a = wpca_analyze(cfg.beta0, cfg.betas, cfg.sigmas)
    doc = {
        "beta0": cfg.beta0, "betas": list(cfg.betas), "sigmas": list(cfg.sigmas),
        "q0": a.q0, "above_threshold": bool(a.above_threshold),
        "threshold_statistic": float(np.sum(cfg.beta0 * np.asarray(cfg.betas) / np.asarray(cfg.sigmas) ** 4)),
        "mse": a.mse, "q_ell": a.q_ell.tolist(),
    }
    if cfg.cross_check:
        spec = make_hetero_pca(cfg.beta0, cfg.betas, cfg.sigmas)
        sp = solve_limit(spec, cfg.solver.options())
        q0 = float(sp.q_star[0])
        doc["solver_q0"] = q0
        doc["solver_unique"] = bool(sp.unique)
        doc["solver_agreement"] = bool(abs(q0 - a.q0) <= 1e-6 * max(1.0, cfg.beta0))
    _write_json(os.path.join(out, "analysis.json"), _clean(doc))
    _write_json(os.path.join(out, "manifest.json"), _manifest("wpca", cfg, ["analysis.json"]))
    _log(cfg, 1, f"q0={a.q0:.10g} above_threshold={a.above_threshold} mse={a.mse:.10g}")
    return EXIT_OK


def cmd_experiment(cfg, out, args):
    ecfg = cfg.experiment_config(trace=args.trace)
    files = []
    if cfg.algorithms:
        workers = args.workers or default_workers()

        def progress(i, total):
            if cfg.verbosity >= 1 and (i == total or i % max(1, total // 20) == 0):
                print(f"  {i}/{total} trials", file=sys.stderr)

        t0 = time.perf_counter()
        res = run_experiment(ecfg, workers=workers, progress=progress, solver_opts=cfg.solver.options())
        _write_csv(os.path.join(out, "results.csv"),
                   ["sweep_var", "sweep_value", "algorithm", "group", "metric", "mean", "stderr", "trials", "completed"],
                   res.rows)
        files.append("results.csv")
        mrows = res.mmse_rows
        if res.failures:
            _write_csv(os.path.join(out, "failures.csv"), ["series", "sweep_value", "trial", "algorithm", "reason"],
                       [{"series": _label(ecfg, r.series), "sweep_value": r.sweep_value, "trial": r.trial,
                         "algorithm": r.algorithm, "reason": r.reason} for r in res.failures])
            files.append("failures.csv")
        if args.trace:
            rows = []
            for r in res.trials:
                for t, k, ov, mv in r.trace or []:
                    rows.append({"series": _label(ecfg, r.series), "sweep_value": r.sweep_value,
                                 "algorithm": r.algorithm, "t": t, "group": k + 1, "overlap": ov, "mean_v": mv})
            _write_csv(os.path.join(out, "trace.csv"),
                       ["series", "sweep_value", "algorithm", "t", "group", "overlap", "mean_v"], rows)
            files.append("trace.csv")
        seeds = sorted({(repr(r.series), r.sweep_value, r.trial, r.seed) for r in res.trials},
                       key=lambda x: (x[0], ecfg.sweep_values.index(x[1]), x[2]))
        extra = manifest(ecfg, {"workers": workers, "elapsed_s": time.perf_counter() - t0,
                                "trial_seeds": [list(s) for s in seeds]})
    else:
        mrows = limit_rows(ecfg, cfg.solver.options())
        extra = manifest(ecfg)
    if cfg.limits:
        _write_csv(os.path.join(out, "mmse.csv"), ["sweep_value", "group_or_block", "mmse", "unique_flag"], mrows)
        files.append("mmse.csv")
        bad = sorted({f"{r['group_or_block'].rpartition(':')[0]}@{r['sweep_value']}" for r in mrows
                      if not r["unique_flag"]})
        _warn_nonunique(bad, sys.stderr)
    _write_json(os.path.join(out, "manifest.json"), _manifest("experiment", cfg, files, extra))
    return EXIT_OK


def _label(ecfg, s):
    return "" if s is None else series_label(ecfg, s)


def cmd_sample(cfg, out, args):
    spec = build_spec(cfg.model.dump())
    ispec = InstanceSpec(spec, cfg.N, seed=cfg.seed)
    obs = sample_instance(ispec, memory_budget=cfg.memory_budget)
    name = "instance.bin" if cfg.format == "bin" else "instance.csv"
    meta = {"seed": cfg.seed, "spec": _spec_doc(spec)}
    dump_instance(obs, os.path.join(out, name), fmt=cfg.format, with_truth=cfg.with_truth, meta=meta)
    _write_json(os.path.join(out, "manifest.json"),
                _manifest("sample", cfg, [name], {"seed": cfg.seed, "n": list(ispec.n), "spec": _spec_doc(spec)}))
    _log(cfg, 1, f"wrote {name}: K={spec.K} n={list(ispec.n)}")
    return EXIT_OK


def _spec_doc(spec: ProblemSpec) -> dict[str, Any]:
    return _clean(spec.to_dict())


COMMANDS = {"limits": cmd_limits, "wpca": cmd_wpca, "experiment": cmd_experiment, "sample": cmd_sample}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="hetspike", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"hetspike {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        src = s.add_mutually_exclusive_group()
        src.add_argument("--config", metavar="PATH", help="JSON configuration document")
        src.add_argument("--preset", metavar="NAME", help=f"built-in configuration ({', '.join(PRESETS)})")
        s.add_argument("--out", metavar="DIR", help="output directory (default: config 'out' or ./hetspike-out)")
        s.add_argument("--workers", type=int, metavar="N", help="parallel worker processes (default: all cores)")
        s.add_argument("--seed", type=int, metavar="U64", help="override base_seed / seed")
        s.add_argument("--trace", action="store_true", help="write AMP/GD trajectories to trace.csv")
        s.add_argument("--print-config", action="store_true", help="print the validated configuration and exit")
    return p


def load_document(args):
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(PRESETS)}", "--preset")
        command, doc = PRESETS[args.preset]
        if command != args.command:
            raise ConfigError(f"preset {args.preset!r} belongs to the {command!r} command", "--preset")
        return json.loads(json.dumps(doc))
    if not args.config:
        raise ConfigError("one of --config or --preset is required", None)
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc.strerror}", "--config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", "--config") from None
    if not isinstance(doc, dict):
        raise ConfigError("top level must be an object", None)
    return doc


def _apply_overrides(command, doc, args):
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "--seed")
        if command == "experiment":
            doc["base_seed"] = args.seed
        elif command == "sample":
            doc["seed"] = args.seed
        elif command == "limits":
            doc.setdefault("solver", {})["seed"] = args.seed
    if args.workers is not None and args.workers < 1:
        raise ConfigError("workers must be >= 1", "--workers")
    return doc


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        doc = _apply_overrides(args.command, load_document(args), args)
        cfg = parse_config(args.command, doc)
        if args.print_config:
            print(json.dumps(dump_config(cfg), indent=2, sort_keys=True))
            return EXIT_OK
        out = args.out or cfg.out or "hetspike-out"
        os.makedirs(out, exist_ok=True)
        return COMMANDS[args.command](cfg, out, args)
    except ConfigError as exc:
        where = f" at {exc.path}" if exc.path else ""
        print(f"hetspike: configuration error{where}: {exc.message}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceError as exc:
        print(f"hetspike: resource error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (NumericError, ExperimentAborted, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"hetspike: numeric error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except MemoryError as exc:
        print(f"hetspike: resource error: out of memory ({exc})", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
