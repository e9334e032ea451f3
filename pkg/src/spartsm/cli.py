"""Command-line interface: ``spartsm {simulate,fit,infer,changepoint,eval}``.

Every command can also be driven by a JSON config file
(``--config run.json``) of the form::

    {"command": "fit", "seed": 7, "options": {"lam": "auto", ...}}

where ``options`` keys are the command's flag names with dashes replaced by
underscores.  Flags given on the command line override the file.  Exit
codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .changepoint import default_grid, detect_pipeline
from .condexp import CondExpConfig
from .eval import (
    auc_experiment,
    coverage_experiment,
    inference_setting,
    normality_check,
    power_curve,
    write_json,
)
from .inference import run_pipeline
from .model import FeatureMap, TimeBasis, TimedDataset, read_csv, write_csv
from .parallel import resolve_threads
from .simulate import (
    deterministic_inference_path,
    gaussian_oracle_family,
    linear_ggm_path,
    mean_shift_series,
    random_inference_path,
    random_ising_path,
    sample_ggm_path,
    sample_ising_path,
    sample_truncated_ggm,
    sine_ggm_path,
)
from .solver import default_lambdas, fit_diff_param

logger = logging.getLogger("spartsm")


class ConfigError(Exception):
    """Invalid flags or config file (exit code 2)."""


# ----------------------------------------------------------------------------
# Run configuration
# ----------------------------------------------------------------------------


@dataclass
class RunConfig:
    command: str
    seed: int = 0
    options: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"command": self.command, "seed": self.seed, "options": dict(self.options)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict, allowed: Optional[dict] = None) -> "RunConfig":
        """``allowed`` maps each command to its option names; unknown
        top-level keys or options raise :class:`ConfigError`."""
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(data) - {"command", "seed", "options"}
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if "command" not in data:
            raise ConfigError("config needs a 'command'")
        seed = data.get("seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        options = data.get("options", {})
        if not isinstance(options, dict):
            raise ConfigError("options must be an object")
        if allowed is not None:
            if data["command"] not in allowed:
                raise ConfigError(f"unknown command {data['command']!r}")
            bad = set(options) - allowed[data["command"]]
            if bad:
                raise ConfigError(f"unknown options for {data['command']}: {sorted(bad)}")
        return cls(data["command"], seed, dict(options))

    @classmethod
    def from_json(cls, text: str, allowed: Optional[dict] = None) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data, allowed)


_INTERNAL = {"command", "config", "dump_config", "seed", "verbose", "func", "eval_command"}


# ----------------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------------


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_json(path, payload: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _positive(name, value):
    if value is None or value < 1:
        raise ConfigError(f"{name} must be >= 1, got {value}")


def _feature_map(kind: str, d: int) -> FeatureMap:
    if kind == "gaussian":
        return FeatureMap.gaussian_pairwise(d)
    if kind == "ising":
        return FeatureMap.ising_pairwise(d)
    if kind == "moments":
        if d != 1:
            raise ConfigError("moment features need univariate data")
        return FeatureMap.univariate_moments()
    raise ConfigError(f"unknown feature map {kind!r}")


def _basis(kind: str, b: int) -> TimeBasis:
    if kind == "linear":
        return TimeBasis.linear()
    if kind == "fourier":
        if b < 2 or b % 2:
            raise ConfigError("Fourier basis needs an even --b >= 2")
        return TimeBasis.fourier(b)
    raise ConfigError(f"unknown basis {kind!r}")


def _load(args) -> TimedDataset:
    domain = None
    if args.domain is not None:
        try:
            domain = [float(v) for v in args.domain.split(",")]
        except ValueError:
            raise ConfigError("--domain must be 'a,b'") from None
        if len(domain) != 2:
            raise ConfigError("--domain must be 'a,b'")
    try:
        return read_csv(args.dataset, args.layout, domain)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read dataset: {exc}") from None


def _condexp(args) -> CondExpConfig:
    return CondExpConfig(method=args.condexp, bandwidth=args.bandwidth, n_bins=args.bins)


def _parse_lambda(value, n, k) -> tuple[float, str]:
    if value in (None, "auto"):
        return default_lambdas(n, k)[0], "auto"
    try:
        lam = float(value)
    except ValueError:
        raise ConfigError(f"lambda must be 'auto' or a number, got {value!r}") from None
    if lam < 0 or not math.isfinite(lam):
        raise ConfigError("lambda must be a finite non-negative number")
    return lam, "user"


def _parse_targets(text, fmap: FeatureMap) -> Optional[list[int]]:
    if text in (None, "all"):
        return None
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            if "-" in tok:
                i, j = (int(v) for v in tok.split("-"))
                out.append(fmap.index_of(i, j))
            else:
                out.append(int(tok))
        except ValueError:
            raise ConfigError(f"bad target {tok!r}; use feature indices or pairs like 0-1") from None
        if not 0 <= out[-1] < fmap.k:
            raise ConfigError(f"target {tok!r} out of range for k={fmap.k}")
    return out


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    _positive("--n", args.n)
    _positive("--d", args.d)
    rng = np.random.default_rng(args.seed)
    model = args.model
    grouped = args.layout == "grouped"
    if grouped:
        _positive("--m", args.m)
    layout_kw = {"layout": args.layout, "m": args.m} if grouped else {"layout": "paired"}
    if model in ("ggm-sine", "ggm-linear", "ggm-deterministic", "ggm-random", "ggm-truncated"):
        if args.d < 2:
            raise ConfigError("GGM models need --d >= 2")
        if model == "ggm-sine":
            path = sine_ggm_path(args.d, p=args.p if args.p is not None else 0.02, seed=rng)
        elif model == "ggm-linear":
            path = linear_ggm_path(args.d, p=args.p if args.p is not None else 0.023, seed=rng)
        elif model == "ggm-deterministic":
            path = deterministic_inference_path(args.d, seed=rng)
        elif model == "ggm-random":
            path = random_inference_path(args.d, p=args.p if args.p is not None else 0.2, seed=rng)
        else:
            path = linear_ggm_path(args.d, p=args.p if args.p is not None else 0.1, diag=2.0, seed=rng)
        if model == "ggm-truncated":
            if grouped:
                raise ConfigError("truncated sampler supports the paired layout only")
            ds = sample_truncated_ggm(path, args.n, rng)
        else:
            ds = sample_ggm_path(path, args.n, rng, **layout_kw)
        truth = path.truth_record()
    elif model == "ising":
        if args.d < 2 or args.d > 64:
            raise ConfigError("Ising model needs 2 <= --d <= 64")
        path = random_ising_path(args.d, p=args.p if args.p is not None else 0.1, seed=rng)
        ds = sample_ising_path(path, args.d, args.n, rng, n_sweeps=args.sweeps, **layout_kw)
        truth = path.truth_record()
    elif model == "gaussian-1d":
        fam = gaussian_oracle_family(args.family)
        ds = fam.sample(args.n, rng, **layout_kw)
        truth = {"d": 1, "change_kind": args.family, "mask": [], "params": {"model": model}}
    elif model == "mean-shift":
        ds = mean_shift_series(args.n, seed=rng)
        truth = {"d": 1, "change_kind": "mean-shift", "mask": [],
                 "params": {"model": model, "change_at": 0.5, "before": 0.0, "after": 2.0}}
    else:
        raise ConfigError(f"unknown model {model!r}")
    truth["seed"] = args.seed
    truth["n_changes"] = len(truth.get("mask", []))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    write_csv(args.out, ds)
    _write_json(args.truth, truth)
    return 0


def cmd_fit(args) -> int:
    ds = _load(args)
    fmap = _feature_map(args.features, ds.d)
    basis = _basis(args.basis, args.b)
    lam, rule = _parse_lambda(args.lam, ds.n, fmap.k * basis.b)
    fit = fit_diff_param(ds, fmap, basis, condexp=_condexp(args), lam=lam)
    payload = fit.to_dict()
    payload.update({
        "lambda_rule": rule,
        "feature_map": fmap.kind.value,
        "pairs": fmap.pairs.tolist() if fmap.pairs is not None else None,
        "diagnostics": {"n": ds.n, "k": fmap.k, "condexp": args.condexp, "bandwidth": args.bandwidth,
                        "converged": fit.converged, "objective": fit.objective},
        "created": _timestamp(),
    })
    _write_json(args.out, payload)
    return 0


def cmd_infer(args) -> int:
    ds = _load(args)
    fmap = _feature_map(args.features, ds.d)
    if not 0 < args.level < 1:
        raise ConfigError("--level must lie in (0, 1)")
    lam, rule = _parse_lambda(args.lam, ds.n, fmap.k)
    lam_col = None if args.lam_col in (None, "auto") else (lam if args.lam_col == "same" else float(args.lam_col))
    targets = _parse_targets(args.targets, fmap)
    if targets is None and ds.d > 30:
        raise ConfigError("--targets is required when d > 30")
    report = run_pipeline(ds, fmap, condexp_cfg=_condexp(args), lambdas=(lam, lam_col), targets=targets,
                          delta=1.0 - args.level, threads=resolve_threads(args.threads))
    payload = report.to_dict()
    payload["metadata"].update({"lambda_rule": rule, "created": _timestamp(), "dataset": str(args.dataset)})
    _write_json(args.out, payload)
    return 0


def cmd_changepoint(args) -> int:
    ds = _load(args)
    fmap = _feature_map(args.features, ds.d)
    basis = _basis(args.basis, args.b)
    if args.grid < 2:
        raise ConfigError("--grid must be >= 2")
    if not 0 < args.delta < 1:
        raise ConfigError("--delta must lie in (0, 1)")
    if args.eps_sp < 0 or args.eps_pp < 0:
        raise ConfigError("--eps-sp and --eps-pp must be non-negative")
    fit, _, report = detect_pipeline(ds, fmap, basis, lam=args.lam, n_bins=args.bins,
                                     grid=default_grid(args.grid), delta=args.delta,
                                     eps_sp=args.eps_sp, eps_pp=args.eps_pp)
    payload = report.to_dict()
    payload["fit"] = fit.to_dict()
    payload["created"] = _timestamp()
    _write_json(args.out, payload)
    if args.stat_csv:
        report.write_stat_csv(args.stat_csv)
    return 0


def _lambdas_for(rule: str, n: int, k: int):
    lam_fit, lam_col = default_lambdas(n, k)
    if rule == "same":
        return lam_fit, lam_fit
    if rule == "default":
        return lam_fit, lam_col
    raise ConfigError(f"unknown --lambda-col rule {rule!r}")


def cmd_eval(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = resolve_threads(args.threads)
    _positive("--reps", args.reps)
    sub = args.eval_command
    if sub == "roc":
        runs = auc_experiment(args.model, args.d, args.n, args.reps, args.seed, threads=threads)
        with open(out / "roc.csv", "w") as fh:
            fh.write("rep,threshold,fpr,tpr\n")
            for r, run in enumerate(runs):
                for th, f, t in zip(run.roc.thresholds, run.roc.fpr, run.roc.tpr):
                    fh.write(f"{r},{th:.10g},{f:.10g},{t:.10g}\n")
        aucs = [run.auc for run in runs]
        summary = {"model": args.model, "d": args.d, "n": args.n, "reps": args.reps,
                   "auc": aucs, "mean_auc": float(np.mean(aucs)), "sd_auc": float(np.std(aucs))}
    elif sub in ("coverage", "normality"):
        gen, fmap, j, truth = inference_setting(args.setting, args.d, args.n)
        lambdas = _lambdas_for(args.lambda_col, args.n, fmap.k)
        res = coverage_experiment(gen, truth, args.reps, args.level, j, args.seed, fmap, lambdas, threads=threads)
        if sub == "coverage":
            summary = {"setting": args.setting, **res.summary()}
            np.savetxt(out / "residuals.csv", res.residuals, header="residual", comments="", fmt="%.10g")
        else:
            if args.reps < 50:
                raise ConfigError("normality needs --reps >= 50")
            chk = normality_check(res.residuals)
            chk.write_qq_csv(out / "qq.csv")
            summary = {"setting": args.setting, **chk.summary()}
    elif sub == "power":
        try:
            effects = [float(v) for v in args.effects.split(",") if v.strip()]
        except ValueError:
            raise ConfigError("--effects must be a comma-separated list of numbers") from None
        if not effects:
            raise ConfigError("--effects is empty")
        k = args.d * (args.d + 1) // 2
        curve = power_curve(effects, args.reps, args.level, args.seed, args.setting, args.d, args.n,
                            _lambdas_for(args.lambda_col, args.n, k), threads)
        curve.write_csv(out / "power.csv")
        summary = {"setting": args.setting, "effects": effects, "rejection": curve.rejection.tolist(),
                   "reps": args.reps, "level": args.level}
    else:
        raise ConfigError(f"unknown eval command {sub!r}")
    summary["seed"] = args.seed
    summary["created"] = _timestamp()
    write_json(out / "summary.json", summary)
    return 0


# ----------------------------------------------------------------------------
# Parser
# ----------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(f"{self.prog}: {message}")


def _common(p, with_seed=True):
    p.add_argument("--config", help="JSON run config; command-line flags override it", default=None)
    p.add_argument("--dump-config", help="write the effective run config to this path", default=None)
    if with_seed:
        p.add_argument("--seed", type=int, default=0, help="64-bit root seed")
    p.add_argument("--verbose", action="store_true", help="log progress and warnings")


def _data_flags(p):
    p.add_argument("dataset", help="CSV with header t,x1,...,xd")
    p.add_argument("--layout", choices=["paired", "grouped"], default="paired",
                   help="grouped: rows sharing a time stamp form one block")
    p.add_argument("--domain", default=None, help="raw time domain 'a,b' (default: data range)")
    p.add_argument("--features", choices=["gaussian", "ising", "moments"], default="gaussian",
                   help="sufficient statistic")
    p.add_argument("--condexp", choices=["auto", "nw", "group", "binned"], default="auto",
                   help="conditional-mean estimator")
    p.add_argument("--bandwidth", type=float, default=None, help="kernel bandwidth (default: Silverman)")
    p.add_argument("--bins", type=int, default=20, help="number of time bins for binned estimates")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="spartsm", description="Sparse time score matching", formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = subs.add_parser("simulate", help="simulate a dataset with known truth", formatter_class=fmt)
    p.add_argument("--model", default="ggm-sine",
                   choices=["ggm-sine", "ggm-linear", "ggm-deterministic", "ggm-random", "ggm-truncated",
                            "ising", "gaussian-1d", "mean-shift"], help="generative model")
    p.add_argument("--d", type=int, default=20, help="dimension")
    p.add_argument("--n", type=int, default=1000, help="samples (per block when grouped)")
    p.add_argument("--m", type=int, default=None, help="number of time blocks for the grouped layout")
    p.add_argument("--layout", choices=["paired", "grouped"], default="paired", help="dataset layout")
    p.add_argument("--p", type=float, default=None, help="Bernoulli rate of changing pairs (model default)")
    p.add_argument("--sweeps", type=int, default=200, help="Gibbs sweeps for the Ising model")
    p.add_argument("--family", default="time_mean_time_var",
                   choices=["fixed_mean_time_var", "time_mean_fixed_var", "time_mean_time_var"],
                   help="family for gaussian-1d")
    p.add_argument("--out", default="dataset.csv", help="dataset CSV path")
    p.add_argument("--truth", default="truth.json", help="ground-truth JSON path")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: SPARTSM_THREADS or cores)")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("fit", help="fit the differential parameter", formatter_class=fmt)
    _data_flags(p)
    p.add_argument("--basis", choices=["linear", "fourier"], default="linear", help="time basis")
    p.add_argument("--b", type=int, default=4, help="Fourier basis size (even)")
    p.add_argument("--lambda", dest="lam", default="auto", help="l1 penalty, or 'auto' for sqrt(2 ln k / n)")
    p.add_argument("--out", default="fit.json", help="output JSON path")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: SPARTSM_THREADS or cores)")
    _common(p)
    p.set_defaults(func=cmd_fit)

    p = subs.add_parser("infer", help="debiased inference on selected coordinates", formatter_class=fmt)
    _data_flags(p)
    p.add_argument("--targets", default="all", help="feature indices or pairs, e.g. '0-1,3-4'; 'all' for d <= 30")
    p.add_argument("--level", type=float, default=0.95, help="confidence level")
    p.add_argument("--lambda", dest="lam", default="auto", help="lasso penalty, or 'auto' for sqrt(2 ln k / n)")
    p.add_argument("--lambda-col", dest="lam_col", default="auto",
                   help="inverse-Hessian penalty: 'auto' for sqrt(ln k / n), 'same' as the lasso, or a number")
    p.add_argument("--out", default="report.json", help="output JSON path")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: SPARTSM_THREADS or cores)")
    _common(p)
    p.set_defaults(func=cmd_infer)

    p = subs.add_parser("changepoint", help="detect change intervals", formatter_class=fmt)
    _data_flags(p)
    p.add_argument("--basis", choices=["linear", "fourier"], default="fourier", help="time basis")
    p.add_argument("--b", type=int, default=4, help="Fourier basis size (even)")
    p.add_argument("--lambda", dest="lam", type=float, default=0.0, help="l1 penalty of the fit")
    p.add_argument("--delta", type=float, default=0.05, help="two-sided level of the pointwise threshold")
    p.add_argument("--eps-sp", dest="eps_sp", type=float, default=0.01, help="minimum interval width")
    p.add_argument("--eps-pp", dest="eps_pp", type=float, default=0.02, help="merge intervals closer than this")
    p.add_argument("--grid", type=int, default=200, help="number of equispaced evaluation points")
    p.add_argument("--out", default="change.json", help="output JSON path")
    p.add_argument("--stat-csv", dest="stat_csv", default="stat.csv", help="per-grid statistic CSV ('' to skip)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: SPARTSM_THREADS or cores)")
    _common(p)
    p.set_defaults(func=cmd_changepoint)

    p = subs.add_parser("eval", help="run an evaluation experiment", formatter_class=fmt)
    esubs = p.add_subparsers(dest="eval_command", required=True, parser_class=_Parser)
    for name, helptext in [("roc", "edge-detection ROC/AUC"), ("coverage", "confidence-interval coverage"),
                           ("power", "power curve"), ("normality", "normality of standardized residuals")]:
        q = esubs.add_parser(name, help=helptext, formatter_class=fmt)
        q.add_argument("--out-dir", dest="out_dir", default=f"eval-{name}", help="output directory")
        q.add_argument("--reps", type=int, default={"roc": 10, "power": 200}.get(name, 500),
                       help="replications")
        q.add_argument("--threads", type=int, default=None, help="worker threads (default: SPARTSM_THREADS or cores)")
        if name == "roc":
            q.add_argument("--model", choices=["ggm-linear", "ggm-sine", "ggm-truncated"], default="ggm-linear",
                           help="simulated model")
            q.add_argument("--d", type=int, default=20, help="dimension")
            q.add_argument("--n", type=int, default=1000, help="samples per replication")
        else:
            q.add_argument("--setting", choices=["deterministic", "random"], default="deterministic",
                           help="change pattern of the other pairs")
            q.add_argument("--d", type=int, default=20, help="dimension")
            q.add_argument("--n", type=int, default=400, help="samples per replication")
            q.add_argument("--level", type=float, default=0.95, help="confidence level")
            q.add_argument("--lambda-col", dest="lambda_col", choices=["same", "default"],
                           default="same" if name != "normality" else "default",
                           help="inverse-Hessian penalty: same as the lasso, or sqrt(ln k / n)")
        if name == "power":
            q.add_argument("--effects", default="0,1,2,3,4,5,6,7,8,9,10", help="true slopes of pair (0, 1)")
        _common(q)
        q.set_defaults(func=cmd_eval)
    return parser


def _option_names(parser) -> dict:
    """Option dests per command (``eval-roc`` etc. for eval subcommands)."""
    out = {}
    for action in parser._subparsers._group_actions[0].choices.items():
        name, sub = action
        if name == "eval":
            for ename, esub in sub._subparsers._group_actions[0].choices.items():
                out[f"eval-{ename}"] = {a.dest for a in esub._actions if a.dest not in _INTERNAL | {"help"}}
        else:
            out[name] = {a.dest for a in sub._actions if a.dest not in _INTERNAL | {"help"}}
    return out


def _command_key(args) -> str:
    return f"eval-{args.eval_command}" if args.command == "eval" else args.command


def _apply_config(parser, argv, args):
    with open(args.config) as fh:
        cfg = RunConfig.from_json(fh.read(), _option_names(parser))
    if cfg.command != _command_key(args):
        raise ConfigError(f"config is for '{cfg.command}', not '{_command_key(args)}'")
    # Re-parse with the file as defaults so explicit flags still win.
    sub = parser._subparsers._group_actions[0].choices[args.command]
    if args.command == "eval":
        sub = sub._subparsers._group_actions[0].choices[args.eval_command]
    explicit_seed = any(a == "--seed" or a.startswith("--seed=") for a in argv)
    sub.set_defaults(**cfg.options)
    if not explicit_seed:
        sub.set_defaults(seed=cfg.seed)
    return parser.parse_args(argv)


def effective_config(parser, args) -> RunConfig:
    names = _option_names(parser)[_command_key(args)]
    options = {k: getattr(args, k) for k in sorted(names)}
    return RunConfig(_command_key(args), args.seed, options)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            args = _apply_config(parser, argv, args)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                            format="%(levelname)s %(name)s: %(message)s")
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        if getattr(args, "threads", None) is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.dump_config:
            Path(args.dump_config).write_text(effective_config(parser, args).to_json() + "\n")
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, FileNotFoundError) else 1
    except Exception as exc:  # noqa: BLE001 - report any runtime failure as exit 1
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
