"""Command-line entry point.

Subcommands: fit (print coefficients and in-sample concordance),
experiment (run the resampling protocol from a YAML config, write
curves.csv and run_meta.json), synth (generate a synthetic dataset CSV plus
ground truth), cindex (score file + dataset -> concordance index).

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Seeds resolve as: --seed flag, then config file value, then the SURVBV_SEED
environment variable, then 0.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np
import yaml

from . import __version__
from .coxfit import fit_cox, risk_scores
from .coxpath import CV_CINDEX, CV_DEVIANCE, FIXED_LAMBDA, PathConfig, fit_path
from .dataio import (
    DatasetSchema,
    ExponentialBaseline,
    SyntheticSpec,
    WeibullBaseline,
    dataset_hash,
    generate_synthetic,
    load_csv,
    write_curves,
    write_dataset,
)
from .exceptions import DataError, ParseError, SurvBVError, UsageError
from .harness import CoxPathAlgorithm, CoxPHAlgorithm, ProtocolConfig, run_protocol
from .survival import concordance_index

_ENV_SEED = "SURVBV_SEED"

_SELECTION_FLAGS = {
    "cv-deviance": CV_DEVIANCE,
    "cv-cindex": CV_CINDEX,
    "fixed": FIXED_LAMBDA,
}


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems through the exit-code contract."""

    def error(self, message):
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="survbv", description=__doc__)
    parser.add_argument("--version", action="version", version=f"survbv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_schema_flags(p):
        p.add_argument("--time-col", default="time", help="name of the time column")
        p.add_argument("--event-col", default="status", help="name of the event column")
        p.add_argument(
            "--features",
            default=None,
            help="comma-separated feature columns (default: all remaining)",
        )

    fit = sub.add_parser("fit", help="fit one model and print coefficients")
    fit.add_argument("--data", required=True, help="survival CSV file")
    fit.add_argument("--algo", choices=["coxph", "coxpath"], default="coxph")
    add_schema_flags(fit)
    fit.add_argument("--selection", choices=sorted(_SELECTION_FLAGS), default="cv-deviance",
                     help="coxpath model selection rule")
    fit.add_argument("--fixed-lambda", type=float, default=None,
                     help="penalty value; implies fixed selection")
    fit.add_argument("--n-lambda", type=int, default=100, help="penalty grid size")
    fit.add_argument("--lambda-min-ratio", type=float, default=None,
                     help="smallest penalty as a fraction of lambda_max")
    fit.add_argument("--cv-folds", type=int, default=5, help="cross-validation folds")
    fit.add_argument("--seed", type=int, default=None, help="fold-assignment seed")
    fit.set_defaults(func=_cmd_fit)

    exp = sub.add_parser("experiment", help="run the resampling protocol from a config file")
    exp.add_argument("config", help="YAML run configuration")
    exp.add_argument("--seed", type=int, default=None, help="override the master seed")
    exp.add_argument("--workers", type=int, default=1, help="parallel fit processes")
    exp.add_argument("--repetitions", type=int, default=None, help="override repetitions")
    exp.add_argument("--replicates", type=int, default=None,
                     help="override replicates per training size")
    exp.add_argument("--sizes", default=None, help="override training sizes, comma separated")
    exp.add_argument("--out", default=None, help="override the output directory")
    exp.set_defaults(func=_cmd_experiment)

    synth = sub.add_parser("synth", help="generate a synthetic survival dataset")
    synth.add_argument("--n", type=int, required=True, help="number of observations")
    synth.add_argument("--beta", required=True, help="true coefficients, comma separated")
    synth.add_argument("--censoring", type=float, default=0.0,
                       help="target censoring fraction in [0, 1)")
    synth.add_argument("--seed", type=int, default=None, help="generator seed")
    synth.add_argument("--baseline", choices=["exponential", "weibull"], default="exponential")
    synth.add_argument("--rate", type=float, default=1.0, help="exponential baseline rate")
    synth.add_argument("--shape", type=float, default=1.5, help="Weibull baseline shape")
    synth.add_argument("--scale", type=float, default=1.0, help="Weibull baseline scale")
    synth.add_argument("--out", required=True, help="output CSV path")
    synth.add_argument("--truth-out", default=None,
                       help="ground-truth JSON path (default: <out>.truth.json)")
    synth.set_defaults(func=_cmd_synth)

    cindex = sub.add_parser("cindex", help="concordance index of a score file on a dataset")
    cindex.add_argument("--data", required=True, help="survival CSV file")
    cindex.add_argument("--scores", required=True,
                        help="text file with one risk score per line, dataset row order")
    add_schema_flags(cindex)
    cindex.set_defaults(func=_cmd_cindex)

    return parser


def _schema_from_args(args) -> DatasetSchema:
    features = None
    if args.features:
        features = tuple(f.strip() for f in args.features.split(",") if f.strip())
    return DatasetSchema(
        time_column=args.time_col, event_column=args.event_col, feature_columns=features
    )


def _resolve_seed(flag_value, config_value=None) -> int:
    if flag_value is not None:
        return int(flag_value)
    if config_value is not None:
        return int(config_value)
    env = os.environ.get(_ENV_SEED)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{_ENV_SEED} must be an integer, got {env!r}") from None
    return 0


def _parse_float_list(text: str, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise UsageError(f"{flag} must not be empty")
    return values


def _cmd_fit(args) -> int:
    data = load_csv(args.data, _schema_from_args(args))
    if args.algo == "coxph":
        model = fit_cox(data)
        beta = model.beta
        print(f"algorithm: coxph (converged={model.converged}, iterations={model.iterations})")
        print(f"log partial likelihood: {model.final_log_partial_likelihood:.10g}")
    else:
        selection = _SELECTION_FLAGS[args.selection]
        if args.fixed_lambda is not None:
            selection = FIXED_LAMBDA
        config = PathConfig(
            n_lambda=args.n_lambda,
            lambda_min_ratio=args.lambda_min_ratio,
            selection=selection,
            fixed_lambda=args.fixed_lambda,
            cv_folds=args.cv_folds,
            seed=_resolve_seed(args.seed),
        )
        path = fit_path(data, config)
        beta = path.selected_beta
        print(f"algorithm: coxpath (selection={path.selection_rule})")
        print(f"selected lambda: {path.selected_lambda:.10g} "
              f"(index {path.selected_index} of {path.lambdas.size})")
        print(f"nonzero coefficients: {int(np.count_nonzero(beta))}")
    for name, value in zip(data.feature_names, beta):
        print(f"  {name}: {value:.10g}")
    scores = risk_scores(_AsModel(beta), data)
    print(f"in-sample concordance index: {concordance_index(scores, data):.10g}")
    return 0


class _AsModel:
    """Minimal coefficient carrier accepted by risk_scores."""

    def __init__(self, beta):
        self.beta = np.asarray(beta, dtype=float)


_CONFIG_KEYS = {
    "dataset": {"path", "synthetic", "time_column", "event_column", "feature_columns"},
    "dataset.synthetic": {"n", "beta", "censoring", "seed", "baseline"},
    "dataset.synthetic.baseline": {"type", "rate", "shape", "scale"},
    "protocol": {
        "training_sizes",
        "test_fraction",
        "replicates_per_size",
        "repetitions",
        "master_seed",
        "algorithms",
    },
    "coxpath": {
        "n_lambda",
        "lambda_min_ratio",
        "selection",
        "fixed_lambda",
        "cv_folds",
        "cd_tolerance",
        "cd_max_passes",
        "seed",
    },
    "output": {"directory"},
}


def _check_keys(section: dict, name: str):
    allowed = _CONFIG_KEYS[name]
    unknown = set(section) - allowed
    if unknown:
        raise UsageError(f"unknown key(s) in config section {name!r}: {sorted(unknown)}")


def _load_run_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"config {path} must be a mapping of sections")
    unknown = set(raw) - set(("dataset", "protocol", "coxpath", "output"))
    if unknown:
        raise UsageError(f"unknown config section(s): {sorted(unknown)}")
    for section in ("dataset", "protocol", "output"):
        if section not in raw:
            raise UsageError(f"config {path} is missing the {section!r} section")
        if not isinstance(raw[section], dict):
            raise UsageError(f"config section {section!r} must be a mapping")
    _check_keys(raw["dataset"], "dataset")
    _check_keys(raw["protocol"], "protocol")
    _check_keys(raw["output"], "output")
    if "coxpath" in raw:
        if not isinstance(raw["coxpath"], dict):
            raise UsageError("config section 'coxpath' must be a mapping")
        _check_keys(raw["coxpath"], "coxpath")
    synthetic = raw["dataset"].get("synthetic")
    if synthetic is not None:
        if not isinstance(synthetic, dict):
            raise UsageError("dataset.synthetic must be a mapping")
        _check_keys(synthetic, "dataset.synthetic")
        baseline = synthetic.get("baseline")
        if baseline is not None:
            if not isinstance(baseline, dict):
                raise UsageError("dataset.synthetic.baseline must be a mapping")
            _check_keys(baseline, "dataset.synthetic.baseline")
    if ("path" in raw["dataset"]) == (synthetic is not None):
        raise UsageError("dataset needs exactly one of 'path' or 'synthetic'")
    return raw


def _baseline_from_config(section: dict | None):
    if section is None:
        return ExponentialBaseline(1.0)
    kind = section.get("type", "exponential")
    if kind == "exponential":
        return ExponentialBaseline(rate=float(section.get("rate", 1.0)))
    if kind == "weibull":
        if "shape" not in section or "scale" not in section:
            raise UsageError("weibull baseline needs 'shape' and 'scale'")
        return WeibullBaseline(shape=float(section["shape"]), scale=float(section["scale"]))
    raise UsageError(f"unknown baseline type {kind!r}")


def _dataset_from_config(cfg: dict, config_dir: str):
    section = cfg["dataset"]
    if "path" in section:
        path = section["path"]
        if not os.path.isabs(path):
            path = os.path.normpath(os.path.join(config_dir, path))
        features = section.get("feature_columns")
        schema = DatasetSchema(
            time_column=section.get("time_column", "time"),
            event_column=section.get("event_column", "status"),
            feature_columns=tuple(features) if features else None,
        )
        data = load_csv(path, schema)
        return data, {"source": path}
    synth = section["synthetic"]
    if "n" not in synth or "beta" not in synth:
        raise UsageError("dataset.synthetic needs 'n' and 'beta'")
    spec = SyntheticSpec(
        n=int(synth["n"]),
        true_beta=tuple(float(b) for b in synth["beta"]),
        baseline=_baseline_from_config(synth.get("baseline")),
        censoring_rate_target=float(synth.get("censoring", 0.0)),
        seed=int(synth.get("seed", 0)),
    )
    data, _ = generate_synthetic(spec)
    return data, {"source": f"synthetic(n={spec.n}, seed={spec.seed})"}


def _path_config_from_config(cfg: dict, seed: int) -> PathConfig:
    section = cfg.get("coxpath", {})
    selection = section.get("selection", CV_DEVIANCE)
    if selection in _SELECTION_FLAGS:
        selection = _SELECTION_FLAGS[selection]
    kwargs = {
        "n_lambda": int(section.get("n_lambda", 100)),
        "selection": selection,
        "cv_folds": int(section.get("cv_folds", 5)),
        "cd_tolerance": float(section.get("cd_tolerance", 1e-7)),
        "cd_max_passes": int(section.get("cd_max_passes", 100_000)),
        "seed": int(section.get("seed", seed)),
    }
    if section.get("lambda_min_ratio") is not None:
        kwargs["lambda_min_ratio"] = float(section["lambda_min_ratio"])
    if section.get("fixed_lambda") is not None:
        kwargs["fixed_lambda"] = float(section["fixed_lambda"])
    try:
        return PathConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(f"invalid coxpath config: {exc}") from None


def _cmd_experiment(args) -> int:
    cfg = _load_run_config(args.config)
    config_dir = os.path.dirname(os.path.abspath(args.config))
    data, source_meta = _dataset_from_config(cfg, config_dir)

    protocol = cfg["protocol"]
    master_seed = _resolve_seed(args.seed, protocol.get("master_seed"))
    sizes = protocol.get("training_sizes")
    if args.sizes is not None:
        sizes = [int(float(s)) for s in args.sizes.split(",") if s.strip()]
    if not sizes:
        raise UsageError("protocol.training_sizes is required")
    repetitions = args.repetitions if args.repetitions is not None else protocol.get("repetitions", 10)
    replicates = args.replicates if args.replicates is not None else protocol.get(
        "replicates_per_size", 20
    )

    algo_names = protocol.get("algorithms", ["coxph", "coxpath"])
    path_config = _path_config_from_config(cfg, master_seed)
    algorithms = []
    for name in algo_names:
        if name == "coxph":
            algorithms.append(CoxPHAlgorithm())
        elif name == "coxpath":
            algorithms.append(CoxPathAlgorithm(path_config=path_config))
        else:
            raise UsageError(f"unknown algorithm {name!r} (expected coxph or coxpath)")

    try:
        run_config = ProtocolConfig(
            training_sizes=tuple(int(s) for s in sizes),
            algorithms=tuple(algorithms),
            test_fraction=float(protocol.get("test_fraction", 0.20)),
            replicates_per_size=int(replicates),
            repetitions=int(repetitions),
            master_seed=master_seed,
        )
    except ValueError as exc:
        raise UsageError(f"invalid protocol config: {exc}") from None

    out_dir = args.out if args.out is not None else cfg["output"]["directory"]
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")

    def progress(message: str):
        print(message, file=sys.stderr)

    curve = run_protocol(data, run_config, workers=args.workers, progress=progress)
    meta = dict(source_meta)
    meta["dataset_sha256"] = dataset_hash(data)
    meta["dataset_shape"] = {"n": data.n, "p": data.p}
    meta["selection"] = path_config.selection
    meta["coxpath"] = {
        "n_lambda": path_config.n_lambda,
        "lambda_min_ratio": path_config.lambda_min_ratio,
        "fixed_lambda": path_config.fixed_lambda,
        "cv_folds": path_config.cv_folds,
        "cd_tolerance": path_config.cd_tolerance,
        "cd_max_passes": path_config.cd_max_passes,
        "seed": path_config.seed,
    }
    curves_path, meta_path = write_curves(curve, out_dir, metadata=meta)
    print(f"wrote {curves_path}")
    print(f"wrote {meta_path}")
    return 0


def _cmd_synth(args) -> int:
    if args.baseline == "exponential":
        baseline = ExponentialBaseline(rate=args.rate)
    else:
        baseline = WeibullBaseline(shape=args.shape, scale=args.scale)
    try:
        spec = SyntheticSpec(
            n=args.n,
            true_beta=_parse_float_list(args.beta, "--beta"),
            baseline=baseline,
            censoring_rate_target=args.censoring,
            seed=_resolve_seed(args.seed),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data, truth = generate_synthetic(spec)
    write_dataset(data, args.out)
    truth_path = args.truth_out if args.truth_out is not None else f"{args.out}.truth.json"
    import json

    with open(truth_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "true_beta": list(truth.true_beta),
                "baseline": repr(spec.baseline),
                "seed": spec.seed,
                "censoring_rate_target": spec.censoring_rate_target,
                "realized_censoring_rate": truth.realized_censoring_rate,
                "n": spec.n,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    print(f"wrote {args.out}")
    print(f"wrote {truth_path}")
    print(f"realized censoring rate: {truth.realized_censoring_rate:.4f}")
    return 0


def _read_scores(path) -> np.ndarray:
    values = []
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            token = line.strip()
            if not token:
                continue
            try:
                values.append(float(token))
            except ValueError:
                raise ParseError(
                    f"{path}: line {line_number}: cannot parse {token!r} as a score"
                ) from None
    if not values:
        raise DataError(f"{path}: no scores found")
    return np.array(values)


def _cmd_cindex(args) -> int:
    data = load_csv(args.data, _schema_from_args(args))
    scores = _read_scores(args.scores)
    if scores.shape != (data.n,):
        raise DataError(f"{args.scores}: {scores.size} scores for {data.n} observations")
    print(f"{concordance_index(scores, data):.10g}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SurvBVError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
