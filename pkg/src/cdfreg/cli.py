"""Command-line interface.

Three subcommands:

  simulate   Monte Carlo study on a built-in scenario; writes per-rep
             metrics.csv, summary.json, and report figures.
  fit        repeated random splits on a prepared real dataset; writes the
             same metric artifacts plus a fitted-probability slice.
  rearrange  monotone correction of fitted CDF curves from a CSV file.

Settings resolve in three layers: built-in defaults, then a JSON/TOML
config file (--config), then explicit command-line flags.  Unknown config
keys are rejected.  Failures print a single-line JSON error object to
stderr and exit with 2 (configuration), 3 (data), or 4 (numerical trouble);
success exits 0.

Reruns with identical settings are byte-identical on metrics.csv and
summary.json; summary.json carries a sha256 hash of the resolved settings
so runs can be told apart after the fact.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import re
import sys
from pathlib import Path

import numpy as np

from .core import Sample, indicators, make_grid
from .dataio import RECIPES, DataError, load_csv, load_recipe
from .isotonic import fit_isotonic, predict_nearest
from .metrics import evaluate_grid
from .rearrange import rearrange_step
from .relunet import (FitDivergedError, MlpArchitecture, TrainConfig,
                      fit_relu, predict_relu)
from .scenarios import (DEFAULT_ESTIMATORS, DEFAULT_TF_ORDER, SCENARIOS,
                        McPlan, ScenarioSpec, default_grid, run_monte_carlo,
                        split_indices)
from .trendfilter import TrendFilterConfig, fit_trendfilter, predict_linear


class ConfigError(RuntimeError):
    """Bad settings; carries a short machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


_ESTIMATOR_NAMES = {"isotonic": "isotonic", "tf": "trendfilter",
                    "trendfilter": "trendfilter", "relu": "relunet",
                    "relunet": "relunet"}


def _parse_grid(value):
    """'lo:hi:m' (or a [lo, hi, m] list from a config file) -> (lo, hi, m)."""
    if isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        parts = str(value).split(":")
    if len(parts) != 3:
        raise ConfigError("bad-grid", f"grid must be lo:hi:m, got {value!r}")
    try:
        lo, hi, m = float(parts[0]), float(parts[1]), int(parts[2])
    except (TypeError, ValueError):
        raise ConfigError("bad-grid", f"grid must be lo:hi:m, got {value!r}")
    if not lo < hi or m < 2:
        raise ConfigError("bad-grid", f"grid needs lo < hi and m >= 2, got {value!r}")
    return lo, hi, m


def _parse_float_list(value, key):
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [p for p in str(value).split(",") if p != ""]
    try:
        out = tuple(float(v) for v in items)
    except (TypeError, ValueError):
        raise ConfigError(f"bad-{key}", f"{key} must be comma-separated numbers")
    if not out:
        raise ConfigError(f"bad-{key}", f"{key} is empty")
    return out


def _parse_int_list(value, key):
    floats = _parse_float_list(value, key)
    ints = tuple(int(v) for v in floats)
    if any(i != f for i, f in zip(ints, floats)) or any(i < 1 for i in ints):
        raise ConfigError(f"bad-{key}", f"{key} must be positive integers")
    return ints


def _load_config_file(path):
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as err:
        raise ConfigError("config-unreadable", f"cannot read {path}: {err}")
    if p.suffix.lower() == ".json":
        try:
            data = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise ConfigError("config-parse", f"{path}: {err}")
    elif p.suffix.lower() == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:
            import tomli as tomllib
        try:
            data = tomllib.loads(raw.decode("utf-8"))
        except Exception as err:
            raise ConfigError("config-parse", f"{path}: {err}")
    else:
        raise ConfigError("config-format",
                          f"config file must be .json or .toml, got {p.suffix!r}")
    if not isinstance(data, dict):
        raise ConfigError("config-parse", f"{path}: top level must be a table/object")
    return data


def _resolve(defaults, config_path, cli_values):
    """defaults < config file < explicit flags; unknown config keys rejected."""
    settings = dict(defaults)
    if config_path is not None:
        file_cfg = _load_config_file(config_path)
        unknown = sorted(set(file_cfg) - set(defaults))
        if unknown:
            raise ConfigError("unknown-config-key",
                              f"unknown config key(s): {', '.join(unknown)}")
        settings.update(file_cfg)
    for key, value in cli_values.items():
        if value is not None:
            settings[key] = value
    return settings


def _config_hash(settings) -> str:
    """sha256 over the canonical JSON of the run settings.

    Output location and figure toggles do not change the numbers and are
    excluded, so the hash identifies the statistical configuration.
    """
    science = {k: v for k, v in settings.items() if k not in ("out", "figures")}
    blob = json.dumps(science, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _coerce_int(settings, key, lo=None):
    try:
        v = int(settings[key])
    except (TypeError, ValueError):
        raise ConfigError(f"bad-{key}", f"{key} must be an integer")
    if lo is not None and v < lo:
        raise ConfigError(f"bad-{key}", f"{key} must be >= {lo}")
    return v


def _coerce_float(settings, key, lo=None, hi=None):
    try:
        v = float(settings[key])
    except (TypeError, ValueError):
        raise ConfigError(f"bad-{key}", f"{key} must be a number")
    if lo is not None and not v > lo:
        raise ConfigError(f"bad-{key}", f"{key} must be > {lo}")
    if hi is not None and not v < hi:
        raise ConfigError(f"bad-{key}", f"{key} must be < {hi}")
    return v


def _write_metrics_csv(path, crps, msd):
    lines = ["rep,crps,msd"]
    for rep, (c, s) in enumerate(zip(crps, msd)):
        lines.append(f"{rep},{float(c)!r},{float(s)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_summary_json(path, crps, msd, n, reps, seed, config_hash):
    crps = np.asarray(crps, dtype=float)
    msd = np.asarray(msd, dtype=float)
    summary = {
        "crps_mean": float(np.mean(crps)),
        "crps_std": float(np.std(crps)),
        "msd_mean": float(np.mean(msd)),
        "msd_std": float(np.std(msd)),
        "n": int(n),
        "reps": int(reps),
        "seed": int(seed),
        "config_hash": config_hash,
    }
    Path(path).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n",
                          encoding="utf-8")
    return summary


SIM_DEFAULTS = {
    "scenario": None, "n": 400, "reps": 100, "seed": 0, "grid": None,
    "estimator": None, "order": None, "lambda_grid": None, "epochs": 1000,
    "hidden": None, "loss": "bce", "train_frac": 0.75,
    "exponential_rate": False, "rearrange": False, "figures": True,
    "out": None,
}


def _build_tf_config(settings, default_order):
    order = settings["order"]
    order = default_order if order is None else _coerce_int(
        {"order": order}, "order", lo=1)
    kwargs = {"order": order}
    if settings["lambda_grid"] is not None:
        kwargs["lambda_grid"] = _parse_float_list(settings["lambda_grid"],
                                                  "lambda-grid")
    try:
        return TrendFilterConfig(**kwargs)
    except ValueError as err:
        raise ConfigError("bad-lambda-grid", str(err))


def cmd_simulate(settings) -> int:
    scenario = settings["scenario"]
    if scenario is None:
        raise ConfigError("missing-scenario", "simulate needs --scenario")
    if scenario not in SCENARIOS:
        raise ConfigError("unknown-scenario",
                          f"unknown scenario {scenario!r}; known: {', '.join(SCENARIOS)}")
    if settings["out"] is None:
        raise ConfigError("missing-out", "simulate needs --out DIR")
    n = _coerce_int(settings, "n", lo=8)
    reps = _coerce_int(settings, "reps", lo=1)
    seed = _coerce_int(settings, "seed", lo=0)
    epochs = _coerce_int(settings, "epochs", lo=1)
    train_frac = _coerce_float(settings, "train_frac", lo=0.0, hi=1.0)

    if settings["grid"] is None:
        grid = default_grid(scenario)
        settings["grid"] = [grid.points[0], grid.points[-1], grid.m]
    else:
        lo, hi, m = _parse_grid(settings["grid"])
        settings["grid"] = [lo, hi, m]
        grid = make_grid(lo, hi, m)

    est_raw = settings["estimator"] or DEFAULT_ESTIMATORS[scenario]
    if est_raw not in _ESTIMATOR_NAMES:
        raise ConfigError("unknown-estimator",
                          f"unknown estimator {est_raw!r}; "
                          f"known: {', '.join(sorted(_ESTIMATOR_NAMES))}")
    estimator = _ESTIMATOR_NAMES[est_raw]
    settings["estimator"] = estimator
    if settings["loss"] not in ("bce", "squared"):
        raise ConfigError("bad-loss", "loss must be 'bce' or 'squared'")

    tf_config = None
    hidden = None
    train_config = None
    if estimator == "trendfilter":
        tf_config = _build_tf_config(settings, DEFAULT_TF_ORDER[scenario])
        settings["order"] = tf_config.order
        settings["lambda_grid"] = list(tf_config.lambda_grid)
    elif estimator == "relunet":
        if scenario not in ("S5", "S6"):
            raise ConfigError("estimator-mismatch",
                              f"relunet needs covariates; scenario {scenario} "
                              "has none (use S5 or S6)")
        hidden = (_parse_int_list(settings["hidden"], "hidden")
                  if settings["hidden"] is not None else (64, 64))
        settings["hidden"] = list(hidden)
        train_config = TrainConfig(epochs=epochs, loss=settings["loss"])

    spec = ScenarioSpec(scenario, n, seed=seed,
                        exponential_rate=bool(settings["exponential_rate"]))
    plan = McPlan(spec=spec, grid=grid, estimator=estimator, reps=reps,
                  train_frac=train_frac, tf_config=tf_config, hidden=hidden,
                  train_config=train_config,
                  rearrange=bool(settings["rearrange"]))
    result = run_monte_carlo(plan)

    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_metrics_csv(out / "metrics.csv", result.crps, result.msd)
    _write_summary_json(out / "summary.json", result.crps, result.msd,
                        n, reps, seed, _config_hash(settings))
    if settings["figures"]:
        from . import report
        report.metrics_figure(out / "metrics.png", result.crps, result.msd)
        report.threshold_curve_figure(out / "per_threshold.png",
                                      grid.points, result.per_threshold)
    print(f"wrote {out / 'metrics.csv'} and {out / 'summary.json'} "
          f"(crps_mean={result.crps_mean:.6g}, msd_mean={result.msd_mean:.6g})")
    return 0


FIT_DEFAULTS = {
    "data": None, "dataset": None, "estimator": "trendfilter", "grid": None,
    "splits": 100, "seed": 0, "train_frac": 0.75, "order": 1,
    "lambda_grid": None, "epochs": 1000, "hidden": None, "loss": "bce",
    "grid_dims": None, "slice_t": None, "figures": True, "out": None,
}


def _fit_one_split(estimator, sample, grid, train, test, tf_config,
                   hidden, epochs, loss, net_seed):
    y_tr = sample.y[train]
    ind_tr = indicators(Sample(y_tr), grid)
    if estimator == "isotonic":
        fit = fit_isotonic(ind_tr, train_index=train.astype(float))
        pred = predict_nearest(fit, test.astype(float))
    elif estimator == "trendfilter":
        fit = fit_trendfilter(ind_tr, tf_config, train_index=train.astype(float))
        pred = predict_linear(fit, test.astype(float))
    else:
        if sample.x is None:
            raise DataError("no-covariates",
                            "relunet needs covariates from the recipe")
        cfg = TrainConfig(epochs=epochs, loss=loss, seed=net_seed,
                          standardize=True)
        arch = MlpArchitecture(sample.x.shape[1], hidden)
        fit = fit_relu(Sample(y_tr, sample.x[train]), ind_tr, arch=arch,
                       config=cfg, warm_start=True)
        pred = predict_relu(fit, sample.x[test])
    return np.clip(pred.values, 0.0, 1.0)


def cmd_fit(settings) -> int:
    if settings["data"] is None:
        raise ConfigError("missing-data", "fit needs --data FILE")
    if settings["dataset"] is None:
        raise ConfigError("missing-dataset",
                          f"fit needs --dataset; known: {', '.join(sorted(RECIPES))}")
    if settings["dataset"] not in RECIPES:
        raise ConfigError("unknown-dataset",
                          f"unknown dataset {settings['dataset']!r}; "
                          f"known: {', '.join(sorted(RECIPES))}")
    if settings["out"] is None:
        raise ConfigError("missing-out", "fit needs --out DIR")
    est_raw = settings["estimator"]
    if est_raw not in _ESTIMATOR_NAMES:
        raise ConfigError("unknown-estimator",
                          f"unknown estimator {est_raw!r}; "
                          f"known: {', '.join(sorted(_ESTIMATOR_NAMES))}")
    estimator = _ESTIMATOR_NAMES[est_raw]
    settings["estimator"] = estimator
    if settings["loss"] not in ("bce", "squared"):
        raise ConfigError("bad-loss", "loss must be 'bce' or 'squared'")
    splits = _coerce_int(settings, "splits", lo=1)
    seed = _coerce_int(settings, "seed", lo=0)
    epochs = _coerce_int(settings, "epochs", lo=1)
    train_frac = _coerce_float(settings, "train_frac", lo=0.0, hi=1.0)

    recipe = RECIPES[settings["dataset"]]
    nrows = ncols = None
    if settings["grid_dims"] is not None:
        dims = _parse_int_list(settings["grid_dims"], "grid-dims")
        if len(dims) != 2:
            raise ConfigError("bad-grid-dims", "grid-dims must be two integers R,C")
        nrows, ncols = dims
        settings["grid_dims"] = list(dims)
    agg = load_recipe(settings["dataset"], settings["data"],
                      nrows=nrows, ncols=ncols)
    sample = agg.sample
    n = sample.n
    if n < 8:
        raise DataError("too-few-units",
                        f"aggregation produced only {n} units; need at least 8")

    if settings["grid"] is None:
        grid = make_grid(recipe.eval_lo, recipe.eval_hi, 100)
        settings["grid"] = [recipe.eval_lo, recipe.eval_hi, 100]
    else:
        lo, hi, m = _parse_grid(settings["grid"])
        settings["grid"] = [lo, hi, m]
        grid = make_grid(lo, hi, m)

    tf_config = None
    hidden = None
    if estimator == "trendfilter":
        tf_config = _build_tf_config(settings, 1)
        settings["order"] = tf_config.order
        settings["lambda_grid"] = list(tf_config.lambda_grid)
    elif estimator == "relunet":
        hidden = (_parse_int_list(settings["hidden"], "hidden")
                  if settings["hidden"] is not None else recipe.relu_hidden)
        settings["hidden"] = list(hidden)

    slice_t = settings["slice_t"]
    if slice_t is None:
        slice_t = 0.5 * (grid.points[0] + grid.points[-1])
    else:
        slice_t = _coerce_float({"slice_t": slice_t}, "slice_t")
    settings["slice_t"] = slice_t
    slice_col = int(np.argmin(np.abs(grid.points - slice_t)))

    crps = np.empty(splits)
    msd = np.empty(splits)
    slice_rows = None
    for s in range(splits):
        ss_split, ss_net = np.random.SeedSequence([seed, s]).spawn(2)
        train, test = split_indices(n, train_frac,
                                    np.random.default_rng(ss_split))
        net_seed = int(ss_net.generate_state(1)[0])
        values = _fit_one_split(estimator, sample, grid, train, test,
                                tf_config, hidden, epochs, settings["loss"],
                                net_seed)
        reference = indicators(Sample(sample.y[test]), grid).w
        rep = evaluate_grid(values, reference)
        crps[s] = rep.crps
        msd[s] = rep.msd
        if s == 0:
            slice_rows = (test, values[:, slice_col])

    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    _write_metrics_csv(out / "metrics.csv", crps, msd)
    _write_summary_json(out / "summary.json", crps, msd, n, splits, seed,
                        _config_hash(settings))
    lines = ["unit,value"]
    for unit, val in zip(*slice_rows):
        lines.append(f"{int(unit)},{float(val)!r}")
    (out / "slice.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if settings["figures"]:
        from . import report
        report.metrics_figure(out / "metrics.png", crps, msd)
        report.cdf_slice_figure(out / "slice.png", slice_rows[0],
                                slice_rows[1], grid.points[slice_col])
    print(f"wrote {out / 'metrics.csv'}, {out / 'summary.json'}, "
          f"{out / 'slice.csv'} over {n} units")
    return 0


REARRANGE_DEFAULTS = {"input": None, "figures": True, "out": None}


def cmd_rearrange(settings) -> int:
    if settings["input"] is None:
        raise ConfigError("missing-input", "rearrange needs --input FILE")
    if settings["out"] is None:
        raise ConfigError("missing-out", "rearrange needs --out DIR")
    path = settings["input"]
    import csv as _csv
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            header = next(_csv.reader(fh), None)
    except OSError as err:
        raise DataError("file-not-found", f"cannot open {path}: {err}")
    # re-read properly via load_csv once the header is known
    if not header or "y" not in header:
        raise DataError("missing-column", f"{path} needs a 'y' column")
    unit_cols = [c for c in header if c != "y"]
    if not unit_cols:
        raise DataError("no-units", f"{path} has no unit columns besides y")
    table = load_csv(path, {c: "float" for c in header})
    if table.n_rows < 2:
        raise DataError("too-few-rows", "need at least two rows to rearrange")
    y = table.columns["y"]
    order = np.argsort(y, kind="stable")
    y_sorted = y[order]
    if np.any(np.diff(y_sorted) <= 0):
        raise DataError("duplicate-values",
                        "y has duplicate values; break ties first "
                        "(see jitter_ties)")
    out = Path(settings["out"])
    out.mkdir(parents=True, exist_ok=True)
    lines = ["unit,breakpoint,level"]
    figure_steps = []
    for cname in unit_cols:
        levels = table.columns[cname][order][:-1]
        step = rearrange_step(y_sorted, np.clip(levels, 0.0, 1.0))
        figure_steps.append((cname, step))
        for b, lv in zip(step.breakpoints, step.levels):
            lines.append(f"{cname},{float(b)!r},{float(lv)!r}")
    (out / "steps.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if settings["figures"]:
        from . import report
        report.step_functions_figure(out / "steps.png", figure_steps)
    print(f"wrote {out / 'steps.csv'} ({len(unit_cols)} corrected curves)")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cdfreg",
        description="Per-threshold conditional CDF estimation, correction, "
                    "and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo study on a scenario")
    sim.add_argument("--scenario", default=None, help="S1..S6")
    sim.add_argument("--n", type=int, default=None, help="units per draw")
    sim.add_argument("--reps", type=int, default=None, help="Monte Carlo reps")
    sim.add_argument("--seed", type=int, default=None, help="master seed")
    sim.add_argument("--grid", default=None, help="thresholds lo:hi:m")
    sim.add_argument("--estimator", default=None,
                     help="isotonic | tf | relu (default depends on scenario)")
    sim.add_argument("--r", "--order", dest="order", type=int, default=None,
                     help="difference order of the trend-filter penalty")
    sim.add_argument("--lambda-grid", dest="lambda_grid", default=None,
                     help="comma-separated penalty grid for CV")
    sim.add_argument("--epochs", type=int, default=None,
                     help="training epochs per threshold network")
    sim.add_argument("--hidden", default=None,
                     help="comma-separated hidden widths, e.g. 64,64")
    sim.add_argument("--loss", default=None, help="bce | squared")
    sim.add_argument("--train-frac", dest="train_frac", type=float,
                     default=None, help="train fraction of each draw")
    sim.add_argument("--exponential-rate", dest="exponential_rate",
                     action="store_true", default=None,
                     help="S3: sinusoid is the rate, not the mean")
    sim.add_argument("--rearrange", action="store_true", default=None,
                     help="monotonize predicted curves along the grid")
    sim.add_argument("--no-figures", dest="figures", action="store_false",
                     default=None, help="skip PNG report figures")
    sim.add_argument("--config", default=None, help="JSON/TOML settings file")
    sim.add_argument("--out", default=None, help="output directory")

    fit = sub.add_parser("fit", help="repeated-split evaluation on a dataset")
    fit.add_argument("--data", default=None, help="raw CSV file")
    fit.add_argument("--dataset", default=None,
                     help=" | ".join(sorted(RECIPES)))
    fit.add_argument("--estimator", default=None,
                     help="isotonic | tf | relu (default tf)")
    fit.add_argument("--grid", default=None, help="thresholds lo:hi:m")
    fit.add_argument("--splits", type=int, default=None,
                     help="number of random train/test splits")
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--train-frac", dest="train_frac", type=float, default=None)
    fit.add_argument("--r", "--order", dest="order", type=int, default=None)
    fit.add_argument("--lambda-grid", dest="lambda_grid", default=None)
    fit.add_argument("--epochs", type=int, default=None)
    fit.add_argument("--hidden", default=None)
    fit.add_argument("--loss", default=None)
    fit.add_argument("--grid-dims", dest="grid_dims", default=None,
                     help="override lattice dimensions R,C")
    fit.add_argument("--slice-t", dest="slice_t", type=float, default=None,
                     help="threshold for the fitted-probability slice")
    fit.add_argument("--no-figures", dest="figures", action="store_false",
                     default=None)
    fit.add_argument("--config", default=None)
    fit.add_argument("--out", default=None)

    rea = sub.add_parser("rearrange", help="monotone-correct fitted curves")
    rea.add_argument("--input", default=None,
                     help="CSV: column y plus one column per unit of fitted "
                          "F(y) values")
    rea.add_argument("--no-figures", dest="figures", action="store_false",
                     default=None)
    rea.add_argument("--config", default=None)
    rea.add_argument("--out", default=None)

    # values like "-1:0.4:100" or "-4,2" start with a dash and would be
    # mistaken for flags; widen the negative-number test so signed grid and
    # list values parse without the --flag=value spelling
    signed_value = re.compile(r"^-\d+(\.\d+)?([:,]\S*)?$")
    for p in (parser, sim, fit, rea):
        p._negative_number_matcher = signed_value
    return parser


def _error_json(code: str, message: str):
    payload = json.dumps({"error": {"code": code, "message": message}})
    print(payload, file=sys.stderr)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    handlers = {"simulate": (SIM_DEFAULTS, cmd_simulate),
                "fit": (FIT_DEFAULTS, cmd_fit),
                "rearrange": (REARRANGE_DEFAULTS, cmd_rearrange)}
    defaults, handler = handlers[args.command]
    cli_values = {k: v for k, v in vars(args).items()
                  if k not in ("command", "config")}
    try:
        settings = _resolve(defaults, args.config, cli_values)
        unknown = sorted(set(cli_values) - set(defaults))
        if unknown:
            raise ConfigError("unknown-option",
                              f"internal: unmapped option(s) {unknown}")
        return handler(settings)
    except ConfigError as err:
        _error_json(err.code, str(err))
        return 2
    except DataError as err:
        _error_json(err.code, str(err))
        return 3
    except FitDivergedError as err:
        _error_json("fit-diverged", str(err))
        return 4
    except np.linalg.LinAlgError as err:
        _error_json("linear-algebra", str(err))
        return 4
    except ValueError as err:
        _error_json("invalid-config", str(err))
        return 2


if __name__ == "__main__":
    sys.exit(main())
