"""Command-line interface: fit per-area datasets, run benchmark studies, and
estimate population means from CSV files.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 config error.
CSV output is comma-separated UTF-8 with a mandatory header and '.' decimals;
floats are written with full round-trip precision.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .data import AreaDataset, PopMeanInput
from .exceptions import (
    InfeasibleScenarioError,
    InsufficientDataError,
    NonFiniteObjectiveError,
    OptimizationError,
    SingularDesignError,
)
from .popmean import (
    mu_cbp,
    mu_direct,
    mu_direct_compromise,
    mu_minvar,
    mu_plugin_cbp,
    mu_spline_regression,
)
from .predictors import (
    fit_cbp,
    fit_eblup,
    fit_multitau_cbp,
    fit_obp,
    fit_plugin_cbp,
)
from .presets import get_preset
from .simulate import (
    InformativeSampleSize,
    LatentClusters,
    PopAverage,
    SimScenario,
    run_study,
    validate_design,
)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

FIT_METHODS = {
    "eblup_mle": lambda d: fit_eblup(d, "mle"),
    "eblup_reml": lambda d: fit_eblup(d, "reml"),
    "eblup_ure": lambda d: fit_eblup(d, "ure"),
    "obp": fit_obp,
    "cbp": fit_cbp,
    "cbp_plugin": fit_plugin_cbp,
    "cbp_multitau": fit_multitau_cbp,
}
DEFAULT_FIT_METHODS = ["eblup_reml", "obp", "cbp", "cbp_plugin"]

_DESIGNS = {
    "latent_clusters": LatentClusters,
    "informative_sample_size": InformativeSampleSize,
    "pop_average": PopAverage,
}


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # Usage problems are configuration errors (exit 4), not argparse's 2.
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _read_csv(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise InputError(f"{path}: empty input (a header row is required)")
    header = [h.strip() for h in rows[0]]
    return header, rows[1:]


def _column(header, rows, name, path):
    if name not in header:
        raise InputError(f"{path}: missing column {name!r} (have: {', '.join(header)})")
    j = header.index(name)
    out = []
    for i, row in enumerate(rows, start=2):
        if j >= len(row) or row[j].strip() == "":
            raise InputError(f"{path}:{i}: empty value in column {name!r}")
        try:
            out.append(float(row[j]))
        except ValueError:
            raise InputError(
                f"{path}:{i}: non-numeric value {row[j]!r} in column {name!r}"
            ) from None
    return np.array(out)


def _load_area_dataset(args):
    header, rows = _read_csv(args.input)
    y = _column(header, rows, args.y_col, args.input)
    if args.sigma2_col:
        sigma2 = _column(header, rows, args.sigma2_col, args.input)
    else:
        s = _column(header, rows, args.s_col, args.input)
        n = _column(header, rows, args.n_col, args.input)
        sigma2 = s * s / n
    cols = [np.ones(len(y))]
    if args.x_cols:
        for name in args.x_cols.split(","):
            cols.append(_column(header, rows, name.strip(), args.input))
    x = np.column_stack(cols)
    if args.id_col and args.id_col in header:
        j = header.index(args.id_col)
        ids = tuple(row[j] for row in rows)
    else:
        ids = tuple(str(i) for i in range(len(y)))
    try:
        return AreaDataset(y=y, x=x, sigma2=sigma2, area_ids=ids)
    except ValueError as exc:
        raise InputError(f"{args.input}: {exc}") from exc


def _write_fit_csv(path, data, results):
    methods = list(results)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for m in methods:
            r = results[m]
            beta = ";".join(_fmt(float(b)) for b in r.beta)
            alpha = "" if r.alpha_star is None else _fmt(float(r.alpha_star))
            fh.write(
                f"# method={m} beta={beta} tau={_fmt(float(r.tau_star))} "
                f"alpha={alpha} risk_estimate={_fmt(float(r.risk_estimate))}\n"
            )
        writer = csv.writer(fh)
        header = ["area_id", "y", "sigma2"]
        for m in methods:
            header += [f"theta_{m}", f"shrink_{m}"]
        writer.writerow(header)
        for i, aid in enumerate(data.area_ids):
            row = [aid, _fmt(float(data.y[i])), _fmt(float(data.sigma2[i]))]
            for m in methods:
                r = results[m]
                row += [
                    _fmt(float(r.theta_hat[i])),
                    _fmt(float(np.asarray(r.shrinkage)[i])),
                ]
            writer.writerow(row)


def _fit_json_payload(data, results):
    summary = {}
    for m, r in results.items():
        summary[m] = {
            "beta": [float(b) for b in r.beta],
            "tau": float(r.tau_star),
            "alpha": None if r.alpha_star is None else float(r.alpha_star),
            "risk_estimate": float(r.risk_estimate),
        }
    areas = []
    for i, aid in enumerate(data.area_ids):
        areas.append(
            {
                "area_id": aid,
                "y": float(data.y[i]),
                "sigma2": float(data.sigma2[i]),
                "theta": {m: float(r.theta_hat[i]) for m, r in results.items()},
                "shrinkage": {
                    m: float(np.asarray(r.shrinkage)[i]) for m, r in results.items()
                },
            }
        )
    return {"summary": summary, "areas": areas}


def cmd_fit(args) -> int:
    data = _load_area_dataset(args)
    names = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not names:
        raise ConfigError("at least one method is required")
    for m in names:
        if m not in FIT_METHODS:
            raise ConfigError(
                f"unknown method {m!r}; available: {', '.join(sorted(FIT_METHODS))}"
            )
    results = {m: FIT_METHODS[m](data) for m in names}
    if args.format == "json":
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(_fit_json_payload(data, results), fh, indent=2)
            fh.write("\n")
    else:
        _write_fit_csv(args.out, data, results)
    return EXIT_OK


def _design_from_config(cfg):
    if "type" not in cfg:
        raise ConfigError("design config needs a 'type' field")
    name = cfg["type"]
    if name not in _DESIGNS:
        raise ConfigError(
            f"unknown design type {name!r}; available: {', '.join(sorted(_DESIGNS))}"
        )
    params = {k: v for k, v in cfg.items() if k != "type"}
    if "beta" in params:
        params["beta"] = tuple(params["beta"])
    try:
        return _DESIGNS[name](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for design {name!r}: {exc}") from exc


def _write_report_rows(path, rows):
    keys = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        for row in rows:
            writer.writerow([_fmt(row.get(k, "")) for k in keys])


def _write_sweep_csv(path, sweep, settings_rows, methods):
    """Pivot: one row per swept value, one MSPE column per method."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([sweep] + [f"mspe_{m}" for m in methods])
        for value, report in settings_rows:
            writer.writerow(
                [_fmt(value)] + [_fmt(report.mspe[m]) for m in methods]
            )


def cmd_simulate(args) -> int:
    if bool(args.preset) == bool(args.config):
        raise ConfigError("exactly one of --preset or --config is required")
    if args.preset:
        try:
            preset = get_preset(args.preset)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc
        settings = preset.settings
        methods = list(preset.methods)
        sweep = preset.sweep
    else:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read {args.config}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from exc
        design = _design_from_config(cfg.get("design", {}))
        methods = list(cfg.get("methods", []))
        if not methods:
            raise ConfigError("config must list at least one method")
        settings = (({}, design),)
        sweep = None
    for _, design in settings:
        try:
            validate_design(design)
        except InfeasibleScenarioError as exc:
            raise ConfigError(f"invalid scenario parameters: {exc}") from exc

    rows = []
    sweep_rows = []
    for setting, design in settings:
        scenario = SimScenario(design=design, n_rep=args.n_rep, master_seed=args.seed)
        try:
            report = run_study(scenario, methods, threads=args.threads)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        rows.extend(report.to_rows(setting))
        if sweep is not None:
            sweep_rows.append((setting[sweep], report))
    _write_report_rows(args.out, rows)
    if sweep is not None and sweep_rows:
        stem = args.out[:-4] if args.out.endswith(".csv") else args.out
        _write_sweep_csv(f"{stem}_{sweep}.csv", sweep, sweep_rows, methods)
    return EXIT_OK


def cmd_popmean(args) -> int:
    header, rows = _read_csv(args.input)
    y = _column(header, rows, args.y_col, args.input)
    n = _column(header, rows, args.n_col, args.input)
    try:
        inp = PopMeanInput(y=y, n=n, sigma2=args.sigma2)
    except ValueError as exc:
        raise InputError(f"{args.input}: {exc}") from exc
    results = [
        mu_direct(inp),
        mu_minvar(inp),
        mu_direct_compromise(inp),
        mu_spline_regression(inp),
        mu_cbp(inp),
        mu_plugin_cbp(inp),
    ]
    if args.format == "json":
        payload = [
            {
                "method": r.method,
                "mu_hat": r.mu_hat,
                "alpha": r.alpha,
                "tau": r.tau,
                "flag": r.flag,
            }
            for r in results
        ]
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    else:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "mu_hat", "alpha", "tau", "flag"])
            for r in results:
                writer.writerow(
                    [
                        r.method,
                        _fmt(r.mu_hat),
                        "" if r.alpha is None else _fmt(r.alpha),
                        "" if r.tau is None else _fmt(r.tau),
                        r.flag or "",
                    ]
                )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cbpsae", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit per-area shrinkage estimators to a CSV")
    p_fit.add_argument("--input", required=True)
    p_fit.add_argument("--y-col", required=True)
    group = p_fit.add_mutually_exclusive_group(required=True)
    group.add_argument("--sigma2-col", help="column with known sampling variances")
    group.add_argument("--s-col", help="column with sample SDs (requires --n-col)")
    p_fit.add_argument("--n-col", help="column with sample sizes (with --s-col)")
    p_fit.add_argument("--x-cols", default="", help="comma-separated covariate columns")
    p_fit.add_argument("--id-col", default="", help="optional area-label column")
    p_fit.add_argument("--methods", default=",".join(DEFAULT_FIT_METHODS))
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--format", choices=["csv", "json"], default="csv")
    p_fit.set_defaults(func=cmd_fit)

    p_sim = sub.add_parser("simulate", help="run a benchmark study")
    p_sim.add_argument("--preset", default="")
    p_sim.add_argument("--config", default="", help="scenario JSON file")
    p_sim.add_argument("--n-rep", type=int, default=1000)
    p_sim.add_argument("--seed", type=int, default=20240808)
    p_sim.add_argument("--threads", type=int, default=1)
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_pop = sub.add_parser("popmean", help="population-mean estimates from a CSV")
    p_pop.add_argument("--input", required=True)
    p_pop.add_argument("--y-col", default="y")
    p_pop.add_argument("--n-col", default="n")
    p_pop.add_argument("--sigma2", type=float, required=True)
    p_pop.add_argument("--out", required=True)
    p_pop.add_argument("--format", choices=["csv", "json"], default="csv")
    p_pop.set_defaults(func=cmd_popmean)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "s_col", None) and not getattr(args, "n_col", None):
        print("cbpsae: error: --s-col requires --n-col", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"cbpsae: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, InsufficientDataError) as exc:
        print(f"cbpsae: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (
        SingularDesignError,
        OptimizationError,
        NonFiniteObjectiveError,
        InfeasibleScenarioError,
        np.linalg.LinAlgError,
        FloatingPointError,
    ) as exc:
        print(f"cbpsae: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"cbpsae: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
