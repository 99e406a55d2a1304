"""Command-line entry point.

Dispatches the experiment harnesses, writes ``<command>.csv`` plus a
``<command>.meta.json`` sidecar holding the fully resolved configuration
(re-running with ``--config <command>.meta.json`` reproduces the CSV
byte for byte), and renders a PNG figure next to the CSV unless
``--no-plot`` is given.

Configuration precedence: command-line flags override values from the
``--config`` file (flat ``key = value`` lines, or a previously written
``.meta.json``), which override built-in defaults.

Exit codes: 0 success, 2 invalid configuration, 3 numeric/solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments, plotting
from .experiments import (DEFAULT_DECADES, DEFAULT_N_GRID, DEFAULT_RHO_LIST,
                          MonteCarloConfig, PointPrior, ProductBetaPrior,
                          UniformPrior, write_csv, write_meta)
from .gauss import DomainError, NumericError, check_spd
from .mechanisms import MultiGoodEnv, single_bundle_revenue
from .onedim import GaussianTypeDist, OneDimEnv, optimal_simple_mechanism
from .signals import Box, LogisticPurchase
from .single_good import gaussian_family, laplace_family

COMMANDS = ("figure1", "rates", "margins", "mle-price", "tails",
            "onedim-demo", "single-bundle")

# option name -> default (as canonical string; None = no default, required)
OPTION_SPECS = {
    "figure1": {
        "rho": ",".join(f"{r:g}" for r in DEFAULT_RHO_LIST),
        "n": ",".join(str(n) for n in DEFAULT_N_GRID),
        "order": "61",
    },
    "rates": {
        "theta-star": "0.3,0.3",
        "rho": "0",
        "n": ",".join(str(n) for n in DEFAULT_DECADES),
    },
    "margins": {
        "theta-star": "0.3",
        "sigma": "1",
        "n": ",".join(str(n) for n in DEFAULT_DECADES),
        "deltas": "0.5,0.9,0.99,1",
    },
    "mle-price": {
        "beta": "2",
        "ref-prices": "0.5,0.5",
        "prior": "point",
        "theta": "0.5,0.5",
        "box-lower": "0.05,0.05",
        "box-upper": "0.95,0.95",
        "n": "100,400,1600",
        "reps": "10000",
        "seed": None,
    },
    "tails": {
        "family": "laplace",
        "theta-star": "1",
        "n": ",".join(str(10 ** k) for k in range(2, 13)),
    },
    "onedim-demo": {
        "alpha0": "0,0.55,0.55,1.1",
        "beta": "0,1,1,2",
        "tau-mean": "0",
        "tau-sd": "0.5",
    },
    "single-bundle": {
        "theta-star": "0.3,0.3",
        "rho": "0",
        "n": ",".join(str(n) for n in DEFAULT_N_GRID),
        "cost": "",
    },
}


def _parse_floats(s):
    try:
        return tuple(float(tok) for tok in s.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise DomainError(f"cannot parse number list: {s!r}") from exc


def _parse_ints(s):
    try:
        return tuple(int(tok) for tok in s.split(",") if tok.strip() != "")
    except ValueError as exc:
        raise DomainError(f"cannot parse integer list: {s!r}") from exc


def _parse_float(s):
    try:
        return float(s)
    except ValueError as exc:
        raise DomainError(f"cannot parse number: {s!r}") from exc


def _parse_int(s):
    try:
        return int(s)
    except ValueError as exc:
        raise DomainError(f"cannot parse integer: {s!r}") from exc


def _parse_cost(s):
    """Cost table 'g1,g2:price;...' with good indices; empty string = no cost."""
    if not s.strip():
        return None
    table = {}
    for part in s.split(";"):
        if not part.strip():
            continue
        try:
            goods, price = part.split(":")
            bundle = frozenset(int(g) for g in goods.split(","))
            table[bundle] = float(price)
        except ValueError as exc:
            raise DomainError(f"cannot parse cost table entry: {part!r}") from exc
    return table


def load_config_file(path) -> dict:
    """Flat key=value file, or a .meta.json written by a previous run."""
    p = Path(path)
    if not p.is_file():
        raise DomainError(f"config file not found: {path}")
    if p.suffix == ".json":
        meta = json.loads(p.read_text())
        cfg = meta.get("config")
        if not isinstance(cfg, dict):
            raise DomainError(f"no 'config' object in {path}")
        return {str(k): str(v) for k, v in cfg.items()}
    cfg = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{lineno}: expected key = value")
        key, _, value = line.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


def resolve_options(command: str, flag_values: dict, config: dict) -> dict:
    spec = OPTION_SPECS[command]
    unknown = set(config) - set(spec)
    if unknown:
        raise DomainError(f"unknown config keys for {command}: {sorted(unknown)}")
    resolved = {}
    for name, default in spec.items():
        value = flag_values.get(name)
        if value is None:
            value = config.get(name, default)
        if value is None:
            raise DomainError(f"missing required field: {name}")
        resolved[name] = str(value)
    return resolved


# ---------------------------------------------------------------------------
# command implementations: each returns (rows, columns, extra_meta, renderer)


def _cmd_figure1(opts, out_dir):
    rho_list = _parse_floats(opts["rho"])
    n_grid = _parse_ints(opts["n"])
    order = _parse_int(opts["order"])
    curves, rows = experiments.figure1_curves(rho_list, n_grid, order=order)
    outputs = []
    for rho in rho_list:
        sub = [r for r in rows if r["rho"] == rho]
        path = out_dir / f"figure1_rho{rho:g}.csv"
        write_csv(path, experiments.FIGURE1_COLUMNS, sub)
        outputs.append(path.name)
    extra = {"quadrature_order": order, "per_rho_files": outputs,
             "flagged_rows": [dict(rho=r["rho"], n=r["n"], flags=r["flags"])
                              for r in rows if r["flags"]],
             "second_best_note": ("the r_sb_upper column is the segment-relaxation "
                                  "upper bound, not the exact second best")}
    return rows, experiments.FIGURE1_COLUMNS, extra, (
        lambda path: plotting.render_figure1(rows, rho_list, path))


def _cmd_rates(opts, out_dir):
    theta = _parse_floats(opts["theta-star"])
    rho = _parse_float(opts["rho"])
    j = np.full((len(theta), len(theta)), rho)
    np.fill_diagonal(j, 1.0)
    check_spd(j, "rates: correlation matrix")
    rows, trend = experiments.rate_scan(theta, j, _parse_ints(opts["n"]))
    return rows, experiments.RATES_COLUMNS, {"trend": trend}, (
        lambda path: plotting.render_rates(rows, path))


def _cmd_margins(opts, out_dir):
    rows, columns = experiments.margin_scan(
        _parse_float(opts["theta-star"]), _parse_float(opts["sigma"]),
        _parse_ints(opts["n"]), _parse_floats(opts["deltas"]))
    return rows, columns, {}, (
        lambda path: plotting.render_margins(rows, columns, path))


def _cmd_mle_price(opts, out_dir):
    box = Box(lower=np.asarray(_parse_floats(opts["box-lower"])),
              upper=np.asarray(_parse_floats(opts["box-upper"])))
    prior_kind = opts["prior"]
    if prior_kind == "point":
        prior = PointPrior(np.asarray(_parse_floats(opts["theta"])))
    elif prior_kind == "uniform":
        prior = UniformPrior(box)
    elif prior_kind == "beta":
        prior = ProductBetaPrior(box)
    else:
        raise DomainError(f"unknown prior kind: {prior_kind!r}")
    model = LogisticPurchase(beta=_parse_float(opts["beta"]),
                             ref_prices=np.asarray(_parse_floats(opts["ref-prices"])))
    config = MonteCarloConfig(model=model, prior=prior,
                              n_list=_parse_ints(opts["n"]),
                              replications=_parse_int(opts["reps"]),
                              seed=_parse_int(opts["seed"]),
                              box=box.inflate(0.2))
    rows = experiments.mle_pricing_experiment(config)
    return rows, experiments.MLE_PRICING_COLUMNS, {"seed": config.seed}, (
        lambda path: plotting.render_mle_price(rows, path))


def _cmd_tails(opts, out_dir):
    kind = opts["family"]
    if kind == "laplace":
        family = laplace_family()
    elif kind == "gaussian":
        family = gaussian_family()
    else:
        raise DomainError(f"unknown tail family: {kind!r}")
    rows, trend = experiments.tail_rate_scan(
        family, _parse_float(opts["theta-star"]), _parse_ints(opts["n"]))
    return rows, experiments.TAILS_COLUMNS, {"trend": trend}, (
        lambda path: plotting.render_tails(rows, path))


def _cmd_onedim_demo(opts, out_dir):
    env = OneDimEnv(alpha0=np.asarray(_parse_floats(opts["alpha0"])),
                    beta=np.asarray(_parse_floats(opts["beta"])),
                    type_dist=GaussianTypeDist(mean=_parse_float(opts["tau-mean"]),
                                               sd=_parse_float(opts["tau-sd"])),
                    null_index=0)
    mech, value = optimal_simple_mechanism(env)
    lo, hi = env.type_dist.support()
    taus = np.linspace(lo, hi, 201)
    rows = [{"tau": float(t),
             "indirect_utility": float(mech.indirect_utility.value_at(float(t)))}
            for t in taus]
    menu_desc = [{"allocation": (a if isinstance(a, int) else "base_lottery"),
                  "price": p} for a, p in mech.menu]
    extra = {"designer_value": value, "menu": menu_desc,
             "converged": mech.converged}
    return rows, ("tau", "indirect_utility"), extra, (
        lambda path: plotting.render_onedim_demo(rows, path))


SINGLE_BUNDLE_COLUMNS = ("n", "bundle", "price", "profit", "first_best")


def _cmd_single_bundle(opts, out_dir):
    theta = np.asarray(_parse_floats(opts["theta-star"]))
    rho = _parse_float(opts["rho"])
    j = np.full((len(theta), len(theta)), rho)
    np.fill_diagonal(j, 1.0)
    check_spd(j, "single-bundle: correlation matrix")
    cost = _parse_cost(opts["cost"])
    rows = []
    for n in _parse_ints(opts["n"]):
        env = MultiGoodEnv(theta_star=theta, inv_fisher=j, n=n, cost=cost)
        bundle, price, br = single_bundle_revenue(env)
        rows.append({"n": n, "bundle": "+".join(str(g) for g in sorted(bundle)),
                     "price": price, "profit": br.revenue,
                     "first_best": br.first_best})
    return rows, SINGLE_BUNDLE_COLUMNS, {}, (
        lambda path: plotting.render_single_bundle(rows, path))


COMMAND_FNS = {
    "figure1": _cmd_figure1,
    "rates": _cmd_rates,
    "margins": _cmd_margins,
    "mle-price": _cmd_mle_price,
    "tails": _cmd_tails,
    "onedim-demo": _cmd_onedim_demo,
    "single-bundle": _cmd_single_bundle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screenlab",
        description="Posted-price and bundling revenue experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        p = sub.add_parser(command)
        p.add_argument("--config", default=None,
                       help="key=value file or a previous .meta.json")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--no-plot", action="store_true",
                       help="skip PNG rendering")
        for name in OPTION_SPECS[command]:
            p.add_argument(f"--{name}", default=None, dest=name)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    command = args.command
    try:
        config = load_config_file(args.config) if args.config else {}
        flag_values = {name: getattr(args, name) for name in OPTION_SPECS[command]}
        opts = resolve_options(command, flag_values, config)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        rows, columns, extra, renderer = COMMAND_FNS[command](opts, out_dir)
        stem = command
        csv_path = out_dir / f"{stem}.csv"
        write_csv(csv_path, columns, rows)
        outputs = [csv_path.name] + list(extra.pop("per_rho_files", []))
        if not args.no_plot:
            png_path = out_dir / f"{stem}.png"
            renderer(png_path)
            outputs.append(png_path.name)
        meta = {"command": command, "config": opts, "outputs": outputs,
                "columns": list(columns), "package_version": _version()}
        meta.update(extra)
        write_meta(out_dir / f"{stem}.meta.json", meta)
        return 0
    except DomainError as err:
        print(f"screenlab {command}: invalid configuration: {err}", file=sys.stderr)
        return 2
    except NumericError as err:
        print(f"screenlab {command}: numeric failure: {err}", file=sys.stderr)
        return 3


def _version() -> str:
    from . import __version__
    return __version__


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
