"""Command-line interface: ``lcbayes <command> [--config F] [--seed S] [--jobs J] [--out DIR]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.

Seeds: with master seed ``s`` and sample size ``n``, the data come from
``SeedSequence(s, spawn_key=(n, r, 0))``, chains from ``(n, r, 1)`` and
prior draws from ``(n, 0, 2)``; ``r`` is the replication index (0 for
single fits).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np
import pydantic

from .approx import approximate_density
from .config import ExperimentConfig, load_config
from .core import DataError, NumericError, ValidationError, mixture_to_plf, normalize
from .data_gen import sample_truth
from .io import write_csv, write_json
from .mle import logconcave_mle
from .mcmc import run_chain
from .priors import EmpiricalSupport, FixedSupport, HierarchicalSupport, draw_prior
from .summaries import (
    band_from_chain,
    coverage_experiment,
    mode_marginal,
    rate_diagnostic,
    replication_seeds,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

PRIOR_STREAM = 2


def _load_data(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.data_path is None:
        data_seed, _ = replication_seeds(cfg.seed, cfg.n, 0)
        return sample_truth(cfg.truth, np.random.default_rng(data_seed), cfg.n)
    path = Path(cfg.data_path)
    if not path.exists():
        raise DataError(f"data file {path} not found")
    values = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        cell = line.split(",")[0].strip()
        if not cell:
            continue
        try:
            values.append(float(cell))
        except ValueError:
            if values or lineno > 1:
                raise DataError(f"{path}:{lineno}: not a number: {cell!r}") from None
    if not values:
        raise DataError(f"{path} holds no observations")
    return np.sort(np.asarray(values))


def _fixed_support(n: int) -> FixedSupport:
    half = 2.3 * math.log(n)
    return FixedSupport(a=-half, b=half)


def _with_mode(cfg: ExperimentConfig, mode: str | None, n: int) -> ExperimentConfig:
    if mode is None:
        return cfg
    current = cfg.prior.support
    if mode == "fixed":
        support = current if isinstance(current, FixedSupport) else _fixed_support(n)
    elif mode == "hierarchical":
        support = current if isinstance(current, HierarchicalSupport) else HierarchicalSupport()
    else:
        support = EmpiricalSupport()
    return cfg.model_copy(update={"prior": cfg.prior.model_copy(update={"support": support})})


def cmd_sample_prior(cfg: ExperimentConfig, args) -> None:
    """Prior draws on a grid over each draw's support (long format)."""
    out = Path(cfg.outputs)
    settings = cfg.sample_prior
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(cfg.n, 0, PRIOR_STREAM)))
    support = None
    if isinstance(cfg.prior.support, EmpiricalSupport):
        data = _load_data(cfg)
        support = (float(data[0]), float(data[-1]))
    rows, params = [], []
    for k in range(settings.draws):
        m = draw_prior(cfg.prior, rng, cfg.n, support=support)
        dens = normalize(mixture_to_plf(m))
        grid = np.linspace(*m.support, settings.grid_size)
        rows.extend((k + 1, float(x), float(f)) for x, f in zip(grid, dens.pdf(grid)))
        params.append({
            "draw": k + 1,
            "support": list(m.support),
            "knots": m.knots,
            "weights": m.weights,
            "gamma1": m.gamma1,
            "gamma2": m.gamma2,
        })
    write_csv(out / "prior_draws.csv", ["draw", "x", "density"], rows)
    write_json(out / "prior_draws.json", {"seed": cfg.seed, "draws": params})


def cmd_fit(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.outputs)
    data = _load_data(cfg)
    cfg = _with_mode(cfg, args.mode, data.size)
    _, chain_seed = replication_seeds(cfg.seed, data.size, 0)
    chain = run_chain(cfg, data, chain_seed)
    chain.save(out / "fit")
    band = band_from_chain(chain)
    header = ["x", "mean", "lower", "upper"]
    rows = list(band.rows())
    if cfg.data_path is None:
        header.append("truth")
        rows = [(*r, float(f)) for r, f in zip(rows, cfg.truth.pdf(band.grid))]
    write_csv(out / "fit_band.csv", header, rows)
    modes = mode_marginal(chain)
    write_csv(
        out / "fit_modes.csv",
        ["left", "right", "count"],
        zip(modes.breaks[:-1].tolist(), modes.breaks[1:].tolist(), modes.counts.tolist()),
    )


def cmd_table1(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.outputs)
    settings = cfg.table1
    table = None
    for n in settings.n_values:
        row = coverage_experiment(
            cfg.truth, settings.points, n, settings.replications, cfg, cfg.seed,
            level=settings.level, jobs=args.jobs,
        )
        table = row if table is None else table.stack(row)
    write_csv(out / "table1.csv", table.header(), table.rows())
    write_json(out / "table1_meta.json", {
        "seed": cfg.seed,
        "level": table.level,
        "points": table.points,
        "n_values": table.n_values,
        "replications": table.replications,
        "hits": table.hits,
    })


def cmd_mle(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.outputs)
    res = logconcave_mle(_load_data(cfg))
    write_json(out / "mle.json", {
        "breakpoints": res.plf.breakpoints,
        "values": res.plf.values,
        "converged": res.converged,
        "iterations": res.iterations,
        "gradient_norm": res.gradient_norm,
        "objective_trace": res.objective_trace,
    })
    grid = np.linspace(*res.support, cfg.sampler.grid_size)
    write_csv(out / "mle_density.csv", ["x", "density"], zip(grid.tolist(), np.atleast_1d(res.pdf(grid)).tolist()))


def cmd_rate(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.outputs)
    res = rate_diagnostic(cfg.truth, cfg.rate.n_values, cfg, cfg.seed, cfg.rate.replications, jobs=args.jobs)
    rows = [
        (int(n), r, float(res.distances[i, r]))
        for i, n in enumerate(res.n_values)
        for r in range(res.distances.shape[1])
    ]
    write_csv(out / "rate.csv", ["n", "replicate", "hellinger"], rows)
    write_csv(out / "rate_slope.csv", ["slope", "stderr", "intercept", "degenerate"],
              [(res.slope, res.stderr, res.intercept, int(res.degenerate))])


def cmd_approx(cfg: ExperimentConfig, args) -> None:
    out = Path(cfg.outputs)
    report = approximate_density(cfg.truth, interval=cfg.approx.interval, n=cfg.approx.n)
    write_json(out / "approx.json", report.to_dict())


COMMANDS = {
    "sample-prior": cmd_sample_prior,
    "fit": cmd_fit,
    "table1": cmd_table1,
    "mle": cmd_mle,
    "rate": cmd_rate,
    "approx": cmd_approx,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcbayes", description="Bayesian log-concave density estimation")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=(fn.__doc__ or name).splitlines()[0])
        p.add_argument("--config", type=Path, help="JSON experiment config (defaults when omitted)")
        p.add_argument("--seed", type=int, help="master seed, overrides the config")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for replications")
        p.add_argument("--out", type=Path, help="output directory, overrides the config")
        if name == "fit":
            p.add_argument("--mode", choices=["fixed", "empirical", "hierarchical"],
                           help="support mode, overrides the config")
    return parser


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    update = {}
    if args.seed is not None:
        update["seed"] = args.seed
    if args.out is not None:
        update["outputs"] = str(args.out)
    # revalidate so overrides obey the same bounds as config values
    return ExperimentConfig.model_validate({**cfg.model_dump(), **update}) if update else cfg


def _describe(err: pydantic.ValidationError) -> str:
    lines = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"  field {loc}: {e['msg']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("config error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _config(args)
    except json.JSONDecodeError as err:
        print(f"config error: {args.config}: line {err.lineno} column {err.colno}: {err.msg}", file=sys.stderr)
        return EXIT_CONFIG
    except pydantic.ValidationError as err:
        print(f"config error: {args.config}\n{_describe(err)}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](cfg, args)
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except ValidationError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
