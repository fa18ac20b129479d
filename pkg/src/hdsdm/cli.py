"""Command-line entry point.

Subcommands: fit, predict, metrics, partition, sensitivity, prior-check.
All outputs are delimited text files with headers plus a JSON run manifest;
failures exit nonzero with a one-line machine-readable error record on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
import scipy
from scipy.stats import kstest

from . import __version__
from .config import RunConfig, build_model, build_settings, ingest
from .gmrf import CoefficientBlock
from .mcmc import FitResult, PosteriorSample, fit, metrics, predict
from .model import assemble
from .partition import phi, sensitivity_sweep
from .priors import marginal_cdfs
from .tree import HDParams

FLOAT_FMT = "%.17g"


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(
                [FLOAT_FMT % v if isinstance(v, float) else v for v in row]
            )


def _write_manifest(outdir: Path, cfg: RunConfig, args, extra=None) -> None:
    manifest = {
        "command": args.command,
        "config": str(Path(args.config).resolve()),
        "seed": args.seed,
        "settings": dict(cfg.mcmc),
        "versions": {
            "hdsdm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    if args.seed is not None:
        manifest["settings"]["seed"] = args.seed
    if extra:
        manifest.update(extra)
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _save_fit(outdir: Path, result: FitResult) -> None:
    names = result.hyper_names
    n_chains, n_keep, _ = result.hyper_draws.shape
    rows = []
    for c in range(n_chains):
        for i in range(n_keep):
            rows.append([c, i] + [float(v) for v in result.hyper_draws[c, i]])
    _write_csv(outdir / "samples.csv", ["chain", "draw"] + names, rows)

    leaves = list(result.assembled.leaf_ids)
    coef_header = ["sample"]
    for leaf in leaves:
        k = result.assembled.effects[leaf].n_coef
        coef_header += [f"{leaf}[{i}]" for i in range(k)]
    coef_rows = []
    for s_idx, sample in enumerate(result.samples):
        row = [s_idx]
        for leaf in leaves:
            row.extend(float(v) for v in sample.coefficients[leaf].values)
        coef_rows.append(row)
    _write_csv(outdir / "coefficients.csv", coef_header, coef_rows)

    _write_csv(
        outdir / "rhat.csv",
        ["param", "split_rhat"],
        [[k, float(v)] for k, v in result.rhat.items()],
    )
    _write_csv(
        outdir / "acceptance.csv",
        ["kernel", "rate"],
        [[k, float(v)] for k, v in result.acceptance.items()],
    )
    if result.assembled.tree is not None:
        (outdir / "tree.json").write_text(
            json.dumps(result.assembled.tree.to_dict(), indent=2)
        )


def _load_samples(outdir: Path, assembled) -> list[PosteriorSample]:
    """Rebuild posterior samples from the files written by `fit`."""
    with open(outdir / "samples.csv", newline="") as fh:
        hyper = list(csv.DictReader(fh))
    with open(outdir / "coefficients.csv", newline="") as fh:
        coef = list(csv.DictReader(fh))
    if len(hyper) != len(coef):
        raise ValueError("samples.csv and coefficients.csv row counts differ")
    leaves = list(assembled.leaf_ids)
    sizes = {l: assembled.effects[l].n_coef for l in leaves}
    samples = []
    for hrow, crow in zip(hyper, coef):
        coeffs = {
            l: CoefficientBlock(
                np.array([float(crow[f"{l}[{i}]"]) for i in range(sizes[l])]), l
            )
            for l in leaves
        }
        mu = float(hrow.get("mu", 0.0))
        samples.append(
            PosteriorSample(
                hd=HDParams(total=float(hrow.get("V", 0.0))),
                coefficients=coeffs,
                mu=mu,
                eta=np.zeros(0),
            )
        )
    return samples


def _cmd_fit(cfg: RunConfig, args, outdir: Path, base_dir: Path) -> None:
    data = ingest(cfg.data["path"], cfg, base_dir)
    model = build_model(cfg, base_dir)
    settings = build_settings(cfg, args.seed)
    result = fit(model, data, settings)
    _save_fit(outdir, result)
    _write_manifest(outdir, cfg, args, {"n_train": data.n_train, "n_total": data.n})
    worst = max(
        (v for v in result.rhat.values() if np.isfinite(v)), default=float("nan")
    )
    print(
        f"fit: {result.n_samples} samples from {settings.chains} chains; "
        f"max split-Rhat {worst:.3f}; outputs in {outdir}"
    )


def _cmd_predict(cfg: RunConfig, args, outdir: Path, base_dir: Path) -> None:
    data = ingest(cfg.data["path"], cfg, base_dir)
    model = build_model(cfg, base_dir)
    assembled = assemble(model, data)
    samples = _load_samples(outdir, assembled)
    test_mask = ~data.train_mask
    if not test_mask.any():
        raise ValueError("no test rows under the configured split")
    p_hat = predict(samples, data, assembled=assembled, mask=test_mask)
    rows = [
        [int(i), int(yv), float(p)]
        for i, yv, p in zip(np.flatnonzero(test_mask), data.y[test_mask], p_hat)
    ]
    _write_csv(outdir / "predictions.csv", ["row", "y", "p_hat"], rows)
    _write_manifest(outdir, cfg, args, {"n_test": int(test_mask.sum())})
    print(f"predict: wrote {len(rows)} test predictions to {outdir / 'predictions.csv'}")


def _cmd_metrics(cfg: RunConfig, args, outdir: Path, base_dir: Path) -> None:
    with open(outdir / "predictions.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    y = np.array([int(r["y"]) for r in rows])
    p = np.array([float(r["p_hat"]) for r in rows])
    out = metrics(p, y)
    _write_csv(
        outdir / "metrics.csv",
        list(out.keys()),
        [[float(v) for v in out.values()]],
    )
    print("metrics: " + ", ".join(f"{k}={v:.4f}" for k, v in out.items()))


def _cmd_partition(cfg: RunConfig, args, outdir: Path, base_dir: Path) -> None:
    model = build_model(cfg, base_dir)
    assembled = assemble(model, None)
    samples = _load_samples(outdir, assembled)
    res = phi(samples, assembled)
    _write_csv(
        outdir / "phi_mean.csv",
        ["group", "phi_mean", "s2_mean"],
        [[g, m, s] for g, m, s in res.summary_rows()],
    )
    _write_csv(
        outdir / "phi_samples.csv",
        ["sample"] + res.group_names,
        [[i] + [float(v) for v in row] for i, row in enumerate(res.phi)],
    )
    skipped = f" ({res.n_skipped} zero-variance samples skipped)" if res.n_skipped else ""
    print(
        "partition: "
        + ", ".join(f"{g}={m:.3f}" for g, m, _ in res.summary_rows())
        + skipped
    )


def _cmd_sensitivity(cfg: RunConfig, args, outdir: Path, base_dir: Path) -> None:
    data = ingest(cfg.data["path"], cfg, base_dir)
    model = build_model(cfg, base_dir)
    settings = build_settings(cfg, args.seed)
    entries = sensitivity_sweep(model, data, args.q, settings, split_name=args.split)
    for entry in entries:
        tag = ("%g" % entry.q).replace(".", "p")
        _write_csv(
            outdir / f"phi_mean_q{tag}.csv",
            ["group", "phi_mean", "s2_mean"],
            [[g, m, s] for g, m, s in entry.partition.summary_rows()],
        )
        trend_rows = []
        for group, (grid, curve) in entry.trends.items():
            trend_rows += [[group, float(x), float(t)] for x, t in zip(grid, curve)]
        _write_csv(outdir / f"trends_q{tag}.csv", ["group", "x", "trend"], trend_rows)
    _write_manifest(outdir, cfg, args, {"q_values": list(args.q)})
    print(f"sensitivity: wrote {len(entries)} sweeps (q={args.q}) to {outdir}")


def _cmd_prior_check(cfg: RunConfig, args, outdir: Path, base_dir: Path) -> None:
    model = build_model(cfg, base_dir)
    settings = build_settings(cfg, args.seed)
    result = fit(model, None, settings, likelihood_weight=0.0)
    assembled = result.assembled
    cdfs = marginal_cdfs(assembled.tree, assembled.model.priors)

    col_of = {}
    names = result.hyper_names
    if "V" in cdfs and "V" in names:
        col_of["V"] = names.index("V")
    for s in assembled.tree.splits:
        if s.is_binary:
            key = f"{s.name}:{s.child_names[s.omega_index]}"
            col = f"omega_{s.name}"
            if key in cdfs and col in names:
                col_of[key] = names.index(col)
        else:
            for child in s.child_names:
                key = f"{s.name}:{child}"
                col = f"omega_{s.name}_{child}"
                if key in cdfs and col in names:
                    col_of[key] = names.index(col)

    rows = []
    for key, col in col_of.items():
        draws = result.hyper_draws[:, :, col].ravel()
        res = kstest(draws, cdfs[key])
        rows.append(
            [key, draws.size, float(res.statistic), float(res.pvalue),
             float(np.median(draws))]
        )
        print(
            f"prior-check: {key}: median={np.median(draws):.4f} "
            f"KS={res.statistic:.4f} p={res.pvalue:.4f}"
        )
    _write_csv(
        outdir / "prior_check.csv",
        ["param", "n", "ks_stat", "pvalue", "sample_median"],
        rows,
    )
    _write_manifest(outdir, cfg, args, {"prior_only": True})


_COMMANDS = {
    "fit": _cmd_fit,
    "predict": _cmd_predict,
    "metrics": _cmd_metrics,
    "partition": _cmd_partition,
    "sensitivity": _cmd_sensitivity,
    "prior-check": _cmd_prior_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdsdm",
        description="Variance-decomposition priors for Bernoulli species distribution models",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override mcmc.seed")
        p.add_argument("--out", default=None, help="override the config output directory")
        if name == "sensitivity":
            p.add_argument(
                "--q",
                type=float,
                nargs="+",
                default=[1.0, 0.5, 1.0 / 6.0],
                help="Dirichlet concentrations to sweep",
            )
            p.add_argument(
                "--split",
                default="covariates",
                help="tree split whose prior is swept",
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config)
        base_dir = Path(args.config).resolve().parent
        outdir = Path(args.out) if args.out else base_dir / cfg.output
        outdir.mkdir(parents=True, exist_ok=True)
        _COMMANDS[args.command](cfg, args, outdir, base_dir)
    except Exception as err:  # noqa: BLE001 - single CLI failure boundary
        record = {"error": type(err).__name__, "message": str(err)}
        print(json.dumps(record), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
