"""Command-line driver: gen, packets, phase-scan, select, eval.

Every subcommand is a pure function of its input files, flags, and seed;
reruns produce byte-identical output files.  Errors are printed to stderr
naming the offending flag, file, or row, and the exit code is nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional, Sequence

import numpy as np

from . import data as datamod
from .errors import InvalidArgumentError, RddppError
from .evaluate import TrainConfig, evaluate_model, predict_proba, train_logreg
from .ratedist import FeatureMatrix, RateConfig
from .selection import (
    CandidatePool,
    QualityMode,
    SchedulerConfig,
    Strategy,
    UncertaintyMode,
    run_selection,
)

_STRATEGY_CHOICES = [s.value for s in Strategy]
_LABELED = {
    Strategy.RD_DPP_BIMODAL,
    Strategy.RD_DPP_DIVERSITY_ONLY,
    Strategy.MARGINAL_RATE_GAIN,
    Strategy.ENTROPY,
    Strategy.MIN_MARGIN,
}
_HOOKED = {
    Strategy.RD_DPP_BIMODAL,
    Strategy.RD_DPP_DIVERSITY_ONLY,
    Strategy.ENTROPY,
    Strategy.MIN_MARGIN,
}


def _write_json(doc: dict, path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(doc, handle, indent=2, sort_keys=True)
        handle.write("\n")


def cmd_gen(args) -> int:
    spec = datamod.SyntheticSpec(
        distribution=args.dist,
        n=args.n,
        d=args.d,
        seed=args.seed,
        a=args.a,
        b=args.b,
        trials=args.trials,
        p=args.p,
        lam=args.lam,
        sigma=args.sigma,
    )
    Z = datamod.generate_synthetic(spec)
    datamod.save_features(Z, args.out)
    print(f"wrote {Z.n} samples x {Z.d} features to {args.out} (seed {args.seed})")
    return 0


def cmd_packets(args) -> int:
    Z = datamod.load_features(args.features, args.labels)
    assignment = datamod.kmeans_cluster(
        Z, args.n_clusters, seed=args.seed, max_iter=args.max_iter
    )
    packets = datamod.build_packets(Z, assignment, args.per_packet, seed=args.seed)
    if not packets:
        raise InvalidArgumentError(
            "--per-packet: no cluster had enough members; no packets built"
        )
    datamod.save_packets(packets, Z.d, Z.n_classes, args.per_packet, args.out)
    print(f"wrote {len(packets)} packets of {args.per_packet} samples to {args.out}")
    return 0


def cmd_phase_scan(args) -> int:
    Z = datamod.load_features(args.features)
    result = datamod.phase_scan(
        Z,
        RateConfig(eps2=args.eps2),
        shuffles=args.shuffles,
        seed=args.seed,
        include_exact_rate=not args.no_exact_rate,
    )
    fmt = datamod._format_float
    with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("k,greedy_upper_bound,greedy_exact_rate,random_mean,random_std\n")
        for i, k in enumerate(result.ks):
            rate = fmt(result.greedy_rate[i]) if result.greedy_rate.size else "nan"
            handle.write(
                f"{k},{fmt(result.greedy_upper[i])},{rate},"
                f"{fmt(result.random_mean[i])},{fmt(result.random_std[i])}\n"
            )
        handle.write(f"# alpha,{result.alpha}\n")
    print(f"wrote phase curve ({Z.n} prefixes) to {args.out}; alpha = {result.alpha}")
    return 0


def _make_logreg_hook(parent: FeatureMatrix, pool: CandidatePool, train_cfg: TrainConfig):
    c_T = parent.n_classes

    def hook(selected_ids: Sequence[int], remaining_ids: Sequence[int]) -> np.ndarray:
        sample_ids = pool.member_samples(selected_ids)
        if sample_ids:
            sub = parent.take(sample_ids)
            if sub.labels is not None and np.unique(sub.labels).size >= 2:
                model = train_logreg(sub, train_cfg)
                return predict_proba(model, parent)
        # Nothing trainable yet: maximally uncertain everywhere.
        return np.full((parent.n, c_T), 1.0 / c_T)

    return hook


def cmd_select(args) -> int:
    strategy = Strategy(args.strategy)
    if strategy in _LABELED and args.labels is None:
        raise InvalidArgumentError(
            f"--labels is required for strategy {strategy.value!r}"
        )
    parent = datamod.load_features(args.features, args.labels)
    if args.packets is not None:
        packets, d, c_T, _ = datamod.load_packets(args.packets)
        if d != parent.d:
            raise InvalidArgumentError(
                f"--packets: packet dimension {d} != feature dimension {parent.d}"
            )
        pool = CandidatePool.from_packets(packets, c_T)
    else:
        pool = CandidatePool(parent)

    cfg = SchedulerConfig(
        budget=args.budget,
        k=args.k,
        phi0=args.phi0,
        eps2=args.eps2,
        quality_mode=QualityMode(args.quality_mode),
        uncertainty_mode=UncertaintyMode(args.uncertainty_mode),
        strategy=strategy,
        bootstrap_cap=args.bootstrap_cap,
    )

    init: List[int] = []
    if args.init_count > 0:
        if args.init_count > pool.m:
            raise InvalidArgumentError(
                f"--init-count {args.init_count} exceeds pool size {pool.m}"
            )
        init_rng = np.random.default_rng([args.seed, 1])
        init = sorted(
            int(i) for i in init_rng.choice(pool.m, size=args.init_count, replace=False)
        )

    hook = None
    if strategy in _HOOKED and parent.labels is not None:
        train_cfg = TrainConfig(
            step=args.step, l2=args.l2, max_iter=args.max_iter, seed=args.seed
        )
        hook = _make_logreg_hook(parent, pool, train_cfg)

    report = run_selection(pool, init, cfg, model_hook=hook, seed=args.seed)
    _write_json(report.to_dict(), args.out)
    print(
        f"selected {len(report.selected)} of {pool.m} candidates "
        f"({strategy.value}); report written to {args.out}"
    )
    return 0


def cmd_eval(args) -> int:
    train = datamod.load_features(args.train_features, args.train_labels)
    test = datamod.load_features(args.test_features, args.test_labels)
    runs = []
    values = {"accuracy": [], "macro_f1": [], "auroc_macro_ovr": []}
    for report_path in args.report:
        with open(report_path, "r", encoding="utf-8") as handle:
            doc = json.load(handle)
        ids = doc.get("selected_samples") or doc.get("selected")
        if not ids:
            raise InvalidArgumentError(f"--report {report_path}: no selected indices")
        bad = [i for i in ids if i < 0 or i >= train.n]
        if bad:
            raise InvalidArgumentError(
                f"--report {report_path}: selection index {bad[0]} outside "
                f"[0, {train.n})"
            )
        subset = train.take(ids)
        for rep in range(args.replicates):
            cfg = TrainConfig(
                step=args.step,
                l2=args.l2,
                max_iter=args.max_iter,
                init_scale=args.init_scale,
                seed=args.seed + rep,
            )
            model = train_logreg(subset, cfg)
            metrics = evaluate_model(model, test)
            runs.append(
                {
                    "report": report_path,
                    "replicate": rep,
                    **metrics.to_dict(),
                }
            )
            values["accuracy"].append(metrics.accuracy)
            values["macro_f1"].append(metrics.macro_f1)
            values["auroc_macro_ovr"].append(metrics.auroc_macro_ovr)
    doc = {
        "schema_version": 1,
        "replicates": args.replicates,
        "n_runs": len(runs),
        "metrics": {
            name: {"mean": float(np.mean(vals)), "std": float(np.std(vals))}
            for name, vals in values.items()
        },
        "runs": runs,
    }
    _write_json(doc, args.out)
    acc = doc["metrics"]["accuracy"]
    print(
        f"evaluated {len(runs)} run(s): accuracy {acc['mean']:.4f} "
        f"+/- {acc['std']:.4f}; report written to {args.out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rddpp",
        description="Rate-distortion diversity selection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic feature CSV")
    p.add_argument("--dist", required=True, choices=list(datamod.DISTRIBUTIONS))
    p.add_argument("--n", type=int, required=True, help="number of samples (rows)")
    p.add_argument("--d", type=int, required=True, help="feature dimension (columns)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--a", type=float, default=1.0, help="beta shape a")
    p.add_argument("--b", type=float, default=5.0, help="beta shape b")
    p.add_argument("--trials", type=int, default=10, help="binomial trial count")
    p.add_argument("--p", type=float, default=0.5, help="binomial success probability")
    p.add_argument("--lam", type=float, default=1.0, help="exponential/poisson rate")
    p.add_argument("--sigma", type=float, default=1.0, help="rayleigh scale")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("packets", help="cluster samples and build packets")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--n-clusters", type=int, required=True)
    p.add_argument("--per-packet", type=int, required=True)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_packets)

    p = sub.add_parser("phase-scan", help="greedy vs random diversity curves")
    p.add_argument("--features", required=True)
    p.add_argument("--eps2", type=float, default=0.5)
    p.add_argument("--shuffles", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-exact-rate", action="store_true",
                   help="skip the exact-rate column (faster on large inputs)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_phase_scan)

    p = sub.add_parser("select", help="run a selection strategy")
    p.add_argument("--features", required=True)
    p.add_argument("--labels")
    p.add_argument("--packets", help="select packets from this file instead of samples")
    p.add_argument("--strategy", required=True, choices=_STRATEGY_CHOICES)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--phi0", type=float, default=2.0)
    p.add_argument("--eps2", type=float, default=0.5)
    p.add_argument("--quality-mode", default=QualityMode.SEMANTIC_DIVERSITY.value,
                   choices=[q.value for q in QualityMode])
    p.add_argument("--uncertainty-mode", default=UncertaintyMode.ENTROPY.value,
                   choices=[u.value for u in UncertaintyMode])
    p.add_argument("--init-count", type=int, default=0,
                   help="size of the random initial selection")
    p.add_argument("--bootstrap-cap", type=int, default=None,
                   help="subsample the selected set to this many columns for scoring")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=0.1, help="model-hook training step")
    p.add_argument("--l2", type=float, default=1e-4, help="model-hook L2 strength")
    p.add_argument("--max-iter", type=int, default=2000, help="model-hook iteration cap")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="train on a selection, evaluate on a test split")
    p.add_argument("--train-features", required=True)
    p.add_argument("--train-labels", required=True)
    p.add_argument("--test-features", required=True)
    p.add_argument("--test-labels", required=True)
    p.add_argument("--report", required=True, nargs="+",
                   help="selection report file(s)")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--init-scale", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RddppError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
