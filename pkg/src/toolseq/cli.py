"""Command-line entry point.

Subcommands: generate, build-graph, communities, train, evaluate,
recommend. Every run is deterministic given its flags and seeds, every
report embeds the resolved configuration, and every output file is
re-loaded through its own parser before the command reports success.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from typing import Callable

import numpy as np

from . import community as communities_mod
from . import stage2, synthetic
from .embeddings import (
    DEFAULT_DIMENSION,
    EmbeddingStore,
    build_store,
    load_embeddings,
)
from .errors import InvalidArgument, ToolseqError
from .graph import build_graph, deserialize_graph, serialize_graph
from .metrics import METRIC_NAMES, bootstrap_compare
from .pipeline import STAGE2_METHODS, EvalArm, evaluate_dataset, parse_k_mode
from .stage1 import RetrievalConfig, gs_hybrid_retrieve
from .trajectory import TrajectoryDataset, parse_trajectories, serialize_trajectories


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError("value must be >= 1")
    return value


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_validated(path: str, text: str, reload: Callable[[str], object]) -> None:
    # Success is only reported after the artifact parses back in.
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    with open(path, "r", encoding="utf-8") as fh:
        reload(fh.read())


def _read_file(path: str) -> str:
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# Shared flag groups


def _add_retrieval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha-s1", type=float, default=0.5,
                   help="stage-1 weight on local transition evidence")
    p.add_argument("--gamma", type=float, default=0.1,
                   help="stage-1 weight on the positional prior bonus")
    p.add_argument("--pool-multiplier", type=_positive_int, default=3)
    p.add_argument("--max-bridges", type=int, default=2)
    p.add_argument("--bridge-path-limit", type=_positive_int, default=3)


def _retrieval_config(args) -> RetrievalConfig:
    return RetrievalConfig(
        pool_multiplier=args.pool_multiplier,
        alpha=args.alpha_s1,
        gamma=args.gamma,
        max_bridges=args.max_bridges,
        bridge_path_limit=args.bridge_path_limit,
    )


def _retrieval_echo(args) -> dict:
    return {
        "alpha_s1": args.alpha_s1,
        "gamma": args.gamma,
        "pool_multiplier": args.pool_multiplier,
        "max_bridges": args.max_bridges,
        "bridge_path_limit": args.bridge_path_limit,
    }


def _add_store_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--descriptions",
                       help="JSON file of tool descriptions; built-in encoder")
    group.add_argument("--embeddings",
                       help="JSONL file of precomputed tool vectors")
    p.add_argument("--query-embeddings",
                   help="JSONL of precomputed query vectors keyed by query text "
                        "(required with --embeddings when queries are involved)")
    p.add_argument("--dimension", type=_positive_int, default=DEFAULT_DIMENSION,
                   help="built-in encoder dimension")


def _load_store(args) -> EmbeddingStore:
    if args.descriptions:
        raw = json.loads(_read_file(args.descriptions))
        if not isinstance(raw, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in raw.items()
        ):
            raise InvalidArgument(
                f"{args.descriptions} must be a JSON object of id -> text"
            )
        return build_store(raw, dimension=args.dimension)
    return load_embeddings(_read_file(args.embeddings))


def _query_vec_fn(args, store: EmbeddingStore) -> Callable[[str], np.ndarray]:
    if args.query_embeddings:
        qstore = load_embeddings(_read_file(args.query_embeddings))
        return qstore.vector
    return store.encode_query


def _store_echo(args) -> dict:
    return {
        "descriptions": args.descriptions,
        "embeddings": args.embeddings,
        "query_embeddings": args.query_embeddings,
        "dimension": args.dimension,
    }


# ---------------------------------------------------------------------------
# Subcommands


def _cmd_generate(args) -> int:
    if args.preset == "basic":
        spec = synthetic.basic_spec(
            domain_count=args.domain_count,
            tools_per_domain=args.tools_per_domain,
            trajectories_per_chain=args.trajectories_per_chain,
            query_template_noise=args.query_template_noise,
            seed=args.seed,
            test_queries_per_chain=args.test_queries_per_chain,
        )
    else:
        spec = synthetic.signal_gap_spec(
            domain_count=args.domain_count,
            trajectories_per_chain=args.trajectories_per_chain,
            query_template_noise=args.query_template_noise,
            skip_noise=args.skip_noise,
            test_queries_per_chain=args.test_queries_per_chain,
            seed=args.seed,
        )
    train_ds, test_ds, labels, descriptions = synthetic.generate(spec)

    def jsonl(ds: TrajectoryDataset) -> str:
        buf = io.StringIO()
        serialize_trajectories(ds, buf)
        return buf.getvalue()

    out = args.out_dir.rstrip("/")
    _write_validated(f"{out}/train.jsonl", jsonl(train_ds), parse_trajectories)
    _write_validated(f"{out}/test.jsonl", jsonl(test_ds), parse_trajectories)
    _write_validated(f"{out}/labels.json", _dump_json(labels), json.loads)
    _write_validated(
        f"{out}/descriptions.json", _dump_json(descriptions), json.loads
    )
    report = {
        "config": {
            "command": "generate",
            "preset": args.preset,
            "out_dir": args.out_dir,
            "domain_count": spec.domain_count,
            "tools_per_domain": spec.tools_per_domain,
            "dependency_chains": [
                [list(chain) for chain in domain] for domain in spec.dependency_chains
            ],
            "query_template_noise": spec.query_template_noise,
            "trajectories_per_chain": spec.trajectories_per_chain,
            "test_queries_per_chain": spec.test_queries_per_chain,
            "invert_descriptions": spec.invert_descriptions,
            "skip_noise": spec.skip_noise,
            "seed": spec.seed,
        },
        "train_size": len(train_ds),
        "test_size": len(test_ds),
        "vocabulary_size": len(labels),
    }
    _write_validated(f"{out}/report.json", _dump_json(report), json.loads)
    print(f"wrote {len(train_ds)} train / {len(test_ds)} test trajectories to {out}")
    return 0


def _cmd_build_graph(args) -> int:
    ds = parse_trajectories(_read_file(args.trajectories))
    g = build_graph(ds)
    buf = io.StringIO()
    serialize_graph(g, buf)
    _write_validated(args.out, buf.getvalue(), deserialize_graph)
    report = {
        "config": {
            "command": "build-graph",
            "trajectories": args.trajectories,
            "out": args.out,
        },
        "nodes": g.node_count,
        "edges": g.edge_count,
        "skipped_records": ds.skipped,
    }
    sys.stdout.write(_dump_json(report))
    return 0


def _cmd_communities(args) -> int:
    g = deserialize_graph(_read_file(args.graph))
    labels = json.loads(_read_file(args.labels))
    if not isinstance(labels, dict):
        raise InvalidArgument(f"{args.labels} must be a JSON object of id -> label")
    ug = communities_mod.undirected_projection(g)
    part = communities_mod.louvain(ug, seed=args.seed, resolution=args.resolution)
    mean_purity, per_community = communities_mod.purity(part, labels)
    report = {
        "config": {
            "command": "communities",
            "graph": args.graph,
            "labels": args.labels,
            "out": args.out,
            "seed": args.seed,
            "resolution": args.resolution,
        },
        "assignment": dict(sorted(part.assignment.items())),
        "community_count": part.community_count,
        "modularity": communities_mod.modularity(
            ug, part, resolution=args.resolution
        ),
        "purity": mean_purity,
        "purity_per_community": per_community,
        "nmi": communities_mod.nmi(part, labels),
    }
    if args.descriptions or args.embeddings:
        store = _load_store(args)
        comp = communities_mod.complementarity(g, store)
        report["complementarity"] = {
            "spearman_rho": comp.rho,
            "p_value": comp.p_value,
            "pair_count": comp.pair_count,
        }
        report["config"].update(_store_echo(args))
    _write_validated(args.out, _dump_json(report), json.loads)
    print(
        f"{part.community_count} communities, "
        f"purity {mean_purity:.3f}, modularity {report['modularity']:.3f}"
    )
    return 0


def _train_config(args) -> stage2.TrainingConfig:
    return stage2.TrainingConfig(
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_epochs=args.epochs,
        patience=args.patience,
        validation_fraction=args.validation_fraction,
        seed=args.seed,
    )


def _cmd_train(args) -> int:
    ds = parse_trajectories(_read_file(args.trajectories))
    g = deserialize_graph(_read_file(args.graph))
    store = _load_store(args)
    cfg = _train_config(args)
    model = stage2.train(ds, g, store, cfg, _query_vec_fn(args, store))
    buf = io.StringIO()
    stage2.serialize_model(model, buf)
    _write_validated(args.out, buf.getvalue(), stage2.deserialize_model)
    report = {
        "config": {
            "command": "train",
            "trajectories": args.trajectories,
            "graph": args.graph,
            "out": args.out,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "epochs": cfg.max_epochs,
            "patience": cfg.patience,
            "validation_fraction": cfg.validation_fraction,
            "seed": cfg.seed,
            **_store_echo(args),
        },
        "trajectories_used": len(ds),
    }
    sys.stdout.write(_dump_json(report))
    return 0


def _instance_payload(res) -> dict:
    return {
        "index": res.index,
        "gold": res.gold,
        "k_eval": res.k_eval,
        "candidates": list(res.candidates.tools),
        "predicted": list(res.ranked.tools),
        "metrics": res.score.as_dict(),
    }


def _cmd_evaluate(args) -> int:
    parse_k_mode(args.k_mode)
    ds = parse_trajectories(_read_file(args.test))
    g = deserialize_graph(_read_file(args.graph))
    store = _load_store(args)
    qfn = _query_vec_fn(args, store)
    retrieval = _retrieval_config(args)
    model = None
    if args.model:
        model = stage2.deserialize_model(_read_file(args.model))
    arm = EvalArm(
        method=args.stage2,
        alpha_hr=args.alpha_hr,
        ablate=tuple(args.ablate),
    )
    run = evaluate_dataset(
        ds, g, store, arm,
        model=model, k_mode=args.k_mode, retrieval=retrieval, query_vec_fn=qfn,
    )
    agg = run.report()
    report = {
        "config": {
            "command": "evaluate",
            "test": args.test,
            "graph": args.graph,
            "model": args.model,
            "out": args.out,
            "stage2": args.stage2,
            "alpha_hr": args.alpha_hr,
            "ablate": sorted(args.ablate),
            "k_mode": args.k_mode,
            "seed": args.seed,
            "bootstrap_against": args.bootstrap_against,
            "bootstrap_metric": args.bootstrap_metric,
            "bootstrap_iterations": args.bootstrap_iterations,
            **_retrieval_echo(args),
            **_store_echo(args),
        },
        "count": agg.count,
        "means": agg.means,
        "buckets": agg.buckets,
        "instances": [_instance_payload(r) for r in run.instances],
    }
    if args.bootstrap_against:
        base_arm = EvalArm(method=args.bootstrap_against, alpha_hr=args.alpha_hr)
        base = evaluate_dataset(
            ds, g, store, base_arm,
            model=model, k_mode=args.k_mode, retrieval=retrieval, query_vec_fn=qfn,
        )
        boot = bootstrap_compare(
            run.scores,
            base.scores,
            args.bootstrap_metric,
            iterations=args.bootstrap_iterations,
            seed=args.seed,
            exhaustive=len(ds) <= 7,
        )
        report["bootstrap"] = {
            "baseline": args.bootstrap_against,
            "metric": args.bootstrap_metric,
            "baseline_mean": base.report().means[args.bootstrap_metric],
            "observed_diff": boot.observed_diff,
            "p_value": boot.p_value,
            "ci_low": boot.ci_low,
            "ci_high": boot.ci_high,
            "iterations": boot.iterations,
        }
    _write_validated(args.out, _dump_json(report), json.loads)
    tau = agg.means["kendall_tau"]
    f1 = agg.means["set_f1"]
    print(f"{agg.count} instances: mean tau {tau:.3f}, mean set-F1 {f1:.3f}")
    return 0


def _cmd_recommend(args) -> int:
    g = deserialize_graph(_read_file(args.graph))
    store = _load_store(args)
    qv = store.encode_query(args.query)
    retrieval = _retrieval_config(args)
    cand = gs_hybrid_retrieve(g, store, qv, args.k, retrieval)
    arm = EvalArm(method=args.stage2, alpha_hr=args.alpha_hr)
    model = None
    if args.stage2 == "lr":
        if not args.model:
            raise InvalidArgument("--model is required with --stage2 lr")
        model = stage2.deserialize_model(_read_file(args.model))
    if arm.method == "sem-sort":
        ranked = stage2.rerank_sem_sort(cand)
    elif arm.method == "hybrid":
        ranked = stage2.rerank_hybrid(cand, g, arm.alpha_hr)
    elif arm.method == "opt-perm":
        ranked = stage2.rerank_opt_perm(cand, g)
    else:
        ranked = stage2.rerank_lr(model, cand, g, store, qv)
    config = {
        "command": "recommend",
        "graph": args.graph,
        "model": args.model,
        "stage2": args.stage2,
        "alpha_hr": args.alpha_hr,
        "k": args.k,
        **_retrieval_echo(args),
        **_store_echo(args),
    }
    sys.stderr.write(_dump_json({"config": config}))
    for t in ranked.tools:
        print(t)
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolseq",
        description="Mine tool-transition graphs and recommend ordered tool "
                    "sequences for agent queries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic workflow corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--preset", choices=("basic", "signal-gap"), default="basic")
    p.add_argument("--domain-count", type=_positive_int, default=None)
    p.add_argument("--tools-per-domain", type=_positive_int, default=4)
    p.add_argument("--trajectories-per-chain", type=_positive_int, default=None)
    p.add_argument("--query-template-noise", type=float, default=None)
    p.add_argument("--test-queries-per-chain", type=int, default=None)
    p.add_argument("--skip-noise", type=float, default=0.3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_generate)

    p = sub.add_parser("build-graph", help="mine the transition graph")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_build_graph)

    p = sub.add_parser("communities", help="cluster the graph and score purity")
    p.add_argument("--graph", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--resolution", type=float, default=1.0)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--descriptions")
    group.add_argument("--embeddings")
    p.add_argument("--query-embeddings", help=argparse.SUPPRESS)
    p.add_argument("--dimension", type=_positive_int, default=DEFAULT_DIMENSION)
    p.set_defaults(fn=_cmd_communities)

    p = sub.add_parser("train", help="fit the pairwise reranker")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True)
    _add_store_flags(p)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=_positive_int, default=2048)
    p.add_argument("--epochs", type=_positive_int, default=30)
    p.add_argument("--patience", type=_positive_int, default=5)
    p.add_argument("--validation-fraction", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("evaluate", help="score a stage-2 arm on a test set")
    p.add_argument("--test", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--model")
    p.add_argument("--out", required=True)
    _add_store_flags(p)
    p.add_argument("--stage2", choices=STAGE2_METHODS, default="lr")
    p.add_argument("--alpha-hr", type=float, default=stage2.DEFAULT_ALPHA_HR)
    p.add_argument("--ablate", action="append", default=[],
                   choices=("graph", "position", "semantic"))
    p.add_argument("--k-mode", default="oracle",
                   help="'oracle' (max(gold length, 3)) or 'fixed:<n>'")
    p.add_argument("--bootstrap-against", choices=STAGE2_METHODS)
    p.add_argument("--bootstrap-metric", choices=METRIC_NAMES,
                   default="kendall_tau")
    p.add_argument("--bootstrap-iterations", type=_positive_int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    _add_retrieval_flags(p)
    p.set_defaults(fn=_cmd_evaluate)

    p = sub.add_parser("recommend", help="ordered tool list for one query")
    p.add_argument("--query", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--model")
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--stage2", choices=STAGE2_METHODS, default="lr")
    p.add_argument("--alpha-hr", type=float, default=stage2.DEFAULT_ALPHA_HR)
    _add_store_flags(p)
    _add_retrieval_flags(p)
    p.set_defaults(fn=_cmd_recommend)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "generate":
        # Presets want different defaults for shared knobs.
        signal = args.preset == "signal-gap"
        if args.domain_count is None:
            args.domain_count = 6 if signal else 2
        if args.trajectories_per_chain is None:
            args.trajectories_per_chain = 60 if signal else 50
        if args.query_template_noise is None:
            args.query_template_noise = 0.1 if signal else 0.0
        if args.test_queries_per_chain is None:
            args.test_queries_per_chain = 12 if signal else 2
    try:
        return args.fn(args)
    except ToolseqError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
