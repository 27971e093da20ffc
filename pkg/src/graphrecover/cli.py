"""Command-line entry point.

Exit codes: 0 success, 1 runtime or numeric failure, 2 usage error.
Every JSON report carries ``schema_version``; the ``created_utc`` field is
the only part that changes between identical runs.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .attack import AttackConfig, run_attack, run_attack_ablation_no_gml
from .baselines import direct_recovery, knn_graph
from .defense import tradeoff_sweep
from .degree import SamplerConfig, estimate_average_degree
from .embeddings import load_embeddings, row_normalize, save_embeddings
from .errors import GraphRecoverError, UsageError
from .evaluation import evaluate
from .experiments import (METHODS, SbmSpec, embed, estimate_k_from_generator, run_seed,
                          summarize)
from .graph import Graph, load_edge_list, save_edge_list

SCHEMA_VERSION = 1


# -- helpers -----------------------------------------------------------------


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _report(command: str, params: dict, result) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "command": command,
        "params": _jsonable(params),
        "result": _jsonable(result),
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _emit(report: dict, out_dir: str | None, stem: str):
    """Write ``<out_dir>/<stem>.json``, or print to stdout without an output directory."""
    text = dumps(report)
    if out_dir is None:
        sys.stdout.write(text)
        return None
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, stem + ".json")
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _existing(path: str) -> str:
    if path != "-" and not os.path.exists(path):
        raise UsageError(f"input file not found: {path}")
    return path


def _parent_dir(path: str) -> str:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _read_graph(path: str):
    _existing(path)
    if path == "-":
        return load_edge_list(sys.stdin)
    return load_edge_list(path)


def _parse_b_values(text: str) -> list:
    """``start:stop:step`` (inclusive stop) or a comma list."""
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(count)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"bad noise grid {text!r}; use start:stop:step or a comma list") from None


def _parse_weights(text: str) -> tuple:
    try:
        w = tuple(float(t) for t in text.split(","))
    except ValueError:
        w = ()
    if len(w) != 3:
        raise UsageError(f"--loss-weights needs three comma-separated numbers, got {text!r}")
    return w


def _add_attack_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("attack")
    g.add_argument("--tau", type=float, default=None, help="sampling temperature (default: from data)")
    g.add_argument("--alpha", type=float, default=0.3)
    g.add_argument("--beta", type=float, default=0.1)
    g.add_argument("--eta", type=float, default=0.5)
    g.add_argument("--heads", type=int, default=16)
    g.add_argument("--iters", type=int, default=400)
    g.add_argument("--metric-steps", type=int, default=5)
    g.add_argument("--metric-lr", type=float, default=0.01)
    g.add_argument("--neg-ratio", type=float, default=5.0)
    g.add_argument("--lr", type=float, default=0.01)
    g.add_argument("--gae-steps", type=int, default=5)
    g.add_argument("--loss-weights", default="1,1,1")
    g.add_argument("--consistency-weight", type=float, default=1.0)
    g.add_argument("--rec-mode", choices=("frobenius", "bce"), default="frobenius")
    g.add_argument("--latent-dim", type=int, default=None)
    g.add_argument("--decoder", choices=("selfrep", "inner"), default="selfrep")
    g.add_argument("--score-cut", choices=("otsu", "none"), default="otsu",
                   help="drop weak self-representation scores before scaling")
    g.add_argument("--anchor", choices=("running", "seed"), default="running")
    g.add_argument("--early-stop", action="store_true")


def _attack_config(args, k: int) -> AttackConfig:
    return AttackConfig(
        k=k, tau=args.tau, alpha=args.alpha, beta=args.beta, eta=args.eta, heads=args.heads,
        iters=args.iters, metric_steps=args.metric_steps, metric_lr=args.metric_lr,
        neg_ratio=args.neg_ratio, lr=args.lr, gae_steps=args.gae_steps,
        loss_weights=_parse_weights(args.loss_weights),
        consistency_weight=args.consistency_weight, rec_mode=args.rec_mode,
        latent_dim=args.latent_dim, decoder=args.decoder, score_cut=args.score_cut,
        anchor=args.anchor,
        early_stop=args.early_stop, seed=args.seed)


# -- commands ----------------------------------------------------------------


def cmd_estimate_degree(args):
    refs = [_read_graph(p) for p in args.refs]
    cfg = SamplerConfig(args.fraction, args.reps, args.gamma, args.frontier_width, args.seed)
    est = estimate_average_degree(refs, cfg)
    params = {"refs": args.refs, "fraction": args.fraction, "reps": args.reps,
              "gamma": args.gamma, "frontier_width": args.frontier_width, "seed": args.seed}
    _emit(_report("estimate-degree", params, est.to_dict()), args.out, f"estimate-degree.{args.seed}")


def cmd_gen_embeddings(args):
    g = _read_graph(args.graph)
    h = embed(g, args.method, args.dim, args.seed)
    if args.normalize:
        h = row_normalize(h)
    save_embeddings(h, _parent_dir(args.output), args.format)
    params = {"graph": args.graph, "method": args.method, "dim": args.dim, "seed": args.seed,
              "normalize": args.normalize, "output": args.output}
    result = {"n": h.n, "d": h.d, "normalized": h.normalized}
    _emit(_report("gen-embeddings", params, result), args.out, f"gen-embeddings.{args.seed}")


def cmd_recover(args):
    h = load_embeddings(_existing(args.embeddings))
    cfg = _attack_config(args, args.k)
    truth = _read_graph(args.truth) if args.truth else None
    runner = run_attack_ablation_no_gml if args.ablation else run_attack
    g, trace = runner(h, cfg, truth=truth)
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    edges_path = os.path.join(out_dir, f"recovered.{args.seed}.edges")
    save_edge_list(g, edges_path)
    result = {"edges": g.num_edges, "edge_list": os.path.basename(edges_path),
              "trace": trace.to_dict()}
    if truth is not None:
        result["evaluation"] = evaluate(truth, g).to_dict()
    params = {"embeddings": args.embeddings, "ablation": args.ablation, **cfg.to_dict()}
    _emit(_report("recover", params, result), out_dir, f"recover.{args.seed}")


def cmd_baseline(args):
    h = load_embeddings(_existing(args.embeddings))
    g = direct_recovery(h, args.k) if args.method == "direct" else knn_graph(h, args.k)
    if args.output in (None, "-"):
        save_edge_list(g, sys.stdout)
    else:
        save_edge_list(g, _parent_dir(args.output))
    if args.out:
        params = {"embeddings": args.embeddings, "method": args.method, "k": args.k}
        _emit(_report("baseline", params, {"edges": g.num_edges}), args.out,
              f"baseline-{args.method}")


def cmd_evaluate(args):
    if args.truth == "-" and args.recovered == "-":
        raise UsageError("only one of --truth and --recovered may read stdin")
    truth = _read_graph(args.truth)
    rec = _read_graph(args.recovered)
    if rec.n < truth.n:
        # an edge list without a header only spans 0..max id; pad with isolated nodes
        rec = Graph.from_edges(truth.n, rec.edges())
    rep = evaluate(truth, rec)
    params = {"truth": args.truth, "recovered": args.recovered}
    _emit(_report("evaluate", params, rep.to_dict()), args.out, "evaluate")


def cmd_defense_sweep(args):
    h = load_embeddings(_existing(args.embeddings))
    truth = _read_graph(args.truth)
    b_values = _parse_b_values(args.b)
    cfg = _attack_config(args, args.k)
    rows = tradeoff_sweep(h, truth, b_values, cfg, noise_seed=args.seed)
    params = {"embeddings": args.embeddings, "truth": args.truth, "b": b_values, **cfg.to_dict()}
    result = [r.to_dict() for r in rows]
    if args.format == "csv":
        lines = ["b,utility,precision,recall,f1"]
        lines += [f"{r.b!r},{r.utility!r},{r.precision!r},{r.recall!r},{r.f1!r}" for r in rows]
        text = "\n".join(lines) + "\n"
        if args.out:
            os.makedirs(args.out, exist_ok=True)
            with open(os.path.join(args.out, f"defense-sweep.{args.seed}.csv"), "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return
    _emit(_report("defense-sweep", params, result), args.out, f"defense-sweep.{args.seed}")


def cmd_end_to_end(args):
    if (args.graph is None) == (args.sbm is None):
        raise UsageError("give exactly one of --graph and --sbm")
    methods = tuple(args.methods.split(","))
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {','.join(METHODS)}")
    fixed = _read_graph(args.graph) if args.graph else None
    spec = None
    if args.sbm:
        try:
            sizes = tuple(int(t) for t in args.sbm.split(","))
        except ValueError:
            raise UsageError(f"--sbm needs comma-separated block sizes, got {args.sbm!r}") from None
        spec = SbmSpec(sizes, args.p_in, args.p_out)
    refs = [_read_graph(p) for p in args.refs] if args.refs else None
    base_cfg = _attack_config(args, 1)
    out_dir = args.out or "."
    per_seed, failures = [], []
    for i in range(args.repeats):
        seed = args.seed + i
        try:
            g = fixed if fixed is not None else spec.sample(seed)
            if args.k is not None:
                k, k_info = args.k, {"source": "flag"}
            else:
                if refs:
                    est = estimate_average_degree(refs, SamplerConfig(repetitions=args.reps, seed=seed))
                elif spec is not None:
                    est = estimate_k_from_generator(spec, seed,
                                                    sampler=SamplerConfig(repetitions=args.reps, seed=seed))
                else:
                    raise UsageError("with --graph, give --k or --refs")
                k, k_info = est.k_int, {"source": "estimated", **est.to_dict()}
            rep = run_seed(g, seed, k, args.embedding, args.dim, args.noise_b, methods,
                           replace(base_cfg, k=k))
            rep["k_estimate"] = k_info
            per_seed.append(rep)
            _emit(_report("end-to-end", {"seed": seed}, rep), out_dir, f"end-to-end.{seed}")
        except UsageError:
            raise
        except GraphRecoverError as exc:
            failures.append({"seed": seed, "error": f"{type(exc).__name__}: {exc}"})
    summary = {}
    for m in methods:
        summary[m] = {}
        for metric in ("precision", "recall", "f1", "jdd_jaccard", "frobenius_error",
                       "triangle_error", "clustering_error"):
            summary[m][metric] = summarize([r["methods"][m][metric] for r in per_seed])
    summary["utility"] = summarize([r["utility"] for r in per_seed])
    params = {"graph": args.graph, "sbm": args.sbm, "p_in": args.p_in, "p_out": args.p_out,
              "embedding": args.embedding, "dim": args.dim, "noise_b": args.noise_b,
              "repeats": args.repeats, "seed": args.seed, "k": args.k, "methods": list(methods),
              "attack": {k: v for k, v in base_cfg.to_dict().items() if k not in ("k", "seed")}}
    result = {"seeds": [r["seed"] for r in per_seed], "failures": failures, "summary": summary}
    _emit(_report("end-to-end-summary", params, result), out_dir, f"summary.{args.seed}")
    if not per_seed:
        raise GraphRecoverError("every seed failed")


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphrecover",
                                     description="Recover a graph from its node embeddings.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate-degree", help="estimate average degree from reference graphs")
    p.add_argument("--refs", nargs="+", required=True)
    p.add_argument("--fraction", type=float, default=0.3)
    p.add_argument("--reps", type=int, default=300)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--frontier-width", type=int, default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None, help="report directory (default: stdout)")
    p.set_defaults(func=cmd_estimate_degree)

    p = sub.add_parser("gen-embeddings", help="embed a graph with a fixture generator")
    p.add_argument("--graph", required=True)
    p.add_argument("--method", choices=("spectral", "rwpmi"), default="spectral")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--format", choices=("binary", "text"), default=None)
    p.add_argument("--output", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen_embeddings)

    p = sub.add_parser("recover", help="run the recovery attack")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--truth", default=None, help="ground truth for per-iteration metrics")
    p.add_argument("--ablation", action="store_true", help="skip metric learning, one pass")
    p.add_argument("--out", default=None, help="output directory (default: .)")
    _add_attack_flags(p)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("baseline", help="direct or kNN recovery")
    p.add_argument("--method", choices=("direct", "knn"), required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--output", default=None, help="edge list path (default: stdout)")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("evaluate", help="compare a recovered graph with the truth")
    p.add_argument("--truth", required=True)
    p.add_argument("--recovered", required=True, help="edge list, '-' for stdin")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("defense-sweep", help="Laplace noise versus utility and attack F1")
    p.add_argument("--embeddings", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--b", default="0:1:0.1")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", default=None)
    _add_attack_flags(p)
    p.set_defaults(func=cmd_defense_sweep)

    p = sub.add_parser("end-to-end", help="embed, recover, evaluate over several seeds")
    p.add_argument("--graph", default=None)
    p.add_argument("--sbm", default=None, help="block sizes, e.g. 150,150")
    p.add_argument("--p-in", type=float, default=0.08)
    p.add_argument("--p-out", type=float, default=0.005)
    p.add_argument("--embedding", choices=("spectral", "rwpmi"), default="spectral")
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--k", type=int, default=None, help="default: estimate from references")
    p.add_argument("--refs", nargs="+", default=None)
    p.add_argument("--reps", type=int, default=100, help="sampling repetitions for k")
    p.add_argument("--noise-b", type=float, default=0.0)
    p.add_argument("--methods", default=",".join(METHODS))
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", default=None, help="output directory (default: .)")
    _add_attack_flags(p)
    p.set_defaults(func=cmd_end_to_end)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"graphrecover: error: {exc}", file=sys.stderr)
        return 2
    except (GraphRecoverError, ArithmeticError, OSError) as exc:
        print(f"graphrecover: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
