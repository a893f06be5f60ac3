"""Command-line entry point: analyze, synth, train, eval, ablate, sweep (plus toy data generation)."""

from __future__ import annotations

import argparse
import csv
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .backbone import BACKBONES, Propagator
from .config import ALIASES, ConfigError, RunConfig, coerce, load_config_file, resolve, write_manifest
from .datasets import generate_population
from .evaluator import evaluate
from .graphs import TEST, TRAIN, load_interactions, load_social, split, write_interactions, write_social
from .homophily import UnreachableTargetError, graph_homophily, synthesize_subgraph
from .optim import load_checkpoint, save_checkpoint
from .trainer import (ABLATIONS, STRATEGIES, STREAM_SPLIT, STREAM_SYNTH, VANILLA, SHARE, TrainConfig,
                      stream, train)

logger = logging.getLogger("sharerec")

DEFAULTS = {
    "threshold": 0.0, "header": False, "split": (0.8, 0.1, 0.1), "out": ".", "bins": 50,
    "targets": (0.05, 0.1, 0.2, 0.4), "users": (590, 600), "seeds": (0,), "methods": (VANILLA, SHARE),
    "parallel_cells": 1, "datasets": (), "zeta_grid": (), "lambda_grid": (),
}

# ---------------------------------------------------------------- parser

def _data_args(p):
    p.add_argument("--interactions", help="user item [rating] lines")
    p.add_argument("--social", help="user user lines")
    p.add_argument("--threshold", help="keep interactions with rating >= threshold")
    p.add_argument("--header", action="store_const", const=True, default=None,
                   help="input files start with a header line")
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed")


def _train_args(p):
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--ablation", help=f"comma list of {', '.join(ABLATIONS)}")
    p.add_argument("--backbone", choices=BACKBONES)
    p.add_argument("--zeta")
    p.add_argument("--lambda", dest="lambda_")
    p.add_argument("--tau")
    p.add_argument("--epochs")
    p.add_argument("--batch")
    p.add_argument("--dim")
    p.add_argument("--layers")
    p.add_argument("--encoder-layers")
    p.add_argument("--lr")
    p.add_argument("--l2")
    p.add_argument("--warmup")
    p.add_argument("--patience")
    p.add_argument("--cl-negatives", choices=("batch", "all"))
    p.add_argument("--candidate-cap")
    p.add_argument("--shared-encoder", dest="separate_encoder", action="store_const", const=False,
                   default=None, help="encode users from the backbone item table")
    p.add_argument("--split", help="train,val,test ratios (default 0.8,0.1,0.1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sharerec", description=__doc__)
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="edge-wise homophily histogram and graph-wise ratio")
    _data_args(p)
    p.add_argument("--bins")

    p = sub.add_parser("generate", help="write a synthetic source population")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--num-users", type=int, default=1000)
    p.add_argument("--num-items", type=int, default=1200)

    p = sub.add_parser("synth", help="homophily-controlled social sub-graphs")
    _data_args(p)
    p.add_argument("--targets", help="comma list of target H_s values")
    p.add_argument("--users", help="lo,hi user count range")
    p.add_argument("--avg-degree")

    for name, text in (("train", "train and evaluate on test"), ("ablate", "five ablations plus the full model"),
                       ("sweep", "grid over datasets, methods, zeta or lambda")):
        p = sub.add_parser(name, help=text)
        _data_args(p)
        _train_args(p)
        if name != "train":
            p.add_argument("--seeds", help="comma list of seeds")
            p.add_argument("--parallel-cells")
        if name == "sweep":
            p.add_argument("--datasets", help="comma list of directories holding interactions.txt/social.txt")
            p.add_argument("--methods", help="comma list: vanilla, share, multi-sgr, no-warmup or an ablation")
            p.add_argument("--zeta-grid")
            p.add_argument("--lambda-grid")

    p = sub.add_parser("eval", help="evaluate a saved checkpoint on test")
    _data_args(p)
    _train_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--rewired", help="weighted social file written by train")
    return ap


def _flag_values(ns) -> dict:
    skip = {"command", "config", "verbose"}
    out = {}
    for key, raw in vars(ns).items():
        if key in skip or raw is None:
            continue
        key = key.rstrip("_")
        key = ALIASES.get(key, key)
        out[key] = coerce(key, raw) if isinstance(raw, str) else raw
    return out


def resolve_args(ns) -> RunConfig:
    file_values = load_config_file(ns.config) if getattr(ns, "config", None) else {}
    return resolve(ns.command, DEFAULTS, file_values, _flag_values(ns))


# ---------------------------------------------------------------- helpers

def _out_dir(run: RunConfig) -> Path:
    out = Path(run.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(run: RunConfig, *keys):
    missing = [k for k in keys if not run.get(k)]
    if missing:
        raise ConfigError(f"missing required option(s): {', '.join('--' + k for k in missing)}")


def _load(inter_path, social_path, threshold=0.0, header=False):
    graph = load_interactions(inter_path, rating_threshold=threshold, header=header)
    social = load_social(social_path, graph, header=header)
    return graph, social


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, float) else x for x in r])


def fit(cfg: TrainConfig, inter_path, social_path, threshold=0.0, header=False, ratios=(0.8, 0.1, 0.1)):
    """Load, split, train and score the best snapshot on test."""
    graph, social = _load(inter_path, social_path, threshold, header)
    graph = split(graph, ratios, rng=stream(cfg.seed, STREAM_SPLIT))
    result = train(cfg, graph, social)
    prop = Propagator(result.best_social, graph.matrix(TRAIN), cfg.layers, cfg.backbone)
    out = prop.forward(result.state.P0, result.state.Q0)
    return graph, social, result, evaluate(out.P, out.Q, graph, TEST, cfg.k)


def method_config(base: TrainConfig, method: str) -> TrainConfig:
    """A named method is a strategy or an ablation of the full model."""
    key = method.replace("-", "_")
    if method in STRATEGIES:
        return replace(base, strategy=method, ablations=())
    if key in ABLATIONS:
        return replace(base, strategy=SHARE, ablations=(key,))
    raise ConfigError(f"unknown method {method!r}")


def run_cell(cell: dict) -> dict:
    """One (dataset, method, setting, seed) training run; module-level so workers can pickle it."""
    cfg = TrainConfig(**cell["train"])
    _, _, result, test = fit(cfg, cell["interactions"], cell["social"], cell["threshold"], cell["header"],
                             cell["split"])
    return {**cell["labels"], "seed": cfg.seed, "best_epoch": result.best_epoch,
            "epochs_run": len(result.history.rows), "recall": test.recall, "precision": test.precision,
            "ndcg": test.ndcg}


def run_cells(cells: list[dict], workers: int) -> list[dict]:
    if workers <= 1 or len(cells) <= 1:
        return [run_cell(c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_cell, cells))


def _summarise(rows: list[dict], group_keys: list[str]) -> list[list]:
    groups: dict[tuple, list[dict]] = {}
    for r in rows:
        groups.setdefault(tuple(r[k] for k in group_keys), []).append(r)
    out = []
    for key, rs in groups.items():
        line = list(key) + [len(rs)]
        for metric in ("recall", "precision", "ndcg"):
            vals = [r[metric] for r in rs]
            line += [statistics.fmean(vals), statistics.pstdev(vals)]
        out.append(line)
    return out


_SUMMARY_TAIL = ["n_seeds", "recall_mean", "recall_std", "precision_mean", "precision_std",
                 "ndcg_mean", "ndcg_std"]


# ---------------------------------------------------------------- commands

def cmd_analyze(run: RunConfig) -> int:
    _require(run, "interactions", "social")
    out = _out_dir(run)
    graph, social = _load(run.get("interactions"), run.get("social"), run.get("threshold"), run.get("header"))
    table = graph_homophily(social, graph, bins=run.get("bins"))
    table.write_histogram(out / "homophily_histogram.csv")
    _write_rows(out / "homophily_edges.csv", ["user_i", "user_j", "h"],
                ([graph.user_ids[i], graph.user_ids[j], float(h)]
                 for i, j, h in zip(table.rows, table.cols, table.ratios)))
    summary = {
        "users": graph.num_users, "items": graph.num_items, "interactions": graph.num_edges,
        "social_edges": social.num_edges, "relations": 2 * social.num_edges,
        "H_s": table.graph_ratio, "h_min": table.h_min, "h_max": table.h_max,
    }
    text = "\n".join(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}" for k, v in summary.items())
    (out / "homophily_report.txt").write_text(text + "\n")
    print(text)
    write_manifest(run, out, [run.get("interactions"), run.get("social")])
    return 0


def cmd_generate(ns) -> int:
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    inter, social = generate_population(num_users=ns.num_users, num_items=ns.num_items, seed=ns.seed)
    write_interactions(inter, out / "interactions.txt")
    write_social(social, out / "social.txt", inter.user_ids)
    print(f"wrote {inter.num_edges} interactions and {social.num_edges} social edges to {out}")
    return 0


def cmd_synth(run: RunConfig) -> int:
    _require(run, "interactions", "social")
    out = _out_dir(run)
    graph, social = _load(run.get("interactions"), run.get("social"), run.get("threshold"), run.get("header"))
    synth_seed = int(stream(run.train.seed, STREAM_SYNTH).integers(2**31 - 1))
    rows, failures = [], 0
    for target in run.get("targets"):
        name = f"hs_{target:g}"
        try:
            S, sub = synthesize_subgraph(graph, target, tuple(run.get("users")), seed=synth_seed,
                                         avg_degree=run.get("avg_degree"), source_social=social)
        except UnreachableTargetError as exc:
            logger.error("target %.4f: %s", target, exc)
            rows.append([target, exc.achieved, "", "", "unreachable", ""])
            failures += 1
            continue
        achieved = graph_homophily(S, sub).graph_ratio
        d = out / name
        d.mkdir(exist_ok=True)
        write_interactions(sub, d / "interactions.txt")
        write_social(S, d / "social.txt", sub.user_ids)
        logger.info("target %.4f achieved %.4f (%d users, %d edges)", target, achieved, sub.num_users,
                    S.num_edges)
        rows.append([target, achieved, sub.num_users, S.num_edges, "ok", name])
    _write_rows(out / "synth_report.csv", ["target", "achieved", "users", "edges", "status", "directory"], rows)
    for r in rows:
        print(f"target={r[0]:g} achieved={r[1]:.4f} status={r[4]}")
    write_manifest(run, out, [run.get("interactions"), run.get("social")], {"synth_seed": synth_seed})
    return 1 if failures else 0


def cmd_train(run: RunConfig) -> int:
    _require(run, "interactions", "social")
    out = _out_dir(run)
    cfg = run.train
    graph, social, result, test = fit(cfg, run.get("interactions"), run.get("social"), run.get("threshold"),
                                      run.get("header"), run.get("split"))
    result.history.write_csv(out / "history.csv")
    result.history.write_rewire_csv(out / "rewire.csv")
    result.history.write_timing_csv(out / "timing.csv")
    save_checkpoint(result.state, out / "checkpoint.bin")
    write_social(result.best_social, out / "rewired_social.txt", graph.user_ids, weighted=True)
    test.write_csv(out / "test_metrics.csv")
    report = [f"best_epoch={result.best_epoch}", f"epochs_run={len(result.history.rows)}",
              f"iterations_per_epoch={result.iterations_per_epoch}",
              f"rewire_events={len(result.history.rewires)}",
              f"social_edges_original={social.num_edges}", f"social_edges_best={result.best_social.num_edges}",
              test.lines()]
    (out / "report.txt").write_text("\n".join(report) + "\n")
    print("\n".join(report))
    write_manifest(run, out, [run.get("interactions"), run.get("social")])
    return 0


def cmd_eval(run: RunConfig) -> int:
    _require(run, "interactions", "social", "checkpoint")
    out = _out_dir(run)
    cfg = run.train
    graph, social = _load(run.get("interactions"), run.get("social"), run.get("threshold"), run.get("header"))
    graph = split(graph, run.get("split"), rng=stream(cfg.seed, STREAM_SPLIT))
    if run.get("rewired"):
        social = load_social(run.get("rewired"), graph, weighted=True)
    state = load_checkpoint(run.get("checkpoint"))
    if state.P0.shape[0] != graph.num_users or state.Q0.shape[0] != graph.num_items:
        raise ConfigError("checkpoint shape does not match the interaction data")
    prop = Propagator(social, graph.matrix(TRAIN), cfg.layers, cfg.backbone)
    emb = prop.forward(state.P0, state.Q0)
    test = evaluate(emb.P, emb.Q, graph, TEST, cfg.k)
    test.write_csv(out / "eval_metrics.csv")
    print(test.lines())
    write_manifest(run, out, [run.get("interactions"), run.get("social"), run.get("checkpoint"),
                              run.get("rewired")])
    return 0


def _cell(run: RunConfig, cfg: TrainConfig, inter, social, labels: dict) -> dict:
    return {"train": cfg.to_dict(), "interactions": inter, "social": social, "labels": labels,
            "threshold": run.get("threshold"), "header": run.get("header"), "split": tuple(run.get("split"))}


ABLATION_VARIANTS = ("share",) + ABLATIONS


def cmd_ablate(run: RunConfig) -> int:
    _require(run, "interactions", "social")
    out = _out_dir(run)
    base = replace(run.train, ablations=(), strategy=SHARE)
    cells = [_cell(run, replace(method_config(base, v), seed=s), run.get("interactions"), run.get("social"),
                   {"variant": v})
             for v in ABLATION_VARIANTS for s in run.get("seeds")]
    rows = run_cells(cells, run.get("parallel_cells"))
    cols = ["variant", "seed", "best_epoch", "epochs_run", "recall", "precision", "ndcg"]
    _write_rows(out / "ablation_runs.csv", cols, ([r[c] for c in cols] for r in rows))
    summary = _summarise(rows, ["variant"])
    _write_rows(out / "ablation.csv", ["variant"] + _SUMMARY_TAIL, summary)
    for line in summary:
        print(f"{line[0]:>10} ndcg@10={line[-2]:.4f}±{line[-1]:.4f}")
    write_manifest(run, out, [run.get("interactions"), run.get("social")])
    return 0


def cmd_sweep(run: RunConfig) -> int:
    out = _out_dir(run)
    datasets = run.get("datasets")
    if datasets:
        sources = [(Path(d).name, str(Path(d) / "interactions.txt"), str(Path(d) / "social.txt"))
                   for d in datasets]
    else:
        _require(run, "interactions", "social")
        sources = [(Path(run.get("interactions")).parent.name or "data", run.get("interactions"),
                    run.get("social"))]
    zetas = run.get("zeta_grid") or (run.train.zeta,)
    lams = run.get("lambda_grid") or (run.train.lam,)
    cells = []
    for name, inter, social in sources:
        for method in run.get("methods"):
            for z in zetas:
                for lam in lams:
                    for s in run.get("seeds"):
                        cfg = replace(method_config(run.train, method), zeta=z, lam=lam, seed=s)
                        cells.append(_cell(run, cfg, inter, social,
                                           {"dataset": name, "method": method, "zeta": z, "lam": lam}))
    rows = run_cells(cells, run.get("parallel_cells"))
    cols = ["dataset", "method", "zeta", "lam", "seed", "best_epoch", "epochs_run", "recall", "precision",
            "ndcg"]
    _write_rows(out / "sweep.csv", cols, ([r[c] for c in cols] for r in rows))
    keys = ["dataset", "method", "zeta", "lam"]
    _write_rows(out / "sweep_summary.csv", keys + _SUMMARY_TAIL, _summarise(rows, keys))
    print(f"{len(rows)} runs written to {out / 'sweep.csv'}")
    inputs = [p for _, i, s in sources for p in (i, s)]
    write_manifest(run, out, inputs)
    return 0


COMMANDS = {"analyze": cmd_analyze, "synth": cmd_synth, "train": cmd_train, "eval": cmd_eval,
            "ablate": cmd_ablate, "sweep": cmd_sweep}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(ns.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if ns.command == "generate":
            return cmd_generate(ns)
        run = resolve_args(ns)
        return COMMANDS[ns.command](run)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"sharerec {ns.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
