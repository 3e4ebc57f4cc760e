"""Command line entry point.

    pagerank-mixing [--config FILE] [--seed U64] [--out DIR] [--threads K] COMMAND

Commands: generate, profile, scenario, widespread, singularity, martingale,
tree.  Each writes CSV files plus ``manifest.json`` into ``--out``.
``--seed`` overrides the seed in the config.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import branching_martingale as bm
from . import experiments as ex
from .degree_model import entropic_time, save_degree_sequence
from .errors import PageRankMixingError
from .graph_gen import inspect_simple, write_graph
from .neighborhood_explorer import explore_out_tree
from .walk_engine import WalkParams, distance_profile, srw_kernel

COMMANDS = ("generate", "profile", "scenario", "widespread", "singularity", "martingale", "tree")


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ex.ConfigInvalid(f"cannot read config {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ex.ConfigInvalid("config must be a JSON object")
    return cfg


def _graph_cfg(cfg: dict) -> dict:
    return cfg.get("graph", {k: cfg[k] for k in ("model", "n", "degrees", "graph_file") if k in cfg})


def cmd_generate(cfg, out: Path, threads: int):
    seed = int(cfg.get("seed", 0))
    gcfg = _graph_cfg(cfg)
    seq = ex.degree_sequence_from_config(gcfg)
    g, _ = ex.graph_from_config(gcfg, seed)
    write_graph(g, out / "graph.txt")
    save_degree_sequence(seq, out / "degrees.txt")
    rep = inspect_simple(g)
    H, T_ent = entropic_time(seq)
    rows = [
        {"key": "n", "value": g.n},
        {"key": "m", "value": g.m},
        {"key": "H", "value": H},
        {"key": "T_ent", "value": T_ent},
        {"key": "self_loops", "value": rep.self_loops},
        {"key": "multi_edge_pairs", "value": rep.multi_edge_pairs},
        {"key": "is_simple", "value": rep.is_simple},
    ]
    ex.write_rows_csv(rows, ["key", "value"], out / "graph_summary.csv")
    return [seed], ["graph.txt", "degrees.txt", "graph_summary.csv"]


def cmd_profile(cfg, out: Path, threads: int):
    seed = int(cfg.get("seed", 0))
    gcfg = _graph_cfg(cfg)
    g, seq = ex.graph_from_config(gcfg, seed)
    if seq is None:
        seq = ex.seq_of_graph(g, gcfg.get("model", "DCM"))
    _, T_ent = entropic_time(seq)
    alpha = float(cfg.get("alpha", 0.0))
    starts = ex.choose_starts(g.n, cfg.get("start_sample", 1), seed)
    lams = ex.expand_lambda_set(cfg.get("lambda_set", ["uniform"]), g.n, seq, seed, exclude=starts)
    if "times" in cfg:
        times = [int(t) for t in cfg["times"]]
    else:
        times = range(int(cfg.get("t_max", math.ceil(2 * T_ent))) + 1)
    k = srw_kernel(g, threads)
    profiles = [
        distance_profile(k, WalkParams(alpha, lam, lab), starts, times, tol=float(cfg.get("tol", 1e-12)), seed=seed, T_ent=T_ent)
        for lab, lam in lams.items()
    ]
    from .walk_engine import write_profiles_csv

    write_profiles_csv(profiles, out / "profile.csv")
    return [seed], ["profile.csv"]


def cmd_scenario(cfg, out: Path, threads: int):
    res = ex.run_scenario(cfg, threads)
    return [res.provenance["seed"]], res.write(out)


def cmd_widespread(cfg, out: Path, threads: int):
    seed = int(cfg.get("seed", 0))
    gcfg = _graph_cfg(cfg)
    g, seq = ex.graph_from_config(gcfg, seed)
    if seq is None:
        seq = ex.seq_of_graph(g, gcfg.get("model", "DCM"))
    _, T_ent = entropic_time(seq)
    lam = ex.lambda_from_label(cfg.get("lambda", "uniform"), g.n, seq)
    t_list = cfg.get("t_list") or [math.ceil(T_ent)]
    alphas = []
    for a in cfg.get("alphas", []):
        alphas.append(float(a[:-len("/T_ent")]) / T_ent if isinstance(a, str) and a.endswith("/T_ent") else float(a))
    rk = {kk: float(cfg[kk]) for kk in ("delta", "c1", "c2") if kk in cfg}
    res = ex.run_widespread(g, seq, lam, t_list, alphas, float(cfg.get("h_eps", 0.5)), report_kwargs=rk, threads=threads)
    return [seed], res.write(out)


def cmd_singularity(cfg, out: Path, threads: int):
    res = ex.run_singularity(cfg, threads)
    return [int(cfg.get("seed", 0))], res.write(out)


def cmd_martingale(cfg, out: Path, threads: int):
    recs = ex.run_martingale_suite(cfg, threads)
    bm.write_mc_csv(recs, out / "martingale.csv", ex.MARTINGALE_EXTRA)
    return sorted({r.seed for r in recs}), ["martingale.csv"]


def cmd_tree(cfg, out: Path, threads: int):
    seed = int(cfg.get("seed", 0))
    gcfg = _graph_cfg(cfg)
    g, _ = ex.graph_from_config(gcfg, seed)
    roots = cfg.get("roots", [cfg.get("root", 0)])
    t = int(cfg.get("t", 3))
    eta = float(cfg.get("eta", 0.1))
    rows = []
    names = []
    for z in roots:
        tr = explore_out_tree(g, int(z), t, eta, check_kappa=bool(cfg.get("check_kappa", True)))
        name = f"tree_{int(z)}.txt"
        tr.write(out / name)
        names.append(name)
        rows.append({"root": int(z), "t": t, "eta": eta, "nodes": tr.size, "kappa": tr.kappa,
                     "kappa_bound": tr.kappa_bound, "w_min": tr.w_min})
    ex.write_rows_csv(rows, ["root", "t", "eta", "nodes", "kappa", "kappa_bound", "w_min"], out / "trees.csv")
    return [seed], names + ["trees.csv"]


HANDLERS = {
    "generate": cmd_generate,
    "profile": cmd_profile,
    "scenario": cmd_scenario,
    "widespread": cmd_widespread,
    "singularity": cmd_singularity,
    "martingale": cmd_martingale,
    "tree": cmd_tree,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pagerank-mixing", description="PageRank mixing experiments on random digraphs.")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed; overrides the config")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("command", choices=COMMANDS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2**64:
                raise ex.ConfigInvalid("--seed must be an unsigned 64-bit integer")
            cfg["seed"] = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        seeds, outputs = HANDLERS[args.command](cfg, out, max(1, args.threads))
        ex.write_manifest(out / "manifest.json", args.command, cfg, seeds, outputs, time.perf_counter() - t0,
                          {"threads": args.threads})
    except PageRankMixingError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
