"""Experiment drivers: trichotomy scenarios, widespread laws, singularity, martingales.

Every driver takes a plain ``dict`` (usually parsed from JSON), validates it
into a ``ScenarioSpec``-style object, runs deterministically from its seed and returns a
result object that can write itself as CSV.  Floats in CSV files are
written with ``repr`` so that reruns compare byte for byte.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import branching_martingale as bm
from .degree_model import (
    DegreeSequence,
    Model,
    _as_model,
    as_prob_vector,
    build_degree_sequence,
    dirac,
    entropic_time,
    limit_profile,
    load_degree_sequence,
    mu_in,
    regular_sequence,
    theta,
    uniform,
    widespread_report,
)
from .errors import ConfigInvalid, DiscontinuityPoint, InvariantViolation
from .graph_gen import Digraph, read_graph, sample_graph
from .neighborhood_explorer import singularity_diagnostic
from .rng import make_rng
from .walk_engine import (
    WalkParams,
    distance_profile,
    evolve,
    mixing_time,
    srw_kernel,
    stationary_pagerank,
    stationary_srw,
    tv,
    tv_columns,
    write_profiles_csv,
)

SCENARIOS = ("gamma_zero", "gamma_finite", "gamma_infinite")


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    return v


def write_rows_csv(rows: list[dict], columns: list[str], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({c: _fmt(r.get(c, "")) for c in columns})


# ---------------------------------------------------------------------------
# graph / degree sources


def degree_sequence_from_config(cfg: dict) -> DegreeSequence:
    """Build the degree sequence described by ``cfg``.

    Accepted forms: ``{"model", "n", "degrees": {"regular": d}}``,
    ``{"model", "degrees": {"out": [...], "in": [...]}}`` or
    ``{"degrees": {"file": path}}``.
    """
    deg = cfg.get("degrees")
    if not isinstance(deg, dict):
        raise ConfigInvalid("'degrees' must be an object")
    try:
        if "file" in deg:
            return load_degree_sequence(deg["file"])
        model = _as_model(cfg.get("model", "DCM"))
        if "regular" in deg:
            n = int(cfg["n"])
            return regular_sequence(n, int(deg["regular"]), model)
        if "out" in deg:
            return build_degree_sequence(deg["out"], deg.get("in"), model)
    except KeyError as exc:
        raise ConfigInvalid(f"missing key {exc}") from None
    raise ConfigInvalid("'degrees' needs one of 'regular', 'out', 'file'")


def graph_from_config(cfg: dict, seed: int) -> tuple[Digraph, DegreeSequence | None]:
    if "graph_file" in cfg:
        g = read_graph(cfg["graph_file"])
        seq = None
        if "degrees" in cfg:
            seq = degree_sequence_from_config(cfg)
        return g, seq
    seq = degree_sequence_from_config(cfg)
    return sample_graph(seq, seed), seq


def seq_of_graph(g: Digraph, model: str) -> DegreeSequence:
    model = _as_model(model)
    return build_degree_sequence(g.out_degrees, g.in_degrees if model is Model.DCM else None, model)


def lambda_from_label(label: str, n: int, seq: DegreeSequence | None) -> np.ndarray:
    if label == "uniform":
        return uniform(n)
    if label == "mu_in":
        if seq is None:
            raise ConfigInvalid("mu_in needs a degree sequence")
        return mu_in(seq)
    if label.startswith("dirac(") and label.endswith(")"):
        z = int(label[6:-1])
        if not 0 <= z < n:
            raise ConfigInvalid(f"{label}: vertex out of range")
        return dirac(n, z)
    if label.startswith("file:"):
        vals = np.loadtxt(label[5:], dtype=np.float64).ravel()
        if vals.size != n:
            raise ConfigInvalid(f"{label}: expected {n} values, found {vals.size}")
        return as_prob_vector(vals, tol=1e-9)
    raise ConfigInvalid(f"unknown lambda label {label!r}")


def expand_lambda_set(labels, n: int, seq, seed: int, exclude=()) -> dict:
    """Resolve labels into vectors.  ``dirac_random:k`` draws ``k`` distinct
    vertices (outside ``exclude``) from substream 2 of ``seed``."""
    out = {}
    for lab in labels:
        if isinstance(lab, str) and lab.startswith("dirac_random:"):
            k = int(lab.split(":", 1)[1])
            pool = np.setdiff1d(np.arange(n), np.asarray(list(exclude), dtype=np.int64))
            if k > pool.size:
                raise ConfigInvalid("not enough vertices for dirac_random")
            zs = make_rng(seed, 2).choice(pool, size=k, replace=False)
            for z in zs:
                out[f"dirac({int(z)})"] = dirac(n, int(z))
        else:
            out[lab] = lambda_from_label(lab, n, seq)
    return out


def choose_starts(n: int, start_sample, seed: int) -> list[int]:
    if start_sample == "all":
        return list(range(n))
    if isinstance(start_sample, list):
        return [int(x) for x in start_sample]
    k = int(start_sample)
    if not 0 < k <= n:
        raise ConfigInvalid("start_sample must lie in [1, n]")
    return [int(x) for x in make_rng(seed, 1).choice(n, size=k, replace=False)]


# ---------------------------------------------------------------------------
# trichotomy scenarios


@dataclass
class ScenarioSpec:
    graph: dict
    seed: int
    scenario: str
    gamma: float | None
    alpha: float | None
    alpha_rule: dict | None
    s_grid: list
    start_sample: object
    lambda_set: list
    eps_list: list
    jump_window: float = 0.25
    tol: float = 1e-12

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        if not isinstance(d, dict):
            raise ConfigInvalid("config must be a JSON object")
        scen = d.get("scenario")
        if scen not in SCENARIOS:
            raise ConfigInvalid(f"scenario must be one of {SCENARIOS}")
        gamma = d.get("gamma")
        if scen == "gamma_finite":
            if gamma is None or not 0 < float(gamma) < math.inf:
                raise ConfigInvalid("gamma_finite needs a finite positive 'gamma'")
            gamma = float(gamma)
        alpha, rule = d.get("alpha"), d.get("alpha_rule")
        if alpha is None and rule is None:
            if scen == "gamma_finite":
                rule = {"type": "gamma_over_T_ent"}
            else:
                raise ConfigInvalid("give 'alpha' or 'alpha_rule'")
        s_grid = [float(s) for s in d.get("s_grid", [])]
        if not s_grid or any(s <= 0 for s in s_grid):
            raise ConfigInvalid("s_grid must be a non-empty list of positive reals")
        jump = {"gamma_zero": 1.0, "gamma_finite": gamma, "gamma_infinite": None}[scen]
        if jump is not None and any(abs(s - jump) < 0.05 for s in s_grid):
            raise ConfigInvalid(f"s_grid must stay at least 0.05 away from the jump at s = {jump}")
        graph = d.get("graph", {k: d[k] for k in ("model", "n", "degrees", "graph_file") if k in d})
        return cls(
            graph=graph,
            seed=int(d.get("seed", 0)),
            scenario=scen,
            gamma=gamma,
            alpha=None if alpha is None else float(alpha),
            alpha_rule=rule,
            s_grid=s_grid,
            start_sample=d.get("start_sample", 20),
            lambda_set=list(d.get("lambda_set", ["uniform"])),
            eps_list=[float(e) for e in d.get("eps_list", [0.25, 0.5, 0.75])],
            jump_window=float(d.get("jump_window", 0.25)),
            tol=float(d.get("tol", 1e-12)),
        )

    def resolve_alpha(self, T_ent: float) -> float:
        if self.alpha is not None:
            a = self.alpha
        else:
            rule = self.alpha_rule
            kind = rule.get("type")
            if kind == "gamma_over_T_ent":
                if self.gamma is None:
                    raise ConfigInvalid("gamma_over_T_ent needs 'gamma'")
                a = self.gamma / T_ent
            elif kind == "schedule":
                a = float(rule.get("c", 1.0)) * T_ent ** float(rule.get("T_power", -1.0)) * math.log(T_ent) ** float(
                    rule.get("log_power", 0.0)
                )
            else:
                raise ConfigInvalid(f"unknown alpha_rule type {kind!r}")
        lo_ok = a >= 0 if self.scenario == "gamma_zero" else a > 0
        if not (lo_ok and a < 1):
            raise ConfigInvalid(f"derived alpha = {a} is outside the admissible range")
        return a

    def time_of(self, s: float, alpha: float, T_ent: float) -> int:
        if self.scenario == "gamma_zero":
            return round_half_up(s * T_ent)
        return round_half_up(s / alpha)

    def limit(self, s: float) -> float:
        g = {"gamma_zero": 0.0, "gamma_finite": self.gamma, "gamma_infinite": math.inf}[self.scenario]
        return limit_profile(g, s)

    def jump(self):
        return {"gamma_zero": 1.0, "gamma_finite": self.gamma, "gamma_infinite": None}[self.scenario]


def prelimit_target(scenario: str, alpha: float, t: int, T_ent: float) -> float:
    """Finite-``n`` form of the limit: ``(1-alpha)^t`` times the cutoff step at ``T_ent``."""
    if scenario == "gamma_infinite":
        return (1.0 - alpha) ** t
    try:
        return (1.0 - alpha) ** t * theta(t / T_ent)
    except DiscontinuityPoint:
        return math.nan


SCENARIO_COLUMNS = [
    "s", "t", "start", "lambda_label", "measured", "limit", "prelimit",
    "deviation", "prelimit_deviation", "in_jump_window", "alpha", "T_ent", "n", "seed",
]
MIXING_COLUMNS = ["lambda_label", "eps", "T_eps", "ratio_to_T_ent", "bound", "within_bound", "alpha", "T_ent"]


@dataclass
class ScenarioResult:
    rows: list
    mixing: list
    profiles: list
    summary: dict
    provenance: dict
    runtime: float = 0.0

    def write(self, out_dir) -> list[str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows_csv(self.rows, SCENARIO_COLUMNS, out / "scenario.csv")
        write_rows_csv(self.mixing, MIXING_COLUMNS, out / "mixing_times.csv")
        write_profiles_csv(self.profiles, out / "profiles.csv")
        summ = [{"key": k, "value": v} for k, v in sorted(self.summary.items())]
        write_rows_csv(summ, ["key", "value"], out / "summary.csv")
        return ["scenario.csv", "mixing_times.csv", "profiles.csv", "summary.csv"]


def run_scenario(cfg, threads: int = 1) -> ScenarioResult:
    """Measure ``max_x D^x(t)`` on a scenario grid and compare with the limit profile.

    For each ``s``: ``t = round(s T_ent)`` in the zero-``gamma`` scenario,
    ``t = round(s / alpha)`` otherwise (ties up).  Grid points with
    ``|s - jump| <= jump_window`` are left out of the summary maxima.  Every
    profile is checked against ``D(t) <= (1-alpha)^t`` and every mixing
    time against ``ceil(log(1/eps) / alpha)``.
    """
    t0 = time.perf_counter()
    spec = cfg if isinstance(cfg, ScenarioSpec) else ScenarioSpec.from_dict(cfg)
    g, seq = graph_from_config(spec.graph, spec.seed)
    if seq is None:
        seq = seq_of_graph(g, spec.graph.get("model", g.provenance.get("model", "DCM")))
    H, T_ent = entropic_time(seq)
    alpha = spec.resolve_alpha(T_ent)
    k = srw_kernel(g, threads)
    starts = choose_starts(g.n, spec.start_sample, spec.seed)
    lams = expand_lambda_set(spec.lambda_set, g.n, seq, spec.seed, exclude=starts)
    grid_t = [spec.time_of(s, alpha, T_ent) for s in spec.s_grid]
    horizon = max(grid_t)
    if spec.scenario == "gamma_zero":
        horizon = max(horizon, math.ceil(2 * T_ent))
    if alpha > 0:
        horizon = max(horizon, max(math.ceil(math.log(1 / e) / alpha) for e in spec.eps_list))
    times = range(horizon + 1)
    labels = list(lams)
    if alpha == 0:
        pi0 = stationary_srw(k)
        pis = {lab: pi0 for lab in labels}
    else:
        L = np.column_stack([lams[lab] for lab in labels])
        P = stationary_pagerank(k, WalkParams(alpha, L[:, 0]), spec.tol, lam=L)
        pis = {lab: np.ascontiguousarray(P[:, j]) for j, lab in enumerate(labels)}
    rows, mixing, profiles = [], [], []
    dev_max = pre_max = 0.0
    jump = spec.jump()
    for lab in labels:
        params = WalkParams(alpha, lams[lab], lab)
        prof = distance_profile(k, params, starts, times, pi=pis[lab], seed=spec.seed, T_ent=T_ent)
        profiles.append(prof)
        for s, t in zip(spec.s_grid, grid_t):
            lim = spec.limit(s)
            pre = prelimit_target(spec.scenario, alpha, t, T_ent)
            in_win = jump is not None and abs(s - jump) <= spec.jump_window
            j = int(t)
            for si, x in enumerate(starts + ["max"]):
                val = float(prof.values[j]) if x == "max" else float(prof.per_start[si, j])
                rows.append({
                    "s": s, "t": t, "start": x, "lambda_label": lab, "measured": val, "limit": lim,
                    "prelimit": pre, "deviation": abs(val - lim), "prelimit_deviation": abs(val - pre),
                    "in_jump_window": in_win, "alpha": alpha, "T_ent": T_ent, "n": g.n, "seed": spec.seed,
                })
            if not in_win:
                dev_max = max(dev_max, abs(float(prof.values[j]) - lim))
                if not math.isnan(pre):
                    pre_max = max(pre_max, float(np.max(np.abs(prof.per_start[:, j] - pre))))
        for eps in spec.eps_list:
            T_eps = mixing_time(prof, eps)
            bound = math.ceil(math.log(1 / eps) / alpha) if alpha > 0 else None
            ok = bound is None or T_eps <= bound
            if not ok:
                raise InvariantViolation(f"T({eps}) = {T_eps} exceeds ceil(log(1/eps)/alpha) = {bound}")
            mixing.append({
                "lambda_label": lab, "eps": eps, "T_eps": T_eps, "ratio_to_T_ent": T_eps / T_ent,
                "bound": "" if bound is None else bound, "within_bound": ok, "alpha": alpha, "T_ent": T_ent,
            })
    summary = {
        "scenario": spec.scenario,
        "alpha": alpha,
        "T_ent": T_ent,
        "H": H,
        "n": g.n,
        "max_deviation": dev_max,
        "max_prelimit_deviation": pre_max,
        "starts": len(starts),
    }
    if spec.scenario == "gamma_zero":
        ratios = [m["ratio_to_T_ent"] for m in mixing]
        summary["mixing_ratio_min"] = min(ratios)
        summary["mixing_ratio_max"] = max(ratios)
        # T(eps) / T_ent should sit in [0.8, 1.2]; only meaningful for large n
        if g.n >= 100_000:
            summary["mixing_ratio_ok"] = 0.8 <= min(ratios) and max(ratios) <= 1.2
    prov = {"seed": spec.seed, "graph": g.provenance, "starts": starts, "lambdas": labels}
    return ScenarioResult(rows, mixing, profiles, summary, prov, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# widespread measures


WIDESPREAD_COLUMNS = ["quantity", "t", "alpha", "value"]


@dataclass
class WidespreadResult:
    rows: list
    report: object
    T_ent: float

    def write(self, out_dir) -> list[str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows_csv(self.rows, WIDESPREAD_COLUMNS, out / "widespread.csv")
        r = self.report
        rep = [
            {"key": "max_mass", "value": r.max_mass},
            {"key": "max_bound", "value": r.max_bound},
            {"key": "ell2_statistic", "value": r.ell2_statistic},
            {"key": "pass_i", "value": r.pass_i},
            {"key": "pass_ii", "value": r.pass_ii},
        ]
        write_rows_csv(rep, ["key", "value"], out / "widespread_report.csv")
        return ["widespread.csv", "widespread_report.csv"]


def run_widespread(g: Digraph, seq: DegreeSequence, lam, t_list, alphas=(), h_eps: float = 0.5, pi0=None,
                   report_kwargs=None, threads: int = 1, tol: float = 1e-12) -> WidespreadResult:
    """Distances of ``lam P^t`` and ``pi_{alpha,lam}`` to ``pi_0``.

    Also reports ``||mu_in P^h - pi_0||`` with ``h = ceil(h_eps T_ent)``.
    """
    lam = as_prob_vector(lam)
    report = widespread_report(lam, **(report_kwargs or {}))
    k = srw_kernel(g, threads)
    if pi0 is None:
        pi0 = stationary_srw(k)
    _, T_ent = entropic_time(seq)
    rows = []
    ts = sorted(set(int(t) for t in t_list))
    nu = lam.copy()
    cur = 0
    for t in ts:
        nu = evolve(nu, k, t - cur)
        cur = t
        rows.append({"quantity": "lamP^t_vs_pi0", "t": t, "alpha": "", "value": tv(nu, pi0)})
    for a in alphas:
        pa = stationary_pagerank(k, WalkParams(float(a), lam), tol)
        rows.append({"quantity": "pi_alpha_lam_vs_pi0", "t": "", "alpha": float(a), "value": tv(pa, pi0)})
    h = math.ceil(h_eps * T_ent)
    rows.append({"quantity": "mu_in_P^h_vs_pi0", "t": h, "alpha": "", "value": tv(evolve(mu_in(seq), k, h), pi0)})
    return WidespreadResult(rows, report, T_ent)


# ---------------------------------------------------------------------------
# singularity


SINGULARITY_COLUMNS = ["x", "lambda_label", "t", "tv_value"]
CONTRAST_COLUMNS = ["lambda_label", "alpha", "tv_to_pi0"]


@dataclass
class SingularityRun:
    rows: list
    contrast: list
    minimum: dict  # t -> min

    def write(self, out_dir) -> list[str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_rows_csv(self.rows, SINGULARITY_COLUMNS, out / "singularity.csv")
        write_rows_csv(self.contrast, CONTRAST_COLUMNS, out / "contrast.csv")
        return ["singularity.csv", "contrast.csv"]


def run_singularity(cfg: dict, threads: int = 1) -> SingularityRun:
    """Singularity diagnostic over a grid of times ``t = ceil(s T_ent)``.

    Config keys: graph description, ``seed``, ``alpha`` (or
    ``alpha_T_ent`` for ``alpha = c / T_ent``), ``s_grid``, ``start_sample``,
    ``lambda_set`` and optional ``contrast_alphas``.  The contrast rows give
    ``||pi_{alpha,lam} - pi_0||`` for every lambda and contrast alpha.
    """
    seed = int(cfg.get("seed", 0))
    graph = cfg.get("graph", {kk: cfg[kk] for kk in ("model", "n", "degrees", "graph_file") if kk in cfg})
    g, seq = graph_from_config(graph, seed)
    if seq is None:
        seq = seq_of_graph(g, graph.get("model", "DCM"))
    _, T_ent = entropic_time(seq)
    if "alpha" in cfg:
        alpha = float(cfg["alpha"])
    elif "alpha_T_ent" in cfg:
        alpha = float(cfg["alpha_T_ent"]) / T_ent
    else:
        raise ConfigInvalid("give 'alpha' or 'alpha_T_ent'")
    if not 0 < alpha < 1:
        raise ConfigInvalid("alpha must lie in (0, 1)")
    k = srw_kernel(g, threads)
    starts = choose_starts(g.n, cfg.get("start_sample", 20), seed)
    lams = expand_lambda_set(cfg.get("lambda_set", ["uniform", "mu_in", "dirac_random:10"]), g.n, seq, seed, exclude=starts)
    tol = float(cfg.get("tol", 1e-12))
    rows, mins = [], {}
    for s in cfg.get("s_grid", [0.5]):
        t = math.ceil(float(s) * T_ent)
        res = singularity_diagnostic(k, alpha, t, lams, starts, tol)
        mins[t] = res.minimum
        rows += [{"x": x, "lambda_label": lab, "t": tt, "tv_value": v} for x, lab, tt, v in res.rows]
    contrast = []
    c_alphas = cfg.get("contrast_alphas", [])
    if c_alphas:
        pi0 = stationary_srw(k)
        labels = list(lams)
        L = np.column_stack([lams[lab] for lab in labels])
        for a in c_alphas:
            P = stationary_pagerank(k, WalkParams(float(a), L[:, 0]), tol, lam=L)
            for j, d in enumerate(tv_columns(P, pi0)):
                contrast.append({"lambda_label": labels[j], "alpha": float(a), "tv_to_pi0": float(d)})
    return SingularityRun(rows, contrast, mins)


# ---------------------------------------------------------------------------
# martingale suite


MARTINGALE_EXTRA = ["check", "model", "n", "pass"]


def run_martingale_suite(cfg: dict, threads: int = 1) -> list:
    """Run a list of Monte Carlo checks; every record carries a pass flag.

    ``cfg["checks"]`` is a list of objects with keys ``check`` (one of
    ``variance``, ``increment_mean``, ``martingale_mean``, ``lambda_bound``,
    ``lambda_exact``, ``m_infinity``), a degree description, ``t`` (list),
    ``samples`` and optionally ``lambda`` (label) and ``seed``.  Passing
    means ``|z| <= 3``, or ``estimate <= target + 3 SE`` for
    ``lambda_bound``.
    """
    checks = cfg.get("checks")
    if not isinstance(checks, list) or not checks:
        raise ConfigInvalid("'checks' must be a non-empty list")
    base_seed = int(cfg.get("seed", 0))
    out = []
    for i, c in enumerate(checks):
        kind = c.get("check")
        seq = degree_sequence_from_config(c)
        seed = int(c.get("seed", base_seed + i))
        samples = int(c.get("samples", 10_000))
        ts = [int(t) for t in c.get("t", [0])]
        if kind == "variance":
            recs = bm.variance_law_check(seq, ts, samples, seed, threads)
        elif kind == "increment_mean":
            recs = bm.increment_mean_check(seq, ts, samples, seed, threads)
        elif kind == "martingale_mean":
            recs = bm.martingale_mean_check(seq, ts, samples, seed, threads)
        elif kind in ("lambda_bound", "lambda_exact"):
            lam = lambda_from_label(c.get("lambda", "uniform"), seq.n, seq)
            l2 = bm.lambda_l2_check(seq, lam, ts, samples, seed, threads)
            recs = []
            for r in l2:
                m = r.as_mc("bound" if kind == "lambda_bound" else "exact")
                m.extra["pass"] = r.within_bound if kind == "lambda_bound" else abs(r.z_exact) <= 3
                recs.append(m)
        elif kind == "m_infinity":
            recs = bm.m_infinity_moments(seq, samples, seed, c.get("deep_t"), threads).records()
        else:
            raise ConfigInvalid(f"unknown check {kind!r}")
        for r in recs:
            r.extra.setdefault("pass", abs(r.z_score) <= 3)
            r.extra.update({"check": kind, "model": seq.model.value, "n": seq.n})
            out.append(r)
    return out


def write_manifest(path, command: str, cfg: dict, seeds, outputs, runtime: float, extra=None) -> None:
    import platform

    import scipy

    from . import __version__

    doc = {
        "command": command,
        "config_hash": config_hash(cfg),
        "config": cfg,
        "seeds": seeds,
        "outputs": outputs,
        "runtime_seconds": runtime,
        "versions": {
            "pagerank_mixing": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    if extra:
        doc.update(extra)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")
