"""Marked Galton-Watson in-trees, their weight martingale and graph couplings.

Two offspring rules, one per graph model:

* DCM: a node with mark ``j`` has exactly ``d^-_j`` children, each marked
  ``k`` independently with probability ``d^+_k / m``.
* OCM: every node has, independently for each ``j``, a child marked ``j``
  with probability ``d^+_j / n``.

The root mark is uniform on ``[n]`` unless fixed.  A node ``x`` in
generation ``t`` has weight ``w(x) = prod 1/d^+`` over the marks on its
root path, root excluded, and ``X_t(phi) = sum_x phi(i(x)) w(x)``.  The
normalized martingale is ``M_t = n X_t(mu_in)`` with increments
``Delta_t = M_{t+1} - M_t``.

Monte Carlo checks run on :func:`sample_forest`, which tracks for each tree
only how many generation-``t`` nodes share a (weight, mark class) pair.
Marks in one class have identical degrees and test-function values, so the
functionals are unchanged, and the class counts of the next generation are
drawn exactly (binomial for OCM, multinomial for DCM).  The node-by-node
sampler :func:`sample_gw_tree` is kept for small cases and cross-checks.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .degree_model import DegreeSequence, Model, as_prob_vector, gamma_lambda, mu_in, rho_and_C
from .errors import BoundVacuous
from .graph_gen import Digraph, sample_graph
from .rng import make_rng, substream_key

CHUNK = 4096


# ---------------------------------------------------------------------------
# explicit trees


@dataclass
class MarkedGWTree:
    """Generations of a marked GW in-tree.

    ``marks[t]`` and ``parents[t]`` are arrays over generation ``t``;
    ``parents[t][i]`` indexes into generation ``t - 1`` (``-1`` at the
    root).  ``denoms[t]`` holds the integer ``1 / w`` of every node.
    """

    model: Model
    root_mark: int
    depth: int
    seed: int
    marks: list = field(default_factory=list)
    parents: list = field(default_factory=list)
    denoms: list = field(default_factory=list)

    def generation(self, t: int) -> np.ndarray:
        return self.marks[t]

    def weights(self, t: int) -> np.ndarray:
        return 1.0 / self.denoms[t].astype(np.float64)

    def offspring_counts(self, t: int) -> np.ndarray:
        """Number of children of every node of generation ``t < depth``."""
        return np.bincount(self.parents[t + 1], minlength=self.marks[t].size)


def _child_cdf(seq: DegreeSequence) -> np.ndarray:
    cdf = np.cumsum(seq.out_degrees / float(seq.m))
    cdf[-1] = 1.0
    return cdf


def sample_gw_tree(
    seq: DegreeSequence,
    depth: int,
    seed: int,
    root: int | None = None,
    method: str = "bernoulli",
    max_nodes: int = 5_000_000,
) -> MarkedGWTree:
    """Sample the first ``depth`` generations node by node.

    For OCM, ``method="bernoulli"`` draws one Bernoulli per (node, mark).
    ``method="grouped"`` draws, per node and per out-degree class, a
    binomial count and then that many distinct marks uniformly from the
    class; given the count, independent equal-probability Bernoullis select
    a uniform subset, so both methods have the same law.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if method not in ("bernoulli", "grouped"):
        raise ValueError(f"unknown method {method!r}")
    rng = make_rng(seed)
    n = seq.n
    r = int(rng.integers(n)) if root is None else int(root)
    tree = MarkedGWTree(seq.model, r, depth, seed)
    tree.marks.append(np.array([r], dtype=np.int64))
    tree.parents.append(np.array([-1], dtype=np.int64))
    tree.denoms.append(np.array([1], dtype=np.int64))
    d_out = seq.out_degrees
    if seq.model is Model.DCM:
        cdf = _child_cdf(seq)
    else:
        p = d_out / float(n)
        groups = [(np.flatnonzero(d_out == d), d / float(n)) for d in np.unique(d_out)]
    for _ in range(depth):
        cur = tree.marks[-1]
        if seq.model is Model.DCM:
            parents = np.repeat(np.arange(cur.size, dtype=np.int64), seq.in_degrees[cur])
            kids = np.searchsorted(cdf, rng.random(parents.size), side="right")
        elif method == "bernoulli":
            par_list, kid_list = [], []
            block = max(1, 2_000_000 // n)
            for a in range(0, cur.size, block):
                hit = rng.random((min(block, cur.size - a), n)) < p
                rows, cols = np.nonzero(hit)
                par_list.append(rows + a)
                kid_list.append(cols)
            parents = np.concatenate(par_list) if par_list else np.zeros(0, np.int64)
            kids = np.concatenate(kid_list) if kid_list else np.zeros(0, np.int64)
        else:
            par_list, kid_list = [], []
            for i in range(cur.size):
                for members, pc in groups:
                    c = int(rng.binomial(members.size, pc))
                    if c:
                        chosen = np.sort(rng.choice(members, size=c, replace=False))
                        kid_list.append(chosen)
                        par_list.append(np.full(c, i, dtype=np.int64))
            parents = np.concatenate(par_list) if par_list else np.zeros(0, np.int64)
            kids = np.concatenate(kid_list) if kid_list else np.zeros(0, np.int64)
        if kids.size > max_nodes:
            raise MemoryError(f"generation of {kids.size} nodes exceeds max_nodes")
        tree.marks.append(kids.astype(np.int64))
        tree.parents.append(parents.astype(np.int64))
        tree.denoms.append(tree.denoms[-1][parents] * d_out[kids])
    return tree


def weight_functional(tree: MarkedGWTree, phi, t: int) -> float:
    """``X_t(phi)``; ``phi`` is an array indexed by mark."""
    if t > tree.depth:
        raise ValueError("t exceeds the tree depth")
    phi = np.asarray(phi, dtype=np.float64)
    marks = tree.marks[t]
    if marks.size == 0:
        return 0.0
    if t == 0:
        return float(phi[marks[0]])
    return float(np.sum(phi[marks] / tree.denoms[t]))


def martingale_path(tree: MarkedGWTree, seq: DegreeSequence, t_max: int | None = None) -> np.ndarray:
    """``(M_0, ..., M_{t_max})``."""
    t_max = tree.depth if t_max is None else t_max
    phi = seq.n * mu_in(seq)
    return np.array([weight_functional(tree, phi, t) for t in range(t_max + 1)])


# ---------------------------------------------------------------------------
# class-aggregated forests


@dataclass
class _Classes:
    cls_of: np.ndarray  # class id per mark
    size: np.ndarray
    d_out: np.ndarray
    d_in: np.ndarray
    nmu: np.ndarray  # n * mu_in on the class
    phi: np.ndarray  # extra test function on the class (zeros if none)
    child_p: np.ndarray  # OCM: per-mark inclusion probability; DCM: class probability


def _classes(seq: DegreeSequence, phi=None) -> _Classes:
    n = seq.n
    d_in = seq.in_degrees if seq.model is Model.DCM else np.zeros(n, dtype=np.int64)
    extra = np.zeros(n) if phi is None else np.asarray(phi, dtype=np.float64)
    cols = np.column_stack([seq.out_degrees.astype(np.float64), d_in.astype(np.float64), extra])
    uniq, rep, inv = np.unique(cols, axis=0, return_index=True, return_inverse=True)
    inv = inv.ravel()
    size = np.bincount(inv, minlength=uniq.shape[0])
    d_out_c = seq.out_degrees[rep]
    nmu = (n * mu_in(seq))[rep]
    if seq.model is Model.DCM:
        child_p = size * d_out_c / float(seq.m)
        child_p = child_p / child_p.sum()
    else:
        child_p = d_out_c / float(n)
    return _Classes(inv, size, d_out_c, d_in[rep], nmu, extra[rep], child_p)


@dataclass
class ForestSample:
    """Per-tree functionals, arrays of shape ``(samples, depth + 1)``.

    ``delta[:, t]`` is ``M_{t+1} - M_t`` computed from the children of
    generation ``t`` (last column unused), ``y`` is ``X_t(phi)`` for the
    extra test function (zeros if none), ``nodes`` the generation sizes.
    """

    M: np.ndarray
    delta: np.ndarray
    y: np.ndarray
    nodes: np.ndarray
    seed: int

    @property
    def samples(self) -> int:
        return self.M.shape[0]


def _merge(tree, D, c, N):
    order = np.lexsort((c, D, tree))
    tree, D, c, N = tree[order], D[order], c[order], N[order]
    if tree.size == 0:
        return tree, D, c, N
    new = np.ones(tree.size, dtype=bool)
    new[1:] = (tree[1:] != tree[:-1]) | (D[1:] != D[:-1]) | (c[1:] != c[:-1])
    starts = np.flatnonzero(new)
    return tree[starts], D[starts], c[starts], np.add.reduceat(N, starts)


def _forest_chunk(seq: DegreeSequence, cl: _Classes, depth: int, count: int, key: int, root):
    rng = make_rng(key)
    n = seq.n
    k = cl.size.size
    M = np.zeros((count, depth + 1))
    Y = np.zeros((count, depth + 1))
    delta = np.zeros((count, depth + 1))
    nodes = np.zeros((count, depth + 1), dtype=np.int64)
    roots = rng.integers(0, n, size=count) if root is None else np.full(count, int(root))
    tree = np.arange(count, dtype=np.int64)
    D = np.ones(count, dtype=np.int64)
    c = cl.cls_of[roots]
    N = np.ones(count, dtype=np.int64)
    dcm = seq.model is Model.DCM
    inv_dout = 1.0 / cl.d_out
    psi_dcm = (cl.d_in - cl.d_out) / cl.d_out.astype(np.float64)
    for t in range(depth + 1):
        inv_D = 1.0 / D
        M[:, t] = np.bincount(tree, weights=N * cl.nmu[c] * inv_D, minlength=count)
        Y[:, t] = np.bincount(tree, weights=N * cl.phi[c] * inv_D, minlength=count)
        nodes[:, t] = np.bincount(tree, weights=N, minlength=count).astype(np.int64)
        if t == depth:
            break
        if dcm:
            kids = rng.multinomial(N * cl.d_in[c], cl.child_p)
            row_psi = (kids @ psi_dcm) * (n / float(seq.m))
        else:
            kids = rng.binomial(N[:, None] * cl.size[None, :], cl.child_p[None, :])
            row_psi = kids @ inv_dout - N
        delta[:, t] = np.bincount(tree, weights=row_psi * inv_D, minlength=count)
        r, cc = np.nonzero(kids)
        tree, D, c, N = _merge(tree[r], D[r] * cl.d_out[cc], cc.astype(np.int64), kids[r, cc].astype(np.int64))
    return M, delta, Y, nodes


def sample_forest(
    seq: DegreeSequence,
    depth: int,
    samples: int,
    seed: int,
    phi=None,
    root: int | None = None,
    threads: int = 1,
) -> ForestSample:
    """Sample ``samples`` independent trees to ``depth`` generations.

    Trees are split into fixed chunks of ``CHUNK``; chunk ``i`` uses the
    substream ``(seed, i + 1)`` and chunks are concatenated in order, so
    the result does not depend on ``threads``.
    """
    if depth < 0 or samples <= 0:
        raise ValueError("need depth >= 0 and samples > 0")
    cl = _classes(seq, phi)
    jobs = [(i, min(CHUNK, samples - a)) for i, a in enumerate(range(0, samples, CHUNK))]

    def run(job):
        i, cnt = job
        return _forest_chunk(seq, cl, depth, cnt, substream_key(seed, i + 1), root)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    M, delta, Y, nodes = (np.concatenate([p[i] for p in parts]) for i in range(4))
    return ForestSample(M, delta, Y, nodes, seed)


# ---------------------------------------------------------------------------
# Monte Carlo records

MC_COLUMNS = ["quantity", "t", "estimate", "std_error", "target", "z_score", "samples", "seed"]


@dataclass
class MCRecord:
    quantity: str
    t: int
    estimate: float
    std_error: float
    target: float
    samples: int
    seed: int
    extra: dict = field(default_factory=dict)

    @property
    def z_score(self) -> float:
        diff = self.estimate - self.target
        if self.std_error == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.std_error

    def row(self) -> dict:
        return {
            "quantity": self.quantity,
            "t": self.t,
            "estimate": repr(float(self.estimate)),
            "std_error": repr(float(self.std_error)),
            "target": repr(float(self.target)),
            "z_score": repr(float(self.z_score)),
            "samples": self.samples,
            "seed": self.seed,
        }


def write_mc_csv(records, path, extra_columns=()) -> None:
    cols = MC_COLUMNS + list(extra_columns)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in records:
            row = r.row()
            for c in extra_columns:
                v = r.extra.get(c, "")
                row[c] = repr(v) if isinstance(v, float) else v
            w.writerow(row)


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=np.float64)
    m = math.fsum(x) / x.size
    if x.size < 2:
        return m, 0.0
    var = math.fsum((x - m) ** 2) / (x.size - 1)
    return m, math.sqrt(var / x.size)


def variance_law_check(seq: DegreeSequence, t, samples: int, seed: int, threads: int = 1, forest=None):
    """``E[Delta_t^2]`` against ``C (1 - rho) rho^t``.

    ``t`` may be an int (one record) or a sequence (list of records).
    """
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    ts = [t] if isinstance(t, (int, np.integer)) else list(t)
    rho, C = rho_and_C(seq)
    f = forest if forest is not None else sample_forest(seq, max(ts) + 1, samples, seed, threads=threads)
    out = []
    for s in ts:
        est, se = _mean_se(f.delta[:, s] ** 2)
        out.append(MCRecord("E[Delta_t^2]", int(s), est, se, C * (1 - rho) * rho**s, f.samples, seed))
    return out[0] if isinstance(t, (int, np.integer)) else out


def increment_mean_check(seq: DegreeSequence, t, samples: int, seed: int, threads: int = 1, forest=None):
    """Sample mean of ``Delta_t`` against 0."""
    ts = [t] if isinstance(t, (int, np.integer)) else list(t)
    f = forest if forest is not None else sample_forest(seq, max(ts) + 1, samples, seed, threads=threads)
    out = []
    for s in ts:
        est, se = _mean_se(f.delta[:, s])
        out.append(MCRecord("E[Delta_t]", int(s), est, se, 0.0, f.samples, seed))
    return out[0] if isinstance(t, (int, np.integer)) else out


def martingale_mean_check(seq: DegreeSequence, t, samples: int, seed: int, threads: int = 1, forest=None):
    """Sample mean of ``M_t`` against 1."""
    ts = [t] if isinstance(t, (int, np.integer)) else list(t)
    f = forest if forest is not None else sample_forest(seq, max(ts), samples, seed, threads=threads)
    out = []
    for s in ts:
        est, se = _mean_se(f.M[:, s])
        out.append(MCRecord("E[M_t]", int(s), est, se, 1.0, f.samples, seed))
    return out[0] if isinstance(t, (int, np.integer)) else out


def lambda_constant(seq: DegreeSequence, lam) -> float:
    """``C(lam)``: conditional second-moment factor of ``X(phi)``, ``phi = n (mu_in - lam)``.

    DCM: ``(1/n) sum phi^2 / d^+``.  OCM: ``(1/n) sum phi^2 / d^+ (1 - d^+/n)``.
    """
    lam = as_prob_vector(lam)
    n = seq.n
    phi = n * (mu_in(seq) - lam)
    d = seq.out_degrees.astype(np.float64)
    if seq.model is Model.DCM:
        return float(np.sum(phi**2 / d) / n)
    return float(np.sum(phi**2 / d * (1.0 - d / n)) / n)


def lambda_exact_law(seq: DegreeSequence, lam, t: int) -> float:
    """Exact ``E[(M_t - n X_t(lam))^2]`` for a uniform root.

    At ``t = 0`` it is ``E[phi(I)^2] = 2 gamma(lam)``; for ``t >= 1`` the
    one-step conditional variance recursion gives ``C(lam) rho^(t-1)``.
    """
    if t == 0:
        return 2.0 * gamma_lambda(lam, seq)
    rho, _ = rho_and_C(seq)
    return lambda_constant(seq, lam) * rho ** (t - 1)


@dataclass
class L2Record:
    t: int
    estimate: float
    std_error: float
    bound: float
    exact_law: float
    samples: int
    seed: int

    @property
    def within_bound(self) -> bool:
        """``estimate <= bound + 3 SE``."""
        return self.estimate <= self.bound + 3.0 * self.std_error

    @property
    def z_exact(self) -> float:
        if self.std_error == 0:
            return 0.0 if self.estimate == self.exact_law else math.inf
        return (self.estimate - self.exact_law) / self.std_error

    def as_mc(self, kind: str = "bound") -> MCRecord:
        target = self.bound if kind == "bound" else self.exact_law
        return MCRecord(f"E[(M_t-nX_t(lam))^2] vs {kind}", self.t, self.estimate, self.std_error, target, self.samples, self.seed)


def lambda_l2_check(seq: DegreeSequence, lam, t, samples: int, seed: int, threads: int = 1):
    """``E[(M_t - n X_t(lam))^2]`` against ``gamma(lam) rho^t`` and the exact law."""
    lam = as_prob_vector(lam)
    ts = [t] if isinstance(t, (int, np.integer)) else list(t)
    rho, _ = rho_and_C(seq)
    g = gamma_lambda(lam, seq)
    phi = seq.n * (mu_in(seq) - lam)
    f = sample_forest(seq, max(ts), samples, seed, phi=phi, threads=threads)
    out = []
    for s in ts:
        est, se = _mean_se(f.y[:, s] ** 2)
        out.append(L2Record(int(s), est, se, g * rho**s, lambda_exact_law(seq, lam, s), f.samples, seed))
    return out[0] if isinstance(t, (int, np.integer)) else out


def deep_time(seq: DegreeSequence, level: float = 1e-6) -> int:
    """Smallest ``t`` with ``rho^t <= level``."""
    rho, _ = rho_and_C(seq)
    return math.ceil(math.log(level) / math.log(rho) - 1e-12)


@dataclass
class MInfinityMoments:
    mean: float
    mean_se: float
    variance: float
    variance_se: float
    variance_target: float
    deep_t: int
    samples: int
    seed: int

    def records(self) -> list[MCRecord]:
        return [
            MCRecord("E[M_inf]", self.deep_t, self.mean, self.mean_se, 1.0, self.samples, self.seed),
            MCRecord("Var[M_inf]", self.deep_t, self.variance, self.variance_se, self.variance_target, self.samples, self.seed),
        ]


def m_infinity_moments(seq: DegreeSequence, samples: int, seed: int, deep_t: int | None = None, threads: int = 1) -> MInfinityMoments:
    """Mean and variance of ``M_{deep_t}`` as a proxy for ``M_inf``.

    The variance target is ``Var(M_0) + C``: increments are orthogonal and
    sum to ``C`` in second moment.  For OCM ``M_0 = 1``, so it is ``C``.
    """
    rho, C = rho_and_C(seq)
    if deep_t is None:
        deep_t = deep_time(seq)
    if rho**deep_t > 1e-6 * (1 + 1e-9):
        raise ValueError(f"rho^deep_t = {rho**deep_t:.3e} is above 1e-6")
    f = sample_forest(seq, deep_t, samples, seed, threads=threads)
    x = f.M[:, deep_t]
    m, se = _mean_se(x)
    dev = x - m
    var = math.fsum(dev**2) / (x.size - 1)
    m4 = math.fsum(dev**4) / x.size
    var_se = math.sqrt(max(m4 - var * var, 0.0) / x.size)
    nmu = seq.n * mu_in(seq)
    var0 = float(np.mean(nmu**2) - np.mean(nmu) ** 2)
    return MInfinityMoments(m, se, var, var_se, var0 + C, deep_t, f.samples, seed)


# ---------------------------------------------------------------------------
# in-neighbourhoods on realized graphs


@dataclass
class InNeighborhood:
    """Union of the directed paths of length ``<= t`` ending at ``center``.

    ``levels[s]`` holds the vertices at in-distance exactly ``s``;
    ``edges`` are edge ids, i.e. every edge whose head is at in-distance
    ``<= t - 1``.
    """

    center: int
    t: int
    levels: list
    edges: np.ndarray
    n_vertices: int

    @property
    def vertices(self) -> set[int]:
        return {int(v) for lv in self.levels for v in lv}

    @property
    def size(self) -> int:
        return self.n_vertices

    @property
    def is_tree(self) -> bool:
        return self.edges.size == self.n_vertices - 1


def explore_in_neighborhood(g: Digraph, v: int, t: int) -> InNeighborhood:
    """Breadth-first search over reversed edges to depth ``t``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    seen = {int(v)}
    levels = [np.array([v], dtype=np.int64)]
    edges = []
    frontier = [int(v)]
    for _ in range(t):
        nxt = []
        for b in frontier:
            ids = g.in_edges(b)
            edges.append(ids)
            for a in g.sources[ids]:
                a = int(a)
                if a not in seen:
                    seen.add(a)
                    nxt.append(a)
        levels.append(np.array(sorted(nxt), dtype=np.int64))
        frontier = nxt
    e = np.sort(np.concatenate(edges)) if edges else np.zeros(0, dtype=np.int64)
    return InNeighborhood(int(v), t, levels, e, len(seen))


def coupling_bound(seq: DegreeSequence, t: int) -> float:
    """``Delta^(2t+3) / m`` for DCM, ``Delta^(3t) (log n)^4 / n`` for OCM."""
    d = seq.delta
    if seq.model is Model.DCM:
        return d ** (2 * t + 3) / seq.m
    return d ** (3 * t) * math.log(seq.n) ** 4 / seq.n


@dataclass
class CouplingResult:
    failures: int
    trials: int
    fraction: float
    ci_low: float
    ci_high: float
    bound: float
    t: int
    seed: int

    @property
    def consistent(self) -> bool:
        """The bound is not rejected: the lower confidence limit lies below it."""
        return self.ci_low <= self.bound


def clopper_pearson(k: int, n: int, level: float = 0.99) -> tuple[float, float]:
    a = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a / 2, k + 1, n - k))
    return lo, hi


def coupling_agreement(
    seq: DegreeSequence,
    t: int,
    graph_samples: int,
    seed: int,
    vertices_per_graph: int = 100,
    level: float = 0.99,
) -> CouplingResult:
    """Fraction of sampled (graph, vertex) pairs whose depth-``t`` in-neighbourhood is not a tree.

    A non-tree neighbourhood cannot be coupled with a GW tree, so the
    fraction estimates a lower bound for the coupling failure probability
    and must not exceed the model's bound.  Vertices are drawn without
    replacement within each graph.
    """
    bound = coupling_bound(seq, t)
    if bound >= 1:
        raise BoundVacuous(f"coupling bound {bound:.4g} >= 1 at n={seq.n}, t={t}")
    fails = trials = 0
    for i in range(graph_samples):
        g = sample_graph(seq, substream_key(seed, 2 * i + 1))
        rng = make_rng(seed, 2 * i + 2)
        vs = rng.choice(seq.n, size=min(vertices_per_graph, seq.n), replace=False)
        for v in vs:
            trials += 1
            fails += not explore_in_neighborhood(g, int(v), t).is_tree
    lo, hi = clopper_pearson(fails, trials, level)
    return CouplingResult(fails, trials, fails / trials, lo, hi, bound, t, seed)
