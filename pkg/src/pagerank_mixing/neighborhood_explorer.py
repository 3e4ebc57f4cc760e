"""Weight-thresholded out-neighbourhood trees and the diagnostics built on them.

The exploration from a root ``z`` keeps a frontier of unrevealed tails
(out-edges) of the current tree.  A tail of tree vertex ``x`` has height
``h(x) + 1`` and weight ``w(x) / d^+_x``, where ``w(x)`` is the product of
``1/d^+`` over the tree path from ``z`` to ``x`` (excluding ``x``).  At each
step the heaviest tail with height ``<= t`` and weight ``>= w_min`` is
revealed; its head becomes a new tree vertex unless that vertex is already
in the tree.  ``kappa`` counts revealed tails.

Weights are kept as exact integer denominators, so ties are real ties and
are broken by lowest owner vertex id, then lowest tail index.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .degree_model import mu_in, uniform, dirac
from .errors import EtaTooLarge, InvariantViolation
from .graph_gen import Digraph
from .walk_engine import TransitionKernel, WalkParams, evolve, stationary_pagerank, stationary_srw, tv, tv_columns


def w_min(n: int, eta: float) -> float:
    return n ** (-1.0 + eta * eta)


def kappa_bound(n: int, eta: float) -> float:
    return n ** (1.0 - eta * eta / 2.0)


@dataclass
class ExplorationTree:
    """Tree ``T_z(t)``.  Node 0 is the root; arrays are indexed by node id.

    ``mark[i]`` is the graph vertex of node ``i`` (marks are distinct),
    ``parent[i]`` its parent node (``-1`` for the root), ``edge[i]`` the
    edge id that created it (``-1`` for the root), ``denom[i]`` the integer
    ``1 / weight``.  ``revealed`` lists every revealed edge id in reveal
    order; ``kappa = len(revealed)``.
    """

    root: int
    n: int
    t_max: int
    eta: float
    w_min: float
    mark: list = field(default_factory=list)
    parent: list = field(default_factory=list)
    height: list = field(default_factory=list)
    denom: list = field(default_factory=list)
    edge: list = field(default_factory=list)
    revealed: list = field(default_factory=list)

    @property
    def kappa(self) -> int:
        return len(self.revealed)

    @property
    def size(self) -> int:
        return len(self.mark)

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / np.asarray(self.denom, dtype=np.float64)

    @property
    def kappa_bound(self) -> float:
        return kappa_bound(self.n, self.eta)

    @property
    def kappa_ok(self) -> bool:
        return self.kappa <= self.kappa_bound

    def vertex_set(self) -> set[int]:
        return set(self.mark)

    def tree_edges(self) -> set[int]:
        return set(self.edge[1:])

    def extra_edges(self) -> list[int]:
        """Revealed edges whose head was already a tree vertex."""
        tree = self.tree_edges()
        return [e for e in self.revealed if e not in tree]

    def node_lines(self):
        for i in range(self.size):
            yield f"{i} {self.parent[i]} {self.mark[i]} {self.height[i]} {1.0 / self.denom[i]!r}"

    def write(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(f"# root={self.root} n={self.n} t={self.t_max} eta={self.eta!r} kappa={self.kappa}\n")
            for line in self.node_lines():
                fh.write(line + "\n")


def read_tree_nodes(path) -> list[tuple[int, int, int, int, float]]:
    """Parse the "node_id parent_id mark height weight" lines of a tree file."""
    out = []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            a, b, c, d, w = line.split()
            out.append((int(a), int(b), int(c), int(d), float(w)))
    return out


def explore_out_tree(g: Digraph, z: int, t: int, eta: float, check_kappa: bool = True) -> ExplorationTree:
    """Max-weight-first exploration of the out-neighbourhood of ``z``.

    Parameters
    ----------
    g : Digraph
    z : int
        Root vertex.
    t : int
        Height cap: only tails of height ``<= t`` are revealed.
    eta : float in (0, 1/2)
        Sets ``w_min = n**(-1 + eta**2)``.
    check_kappa : bool
        Raise :class:`InvariantViolation` when ``kappa > n**(1 - eta**2/2)``.
    """
    if not 0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")
    if t < 0:
        raise ValueError("t must be non-negative")
    n = g.n
    wmin = w_min(n, eta)
    # a tail qualifies iff its denominator D satisfies 1/D >= wmin
    dmax = math.floor(1.0 / wmin * (1 + 1e-12))
    while dmax > 1 and 1.0 / dmax < wmin:
        dmax -= 1
    tree = ExplorationTree(z, n, t, eta, wmin)
    node_of = {z: 0}
    tree.mark.append(z)
    tree.parent.append(-1)
    tree.height.append(0)
    tree.denom.append(1)
    tree.edge.append(-1)
    deg = g.out_degrees
    indptr, targets = g.indptr, g.targets
    heap = []

    def push_tails(node: int):
        x = tree.mark[node]
        h = tree.height[node] + 1
        dx = int(deg[x])
        if dx == 0 or h > t:
            return
        D = tree.denom[node] * dx
        if D > dmax:
            return
        base = int(indptr[x])
        for i in range(dx):
            heapq.heappush(heap, (D, x, i, base + i, node))

    push_tails(0)
    while heap:
        D, x, i, e, node = heapq.heappop(heap)
        tree.revealed.append(e)
        y = int(targets[e])
        if y in node_of:
            continue
        child = len(tree.mark)
        node_of[y] = child
        tree.mark.append(y)
        tree.parent.append(node)
        tree.height.append(tree.height[node] + 1)
        tree.denom.append(D)
        tree.edge.append(e)
        push_tails(child)
    if check_kappa and not tree.kappa_ok:
        raise InvariantViolation(
            f"kappa = {tree.kappa} exceeds n^(1-eta^2/2) = {tree.kappa_bound:.3f} (n={n}, eta={eta}, t={t})"
        )
    return tree


# ---------------------------------------------------------------------------
# annuli and walk confinement


def annulus(tree: ExplorationTree, t: int) -> set[int]:
    """Vertices at tree height exactly ``t``."""
    if t > tree.t_max:
        raise ValueError("t exceeds the tree's height cap")
    return {m for m, h in zip(tree.mark, tree.height) if h == t}


def walk_in_tree_probability(g: Digraph, tree: ExplorationTree, t: int) -> float:
    """Probability that the walk from the root uses only tree edges for ``t`` steps.

    Mass is pushed along tree edges only, one step at a time; whatever
    leaves the tree is dropped.
    """
    if t > tree.t_max:
        raise ValueError("t exceeds the tree's height cap")
    children: dict[int, list[int]] = {}
    for c in range(1, tree.size):
        children.setdefault(tree.parent[c], []).append(c)
    mass = {0: 1.0}
    for _ in range(t):
        nxt = {}
        for node, p in mass.items():
            kids = children.get(node)
            if not kids:
                continue
            share = p / int(g.out_degrees[tree.mark[node]])
            for c in kids:
                nxt[c] = nxt.get(c, 0.0) + share
        mass = nxt
    return float(sum(mass.values()))


# ---------------------------------------------------------------------------
# decomposition of pi_{alpha,lam} P^t


@dataclass
class DecompositionResult:
    A: float
    mu_lambda: np.ndarray
    eta: float
    t: int
    cut: int
    residual: float
    plain_gap: float
    reconstruction_gap: float


def decomposition_cut(T_ent: float, eta: float, t: int) -> int:
    """Upper summation index ``floor((1 - eta) T_ent) - t``."""
    return math.floor((1.0 - eta) * T_ent) - t


def mu_lambda_decomposition(
    k: TransitionKernel,
    lam,
    alpha: float,
    t: int,
    eta: float,
    T_ent: float,
    pi0=None,
    tol: float = 1e-13,
) -> DecompositionResult:
    """Split ``pi_{alpha,lam} P^t`` into ``A mu_lam + (1 - A) pi0`` plus a remainder.

    ``residual`` is ``||pi P^t - A mu_lam - (1-A) pi0||``, ``plain_gap`` is
    ``||pi P^t - mu_lam||`` and ``reconstruction_gap`` compares
    ``A mu_lam`` plus the series tail beyond the cut with ``pi P^t``.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0 < eta < 0.5:
        raise ValueError("eta must lie in (0, 1/2)")
    if t < 0 or t > math.floor((1.0 - 2.0 * eta) * T_ent):
        raise EtaTooLarge(f"t = {t} exceeds floor((1 - 2 eta) T_ent) = {math.floor((1 - 2 * eta) * T_ent)}")
    cut = decomposition_cut(T_ent, eta, t)
    params = WalkParams(alpha, lam)
    nu = evolve(params.lam, k, t)
    acc = np.zeros(k.n)
    coef = alpha
    A = 0.0
    for j in range(cut + 1):
        if j > 0:
            nu = k.step(nu)
            coef *= 1.0 - alpha
        acc += coef * nu
        A += coef
    mu_l = acc / A
    # continue the same series past the cut for the reconstruction check
    K = max(cut + 1, math.ceil(math.log(tol) / math.log1p(-alpha)))
    tail = np.zeros(k.n)
    for _ in range(cut + 1, K + 1):
        nu = k.step(nu)
        coef *= 1.0 - alpha
        tail += coef * nu
    if pi0 is None:
        pi0 = stationary_srw(k)
    target = evolve(stationary_pagerank(k, params, tol), k, t)
    A_closed = 1.0 - (1.0 - alpha) ** (cut + 1)
    return DecompositionResult(
        A=A_closed,
        mu_lambda=mu_l,
        eta=eta,
        t=t,
        cut=cut,
        residual=tv(target, A_closed * mu_l + (1.0 - A_closed) * pi0),
        plain_gap=tv(target, mu_l),
        reconstruction_gap=0.5 * float(np.abs(target - (acc + tail) / (acc.sum() + tail.sum())).sum()),
    )


# ---------------------------------------------------------------------------
# path / annulus intersections


def k_constant(delta: int, eta: float) -> float:
    """``(9 + 3 log2(Delta)) / eta^2``."""
    return (9.0 + 3.0 * math.log2(delta)) / (eta * eta)


def max_path_hits(tree: ExplorationTree, targets: set[int], length: int) -> int:
    """Max over root paths of ``tree`` of exactly ``length`` edges of the
    number of path vertices in ``targets``; 0 if there is no such path."""
    children: dict[int, list[int]] = {}
    for c in range(1, tree.size):
        children.setdefault(tree.parent[c], []).append(c)
    best = 0
    stack = [(0, int(tree.mark[0] in targets))]
    while stack:
        node, hits = stack.pop()
        if tree.height[node] == length:
            best = max(best, hits)
            continue
        for c in children.get(node, ()):
            stack.append((c, hits + int(tree.mark[c] in targets)))
    return best


def path_annulus_intersections(g: Digraph, x: int, z: int, t: int, u: int, eta: float, check_kappa: bool = True) -> int:
    """``max_{p in P_z(u)} |A_x(t) ∩ V(p)|``."""
    if t > u:
        raise ValueError("need t <= u")
    ring = annulus(explore_out_tree(g, x, t, eta, check_kappa), t)
    return max_path_hits(explore_out_tree(g, z, u, eta, check_kappa), ring, u)


# ---------------------------------------------------------------------------
# tree-like vertices


def ball_is_tree(g: Digraph, z: int, depth: int) -> bool:
    """True iff the out-paths of length ``<= depth`` from ``z`` form a tree.

    The ball's edges are all out-edges of vertices at distance
    ``<= depth - 1``; it is a tree iff it has one edge fewer than vertices.
    """
    seen = {z}
    frontier = [z]
    edges = 0
    for _ in range(depth):
        nxt = []
        for x in frontier:
            for y in g.out_neighbors(x):
                edges += 1
                y = int(y)
                if y in seen:
                    return False
                seen.add(y)
                nxt.append(y)
        frontier = nxt
    return edges == len(seen) - 1


def hbar_depth(n: int, delta: int) -> int:
    """``ceil(log_Delta(n) / 10)``."""
    return math.ceil(math.log(n) / math.log(delta) / 10.0)


def tree_like_vertices(g: Digraph, delta: int | None = None) -> np.ndarray:
    """Sorted ids of vertices whose out-ball of depth ``ceil(hbar)`` is a tree."""
    if delta is None:
        delta = int(max(g.out_degrees.max(), g.in_degrees.max()))
    depth = hbar_depth(g.n, delta)
    return np.array([z for z in range(g.n) if ball_is_tree(g, z, depth)], dtype=np.int64)


# ---------------------------------------------------------------------------
# singularity


@dataclass
class SingularityResult:
    minimum: float
    rows: list  # (x, lambda_label, t, tv_value)


def default_lambda_set(seq, diracs) -> dict:
    n = seq.n
    out = {"uniform": uniform(n), "mu_in": mu_in(seq)}
    for z in diracs:
        out[f"dirac({int(z)})"] = dirac(n, int(z))
    return out


def singularity_diagnostic(
    k: TransitionKernel,
    alpha: float,
    t: int,
    lambda_set: dict,
    x_sample,
    tol: float = 1e-12,
) -> SingularityResult:
    """``min_{x, lam} ||P^t(x, .) - pi_{alpha,lam} P^t||`` over the given sets."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    labels = list(lambda_set)
    L = np.column_stack([lambda_set[a] for a in labels])
    pis = stationary_pagerank(k, WalkParams(alpha, L[:, 0]), tol, lam=L)
    moved = evolve(pis, k, t)
    xs = [int(x) for x in x_sample]
    starts = np.zeros((k.n, len(xs)))
    starts[xs, np.arange(len(xs))] = 1.0
    walk = evolve(starts, k, t)
    rows = []
    for j, lab in enumerate(labels):
        vals = tv_columns(walk, moved[:, j])
        for x, v in zip(xs, vals):
            rows.append((x, lab, t, float(v)))
    return SingularityResult(min(r[3] for r in rows), rows)
