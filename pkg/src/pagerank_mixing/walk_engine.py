"""Simple random walk and PageRank kernels on a realized digraph.

Distributions are row vectors.  ``mu P`` is computed as ``P.T @ mu`` with
the transpose stored once in CSR form, so one step costs ``O(m)``.  A 2-d
array of shape ``(n, k)`` is treated as ``k`` distributions side by side;
every column is computed with exactly the same operations as it would be
alone, so batching never changes a result.

The PageRank step ``nu <- (1 - alpha) nu P + alpha lambda`` applies the
teleport as a rank-one update; the dense kernel is never formed.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .degree_model import as_prob_vector
from .errors import AlphaZero, HorizonTooShort, InvariantViolation, LengthMismatch, NoConvergence
from .graph_gen import Digraph
from .rng import make_rng

BOUND_SLACK = 1e-12


class TransitionKernel:
    """Row-stochastic ``P`` with multi-edges merged into ``m(x, y) / d^+_x``.

    Rows of vertices without out-edges are identity rows.  ``threads > 1``
    splits the rows of ``P.T`` into fixed contiguous blocks; each output
    entry is still a single sequential sum, so the result is bit-identical
    for every thread count.
    """

    def __init__(self, P: sp.csr_matrix, threads: int = 1):
        P = sp.csr_matrix(P, dtype=np.float64)
        P.sum_duplicates()
        P.sort_indices()
        self.P = P
        self.PT = P.T.tocsr()
        self.PT.sort_indices()
        self.n = P.shape[0]
        self.threads = max(1, int(threads))
        self._blocks = None
        if self.threads > 1:
            bounds = np.linspace(0, self.n, self.threads + 1).astype(np.int64)
            self._blocks = [(a, b, self.PT[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            self._pool = ThreadPoolExecutor(max_workers=self.threads)

    def with_threads(self, threads: int) -> "TransitionKernel":
        return TransitionKernel(self.P, threads)

    def row(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.P.indptr[x], self.P.indptr[x + 1]
        return self.P.indices[lo:hi], self.P.data[lo:hi]

    def step(self, mu: np.ndarray) -> np.ndarray:
        """Return ``mu P`` (columnwise for 2-d input)."""
        if self._blocks is None:
            return self.PT @ mu
        out = np.empty_like(mu, dtype=np.float64)

        def work(block):
            a, b, M = block
            out[a:b] = M @ mu

        list(self._pool.map(work, self._blocks))
        return out

    def dense(self) -> np.ndarray:
        return self.P.toarray()


def srw_kernel(g: Digraph, threads: int = 1) -> TransitionKernel:
    """Simple random walk kernel ``P(x, y) = m(x, y) / d^+_x``; sinks stay put."""
    d = g.out_degrees
    rows = g.sources
    cols = g.targets
    vals = 1.0 / d[rows].astype(np.float64)
    sinks = np.flatnonzero(d == 0)
    if sinks.size:
        rows = np.concatenate([rows, sinks])
        cols = np.concatenate([cols, sinks])
        vals = np.concatenate([vals, np.ones(sinks.size)])
    P = sp.coo_matrix((vals, (rows, cols)), shape=(g.n, g.n)).tocsr()
    return TransitionKernel(P, threads)


def kernel_from_dense(M, threads: int = 1) -> TransitionKernel:
    M = np.asarray(M, dtype=np.float64)
    if not np.allclose(M.sum(axis=1), 1.0, atol=1e-12, rtol=0) or np.any(M < 0):
        raise ValueError("matrix is not row-stochastic")
    return TransitionKernel(sp.csr_matrix(M), threads)


@dataclass(frozen=True, eq=False)
class WalkParams:
    """Teleport probability ``alpha`` in [0, 1) and resampling law ``lam``."""

    alpha: float
    lam: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValueError(f"alpha must lie in [0, 1), got {self.alpha}")
        object.__setattr__(self, "lam", as_prob_vector(self.lam))


def _check_dist(mu, n):
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape[0] != n:
        raise LengthMismatch(f"distribution has length {mu.shape[0]}, kernel has n = {n}")
    return mu


def _teleport_target(lam: np.ndarray, like: np.ndarray) -> np.ndarray:
    return lam if like.ndim == 1 or lam.ndim == 2 else lam[:, None]


def evolve(mu, k: TransitionKernel, t: int, params: WalkParams | None = None, alpha_one: bool = False):
    """Return ``mu P^t`` or, with ``params``, ``mu P_{alpha,lam}^t``.

    ``alpha_one=True`` evaluates the degenerate kernel with ``alpha = 1``,
    for which every step lands on ``lam``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    nu = _check_dist(mu, k.n).copy()
    if params is None:
        for _ in range(t):
            nu = k.step(nu)
        return nu
    lam = _teleport_target(params.lam, nu)
    if alpha_one:
        return np.broadcast_to(lam, nu.shape).copy() if t > 0 else nu
    a = params.alpha
    for _ in range(t):
        nu = (1.0 - a) * k.step(nu) + a * lam
    return nu


def tv(mu, nu) -> float:
    """Total variation ``(1/2) sum |mu - nu|``."""
    mu = np.asarray(mu, dtype=np.float64)
    nu = np.asarray(nu, dtype=np.float64)
    if mu.shape != nu.shape:
        raise LengthMismatch(f"lengths differ: {mu.shape} vs {nu.shape}")
    return float(0.5 * np.abs(mu - nu).sum())


def column_sums(M: np.ndarray) -> np.ndarray:
    """Column sums, each taken over a contiguous copy so it matches the 1-d sum bit for bit."""
    if M.ndim == 1:
        return M.sum()
    return np.array([np.ascontiguousarray(M[:, j]).sum() for j in range(M.shape[1])])


def tv_columns(M: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """TV distance of every column of ``M`` to ``ref`` (1-d, or 2-d matched by column)."""
    if ref.ndim == 1:
        ref = ref[:, None]
    return 0.5 * column_sums(np.abs(M - ref))


# ---------------------------------------------------------------------------
# stationary distributions


def stationary_srw(k: TransitionKernel, tol: float = 1e-12, max_sweeps: int = 100_000, start=None) -> np.ndarray:
    """Stationary law of ``P`` by lazy power iteration.

    Each sweep replaces ``pi`` by the average of ``pi`` and ``pi P``, which
    has the same fixed points as ``P`` but is aperiodic.  Stops once
    ``||pi P - pi||_TV <= tol``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pi = np.full(k.n, 1.0 / k.n) if start is None else as_prob_vector(start).copy()
    res = math.inf
    for _ in range(max_sweeps):
        nxt = k.step(pi)
        res = tv(nxt, pi)
        if res <= tol:
            return pi
        pi = 0.5 * (pi + nxt)
        pi /= pi.sum()
    raise NoConvergence(f"residual {res:.3e} above {tol:.1e} after {max_sweeps} sweeps")


def truncation_level(alpha: float, tol: float) -> int:
    """Smallest ``K`` with ``(1 - alpha)^K <= tol``."""
    if alpha <= 0:
        raise AlphaZero("the PageRank series needs alpha > 0")
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    if alpha >= 1:
        return 0
    return max(0, math.ceil(math.log(tol) / math.log1p(-alpha)))


def stationary_pagerank(k: TransitionKernel, params: WalkParams, tol: float = 1e-13, terms: int | None = None, lam=None):
    """``pi_{alpha,lam} = alpha sum_k (1 - alpha)^k lam P^k``, summed to ``k = K``.

    ``K = truncation_level(alpha, tol)`` unless ``terms`` is given.  The
    partial sum has mass ``1 - (1 - alpha)^(K+1)`` and is renormalized,
    which leaves a TV error of at most ``(1 - alpha)^(K+1)``.  ``lam`` may
    be an ``(n, k)`` array to compute several laws at once.
    """
    a = params.alpha
    if a <= 0:
        raise AlphaZero("use stationary_srw for alpha = 0")
    K = truncation_level(a, tol) if terms is None else int(terms)
    lam = params.lam if lam is None else np.asarray(lam, dtype=np.float64)
    lam = _check_dist(lam, k.n)
    term = lam.copy()
    acc = a * term
    coef = a
    for _ in range(K):
        term = k.step(term)
        coef *= 1.0 - a
        acc += coef * term
    return acc / column_sums(acc)


# ---------------------------------------------------------------------------
# distance profiles


@dataclass
class DistanceProfile:
    """``D(t) = ||P^t_{alpha,lam}(x, .) - pi_{alpha,lam}||`` at listed times.

    ``values`` is the pointwise max over ``starts``; ``per_start`` keeps one
    row per start.
    """

    times: np.ndarray
    values: np.ndarray
    per_start: np.ndarray
    starts: list
    alpha: float
    lambda_label: str
    n: int
    seed: object = None
    T_ent: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def start_label(self) -> str:
        return str(self.starts[0]) if len(self.starts) == 1 else f"max over {len(self.starts)}"

    def value_at(self, t: int) -> float:
        i = np.flatnonzero(self.times == t)
        if not i.size:
            raise KeyError(t)
        return float(self.values[i[0]])

    def rows(self):
        for t, v in zip(self.times, self.values):
            yield {
                "t": int(t),
                "value": repr(float(v)),
                "alpha": repr(float(self.alpha)),
                "lambda_label": self.lambda_label,
                "start": self.start_label,
                "n": self.n,
                "seed": "" if self.seed is None else self.seed,
                "T_ent": "" if self.T_ent is None else repr(float(self.T_ent)),
            }

    def to_csv(self, path) -> None:
        write_profiles_csv([self], path)


PROFILE_COLUMNS = ["t", "value", "alpha", "lambda_label", "start", "n", "seed", "T_ent"]


def write_profiles_csv(profiles, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=PROFILE_COLUMNS, lineterminator="\n")
        w.writeheader()
        for p in profiles:
            for r in p.rows():
                w.writerow(r)


def check_universal_bound(values, times, alpha) -> None:
    """Raise unless ``D(t) <= (1 - alpha)^t`` (plus rounding slack) everywhere."""
    if alpha <= 0:
        return
    bound = (1.0 - alpha) ** np.asarray(times, dtype=np.float64)
    bad = np.asarray(values) > bound + BOUND_SLACK
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise InvariantViolation(f"D({times[i]}) = {values[i]!r} exceeds (1-alpha)^t = {bound[i]!r}")


def distance_profile(
    k: TransitionKernel,
    params: WalkParams,
    starts,
    times,
    pi=None,
    tol: float = 1e-13,
    seed=None,
    T_ent: float | None = None,
    batch: int = 32,
) -> DistanceProfile:
    """Exact distance-to-equilibrium profile by dense evolution of point masses.

    ``starts`` is a vertex id or a sequence of ids; ``times`` are
    non-negative integers.  ``pi`` is the target law; it is computed from
    ``params`` when omitted.
    """
    if isinstance(starts, (int, np.integer)):
        starts = [int(starts)]
    starts = [int(x) for x in starts]
    times = np.unique(np.asarray(list(times), dtype=np.int64))
    if times.size == 0 or times[0] < 0:
        raise ValueError("times must be a non-empty set of non-negative integers")
    if pi is None:
        pi = stationary_srw(k) if params.alpha == 0 else stationary_pagerank(k, params, tol)
    pi = _check_dist(pi, k.n)
    a = params.alpha
    lam = params.lam[:, None]
    per_start = np.empty((len(starts), times.size))
    for b0 in range(0, len(starts), batch):
        chunk = starts[b0:b0 + batch]
        nu = np.zeros((k.n, len(chunk)))
        nu[chunk, np.arange(len(chunk))] = 1.0
        j = 0
        for t in range(int(times[-1]) + 1):
            if t > 0:
                nu = k.step(nu) if a == 0 else (1.0 - a) * k.step(nu) + a * lam
            if t == times[j]:
                per_start[b0:b0 + len(chunk), j] = tv_columns(nu, pi)
                j += 1
    values = per_start.max(axis=0)
    check_universal_bound(values, times, a)
    return DistanceProfile(times, values, per_start, starts, a, params.label, k.n, seed, T_ent)


def mixing_time(profile: DistanceProfile, eps: float) -> int:
    """Least listed time with ``D(t) <= eps``."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    hit = np.flatnonzero(profile.values <= eps)
    if not hit.size:
        raise HorizonTooShort(f"profile stays above {eps} up to t = {int(profile.times[-1])}")
    return int(profile.times[hit[0]])


def mixing_time_bound(alpha: float, eps: float) -> int:
    """``ceil(log(1/eps) / -log(1 - alpha))``, the time at which ``(1-alpha)^t <= eps``."""
    return math.ceil(math.log(1 / eps) / -math.log1p(-alpha))


# ---------------------------------------------------------------------------
# walk/teleport identity


def teleport_identity_residuals(k: TransitionKernel, params: WalkParams, x: int, t_max: int, pi=None, tol: float = 1e-14):
    """Both sides of the identity for ``t = 0..t_max``.

    Left: ``||delta_x P_{alpha,lam}^t - pi||`` by evolution under the
    PageRank kernel.  Right: ``(1-alpha)^t ||delta_x P^t - pi P^t||`` by
    evolving both vectors under the plain walk.  Returns ``(left, right)``.
    """
    if not 0 < params.alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if pi is None:
        pi = stationary_pagerank(k, params, tol)
    a = params.alpha
    left, right = np.empty(t_max + 1), np.empty(t_max + 1)
    nu = np.zeros(k.n)
    nu[x] = 1.0
    walk = nu.copy()
    moved = np.array(pi, dtype=np.float64)
    for t in range(t_max + 1):
        if t > 0:
            nu = (1.0 - a) * k.step(nu) + a * params.lam
            walk = k.step(walk)
            moved = k.step(moved)
        left[t] = tv(nu, pi)
        right[t] = (1.0 - a) ** t * tv(walk, moved)
    return left, right


def verify_teleport_identity(k: TransitionKernel, params: WalkParams, x: int, t: int, pi=None) -> float:
    left, right = teleport_identity_residuals(k, params, x, t, pi)
    return float(abs(left[t] - right[t]))


# ---------------------------------------------------------------------------
# trajectory sampling


def _step_walkers(g: Digraph, pos: np.ndarray, rng: np.random.Generator):
    """One uniform out-edge step per walker; returns ``(next, edge_id)`` (``-1`` at sinks)."""
    d = g.out_degrees[pos]
    u = rng.random(pos.size)
    pick = g.indptr[pos] + np.minimum((u * d).astype(np.int64), np.maximum(d - 1, 0))
    nxt = pos.copy()
    moving = d > 0
    nxt[moving] = g.targets[pick[moving]]
    return nxt, np.where(moving, pick, -1)


def sample_walk_paths(g: Digraph, start: int, t: int, walks: int, seed: int, return_edges: bool = False):
    """``walks`` simple-random-walk trajectories of length ``t``; shape ``(walks, t+1)``.

    With ``return_edges`` also returns the ``(walks, t)`` array of edge ids used.
    """
    rng = make_rng(seed)
    out = np.empty((walks, t + 1), dtype=np.int64)
    edges = np.empty((walks, t), dtype=np.int64)
    out[:, 0] = start
    for s in range(1, t + 1):
        out[:, s], edges[:, s - 1] = _step_walkers(g, out[:, s - 1], rng)
    return (out, edges) if return_edges else out


def sample_pagerank_walks(g: Digraph, params: WalkParams, start: int, t: int, walks: int, seed: int):
    """Run the PageRank surf for ``t`` steps.

    Returns ``(positions, first_teleport)``; ``first_teleport[i]`` is the
    step (1-based) of the first teleport of walker ``i``, or ``t + 1`` if it
    never teleported.
    """
    rng = make_rng(seed)
    cdf = np.cumsum(params.lam)
    cdf[-1] = 1.0
    pos = np.full(walks, start, dtype=np.int64)
    first = np.full(walks, t + 1, dtype=np.int64)
    for s in range(1, t + 1):
        jump = rng.random(walks) < params.alpha
        pos, _ = _step_walkers(g, pos, rng)
        nj = int(jump.sum())
        if nj:
            pos[jump] = np.searchsorted(cdf, rng.random(nj), side="right")
            first[jump & (first > t)] = s
    return pos, first
