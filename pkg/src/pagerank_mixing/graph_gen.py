"""Random digraphs from the directed and out-configuration models.

Graphs are stored in compressed-row form: the out-neighbours of vertex
``x`` are ``targets[indptr[x]:indptr[x + 1]]``, listed with multiplicity and
in tail order.  Edge ``e`` is the ``e``-th entry of ``targets``; its source
is the row containing it.  Vertices are ``0 .. n-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .degree_model import DegreeSequence, Model, _as_model
from .errors import DegreeExceedsN, RetryLimitExceeded
from .rng import make_rng, substream_key


@dataclass(frozen=True, eq=False)
class Digraph:
    n: int
    indptr: np.ndarray
    targets: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.indptr.shape != (self.n + 1,) or self.indptr[0] != 0:
            raise ValueError("indptr must have length n + 1 and start at 0")
        if self.indptr[-1] != self.targets.size:
            raise ValueError("indptr[-1] must equal the number of edges")
        if self.targets.size and (self.targets.min() < 0 or self.targets.max() >= self.n):
            raise ValueError("edge target out of range")
        self.indptr.setflags(write=False)
        self.targets.setflags(write=False)

    @classmethod
    def from_adjacency(cls, adjacency, provenance=None) -> "Digraph":
        """Build from a list of out-neighbour lists (0-based)."""
        counts = np.array([len(a) for a in adjacency], dtype=np.int64)
        indptr = np.zeros(len(adjacency) + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        targets = np.fromiter((int(y) for a in adjacency for y in a), dtype=np.int64, count=int(counts.sum()))
        return cls(len(adjacency), indptr, targets, dict(provenance or {}))

    @property
    def m(self) -> int:
        return int(self.targets.size)

    @cached_property
    def out_degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @cached_property
    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.targets, minlength=self.n)

    @cached_property
    def sources(self) -> np.ndarray:
        """Source vertex of every edge, aligned with ``targets``."""
        return np.repeat(np.arange(self.n, dtype=np.int64), self.out_degrees)

    def out_neighbors(self, x: int) -> np.ndarray:
        return self.targets[self.indptr[x]:self.indptr[x + 1]]

    @property
    def out_adjacency(self) -> list[np.ndarray]:
        return [self.out_neighbors(x) for x in range(self.n)]

    @cached_property
    def _reverse(self):
        order = np.argsort(self.targets, kind="stable")
        rev_ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(self.in_degrees, out=rev_ptr[1:])
        return rev_ptr, order

    def in_edges(self, y: int) -> np.ndarray:
        """Edge ids pointing into ``y``, in increasing id order."""
        rev_ptr, order = self._reverse
        return order[rev_ptr[y]:rev_ptr[y + 1]]

    def in_neighbors(self, y: int) -> np.ndarray:
        return self.sources[self.in_edges(y)]

    @property
    def reverse_index(self) -> list[np.ndarray]:
        return [self.in_neighbors(y) for y in range(self.n)]

    def same_edges(self, other: "Digraph") -> bool:
        return (
            self.n == other.n
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.targets, other.targets)
        )


def _graph_from_targets(seq: DegreeSequence, targets, seed: int) -> Digraph:
    indptr = np.zeros(seq.n + 1, dtype=np.int64)
    np.cumsum(seq.out_degrees, out=indptr[1:])
    prov = {"model": seq.model.value, "seed": int(seed), "sequence": seq.digest()}
    return Digraph(seq.n, indptr, np.ascontiguousarray(targets, dtype=np.int64), prov)


def dcm_matching(seq: DegreeSequence, seed: int) -> np.ndarray:
    """Uniform bijection from tails to heads.

    Tails are numbered vertex by vertex (``d^+_0`` tails of vertex 0 first),
    heads likewise with ``d^-``.  Entry ``i`` of the result is the head
    matched to tail ``i``.  A single Fisher-Yates shuffle (numpy's
    ``Generator.permutation``) makes every one of the ``m!`` bijections
    equally likely.
    """
    if seq.model is not Model.DCM:
        raise ValueError("dcm_matching needs a DCM degree sequence")
    return make_rng(seed).permutation(seq.m)


def sample_dcm(seq: DegreeSequence, seed: int) -> Digraph:
    """Directed configuration model: self-loops and multi-edges allowed."""
    heads_owner = np.repeat(np.arange(seq.n, dtype=np.int64), seq.in_degrees)
    return _graph_from_targets(seq, heads_owner[dcm_matching(seq, seed)], seed)


def _rows_with_duplicates(rows: np.ndarray, vals: np.ndarray) -> np.ndarray:
    order = np.lexsort((vals, rows))
    r, v = rows[order], vals[order]
    dup = (r[1:] == r[:-1]) & (v[1:] == v[:-1])
    return np.unique(r[1:][dup])


def distinct_draws(rng: np.random.Generator, n: int, counts: np.ndarray) -> np.ndarray:
    """For each row ``i`` draw ``counts[i]`` distinct values of ``range(n)``.

    Rows are drawn with replacement and redrawn whole until free of
    repeats, which leaves each row uniform over ordered distinct tuples (and
    so its value set uniform over ``counts[i]``-subsets).  Rows are
    concatenated in order.
    """
    counts = np.asarray(counts, dtype=np.int64)
    rows = np.repeat(np.arange(counts.size, dtype=np.int64), counts)
    vals = rng.integers(0, n, size=rows.size)
    bad = _rows_with_duplicates(rows, vals)
    while bad.size:
        mask = np.isin(rows, bad)
        vals[mask] = rng.integers(0, n, size=int(mask.sum()))
        bad = _rows_with_duplicates(rows[mask], vals[mask])
    return vals


def sample_ocm(seq: DegreeSequence, seed: int) -> Digraph:
    """Out-configuration model: each row is a uniform ``d^+_x``-subset of the vertices."""
    if seq.model is not Model.OCM:
        raise ValueError("sample_ocm needs an OCM degree sequence")
    if seq.out_degrees.max() > seq.n:
        raise DegreeExceedsN(f"out-degree {int(seq.out_degrees.max())} exceeds n = {seq.n}")
    targets = distinct_draws(make_rng(seed), seq.n, seq.out_degrees)
    return _graph_from_targets(seq, targets, seed)


def sample_graph(seq: DegreeSequence, seed: int) -> Digraph:
    return sample_dcm(seq, seed) if seq.model is Model.DCM else sample_ocm(seq, seed)


@dataclass(frozen=True)
class SimpleReport:
    is_simple: bool
    self_loops: int
    multi_edge_pairs: int


def inspect_simple(g: Digraph) -> SimpleReport:
    """Count self-loop edges and ordered pairs joined by two or more edges."""
    loops = int(np.count_nonzero(g.sources == g.targets))
    keys = g.sources * np.int64(g.n) + g.targets
    _, mult = np.unique(keys, return_counts=True)
    multi = int(np.count_nonzero(mult > 1))
    return SimpleReport(loops == 0 and multi == 0, loops, multi)


def sample_simple(seq: DegreeSequence, seed: int, max_tries: int = 1000) -> Digraph:
    """Rejection-sample until the graph has no self-loops and no multi-edges.

    Attempt ``k`` uses the substream key of ``(seed, k)``; the key that
    succeeded is recorded as the graph's seed.
    """
    for attempt in range(max_tries):
        key = substream_key(seed, attempt)
        g = sample_graph(seq, key)
        if inspect_simple(g).is_simple:
            return g
    raise RetryLimitExceeded(f"no simple graph after {max_tries} attempts")


# ---------------------------------------------------------------------------
# serialization: "n m model seed" header, then one line of out-neighbours per vertex


def write_graph(g: Digraph, path) -> None:
    model = g.provenance.get("model", "NA")
    seed = g.provenance.get("seed", "NA")
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.m} {model} {seed}\n")
        for x in range(g.n):
            fh.write(" ".join(map(str, g.out_neighbors(x).tolist())) + "\n")


def read_graph(path) -> Digraph:
    lines = Path(path).read_text().split("\n")
    n_s, m_s, model, seed = lines[0].split()
    n, m = int(n_s), int(m_s)
    adjacency = [[int(v) for v in ln.split()] for ln in lines[1:n + 1]]
    if len(adjacency) != n:
        raise ValueError(f"{path}: expected {n} adjacency lines, found {len(adjacency)}")
    prov = {"model": model, "seed": int(seed) if seed != "NA" else None}
    g = Digraph.from_adjacency(adjacency, prov)
    if g.m != m:
        raise ValueError(f"{path}: header says m = {m}, adjacency has {g.m} edges")
    return g
