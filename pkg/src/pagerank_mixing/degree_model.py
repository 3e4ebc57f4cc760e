"""Degree sequences and the deterministic constants attached to them.

A degree sequence fixes the random-graph ensemble: for the directed
configuration model (DCM) both in- and out-degrees are given, for the
out-configuration model (OCM) only out-degrees.  From it we derive the
in-degree distribution ``mu_in``, the entropy ``H`` and the entropic time
``T_ent = log(n) / H``, the branching constants ``rho`` and ``C``, and the
limit profiles of the PageRank distance to equilibrium.
"""

from __future__ import annotations

import enum
import hashlib
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DiscontinuityPoint, MinDegree, MissingInDegrees, SumMismatch

PROB_TOL = 1e-12


class Model(str, enum.Enum):
    DCM = "DCM"
    OCM = "OCM"


def _as_model(model) -> Model:
    if isinstance(model, Model):
        return model
    try:
        return Model(str(model).upper())
    except ValueError:
        raise ValueError(f"unknown model {model!r}; expected 'DCM' or 'OCM'") from None


@dataclass(frozen=True, eq=False)
class DegreeSequence:
    """Validated degree data.  Build it with :func:`build_degree_sequence`."""

    out_degrees: np.ndarray
    in_degrees: np.ndarray | None
    model: Model

    @property
    def n(self) -> int:
        return int(self.out_degrees.size)

    @property
    def m(self) -> int:
        return int(self.out_degrees.sum())

    @property
    def delta(self) -> int:
        if self.in_degrees is None:
            return int(self.out_degrees.max())
        return int(max(self.out_degrees.max(), self.in_degrees.max()))

    @property
    def mean_degree(self) -> float:
        return self.m / self.n

    def digest(self) -> str:
        """Short SHA-256 of the model and both degree arrays."""
        h = hashlib.sha256(self.model.value.encode())
        h.update(self.out_degrees.astype("<i8").tobytes())
        if self.in_degrees is not None:
            h.update(self.in_degrees.astype("<i8").tobytes())
        return h.hexdigest()[:16]


def build_degree_sequence(out, in_=None, model="DCM") -> DegreeSequence:
    """Validate raw degree data.

    Parameters
    ----------
    out : sequence of int
        Out-degrees ``d^+``.
    in_ : sequence of int, optional
        In-degrees ``d^-``; required for DCM, ignored-but-rejected for OCM.
    model : {"DCM", "OCM"}

    Raises
    ------
    MissingInDegrees
        DCM without in-degrees.
    SumMismatch
        DCM with ``sum(out) != sum(in)``.
    MinDegree
        Any relevant degree below 2.
    """
    model = _as_model(model)
    out_arr = np.asarray(out, dtype=np.int64).ravel()
    if out_arr.size == 0:
        raise ValueError("degree sequence is empty")
    in_arr = None
    if model is Model.DCM:
        if in_ is None:
            raise MissingInDegrees("DCM needs an in-degree sequence")
        in_arr = np.asarray(in_, dtype=np.int64).ravel()
        if in_arr.size != out_arr.size:
            raise ValueError(
                f"in/out sequences differ in length ({in_arr.size} != {out_arr.size})"
            )
    elif in_ is not None:
        raise ValueError("OCM takes out-degrees only")

    if in_arr is not None and int(out_arr.sum()) != int(in_arr.sum()):
        raise SumMismatch(f"sum of out-degrees {int(out_arr.sum())} != sum of in-degrees {int(in_arr.sum())}")
    low = out_arr.min() if in_arr is None else min(out_arr.min(), in_arr.min())
    if low < 2:
        raise MinDegree(f"minimum degree is {int(low)}, need at least 2")

    out_arr.setflags(write=False)
    if in_arr is not None:
        in_arr.setflags(write=False)
    return DegreeSequence(out_arr, in_arr, model)


def regular_sequence(n: int, d: int, model="DCM") -> DegreeSequence:
    model = _as_model(model)
    out = np.full(n, d, dtype=np.int64)
    return build_degree_sequence(out, out if model is Model.DCM else None, model)


# ---------------------------------------------------------------------------
# probability vectors


def as_prob_vector(weights, tol: float = PROB_TOL) -> np.ndarray:
    """Return ``weights`` as a float64 array after checking it is a distribution."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("a probability vector must be a non-empty 1-d array")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("probability vector has negative or non-finite entries")
    total = float(w.sum())
    if abs(total - 1.0) > tol:
        raise ValueError(f"probability vector sums to {total!r}, not 1 (tol {tol})")
    return w


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def dirac(n: int, z: int) -> np.ndarray:
    v = np.zeros(n)
    v[z] = 1.0
    return v


def mu_in(seq: DegreeSequence) -> np.ndarray:
    """In-degree distribution: ``d^-_x / m`` for DCM, uniform for OCM."""
    if seq.model is Model.OCM:
        return uniform(seq.n)
    return seq.in_degrees / float(seq.m)


def entropic_time(seq: DegreeSequence) -> tuple[float, float]:
    """Return ``(H, T_ent)`` with ``H = sum_x mu_in(x) log d^+_x``."""
    H = float(np.dot(mu_in(seq), np.log(seq.out_degrees)))
    return H, math.log(seq.n) / H


# ---------------------------------------------------------------------------
# widespread measures


@dataclass(frozen=True)
class WidespreadReport:
    max_mass: float
    max_bound: float
    ell2_statistic: float
    pass_i: bool
    pass_ii: bool
    delta: float
    c1: float
    c2: float

    @property
    def widespread(self) -> bool:
        return self.pass_i and self.pass_ii


def widespread_report(lam, delta: float = 0.1, c1: float = 1.0, c2: float = 4.0) -> WidespreadReport:
    """Evaluate both widespread conditions at the current ``n``.

    Condition (i) is ``max lam <= c1 * n**(-1/2 - delta)`` and condition (ii)
    is ``(1/n) sum_j (1 - n lam_j)**2 <= c2``.  The constants stand in for
    the unspecified ``O(.)`` constants of the asymptotic definition.
    """
    lam = as_prob_vector(lam)
    if not 0 < delta <= 0.5:
        raise ValueError("delta must lie in (0, 1/2]")
    if c1 <= 0 or c2 < 0:
        raise ValueError("constants must be positive")
    n = lam.size
    max_mass = float(lam.max())
    max_bound = c1 * n ** (-0.5 - delta)
    stat = float(np.mean((1.0 - n * lam) ** 2))
    return WidespreadReport(
        max_mass=max_mass,
        max_bound=max_bound,
        ell2_statistic=stat,
        pass_i=max_mass <= max_bound,
        pass_ii=stat <= c2,
        delta=delta,
        c1=c1,
        c2=c2,
    )


# ---------------------------------------------------------------------------
# limit profiles


def theta(s: float) -> float:
    """Step function: 1 below 1, 0 above 1."""
    if s == 1:
        raise DiscontinuityPoint("theta is undefined at s = 1")
    return 1.0 if s < 1 else 0.0


def limit_profile(gamma: float, s: float) -> float:
    """Limit of the rescaled distance to equilibrium.

    ``gamma = 0`` gives the cutoff step ``theta(s)`` (``s`` in units of
    ``T_ent``); finite positive ``gamma`` gives ``exp(-s) theta(s / gamma)``
    and ``gamma = inf`` gives ``exp(-s)`` (``s`` in units of ``1/alpha``).
    """
    if s <= 0:
        raise ValueError("s must be positive")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if gamma == 0:
        return theta(s)
    if math.isinf(gamma):
        return math.exp(-s)
    if s == gamma:
        raise DiscontinuityPoint(f"profile jumps at s = gamma = {gamma}")
    return math.exp(-s) * theta(s / gamma)


def limit_mixing_time(gamma: float, eps: float) -> tuple[float, str]:
    """Limit of the eps-mixing time together with its unit.

    Returns ``(value, "T_ent")`` for ``gamma < inf`` and ``(value, "1/alpha")``
    for ``gamma = inf``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    if math.isinf(gamma):
        return math.log(1 / eps), "1/alpha"
    if gamma == 0 or eps < math.exp(-gamma):
        return 1.0, "T_ent"
    return math.log(1 / eps) / gamma, "T_ent"


# ---------------------------------------------------------------------------
# branching constants


def rho_and_C(seq: DegreeSequence) -> tuple[float, float]:
    """Constants of the in-tree martingale: ``E[(M_t - M_inf)^2] = C rho^t``."""
    mu = mu_in(seq)
    d_out = seq.out_degrees.astype(np.float64)
    rho = float(np.dot(mu, 1.0 / d_out))
    if seq.model is Model.DCM:
        d_in = seq.in_degrees.astype(np.float64)
        m = float(seq.m)
        c1 = float(np.sum((d_in - d_out) ** 2 / (m * d_out)))
        C = seq.n / (m * (1.0 - rho)) * c1
    else:
        C = (rho - 1.0 / seq.n) / (1.0 - rho)
    return rho, C


def gamma_lambda(lam, seq: DegreeSequence) -> float:
    """``(n/2) sum_j (lam_j - mu_in_j)^2``."""
    lam = as_prob_vector(lam)
    if lam.size != seq.n:
        raise ValueError("lambda and degree sequence differ in length")
    return 0.5 * seq.n * float(np.sum((lam - mu_in(seq)) ** 2))


# ---------------------------------------------------------------------------
# text format: header "model=DCM|OCM", then "out[,in]" per vertex


def save_degree_sequence(seq: DegreeSequence, path) -> None:
    lines = [f"model={seq.model.value}"]
    if seq.in_degrees is None:
        lines += [str(int(d)) for d in seq.out_degrees]
    else:
        lines += [f"{int(a)},{int(b)}" for a, b in zip(seq.out_degrees, seq.in_degrees)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_degree_sequence(path) -> DegreeSequence:
    rows = [ln.strip() for ln in Path(path).read_text().splitlines()]
    rows = [r for r in rows if r and not r.startswith("#")]
    if not rows or not rows[0].lower().startswith("model="):
        raise ValueError(f"{path}: first line must be 'model=DCM' or 'model=OCM'")
    model = _as_model(rows[0].split("=", 1)[1])
    out, inn = [], []
    for r in rows[1:]:
        parts = [p.strip() for p in r.split(",")]
        out.append(int(parts[0]))
        if len(parts) > 1:
            inn.append(int(parts[1]))
    if inn and len(inn) != len(out):
        raise ValueError(f"{path}: some lines lack an in-degree")
    return build_degree_sequence(out, inn or None, model)
