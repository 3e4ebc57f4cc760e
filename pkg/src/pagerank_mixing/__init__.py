"""PageRank walks on sparse random digraphs: generation, exact evolution and mixing diagnostics."""

__version__ = "0.1.0"

from .degree_model import (
    DegreeSequence,
    Model,
    build_degree_sequence,
    dirac,
    entropic_time,
    gamma_lambda,
    limit_mixing_time,
    limit_profile,
    mu_in,
    regular_sequence,
    rho_and_C,
    uniform,
    widespread_report,
)
from .graph_gen import Digraph, inspect_simple, sample_dcm, sample_graph, sample_ocm
from .walk_engine import (
    WalkParams,
    distance_profile,
    evolve,
    mixing_time,
    srw_kernel,
    stationary_pagerank,
    stationary_srw,
    tv,
)
