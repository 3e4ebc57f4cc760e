# %% [markdown]
# # Max-weight-first exploration
#
# From a root z, reveal out-edges in order of decreasing walk probability
# and keep those with weight at least w_min = n^(-1 + eta^2).  Then ask how
# often a random walk stays on the explored tree.

# %%
import math

import numpy as np

from pagerank_mixing.degree_model import build_degree_sequence, entropic_time
from pagerank_mixing.graph_gen import sample_dcm
from pagerank_mixing.neighborhood_explorer import annulus, explore_out_tree, walk_in_tree_probability

rng = np.random.default_rng(5)
out = rng.integers(2, 5, size=50_000)
seq = build_degree_sequence(out, rng.permutation(out), "DCM")
g = sample_dcm(seq, seed=1)
_, T_ent = entropic_time(seq)
t = math.floor(0.8 * T_ent)

# %%
for eta in (0.1, 0.2, 0.3):
    tree = explore_out_tree(g, 0, t, eta)
    ring = annulus(tree, t)
    p = walk_in_tree_probability(g, tree, t)
    print(f"eta={eta}: nodes={tree.size} kappa={tree.kappa} (bound {tree.kappa_bound:.0f}) |A(t)|={len(ring)} P(stay)={p:.4f}")
