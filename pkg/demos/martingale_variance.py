# %% [markdown]
# # The in-tree martingale
#
# M_t = n X_t(mu_in) on the marked Galton-Watson in-tree has orthogonal
# increments with E[Delta_t^2] = C (1 - rho) rho^t.  A Monte Carlo run
# against that law, for a non-regular sequence in both graph models.

# %%
import numpy as np

from pagerank_mixing.branching_martingale import sample_forest, variance_law_check
from pagerank_mixing.degree_model import build_degree_sequence, rho_and_C

rng = np.random.default_rng(3)
out = rng.integers(2, 6, size=500)
for seq in (build_degree_sequence(out, rng.permutation(out), "DCM"), build_degree_sequence(out, None, "OCM")):
    rho, C = rho_and_C(seq)
    print(f"{seq.model.value}: rho={rho:.4f}  C={C:.4f}")
    for rec in variance_law_check(seq, [0, 1, 2, 3], 50_000, seed=11):
        print(f"  t={rec.t}  E[Delta^2]={rec.estimate:.5f} +- {rec.std_error:.5f}  target={rec.target:.5f}  z={rec.z_score:+.2f}")

# %% [markdown]
# The mean of M_t stays at 1 at every depth.

# %%
f = sample_forest(seq, 6, 50_000, seed=12)
print(np.round(f.M.mean(axis=0), 4))
