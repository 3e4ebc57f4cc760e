# %% [markdown]
# # Cutoff, then teleportation
#
# The simple random walk on a sparse random digraph mixes abruptly around
# the entropic time T_ent = log n / H.  Adding a teleport with probability
# alpha damps the profile by (1 - alpha)^t.  Where alpha * T_ent lands decides
# which effect wins.

# %%
import math

import numpy as np

from pagerank_mixing import WalkParams, distance_profile, entropic_time, regular_sequence, sample_dcm, srw_kernel, uniform
from pagerank_mixing.degree_model import limit_profile

n, d = 200_000, 3
seq = regular_sequence(n, d)
g = sample_dcm(seq, seed=7)
k = srw_kernel(g)
H, T_ent = entropic_time(seq)
print(f"n={n}  H={H:.4f}  T_ent={T_ent:.3f}")

# %%
starts = list(range(10))
times = range(math.ceil(2 * T_ent) + 1)
plain = distance_profile(k, WalkParams(0.0, uniform(n)), starts, times)
for t, v in zip(plain.times, plain.values):
    print(f"t={t:2d}  t/T_ent={t / T_ent:4.2f}  D={v:.4f}")

# %% [markdown]
# Now alpha = gamma / T_ent for a few gamma.  At s = alpha * t the finite-n
# profile should sit near exp(-s) for s < gamma and drop towards 0 after.

# %%
for gamma in (0.5, 1.0, 3.0):
    alpha = gamma / T_ent
    prof = distance_profile(k, WalkParams(alpha, uniform(n)), starts, times)
    row = []
    for s in (0.25, 0.5, 0.75, 1.25, 1.5):
        t = round(s / alpha)
        if t <= times[-1] and s != gamma:
            row.append(f"s={s}: {prof.value_at(t):.3f} (limit {limit_profile(gamma, s):.3f})")
    print(f"gamma={gamma}: " + "; ".join(row))
