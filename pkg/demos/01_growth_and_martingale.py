"""
Mean growth and the Perron martingale
=====================================

A two-type process where type 1 splits into (1, 1) or dies and type 2
turns back into type 1. We compare the Monte Carlo mean against exp(A t)
and watch the martingale <u, N(t)> exp(-rho t) settle.
"""
import numpy as np

from mtbranch import model as M
from mtbranch.simulator import sample_W_batch, simulate_batch
from mtbranch.spectral import build_mean_matrix, critical_constants, matrix_exp, perron

mdl = M.supercritical_pair()
A = build_mean_matrix(mdl)
pd = perron(A)
print("A =\n", A)
print(f"rho = {pd.rho:.4f}  regime = {pd.regime}")
print("u (right, sums to 1) =", pd.u, " v (left, <u, v> = 1) =", pd.v)

# expected counts against simulation
grid = np.array([0.5, 1.0, 2.0, 4.0])
sims = simulate_batch(mdl, grid, 20_000, seed=1)
print("\n   t   E[N_1] exact   MC mean    +- se")
for g, t in enumerate(grid):
    exact = matrix_exp(A, t)[:, 0]
    x = sims[:, g, 0]
    print(f"{t:4.1f}   {exact[0]:10.4f}   {x.mean():8.4f}   {x.std() / np.sqrt(x.size):.4f}")

# the martingale keeps its mean u_1
mart = sims @ pd.u * np.exp(-pd.rho * grid)[None, :]
print("\nmean of <u, N(t)> exp(-rho t):", np.round(mart.mean(axis=0), 4), " u_1 =", pd.u[0])

# its limit W has an atom at zero (extinction) and mean u_1
w = sample_W_batch(mdl, pd, 5000, seed=2)
print(f"W: mean {w.mean():.4f}, P(W = 0) {np.mean(w == 0):.4f} (extinction probability 1/3)")

# the critical pair has rho = 0 and the constants behind its gamma limit
crit = M.critical_pair()
cc = critical_constants(crit, perron(build_mean_matrix(crit)))
print(f"\ncritical pair: Q = {cc.Q:.4f}, beta = {cc.beta:.4f}, c = {cc.c:.4f}")
