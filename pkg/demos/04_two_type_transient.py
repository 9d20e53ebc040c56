"""
Transient mean of the two-type switching model
==============================================

Type 1 particles die or turn into type 2 and back. The mean number of
type-1 particles under immigration is a renewal convolution against a
kernel with an atom at zero. We compare it with exp(A t) and with
simulation, and show how the literal double-integral reading drifts.
"""
import numpy as np

from mtbranch.arrivals import ConstantIntensity
from mtbranch.simulator import simulate_batch
from mtbranch.transient import (
    TwoTypeParams, displayed_density_mass, matrix_exp_mean, psi_kernel, transient_mean_n1, zeta_roots,
)

p = TwoTypeParams(mu1=1.0, mu2=1.0, p12=0.5, p21=0.5)
z1, z2 = zeta_roots(p)
k = psi_kernel(p)
print(f"zeta roots {z1:.4f}, {z2:.4f}")
print(f"kernel mass {k.total_mass():.6f} = 1/(1 - p12 p21) = {1 / (1 - 0.25):.6f}")
print(f"mass of the 1/zeta variant of the density: {displayed_density_mass(p):.6f}")
print(f"kernel transform at 1: exact {k.lt(1.0):.8f}, quadrature {k.lt_numeric(1.0):.8f}")

lam = ConstantIntensity(1.0)
grid = np.array([0.5, 1.0, 2.0, 4.0])
sims = simulate_batch(p.model(), grid, 20_000, seed=6, arrivals=lam)
print("\n   t  renewal   exp(At)   literal   MC mean +- se")
for g, t in enumerate(grid):
    x = sims[:, g, 0]
    print(f"{t:4.1f}  {transient_mean_n1(p, lam, t):.5f}  {matrix_exp_mean(p, lam, t)[0]:.5f}"
          f"  {transient_mean_n1(p, lam, t, 'paper-literal'):.5f}"
          f"   {x.mean():.4f} +- {x.std() / np.sqrt(x.size):.4f}")

# without switching the population is M/M/inf and the literal reading returns m(t)
q0 = TwoTypeParams(1.0, 1.0, 0.0, 0.5)
print(f"\np12 = 0, lambda = 2, t = 1: renewal {transient_mean_n1(q0, ConstantIntensity(2.0), 1.0):.5f}"
      f" (M/M/inf {2 * (1 - np.exp(-1)):.5f}), literal {transient_mean_n1(q0, ConstantIntensity(2.0), 1.0, 'paper-literal'):.5f}")
