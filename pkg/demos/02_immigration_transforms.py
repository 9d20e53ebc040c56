"""
Laplace transforms under immigration
====================================

The transform of a single subtree comes from the backward
generating-function ODE. Immigration integrates it against the arrival
intensity (Poisson) or composes it with a negative binomial count
(generalized Polya arrivals).
"""
import numpy as np

from mtbranch import model as M
from mtbranch.arrivals import ConstantIntensity, GppParams
from mtbranch.simulator import simulate_batch
from mtbranch.transforms import empirical_lt, lt_gpp, lt_gpp_compound, lt_nhpp, lt_nhpp_forms, phi_o

# pure death: phi_o has the closed form 1 + e^-t (e^s - 1)
t = np.log(2.0)
print(f"phi_o(s=-1, t=ln 2) = {phi_o(M.pure_death(), [-1.0], t):.6f}"
      f"  closed form {1 + np.exp(-t) * (np.exp(-1) - 1):.6f}")

# M/M/inf: the population is Poisson with mean lam (1 - e^-t) / mu
lam = ConstantIntensity(2.0)
val = lt_nhpp(M.pure_death(), lam, [-1.0], 1.0)
closed = np.exp(2 * (1 - np.exp(-1)) * (np.exp(-1) - 1))
print(f"M/M/inf transform at s=-1, t=1: {val:.6f}  closed form {closed:.6f}")

# both integral forms, critical pair
crit = M.critical_pair()
s = np.array([-0.5, -0.5])
print("two integral forms:", lt_nhpp_forms(crit, ConstantIntensity(1.0), s, 2.0))

x = simulate_batch(crit, [2.0], 20_000, seed=3, arrivals=ConstantIntensity(1.0))[:, 0, :]
est, se = empirical_lt(x, s)
print(f"critical pair with Poisson arrivals: exact {lt_nhpp(crit, ConstantIntensity(1.0), s, 2.0):.5f}"
      f"  MC {est:.5f} +- {se:.5f}")

# generalized Polya arrivals: direct and compound forms agree
params = GppParams(a=1.0, b=1.0, lam=1.0)
print(f"GPP transform {lt_gpp(crit, params, s, 1.5):.8f}  compound {lt_gpp_compound(crit, params, s, 1.5):.8f}")
