"""
Which limit, and along which direction
======================================

The limit of the renormalized population depends on how the growth rate
rho compares with the growth of the arrival stream. This script prints
the descriptor for each case and checks two of them by simulation.
"""
import numpy as np
from scipy import stats

from mtbranch import model as M
from mtbranch.arrivals import ConstantIntensity, ExponentialIntensity, GppParams
from mtbranch.limits import limit_descriptor, nu_lt
from mtbranch.simulator import simulate_batch
from mtbranch.transforms import empirical_lt

sup, crit, sub = M.supercritical_pair(), M.critical_pair(), M.symmetric_pair()
cases = [
    ("supercritical, lambda = e^t", sup, ExponentialIntensity(1.0, 1.0)),
    ("supercritical, lambda = e^(t/2)", sup, ExponentialIntensity(1.0, 0.5)),
    ("supercritical, constant lambda", sup, ConstantIntensity(1.0)),
    ("critical, constant lambda", crit, ConstantIntensity(1.0)),
    ("subcritical, constant lambda", sub, ConstantIntensity(1.0)),
    ("supercritical, GPP a lam = 1", sup, GppParams(1.0, 1.0, 1.0)),
    ("supercritical, GPP a lam = 1/2", sup, GppParams(0.5, 1.0, 1.0)),
    ("supercritical, GPP a lam = 1/4", sup, GppParams(0.25, 1.0, 1.0)),
]
for label, mdl, arr in cases:
    d = limit_descriptor(mdl, arr)
    print(f"{label:34s} {d.case:17s} g={d.normalization:6s} rate={d.rate:<5g} "
          f"direction={np.round(d.direction, 4)} law={d.law}")

# critical pair: N_1(t) / t approaches Gamma(2, rate 4)
d = limit_descriptor(crit, ConstantIntensity(1.0))
t = 100.0
x = simulate_batch(crit, [t], 4000, seed=4, arrivals=ConstantIntensity(1.0))[:, 0, 0] / t
gam = stats.gamma(d.params["shape"], scale=d.params["scale"])
print(f"\ncritical: mean N_1/t = {x.mean():.4f} (limit {gam.mean():.4f}),"
      f" P(N_1/t <= 0.5) = {np.mean(x <= 0.5):.4f} (limit {gam.cdf(0.5):.4f})")

# subcritical pair: N(t) settles to a stationary law known through its transform
s = np.array([-0.5, -0.5])
y = simulate_batch(sub, [40.0], 10_000, seed=5, arrivals=ConstantIntensity(1.0))[:, 0, :]
est, se = empirical_lt(y, s)
print(f"subcritical: stationary transform {nu_lt(sub, 1.0, s):.5f}, MC at t=40 {est:.5f} +- {se:.5f}")
