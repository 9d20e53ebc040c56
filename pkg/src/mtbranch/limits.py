"""Long-time limits of the renormalized population under immigration.

Each limit is summarized by a :class:`LimitDescriptor` giving the
normalization ``g(t)``, the direction of the limiting vector and its scalar
law. The GPP supercritical limit has no closed form; it is exposed through its
Laplace exponent, computed from a sample of the martingale limit ``W``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import gammainc

from .arrivals import ArrivalSpec, GppParams, NoArrivals
from .model import BranchingModel
from .spectral import (
    CRITICAL,
    SUBCRITICAL,
    PerronData,
    build_mean_matrix,
    classify,
    critical_constants,
    perron,
    resolvent_direction,
)
from .transforms import BackwardLT, integrate


class NoLimitError(ValueError):
    """No limit theorem covers the given regime and arrival growth."""


NORMALIZATIONS = {
    "1": lambda t, r: 1.0,
    "exp": lambda t, r: np.exp(r * t),
    "t*exp": lambda t, r: t * np.exp(r * t),
    "t": lambda t, r: t,
}


@dataclass(frozen=True)
class LimitDescriptor:
    """``N(t) / g(t)`` converges to ``Z * direction`` with ``Z`` following ``law``.

    ``normalization`` is one of ``"1"``, ``"exp"`` (``exp(rate t)``),
    ``"t*exp"`` (``t exp(rate t)``) or ``"t"``. For point masses ``Z = 1``.
    Gamma parameters are stored as ``shape`` and ``scale``.
    """

    case: str
    normalization: str
    rate: float
    direction: np.ndarray
    law: str
    params: dict = field(default_factory=dict)

    def g(self, t):
        return NORMALIZATIONS[self.normalization](np.asarray(t, dtype=float), self.rate)

    def scalar_mean(self) -> float:
        p = self.params
        if self.law == "point-mass":
            return 1.0
        if self.law == "gamma":
            return p["shape"] * p["scale"]
        if self.law == "compound-poisson-integral":
            return p["E_W"] * p["discounted_mass"]
        if self.law == "subordinated-levy":
            return p["shape"] * p["E_W"] * p["alpha"] * p["rho"] / (p["rho"] - p["growth"])
        if self.law == "general-nu":
            return 1.0
        raise ValueError(self.law)

    def mean(self) -> np.ndarray:
        """Mean vector of the limit."""
        return self.scalar_mean() * self.direction

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "normalization": self.normalization,
            "rate": self.rate,
            "direction": [float(x) for x in self.direction],
            "law": self.law,
            "params": {k: float(v) for k, v in self.params.items()},
        }


def _perron_of(model: BranchingModel, pd: PerronData | None) -> PerronData:
    return pd if pd is not None else perron(build_mean_matrix(model))


def table_direction(kind: str, comparison: str, pd: PerronData, xi: float) -> np.ndarray:
    """Support direction of the limit by arrival kind and ``rho`` vs ``xi``.

    ``kind`` is ``"nhpp"`` (``xi = delta``) or ``"gpp"`` (``xi = a lam``);
    ``comparison`` reads "rho is less/equal/greater than xi".
    """
    if comparison == "less":
        return resolvent_direction(pd.A, xi, 1.0, rho=pd.rho)
    if comparison == "equal":
        return pd.u.copy() if kind == "nhpp" else pd.v.copy()
    if comparison == "greater":
        return pd.v.copy()
    raise ValueError(comparison)


def limit_descriptor(model: BranchingModel, arrivals: ArrivalSpec, pd: PerronData | None = None,
                     E_W: float | None = None) -> LimitDescriptor:
    """Select the limit theorem matching the regime and the arrival growth.

    Poisson intensities are read as ``lambda(t) ~ lambda_inf exp(delta t)``;
    GPP arrivals compare ``rho`` with ``a lam``. ``E_W`` defaults to ``u[0]``.
    """
    pd = _perron_of(model, pd)
    rho = pd.rho
    if E_W is None:
        E_W = float(pd.u[0])
    if isinstance(arrivals, NoArrivals):
        raise NoLimitError("no immigration")
    if isinstance(arrivals, GppParams):
        return gpp_limits(pd, arrivals, E_W)

    lam_inf = float(arrivals.lambda_inf)
    delta = float(arrivals.delta)
    _, cmp = classify(rho, delta)
    if cmp == "greater":
        # exp(-rho t) lambda(t) integrable
        return LimitDescriptor(
            "nhpp-integrable", "exp", rho, pd.v.copy(), "compound-poisson-integral",
            {"rho": rho, "E_W": E_W, "discounted_mass": lam_inf / (rho - delta)},
        )
    if cmp == "equal":
        if pd.regime == CRITICAL:
            return critical_limit(model, pd, lam_inf)
        if rho > 0:
            return LimitDescriptor(
                "nhpp-equal", "t*exp", delta, lam_inf * pd.v[0] * pd.u, "point-mass",
                {"lambda_inf": lam_inf},
            )
        raise NoLimitError(f"no limit theorem for rho = delta = {rho} < 0")
    if delta > 0:
        return LimitDescriptor(
            "nhpp-resolvent", "exp", delta,
            resolvent_direction(pd.A, delta, lam_inf, rho=rho), "point-mass",
            {"lambda_inf": lam_inf},
        )
    if delta == 0 and pd.regime == SUBCRITICAL:
        mean = resolvent_direction(pd.A, 0.0, lam_inf, rho=rho)
        return LimitDescriptor("nhpp-stationary", "1", 0.0, mean, "general-nu",
                               {"lambda_inf": lam_inf})
    raise NoLimitError(f"no limit theorem for rho={rho}, delta={delta}")


def critical_limit(model: BranchingModel, pd: PerronData, lambda_inf: float) -> LimitDescriptor:
    """``N(t)/t -> Z (v / mu)`` with ``Z ~ Gamma(shape=lambda_inf beta, rate=c)``."""
    if not lambda_inf > 0:
        raise ValueError("lambda_inf must be positive")
    cc = critical_constants(model, pd)
    return LimitDescriptor(
        "nhpp-critical", "t", 0.0, pd.v / model.mu, "gamma",
        {"shape": lambda_inf * cc.beta, "scale": 1.0 / cc.c, "rate": cc.c,
         "Q": cc.Q, "beta": cc.beta, "c": cc.c},
    )


def gpp_limits(pd: PerronData, params: GppParams, E_W: float | None = None) -> LimitDescriptor:
    """Limits under constant-base GPP immigration, by ``rho`` against ``a lam``.

    * ``rho < a lam``: ``exp(-a lam t) N(t) -> Gamma(b/a, 1) * gamma_vec`` with
      ``gamma_vec = a lam (a lam I - A)^{-1} n0``;
    * ``rho = a lam``: ``exp(-a lam t) N(t)/t -> Z v``, ``Z`` gamma with shape
      ``b/a`` and scale ``E[W] a lam``;
    * ``rho > a lam``: ``exp(-rho t) N(t) -> Z_T v``, a subordinator at an
      independent ``Gamma(b/a, 1)`` time (see :func:`gpp_superc_exponent`).
    """
    if E_W is None:
        E_W = float(pd.u[0])
    g = params.growth
    shape = params.b / params.a
    _, cmp = classify(pd.rho, g)
    if cmp == "less":
        return LimitDescriptor(
            "gpp-sub", "exp", g, resolvent_direction(pd.A, g, g, rho=pd.rho), "gamma",
            {"shape": shape, "scale": 1.0, "rate": 1.0},
        )
    if cmp == "equal":
        scale = E_W * g
        return LimitDescriptor(
            "gpp-equal", "t*exp", g, pd.v.copy(), "gamma",
            {"shape": shape, "scale": scale, "rate": 1.0 / scale, "E_W": E_W},
        )
    return LimitDescriptor(
        "gpp-superc", "exp", pd.rho, pd.v.copy(), "subordinated-levy",
        {"shape": shape, "alpha": g / pd.rho, "rho": pd.rho, "growth": g, "E_W": E_W},
    )


# -- stationary limit (subcritical, constant arrival rate) --------------------

def nu_lt(model: BranchingModel, lambda_inf: float, s, pd: PerronData | None = None,
          tail_tol: float = 1e-11, horizon: float | None = None) -> float:
    """Transform of the stationary law: ``exp(lambda_inf * int_0^inf (phi_o(y) - 1) dy)``.

    The integral is truncated at a horizon ``Y`` where the bound
    ``int_Y^inf <-s, exp(A y) n0> dy = <-s, (-A)^{-1} exp(A Y) n0>`` on the
    neglected part drops below ``tail_tol``.
    """
    pd = _perron_of(model, pd)
    if pd.rho >= 0:
        raise ValueError("stationary limit needs a subcritical model")
    s = np.asarray(s, dtype=float)
    if np.all(s == 0):
        return 1.0
    if horizon is None:
        horizon = nu_horizon(pd, s, lambda_inf, tail_tol)
    phi = BackwardLT(model, s, horizon)
    # breakpoints keep the adaptive rule resolving the early part of the decay
    pts = np.linspace(0.0, horizon, 9)[1:-1]
    val = integrate(lambda y: phi(y) - 1.0, 0.0, horizon, points=pts)
    return float(np.exp(lambda_inf * val))


def nu_horizon(pd: PerronData, s, lambda_inf: float, tail_tol: float = 1e-11) -> float:
    from .spectral import matrix_exp

    n0 = np.zeros(pd.A.shape[0])
    n0[0] = 1.0
    neg_s = -np.asarray(s, dtype=float)
    Y = 10.0 / abs(pd.rho)
    inv = np.linalg.inv(-pd.A)
    while lambda_inf * neg_s @ inv @ matrix_exp(pd.A, Y) @ n0 > tail_tol:
        Y *= 2.0
    return Y


# -- integrable intensity (compound Poisson integral) -------------------------

def discounted_horizon(intensity, rho: float, tol: float = 1e-6) -> float:
    """``T*`` with ``int_T*^inf exp(-rho z) lambda(z) dz < tol``."""
    lam_inf = float(intensity.lambda_inf)
    delta = float(intensity.delta)
    if delta >= rho:
        raise ValueError("exp(-rho t) lambda(t) is not integrable")
    gap = rho - delta
    tol = 0.5 * tol  # land strictly inside the bound
    if hasattr(intensity, "t") and hasattr(intensity, "lam"):  # table: constant after last point
        t0 = float(intensity.t[-1])
        return t0 + max(0.0, np.log(lam_inf / (gap * tol)) / gap)
    return max(0.0, np.log(lam_inf / (gap * tol)) / gap)


def sample_nhpp_limit(pd: PerronData, intensity, w_source, n: int, rng: np.random.Generator,
                      t_star: float | None = None) -> np.ndarray:
    """Draws of ``int_0^inf exp(-rho z) dY_z``, ``Y`` compound Poisson with jumps ``W v``.

    Arrivals on ``[0, T*]`` are drawn as a Poisson number of iid times with
    density ``lambda / Lambda(T*)``. ``w_source`` is either an array of W
    draws (resampled with replacement) or a callable ``(rng, m) -> m draws``.

    Returns
    -------
    ndarray, shape (n, k)
    """
    k = pd.v.size
    if isinstance(intensity, NoArrivals):
        return np.zeros((n, k))
    if t_star is None:
        t_star = discounted_horizon(intensity, pd.rho)
    mass = float(intensity.cumulative(t_star))
    counts = rng.poisson(mass, size=n)
    total = int(counts.sum())
    taus = intensity.inverse_cumulative(rng.random(total) * mass)
    if callable(w_source):
        w = np.asarray(w_source(rng, total), dtype=float)
    else:
        pool = np.asarray(w_source, dtype=float)
        if pool.size == 0:
            raise ValueError("empty W sample")
        w = pool[rng.integers(0, pool.size, size=total)]
    owner = np.repeat(np.arange(n), counts)
    scalar = np.bincount(owner, weights=np.exp(-pd.rho * np.asarray(taus)) * w, minlength=n)
    return scalar[:, None] * pd.v[None, :]


# -- GPP supercritical limit ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class LevyLimitSpec:
    """Data of the GPP supercritical limit: growth ``a lam``, ``rho`` and a W sample."""

    a: float
    b: float
    lam: float
    rho: float
    w: np.ndarray

    def __post_init__(self):
        w = np.sort(np.asarray(self.w, dtype=float))
        if w.size == 0:
            raise ValueError("empty W sample")
        if np.any(w < 0):
            raise ValueError("W draws must be nonnegative")
        if not self.rho > self.a * self.lam:
            raise ValueError("supercritical GPP limit needs rho > a lam")
        object.__setattr__(self, "w", w)
        # suffix sums of W^alpha for the tail function G(z) = E[W^alpha 1{W >= z}]
        wa = w ** self.alpha
        tail = np.concatenate([np.cumsum(wa[::-1])[::-1], [0.0]]) / w.size
        object.__setattr__(self, "_tail", tail)

    @classmethod
    def from_params(cls, params: GppParams, rho: float, w) -> "LevyLimitSpec":
        return cls(params.a, params.b, params.lam, rho, w)

    @property
    def alpha(self) -> float:
        return self.a * self.lam / self.rho

    @property
    def shape(self) -> float:
        return self.b / self.a

    def tail(self, z):
        """``E[W^alpha 1{W >= z}]`` under the empirical W measure."""
        idx = np.searchsorted(self.w, z, side="left")
        return self._tail[idx]

    def pi_density(self, z):
        z = np.asarray(z, dtype=float)
        return self.tail(z) * self.alpha * z ** (-self.alpha - 1.0)


def _psi_density_form(spec: LevyLimitSpec, x: float, per_decade: int = 400) -> float:
    alpha = spec.alpha
    w = spec.w[spec.w > 0]
    if x == 0 or w.size == 0:
        return 0.0
    z_hi = w[-1]
    z_lo = min(w[0], 1.0 / x) * 1e-10
    # below z_lo the integrand is x * G(0+) * alpha * z^-alpha to first order
    head = x * spec.tail(z_lo) * alpha * z_lo ** (1.0 - alpha) / (1.0 - alpha)
    n_log = int(np.ceil(np.log10(z_hi / z_lo) * per_decade)) + 1
    nodes = np.unique(np.concatenate([np.geomspace(z_lo, z_hi, n_log), w]))
    # G is constant on each [nodes[i], nodes[i+1]); Simpson in log z on each piece
    lo, hi = nodes[:-1], nodes[1:]
    # W >= z for z in (lo, hi) is W >= hi
    G = spec._tail[np.searchsorted(spec.w, hi, side="left")]
    ulo, uhi = np.log(lo), np.log(hi)
    umid = 0.5 * (ulo + uhi)

    def f(u):
        z = np.exp(u)
        return -np.expm1(-x * z) * alpha * z ** (-alpha)

    pieces = (uhi - ulo) / 6.0 * (f(ulo) + 4.0 * f(umid) + f(uhi)) * G
    return float(head + pieces.sum())


def _psi_xi_form(spec: LevyLimitSpec, x: float) -> float:
    g = spec.a * spec.lam
    rho = spec.rho
    w = spec.w
    w_max = w[-1]
    if w_max == 0:
        return 0.0
    # past Y every exponent is below 1e-9, so 1 - exp(-c) = c to that relative order
    Y = max(0.0, np.log(x * w_max / 1e-9) / rho)

    def integrand(y):
        return np.mean(-np.expm1(-x * w * np.exp(-rho * y))) * g * np.exp(g * y)

    pts = np.linspace(0.0, Y, 12)[1:-1] if Y > 0 else None
    body = integrate(integrand, 0.0, Y, points=pts)
    tail = x * w.mean() * g * np.exp((g - rho) * Y) / (rho - g)
    return float(body + tail)


def psi_closed_form(spec: LevyLimitSpec, x: float) -> float:
    """Exact exponent of the empirical W measure via incomplete gamma functions."""
    a = spec.alpha
    c = x * spec.w
    vals = -(-np.expm1(-c)) + c ** a * gamma_fn(1.0 - a) * gammainc(1.0 - a, c)
    return float(vals.mean())


def gpp_superc_exponent(spec: LevyLimitSpec, x: float) -> tuple[float, float]:
    """Laplace exponent ``psi(x) = int (1 - exp(-x z)) Pi(dz)`` computed two ways.

    Returns ``(density_form, xi_form)``: quadrature against the Levy density
    ``Pi(dz) = E[W^alpha 1{W >= z}] alpha z^(-alpha-1) dz`` and the time
    integral ``int_0^inf E[1 - exp(-x W e^{-rho y})] a lam e^{a lam y} dy``,
    both under the empirical W measure.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0:
        return 0.0, 0.0
    return _psi_density_form(spec, float(x)), _psi_xi_form(spec, float(x))


def gamma_subordinated_lt(psi: Callable[[float], float], zeta: float, x) -> float:
    """``E[exp(-x Z_T)] = (1 + psi(x))^-zeta`` for ``T ~ Gamma(zeta, 1)`` independent of ``Z``."""
    if zeta <= 0:
        raise ValueError("zeta must be positive")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    vpsi = np.vectorize(psi, otypes=[float])
    return (1.0 + vpsi(x)) ** (-zeta)


def sample_subordinated(z_at: Callable[[np.ndarray, np.random.Generator], np.ndarray],
                        zeta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draws of ``Z_T`` with ``T ~ Gamma(zeta, 1)``; ``z_at(T, rng)`` samples ``Z`` at times ``T``."""
    T = rng.gamma(zeta, 1.0, size=n)
    return np.asarray(z_at(T, rng), dtype=float)


def gpp_superc_lt(spec: LevyLimitSpec, v: np.ndarray, s) -> float:
    """Limit transform ``(1 + psi(<-s, v>))^(-b/a)`` (density form of ``psi``)."""
    x = float(-np.asarray(s, dtype=float) @ v)
    return float((1.0 + gpp_superc_exponent(spec, x)[0]) ** (-spec.shape))
