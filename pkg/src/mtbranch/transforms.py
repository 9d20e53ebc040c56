"""Laplace transforms of the population counts.

The transform of the process without immigration comes from the backward
equation of the offspring generating functions: with
``F_i(tau) = E_i[exp(<s, N(tau)>)]`` for a population started from one type
``i`` particle,

    dF_i/dtau = mu_i * (h_i(F) - F_i),    F_i(0) = exp(s_i).

Transforms with immigration are integrals of ``F_0`` against the arrival
intensity (Poisson) or the expected GPP intensity.
"""
from __future__ import annotations

import warnings
from functools import cached_property

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp

from .arrivals import GppParams, IntensityFunction
from .model import BranchingModel

ODE_RTOL = 1e-11
ODE_ATOL = 1e-13
QUAD_EPS = 1e-10
QUAD_LIMIT = 500


class QuadratureError(RuntimeError):
    pass


def _check_s(model: BranchingModel, s) -> np.ndarray:
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if s.shape != (model.k,):
        raise ValueError(f"s must have shape ({model.k},)")
    if np.any(s > 0):
        raise ValueError("s must have nonpositive entries")
    return s


def integrate(f, a: float, b: float, points=None) -> float:
    """Adaptive quadrature that raises instead of warning on non-convergence."""
    if b <= a:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, _ = quad(f, a, b, epsabs=QUAD_EPS, epsrel=QUAD_EPS, limit=QUAD_LIMIT, points=points)
        except IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    return float(val)


class BackwardLT:
    """Solution of the generating-function ODE on ``[0, t_max]`` for a fixed ``s``.

    Calling the object returns ``phi_o(tau) = F_0(tau)``, the transform for a
    population started from one type-0 particle.
    """

    def __init__(self, model: BranchingModel, s, t_max: float):
        self.model = model
        self.s = _check_s(model, s)
        self.t_max = float(t_max)
        if self.t_max < 0:
            raise ValueError("t_max must be nonnegative")

    @cached_property
    def _solution(self):
        model = self.model
        mu = model.mu
        laws = [(law.counts.astype(float), law.probs) for law in model.offspring]

        def rhs(_, F):
            Fc = np.clip(F, 0.0, 1.0)
            h = np.array([p @ np.prod(Fc ** c, axis=1) for c, p in laws])
            return mu * (h - F)

        F0 = np.exp(self.s)
        if self.t_max == 0:
            return None
        sol = solve_ivp(rhs, (0.0, self.t_max), F0, method="DOP853", rtol=ODE_RTOL,
                        atol=ODE_ATOL, dense_output=True)
        if not sol.success:
            raise RuntimeError(f"generating-function ODE failed: {sol.message}")
        return sol

    def full(self, tau) -> np.ndarray:
        """All components ``F(tau)``, shape ``(k,)`` or ``(k, len(tau))``."""
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 0) or np.any(tau > self.t_max * (1 + 1e-12) + 1e-12):
            raise ValueError("tau outside the solved range")
        if self._solution is None:
            F0 = np.exp(self.s)
            return F0 if tau.ndim == 0 else np.repeat(F0[:, None], tau.size, axis=1)
        return np.clip(self._solution.sol(np.minimum(tau, self.t_max)), 0.0, 1.0)

    def __call__(self, tau):
        out = self.full(tau)
        return out[0]


def phi_o(model: BranchingModel, s, t: float) -> float:
    """``E[exp(<s, N(t)>)]`` for the process without immigration from one type-0 particle."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return float(BackwardLT(model, s, t)(t))


def lt_nhpp_forms(model: BranchingModel, intensity: IntensityFunction, s, t: float,
                  backward: BackwardLT | None = None) -> tuple[float, float]:
    """Both integral forms of the transform under Poisson immigration.

    Returns ``(arrival_form, age_form)``: the exponent integrated over arrival
    times ``x`` with ``phi_o(t - x) lambda(x)``, and over subtree ages ``x``
    with ``phi_o(x) lambda(t - x)``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    phi = backward or BackwardLT(model, s, t)
    lam = intensity
    by_arrival = integrate(lambda x: (phi(t - x) - 1.0) * float(lam(x)), 0.0, t)
    by_age = integrate(lambda x: (phi(x) - 1.0) * float(lam(t - x)), 0.0, t)
    return float(np.exp(by_arrival)), float(np.exp(by_age))


def lt_nhpp(model: BranchingModel, intensity: IntensityFunction, s, t: float) -> float:
    """``E[exp(<s, N(t)>)]`` under nonhomogeneous Poisson immigration."""
    return lt_nhpp_forms(model, intensity, s, t)[1]


def _gpp_exponent(phi, params: GppParams, t: float) -> float:
    g = params.growth
    return integrate(lambda y: (1.0 - phi(t - y)) * g * np.exp(g * y), 0.0, t)


def lt_gpp(model: BranchingModel, params: GppParams, s, t: float,
           backward: BackwardLT | None = None) -> float:
    """``E[exp(<s, N(t)>)]`` under constant-base generalized Polya immigration."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    phi = backward or BackwardLT(model, s, t)
    xi = _gpp_exponent(phi, params, t)
    return float((1.0 + xi) ** (-params.b / params.a))


def lt_gpp_compound(model: BranchingModel, params: GppParams, s, t: float,
                    backward: BackwardLT | None = None) -> float:
    """Same transform through the compound negative binomial representation.

    ``P_t(f_t(s))`` where ``P_t`` is the generating function of ``S(t)`` and
    ``f_t`` the transform of one subtree whose arrival time has density
    ``q_t(y) = a lam exp(a lam y) / (exp(a lam t) - 1)``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 1.0
    phi = backward or BackwardLT(model, s, t)
    g = params.growth
    norm = np.expm1(g * t)
    f = integrate(lambda y: g * np.exp(g * y) / norm * phi(t - y), 0.0, t)
    p = -np.expm1(-g * t)
    r = params.b / params.a
    return float(((1.0 - p) / (1.0 - p * f)) ** r)


def empirical_lt(samples, s):
    """Sample mean and standard error of ``exp(<s, X>)``.

    ``samples`` has shape ``(n, k)`` (or ``(n,)`` for scalars); ``s`` has shape
    ``(k,)`` or ``(m, k)`` for several points at once.
    """
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty sample")
    s = np.asarray(s, dtype=float)
    single = s.ndim <= 1
    s = np.atleast_2d(s)
    if s.shape[1] != x.shape[1]:
        raise ValueError("dimension of s does not match the samples")
    if np.any(s > 0):
        raise ValueError("s must have nonpositive entries")
    vals = np.exp(x @ s.T)
    est = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(est)
    if single:
        return float(est[0]), float(se[0])
    return est, se
