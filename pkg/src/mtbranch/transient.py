"""Transient mean of type-1 particles in the two-type switching model.

A type 1 particle (rate ``mu1``) turns into a type 2 particle with probability
``p12`` and otherwise dies; a type 2 particle (rate ``mu2``) turns back into
type 1 with probability ``p21``. Immigrants are type 1. The number of returns
to type 1 is geometric, and the return-time law summed over returns is the
kernel ``Psi``:

    Psi(ds) = delta_0(ds) + q (e^{zeta1 s} - e^{zeta2 s}) / (zeta1 - zeta2) ds,
    q = mu1 mu2 p12 p21,

with Laplace transform ``1 / (1 - q / ((mu1 + x)(mu2 + x)))``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .arrivals import ArrivalSpec, renewal_density, renewal_mean
from .model import BranchingModel, two_type
from .spectral import build_mean_matrix, matrix_exp
from .transforms import QuadratureError

TRANSIENT_ATOL = 1e-8
TRANSIENT_RTOL = 1e-10
VARIANTS = ("renewal-consistent", "paper-literal")


@dataclass(frozen=True)
class TwoTypeParams:
    mu1: float
    mu2: float
    p12: float
    p21: float

    def __post_init__(self):
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise ValueError("rates must be positive")
        for p in (self.p12, self.p21):
            if not 0.0 <= p <= 1.0:
                raise ValueError("switching probabilities must lie in [0, 1]")
        if not self.p12 * self.p21 < 1.0:
            raise ValueError("p12 * p21 must be < 1")

    @property
    def q(self) -> float:
        return self.mu1 * self.mu2 * self.p12 * self.p21

    def model(self) -> BranchingModel:
        return two_type(self.mu1, self.mu2, self.p12, self.p21)


def zeta_roots(params: TwoTypeParams) -> tuple[float, float]:
    """Roots of ``x^2 + (mu1 + mu2) x + mu1 mu2 (1 - p12 p21)``, larger first."""
    m1, m2 = params.mu1, params.mu2
    disc = np.sqrt((m1 - m2) ** 2 + 4.0 * m1 * m2 * params.p12 * params.p21)
    z1 = 0.5 * (-(m1 + m2) + disc)
    # product form avoids cancellation in the root closest to zero
    z2 = 0.5 * (-(m1 + m2) - disc)
    prod = m1 * m2 * (1.0 - params.p12 * params.p21)
    if z2 != 0:
        z1 = max(prod / z2, z2)
    return float(z1), float(z2)


def _divided_difference(f, df, z1: float, z2: float):
    """``(f(z1) - f(z2)) / (z1 - z2)``, switching to ``df`` at the midpoint for near-equal roots."""
    gap = z1 - z2
    if abs(gap) <= 1e-6 * max(abs(z1), abs(z2)):
        return df(0.5 * (z1 + z2))
    return (f(z1) - f(z2)) / gap


@dataclass(frozen=True)
class PsiKernel:
    """Unit atom at zero plus ``q (e^{zeta1 s} - e^{zeta2 s}) / (zeta1 - zeta2)`` on ``s > 0``."""

    zeta1: float
    zeta2: float
    q: float

    @property
    def coef(self) -> float:
        if self.q == 0.0:
            return 0.0
        gap = self.zeta1 - self.zeta2
        return self.q / gap if gap != 0.0 else np.inf

    def density(self, s):
        s = np.asarray(s, dtype=float)
        if self.q == 0.0:
            return np.zeros_like(s)
        return self.q * _divided_difference(lambda z: np.exp(z * s), lambda z: s * np.exp(z * s),
                                            self.zeta1, self.zeta2)

    def cdf(self, s):
        """``Psi([0, s])``; the atom is included for ``s >= 0``."""
        s = np.asarray(s, dtype=float)
        if self.q == 0.0:
            return np.where(s >= 0, 1.0, 0.0)
        ss = np.maximum(s, 0.0)
        body = self.q * _divided_difference(
            lambda z: np.expm1(z * ss) / z,
            lambda z: (ss * np.exp(z * ss) * z - np.expm1(z * ss)) / z ** 2,
            self.zeta1, self.zeta2)
        return np.where(s >= 0, 1.0 + body, 0.0)

    def total_mass(self) -> float:
        # q / (zeta1 zeta2) = q / (mu1 mu2 (1 - p12 p21))
        return 1.0 + self.q / (self.zeta1 * self.zeta2)

    def lt(self, x):
        """Exact transform ``1 + q / ((x - zeta1)(x - zeta2))``."""
        x = np.asarray(x, dtype=float)
        return 1.0 + self.q / ((x - self.zeta1) * (x - self.zeta2))

    def lt_numeric(self, x: float) -> float:
        """Transform by quadrature of the density (atom added exactly)."""
        if self.q == 0.0:
            return 1.0
        val, _ = quad(lambda s: np.exp(-x * s) * self.density(s), 0.0, np.inf,
                      epsabs=1e-13, epsrel=1e-12, limit=400)
        return 1.0 + float(val)


def psi_kernel(params: TwoTypeParams) -> PsiKernel:
    z1, z2 = zeta_roots(params)
    return PsiKernel(z1, z2, params.q)


def displayed_density_mass(params: TwoTypeParams) -> float:
    """Total mass of the alternative density with ``1/zeta`` factors.

    Density ``q [e^{zeta1 s} / (zeta1 (zeta2 - zeta1)) + e^{zeta2 s} / (zeta2 (zeta1 - zeta2))]``
    on ``s >= 0`` plus the unit atom. Kept as a diagnostic: it differs from
    ``PsiKernel.total_mass`` unless ``q = 0``.
    """
    z1, z2 = zeta_roots(params)
    q = params.q
    if q == 0.0:
        return 1.0
    return 1.0 + q * (1.0 / (z1 * (z2 - z1)) * (-1.0 / z1) + 1.0 / (z2 * (z1 - z2)) * (-1.0 / z2))


def _quad(f, a, b, points=None) -> float:
    if b <= a:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            val, _ = quad(f, a, b, epsabs=TRANSIENT_ATOL, epsrel=TRANSIENT_RTOL, limit=400,
                          points=points)
        except IntegrationWarning as exc:
            raise QuadratureError(str(exc)) from exc
    return float(val)


def _kinks(spec: ArrivalSpec, t: float):
    tt = getattr(spec, "t", None)
    if tt is None:
        return None
    pts = [x for x in np.asarray(tt, dtype=float) if 0 < x < t]
    return pts or None


def survival_kernel(params: TwoTypeParams, tau):
    """``h(tau) = int_[0, tau] exp(-mu1 (tau - v)) Psi(dv)``: mean type-1 count at age ``tau``."""
    tau = np.asarray(tau, dtype=float)
    mu1 = params.mu1
    out = np.exp(-mu1 * tau)
    if params.q == 0.0:
        return out
    k = psi_kernel(params)

    # int_0^tau e^{-mu1 (tau - v)} e^{z v} dv and its z-derivative; series when z + mu1 ~ 0
    def f(z):
        x = (z + mu1) * tau
        small = np.abs(x) < 1e-5
        safe = np.where(small, 1.0, x)
        ratio = np.where(small, 1.0 + x / 2.0 + x * x / 6.0, np.expm1(safe) / safe)
        return np.exp(-mu1 * tau) * tau * ratio

    def df(z):
        x = (z + mu1) * tau
        small = np.abs(x) < 1e-5
        safe = np.where(small, 1.0, x)
        ratio = np.where(small, 0.5 + x / 3.0 + x * x / 8.0,
                         (safe * np.exp(safe) - np.expm1(safe)) / safe ** 2)
        return np.exp(-mu1 * tau) * tau ** 2 * ratio

    return out + params.q * _divided_difference(f, df, k.zeta1, k.zeta2)


def _renewal_consistent(params: TwoTypeParams, spec: ArrivalSpec, t: float) -> float:
    dens = lambda y: float(renewal_density(spec, y))
    return _quad(lambda y: float(survival_kernel(params, t - y)) * dens(y), 0.0, t, _kinks(spec, t))


def _literal(params: TwoTypeParams, spec: ArrivalSpec, t: float) -> float:
    k = psi_kernel(params)
    mu1 = params.mu1
    m = lambda y: float(renewal_mean(spec, y))
    dens = lambda y: float(renewal_density(spec, y))

    def inner(tau):
        return _quad(lambda z: (float(k.cdf(tau)) - float(k.cdf(tau - z))) * mu1 * np.exp(-mu1 * z),
                     0.0, tau)

    first = params.p12 * _quad(lambda y: inner(t - y) * dens(y), 0.0, t, _kinks(spec, t))
    # atom of Psi at zero contributes m(t) exactly
    second = m(t) + _quad(lambda s: m(t - s) * float(k.density(s)), 0.0, t)
    return first + (1.0 - params.p12) * second


def transient_mean_n1(params: TwoTypeParams, spec: ArrivalSpec, t: float,
                      variant: str = "renewal-consistent") -> float:
    """``E[N_1(t)]`` starting empty, immigrants of type 1 arriving with renewal mean ``m``.

    ``renewal-consistent`` integrates the age kernel ``h`` against ``dm``.
    ``paper-literal`` evaluates the alternative double-integral expression with
    the ``[0, t - y]`` inner range and the ``(1 - p12) int m(t - s) Psi(ds)``
    branch; it disagrees with the exact mean in general and is kept for comparison.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    if variant == "renewal-consistent":
        return _renewal_consistent(params, spec, float(t))
    if variant == "paper-literal":
        return _literal(params, spec, float(t))
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


def matrix_exp_mean(params: TwoTypeParams, spec: ArrivalSpec, t: float) -> np.ndarray:
    """``int_0^t exp(A (t - y)) n0 dm(y)`` by quadrature, both components."""
    if t <= 0:
        return np.zeros(2)
    A = build_mean_matrix(params.model(), require_regular=False)
    dens = lambda y: float(renewal_density(spec, y))
    return np.array([
        _quad(lambda y, i=i: matrix_exp(A, t - y)[i, 0] * dens(y), 0.0, t, _kinks(spec, t))
        for i in range(2)
    ])
