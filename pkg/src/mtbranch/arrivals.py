"""Immigration streams: nonhomogeneous Poisson and generalized Polya arrivals.

Arrivals are generated lazily, one at a time, by :func:`next_arrival`, which is
compiled so that the event loop in :mod:`mtbranch.simulator` can interleave
them with branching events without materializing long arrival arrays.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numba
import numpy as np
from scipy.special import gammaln

NONE, CONSTANT, EXPONENTIAL, TABLE, GPP = 0, 1, 2, 3, 4

DEFAULT_ARRIVAL_CAP = 10_000_000


class CapacityError(RuntimeError):
    """A path exceeded its configured arrival or population cap."""


@dataclass(frozen=True)
class ConstantIntensity:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")

    lambda_inf = property(lambda self: self.rate)
    delta = property(lambda self: 0.0)

    def __call__(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.rate)

    def cumulative(self, t):
        return self.rate * np.asarray(t, dtype=float)

    def inverse_cumulative(self, x):
        return np.asarray(x, dtype=float) / self.rate

    def encode(self):
        return CONSTANT, np.array([self.rate, 0.0, 0.0, 0.0]), _EMPTY, _EMPTY

    def to_dict(self):
        return {"kind": "poisson", "rate": self.rate}


@dataclass(frozen=True)
class ExponentialIntensity:
    """``lambda(t) = lambda_inf * exp(delta * t)``; ``delta`` may be negative."""

    lambda_inf: float
    delta: float

    def __post_init__(self):
        if not self.lambda_inf > 0:
            raise ValueError("lambda_inf must be positive")

    def __call__(self, t):
        return self.lambda_inf * np.exp(self.delta * np.asarray(t, dtype=float))

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        if self.delta == 0.0:
            return self.lambda_inf * t
        return self.lambda_inf * np.expm1(self.delta * t) / self.delta

    def inverse_cumulative(self, x):
        """``Lambda^{-1}``; ``inf`` beyond the total mass when ``delta < 0``."""
        x = np.asarray(x, dtype=float)
        if self.delta == 0.0:
            return x / self.lambda_inf
        arg = self.delta * x / self.lambda_inf
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.log1p(arg) / self.delta
        return np.where(arg > -1.0, out, np.inf)

    def encode(self):
        return EXPONENTIAL, np.array([self.lambda_inf, self.delta, 0.0, 0.0]), _EMPTY, _EMPTY

    def to_dict(self):
        return {"kind": "exponential", "lambda_inf": self.lambda_inf, "delta": self.delta}


@dataclass(frozen=True, eq=False)
class TableIntensity:
    """Piecewise-linear intensity through ``(t[i], lam[i])``, held constant after the table."""

    t: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        lam = np.asarray(self.lam, dtype=float)
        if t.ndim != 1 or t.shape != lam.shape or t.size < 1:
            raise ValueError("table needs matching 1-d t and lambda columns")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("table times must start at 0 and increase")
        if np.any(lam <= 0) or not np.all(np.isfinite(lam)):
            raise ValueError("table intensity must be positive and finite")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "lam", lam)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * (lam[1:] + lam[:-1]) * np.diff(t))])
        object.__setattr__(self, "_cum", cum)

    @classmethod
    def from_csv(cls, path) -> "TableIntensity":
        """Read a CSV with header columns ``t`` and ``lambda``."""
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(np.array([float(r["t"]) for r in rows]), np.array([float(r["lambda"]) for r in rows]))

    lambda_inf = property(lambda self: float(self.lam[-1]))
    delta = property(lambda self: 0.0)

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.t, self.lam)

    def cumulative(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, self.t.size - 1)
        dt = t - self.t[i]
        lam_t = self(t)
        inside = i < self.t.size - 1
        return np.where(inside, self._cum[i] + 0.5 * (self.lam[i] + lam_t) * dt,
                        self._cum[-1] + self.lam[-1] * dt)

    def inverse_cumulative(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        for n, xn in enumerate(x):
            i = int(np.clip(np.searchsorted(self._cum, xn, side="right") - 1, 0, self.t.size - 1))
            rem = xn - self._cum[i]
            if i == self.t.size - 1:
                out[n] = self.t[i] + rem / self.lam[-1]
                continue
            slope = (self.lam[i + 1] - self.lam[i]) / (self.t[i + 1] - self.t[i])
            if abs(slope) < 1e-15:
                out[n] = self.t[i] + rem / self.lam[i]
            else:
                # 0.5 slope d^2 + lam_i d - rem = 0
                disc = self.lam[i] ** 2 + 2.0 * slope * rem
                out[n] = self.t[i] + (np.sqrt(disc) - self.lam[i]) / slope
        return out

    def encode(self):
        lam_max = float(self.lam.max())
        return TABLE, np.array([lam_max, 0.0, 0.0, 0.0]), self.t, self.lam

    def to_dict(self):
        return {"kind": "table", "t": self.t.tolist(), "lambda": self.lam.tolist()}


@dataclass(frozen=True)
class GppParams:
    """Generalized Polya arrivals with intensity ``(a S(t-) + b) * lam``."""

    a: float
    b: float
    lam: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and self.lam > 0):
            raise ValueError("GPP parameters a, b, lam must be positive")

    @property
    def growth(self) -> float:
        """Exponential growth rate ``a * lam`` of the expected intensity."""
        return self.a * self.lam

    def cumulative_base(self, t):
        return self.lam * np.asarray(t, dtype=float)

    def expected_intensity(self, t):
        return self.b * self.lam * np.exp(self.a * self.lam * np.asarray(t, dtype=float))

    def encode(self):
        return GPP, np.array([self.a, self.b, self.lam, 0.0]), _EMPTY, _EMPTY

    def to_dict(self):
        return {"kind": "gpp", "a": self.a, "b": self.b, "lam": self.lam}


@dataclass(frozen=True)
class NoArrivals:
    def encode(self):
        return NONE, np.zeros(4), _EMPTY, _EMPTY

    def to_dict(self):
        return {"kind": "none"}


IntensityFunction = Union[ConstantIntensity, ExponentialIntensity, TableIntensity]
ArrivalSpec = Union[IntensityFunction, GppParams, NoArrivals]

_EMPTY = np.zeros(0)


def arrivals_from_dict(d: dict, base_dir: Path | None = None) -> ArrivalSpec:
    kind = d.get("kind", "none")
    if kind == "none":
        return NoArrivals()
    if kind == "poisson":
        return ConstantIntensity(float(d["rate"]))
    if kind == "exponential":
        return ExponentialIntensity(float(d["lambda_inf"]), float(d["delta"]))
    if kind == "table":
        if "csv" in d:
            path = Path(d["csv"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return TableIntensity.from_csv(path)
        return TableIntensity(np.array(d["t"], dtype=float), np.array(d["lambda"], dtype=float))
    if kind == "gpp":
        return GppParams(float(d["a"]), float(d["b"]), float(d["lam"]))
    raise ValueError(f"unknown arrival kind {kind!r}")


@numba.njit(nogil=True, cache=True)
def _table_rate(tt, tl, t):
    n = tt.size
    if t >= tt[n - 1]:
        return tl[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tt[mid] <= t:
            lo = mid
        else:
            hi = mid
    w = (t - tt[lo]) / (tt[hi] - tt[lo])
    return tl[lo] + w * (tl[hi] - tl[lo])


@numba.njit(nogil=True, cache=True)
def next_arrival(kind, par, tt, tl, t, cum, count, rng):
    """Time of the arrival following one at ``t``.

    ``cum`` is the cumulative intensity at ``t`` (inversion families) and
    ``count`` the number of arrivals so far (GPP). Returns the new time and
    cumulative intensity; the time is ``inf`` when no further arrival occurs.
    """
    if kind == CONSTANT:
        return t + rng.standard_exponential() / par[0], 0.0
    if kind == EXPONENTIAL:
        lam_inf = par[0]
        delta = par[1]
        cum_new = cum + rng.standard_exponential()
        if delta == 0.0:
            return cum_new / lam_inf, cum_new
        arg = delta * cum_new / lam_inf
        if arg <= -1.0:
            return np.inf, cum_new
        return np.log1p(arg) / delta, cum_new
    if kind == TABLE:
        lam_max = par[0]
        s = t
        while True:
            s += rng.standard_exponential() / lam_max
            if rng.random() * lam_max < _table_rate(tt, tl, s):
                return s, 0.0
    if kind == GPP:
        rate = (par[0] * count + par[1]) * par[2]
        return t + rng.standard_exponential() / rate, 0.0
    return np.inf, 0.0


@numba.njit(nogil=True, cache=True)
def _sample_stream(kind, par, tt, tl, horizon, cap, rng):
    buf = np.empty(16)
    n = 0
    t, cum = next_arrival(kind, par, tt, tl, 0.0, 0.0, 0, rng)
    while t <= horizon:
        if n >= cap:
            return buf[:n], False
        if n == buf.size:
            nb = np.empty(2 * buf.size)
            nb[:n] = buf[:n]
            buf = nb
        buf[n] = t
        n += 1
        t, cum = next_arrival(kind, par, tt, tl, t, cum, n, rng)
    return buf[:n], True


def nhpp_sample(intensity: IntensityFunction, horizon: float, rng: np.random.Generator,
                cap: int = DEFAULT_ARRIVAL_CAP) -> np.ndarray:
    """Arrival times of a nonhomogeneous Poisson process on ``[0, horizon]``.

    Constant and exponential intensities are sampled by inverting the
    cumulative intensity; tables by thinning against their maximum.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if horizon == 0:
        return np.zeros(0)
    kind, par, tt, tl = intensity.encode()
    times, ok = _sample_stream(kind, par, tt, tl, float(horizon), cap, rng)
    if not ok:
        raise CapacityError(f"more than {cap} arrivals before t={horizon}")
    return times


def gpp_sample(params: GppParams, horizon: float, rng: np.random.Generator,
               cap: int = DEFAULT_ARRIVAL_CAP) -> np.ndarray:
    """Arrival times of a constant-base generalized Polya process on ``[0, horizon]``."""
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    if horizon == 0:
        return np.zeros(0)
    kind, par, tt, tl = params.encode()
    times, ok = _sample_stream(kind, par, tt, tl, float(horizon), cap, rng)
    if not ok:
        raise CapacityError(f"GPP path exceeded {cap} arrivals before t={horizon}")
    return times


def renewal_mean(spec: ArrivalSpec, t):
    """Expected number of arrivals by ``t``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    if isinstance(spec, GppParams):
        return spec.b / spec.a * np.expm1(spec.a * spec.cumulative_base(t))
    if isinstance(spec, NoArrivals):
        return np.zeros_like(t)
    return spec.cumulative(t)


def renewal_density(spec: ArrivalSpec, t):
    """``dm/dt``: the intensity for NHPP, ``b lam exp(a lam t)`` for GPP."""
    if isinstance(spec, GppParams):
        return spec.expected_intensity(t)
    if isinstance(spec, NoArrivals):
        return np.zeros_like(np.asarray(t, dtype=float))
    return spec(t)


def gpp_marginal_pmf(params: GppParams, t: float, n):
    """``P(S(t) = n)``: negative binomial with ``r = b/a`` and ``p = 1 - exp(-a Lambda_t)``."""
    n = np.asarray(n)
    if t < 0 or np.any(n < 0):
        raise ValueError("t and n must be nonnegative")
    r = params.b / params.a
    x = params.a * float(params.cumulative_base(t))
    if x == 0.0:
        return np.where(n == 0, 1.0, 0.0)
    log_p = np.log(-np.expm1(-x))
    logpmf = gammaln(r + n) - gammaln(r) - gammaln(n + 1.0) + n * log_p - r * x
    return np.exp(logpmf)
