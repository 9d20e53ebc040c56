"""Branching mechanism: particle types, exponential lifetimes, offspring laws.

A type ``i`` particle lives an ``Exp(mu[i])`` time and is then replaced by a
random vector of children drawn from a finite-support offspring law.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

PROB_TOL = 1e-12


class ModelError(ValueError):
    """Raised for an invalid branching model."""


@dataclass(frozen=True)
class OffspringLaw:
    """Finite-support distribution of the children vector of one particle.

    Parameters
    ----------
    counts : array_like, shape (m, k)
        Distinct children count vectors.
    probs : array_like, shape (m,)
        Their probabilities, summing to one.
    """

    counts: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        counts = np.atleast_2d(np.asarray(self.counts, dtype=np.int64))
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if counts.shape[0] != probs.shape[0]:
            raise ModelError("counts and probs have different lengths")
        if np.any(counts < 0):
            raise ModelError("offspring counts must be nonnegative")
        if np.any(probs < 0):
            raise ModelError("offspring probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ModelError(f"offspring probabilities sum to {probs.sum()!r}, not 1")
        if len({tuple(c) for c in counts}) != counts.shape[0]:
            raise ModelError("offspring count vectors must be distinct")
        counts.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[Sequence[int], float]]) -> "OffspringLaw":
        counts = [list(c) for c, _ in pairs]
        probs = [float(p) for _, p in pairs]
        return cls(np.array(counts, dtype=np.int64), np.array(probs))

    @property
    def k(self) -> int:
        return self.counts.shape[1]

    def pairs(self) -> list[tuple[list[int], float]]:
        return [(c.tolist(), float(p)) for c, p in zip(self.counts, self.probs)]


@dataclass(frozen=True)
class BranchingModel:
    """Multitype Markov branching mechanism.

    ``mu[i]`` is the lifetime rate of type ``i`` and ``offspring[i]`` its
    offspring law. Types are 0-indexed here; type 0 is the immigrant type.
    """

    mu: np.ndarray
    offspring: tuple[OffspringLaw, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        offspring = tuple(self.offspring)
        if mu.ndim != 1 or mu.size < 1:
            raise ModelError("mu must be a nonempty vector")
        if np.any(~np.isfinite(mu)) or np.any(mu <= 0):
            raise ModelError("lifetime rates must be positive")
        if len(offspring) != mu.size:
            raise ModelError(f"expected {mu.size} offspring laws, got {len(offspring)}")
        for law in offspring:
            if law.k != mu.size:
                raise ModelError("offspring count vectors must have length k")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "offspring", offspring)

    @property
    def k(self) -> int:
        return self.mu.size

    def is_pure_death(self) -> bool:
        """True when every particle leaves no children."""
        return all(np.all(law.counts == 0) for law in self.offspring)

    def to_dict(self) -> dict:
        return {
            "types": [
                {"rate": float(m), "offspring": [[c, p] for c, p in law.pairs()]}
                for m, law in zip(self.mu, self.offspring)
            ]
        }

    @classmethod
    def from_dict(cls, d: dict, name: str = "") -> "BranchingModel":
        types = d["types"]
        mu = [float(t["rate"]) for t in types]
        laws = tuple(OffspringLaw.from_pairs(t["offspring"]) for t in types)
        return cls(np.array(mu), laws, name=name or d.get("name", ""))


def _check_type(model: BranchingModel, i: int) -> None:
    if not 0 <= i < model.k:
        raise IndexError(f"type index {i} out of range for k={model.k}")


def h_eval(model: BranchingModel, i: int, z) -> float:
    """Offspring generating function ``h_i(z) = sum_n p_i(n) prod_j z_j**n_j``."""
    _check_type(model, i)
    z = np.asarray(z, dtype=float)
    if z.shape != (model.k,):
        raise ValueError(f"z must have shape ({model.k},)")
    if np.any(z < 0) or np.any(z > 1):
        raise ValueError("z must lie in the unit cube")
    law = model.offspring[i]
    return float(np.sum(law.probs * np.prod(z ** law.counts, axis=1)))


def h_vector(model: BranchingModel, z: np.ndarray) -> np.ndarray:
    """All generating functions at once, without range checks (ODE hot path)."""
    out = np.empty(model.k)
    for i, law in enumerate(model.offspring):
        out[i] = np.sum(law.probs * np.prod(z ** law.counts, axis=1))
    return out


def offspring_moments(model: BranchingModel) -> tuple[np.ndarray, np.ndarray]:
    """Mean matrix and second-derivative tensor of the generating functions at 1.

    Returns
    -------
    m : ndarray, shape (k, k)
        ``m[i, j] = E[Y_j^(i)]``, mean number of type ``j`` children of a type
        ``i`` particle.
    hess : ndarray, shape (k, k, k)
        ``hess[i, l, n] = d^2 h_i / dz_l dz_n`` at ``z = 1``, i.e.
        ``E[Y_l (Y_n - [l == n])]``.
    """
    k = model.k
    m = np.zeros((k, k))
    hess = np.zeros((k, k, k))
    eye = np.eye(k, dtype=np.int64)
    for i, law in enumerate(model.offspring):
        c = law.counts.astype(float)
        p = law.probs
        m[i] = p @ c
        for l in range(k):
            for n in range(k):
                hess[i, l, n] = np.sum(p * c[:, l] * (c[:, n] - eye[l, n]))
    return m, hess


def sample_offspring(model: BranchingModel, i: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one children vector of a type ``i`` particle by inverse cdf."""
    _check_type(model, i)
    law = model.offspring[i]
    cdf = np.cumsum(law.probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return law.counts[min(idx, len(cdf) - 1)].copy()


def kernel_tables(model: BranchingModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense arrays describing the offspring laws for the compiled event loop.

    Returns ``(cdf, children, nsupp)`` where ``cdf[i, :nsupp[i]]`` is the
    cumulative law of type ``i`` and ``children[i, m]`` the m-th support point.
    Padding entries of ``cdf`` are 1.
    """
    k = model.k
    width = max(len(law.probs) for law in model.offspring)
    cdf = np.ones((k, width))
    children = np.zeros((k, width, k), dtype=np.int64)
    nsupp = np.zeros(k, dtype=np.int64)
    for i, law in enumerate(model.offspring):
        m = len(law.probs)
        c = np.cumsum(law.probs)
        cdf[i, :m] = c / c[-1]
        children[i, :m] = law.counts
        nsupp[i] = m
    return cdf, children, nsupp


# -- model catalogue -------------------------------------------------------

def _law(*pairs) -> OffspringLaw:
    return OffspringLaw.from_pairs(pairs)


def pure_death(mu: float = 1.0) -> BranchingModel:
    """Single type, no children: an M/M/inf-type population."""
    return BranchingModel(np.array([mu]), (_law(([0], 1.0)),), name="pure-death")


def critical_pair(mu: float = 1.0) -> BranchingModel:
    """h1 = 1/2 + z2^2/2, h2 = 1/2 + z1^2/2: critical (rho = 0)."""
    return BranchingModel(
        np.array([mu, mu]),
        (_law(([0, 0], 0.5), ([0, 2], 0.5)), _law(([0, 0], 0.5), ([2, 0], 0.5))),
        name="critical",
    )


def supercritical_pair(mu: float = 1.0) -> BranchingModel:
    """h1 = 1/4 + 3 z2^2/4, h2 = 1/4 + 3 z1^2/4: rho = mu/2."""
    return BranchingModel(
        np.array([mu, mu]),
        (_law(([0, 0], 0.25), ([0, 2], 0.75)), _law(([0, 0], 0.25), ([2, 0], 0.75))),
        name="supercritical",
    )


def doubling_pair(mu: float = 1.0) -> BranchingModel:
    """h1 = z2^2, h2 = z1^2: never goes extinct, rho = mu."""
    return BranchingModel(
        np.array([mu, mu]), (_law(([0, 2], 1.0)), _law(([2, 0], 1.0))), name="doubling"
    )


def deterministic_cycle(mu: float = 1.0) -> BranchingModel:
    """h1 = z2, h2 = z1: a single particle alternating types forever."""
    return BranchingModel(
        np.array([mu, mu]), (_law(([0, 1], 1.0)), _law(([1, 0], 1.0))), name="cycle"
    )


def two_type(mu1: float, mu2: float, p12: float, p21: float) -> BranchingModel:
    """Type-switching pair: type 1 becomes type 2 w.p. p12, type 2 becomes type 1 w.p. p21."""
    law1 = [([0, 1], p12)] + ([([0, 0], 1.0 - p12)] if p12 < 1 else [])
    law2 = [([1, 0], p21)] + ([([0, 0], 1.0 - p21)] if p21 < 1 else [])
    law1 = [pr for pr in law1 if pr[1] > 0] or [([0, 0], 1.0)]
    law2 = [pr for pr in law2 if pr[1] > 0] or [([0, 0], 1.0)]
    return BranchingModel(
        np.array([mu1, mu2]), (_law(*law1), _law(*law2)),
        name=f"two-type(mu=({mu1},{mu2}),p=({p12},{p21}))",
    )


def symmetric_pair() -> BranchingModel:
    """The subcritical switching model mu1 = mu2 = 1, p12 = p21 = 1/2."""
    m = two_type(1.0, 1.0, 0.5, 0.5)
    return BranchingModel(m.mu, m.offspring, name="symmetric")


def asymmetric_chain() -> BranchingModel:
    """mu = (1, 2); type 1 always becomes type 2, type 2 always dies.

    Exact means from one type-1 particle: E N1 = e^-t, E N2 = e^-t - e^-2t.
    The mean matrix is reducible, so this model only serves orientation checks.
    """
    m = two_type(1.0, 2.0, 1.0, 0.0)
    return BranchingModel(m.mu, m.offspring, name="asymmetric")


CATALOGUE = {
    "pure-death": pure_death,
    "critical": critical_pair,
    "supercritical": supercritical_pair,
    "doubling": doubling_pair,
    "cycle": deterministic_cycle,
    "symmetric": symmetric_pair,
    "asymmetric": asymmetric_chain,
}


def model_from_spec(d: dict) -> BranchingModel:
    """Build a model from ``{"catalogue": name}`` (optionally with ``mu``) or explicit ``types``."""
    if "catalogue" in d:
        name = d["catalogue"]
        if name not in CATALOGUE:
            raise ModelError(f"unknown catalogue model {name!r}; known: {sorted(CATALOGUE)}")
        if "mu" not in d:
            return CATALOGUE[name]()
        try:
            return CATALOGUE[name](mu=float(d["mu"]))
        except TypeError:
            raise ModelError(f"catalogue model {name!r} has fixed rates; drop 'mu'") from None
    if "two_type" in d:
        p = d["two_type"]
        return two_type(float(p["mu1"]), float(p["mu2"]), float(p["p12"]), float(p["p21"]))
    return BranchingModel.from_dict(d)
