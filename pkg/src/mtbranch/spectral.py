"""Mean matrix, Perron decomposition, regime classification and critical constants."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from .model import BranchingModel, ModelError, offspring_moments

SUBCRITICAL = "subcritical"
CRITICAL = "critical"
SUPERCRITICAL = "supercritical"

REL_TOL = 1e-12
SIMPLE_TOL = 1e-9


class SpectralError(ValueError):
    pass


class DegenerateBranchingError(SpectralError):
    """Second-order branching constant vanishes (deterministic cycle)."""


@dataclass(frozen=True)
class PerronData:
    """Dominant eigen-data of the mean matrix.

    ``A @ u = rho * u`` and ``v @ A = rho * v`` with ``sum(u) = 1`` and
    ``u @ v = 1``. ``A`` is kept alongside since resolvent directions need it.
    """

    rho: float
    u: np.ndarray
    v: np.ndarray
    regime: str
    A: np.ndarray


@dataclass(frozen=True)
class CriticalConstants:
    Q: float
    beta: float
    c: float


def is_regular(A: np.ndarray) -> bool:
    """Irreducible off-diagonal pattern and strictly positive ``exp(A)``."""
    A = np.asarray(A, dtype=float)
    k = A.shape[0]
    if k == 1:
        return True
    pattern = (A > 0) & ~np.eye(k, dtype=bool)
    ncomp, _ = connected_components(pattern.astype(int), directed=True, connection="strong")
    if ncomp != 1:
        return False
    return bool(np.all(scipy.linalg.expm(A) > 1e-14))


def build_mean_matrix(model: BranchingModel, require_regular: bool = True) -> np.ndarray:
    """Generator of the mean counts: ``E[N(t)] = expm(A t) @ n0``.

    ``a[i, j] = mu[j] * (m[j, i] - [i == j])``, column ``j`` holding the
    rate at which a type ``j`` particle changes the expected type ``i`` count.
    """
    m, _ = offspring_moments(model)
    A = (m.T - np.eye(model.k)) * model.mu[np.newaxis, :]
    if require_regular and not is_regular(A):
        raise ModelError(f"mean matrix of model {model.name!r} is not regular")
    return A


def _dominant_vector(B: np.ndarray, iters: int = 2000) -> tuple[float, np.ndarray]:
    """Power iteration on a nonnegative primitive matrix followed by inverse iteration."""
    k = B.shape[0]
    x = np.full(k, 1.0 / k)
    lam = 0.0
    for _ in range(iters):
        y = B @ x
        lam = y.sum() / x.sum()
        y /= y.sum()
        if np.max(np.abs(y - x)) < 1e-13:
            x = y
            break
        x = y
    # refine: the shift is kept off the eigenvalue so the system stays solvable
    shift = lam + 1e-7 * max(1.0, abs(lam))
    M = B - shift * np.eye(k)
    for _ in range(50):
        try:
            y = np.linalg.solve(M, x)
        except np.linalg.LinAlgError:
            break
        y /= y.sum()
        done = np.max(np.abs(y - x)) < 1e-15
        x = y
        if done:
            break
    lam = float(x @ (B @ x) / (x @ x))
    return lam, x


def perron(A: np.ndarray) -> PerronData:
    """Perron root and normalized positive eigenvectors of a regular mean matrix."""
    A = np.asarray(A, dtype=float)
    k = A.shape[0]
    shift = np.max(np.abs(np.diag(A))) + 1.0
    B = A + shift * np.eye(k)
    if np.any(B < 0):
        raise SpectralError("off-diagonal entries of A must be nonnegative")
    lam_r, u = _dominant_vector(B)
    _, v = _dominant_vector(B.T)
    rho = lam_r - shift

    eig = np.linalg.eigvals(A)
    others = np.delete(eig, np.argmin(np.abs(eig - rho)))
    if others.size and np.max(others.real) > rho - SIMPLE_TOL:
        raise SpectralError("dominant eigenvalue is not simple")

    if u[0] < 0:
        u = -u
    u = u / u.sum()
    v = v / (u @ v)
    if np.any(u <= 0) or np.any(v <= 0):
        raise SpectralError("Perron eigenvectors are not positive; A is not regular")
    return PerronData(float(rho), u, v, sign_regime(rho), A.copy())


def _close(x: float, y: float) -> bool:
    return abs(x - y) <= REL_TOL * max(1.0, abs(x), abs(y))


def sign_regime(rho: float) -> str:
    if _close(rho, 0.0):
        return CRITICAL
    return SUBCRITICAL if rho < 0 else SUPERCRITICAL


def classify(rho: float, xi: float) -> tuple[str, str]:
    """Regime of ``rho`` and its comparison with an arrival growth exponent ``xi``.

    Returns e.g. ``("critical", "equal")``; the comparison is one of
    ``"less"``, ``"equal"``, ``"greater"`` and reads "rho is ... xi".
    """
    if _close(rho, xi):
        cmp = "equal"
    else:
        cmp = "less" if rho < xi else "greater"
    return sign_regime(rho), cmp


def critical_constants(model: BranchingModel, pd: PerronData) -> CriticalConstants:
    """Q, beta and c governing the gamma limit in the critical regime."""
    if pd.regime != CRITICAL:
        raise SpectralError(f"critical constants need rho = 0, got {pd.rho}")
    _, hess = offspring_moments(model)
    u, v = pd.u, pd.v
    Q = 0.5 * float(np.einsum("iln,l,n,i->", hess, u, u, v))
    if Q <= 1e-12:
        raise DegenerateBranchingError("Q vanishes: branching is deterministic")
    s = float(np.sum(u * v / model.mu))
    return CriticalConstants(Q=Q, beta=s * u[0] / Q, c=s * s / Q)


def matrix_exp(A: np.ndarray, t: float) -> np.ndarray:
    """``exp(A t)`` (scaling and squaring with Pade approximants)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return scipy.linalg.expm(np.asarray(A, dtype=float) * t)


def resolvent_direction(A: np.ndarray, xi: float, scale: float = 1.0, rho: float | None = None) -> np.ndarray:
    """``scale * (xi I - A)^{-1} n0`` for ``xi > rho``."""
    A = np.asarray(A, dtype=float)
    if rho is None:
        rho = float(np.max(np.linalg.eigvals(A).real))
    if xi <= rho or _close(xi, rho):
        raise SpectralError(f"resolvent needs xi > rho (xi={xi}, rho={rho})")
    n0 = np.zeros(A.shape[0])
    n0[0] = 1.0
    return scale * np.linalg.solve(xi * np.eye(A.shape[0]) - A, n0)
