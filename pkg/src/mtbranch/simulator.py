"""Event-driven simulation of the branching process, with or without immigration.

Type counts of a Markov branching process with exponential lifetimes form a
continuous-time Markov chain, so one aggregate clock per path suffices: with
counts ``N`` the next death happens after ``Exp(sum_j N_j mu_j)`` and hits
type ``j`` with probability ``N_j mu_j / sum``. Immigrant arrivals (always type
0) are interleaved with these events; redrawing the death clock after an
arrival is exact by memorylessness.

Random streams
--------------
Bulk runs split replicates into fixed chunks of :data:`CHUNK` paths. Chunk
``c`` draws from ``Philox(key=seed, counter=c << 192)``, a counter-based stream
addressed by ``(seed, c)`` only, so results do not depend on the number of
workers or on scheduling order.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numba
import numpy as np

from .arrivals import (
    DEFAULT_ARRIVAL_CAP,
    NONE,
    ArrivalSpec,
    CapacityError,
    GppParams,
    NoArrivals,
    next_arrival,
)
from .model import BranchingModel, kernel_tables
from .spectral import SUPERCRITICAL, PerronData

CHUNK = 512
DEFAULT_POPULATION_CAP = 10_000_000
EXPLICIT = 5  # arrival kind: precomputed times passed in ``tt``

OK, POPULATION_OVERFLOW, ARRIVAL_OVERFLOW = 0, 1, 2


@dataclass
class Trajectory:
    """Counts of one path at the grid times (state after all events at times <= t)."""

    times: np.ndarray
    counts: np.ndarray
    replicate: int = 0
    seed: object = None


@dataclass
class WSample:
    value: float
    t_big: float
    provenance: dict = field(default_factory=dict)


# -- compiled core ----------------------------------------------------------

@numba.njit(nogil=True, cache=True)
def _run_path(rng, mu, cdf, children, nsupp, init, grid, kind, par, tt, tl, pop_cap, arr_cap, out):
    k = mu.size
    ng = grid.size
    N = init.copy()
    pop = 0
    for j in range(k):
        pop += N[j]
    t = 0.0
    g = 0
    count = 0
    cum = 0.0
    if kind == EXPLICIT:
        ta = tt[0] if tt.size > 0 else np.inf
    else:
        ta, cum = next_arrival(kind, par, tt, tl, 0.0, 0.0, 0, rng)
    rates = np.empty(k)
    while g < ng:
        total = 0.0
        for j in range(k):
            rates[j] = N[j] * mu[j]
            total += rates[j]
        if total > 0.0:
            tb = t + rng.standard_exponential() / total
        else:
            tb = np.inf
        tn = tb if tb < ta else ta
        while g < ng and grid[g] < tn:
            for j in range(k):
                out[g, j] = N[j]
            g += 1
        if g >= ng:
            break
        if ta <= tb:
            t = ta
            N[0] += 1
            pop += 1
            count += 1
            if count > arr_cap:
                return ARRIVAL_OVERFLOW
            if kind == EXPLICIT:
                ta = tt[count] if count < tt.size else np.inf
            else:
                ta, cum = next_arrival(kind, par, tt, tl, t, cum, count, rng)
        else:
            t = tb
            x = rng.random() * total
            j = 0
            acc = rates[0]
            while acc <= x and j < k - 1:
                j += 1
                acc += rates[j]
            y = rng.random()
            m = 0
            while m < nsupp[j] - 1 and cdf[j, m] <= y:
                m += 1
            N[j] -= 1
            pop -= 1
            for i in range(k):
                N[i] += children[j, m, i]
                pop += children[j, m, i]
        if pop > pop_cap:
            return POPULATION_OVERFLOW
    return OK


@numba.njit(nogil=True, cache=True)
def _run_batch(rng, n, mu, cdf, children, nsupp, init, grid, kind, par, tt, tl, pop_cap, arr_cap, out):
    for p in range(n):
        st = _run_path(rng, mu, cdf, children, nsupp, init, grid, kind, par, tt, tl,
                       pop_cap, arr_cap, out[p])
        if st != OK:
            return p, st
    return -1, OK


@numba.njit(nogil=True, cache=True)
def _run_superposed(rng, mu, cdf, children, nsupp, times, grid, pop_cap, out):
    k = mu.size
    init = np.zeros(k, dtype=np.int64)
    init[0] = 1
    empty = np.zeros(0)
    par = np.zeros(4)
    sub = np.zeros((grid.size, k), dtype=np.int64)
    out[:, :] = 0
    for i in range(times.size):
        first = 0
        while first < grid.size and grid[first] < times[i]:
            first += 1
        if first == grid.size:
            continue
        shifted = grid[first:] - times[i]
        st = _run_path(rng, mu, cdf, children, nsupp, init, shifted, NONE, par, empty, empty,
                       pop_cap, 0, sub[first:])
        if st != OK:
            return st
        for g in range(first, grid.size):
            for j in range(k):
                out[g, j] += sub[g, j]
    return OK


@numba.njit(nogil=True, cache=True)
def _run_compound(rng, counts, t, growth, mu, cdf, children, nsupp, pop_cap, out):
    # arrival ages drawn iid from the density proportional to exp(growth * y) on [0, t]
    k = mu.size
    init = np.zeros(k, dtype=np.int64)
    init[0] = 1
    empty = np.zeros(0)
    par = np.zeros(4)
    grid = np.zeros(1)
    sub = np.zeros((1, k), dtype=np.int64)
    scale = np.expm1(growth * t)
    for p in range(counts.size):
        for j in range(k):
            out[p, j] = 0
        for i in range(counts[p]):
            y = np.log1p(rng.random() * scale) / growth
            grid[0] = t - y
            st = _run_path(rng, mu, cdf, children, nsupp, init, grid, NONE, par, empty, empty,
                           pop_cap, 0, sub)
            if st != OK:
                return p, st
            for j in range(k):
                out[p, j] += sub[0, j]
    return -1, OK


# -- streams ----------------------------------------------------------------

def chunk_stream(seed: int, chunk: int) -> np.random.Generator:
    """Random stream of replicate chunk ``chunk`` under master seed ``seed``."""
    if not 0 <= int(seed) < 2 ** 128:
        raise ValueError("seed must be an integer in [0, 2**128)")
    return np.random.Generator(np.random.Philox(key=int(seed), counter=int(chunk) << 192))


def _chunks(n: int) -> list[tuple[int, int, int]]:
    return [(c, s, min(s + CHUNK, n)) for c, s in enumerate(range(0, n, CHUNK))]


def map_chunks(n: int, seed: int, work: Callable[[np.random.Generator, int, int], None],
               workers: int = 1) -> None:
    """Run ``work(rng, start, stop)`` over every replicate chunk.

    ``work`` must write its results into preallocated storage indexed by
    replicate; the outcome is independent of ``workers``.
    """
    tasks = _chunks(n)

    def run(task):
        c, start, stop = task
        work(chunk_stream(seed, c), start, stop)

    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            run(task)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, tasks))


def _model_args(model: BranchingModel):
    cdf, children, nsupp = kernel_tables(model)
    return np.ascontiguousarray(model.mu, dtype=float), cdf, children, nsupp


def _arrival_args(arrivals):
    if arrivals is None:
        arrivals = NoArrivals()
    if isinstance(arrivals, np.ndarray) or isinstance(arrivals, (list, tuple)):
        times = np.sort(np.asarray(arrivals, dtype=float))
        return EXPLICIT, np.zeros(4), times, np.zeros(0)
    kind, par, tt, tl = arrivals.encode()
    return kind, par, np.ascontiguousarray(tt, dtype=float), np.ascontiguousarray(tl, dtype=float)


def _check_grid(grid) -> np.ndarray:
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a nonempty 1-d array")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be nonnegative and strictly increasing")
    return grid


def _init_vector(model: BranchingModel, init) -> np.ndarray:
    if init is None:
        init = np.zeros(model.k, dtype=np.int64)
        init[0] = 1
        return init
    init = np.asarray(init, dtype=np.int64)
    if init.shape != (model.k,) or np.any(init < 0):
        raise ValueError("init must be a nonnegative integer vector of length k")
    return init


def _raise_status(status: int, replicate: int, pop_cap: int, arr_cap: int):
    if status == POPULATION_OVERFLOW:
        raise CapacityError(f"replicate {replicate}: population exceeded cap {pop_cap}")
    if status == ARRIVAL_OVERFLOW:
        raise CapacityError(f"replicate {replicate}: arrivals exceeded cap {arr_cap}")


# -- public API ---------------------------------------------------------------

def simulate_batch(model: BranchingModel, grid, n_paths: int, seed: int, arrivals=None,
                   init=None, workers: int = 1, pop_cap: int = DEFAULT_POPULATION_CAP,
                   arrival_cap: int = DEFAULT_ARRIVAL_CAP) -> np.ndarray:
    """Simulate ``n_paths`` independent replicates.

    Parameters
    ----------
    arrivals : arrival spec, array of times, or None
        Immigration stream; ``None`` simulates the process started from
        ``init`` without immigration. With immigration ``init`` defaults to
        the empty population.

    Returns
    -------
    ndarray, shape (n_paths, len(grid), k)
    """
    grid = _check_grid(grid)
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    mu, cdf, children, nsupp = _model_args(model)
    kind, par, tt, tl = _arrival_args(arrivals)
    if kind == NONE:
        init = _init_vector(model, init)
    elif init is None:
        init = np.zeros(model.k, dtype=np.int64)
    else:
        init = _init_vector(model, init)
    out = np.zeros((n_paths, grid.size, model.k), dtype=np.int64)

    def work(rng, start, stop):
        bad, st = _run_batch(rng, stop - start, mu, cdf, children, nsupp, init, grid, kind, par,
                             tt, tl, pop_cap, arrival_cap, out[start:stop])
        if bad >= 0:
            _raise_status(st, start + bad, pop_cap, arrival_cap)

    map_chunks(n_paths, seed, work, workers)
    return out


def simulate_no(model: BranchingModel, grid, rng: np.random.Generator, init=None,
                pop_cap: int = DEFAULT_POPULATION_CAP) -> Trajectory:
    """One path of the process without immigration, started from ``init`` (default one type-0 particle)."""
    grid = _check_grid(grid)
    mu, cdf, children, nsupp = _model_args(model)
    init = _init_vector(model, init)
    out = np.zeros((grid.size, model.k), dtype=np.int64)
    empty = np.zeros(0)
    st = _run_path(rng, mu, cdf, children, nsupp, init, grid, NONE, np.zeros(4), empty, empty,
                   pop_cap, 0, out)
    _raise_status(st, 0, pop_cap, 0)
    return Trajectory(grid, out)


def simulate_with_immigration(model: BranchingModel, arrivals, grid, rng: np.random.Generator,
                              pop_cap: int = DEFAULT_POPULATION_CAP,
                              arrival_cap: int = DEFAULT_ARRIVAL_CAP) -> Trajectory:
    """One path with immigration, each arrival adding a type-0 particle.

    ``arrivals`` is an arrival spec (sampled lazily inside the event loop) or
    an explicit sequence of arrival times.
    """
    grid = _check_grid(grid)
    mu, cdf, children, nsupp = _model_args(model)
    kind, par, tt, tl = _arrival_args(arrivals)
    out = np.zeros((grid.size, model.k), dtype=np.int64)
    st = _run_path(rng, mu, cdf, children, nsupp, np.zeros(model.k, dtype=np.int64), grid,
                   kind, par, tt, tl, pop_cap, arrival_cap, out)
    _raise_status(st, 0, pop_cap, arrival_cap)
    return Trajectory(grid, out)


def simulate_superposed(model: BranchingModel, arrival_times, grid, rng: np.random.Generator,
                        pop_cap: int = DEFAULT_POPULATION_CAP) -> Trajectory:
    """Immigration process built literally as a sum of independent subtrees, one per arrival.

    Slower than :func:`simulate_with_immigration`; kept as a reference for it.
    """
    grid = _check_grid(grid)
    mu, cdf, children, nsupp = _model_args(model)
    times = np.sort(np.asarray(arrival_times, dtype=float))
    out = np.zeros((grid.size, model.k), dtype=np.int64)
    st = _run_superposed(rng, mu, cdf, children, nsupp, times, grid, pop_cap, out)
    _raise_status(st, 0, pop_cap, 0)
    return Trajectory(grid, out)


def simulate_gpp_compound(model: BranchingModel, params: GppParams, t: float, n_paths: int,
                          seed: int, workers: int = 1,
                          pop_cap: int = DEFAULT_POPULATION_CAP) -> np.ndarray:
    """Counts at time ``t`` under GPP immigration, sampled through arrival counts.

    Uses that ``S(t)`` is negative binomial with ``r = b/a``,
    ``p = 1 - exp(-a lam t)`` and that, given ``S(t) = n``, the arrival times
    are iid with density proportional to ``exp(a lam y)`` on ``[0, t]``.
    The cost is independent of how many arrivals fall in the window when the
    model is pure death (survivors are then binomial), which makes very long
    horizons tractable.

    Returns
    -------
    ndarray, shape (n_paths, k)
    """
    if t <= 0:
        raise ValueError("t must be positive")
    g = params.growth
    r = params.b / params.a
    q = np.exp(-g * t)
    out = np.zeros((n_paths, model.k), dtype=np.int64)
    mu, cdf, children, nsupp = _model_args(model)
    if model.is_pure_death():
        m1 = model.mu[0]
        # survival probability of a type-0 particle with an age drawn from the arrival density
        pbar = g * np.exp(-m1 * t) * np.expm1((g + m1) * t) / ((g + m1) * np.expm1(g * t))

    def work(rng, start, stop):
        counts = rng.negative_binomial(r, q, size=stop - start).astype(np.int64)
        if model.is_pure_death():
            out[start:stop, 0] = rng.binomial(counts, pbar)
            return
        bad, st = _run_compound(rng, counts, float(t), g, mu, cdf, children, nsupp, pop_cap,
                                out[start:stop])
        if bad >= 0:
            _raise_status(st, start + bad, pop_cap, 0)

    map_chunks(n_paths, seed, work, workers)
    return out


def default_t_big(rho: float, tol: float = 1e-3) -> float:
    """First time with ``exp(-rho t) < tol``."""
    if rho <= 0:
        raise ValueError("W proxy needs rho > 0")
    return float(np.log(1.0 / tol) / rho)


def sample_W(model: BranchingModel, pd: PerronData, t_big: float | None,
             rng: np.random.Generator) -> WSample:
    """Proxy draw of the martingale limit: ``<u, N(t_big)> exp(-rho t_big)``."""
    if pd.regime != SUPERCRITICAL:
        raise ValueError(f"W is only sampled in the supercritical regime, not {pd.regime}")
    t_big = default_t_big(pd.rho) if t_big is None else float(t_big)
    traj = simulate_no(model, [t_big], rng)
    value = float(pd.u @ traj.counts[0]) * np.exp(-pd.rho * t_big)
    return WSample(value, t_big, {"model": model.name, "rho": pd.rho})


def sample_W_batch(model: BranchingModel, pd: PerronData, n: int, seed: int,
                   t_big: float | None = None, workers: int = 1) -> np.ndarray:
    """``n`` independent W proxies (see :func:`sample_W`)."""
    if pd.regime != SUPERCRITICAL:
        raise ValueError(f"W is only sampled in the supercritical regime, not {pd.regime}")
    t_big = default_t_big(pd.rho) if t_big is None else float(t_big)
    counts = simulate_batch(model, [t_big], n, seed, workers=workers)[:, 0, :]
    return counts @ pd.u * np.exp(-pd.rho * t_big)


def write_trajectories_csv(path, grid, counts: np.ndarray, replicate_offset: int = 0) -> Path:
    """Write ``counts[rep, g, j]`` as rows ``replicate, t, N_1 .. N_k``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    counts = np.asarray(counts)
    if counts.ndim == 2:
        counts = counts[np.newaxis]
    k = counts.shape[2]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["replicate", "t"] + [f"N_{j + 1}" for j in range(k)])
        for r in range(counts.shape[0]):
            for g, t in enumerate(grid):
                w.writerow([r + replicate_offset, repr(float(t))] + counts[r, g].tolist())
    return path
