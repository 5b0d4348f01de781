"""Search over probability simplices and stochastic kernels."""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .info import FinitePmf, Kernel

FEAS_TOL = 1e-9
DEFAULT_GRID_CAP = 10**7
DEFAULT_ORACLE_CAP = 10**8


class GridTooLarge(ValueError):
    def __init__(self, count: int, cap: int):
        super().__init__(f"grid would have {count} points, above the cap of {cap}")
        self.count = count
        self.cap = cap


@dataclass(frozen=True)
class SearchBudget:
    """Knobs shared by every witness search.

    ``grid_resolution`` r means simplex steps of 1/r.  ``time_limit`` makes
    results depend on machine speed, so it is off by default.
    """

    grid_resolution: int = 4
    random_restarts: int = 64
    refine_iterations: int = 500
    seed: int = 0
    time_limit: Optional[float] = None

    def __post_init__(self):
        if self.grid_resolution < 1:
            raise ValueError("grid_resolution must be >= 1")
        if self.random_restarts < 0 or self.refine_iterations < 0:
            raise ValueError("restart and iteration counts must be >= 0")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValueError("time_limit must be positive")

    def replace(self, **kw) -> "SearchBudget":
        vals = {k: getattr(self, k) for k in self.__dataclass_fields__}
        vals.update({k: v for k, v in kw.items() if v is not None})
        return SearchBudget(**vals)


@dataclass
class SearchOutcome:
    best_point: object
    best_objective: float
    feasible: bool
    evaluations: int
    slacks: Optional[np.ndarray] = None
    timed_out: bool = False


class Deadline:
    def __init__(self, seconds: Optional[float]):
        self.end = None if seconds is None else time.monotonic() + seconds

    def expired(self) -> bool:
        return self.end is not None and time.monotonic() > self.end


def restart_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, restart index)."""
    key = np.array([seed % 2**64, index % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def penalty(slacks, thresholds=0.0) -> float:
    s = np.asarray(slacks, dtype=float)
    return float(np.maximum(0.0, np.asarray(thresholds) - s).sum())


# ---------------------------------------------------------------- grids

def simplex_grid_size(dim: int, resolution: int) -> int:
    return math.comb(resolution + dim - 1, dim - 1)


def kernel_grid_size(rows: int, cols: int, resolution: int) -> int:
    return simplex_grid_size(cols, resolution) ** rows


def simplex_grid_array(dim: int, resolution: int, cap: int = DEFAULT_GRID_CAP) -> np.ndarray:
    """All compositions of ``resolution`` into ``dim`` parts, divided by ``resolution``.

    Rows come in lexicographic order of the bar positions.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    count = simplex_grid_size(dim, resolution)
    if count > cap:
        raise GridTooLarge(count, cap)
    out = np.empty((count, dim))
    n = resolution + dim - 1
    for i, bars in enumerate(itertools.combinations(range(n), dim - 1)):
        edges = (-1,) + bars + (n,)
        out[i] = np.diff(edges) - 1
    return out / resolution


def simplex_grid(dim: int, resolution: int, cap: int = DEFAULT_GRID_CAP) -> Iterator[FinitePmf]:
    for row in simplex_grid_array(dim, resolution, cap):
        yield FinitePmf(row)


def kernel_grid_array(rows: int, cols: int, resolution: int, cap: int = DEFAULT_GRID_CAP) -> np.ndarray:
    """Cartesian product of per-row simplex grids, shape (count, rows, cols).

    The first row varies slowest.
    """
    count = kernel_grid_size(rows, cols, resolution)
    if count > cap:
        raise GridTooLarge(count, cap)
    base = simplex_grid_array(cols, resolution, cap)
    idx = np.indices((len(base),) * rows).reshape(rows, -1).T
    return base[idx]


def kernel_grid(rows: int, cols: int, resolution: int, cap: int = DEFAULT_GRID_CAP) -> Iterator[Kernel]:
    for m in kernel_grid_array(rows, cols, resolution, cap):
        yield Kernel(m)


def random_kernel(rng: np.random.Generator, rows: int, cols: int, concentration: float = 1.0) -> np.ndarray:
    return rng.dirichlet(np.full(cols, concentration), size=rows)


# ---------------------------------------------------------------- local refinement

def _renorm(row: np.ndarray) -> np.ndarray:
    row = np.maximum(row, 0.0)
    return row / row.sum()


def refine_local(
    evaluate: Callable,
    start: Sequence[np.ndarray],
    budget: SearchBudget,
    *,
    thresholds=0.0,
    initial_step: float = 0.25,
    min_step: float = 1e-10,
    deadline: Optional[Deadline] = None,
) -> SearchOutcome:
    """Coordinate descent over the rows of a list of stochastic matrices.

    ``evaluate(blocks)`` returns either a float to minimize or an array of
    slacks; slacks are turned into the penalty ``sum(max(0, thresholds - s))``
    and the search stops as soon as it reaches zero.  A move bumps one entry
    by +/- step and renormalizes its row; only strict improvements are kept.
    """
    blocks = [np.array(b, dtype=float, copy=True).reshape(np.shape(b) if np.ndim(b) == 2 else (1, -1))
              for b in start]
    shapes = [np.shape(b) for b in start]

    def score(bl):
        val = evaluate([b.reshape(s) for b, s in zip(bl, shapes)])
        if np.ndim(val) == 0:
            return float(val), None
        sl = np.asarray(val, dtype=float)
        return penalty(sl, thresholds), sl

    best, best_sl = score(blocks)
    evals = 1
    penalized = best_sl is not None
    coords = [(b, i, j) for b, blk in enumerate(blocks) for i in range(blk.shape[0])
              for j in range(blk.shape[1]) if blk.shape[1] > 1]
    step = initial_step
    it = 0
    timed_out = False
    while coords and it < budget.refine_iterations and step >= min_step:
        if penalized and best <= 0.0:
            break
        improved = False
        for b, i, j in coords:
            if it >= budget.refine_iterations:
                break
            if deadline is not None and deadline.expired():
                timed_out = True
                break
            it += 1
            row = blocks[b][i]
            for sign in (1.0, -1.0):
                cand = row.copy()
                cand[j] += sign * step
                if cand[j] < 0:
                    cand[j] = 0.0
                if cand.sum() <= 0:
                    continue
                cand = _renorm(cand)
                if np.array_equal(cand, row):
                    continue
                trial = list(blocks)
                trial[b] = blocks[b].copy()
                trial[b][i] = cand
                val, sl = score(trial)
                evals += 1
                if val < best:
                    blocks, best, best_sl = trial, val, sl
                    improved = True
                    break
            if penalized and best <= 0.0:
                break
        if timed_out:
            break
        if not improved:
            step /= 2
    point = [b.reshape(s) for b, s in zip(blocks, shapes)]
    feasible = bool(penalized and best <= 0.0)
    return SearchOutcome(point, best, feasible, evals, best_sl, timed_out)


# ---------------------------------------------------------------- channel capacity

def _kl_rows(w: np.ndarray, q: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(w > 0, w * np.log2(np.where(w > 0, w, 1.0) / np.where(q > 0, q, 1.0)), 0.0)
    return terms.sum(axis=1)


def capacity_achieving_input(channel, tol: float = 1e-10, max_iter: int = 200_000):
    """Blahut-Arimoto alternating maximization.

    Returns ``(capacity_bits, input_pmf)``; stops once the gap between the
    upper bound ``max_x D(W(.|x) || q)`` and the current rate drops below
    ``tol``.
    """
    w = channel.matrix if isinstance(channel, Kernel) else np.asarray(channel, dtype=float)
    p = np.full(w.shape[0], 1.0 / w.shape[0])
    rate = 0.0
    for _ in range(max_iter):
        q = p @ w
        dx = _kl_rows(w, q)
        rate = float(p @ dx)
        upper = float(dx.max())
        if upper - rate < tol:
            break
        p = p * np.exp2(dx)
        p /= p.sum()
    return max(0.0, rate), p


def capacity(channel, tol: float = 1e-10) -> float:
    return capacity_achieving_input(channel, tol)[0]


# ---------------------------------------------------------------- brute-force oracle

def brute_force_oracle(
    evaluator: Callable,
    dims: Sequence[int],
    resolution: int,
    *,
    thresholds=0.0,
    cap: int = DEFAULT_ORACLE_CAP,
    batched: bool = True,
    batch_size: int = 1 << 16,
) -> SearchOutcome:
    """Exhaustive scan of a product of simplex grids.

    ``dims`` lists the dimension of each simplex factor; a point is the
    concatenation of one grid point per factor, first factor varying
    slowest.  ``evaluator`` maps a (batch, sum(dims)) array to slacks of
    shape (batch, k) when ``batched``, else one vector to one slack vector.
    The scan never stops early, so the returned penalty is the global grid
    minimum (first minimizer in scan order).
    """
    grids = [simplex_grid_array(d, resolution, cap) for d in dims]
    sizes = [len(g) for g in grids]
    total = int(np.prod(sizes, dtype=object)) if sizes else 1
    if total > cap:
        raise GridTooLarge(total, cap)
    thr = np.asarray(thresholds, dtype=float)
    best_val = math.inf
    best_point = None
    best_sl = None
    evals = 0
    for start in range(0, total, batch_size):
        flat = np.arange(start, min(total, start + batch_size))
        idx = np.unravel_index(flat, sizes)
        pts = np.concatenate([g[i] for g, i in zip(grids, idx)], axis=1)
        if batched:
            sl = np.asarray(evaluator(pts), dtype=float)
        else:
            sl = np.array([np.atleast_1d(evaluator(p)) for p in pts], dtype=float)
        sl = sl.reshape(len(pts), -1)
        pen = np.maximum(0.0, thr - sl).sum(axis=1)
        evals += len(pts)
        k = int(np.argmin(pen))
        if pen[k] < best_val:
            best_val = float(pen[k])
            best_point = pts[k].copy()
            best_sl = sl[k].copy()
    return SearchOutcome(best_point, best_val, best_val <= 0.0, evals, best_sl)
