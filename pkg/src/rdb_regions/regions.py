"""Membership certification and exclusion tests for discrete RDB regions.

A quadruple (R, D1, D2, rho) is *certified* achievable by exhibiting an
auxiliary system whose evaluated constraints all hold (sound, incomplete).
It is *heuristically excluded* when, for some helper auxiliary P(U|T), a
bounded search finds no point satisfying the outer-bound inequalities;
because auxiliary alphabets are capped, exclusion is never a proof.

Distortion constraints hold with tolerance ``FEAS_TOL``; the strict rate
inequality of the inner bound is certified with margin ``STRICT_MARGIN``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .info import (
    FinitePmf,
    JointDist,
    Kernel,
    ValidationError,
    chain_compose,
    conditional_entropy,
    conditional_mutual_information,
    entropy_array,
    marginalize,
    mutual_information,
)
from .search import (
    FEAS_TOL,
    Deadline,
    SearchBudget,
    capacity_achieving_input,
    kernel_grid_array,
    kernel_grid_size,
    penalty,
    random_kernel,
    refine_local,
    restart_rng,
    simplex_grid_array,
)

STRICT_MARGIN = 1e-9
SCAN_CAP = 4_000_000
INNER_SLACKS = ("rate", "weak_channel", "sum_channel", "distortion1", "distortion2")
OUTER_SLACKS = ("rate_total", "rate_weak", "weak_channel", "sum_channel", "distortion1", "distortion2")
INNER_THRESHOLDS = np.array([STRICT_MARGIN, -FEAS_TOL, -FEAS_TOL, -FEAS_TOL, -FEAS_TOL])


class PreconditionError(ValueError):
    """Instance does not have the structure an operation requires."""


class Status(enum.Enum):
    CERTIFIED_IN = "CertifiedIn"
    NO_WITNESS_FOUND = "NoWitnessFound"
    HEURISTICALLY_EXCLUDED = "HeuristicallyExcluded"
    NOT_EXCLUDED = "NotExcluded"

    def __str__(self):
        return self.value

    @property
    def positive(self) -> bool:
        return self in (Status.CERTIFIED_IN, Status.NOT_EXCLUDED)


def hamming(n: int, m: Optional[int] = None) -> np.ndarray:
    m = n if m is None else m
    return 1.0 - np.eye(n, m)


# ---------------------------------------------------------------- data model

@dataclass(frozen=True)
class DiscreteInstance:
    """Joint source P(S,T) and degraded broadcast channel P(Y|X) P(Z|Y)."""

    p_st: JointDist
    p_y_given_x: Kernel
    p_z_given_y: Kernel
    d1_matrix: np.ndarray
    d2_matrix: np.ndarray

    def __post_init__(self):
        if self.p_st.mass.ndim != 2:
            raise ValidationError("p_st must be a two-axis joint distribution")
        if self.p_y_given_x.cols != self.p_z_given_y.rows:
            raise ValidationError("P(Z|Y) rows must match the output alphabet of P(Y|X)")
        for name in ("d1_matrix", "d2_matrix"):
            d = np.array(getattr(self, name), dtype=float)
            if d.ndim != 2 or d.shape[0] != self.ns:
                raise ValidationError(f"{name} must have one row per source symbol")
            if not np.all(np.isfinite(d)) or np.any(d < 0):
                raise ValidationError(f"{name} must be finite and nonnegative")
            d.setflags(write=False)
            object.__setattr__(self, name, d)

    @classmethod
    def build(cls, p_st, p_y_given_x, p_z_given_y, d1=None, d2=None) -> "DiscreteInstance":
        """Convenience constructor; missing distortions default to Hamming."""
        j = p_st if isinstance(p_st, JointDist) else JointDist(np.asarray(p_st, dtype=float), ("S", "T"))
        ky = p_y_given_x if isinstance(p_y_given_x, Kernel) else Kernel(p_y_given_x)
        kz = p_z_given_y if isinstance(p_z_given_y, Kernel) else Kernel(p_z_given_y)
        ns = j.mass.shape[0]
        return cls(j, ky, kz, hamming(ns) if d1 is None else d1, hamming(ns) if d2 is None else d2)

    @property
    def ns(self) -> int:
        return self.p_st.mass.shape[0]

    @property
    def nt(self) -> int:
        return self.p_st.mass.shape[1]

    @property
    def nx(self) -> int:
        return self.p_y_given_x.rows

    @property
    def n_hat1(self) -> int:
        return self.d1_matrix.shape[1]

    @property
    def n_hat2(self) -> int:
        return self.d2_matrix.shape[1]

    @property
    def p_z_given_x(self) -> Kernel:
        return Kernel(self.p_y_given_x.matrix @ self.p_z_given_y.matrix)

    @property
    def p_s(self) -> np.ndarray:
        return self.p_st.mass.sum(axis=1)

    @property
    def t_equals_s(self) -> bool:
        m = self.p_st.mass
        return m.shape[0] == m.shape[1] and np.all(m[~np.eye(m.shape[0], dtype=bool)] <= 0)


@dataclass(frozen=True)
class RdbQuadruple:
    rate: float
    d1: float
    d2: float
    rho: float

    def __post_init__(self):
        for name in ("rate", "d1", "d2", "rho"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and nonnegative, got {v!r}")

    def shifted(self, delta: float) -> "RdbQuadruple":
        return RdbQuadruple(self.rate + delta, self.d1 + delta, self.d2 + delta, self.rho)


@dataclass(frozen=True)
class AuxSizes:
    u1: int
    u2: int
    v1: int
    v2: int
    w: int

    @classmethod
    def default(cls, inst: DiscreteInstance) -> "AuxSizes":
        return cls(inst.ns, inst.ns, inst.nt, inst.nt, inst.nx + 1)

    def check(self, inst: DiscreteInstance) -> None:
        ns, nt, nx = inst.ns, inst.nt, inst.nx
        caps = dict(u1=ns + 4, u2=ns * (ns + 4) + 1, v1=nt + 3, v2=nt * (nt + 3) + 1, w=nx + 1)
        for k, cap in caps.items():
            v = getattr(self, k)
            if not 1 <= v <= cap:
                raise ValidationError(f"|{k.upper()}| = {v} outside the allowed range [1, {cap}]")


@dataclass(frozen=True)
class AuxWitness:
    """A concrete auxiliary system for the inner bound.

    ``p_u1u2_given_s`` columns enumerate (u1, u2) with u2 fastest.
    ``h1[u1, v1]`` and ``h2[u1, u2, v2]`` are reconstruction symbol indices.
    """

    p_u1u2_given_s: Kernel
    p_v2_given_t: Kernel
    p_v1_given_v2: Kernel
    p_w: FinitePmf
    p_x_given_w: Kernel
    h1: np.ndarray
    h2: np.ndarray
    n_u1: int
    n_u2: int

    @property
    def sizes(self) -> AuxSizes:
        return AuxSizes(self.n_u1, self.n_u2, self.p_v1_given_v2.cols, self.p_v2_given_t.cols,
                        self.p_w.alphabet_size)

    def to_dict(self) -> dict:
        return {
            "n_u1": self.n_u1,
            "n_u2": self.n_u2,
            "p_u1u2_given_s": self.p_u1u2_given_s.matrix.tolist(),
            "p_v2_given_t": self.p_v2_given_t.matrix.tolist(),
            "p_v1_given_v2": self.p_v1_given_v2.matrix.tolist(),
            "p_w": self.p_w.probs.tolist(),
            "p_x_given_w": self.p_x_given_w.matrix.tolist(),
            "h1": np.asarray(self.h1).tolist(),
            "h2": np.asarray(self.h2).tolist(),
        }


@dataclass
class Verdict:
    status: Status
    slacks: dict = field(default_factory=dict)
    witness: object = None
    certificate: Optional[np.ndarray] = None
    evaluations: int = 0
    flags: tuple = ()

    def to_dict(self) -> dict:
        out = {"status": str(self.status), "slacks": {k: float(v) for k, v in self.slacks.items()},
               "evaluations": int(self.evaluations), "flags": list(self.flags)}
        if self.witness is not None:
            out["witness"] = self.witness.to_dict() if hasattr(self.witness, "to_dict") else _jsonable(self.witness)
        if self.certificate is not None:
            out["certificate_p_u_given_t"] = np.asarray(self.certificate).tolist()
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (Kernel,)):
        return obj.matrix.tolist()
    if isinstance(obj, FinitePmf):
        return obj.probs.tolist()
    return obj


# ---------------------------------------------------------------- broadcast channel

@dataclass(frozen=True)
class BcPoint:
    i_wz: float
    i_xy_w: float
    p_w: np.ndarray
    p_x_given_w: np.ndarray


def _pareto(points: Sequence[BcPoint]) -> list:
    pts = sorted(points, key=lambda p: (-p.i_wz, -p.i_xy_w))
    out = []
    best_b = -math.inf
    for p in pts:
        if p.i_xy_w > best_b + 1e-12:
            out.append(p)
            best_b = p.i_xy_w
    return sorted(out, key=lambda p: (p.i_wz, -p.i_xy_w))


def bc_capacity_region(p_y_given_x: Kernel, p_z_given_y: Kernel, resolution: int = 4,
                       w_size: Optional[int] = None, include_endpoints: bool = True) -> list:
    """Pareto points of (I(W;Z), I(X;Y|W)) over P(W) P(X|W) on a grid.

    Points come sorted by increasing I(W;Z).  The two corner points use the
    exact capacity-achieving inputs: W = X for the weak receiver and a
    constant W for the strong one.
    """
    py = p_y_given_x.matrix
    pz = p_z_given_y.matrix
    nx = py.shape[0]
    nw = nx + 1 if w_size is None else w_size
    gw = simplex_grid_array(nw, resolution)
    gx = kernel_grid_array(nw, nx, resolution)
    stats = kernels.bc_scan(gw, gx, py, pz)
    pts = []
    for idx, (a, b, _) in enumerate(stats):
        i, k = divmod(idx, len(gx))
        pts.append(BcPoint(float(a), float(b), gw[i], gx[k]))
    if include_endpoints:
        cz, pxz = capacity_achieving_input(py @ pz)
        cy, pxy = capacity_achieving_input(py)
        if nw >= nx:
            pw = np.zeros(nw)
            pw[:nx] = pxz
            kx = np.vstack([np.eye(nx), np.tile(pxz, (nw - nx, 1))])
            pts.append(BcPoint(cz, 0.0, pw, kx))
        pw = np.zeros(nw)
        pw[0] = 1.0
        pts.append(BcPoint(0.0, cy, pw, np.tile(pxy, (nw, 1))))
    return _pareto(pts)


def _frontier_arrays(frontier: Sequence[BcPoint]) -> tuple:
    return (np.array([p.i_wz for p in frontier]), np.array([p.i_xy_w for p in frontier]))


# ---------------------------------------------------------------- inner bound

def _witness_joint(inst: DiscreteInstance, w: AuxWitness) -> JointDist:
    """Full composed joint over S,T,U1,U2,V2,V1 and W,X,Y,Z."""
    src = chain_compose([
        ("S", FinitePmf(inst.p_s)),
        ("T", Kernel(_cond_rows(inst.p_st.mass)), ("S",)),
        ("U", w.p_u1u2_given_s, ("S",)),
        ("V2", w.p_v2_given_t, ("T",)),
        ("V1", w.p_v1_given_v2, ("V2",)),
        ("W", w.p_w),
        ("X", w.p_x_given_w, ("W",)),
        ("Y", inst.p_y_given_x, ("X",)),
        ("Z", inst.p_z_given_y, ("Y",)),
    ])
    m = src.mass
    shape = m.shape[:2] + (w.n_u1, w.n_u2) + m.shape[3:]
    names = ("S", "T", "U1", "U2") + src.names[3:]
    return JointDist(m.reshape(shape), names)


def _cond_rows(m: np.ndarray) -> np.ndarray:
    tot = m.sum(axis=1, keepdims=True)
    out = np.where(tot > 0, m / np.where(tot > 0, tot, 1.0), 1.0 / m.shape[1])
    return out


def inner_constraints_eval(inst: DiscreteInstance, q: RdbQuadruple, w: AuxWitness) -> dict:
    """Signed slacks of the inner-bound constraints, computed on the full joint.

    This path composes the whole distribution through ``info`` and shares
    no code with the compiled search kernels.
    """
    w.sizes.check(inst)
    if w.p_u1u2_given_s.rows != inst.ns or w.p_u1u2_given_s.cols != w.n_u1 * w.n_u2:
        raise ValidationError("P(U1,U2|S) has the wrong shape")
    if w.p_v2_given_t.rows != inst.nt or w.p_v1_given_v2.rows != w.p_v2_given_t.cols:
        raise ValidationError("helper description kernels do not chain")
    if w.p_x_given_w.rows != w.p_w.alphabet_size or w.p_x_given_w.cols != inst.nx:
        raise ValidationError("P(X|W) has the wrong shape")
    j = _witness_joint(inst, w)
    i_rate = (conditional_mutual_information(j, ["U1"], ["S"], ["V1"])
              + conditional_mutual_information(j, ["U2"], ["S"], ["U1", "V2"]))
    i_v1t = mutual_information(j, ["V1"], ["T"])
    i_v2t = conditional_mutual_information(j, ["V2"], ["T"], ["U1", "V1"])
    i_wz = mutual_information(j, ["W"], ["Z"])
    i_xyw = conditional_mutual_information(j, ["X"], ["Y"], ["W"])
    m1 = marginalize(j, ["S", "U1", "V1"]).mass
    m2 = marginalize(j, ["S", "U1", "U2", "V2"]).mass
    h1 = np.asarray(w.h1, dtype=int)
    h2 = np.asarray(w.h2, dtype=int)
    ed1 = float(sum(m1[s] * inst.d1_matrix[s][h1] for s in range(inst.ns)).sum())
    ed2 = float(sum(m2[s] * inst.d2_matrix[s][h2] for s in range(inst.ns)).sum())
    return {
        "rate": q.rate - i_rate,
        "weak_channel": q.rho * i_wz - i_v1t,
        "sum_channel": q.rho * (i_wz + i_xyw) - i_v1t - i_v2t,
        "distortion1": q.d1 - ed1,
        "distortion2": q.d2 - ed2,
    }


def inner_slacks_ok(slacks: dict) -> bool:
    vals = np.array([slacks[k] for k in INNER_SLACKS])
    return bool(np.all(vals >= INNER_THRESHOLDS))


def optimal_maps(inst: DiscreteInstance, ku, kv2, kv1, n_u1: int, n_u2: int) -> tuple:
    """Distortion-minimizing reconstruction tables; lowest index wins ties."""
    p_st = inst.p_st.mass
    ku = np.asarray(ku).reshape(inst.ns, n_u1, n_u2)
    j = np.einsum("st,sab,tv,vw->sabwv", p_st, ku, kv2, kv1)  # s,u1,u2,v1,v2
    m1 = j.sum(axis=(2, 4))  # s,u1,v1
    m2 = j.sum(axis=3)  # s,u1,u2,v2
    c1 = np.einsum("suv,sk->uvk", m1, inst.d1_matrix)
    c2 = np.einsum("sabv,sk->abvk", m2, inst.d2_matrix)
    return np.argmin(c1, axis=-1), np.argmin(c2, axis=-1)


def make_witness(inst, ku, kv2, kv1, point: BcPoint, sizes: AuxSizes) -> AuxWitness:
    h1, h2 = optimal_maps(inst, ku, kv2, kv1, sizes.u1, sizes.u2)
    return AuxWitness(
        p_u1u2_given_s=Kernel(_rownorm(ku)),
        p_v2_given_t=Kernel(_rownorm(kv2)),
        p_v1_given_v2=Kernel(_rownorm(kv1)),
        p_w=FinitePmf(np.asarray(point.p_w) / np.sum(point.p_w)),
        p_x_given_w=Kernel(_rownorm(point.p_x_given_w)),
        h1=h1,
        h2=h2,
        n_u1=sizes.u1,
        n_u2=sizes.u2,
    )


def _rownorm(m) -> np.ndarray:
    m = np.maximum(np.asarray(m, dtype=float), 0.0)
    return m / m.sum(axis=1, keepdims=True)


def _inner_point_slacks(stats: np.ndarray, q: RdbQuadruple, a: np.ndarray, b: np.ndarray) -> tuple:
    """Slacks for stats rows (N, 6) against every frontier point (F,).

    Returns (slacks (N, 5) at each row's best frontier point, penalties (N,),
    best frontier index (N,)).
    """
    n = len(stats)
    base = np.empty((n, 5))
    base[:, 0] = q.rate - stats[:, 0] - stats[:, 1]
    base[:, 3] = q.d1 - stats[:, 4]
    base[:, 4] = q.d2 - stats[:, 5]
    weak = q.rho * a[None, :] - stats[:, 2:3]
    total = q.rho * (a + b)[None, :] - stats[:, 2:3] - stats[:, 3:4]
    ch_pen = np.maximum(0.0, -FEAS_TOL - weak) + np.maximum(0.0, -FEAS_TOL - total)
    best = np.argmin(ch_pen, axis=1)
    rows = np.arange(n)
    base[:, 1] = weak[rows, best]
    base[:, 2] = total[rows, best]
    pen = np.maximum(0.0, INNER_THRESHOLDS[None, :] - base).sum(axis=1)
    return base, pen, best


def _reduce_resolution(counts_fn, resolution: int, cap: int) -> int:
    r = resolution
    while r > 1 and counts_fn(r) > cap:
        r -= 1
    return r


def inner_oracle_problem(inst: DiscreteInstance, q: RdbQuadruple, sizes: AuxSizes):
    """(evaluator, dims, thresholds) for an exhaustive inner-bound scan.

    The parameter vector is P(u1u2|s) rows, P(v2|t) rows, P(v1|v2) rows,
    P(w), P(x|w) rows; the channel pair is recomputed for every point.
    """
    nu = sizes.u1 * sizes.u2
    dims = [nu] * inst.ns + [sizes.v2] * inst.nt + [sizes.v1] * sizes.v2 + [sizes.w] + [inst.nx] * sizes.w

    def evaluator(batch):
        return kernels.inner_full_slacks(
            inst.p_st.mass, inst.p_y_given_x.matrix, inst.p_z_given_y.matrix,
            inst.d1_matrix, inst.d2_matrix, sizes.u1, sizes.u2, sizes.v1, sizes.v2, sizes.w,
            batch, q.rate, q.d1, q.d2, q.rho,
        )

    return evaluator, dims, INNER_THRESHOLDS


def inner_bound_certify(inst: DiscreteInstance, q: RdbQuadruple, budget: Optional[SearchBudget] = None,
                        sizes: Optional[AuxSizes] = None, refine: bool = True) -> Verdict:
    """Search for an auxiliary system certifying inner-bound membership.

    Phase one scans the product grid of source-side kernels against the
    broadcast-channel frontier; phase two runs local refinement from the
    best grid points and from random restarts.  Failure means only that no
    witness was found.
    """
    budget = budget or SearchBudget()
    sizes = sizes or AuxSizes.default(inst)
    sizes.check(inst)
    deadline = Deadline(budget.time_limit)
    flags = []
    nu = sizes.u1 * sizes.u2
    frontier = bc_capacity_region(inst.p_y_given_x, inst.p_z_given_y, budget.grid_resolution, sizes.w)
    fa, fb = _frontier_arrays(frontier)

    def count(r):
        return (kernel_grid_size(inst.ns, nu, r) * kernel_grid_size(inst.nt, sizes.v2, r)
                * kernel_grid_size(sizes.v2, sizes.v1, r))

    res = _reduce_resolution(count, budget.grid_resolution, SCAN_CAP)
    if res != budget.grid_resolution:
        flags.append(f"scan_resolution_reduced_to_{res}")
    gu = kernel_grid_array(inst.ns, nu, res)
    gv2 = kernel_grid_array(inst.nt, sizes.v2, res)
    gv1 = kernel_grid_array(sizes.v2, sizes.v1, res)
    inner = len(gv2) * len(gv1)
    chunk = max(1, 20_000 // inner)
    evals = 0
    seeds: list = []  # (penalty, scan index)
    keep = max(1, budget.random_restarts // 2)

    def decode(idx):
        i, rem = divmod(int(idx), inner)
        j, k = divmod(rem, len(gv1))
        return gu[i], gv2[j], gv1[k]

    def finish(ku, kv2, kv1, fidx, evals, phase):
        wit = make_witness(inst, ku, kv2, kv1, frontier[fidx], sizes)
        sl = inner_constraints_eval(inst, q, wit)
        if inner_slacks_ok(sl):
            return Verdict(Status.CERTIFIED_IN, sl, wit, evaluations=evals, flags=tuple(flags + [phase]))
        return None

    for start in range(0, len(gu), chunk):
        if deadline.expired():
            flags.append("time_limit")
            break
        stats = kernels.inner_source_scan(inst.p_st.mass, gu[start:start + chunk], gv2, gv1,
                                          inst.d1_matrix, inst.d2_matrix, sizes.u1, sizes.u2)
        evals += len(stats)
        _, pen, best = _inner_point_slacks(stats, q, fa, fb)
        hits = np.flatnonzero(pen <= 0.0)
        for h in hits:
            v = finish(*decode(start * inner + h), best[h], evals, "grid")
            if v is not None:
                return v
        order = np.argsort(pen, kind="stable")[:keep]
        seeds.extend((float(pen[o]), start * inner + int(o)) for o in order)
        seeds = sorted(seeds)[:keep]

    best_seen = (math.inf, None)
    if refine and not deadline.expired():
        starts = [decode(idx) for _, idx in seeds]
        n_random = max(0, budget.random_restarts - len(starts))
        for r in range(n_random):
            rng = restart_rng(budget.seed, r)
            starts.append((random_kernel(rng, inst.ns, nu, 0.7), random_kernel(rng, inst.nt, sizes.v2, 0.7),
                           random_kernel(rng, sizes.v2, sizes.v1, 0.7)))

        def evaluate(blocks):
            st = kernels.inner_source_stats(inst.p_st.mass, blocks[0], blocks[1], blocks[2],
                                            inst.d1_matrix, inst.d2_matrix, sizes.u1, sizes.u2)
            sl, _, _ = _inner_point_slacks(st[None, :], q, fa, fb)
            return sl[0]

        for start_blocks in starts:
            if deadline.expired():
                flags.append("time_limit")
                break
            out = refine_local(evaluate, list(start_blocks), budget, thresholds=INNER_THRESHOLDS,
                               deadline=deadline)
            evals += out.evaluations
            if out.best_objective < best_seen[0]:
                best_seen = (out.best_objective, out)
            if out.feasible:
                ku, kv2, kv1 = out.best_point
                st = kernels.inner_source_stats(inst.p_st.mass, ku, kv2, kv1, inst.d1_matrix,
                                                inst.d2_matrix, sizes.u1, sizes.u2)
                _, _, fidx = _inner_point_slacks(st[None, :], q, fa, fb)
                v = finish(ku, kv2, kv1, int(fidx[0]), evals, "refine")
                if v is not None:
                    return v
    slacks = {}
    if best_seen[1] is not None and best_seen[1].slacks is not None:
        slacks = dict(zip(INNER_SLACKS, map(float, best_seen[1].slacks)))
    elif seeds:
        ku, kv2, kv1 = decode(seeds[0][1])
        st = kernels.inner_source_stats(inst.p_st.mass, ku, kv2, kv1, inst.d1_matrix, inst.d2_matrix,
                                        sizes.u1, sizes.u2)
        sl, _, _ = _inner_point_slacks(st[None, :], q, fa, fb)
        slacks = dict(zip(INNER_SLACKS, map(float, sl[0])))
    return Verdict(Status.NO_WITNESS_FOUND, slacks, evaluations=evals, flags=tuple(flags))


# ---------------------------------------------------------------- outer bound

def _canonical_columns(k: np.ndarray) -> bytes:
    cols = sorted((tuple(np.round(c, 12)) for c in k.T), reverse=True)
    return np.array(cols).tobytes()


def helper_kernels(nt: int, nu: int, resolution: int) -> np.ndarray:
    """Grid of P(U|T) kernels with relabelings of U removed (grid order kept)."""
    seen = set()
    out = []
    for k in kernel_grid_array(nt, nu, resolution):
        key = _canonical_columns(k)
        if key not in seen:
            seen.add(key)
            out.append(k)
    return np.array(out)


def _outer_slacks(stats: np.ndarray, q: RdbQuadruple, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    base = np.empty(6)
    base[0] = q.rate - (stats[0] + stats[1] - stats[2] - stats[3])
    base[1] = q.rate - (stats[0] - stats[2])
    weak = q.rho * a - stats[2]
    total = q.rho * (a + b) - stats[2] - stats[4]
    pen = np.maximum(0.0, -FEAS_TOL - weak) + np.maximum(0.0, -FEAS_TOL - total)
    f = int(np.argmin(pen))
    base[2] = weak[f]
    base[3] = total[f]
    base[4] = q.d1 - stats[5]
    base[5] = q.d2 - stats[6]
    return base


def _best_symbol_map(d: np.ndarray) -> np.ndarray:
    k = np.zeros_like(d)
    k[np.arange(d.shape[0]), np.argmin(d, axis=1)] = 1.0
    return k


def _joint_recon(k1: np.ndarray, k2: np.ndarray, nv1: int, nv2: int) -> np.ndarray:
    """P(s1, s2 | s, v1, v2) = k1[s, s1] k2[s, s2], repeated over (v1, v2)."""
    ns = k1.shape[0]
    per_s = (k1[:, :, None] * k2[:, None, :]).reshape(ns, -1)
    return np.repeat(per_s, nv1 * nv2, axis=0)


def _pad_cols(k: np.ndarray, n: int) -> np.ndarray:
    if k.shape[1] > n:
        raise ValidationError("witness alphabet exceeds the search alphabet")
    return np.hstack([k, np.zeros((k.shape[0], n - k.shape[1]))])


def transplant_witness(inst: DiscreteInstance, w: AuxWitness, nv1: int, nv2: int) -> list:
    """Outer-bound starting point built from an inner-bound witness.

    Keeps the witness's helper descriptions and sets the reconstructions to
    h1(U1, V1), h2(U1, U2, V2) with (U1, U2) drawn from P(u1, u2 | s); since
    U is independent of the descriptions given S this is a valid
    P(s1, s2 | s, v1, v2).
    """
    kv2 = _pad_cols(w.p_v2_given_t.matrix, nv2)
    kv1w = w.p_v1_given_v2.matrix
    kv1 = np.zeros((nv2, nv1))
    kv1[: kv1w.shape[0]] = _pad_cols(kv1w, nv1)
    kv1[kv1w.shape[0]:, 0] = 1.0
    ku = w.p_u1u2_given_s.matrix.reshape(inst.ns, w.n_u1, w.n_u2)
    na, nb = inst.n_hat1, inst.n_hat2
    ks = np.zeros((inst.ns, nv1, nv2, na, nb))
    ks[..., 0, 0] = 1.0
    wv1, wv2 = kv1w.shape[1], w.p_v2_given_t.cols
    for v1 in range(wv1):
        for v2 in range(wv2):
            ks[:, v1, v2] = 0.0
            for a in range(w.n_u1):
                for b in range(w.n_u2):
                    ks[:, v1, v2, w.h1[a, v1], w.h2[a, b, v2]] += ku[:, a, b]
    return [kv2, kv1, ks.reshape(inst.ns * nv1 * nv2, na * nb)]


def _outer_seeds(inst: DiscreteInstance, q: RdbQuadruple, nv1: int, nv2: int) -> list:
    nt = inst.nt
    const_v2 = np.zeros((nt, nv2))
    const_v2[:, 0] = 1.0
    const_v1 = np.zeros((nv2, nv1))
    const_v1[:, 0] = 1.0
    exact1 = _best_symbol_map(inst.d1_matrix)
    exact2 = _best_symbol_map(inst.d2_matrix)
    p_s = JointDist(inst.p_s[:, None], ("S", "C"))
    rd1 = rd_test_channel(p_s, q.d1, inst.d1_matrix)
    rd2 = rd_test_channel(p_s, q.d2, inst.d2_matrix)
    pairs = [(exact1, exact2), (rd1, rd2), (rd1, exact2), (exact1, rd2)]
    recon = [_joint_recon(k1, k2, nv1, nv2) for k1, k2 in pairs]
    if inst.n_hat1 == inst.n_hat2 and np.array_equal(inst.d1_matrix, inst.d2_matrix):
        # one description serves both receivers
        per_s = np.zeros((inst.ns, inst.n_hat1, inst.n_hat2))
        idx = np.arange(inst.n_hat1)
        per_s[:, idx, idx] = rd2
        recon.append(np.repeat(per_s.reshape(inst.ns, -1), nv1 * nv2, axis=0))
    seeds = [[const_v2, const_v1, ks] for ks in recon]
    if nv2 >= nt:
        ident_v2 = np.zeros((nt, nv2))
        ident_v2[np.arange(nt), np.arange(nt)] = 1.0
        seeds += [[ident_v2, const_v1, ks] for ks in recon[:2]]
        if nv1 >= nv2:
            seeds += [[ident_v2, np.eye(nv2, nv1), ks] for ks in recon[:2]]
    return seeds


def outer_bound_exclude(inst: DiscreteInstance, q: RdbQuadruple, budget: Optional[SearchBudget] = None,
                        n_u: Optional[int] = None, nv1: Optional[int] = None, nv2: Optional[int] = None,
                        hint: Optional[Sequence[np.ndarray]] = None, inner_seed: bool = True) -> Verdict:
    """Heuristic exclusion through the outer bound.

    For every P(U|T) on the grid (|U| defaults to |T|+1) the search looks
    for V2, V1, a joint reconstruction kernel P(s1, s2 | s, v1, v2) and a
    frontier point satisfying all outer-bound inequalities.  The first
    P(U|T) for which none is found is returned as the exclusion certificate.

    Starting points per P(U|T): the last feasible point, structured seeds,
    ``hint`` (``[P(v2|t), P(v1|v2), P(s1,s2|s,v1,v2)]``) and, when
    ``inner_seed`` is set, a transplant of any witness found by a grid-only
    inner-bound scan.  Local refinement and random restarts follow.
    """
    budget = budget or SearchBudget()
    nt = inst.nt
    n_u = nt + 1 if n_u is None else n_u
    nv1 = nt if nv1 is None else nv1
    nv2 = nt if nv2 is None else nv2
    caps = dict(u=nt + 1, v1=nt + 3, v2=nt * (nt + 3) + 1)
    for name, v in (("u", n_u), ("v1", nv1), ("v2", nv2)):
        if not 1 <= v <= caps[name]:
            raise ValidationError(f"|{name.upper()}| = {v} outside [1, {caps[name]}]")
    deadline = Deadline(budget.time_limit)
    frontier = bc_capacity_region(inst.p_y_given_x, inst.p_z_given_y, budget.grid_resolution, inst.nx + 1)
    fa, fb = _frontier_arrays(frontier)
    thresholds = np.full(6, -FEAS_TOL)
    nrec = inst.ns * nv1 * nv2
    nab = inst.n_hat1 * inst.n_hat2
    seeds = _outer_seeds(inst, q, nv1, nv2)
    evals = 0
    if inner_seed:
        sizes = AuxSizes.default(inst)
        sizes = AuxSizes(sizes.u1, sizes.u2, min(sizes.v1, nv1), min(sizes.v2, nv2), sizes.w)
        iv = inner_bound_certify(inst, q, budget, sizes, refine=False)
        evals += iv.evaluations
        if iv.status is Status.CERTIFIED_IN:
            seeds.insert(0, transplant_witness(inst, iv.witness, nv1, nv2))
    if hint is not None:
        seeds.insert(0, [np.asarray(h, dtype=float) for h in hint])
    warm: list = []
    last_slacks = None

    for ku in helper_kernels(nt, n_u, budget.grid_resolution):
        if deadline.expired():
            return Verdict(Status.NOT_EXCLUDED, {}, evaluations=evals, flags=("time_limit", "budget_exhausted"))

        def evaluate(blocks, ku=ku):
            st = kernels.outer_stats(inst.p_st.mass, ku, blocks[0], blocks[1], blocks[2],
                                     inst.d1_matrix, inst.d2_matrix)
            return _outer_slacks(st, q, fa, fb)

        found = None
        scored = []
        for cand in warm + seeds:
            sl = evaluate(cand)
            evals += 1
            pen = penalty(sl, thresholds)
            if pen <= 0:
                found = (cand, sl)
                break
            scored.append((pen, len(scored), cand))
        if found is None:
            scored.sort(key=lambda t: (t[0], t[1]))
            starts = [c for _, _, c in scored[:3]]
            for r in range(budget.random_restarts):
                rng = restart_rng(budget.seed, r)
                starts.append([random_kernel(rng, nt, nv2, 0.5), random_kernel(rng, nv2, nv1, 0.5),
                               random_kernel(rng, nrec, nab, 0.5)])
            best = None
            for st in starts:
                if deadline.expired():
                    return Verdict(Status.NOT_EXCLUDED, {}, evaluations=evals,
                                   flags=("time_limit", "budget_exhausted"))
                out = refine_local(evaluate, st, budget, thresholds=thresholds, deadline=deadline)
                evals += out.evaluations
                if best is None or out.best_objective < best.best_objective:
                    best = out
                if out.feasible:
                    found = (out.best_point, out.slacks)
                    break
            if found is None:
                slacks = dict(zip(OUTER_SLACKS, map(float, best.slacks))) if best is not None else {}
                return Verdict(Status.HEURISTICALLY_EXCLUDED, slacks, certificate=ku, evaluations=evals)
        cand, last_slacks = found
        warm = [list(cand)]
    slacks = dict(zip(OUTER_SLACKS, map(float, last_slacks))) if last_slacks is not None else {}
    return Verdict(Status.NOT_EXCLUDED, slacks, evaluations=evals)


# ---------------------------------------------------------------- rate-distortion

def _ba_fixed_slope(p: np.ndarray, d: np.ndarray, beta: float, tol: float = 1e-14,
                    max_iter: int = 50_000) -> tuple:
    """Blahut-Arimoto at slope ``beta`` (natural units); inf restricts to minimal cells.

    Returns (rate_bits, distortion, test_channel).
    """
    nh = d.shape[1]
    if math.isinf(beta):
        w = (d <= d.min(axis=1, keepdims=True) + 1e-15).astype(float)
    else:
        w = np.exp(-beta * (d - d.min(axis=1, keepdims=True)))
    qh = np.full(nh, 1.0 / nh)
    for _ in range(max_iter):
        cond = w * qh[None, :]
        cond /= cond.sum(axis=1, keepdims=True)
        new = p @ cond
        if np.abs(new - qh).max() < tol:
            qh = new
            break
        qh = new
    cond = w * qh[None, :]
    cond /= cond.sum(axis=1, keepdims=True)
    joint = p[:, None] * cond
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(joint > 0, cond / np.where(qh > 0, qh, 1.0)[None, :], 1.0)
        rate = float(np.where(joint > 0, joint * np.log2(ratio), 0.0).sum())
    dist = float((joint * d).sum())
    return max(0.0, rate), dist, cond


def _conditional_sources(p_s_stilde: JointDist) -> list:
    m = p_s_stilde.mass
    out = []
    for c in range(m.shape[1]):
        tot = m[:, c].sum()
        if tot > 1e-15:
            out.append((tot, m[:, c] / tot))
    return out


def _conditional_rd_at(parts, d: np.ndarray, beta: float) -> tuple:
    r = dist = 0.0
    for w, p in parts:
        ri, di, _ = _ba_fixed_slope(p, d, beta)
        r += w * ri
        dist += w * di
    return r, dist


def _solve_slope(parts, d: np.ndarray, target: float):
    """Slope where the pooled distortion hits ``target`` (None means infinite)."""
    def f(logb):
        return _conditional_rd_at(parts, d, math.exp(logb))[1] - target

    lo, hi = -8.0, 2.0
    while f(lo) < 0 and lo > -60:
        lo -= 8.0
    while f(hi) > 0:
        hi += 2.0
        if hi > 12.0:
            return None
    return math.exp(brentq(f, lo, hi, xtol=1e-13, rtol=1e-14, maxiter=500))


def conditional_rd(p_s_stilde: JointDist, d2: float, d_matrix) -> float:
    """min I(S_hat; S | S_tilde) subject to E d(S, S_hat) <= d2, in bits.

    ``p_s_stilde`` has axes (S, S_tilde); side information is known at both
    ends, so every S_tilde slice is coded at a common slope.
    """
    d = np.asarray(d_matrix, dtype=float)
    m = p_s_stilde.mass
    if m.ndim != 2 or d.shape[0] != m.shape[0]:
        raise ValidationError("distortion matrix rows must match the S axis")
    parts = _conditional_sources(p_s_stilde)
    d_min = sum(w * float(p @ d.min(axis=1)) for w, p in parts)
    d_max = sum(w * float((p @ d).min()) for w, p in parts)
    if d2 < d_min - 1e-12:
        raise ValidationError(f"distortion {d2} is below the smallest achievable {d_min}")
    if d2 >= d_max - 1e-15:
        return 0.0
    if d2 <= d_min + 1e-12:
        return _conditional_rd_at(parts, d, math.inf)[0]
    beta = _solve_slope(parts, d, d2)
    if beta is None:
        return _conditional_rd_at(parts, d, math.inf)[0]
    return _conditional_rd_at(parts, d, beta)[0]


def rate_distortion(p_s, d: float, d_matrix) -> float:
    """Ordinary rate-distortion function R_S(D) in bits."""
    probs = p_s.probs if isinstance(p_s, FinitePmf) else np.asarray(p_s, dtype=float)
    return conditional_rd(JointDist(probs[:, None], ("S", "C")), d, d_matrix)


def rd_test_channel(p_s_stilde: JointDist, d2: float, d_matrix) -> np.ndarray:
    """Optimal P(S_hat|S) for a single-slice source (used to seed searches)."""
    d = np.asarray(d_matrix, dtype=float)
    parts = _conditional_sources(p_s_stilde)
    p = sum(w * pp for w, pp in parts)
    d_min = float(p @ d.min(axis=1))
    d_max = float((p @ d).min())
    if d2 >= d_max:
        k = np.zeros_like(d)
        k[:, int(np.argmin(p @ d))] = 1.0
        return k
    if d2 <= d_min + 1e-12:
        return _ba_fixed_slope(p, d, math.inf)[2]
    beta = _solve_slope([(1.0, p)], d, d2)
    return _ba_fixed_slope(p, d, math.inf if beta is None else beta)[2]


# ---------------------------------------------------------------- T = S separation region

def _require_diagonal(inst: DiscreteInstance) -> None:
    if not inst.t_equals_s:
        raise PreconditionError("this check needs T = S (P_ST supported on the diagonal)")


def _ts_stats(p_s: np.ndarray, ks: np.ndarray, na: int, nb: int, d1, d2) -> np.ndarray:
    """(I(S1;S), I(S1,S2;S), E d1, E d2) for kernels ks of shape (N, |S|, na*nb)."""
    j = p_s[None, :, None] * ks  # N, s, (a b)
    q12 = j.sum(axis=1)
    j4 = j.reshape(len(ks), len(p_s), na, nb)
    q1 = j4.sum(axis=(1, 3))
    j1 = j4.sum(axis=3)

    def negent(x, axes):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 1e-15, x * np.log2(np.where(x > 1e-15, x, 1.0)), 0.0).sum(axis=axes)

    h_s = float(-(p_s[p_s > 1e-15] * np.log2(p_s[p_s > 1e-15])).sum())
    i12 = h_s - negent(q12, 1) + negent(j, (1, 2))
    i1 = h_s - negent(q1, 1) + negent(j1, (1, 2))
    ed1 = np.einsum("nsa,sa->n", j1, d1)
    ed2 = np.einsum("nsb,sb->n", j4.sum(axis=2), d2)
    return np.stack([np.maximum(i1, 0), np.maximum(i12, 0), ed1, ed2], axis=1)


def _ts_slacks(st: np.ndarray, q: RdbQuadruple, a: np.ndarray, b: np.ndarray) -> tuple:
    c1 = q.rate + q.rho * a[None, :] - st[:, 0:1]
    c2 = q.rate + q.rho * (a + b)[None, :] - st[:, 1:2]
    pen = np.maximum(0.0, -FEAS_TOL - c1) + np.maximum(0.0, -FEAS_TOL - c2)
    f = np.argmin(pen, axis=1)
    rows = np.arange(len(st))
    sl = np.stack([c1[rows, f], c2[rows, f], q.d1 - st[:, 2], q.d2 - st[:, 3]], axis=1)
    return sl, f


TS_SLACKS = ("weak_budget", "total_budget", "distortion1", "distortion2")


def ts_region_certify(inst: DiscreteInstance, q: RdbQuadruple,
                      budget: Optional[SearchBudget] = None) -> Verdict:
    """Separation region when T = S: joint reconstructions plus a frontier point."""
    _require_diagonal(inst)
    budget = budget or SearchBudget()
    deadline = Deadline(budget.time_limit)
    p_s = inst.p_s
    na, nb = inst.n_hat1, inst.n_hat2
    frontier = bc_capacity_region(inst.p_y_given_x, inst.p_z_given_y, budget.grid_resolution)
    fa, fb = _frontier_arrays(frontier)
    thr = np.full(4, -FEAS_TOL)
    res = _reduce_resolution(lambda r: kernel_grid_size(inst.ns, na * nb, r), budget.grid_resolution, SCAN_CAP)
    grid = kernel_grid_array(inst.ns, na * nb, res)
    evals = 0
    best = (math.inf, None, None)

    def verdict(ks, fidx, phase):
        st = _ts_stats(p_s, ks[None], na, nb, inst.d1_matrix, inst.d2_matrix)[0]
        sl, _ = _ts_slacks(st[None], q, fa[[fidx]], fb[[fidx]])
        slacks = dict(zip(TS_SLACKS, map(float, sl[0])))
        wit = {"p_s1s2_given_s": ks.reshape(inst.ns, na, nb), "p_w": frontier[fidx].p_w,
               "p_x_given_w": frontier[fidx].p_x_given_w}
        return Verdict(Status.CERTIFIED_IN, slacks, wit, evaluations=evals, flags=(phase,))

    for start in range(0, len(grid), 50_000):
        ks = grid[start:start + 50_000]
        st = _ts_stats(p_s, ks, na, nb, inst.d1_matrix, inst.d2_matrix)
        sl, f = _ts_slacks(st, q, fa, fb)
        pen = np.maximum(0.0, thr[None, :] - sl).sum(axis=1)
        evals += len(ks)
        k = int(np.argmin(pen))
        if pen[k] <= 0:
            return verdict(ks[k], int(f[k]), "grid")
        if pen[k] < best[0]:
            best = (float(pen[k]), ks[k], sl[k])

    def evaluate(blocks):
        st = _ts_stats(p_s, blocks[0][None], na, nb, inst.d1_matrix, inst.d2_matrix)
        return _ts_slacks(st, q, fa, fb)[0][0]

    starts = [[best[1]]] + [[random_kernel(restart_rng(budget.seed, r), inst.ns, na * nb, 0.7)]
                            for r in range(budget.random_restarts)]
    for st0 in starts:
        if deadline.expired():
            break
        out = refine_local(evaluate, st0, budget, thresholds=thr, deadline=deadline)
        evals += out.evaluations
        if out.feasible:
            ks = out.best_point[0]
            st = _ts_stats(p_s, ks[None], na, nb, inst.d1_matrix, inst.d2_matrix)
            _, f = _ts_slacks(st, q, fa, fb)
            return verdict(ks, int(f[0]), "refine")
        if out.best_objective < best[0]:
            best = (out.best_objective, out.best_point[0], out.slacks)
    slacks = dict(zip(TS_SLACKS, map(float, best[2]))) if best[2] is not None else {}
    return Verdict(Status.NO_WITNESS_FOUND, slacks, evaluations=evals)


def ts_region_min_rate(inst: DiscreteInstance, d1: float, d2: float, rho: float,
                       budget: Optional[SearchBudget] = None) -> float:
    """Smallest R for which the T = S separation conditions hold (search estimate, from above)."""
    _require_diagonal(inst)
    budget = budget or SearchBudget()
    p_s = inst.p_s
    na, nb = inst.n_hat1, inst.n_hat2
    frontier = bc_capacity_region(inst.p_y_given_x, inst.p_z_given_y, budget.grid_resolution)
    fa, fb = _frontier_arrays(frontier)

    def need(st):
        r = np.maximum(st[:, 0:1] - rho * fa[None, :], st[:, 1:2] - rho * (fa + fb)[None, :])
        return np.maximum(r.min(axis=1), 0.0)

    def violation(st):
        return np.maximum(0.0, st[:, 2] - d1) + np.maximum(0.0, st[:, 3] - d2)

    grid = kernel_grid_array(inst.ns, na * nb, budget.grid_resolution)
    st = _ts_stats(p_s, grid, na, nb, inst.d1_matrix, inst.d2_matrix)
    ok = violation(st) <= FEAS_TOL
    vals = np.where(ok, need(st), math.inf)
    order = np.argsort(vals, kind="stable")
    best = float(vals[order[0]])

    def objective(blocks):
        s = _ts_stats(p_s, blocks[0][None], na, nb, inst.d1_matrix, inst.d2_matrix)
        return float(need(s)[0] + 1e3 * violation(s)[0])

    starts = [grid[i] for i in order[:4] if math.isfinite(vals[i])]
    starts += [random_kernel(restart_rng(budget.seed, r), inst.ns, na * nb, 0.7)
               for r in range(budget.random_restarts // 4)]
    for k0 in starts:
        out = refine_local(objective, [k0], budget)
        s = _ts_stats(p_s, out.best_point[0][None], na, nb, inst.d1_matrix, inst.d2_matrix)
        if violation(s)[0] <= FEAS_TOL:
            best = min(best, float(need(s)[0]))
    return best


# ---------------------------------------------------------------- deterministic distortion

def _check_psi(inst: DiscreteInstance, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=int)
    if psi.shape != (inst.ns,) or np.any(psi < 0):
        raise PreconditionError("psi must map every source symbol to a nonnegative index")
    return psi


def _psi_joint(p_s: np.ndarray, psi: np.ndarray) -> np.ndarray:
    m = np.zeros((len(p_s), int(psi.max()) + 1))
    m[np.arange(len(p_s)), psi] = p_s
    return m


def _det_stats(p_st: np.ndarray, psi: np.ndarray, kv2: np.ndarray, kv1: np.ndarray) -> np.ndarray:
    """(H(St|V1), H(S|St,V2), I(V1;T), I(V2;T|St,V1)) on P_ST P(v2|t) P(v1|v2)."""
    nst = int(psi.max()) + 1
    onehot = np.zeros((len(psi), nst))
    onehot[np.arange(len(psi)), psi] = 1.0
    # axes: s, c(=psi(s)), t, v2, v1
    j = np.einsum("st,sc,tv,vw->sctvw", p_st, onehot, kv2, kv1)
    jd = JointDist(j / j.sum(), ("S", "C", "T", "V2", "V1"))
    return np.array([
        conditional_entropy(jd, ["C"], ["V1"]),
        conditional_entropy(jd, ["S"], ["C", "V2"]),
        mutual_information(jd, ["V1"], ["T"]),
        conditional_mutual_information(jd, ["V2"], ["T"], ["C", "V1"]),
    ])


DET_SLACKS = ("rate", "weak_channel", "sum_channel")


def _det_slacks(st, q, a, b) -> np.ndarray:
    weak = q.rho * a - st[2]
    total = q.rho * (a + b) - st[2] - st[3]
    pen = np.maximum(0.0, -FEAS_TOL - weak) + np.maximum(0.0, -FEAS_TOL - total)
    f = int(np.argmin(pen))
    return np.array([q.rate - st[0] - st[1], weak[f], total[f]]), f


def det_distortion_region_certify(inst: DiscreteInstance, psi, q: RdbQuadruple,
                                  budget: Optional[SearchBudget] = None,
                                  nv1: Optional[int] = None, nv2: Optional[int] = None) -> Verdict:
    """Lossless recovery of psi(S) at the weak receiver and of S at the strong one."""
    psi = _check_psi(inst, psi)
    if q.d1 != 0 or q.d2 != 0:
        raise PreconditionError("deterministic-distortion check needs D1 = D2 = 0")
    budget = budget or SearchBudget()
    deadline = Deadline(budget.time_limit)
    nt = inst.nt
    nv1 = nt if nv1 is None else nv1
    nv2 = nt if nv2 is None else nv2
    frontier = bc_capacity_region(inst.p_y_given_x, inst.p_z_given_y, budget.grid_resolution)
    fa, fb = _frontier_arrays(frontier)
    thr = np.array([STRICT_MARGIN, -FEAS_TOL, -FEAS_TOL])
    p_st = inst.p_st.mass
    evals = 0
    best = (math.inf, None, None)

    def evaluate(blocks):
        return _det_slacks(_det_stats(p_st, psi, blocks[0], blocks[1]), q, fa, fb)[0]

    def verdict(kv2, kv1, phase):
        sl, f = _det_slacks(_det_stats(p_st, psi, kv2, kv1), q, fa, fb)
        wit = {"p_v2_given_t": kv2, "p_v1_given_v2": kv1, "p_w": frontier[f].p_w,
               "p_x_given_w": frontier[f].p_x_given_w}
        return Verdict(Status.CERTIFIED_IN, dict(zip(DET_SLACKS, map(float, sl))), wit,
                       evaluations=evals, flags=(phase,))

    res = _reduce_resolution(lambda r: kernel_grid_size(nt, nv2, r) * kernel_grid_size(nv2, nv1, r),
                             budget.grid_resolution, 200_000)
    g2 = kernel_grid_array(nt, nv2, res)
    g1 = kernel_grid_array(nv2, nv1, res)
    for kv2 in g2:
        if deadline.expired():
            break
        for kv1 in g1:
            sl = evaluate([kv2, kv1])
            evals += 1
            pen = penalty(sl, thr)
            if pen <= 0:
                return verdict(kv2, kv1, "grid")
            if pen < best[0]:
                best = (pen, [kv2, kv1], sl)
    starts = [best[1]] + [[random_kernel(restart_rng(budget.seed, r), nt, nv2, 0.5),
                           random_kernel(restart_rng(budget.seed, r + 7919), nv2, nv1, 0.5)]
                          for r in range(budget.random_restarts)]
    for st0 in starts:
        if st0 is None or deadline.expired():
            continue
        out = refine_local(evaluate, st0, budget, thresholds=thr, deadline=deadline)
        evals += out.evaluations
        if out.feasible:
            return verdict(*out.best_point, "refine")
        if out.best_objective < best[0]:
            best = (out.best_objective, out.best_point, out.slacks)
    slacks = dict(zip(DET_SLACKS, map(float, best[2]))) if best[2] is not None else {}
    return Verdict(Status.NO_WITNESS_FOUND, slacks, evaluations=evals)


def ts_det_region(inst: DiscreteInstance, psi, d2: float, rho: float, resolution: int = 4) -> float:
    """Minimal rate for T = S with lossless psi(S) at the weak receiver."""
    _require_diagonal(inst)
    psi = _check_psi(inst, psi)
    m = _psi_joint(inst.p_s, psi)
    h_tilde = entropy_array(m.sum(axis=0))
    r_bar = conditional_rd(JointDist(m, ("S", "St")), d2, inst.d2_matrix)
    frontier = bc_capacity_region(inst.p_y_given_x, inst.p_z_given_y, resolution)
    fa, fb = _frontier_arrays(frontier)
    need = np.maximum(h_tilde - rho * fa, h_tilde + r_bar - rho * (fa + fb))
    return max(0.0, float(need.min()))


# ---------------------------------------------------------------- single receiver

SINGLE_SLACKS = ("rate", "channel")


def _mix_to_budget(p_t: np.ndarray, k: np.ndarray, budget_bits: float) -> np.ndarray:
    """Shrink k toward an uninformative channel until I(T;V) <= budget_bits."""
    pv = p_t @ k
    flat = np.tile(pv, (k.shape[0], 1))

    def info(lam):
        return _mi_rows(p_t, lam * k + (1 - lam) * flat)

    if info(1.0) <= budget_bits:
        return k
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if info(mid) <= budget_bits:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return lo * k + (1 - lo) * flat


def _mi_rows(p_in: np.ndarray, k: np.ndarray) -> float:
    j = p_in[:, None] * k
    q = j.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(j > 1e-300, j * np.log2(j / (p_in[:, None] * q[None, :])), 0.0)
    return max(0.0, float(t.sum()))


def single_receiver_necessary(p_st: JointDist, rate: float, distortion: float, rho: float,
                              capacity_bits: float, d_matrix,
                              budget: Optional[SearchBudget] = None) -> Verdict:
    """Necessary condition with one receiver: some S-T-V with I(T;V) <= rho C
    and R >= R_S(D) - I(V;S)."""
    budget = budget or SearchBudget()
    m = p_st.mass
    p_s, p_t = m.sum(axis=1), m.sum(axis=0)
    r_s = rate_distortion(p_s, distortion, d_matrix)
    limit = rho * capacity_bits
    nt = m.shape[1]
    nv = nt + 1

    def i_vs(k):
        # P(s, v) = sum_t P(s,t) P(v|t)
        j = m @ k
        ps = j.sum(axis=1)
        pv = j.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(j > 1e-300, j * np.log2(j / (ps[:, None] * pv[None, :])), 0.0)
        return max(0.0, float(t.sum()))

    def objective(blocks):
        k = _mix_to_budget(p_t, _rownorm(blocks[0]), limit)
        return -i_vs(k)

    best_val, best_k = -math.inf, None
    evals = 0
    for k in kernel_grid_array(nt, nv, budget.grid_resolution):
        kk = _mix_to_budget(p_t, k, limit)
        v = i_vs(kk)
        evals += 1
        if v > best_val + 1e-15:
            best_val, best_k = v, kk
    starts = [best_k] + [random_kernel(restart_rng(budget.seed, r), nt, nv, 0.5)
                         for r in range(min(budget.random_restarts, 8))]
    for k0 in starts:
        out = refine_local(objective, [k0], budget)
        evals += out.evaluations
        kk = _mix_to_budget(p_t, _rownorm(out.best_point[0]), limit)
        v = i_vs(kk)
        if v > best_val:
            best_val, best_k = v, kk
    slacks = {"rate": rate - (r_s - best_val), "channel": limit - _mi_rows(p_t, best_k),
              "rate_distortion": r_s, "best_i_vs": best_val}
    ok = slacks["rate"] >= -FEAS_TOL and slacks["channel"] >= -FEAS_TOL
    status = Status.NOT_EXCLUDED if ok else Status.HEURISTICALLY_EXCLUDED
    return Verdict(status, slacks, {"p_v_given_t": best_k}, evaluations=evals)
