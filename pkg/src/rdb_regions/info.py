"""Finite-alphabet probability machinery.

Every quantity is in bits.  Joint distributions are dense ``numpy`` arrays
with one named axis per random variable; alphabets here are small, so dense
storage is the cheapest representation.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SUM_TOL = 1e-12
ZERO_PROB = 1e-15


class ValidationError(ValueError):
    """Raised when a pmf, kernel or joint distribution is malformed."""


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class FinitePmf:
    probs: np.ndarray

    def __post_init__(self):
        p = _frozen(self.probs)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError(f"pmf must be a non-empty vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise ValidationError("pmf entries must be finite and nonnegative")
        if abs(p.sum() - 1.0) > SUM_TOL * max(1, p.size):
            raise ValidationError(f"pmf sums to {p.sum()!r}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    @classmethod
    def uniform(cls, n: int) -> "FinitePmf":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point_mass(cls, n: int, at: int = 0) -> "FinitePmf":
        p = np.zeros(n)
        p[at] = 1.0
        return cls(p)


@dataclass(frozen=True)
class Kernel:
    """Row-stochastic matrix ``matrix[x, y] = P(y | x)``.

    Rows listed in ``undefined_rows`` come from conditioning on a zero
    probability event; they hold NaN and are exempt from validation.
    """

    matrix: np.ndarray
    undefined_rows: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.ndim != 2 or 0 in m.shape:
            raise ValidationError(f"kernel must be a non-empty matrix, got shape {m.shape}")
        undefined = frozenset(int(i) for i in self.undefined_rows)
        rows = [i for i in range(m.shape[0]) if i not in undefined]
        sub = m[rows]
        if not np.all(np.isfinite(sub)) or np.any(sub < 0):
            raise ValidationError("kernel entries must be finite and nonnegative")
        bad = np.abs(sub.sum(axis=1) - 1.0) > SUM_TOL * max(1, m.shape[1])
        if np.any(bad):
            raise ValidationError(f"kernel rows {np.array(rows)[bad].tolist()} do not sum to 1")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "undefined_rows", undefined)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    def row(self, i: int) -> FinitePmf:
        if i in self.undefined_rows:
            raise ValidationError(f"row {i} is undefined (zero-probability conditioning event)")
        return FinitePmf(self.matrix[i])

    @classmethod
    def identity(cls, n: int) -> "Kernel":
        return cls(np.eye(n))

    @classmethod
    def constant(cls, rows: int, pmf) -> "Kernel":
        p = pmf.probs if isinstance(pmf, FinitePmf) else np.asarray(pmf, dtype=float)
        return cls(np.tile(p, (rows, 1)))

    @classmethod
    def from_function(cls, mapping: Sequence[int], cols: int) -> "Kernel":
        m = np.zeros((len(mapping), cols))
        m[np.arange(len(mapping)), list(mapping)] = 1.0
        return cls(m)

    @classmethod
    def bsc(cls, p: float) -> "Kernel":
        return cls(np.array([[1 - p, p], [p, 1 - p]]))


@dataclass(frozen=True)
class JointDist:
    mass: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        m = _frozen(self.mass)
        if m.ndim == 0:
            raise ValidationError("joint distribution needs at least one axis")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValidationError("joint mass must be finite and nonnegative")
        if abs(m.sum() - 1.0) > SUM_TOL * max(1, m.size):
            raise ValidationError(f"joint mass sums to {m.sum()!r}, not 1")
        names = tuple(self.names) if self.names else tuple(f"X{i}" for i in range(m.ndim))
        if len(names) != m.ndim or len(set(names)) != len(names):
            raise ValidationError(f"need {m.ndim} distinct axis names, got {names}")
        object.__setattr__(self, "mass", m)
        object.__setattr__(self, "names", names)

    @property
    def axes(self) -> tuple:
        return self.mass.shape

    def axis_index(self, ax) -> int:
        if isinstance(ax, (int, np.integer)):
            if not 0 <= ax < self.mass.ndim:
                raise ValidationError(f"axis {ax} out of range")
            return int(ax)
        try:
            return self.names.index(ax)
        except ValueError:
            raise ValidationError(f"unknown axis {ax!r}; have {self.names}") from None

    def _indices(self, axes) -> tuple:
        if isinstance(axes, (str, int, np.integer)):
            axes = [axes]
        idx = tuple(self.axis_index(a) for a in axes)
        if len(set(idx)) != len(idx):
            raise ValidationError(f"repeated axes in {axes}")
        return idx

    @classmethod
    def from_pmf(cls, pmf: FinitePmf, name: str = "X0") -> "JointDist":
        return cls(pmf.probs, (name,))

    @classmethod
    def product(cls, *pmfs: FinitePmf, names=()) -> "JointDist":
        mass = np.array(1.0)
        for p in pmfs:
            mass = np.multiply.outer(mass, p.probs)
        return cls(mass, names)


def _clean(p: np.ndarray) -> np.ndarray:
    return p[p > ZERO_PROB]


def entropy_array(p: np.ndarray) -> float:
    q = _clean(np.ravel(p))
    return float(-(q * np.log2(q)).sum()) if q.size else 0.0


def entropy(p) -> float:
    """Shannon entropy in bits; accepts a FinitePmf or a JointDist."""
    if isinstance(p, JointDist):
        return max(0.0, entropy_array(p.mass))
    if not isinstance(p, FinitePmf):
        p = FinitePmf(p)
    return max(0.0, entropy_array(p.probs))


def marginalize(j: JointDist, keep) -> JointDist:
    """Marginal of ``j`` on ``keep``, with axes in the order given."""
    idx = j._indices(keep)
    drop = tuple(i for i in range(j.mass.ndim) if i not in idx)
    m = j.mass.sum(axis=drop) if drop else j.mass
    # sum() keeps remaining axes in ascending order; permute to requested order
    order = sorted(idx)
    m = np.transpose(m, [order.index(i) for i in idx])
    return JointDist(m, tuple(j.names[i] for i in idx))


def _h(j: JointDist, axes: tuple) -> float:
    if not axes:
        return 0.0
    drop = tuple(i for i in range(j.mass.ndim) if i not in axes)
    return entropy_array(j.mass.sum(axis=drop) if drop else j.mass)


def conditional_entropy(j: JointDist, axes_a, axes_c=()) -> float:
    a = j._indices(axes_a)
    c = j._indices(axes_c) if axes_c != () else ()
    if set(a) & set(c):
        raise ValidationError("axis sets must be disjoint")
    return max(0.0, _h(j, tuple(sorted(set(a) | set(c)))) - _h(j, c))


def mutual_information(j: JointDist, axes_a, axes_b) -> float:
    return conditional_mutual_information(j, axes_a, axes_b, ())


def conditional_mutual_information(j: JointDist, axes_a, axes_b, axes_c=()) -> float:
    """I(A;B|C) = H(A,C) + H(B,C) - H(A,B,C) - H(C), clipped at zero."""
    a = j._indices(axes_a)
    b = j._indices(axes_b)
    c = j._indices(axes_c) if axes_c != () else ()
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise ValidationError("axis sets must be pairwise disjoint")
    ac = tuple(sorted(set(a) | set(c)))
    bc = tuple(sorted(set(b) | set(c)))
    abc = tuple(sorted(set(a) | set(b) | set(c)))
    val = _h(j, ac) + _h(j, bc) - _h(j, abc) - _h(j, c)
    return max(0.0, val)


@dataclass(frozen=True)
class Stage:
    """One factor of a chain: ``name`` drawn from ``factor`` given ``parents``.

    With no parents ``factor`` is a FinitePmf; otherwise a Kernel whose rows
    enumerate the parents' joint values in row-major order.
    """

    name: str
    factor: object
    parents: tuple = ()


def chain_compose(stages: Iterable) -> JointDist:
    """Build the joint distribution of a declared factorization.

    ``stages`` holds :class:`Stage` objects or ``(name, factor, parents)``
    tuples; each stage may only depend on axes introduced earlier.
    """
    mass = np.array(1.0)
    names: list[str] = []
    for st in stages:
        if not isinstance(st, Stage):
            st = Stage(*st)
        if st.name in names:
            raise ValidationError(f"axis {st.name!r} declared twice")
        parents = tuple(st.parents)
        for par in parents:
            if par not in names:
                raise ValidationError(f"stage {st.name!r} depends on undeclared axis {par!r}")
        f = st.factor
        if not parents:
            if isinstance(f, Kernel):
                if f.rows != 1:
                    raise ValidationError(f"root stage {st.name!r} needs a pmf")
                f = FinitePmf(f.matrix[0])
            if not isinstance(f, FinitePmf):
                f = FinitePmf(f)
            mass = np.multiply.outer(mass, f.probs)
        else:
            if not isinstance(f, Kernel):
                f = Kernel(f)
            if f.undefined_rows:
                raise ValidationError(f"stage {st.name!r} kernel has undefined rows")
            pidx = [names.index(p) for p in parents]
            psizes = [mass.shape[i] for i in pidx]
            if f.rows != int(np.prod(psizes)):
                raise ValidationError(
                    f"stage {st.name!r}: kernel has {f.rows} rows, parents need {int(np.prod(psizes))}"
                )
            # align kernel parent axes with their positions in the joint
            order = list(np.argsort(pidx))
            k = np.transpose(f.matrix.reshape(*psizes, f.cols), order + [len(pidx)])
            shape = [1] * mass.ndim + [f.cols]
            for pos, i in zip(sorted(pidx), order):
                shape[pos] = psizes[i]
            mass = mass[..., None] * k.reshape(shape)
        names.append(st.name)
    return JointDist(mass, tuple(names))


def condition(j: JointDist, target, given) -> Kernel:
    """Conditional kernel P(target | given); rows index ``given`` row-major.

    Rows whose conditioning event has probability below ``ZERO_PROB`` are
    returned as NaN and listed in ``undefined_rows``.
    """
    t = j._indices(target)
    g = j._indices(given)
    if set(t) & set(g):
        raise ValidationError("target and given axes overlap")
    joint = marginalize(j, list(g) + list(t)).mass
    gsize = int(np.prod([j.mass.shape[i] for i in g]))
    tsize = int(np.prod([j.mass.shape[i] for i in t]))
    joint = joint.reshape(gsize, tsize)
    totals = joint.sum(axis=1)
    undefined = np.flatnonzero(totals <= ZERO_PROB)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = joint / totals[:, None]
    k[undefined] = np.nan
    return Kernel(k, frozenset(undefined.tolist()))


def expected_distortion(p_x_xhat: np.ndarray, d: np.ndarray) -> float:
    return float((np.asarray(p_x_xhat) * np.asarray(d)).sum())


def binary_entropy(p: float) -> float:
    return entropy(FinitePmf([p, 1 - p]))
