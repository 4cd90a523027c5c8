"""Scalar, group and social shrinkage operators.

Every rule is available both as a plain function (``eval_*``) and, through
the ``*_operator`` builders, as an :class:`~proxatlas.fields.OperatorSpec`
with an analytic Jacobian and a nonsmooth-locus margin.

Indices are 0-based throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, LocusError, ShapeError
from .fields import Box, OperatorSpec

SCALAR_KINDS = ("soft", "hard", "scaled_soft", "quantizer", "identity")


# ---------------------------------------------------------------------------
# Scalar rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarRule:
    """A nondecreasing thresholding rule on the real line.

    ``lam`` is the threshold, ``scale`` the factor ``C`` of scaled soft
    thresholding; quantizers carry strictly increasing ``breakpoints``
    ``x_0 < ... < x_q`` and nondecreasing ``levels`` ``v_0 <= ... <= v_{q-1}``.
    """

    kind: str
    lam: float = 1.0
    scale: float = 1.0
    breakpoints: tuple = ()
    levels: tuple = ()

    def __post_init__(self):
        if self.kind not in SCALAR_KINDS:
            raise ValueError(f"unknown scalar rule {self.kind!r}")
        if self.lam < 0:
            raise ValueError("threshold must be nonnegative")
        if self.kind == "scaled_soft" and not self.scale > 0:
            raise ValueError("scale must be positive")
        if self.kind == "quantizer":
            x = np.asarray(self.breakpoints, dtype=float)
            v = np.asarray(self.levels, dtype=float)
            if x.size < 2 or v.size != x.size - 1:
                raise ValueError("quantizer needs q+1 breakpoints and q levels")
            if np.any(np.diff(x) <= 0):
                raise ValueError("quantizer breakpoints must be strictly increasing")
            if np.any(np.diff(v) < 0):
                raise ValueError("quantizer levels must be nondecreasing")
            object.__setattr__(self, "breakpoints", tuple(float(t) for t in x))
            object.__setattr__(self, "levels", tuple(float(t) for t in v))

    @classmethod
    def soft(cls, lam=1.0):
        return cls("soft", lam=lam)

    @classmethod
    def hard(cls, lam=1.0):
        return cls("hard", lam=lam)

    @classmethod
    def scaled_soft(cls, scale=2.0, lam=1.0):
        return cls("scaled_soft", lam=lam, scale=scale)

    @classmethod
    def quantizer(cls, breakpoints, levels):
        return cls("quantizer", lam=0.0, breakpoints=tuple(breakpoints), levels=tuple(levels))

    @classmethod
    def uniform_quantizer(cls, q=4, lo=0.0, hi=1.0):
        """Cells of equal width, each level at the middle of its cell.

        Interior breakpoints are then midpoints between consecutive levels.
        """
        x = np.linspace(lo, hi, q + 1)
        return cls.quantizer(x, 0.5 * (x[:-1] + x[1:]))

    @classmethod
    def identity(cls):
        return cls("identity", lam=0.0)

    @property
    def hard_cut(self) -> float:
        return float(np.sqrt(2.0 * self.lam))

    @property
    def interval(self) -> tuple[float, float]:
        """Half-open domain ``[x_0, x_q)`` for quantizers, the real line otherwise."""
        if self.kind == "quantizer":
            return self.breakpoints[0], self.breakpoints[-1]
        return -np.inf, np.inf


def _scalar_values(rule: ScalarRule, y: np.ndarray) -> np.ndarray:
    a = np.abs(y)
    if rule.kind == "identity":
        return y.copy()
    if rule.kind == "soft":
        return np.sign(y) * np.maximum(a - rule.lam, 0.0)
    if rule.kind == "scaled_soft":
        return rule.scale * np.sign(y) * np.maximum(a - rule.lam, 0.0)
    if rule.kind == "hard":
        # tie points map to +-sqrt(2 lam)
        return np.where(a >= rule.hard_cut, y, 0.0)
    x = np.asarray(rule.breakpoints)
    if np.any(y < x[0]) or np.any(y >= x[-1]):
        raise DomainError(f"quantizer input outside [{x[0]}, {x[-1]})")
    idx = np.searchsorted(x, y, side="right") - 1
    return np.asarray(rule.levels)[idx]


def _scalar_slopes(rule: ScalarRule, y: np.ndarray) -> np.ndarray:
    a = np.abs(y)
    if rule.kind == "identity":
        return np.ones_like(y)
    if rule.kind in ("soft", "scaled_soft"):
        c = rule.scale if rule.kind == "scaled_soft" else 1.0
        if rule.lam > 0 and np.any(a == rule.lam):
            raise LocusError("derivative undefined at |y| = threshold")
        return np.where(a > rule.lam, c, 0.0)
    if rule.kind == "hard":
        if np.any(a == rule.hard_cut):
            raise LocusError("derivative undefined at the hard-threshold jump")
        return np.where(a > rule.hard_cut, 1.0, 0.0)
    inner = np.asarray(rule.breakpoints[1:-1])
    if inner.size and np.any(np.isin(y, inner)):
        raise LocusError("derivative undefined at a quantizer breakpoint")
    _scalar_values(rule, y)  # domain check
    return np.zeros_like(y)


def _scalar_margin(rule: ScalarRule, y: np.ndarray) -> float:
    a = np.abs(y)
    if rule.kind == "identity" or (rule.kind in ("soft", "scaled_soft") and rule.lam == 0):
        return np.inf
    if rule.kind in ("soft", "scaled_soft"):
        return float(np.min(np.abs(a - rule.lam)))
    if rule.kind == "hard":
        return float(np.min(np.abs(a - rule.hard_cut))) if rule.lam > 0 else float(np.min(a))
    inner = np.asarray(rule.breakpoints[1:-1])
    if inner.size == 0:
        return np.inf
    return float(np.min(np.abs(np.ravel(y)[:, None] - inner[None, :])))


def eval_scalar(rule: ScalarRule, y):
    """Evaluate a scalar rule at ``y`` (scalar or array, elementwise).

    >>> eval_scalar(ScalarRule.hard(2.0), 1.5)
    0.0
    """
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("input must be finite")
    out = _scalar_values(rule, arr)
    return float(out) if out.ndim == 0 else out


def scalar_operator(rule: ScalarRule, n: int = 1, provenance: str | None = None) -> OperatorSpec:
    """Separable operator applying ``rule`` to each of ``n`` coordinates."""
    lo, hi = rule.interval
    if rule.kind == "quantizer":
        # largest float below x_q keeps the closed box inside [x_0, x_q)
        hi = float(np.nextafter(hi, lo))
    domain = Box(np.full(n, lo), np.full(n, hi))

    def jac(y):
        return np.diag(_scalar_slopes(rule, np.asarray(y, dtype=float)))

    return OperatorSpec(
        n=n, domain=domain,
        eval=lambda y: _scalar_values(rule, np.asarray(y, dtype=float)),
        jacobian=jac,
        nonsmooth_margin=lambda y: _scalar_margin(rule, y),
        provenance=provenance or rule.kind,
        vectorized=True,
        params={"rule": rule},
    )


# ---------------------------------------------------------------------------
# Group and neighborhood structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GroupStructure:
    """A partition of ``range(n)`` into disjoint nonempty groups."""

    n: int
    groups: tuple

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(i) for i in g)) for g in self.groups)
        seen = [i for g in groups for i in g]
        if any(len(g) == 0 for g in groups):
            raise ValueError("groups must be nonempty")
        if sorted(seen) != list(range(self.n)):
            raise ValueError(f"groups {groups} do not partition range({self.n})")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def from_labels(cls, labels: Sequence) -> "GroupStructure":
        """Build from one group label per coordinate, e.g. ``[1, 1, 2, 2]``."""
        order: dict = {}
        for i, lab in enumerate(labels):
            order.setdefault(lab, []).append(i)
        return cls(len(labels), tuple(order.values()))

    def indicator(self) -> np.ndarray:
        """Row ``i`` is the 0/1 indicator of the group containing ``i``."""
        w = np.zeros((self.n, self.n))
        for g in self.groups:
            for i in g:
                w[i, list(g)] = 1.0
        return w

    def to_neighborhood_system(self) -> "NeighborhoodSystem":
        return NeighborhoodSystem(self.indicator())

    def to_dict(self) -> dict:
        return {"n": self.n, "groups": [list(g) for g in self.groups]}


@dataclass(frozen=True, eq=False)
class NeighborhoodSystem:
    """Nonnegative weight vectors ``w^i`` (row ``i`` of ``weights``).

    The neighborhood of ``i`` is the support of ``w^i`` and must contain ``i``.
    """

    weights: np.ndarray
    neighborhoods: tuple = field(init=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError("weights must be an n x n array")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(np.diag(w) <= 0):
            raise ValueError("each index must belong to its own neighborhood (w^i_i > 0)")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "neighborhoods",
                           tuple(tuple(int(j) for j in np.flatnonzero(row)) for row in w))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def sliding_window(cls, n: int, window: int = 1, weights: Sequence | None = None):
        """``N_i = {i-window, ..., i+window}`` clipped to ``range(n)``.

        ``weights`` (length ``2*window+1``) gives the profile across the
        window; unit weights by default.
        """
        prof = np.ones(2 * window + 1) if weights is None else np.asarray(weights, dtype=float)
        w = np.zeros((n, n))
        for i in range(n):
            for k in range(-window, window + 1):
                if 0 <= i + k < n:
                    w[i, i + k] = prof[k + window]
        return cls(w)

    @classmethod
    def blocks(cls, n: int, size: int):
        """Disjoint contiguous blocks of ``size`` with unit weights."""
        labels = [i // size for i in range(n)]
        return GroupStructure.from_labels(labels).to_neighborhood_system()

    def to_dict(self) -> dict:
        return {"n": self.n, "weights": self.weights.tolist()}


# ---------------------------------------------------------------------------
# Social shrinkage
# ---------------------------------------------------------------------------

def _wglasso_profile(lam):
    return (lambda t: 1.0 - lam / np.sqrt(t),
            lambda t: 0.5 * lam / (t * np.sqrt(t)))


def _pew_profile(lam):
    return (lambda t: 1.0 - lam * lam / t,
            lambda t: lam * lam / (t * t))


PROFILES = {"wglasso": _wglasso_profile, "pew": _pew_profile}


@dataclass(frozen=True)
class SocialShrinkageSpec:
    """Generalized social shrinkage ``f_i(y) = y_i h(||diag(w^i) y||^2)``.

    Coefficient ``i`` is kept only when ``||diag(w^i) y|| > lam``.  The
    profile is ``"wglasso"`` (``h(t) = 1 - lam/sqrt(t)``), ``"pew"``
    (``h(t) = 1 - lam^2/t``) or ``"custom"``, in which case ``h`` and ``dh``
    must be given and ``dh`` must not vanish on ``t > 0``.
    """

    system: NeighborhoodSystem
    lam: float
    profile: str = "wglasso"
    h: Optional[Callable] = None
    dh: Optional[Callable] = None

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("social shrinkage needs lam > 0")
        if self.profile in PROFILES:
            h, dh = PROFILES[self.profile](self.lam)
            object.__setattr__(self, "h", h)
            object.__setattr__(self, "dh", dh)
        elif self.profile != "custom" or self.h is None or self.dh is None:
            raise ValueError("custom profiles need both h and dh")

    @property
    def n(self) -> int:
        return self.system.n


def _weighted_sq_norms(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``t_i = ||diag(w^i) y||^2`` summed over the support of ``w^i`` in index order.

    ``y`` may be a stack ``(k, n)``; the result then has shape ``(k, n)``.
    """
    y2 = np.atleast_2d(y)
    t = np.empty((y2.shape[0], w.shape[0]))
    for i, row in enumerate(w):
        supp = np.flatnonzero(row)
        t[:, i] = np.sum((row[supp] * y2[:, supp]) ** 2, axis=1)
    return t


def _check_dim(n: int, y: np.ndarray) -> None:
    if y.shape[-1] != n:
        raise ShapeError(f"expected vectors of length {n}, got shape {y.shape}")


def _social_values(y, w, lam, h):
    y = np.asarray(y, dtype=float)
    t = _weighted_sq_norms(y, w)
    active = np.sqrt(t) > lam
    factor = np.zeros_like(t)
    factor[active] = h(t[active])
    out = np.atleast_2d(y) * factor
    return out.reshape(y.shape)


def _social_jacobian(y, w, lam, h, dh):
    y = np.asarray(y, dtype=float)
    t = _weighted_sq_norms(y, w)[0]
    r = np.sqrt(t)
    if np.any(r == lam):
        raise LocusError("point lies on a threshold sphere ||diag(w^i) y|| = lam")
    n = y.size
    jac = np.zeros((n, n))
    for i in np.flatnonzero(r > lam):
        jac[i] = 2.0 * w[i] ** 2 * y[i] * y * dh(t[i])
        jac[i, i] += h(t[i])
    return jac


def _social_margin(y, w, lam) -> float:
    return float(np.min(np.abs(np.sqrt(_weighted_sq_norms(y, w)[0]) - lam)))


def eval_social(spec: SocialShrinkageSpec, y) -> np.ndarray:
    """Apply generalized social shrinkage; ``y`` may be a stack of vectors."""
    y = np.asarray(y, dtype=float)
    _check_dim(spec.n, y)
    return _social_values(y, spec.system.weights, spec.lam, spec.h)


def analytic_social_jacobian(spec: SocialShrinkageSpec, y) -> np.ndarray:
    """Full Jacobian of social shrinkage, product-rule diagonal included.

    Row ``i`` vanishes when neighborhood ``i`` is below threshold; otherwise
    entry ``(i, j)`` is ``2 (w^i_j)^2 y_i y_j h'(t_i)`` plus ``h(t_i)`` on the
    diagonal.  Raises :class:`LocusError` on a threshold sphere.
    """
    y = np.asarray(y, dtype=float)
    _check_dim(spec.n, y)
    return _social_jacobian(y, spec.system.weights, spec.lam, spec.h, spec.dh)


def nonsmooth_margin(spec: SocialShrinkageSpec, y) -> float:
    """``min_i | ||diag(w^i) y|| - lam |``; zero on a threshold sphere."""
    y = np.asarray(y, dtype=float)
    _check_dim(spec.n, y)
    return _social_margin(y, spec.system.weights, spec.lam)


def social_operator(spec: SocialShrinkageSpec, provenance: str | None = None) -> OperatorSpec:
    w = spec.system.weights
    return OperatorSpec(
        n=spec.n, domain=Box.whole(spec.n),
        eval=lambda y: _social_values(y, w, spec.lam, spec.h),
        jacobian=lambda y: _social_jacobian(y, w, spec.lam, spec.h, spec.dh),
        nonsmooth_margin=lambda y: _social_margin(y, w, spec.lam),
        provenance=provenance or spec.profile,
        vectorized=True,
        params={"social": spec},
    )


# ---------------------------------------------------------------------------
# Group shrinkage (non-overlapping groups)
# ---------------------------------------------------------------------------

def eval_group_lasso(gs: GroupStructure, lam: float, y) -> np.ndarray:
    """Block soft thresholding: ``y_G (1 - lam/||y_G||)_+`` on each group.

    A group with zero norm maps to zero.
    """
    y = np.asarray(y, dtype=float)
    _check_dim(gs.n, y)
    return _social_values(y, gs.indicator(), lam, _wglasso_profile(lam)[0])


def eval_group_ew(gs: GroupStructure, lam: float, y) -> np.ndarray:
    """Group empirical Wiener: ``y_G (1 - lam^2/||y_G||^2)_+`` on each group."""
    y = np.asarray(y, dtype=float)
    _check_dim(gs.n, y)
    return _social_values(y, gs.indicator(), lam, _pew_profile(lam)[0])


def group_operator(gs: GroupStructure, lam: float, kind: str = "group_lasso",
                   provenance: str | None = None) -> OperatorSpec:
    if kind not in ("group_lasso", "group_ew"):
        raise ValueError(f"unknown group operator {kind!r}")
    if not lam >= 0:
        raise ValueError("threshold must be nonnegative")
    w = gs.indicator()
    h, dh = (_wglasso_profile if kind == "group_lasso" else _pew_profile)(lam)
    return OperatorSpec(
        n=gs.n, domain=Box.whole(gs.n),
        eval=lambda y: _social_values(y, w, lam, h),
        jacobian=lambda y: _social_jacobian(y, w, lam, h, dh),
        nonsmooth_margin=lambda y: _social_margin(y, w, lam),
        provenance=provenance or kind,
        vectorized=True,
        params={"groups": gs, "lam": lam},
    )


# ---------------------------------------------------------------------------
# Partition recovery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PartitionResult:
    """Outcome of :func:`derive_partition`.

    ``groups`` are the classes of the relation ``w^i == w^j``;
    ``support_matches[k]`` tells whether the shared weight vector of group
    ``k`` is supported exactly on that group.  ``structure`` is set only when
    every flag holds.
    """

    groups: tuple
    support_matches: tuple
    structure: Optional[GroupStructure]
    violating_pair: Optional[tuple]

    @property
    def ok(self) -> bool:
        return self.structure is not None

    def to_dict(self) -> dict:
        return {
            "groups": [list(g) for g in self.groups],
            "support_matches": list(self.support_matches),
            "partition": None if self.structure is None else [list(g) for g in self.structure.groups],
            "violating_pair": None if self.violating_pair is None else list(self.violating_pair),
        }


def derive_partition(ns: NeighborhoodSystem, tol: float = 0.0) -> PartitionResult:
    """Group indices with identical weight vectors and test ``supp(w^G) == G``.

    ``tol`` relaxes the equality test to ``max |w^i - w^j| <= tol``; classes
    are then formed greedily around the first member.
    """
    w = ns.weights
    groups: list[list[int]] = []
    for i in range(ns.n):
        for g in groups:
            if np.max(np.abs(w[g[0]] - w[i])) <= tol:
                g.append(i)
                break
        else:
            groups.append([i])
    matches = tuple(set(ns.neighborhoods[g[0]]) == set(g) for g in groups)
    if all(matches):
        return PartitionResult(tuple(map(tuple, groups)), matches,
                               GroupStructure(ns.n, tuple(map(tuple, groups))), None)
    pair = None
    for i in range(ns.n):
        for j in range(i + 1, ns.n):
            ni, nj = set(ns.neighborhoods[i]), set(ns.neighborhoods[j])
            if ni != nj and ni & nj:
                pair = (i, j)
                break
        if pair:
            break
    return PartitionResult(tuple(map(tuple, groups)), matches, None, pair)
