"""Vector fields on axis-aligned boxes.

An :class:`OperatorSpec` is the common currency of the package: every
shrinkage rule, composite Bregman field and user-supplied map is wrapped into
one before it is differentiated, checked or integrated.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError


@dataclass(frozen=True, eq=False)
class Box:
    """Closed axis-aligned box ``[lower, upper]`` in R^n (infinite bounds allowed)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise ValueError(f"invalid box bounds {lo} / {hi}")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def __eq__(self, other):
        if not isinstance(other, Box):
            return NotImplemented
        return bool(np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    def __hash__(self):
        return hash((self.lower.tobytes(), self.upper.tobytes()))

    @classmethod
    def cube(cls, lo: float, hi: float, n: int) -> "Box":
        return cls(np.full(n, float(lo)), np.full(n, float(hi)))

    @classmethod
    def whole(cls, n: int) -> "Box":
        return cls.cube(-np.inf, np.inf, n)

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def center(self) -> np.ndarray:
        c = np.where(np.isfinite(self.lower) & np.isfinite(self.upper),
                     0.5 * (self.lower + self.upper), 0.0)
        c = np.where(np.isfinite(self.lower) & ~np.isfinite(self.upper), self.lower + 1.0, c)
        c = np.where(~np.isfinite(self.lower) & np.isfinite(self.upper), self.upper - 1.0, c)
        return c

    def contains(self, y, atol: float = 0.0) -> bool:
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lower - atol) and np.all(y <= self.upper + atol))

    def contains_box(self, other: "Box") -> bool:
        return bool(np.all(other.lower >= self.lower) and np.all(other.upper <= self.upper))

    def intersect(self, other: "Box") -> "Box":
        lo = np.maximum(self.lower, other.lower)
        hi = np.minimum(self.upper, other.upper)
        if np.any(lo > hi):
            raise DomainError("boxes do not intersect")
        return Box(lo, hi)

    def require_finite(self) -> None:
        if not self.is_finite:
            raise DomainError("sampling requires a box with finite bounds")

    def to_list(self) -> list:
        return [[float(a), float(b)] for a, b in zip(self.lower, self.upper)]


def _inf_margin(y):
    return np.inf


@dataclass(frozen=True)
class OperatorSpec:
    """An evaluatable map ``f: Y -> R^m`` on a box ``Y`` of R^n.

    Parameters
    ----------
    n : int
        Input dimension.
    domain : Box
        Box on which ``eval`` is defined.
    eval : callable
        ``y -> f(y)``.  When ``vectorized`` is true it must also accept a
        stack of points of shape ``(k, n)`` and return shape ``(k, m)``.
    jacobian : callable, optional
        Analytic ``y -> Df(y)`` of shape ``(m, n)``.
    nonsmooth_margin : callable, optional
        ``y -> d >= 0``, a distance proxy to the nearest point where ``f`` is
        not differentiable.  Absent means "smooth everywhere".
    provenance : str
        Catalog id, or ``"user"``.
    n_out : int, optional
        Output dimension ``m``; defaults to ``n``.
    """

    n: int
    domain: Box
    eval: Callable
    jacobian: Optional[Callable] = None
    nonsmooth_margin: Optional[Callable] = None
    provenance: str = "user"
    vectorized: bool = False
    n_out: Optional[int] = None
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.domain.n != self.n:
            raise ValueError(f"domain has dimension {self.domain.n}, operator has {self.n}")
        if self.n_out is None:
            object.__setattr__(self, "n_out", self.n)

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(self.n)
        return np.asarray(self.eval(y), dtype=float).reshape(self.n_out)

    def eval_many(self, ys) -> np.ndarray:
        ys = np.asarray(ys, dtype=float).reshape(-1, self.n)
        if self.vectorized:
            return np.asarray(self.eval(ys), dtype=float).reshape(-1, self.n_out)
        return np.array([self(y) for y in ys]).reshape(-1, self.n_out)

    def margin(self, y) -> float:
        fn = self.nonsmooth_margin or _inf_margin
        return float(fn(np.asarray(y, dtype=float).reshape(self.n)))

    def analytic_jacobian(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float).reshape(self.n)
        return np.asarray(self.jacobian(y), dtype=float).reshape(self.n_out, self.n)


def make_operator(fn: Callable, n: int, box: Box | None = None, *, jacobian=None,
                  margin=None, vectorized: bool = False, n_out: int | None = None,
                  provenance: str = "user") -> OperatorSpec:
    """Wrap a plain callable into an :class:`OperatorSpec`."""
    return OperatorSpec(n=n, domain=box if box is not None else Box.whole(n), eval=fn,
                        jacobian=jacobian, nonsmooth_margin=margin, provenance=provenance,
                        vectorized=vectorized, n_out=n_out)
