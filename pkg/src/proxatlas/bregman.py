"""Bregman divergences and the Bregman / linear-inverse variants of the prox test.

Replacing ``||y - x||^2 / 2`` by a Bregman divergence ``D_h`` changes which
field must be a convex gradient:

* left form ``D_h(y, x) + phi(x)``: ``F(y) = grad h(f(y))``;
* right form ``D_h(x, y) + phi(x)``: ``G(x) = grad h(f^{-1}(x))``;
* linear inverse ``||y - M x||^2 / 2 + phi(x)``: ``F(y) = M f(y)``.

Each composite field is handed to the same symmetric-PSD Jacobian scan as
:func:`proxatlas.proxcheck.check_jacobian_prox`, on the same sample points.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import xlogy

from .errors import DomainError, LocusError, NoInverseError, ShapeError, SingularJacobianError, UnsupportedError
from .fields import Box, OperatorSpec
from .numdiff import default_step, fd_jacobian
from .proxcheck import INCONCLUSIVE, CheckReport, _op_jacobian_fns, _resolve_box, margin_points, scan_jacobians
from .reconstruct import invert

SINGULAR_COND = 1e10
MAX_INVERSION_FAILURES = 0.5


@dataclass(frozen=True)
class BregmanGenerator:
    """Convex differentiable ``h`` with gradient and Hessian.

    ``positive`` restricts the domain to the open positive orthant.  A missing
    ``hess`` is replaced by central differences of ``grad``.
    """

    id: str
    h: Callable
    grad: Callable
    hess: Optional[Callable] = None
    positive: bool = False

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            return False
        return bool(np.all(x > 0)) if self.positive else True

    def domain_box(self, n: int, lo: float = 1e-3, hi: float = 5.0) -> Box:
        """A finite sampling box inside the domain."""
        return Box.cube(lo if self.positive else -hi, hi, n)

    def hessian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float).reshape(x.size, x.size)
        h = default_step(x)
        cols = [(self.grad(x + h * e) - self.grad(x - h * e)) / (2 * h) for e in np.eye(x.size)]
        return np.array(cols).T


def _sq_norm() -> BregmanGenerator:
    return BregmanGenerator("sq_norm", h=lambda x: 0.5 * float(np.dot(x, x)), grad=lambda x: np.array(x, dtype=float),
                            hess=lambda x: np.eye(np.size(x)))


def _neg_entropy() -> BregmanGenerator:
    return BregmanGenerator("neg_entropy", h=lambda x: float(np.sum(xlogy(x, x) - x)), grad=np.log,
                            hess=lambda x: np.diag(1.0 / np.asarray(x, dtype=float)), positive=True)


def _burg() -> BregmanGenerator:
    return BregmanGenerator("burg", h=lambda x: float(-np.sum(np.log(x))), grad=lambda x: -1.0 / np.asarray(x),
                            hess=lambda x: np.diag(1.0 / np.asarray(x, dtype=float) ** 2), positive=True)


GENERATORS = {"sq_norm": _sq_norm, "neg_entropy": _neg_entropy, "burg": _burg}


def generator(gen_id: str) -> BregmanGenerator:
    try:
        return GENERATORS[gen_id]()
    except KeyError:
        raise UnsupportedError(f"unknown generator {gen_id!r}; known: {', '.join(GENERATORS)}") from None


def bregman_divergence(gen: BregmanGenerator, x, y) -> float:
    """``D_h(x, y) = h(x) - h(y) - <grad h(y), x - y>``; ``+inf`` outside the domain.

    >>> bregman_divergence(generator("sq_norm"), [1.0, 2.0], [0.0, 0.0])
    2.5
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ShapeError("x and y must have the same shape")
    if not (gen.contains(x) and gen.contains(y)):
        return np.inf
    return float(gen.h(x) - gen.h(y) - np.dot(gen.grad(y), x - y))


@dataclass(frozen=True)
class GeneralizedFidelity:
    """Data-fidelity term ``D(x, y)`` replacing ``||y - x||^2 / 2``."""

    form: str
    generator: Optional[BregmanGenerator] = None
    M: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.form not in ("bregman_left", "bregman_right", "linear_inverse"):
            raise ValueError(f"unknown fidelity form {self.form!r}")
        if self.form == "linear_inverse":
            if self.M is None or self.generator is not None:
                raise ValueError("linear_inverse needs M and no generator")
        elif self.generator is None or self.M is not None:
            raise ValueError("Bregman forms need a generator and no M")

    def __call__(self, x, y) -> float:
        if self.form == "bregman_right":
            return bregman_divergence(self.generator, x, y)
        if self.form == "bregman_left":
            return bregman_divergence(self.generator, y, x)
        r = np.asarray(y, dtype=float) - np.asarray(self.M, dtype=float) @ np.asarray(x, dtype=float)
        return 0.5 * float(np.dot(r, r))

    def check(self, op: OperatorSpec, samples: int = 100, box: Box | None = None, seed: int = 0,
              **tol) -> CheckReport:
        if self.form == "bregman_left":
            return check_bregman_left_prox(op, self.generator, samples, box, seed, **tol)
        if self.form == "bregman_right":
            return check_bregman_right_prox(op, self.generator, samples, box, seed, **tol)
        return check_linear_inverse_prox(op, self.M, samples, box, seed, **tol)


def _square(op: OperatorSpec):
    if op.n_out != op.n:
        raise UnsupportedError("Bregman checks need a field from R^n to R^n")


def check_bregman_left_prox(op: OperatorSpec, gen: BregmanGenerator, samples: int = 100,
                            box: Box | None = None, seed: int = 0, sym_tol: float = 1e-6,
                            eig_tol: float = 1e-8) -> CheckReport:
    """Can ``f(y)`` minimize ``D_h(y, x) + phi(x)`` for some ``phi``?

    Tests ``D[grad h o f](y) = H(f(y)) Df(y)``.  Samples with ``f(y)``
    outside the domain of ``h`` are skipped and counted.
    """
    _square(op)
    box = _resolve_box(op, box)
    pts, _ = margin_points(op, box, samples, seed)
    jac_f, confirm_f = _op_jacobian_fns(op)

    def jac_at(y):
        fy = op(y)
        if not gen.contains(fy):
            return None
        res = jac_f(y)
        return None if res is None else (gen.hessian(fy) @ res[0], res[1])

    def confirm_at(y):
        again = confirm_f(y)
        return None if again is None else gen.hessian(op(y)) @ again

    return scan_jacobians(pts, jac_at, confirm_at, sym_tol=sym_tol, eig_tol=eig_tol,
                          field_name="grad_h(f(y))", notes=(f"generator {gen.id}",))


def check_bregman_right_prox(op: OperatorSpec, gen: BregmanGenerator, samples: int = 100,
                             box: Box | None = None, seed: int = 0, sym_tol: float = 1e-6,
                             eig_tol: float = 1e-8) -> CheckReport:
    """Can ``f(y)`` minimize ``D_h(x, y) + phi(x)`` for some ``phi``?

    Tests ``D[grad h o f^{-1}](x) = H(y) Df(y)^{-1}`` at ``x = f(y)``.  With an
    analytic Jacobian this product is formed directly; otherwise ``f`` is
    inverted by Newton around ``x`` and ``grad h o f^{-1}`` differenced.
    Where ``Df(y)`` is singular the congruent form ``Df(y)^T H(y)`` is
    tested instead; it is symmetric PSD exactly when ``H Df^{-1}`` is
    wherever both exist.  More than half of the samples failing to invert
    makes the report inconclusive.
    """
    _square(op)
    box = _resolve_box(op, box)
    pts, _ = margin_points(op, box, samples, seed)
    jac_f, _ = _op_jacobian_fns(op)
    failures = []

    def inverse_field_jacobian(y, dfy, scale):
        x = op(y)
        h = scale * default_step(x) * min(1.0, float(np.linalg.svd(dfy, compute_uv=False)[-1]))
        cols = []
        for e in np.eye(op.n):
            ends = []
            for sgn in (1.0, -1.0):
                guess = y + sgn * h * np.linalg.solve(dfy, e)
                pre = invert(op, x + sgn * h * e, y_init=guess, tol=1e-14)
                if not gen.contains(pre):
                    raise NoInverseError("preimage left the generator domain")
                ends.append(gen.grad(pre))
            cols.append((ends[0] - ends[1]) / (2 * h))
        return np.array(cols).T

    def jac_at(y):
        if not gen.contains(y):
            return None
        res = jac_f(y)
        if res is None:
            return None
        dfy, exact = res
        hy = gen.hessian(y)
        if np.linalg.cond(dfy) > SINGULAR_COND:
            return dfy.T @ hy, exact
        if exact:
            return hy @ np.linalg.inv(dfy), True
        try:
            return inverse_field_jacobian(y, dfy, 1.0), False
        except (NoInverseError, SingularJacobianError, DomainError, LocusError):
            failures.append(tuple(y))
            return None

    def confirm_at(y):
        res = jac_f(y)
        if res is None:
            return None
        dfy = res[0]
        if np.linalg.cond(dfy) > SINGULAR_COND:
            again = fd_jacobian(op, y, step=0.5 * default_step(y)).matrix
            return again.T @ gen.hessian(y)
        try:
            return inverse_field_jacobian(y, dfy, 0.5)
        except (NoInverseError, SingularJacobianError, DomainError, LocusError):
            return None

    report = scan_jacobians(pts, jac_at, confirm_at, sym_tol=sym_tol, eig_tol=eig_tol,
                            field_name="grad_h(f^-1(x))", notes=(f"generator {gen.id}",))
    if len(failures) > MAX_INVERSION_FAILURES * max(len(pts), 1):
        return replace(report, verdict=INCONCLUSIVE, witness=None,
                       notes=report.notes + (f"{len(failures)} of {len(pts)} inversions failed",))
    if failures:
        return replace(report, notes=report.notes + (f"{len(failures)} of {len(pts)} inversions failed",))
    return report


def check_linear_inverse_prox(op: OperatorSpec, M, samples: int = 100, box: Box | None = None,
                              seed: int = 0, sym_tol: float = 1e-6, eig_tol: float = 1e-8) -> CheckReport:
    """Can ``f(y)`` minimize ``||y - M x||^2 / 2 + phi(x)`` for some ``phi``?

    ``op`` maps R^m to R^n and ``M`` has shape ``(m, n)``; the test runs on
    ``D[M f](y) = M Df(y)``.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (op.n, op.n_out):
        raise ShapeError(f"M must have shape ({op.n}, {op.n_out}), got {M.shape}")
    box = _resolve_box(op, box)
    pts, _ = margin_points(op, box, samples, seed)
    jac_f, confirm_f = _op_jacobian_fns(op)

    def jac_at(y):
        res = jac_f(y)
        return None if res is None else (M @ res[0], res[1])

    def confirm_at(y):
        again = confirm_f(y)
        return None if again is None else M @ again

    return scan_jacobians(pts, jac_at, confirm_at, sym_tol=sym_tol, eig_tol=eig_tol,
                          field_name="M f(y)")
