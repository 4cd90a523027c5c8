"""Finite-difference Jacobians, spectral summaries and sampled Lipschitz bounds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LocusError, ShapeError
from .fields import Box, OperatorSpec

EPS_CBRT = float(np.cbrt(np.finfo(float).eps))

LIPSCHITZ_SCALES = (1e-3, 1e-1, 1.0)


def default_step(y) -> float:
    """Central-difference step ``cbrt(eps) * max(1, ||y||_inf)``."""
    return EPS_CBRT * max(1.0, float(np.max(np.abs(y))))


@dataclass(frozen=True)
class JacobianEstimate:
    point: np.ndarray
    matrix: np.ndarray
    step: np.ndarray
    scheme: str = "central"

    def __post_init__(self):
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("Jacobian estimate has non-finite entries")
        if np.any(np.asarray(self.step) <= 0):
            raise ValueError("steps must be positive")


@dataclass(frozen=True)
class SpectralVerdict:
    """Asymmetry and curvature summary of one Jacobian.

    ``sym_defect`` is ``||J - J^T||_F / max(1, ||J||_F)`` and ``min_eig`` the
    smallest eigenvalue of ``(J + J^T)/2``.  No decision is taken here.
    """

    sym_defect: float
    min_eig: float
    sym_tol: float
    eig_tol: float

    @property
    def symmetric(self) -> bool:
        return self.sym_defect <= self.sym_tol

    @property
    def psd(self) -> bool:
        return self.min_eig >= -self.eig_tol


def fd_jacobian(op: OperatorSpec, y, step: float | None = None, scheme: str = "central",
                check_margin: bool = True) -> JacobianEstimate:
    """Column-by-column finite-difference Jacobian of ``op`` at ``y``.

    Raises
    ------
    DomainError
        A stencil point leaves ``op.domain``.
    LocusError
        ``op.margin(y) <= 2*step`` while ``check_margin`` is set.
    """
    y = np.asarray(y, dtype=float).reshape(op.n)
    h = default_step(y) if step is None else float(step)
    if not h > 0:
        raise ValueError("step must be positive")
    if scheme not in ("central", "forward"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if check_margin and op.nonsmooth_margin is not None and not op.margin(y) > 2 * h:
        raise LocusError(f"margin {op.margin(y):.3g} at {y} is within 2*step={2 * h:.3g} of the locus")
    eye = np.eye(op.n) * h
    plus = y + eye
    minus = y - eye if scheme == "central" else np.broadcast_to(y, plus.shape)
    if not (all(op.domain.contains(p) for p in plus) and all(op.domain.contains(p) for p in minus)):
        raise DomainError(f"finite-difference stencil at {y} leaves the domain")
    fp = op.eval_many(plus)
    fm = op.eval_many(minus)
    denom = 2 * h if scheme == "central" else h
    jac = ((fp - fm) / denom).T
    return JacobianEstimate(point=y, matrix=jac, step=np.full(op.n, h), scheme=scheme)


def spectral_verdict(jac, sym_tol: float = 1e-6, eig_tol: float = 1e-8) -> SpectralVerdict:
    """Symmetry defect and smallest symmetrized eigenvalue of a square Jacobian."""
    mat = np.asarray(jac.matrix if isinstance(jac, JacobianEstimate) else jac, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ShapeError(f"spectral verdict needs a square matrix, got {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise ValueError("matrix must be finite")
    defect = np.linalg.norm(mat - mat.T) / max(1.0, np.linalg.norm(mat))
    min_eig = np.linalg.eigvalsh(0.5 * (mat + mat.T))[0]
    return SpectralVerdict(float(defect), float(min_eig), sym_tol, eig_tol)


def _dyadic_quantum(box: Box) -> float:
    span = max(1.0, float(np.max(np.abs(np.concatenate([box.lower, box.upper])))))
    return 2.0 ** (int(np.ceil(np.log2(span))) - 40)


def _snap(points, box: Box, q: float):
    """Round to a dyadic lattice inside ``box``.

    Lattice coordinates make differences of piecewise-linear maps exact, so a
    slope-1 segment reports a ratio of exactly 1.
    """
    lo = np.ceil(box.lower / q) * q
    hi = np.floor(box.upper / q) * q
    return np.clip(np.round(points / q) * q, lo, hi)


def _pairs(box: Box, samples: int, seed: int):
    box.require_finite()
    n = box.n
    rng = np.random.default_rng(seed)
    u = rng.random((samples, 3 * n))  # one row per pair; prefix-stable in `samples`
    base = box.lower + u[:, :n] * box.width
    direction = 2.0 * u[:, n:2 * n] - 1.0
    norms = np.linalg.norm(direction, axis=1, keepdims=True)
    direction = np.where(norms > 0, direction / np.where(norms > 0, norms, 1.0), 1.0 / np.sqrt(n))
    far = box.lower + u[:, 2 * n:] * box.width
    kind = np.arange(samples) % (len(LIPSCHITZ_SCALES) + 1)
    scale = np.array(LIPSCHITZ_SCALES + (np.nan,))[kind]
    partner = np.where(np.isnan(scale)[:, None], far, base + np.nan_to_num(scale)[:, None] * direction)
    q = _dyadic_quantum(box)
    return _snap(base, box, q), _snap(partner, box, q), kind


def _quotients(op: OperatorSpec, samples: int, box: Box, seed: int):
    if not op.domain.contains_box(box):
        raise DomainError("sampling box must lie inside the operator domain")
    a, b, kind = _pairs(box, samples, seed)
    dist = np.linalg.norm(a - b, axis=1)
    keep = dist > 0
    ratio = np.zeros(samples)
    if np.any(keep):
        diff = np.linalg.norm(op.eval_many(a[keep]) - op.eval_many(b[keep]), axis=1)
        ratio[keep] = diff / dist[keep]
    return a, b, kind, ratio


def lipschitz_profile(op: OperatorSpec, samples: int, box: Box, seed: int = 0) -> dict:
    """Largest difference quotient per pair scale.

    Keys are the distance scales ``1e-3, 0.1, 1`` plus ``"random"`` for pairs
    drawn independently in the box.
    """
    _, _, kind, ratio = _quotients(op, samples, box, seed)
    out = {}
    for k, label in enumerate(LIPSCHITZ_SCALES + ("random",)):
        sel = kind == k
        out[label] = float(ratio[sel].max()) if np.any(sel) else 0.0
    return out


def worst_pair(op: OperatorSpec, samples: int, box: Box, seed: int = 0):
    """The sampled pair with the largest difference quotient, and that quotient."""
    a, b, _, ratio = _quotients(op, samples, box, seed)
    k = int(np.argmax(ratio))
    return a[k], b[k], float(ratio[k])


def refine_quotient(op: OperatorSpec, a, b, levels: int = 40) -> float:
    """Difference quotient after repeatedly halving ``[a, b]`` toward the larger change.

    Bounded by the local Lipschitz constant when ``f`` is Lipschitz; grows
    like ``2**levels`` across a jump.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    fa, fb = op(a), op(b)
    for _ in range(levels):
        m = 0.5 * (a + b)
        if np.array_equal(m, a) or np.array_equal(m, b):
            break
        fm = op(m)
        if np.linalg.norm(fm - fa) >= np.linalg.norm(fb - fm):
            b, fb = m, fm
        else:
            a, fa = m, fm
    dist = np.linalg.norm(b - a)
    return float(np.linalg.norm(fb - fa) / dist) if dist > 0 else 0.0


def lipschitz_estimate(op: OperatorSpec, samples: int, box: Box, seed: int = 0) -> float:
    """Sampled lower bound on the Lipschitz constant of ``op`` over ``box``.

    Pairs are taken at distances 1e-3, 0.1 and 1 around uniform base points
    and between independent uniform points.  The result never decreases when
    ``samples`` grows with the same ``seed``.
    """
    return max(lipschitz_profile(op, samples, box, seed).values())


def directional_monotonicity_defect(op: OperatorSpec, y, y2) -> float:
    """``min(0, <f(y) - f(y2), y - y2>)``; negative values rule out a convex potential."""
    y = np.asarray(y, dtype=float).reshape(op.n)
    y2 = np.asarray(y2, dtype=float).reshape(op.n)
    if op.n_out != op.n:
        raise ShapeError("monotonicity needs a field from R^n to R^n")
    if not (op.domain.contains(y) and op.domain.contains(y2)):
        raise DomainError("both points must lie in the domain")
    return min(0.0, float(np.dot(op(y) - op(y2), y - y2)))
