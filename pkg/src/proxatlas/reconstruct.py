"""Recovering the potential and the penalty behind a proximity operator.

If ``f`` is a proximity operator then ``f(y)`` is a (sub)gradient of a convex
potential ``psi``, so ``psi`` is a line integral of ``f``.  The penalty
follows on the image of ``f`` from

    phi(f(y)) = <y, f(y)> - ||f(y)||^2 / 2 - psi(y),

with the additive constant fixed by ``psi(y0) = 0`` at a base point ``y0``.
Where ``f`` is smooth and invertible, ``grad phi(x) = f^{-1}(x) - x``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._parallel import ordered_map
from .errors import DomainError, LocusError, NoInverseError, SingularJacobianError
from .fields import Box, OperatorSpec
from .numdiff import fd_jacobian

_GL_CACHE: dict = {}
PRESAMPLES = 33
ZOOM_POINTS = 17
ZOOM_PASSES = 14
_LOBATTO_X = np.array([-1.0, -np.sqrt(3 / 7), 0.0, np.sqrt(3 / 7), 1.0])
_LOBATTO_W = np.array([1 / 10, 49 / 90, 32 / 45, 49 / 90, 1 / 10])
MAX_DEPTH = 60


def _gauss_legendre(k: int):
    if k not in _GL_CACHE:
        _GL_CACHE[k] = np.polynomial.legendre.leggauss(k)
    return _GL_CACHE[k]


# ---------------------------------------------------------------------------
# Line integrals
# ---------------------------------------------------------------------------

def _zoom(g: Callable, a: float, b: float) -> float:
    """Shrink ``[a, b]`` around the largest second difference of ``g``.

    A jump and a kink both dominate the second differences of every grid
    that straddles them, so each pass keeps two of sixteen sub-steps.
    """
    for _ in range(ZOOM_PASSES):
        if b - a <= 1e-13 * max(1.0, abs(a), abs(b)):
            break
        t = np.linspace(a, b, ZOOM_POINTS)
        k = int(np.argmax(np.abs(np.diff(g(t), 2))))
        a, b = t[k], t[k + 2]
    return 0.5 * (a + b)


def _breakpoints(g: Callable, a: float, b: float) -> list[float]:
    """Panel boundaries at suspected jumps and kinks of ``g`` on ``[a, b]``.

    Both show up as second differences on the presample grid that dominate
    the typical one; each run of flagged differences is zoomed to a point.
    """
    t = np.linspace(a, b, PRESAMPLES)
    v = g(t)
    d2 = np.abs(np.diff(v, 2))
    floor = 1e-12 * max(1.0, float(np.max(np.abs(v))))
    flagged = np.flatnonzero(d2 > 10 * np.median(d2) + floor)
    cut = [a, b]
    if flagged.size:
        runs = np.split(flagged, np.flatnonzero(np.diff(flagged) > 1) + 1)
        for run in runs:
            cut.append(_zoom(g, t[run[0]], t[run[-1] + 2]))
    return sorted(set(cut))


def _adaptive(g: Callable, a: float, b: float, nodes: int, tol_abs: float, total: float) -> float:
    x, w = _gauss_legendre(nodes)

    def rule3(lo, hi):
        # one vectorized call: Gauss-Legendre on the panel and both halves,
        # plus Gauss-Lobatto on the panel, whose endpoint nodes expose mass
        # that all Gauss nodes miss (a kink just inside an end)
        mid = 0.5 * (lo + hi)
        half = 0.5 * (hi - lo)
        quarter = 0.5 * half
        t = np.concatenate([lo + half * (x + 1.0), lo + quarter * (x + 1.0), mid + quarter * (x + 1.0),
                            mid + half * _LOBATTO_X])
        vals = g(t)
        k = x.size
        whole = half * np.dot(w, vals[:k])
        halves = quarter * np.dot(w, vals[k:2 * k]) + quarter * np.dot(w, vals[2 * k:3 * k])
        lobatto = half * np.dot(_LOBATTO_W, vals[3 * k:])
        return halves, max(abs(whole - halves), abs(lobatto - halves))

    out = 0.0
    stack = [(a, b, 0)]
    while stack:
        lo, hi, depth = stack.pop()
        estimate, err = rule3(lo, hi)
        # width-proportional share, with a floor so panels around a jump can settle
        budget = tol_abs * max((hi - lo) / total, 1e-6)
        if err <= budget or depth >= MAX_DEPTH or hi - lo < 1e-15 * total:
            out += estimate
        else:
            mid = 0.5 * (lo + hi)
            stack.append((mid, hi, depth + 1))
            stack.append((lo, mid, depth + 1))
    return out


def _integral_1d(g: Callable, nodes: int, tol: float) -> float:
    """Adaptive Gauss-Legendre integral of ``g`` over ``[0, 1]``."""
    cuts = _breakpoints(g, 0.0, 1.0)
    t = np.linspace(0.0, 1.0, PRESAMPLES)
    scale = max(1.0, abs(float(np.trapezoid(g(t), t))))
    tol_abs = tol * scale
    return float(sum(_adaptive(g, lo, hi, nodes, tol_abs, 1.0) for lo, hi in zip(cuts[:-1], cuts[1:])
                     if hi > lo))


def _segment_integrand(op: OperatorSpec, y0: np.ndarray, y: np.ndarray) -> Callable:
    d = y - y0

    def g(t):
        pts = y0[None, :] + np.asarray(t)[:, None] * d[None, :]
        return op.eval_many(pts) @ d

    return g


def _check_points(op: OperatorSpec, *pts):
    out = []
    for p in pts:
        p = np.asarray(p, dtype=float).reshape(op.n)
        if not op.domain.contains(p):
            raise DomainError(f"point {p} lies outside the operator domain")
        out.append(p)
    return out


def potential_line_integral(op: OperatorSpec, y0, y, quadrature_nodes: int = 5,
                            tol: float = 1e-9) -> float:
    """``int_0^1 <f(y0 + t (y - y0)), y - y0> dt``, i.e. ``psi(y) - psi(y0)``.

    Panels are split at detected jumps of the integrand, then refined
    dyadically until a panel and its two halves agree.

    >>> from proxatlas.shrinkage import ScalarRule, scalar_operator
    >>> round(potential_line_integral(scalar_operator(ScalarRule.hard(2.0)), [0.0], [3.0]), 12)
    2.5
    """
    if op.n_out != op.n:
        raise DomainError("line integrals need a field from R^n to R^n")
    y0, y = _check_points(op, y0, y)
    if np.array_equal(y0, y):
        return 0.0
    return _integral_1d(_segment_integrand(op, y0, y), quadrature_nodes, tol)


def path_independence_defect(op: OperatorSpec, y0, y, via, quadrature_nodes: int = 5,
                             tol: float = 1e-9) -> float:
    """Difference between the straight path ``y0 -> y`` and the detour through ``via``.

    Conservative fields give zero; for the planar rotation field the defect
    is twice the area of the triangle.
    """
    y0, y, via = _check_points(op, y0, y, via)
    direct = potential_line_integral(op, y0, y, quadrature_nodes, tol)
    detour = (potential_line_integral(op, y0, via, quadrature_nodes, tol)
              + potential_line_integral(op, via, y, quadrature_nodes, tol))
    return abs(direct - detour)


def penalty_from_potential(op: OperatorSpec, y, psi_y: float) -> tuple[np.ndarray, float]:
    """Return ``x = f(y)`` and ``phi(x) = <y, x> - ||x||^2 / 2 - psi(y)``."""
    (y,) = _check_points(op, y)
    x = op(y)
    return x, float(np.dot(y, x) - 0.5 * np.dot(x, x) - psi_y)


# ---------------------------------------------------------------------------
# Inversion
# ---------------------------------------------------------------------------

def _jacobian(op: OperatorSpec, y) -> np.ndarray:
    if op.jacobian is not None:
        try:
            return op.analytic_jacobian(y)
        except LocusError:
            pass
    return fd_jacobian(op, y, check_margin=False).matrix


def invert(op: OperatorSpec, x, y_init=None, tol: float = 1e-12, max_iter: int = 100,
           cond_limit: float = 1e12) -> np.ndarray:
    """Solve ``f(y) = x`` by damped Newton from ``y_init`` (default ``x``).

    The step is halved while the residual grows.

    Raises
    ------
    SingularJacobianError
        The Jacobian at an iterate is singular or too badly conditioned.
    NoInverseError
        No convergence within ``max_iter`` iterations.
    """
    x = np.asarray(x, dtype=float).reshape(op.n_out)
    y = x.copy() if y_init is None else np.asarray(y_init, dtype=float).reshape(op.n).copy()
    y = np.clip(y, op.domain.lower, op.domain.upper)
    target = tol * max(1.0, float(np.linalg.norm(x)))
    res = op(y) - x
    for _ in range(max_iter):
        rnorm = float(np.linalg.norm(res))
        if rnorm <= target:
            return y
        jac = _jacobian(op, y)
        if jac.shape[0] != jac.shape[1] or np.linalg.cond(jac) > cond_limit:
            raise SingularJacobianError(f"Jacobian singular at iterate {y}")
        step = np.linalg.solve(jac, res)
        damp = 1.0
        while True:
            cand = np.clip(y - damp * step, op.domain.lower, op.domain.upper)
            new_res = op(cand) - x
            if np.linalg.norm(new_res) < rnorm or damp < 1e-10:
                break
            damp *= 0.5
        y, res = cand, new_res
    if float(np.linalg.norm(res)) <= target:
        return y
    raise NoInverseError(f"Newton did not reach f(y) = {x} within {max_iter} iterations")


def penalty_gradient(op: OperatorSpec, x, inverse_solver_tol: float = 1e-12) -> np.ndarray:
    """``grad phi(x) = f^{-1}(x) - x`` at a point where ``f`` is locally invertible.

    >>> from proxatlas.shrinkage import ScalarRule, scalar_operator
    >>> penalty_gradient(scalar_operator(ScalarRule.scaled_soft(2.0)), [4.0])
    array([-1.])
    """
    x = np.asarray(x, dtype=float).reshape(op.n_out)
    return invert(op, x, tol=inverse_solver_tol) - x


def _bracket(f: Callable, x: float, lo: float, hi: float) -> tuple[float, float]:
    """Replace infinite ends by finite ones enclosing every preimage of ``x``."""
    step = max(1.0, abs(x))
    if not np.isfinite(hi):
        hi = max(lo, 0.0) if np.isfinite(lo) else 0.0
        while f(hi) < x and hi < 1e300:
            hi, step = hi + step, 2 * step
    step = max(1.0, abs(x))
    if not np.isfinite(lo):
        lo = min(hi, 0.0)
        while f(lo) >= x and lo > -1e300:
            lo, step = lo - step, 2 * step
    return lo, hi


def _preimage_1d(op: OperatorSpec, x: float, box: Box, tol: float) -> Optional[float]:
    """Smallest ``y`` in ``box`` with ``f(y) >= x`` for nondecreasing ``f``; None off the image."""
    f = lambda t: float(op.eval_many(np.array([[t]]))[0, 0])
    lo, hi = _bracket(f, x, float(box.lower[0]), float(box.upper[0]))
    if f(hi) < x - tol or f(lo) > x + tol:
        return None
    if f(lo) >= x - tol:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) >= x:
            hi = mid
        else:
            lo = mid
    for cand in (hi, lo):
        if abs(f(cand) - x) <= tol:
            return cand
    return None


# ---------------------------------------------------------------------------
# Convexity audit
# ---------------------------------------------------------------------------

def convexity_audit(fn: Callable, box: Box, pairs: int = 1000, seed: int = 0) -> float:
    """Worst midpoint defect ``fn((a+b)/2) - (fn(a) + fn(b))/2`` over random pairs.

    Values at or below zero are consistent with convexity; a clearly
    positive value refutes it.
    """
    box.require_finite()
    rng = np.random.default_rng(seed)
    u = rng.random((pairs, 2, box.n))
    pts = box.lower + u * box.width
    worst = -np.inf
    for a, b in pts:
        fa, fb, fm = float(fn(a)), float(fn(b)), float(fn(0.5 * (a + b)))
        defect = fm - 0.5 * (fa + fb)
        if not np.isnan(defect):  # both ends at +inf say nothing
            worst = max(worst, defect)
    return float(worst)


# ---------------------------------------------------------------------------
# Reconstruction
# ---------------------------------------------------------------------------

def default_base_point(op: OperatorSpec, box: Box | None = None) -> np.ndarray:
    """Origin when it lies in the domain, otherwise the center of ``box`` (or the domain)."""
    zero = np.zeros(op.n)
    if op.domain.contains(zero) and (box is None or box.contains(zero)):
        return zero
    return (box or op.domain).center()


class PenaltyFunction:
    """Evaluatable ``psi``, ``phi`` and ``g = ||x||^2 / 2 + phi`` of an operator.

    ``phi`` is ``+inf`` off the image of ``f``.  Preimages are found by
    bisection in dimension one (``f`` nondecreasing) and by Newton otherwise.
    """

    def __init__(self, op: OperatorSpec, base_point=None, box: Box | None = None,
                 tol: float = 1e-9, image_tol: float = 1e-10):
        self.op = op
        self.box = box if box is not None else op.domain
        self.base_point = (default_base_point(op, box) if base_point is None
                           else _check_points(op, base_point)[0])
        self.tol = tol
        self.image_tol = image_tol

    def psi(self, y) -> float:
        return potential_line_integral(self.op, self.base_point, y, tol=self.tol)

    def preimage(self, x) -> Optional[np.ndarray]:
        x = np.asarray(x, dtype=float).reshape(self.op.n_out)
        if self.op.n == 1:
            t = _preimage_1d(self.op, float(x[0]), self.box, self.image_tol * max(1.0, abs(x[0])))
            return None if t is None else np.array([t])
        try:
            return invert(self.op, x)
        except (NoInverseError, SingularJacobianError):
            return None

    def phi(self, x) -> float:
        y = self.preimage(x)
        if y is None:
            return np.inf
        return penalty_from_potential(self.op, y, self.psi(y))[1]

    def g(self, x) -> float:
        x = np.asarray(x, dtype=float).reshape(self.op.n_out)
        return 0.5 * float(np.dot(x, x)) + self.phi(x)

    def gradient(self, x) -> np.ndarray:
        return penalty_gradient(self.op, x)


@dataclass(frozen=True)
class ReconstructionResult:
    """Potential and penalty sampled at ``points``.

    ``psi[k]`` is ``psi(points[k])`` with ``psi(base_point) = 0`` and
    ``phi[k]`` is the penalty at ``values[k] = f(points[k])``.
    ``well_definedness_defect`` is the largest spread of ``phi`` among
    sample points sharing the same image.
    """

    base_point: np.ndarray
    points: np.ndarray
    values: np.ndarray
    psi: np.ndarray
    phi: np.ndarray
    component_id: np.ndarray
    well_definedness_defect: float
    op: OperatorSpec

    def penalty(self, box: Box | None = None) -> PenaltyFunction:
        return PenaltyFunction(self.op, self.base_point, box)

    def g(self) -> np.ndarray:
        """``||x||^2 / 2 + phi(x)`` at the sampled image points."""
        return 0.5 * np.sum(self.values ** 2, axis=1) + self.phi

    def image_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct image points and their penalty values (first preimage wins)."""
        x, idx = np.unique(self.values, axis=0, return_index=True)
        return x, self.phi[idx]

    def rows(self):
        n, m = self.points.shape[1], self.values.shape[1]
        header = ([f"y{k}" for k in range(n)] + [f"f{k}" for k in range(m)] + ["psi"]
                  + [f"x{k}" for k in range(m)] + ["phi", "component"])
        body = []
        for y, x, p, q, c in zip(self.points, self.values, self.psi, self.phi, self.component_id):
            body.append([*map(float, y), *map(float, x), float(p), *map(float, x), float(q), int(c)])
        return header, body

    def to_csv(self) -> str:
        header, body = self.rows()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in body:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "base_point": [float(v) for v in self.base_point],
            "rows": int(self.points.shape[0]),
            "components": sorted({int(c) for c in self.component_id}),
            "well_definedness_defect": float(self.well_definedness_defect),
        }


def _well_definedness(values: np.ndarray, phi: np.ndarray) -> float:
    _, inv = np.unique(values, axis=0, return_inverse=True)
    inv = np.ravel(inv)
    spread = 0.0
    for k in np.unique(inv):
        sel = phi[inv == k]
        if sel.size > 1:
            spread = max(spread, float(sel.max() - sel.min()))
    return spread


def reconstruct(op: OperatorSpec, points, base_point=None, box: Box | None = None,
                tol: float = 1e-9) -> ReconstructionResult:
    """Sample ``psi`` and ``phi`` at ``points`` (shape ``(k, n)``, or ``(k,)`` when ``n = 1``).

    In dimension one the integrals are accumulated between consecutive sorted
    points, so a whole grid costs one pass.  The domain is a box, hence
    connected, and every point carries component label 0.
    """
    if op.n_out != op.n:
        raise DomainError("reconstruction needs a field from R^n to R^n")
    pts = np.asarray(points, dtype=float).reshape(-1, op.n)
    for p in pts:
        _check_points(op, p)
    base = default_base_point(op, box) if base_point is None else _check_points(op, base_point)[0]
    if op.n == 1:
        knots = np.unique(np.concatenate([pts[:, 0], base]))
        pieces = ordered_map(lambda ab: potential_line_integral(op, [ab[0]], [ab[1]], tol=tol),
                             list(zip(knots[:-1], knots[1:])))
        cum = np.concatenate([[0.0], np.cumsum(pieces)])
        cum -= cum[np.searchsorted(knots, base[0])]
        psi = cum[np.searchsorted(knots, pts[:, 0])]
    else:
        psi = np.array(ordered_map(lambda y: potential_line_integral(op, base, y, tol=tol), list(pts)))
    values = op.eval_many(pts)
    phi = np.einsum("ij,ij->i", pts, values) - 0.5 * np.sum(values ** 2, axis=1) - psi
    return ReconstructionResult(base_point=base, points=pts, values=values, psi=psi, phi=phi,
                                component_id=np.zeros(pts.shape[0], dtype=int),
                                well_definedness_defect=_well_definedness(values, phi), op=op)


# ---------------------------------------------------------------------------
# Round trip through the exhaustive oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RoundTripResult:
    """Exhaustive minimization of the reconstructed objective versus ``f``.

    The grid ``X`` is the image of a regular ``y``-grid of step
    ``grid_step``.  ``deviations[k]`` is the distance, in ``y``-grid steps,
    from ``queries[k]`` to the nearest grid preimage of the oracle argmin;
    ``value_gaps[k]`` is ``||argmin - f(queries[k])||``.
    """

    grid_step: float
    queries: np.ndarray
    argmins: np.ndarray
    deviations: np.ndarray
    value_gaps: np.ndarray
    ties: tuple

    @property
    def max_deviation_steps(self) -> float:
        return float(np.max(self.deviations)) if self.deviations.size else 0.0

    def to_dict(self) -> dict:
        return {
            "grid_step": self.grid_step,
            "queries": int(self.queries.shape[0]),
            "max_deviation_steps": self.max_deviation_steps,
            "max_value_gap": float(np.max(self.value_gaps)) if self.value_gaps.size else 0.0,
            "ties": [{"y": [float(v) for v in y], "set": [[float(v) for v in row] for row in s]}
                     for y, s in self.ties],
        }


def _regular_grid(box: Box, grid: int) -> tuple[np.ndarray, float]:
    if box.n == 1:
        ys = np.linspace(box.lower[0], box.upper[0], grid)
        return ys[:, None], float(ys[1] - ys[0])
    per_axis = max(2, int(round(grid ** (1.0 / box.n))))
    axes = [np.linspace(lo, hi, per_axis) for lo, hi in zip(box.lower, box.upper)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.n)
    return mesh, float(min(a[1] - a[0] for a in axes))


def oracle_round_trip(op: OperatorSpec, box: Box, grid: int = 10_001, samples: int = 100,
                      seed: int = 0, probes=()) -> RoundTripResult:
    """Reconstruct ``phi`` on a grid image and re-derive ``f`` by exhaustive search.

    Random queries are drawn in ``box``.  ``probes`` are extra query points,
    typically where the prox is set-valued; they are also added to the
    reconstruction grid so that their images, and hence exact ties, are
    represented in ``X``.
    """
    from .errors import UnsupportedError
    from .proxcheck import brute_force_prox_oracle

    if op.n > 2:
        raise UnsupportedError("the exhaustive oracle is limited to dimension <= 2")
    box.require_finite()
    ys, step = _regular_grid(box, grid)
    probes = np.asarray(probes, dtype=float).reshape(-1, op.n)
    rec = reconstruct(op, np.vstack([ys, probes]), box=box)
    X, phi = rec.image_table()
    rng = np.random.default_rng(seed)
    queries = box.lower + rng.random((samples, op.n)) * box.width
    queries = np.vstack([queries, probes])
    argmins, devs, gaps, ties = [], [], [], []
    for y in queries:
        res = brute_force_prox_oracle(phi, y, X)
        pre = rec.points[np.all(rec.values == res.argmin, axis=1)]
        devs.append(float(np.min(np.linalg.norm(pre - y, axis=1))) / step)
        gaps.append(float(np.linalg.norm(res.argmin - op(y))))
        argmins.append(res.argmin)
        if res.ties.shape[0] > 1:
            ties.append((y.copy(), res.ties))
    return RoundTripResult(grid_step=step, queries=queries, argmins=np.array(argmins),
                           deviations=np.array(devs), value_gaps=np.array(gaps), ties=tuple(ties))
