"""Deciding whether a vector field can be a proximity operator.

A map ``f`` is a proximity operator of some (possibly nonconvex) penalty
exactly when ``f(y)`` is a subgradient of a convex potential.  Where ``f`` is
C^1 that means a symmetric positive semi-definite Jacobian; on the real line
it means ``f`` is nondecreasing.  Sampling can refute these conditions with a
concrete witness but never prove them, hence the three verdicts:

``not_prox``
    a witness was found and re-validated;
``prox_compatible``
    no refutation on the sampled region;
``inconclusive``
    no usable sample (e.g. every candidate sat on a nonsmooth locus).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import __version__
from ._parallel import ordered_map
from .errors import DomainError, LocusError, StateError, UnsupportedError
from .fields import Box, OperatorSpec
from .numdiff import default_step, fd_jacobian, lipschitz_estimate, refine_quotient, spectral_verdict, worst_pair
from .shrinkage import SocialShrinkageSpec, derive_partition, social_operator

PROX_COMPATIBLE = "prox_compatible"
NOT_PROX = "not_prox"
INCONCLUSIVE = "inconclusive"

CONVEX = "convex"
WEAKLY_CONVEX_SHIFT = "weakly_convex_shift"
UNKNOWN = "unknown"

MONOTONE_TOL = 1e-12
LIPSCHITZ_SLACK = 1e-9
JUMP_FACTOR = 1e3


def _floats(a):
    return None if a is None else [float(v) for v in np.ravel(a)]


@dataclass(frozen=True)
class Witness:
    """A concrete refutation.

    ``kind`` is ``"asymmetry"`` (``value = J[i, j] - J[j, i]``),
    ``"negative_eigenvalue"`` (``value`` = smallest symmetrized eigenvalue)
    or ``"monotonicity"`` (``value = <f(y) - f(y2), y - y2> < 0`` for the pair
    ``point``, ``point2``).  ``confirm_value`` is the same quantity recomputed
    by an independent route named in ``method``.
    """

    kind: str
    point: np.ndarray
    value: float
    indices: Optional[tuple] = None
    point2: Optional[np.ndarray] = None
    confirm_value: Optional[float] = None
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "point": _floats(self.point),
            "point2": _floats(self.point2),
            "indices": None if self.indices is None else [int(i) for i in self.indices],
            "value": float(self.value),
            "confirm_value": None if self.confirm_value is None else float(self.confirm_value),
            "method": self.method,
        }


@dataclass(frozen=True)
class CheckReport:
    verdict: str
    witness: Optional[Witness] = None
    max_sym_defect: float = 0.0
    min_eig: float = float("inf")
    lipschitz: Optional[float] = None
    penalty_class: str = UNKNOWN
    shift_coefficient: Optional[float] = None
    samples_used: int = 0
    samples_skipped: int = 0
    tolerances: dict = field(default_factory=dict)
    field: str = "f"
    notes: tuple = ()

    def __post_init__(self):
        if self.verdict == NOT_PROX and self.witness is None:
            raise ValueError("a not_prox report must carry a witness")
        if self.penalty_class == WEAKLY_CONVEX_SHIFT and not (0 < (self.shift_coefficient or 0) < 1):
            raise ValueError("weakly convex shift coefficient must lie in (0, 1)")

    def to_dict(self, seed: int | None = None) -> dict:
        return {
            "schema": 1,
            "version": __version__,
            "seed": seed,
            "verdict": self.verdict,
            "witness": None if self.witness is None else self.witness.to_dict(),
            "max_sym_defect": float(self.max_sym_defect),
            "min_eig": float(self.min_eig) if np.isfinite(self.min_eig) else None,
            "lipschitz": None if self.lipschitz is None else float(self.lipschitz),
            "penalty_class": self.penalty_class,
            "shift_coefficient": self.shift_coefficient,
            "samples_used": int(self.samples_used),
            "samples_skipped": int(self.samples_skipped),
            "tolerances": dict(self.tolerances),
            "field": self.field,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def _resolve_box(op: OperatorSpec, box: Box | None) -> Box:
    box = op.domain if box is None else box
    box.require_finite()
    if box.n != op.n:
        raise DomainError(f"box has dimension {box.n}, operator has {op.n}")
    if not op.domain.contains_box(box):
        raise DomainError("box must lie inside the operator domain")
    return box


def margin_points(op: OperatorSpec, box: Box, samples: int, seed: int = 0,
                  budget_factor: int = 50) -> tuple[np.ndarray, int]:
    """First ``samples`` uniform points of ``box`` clear of the nonsmooth locus.

    A candidate is kept when its margin exceeds twice the default
    finite-difference step and its stencil stays in the domain.  Returns the
    points and the number of rejected candidates.
    """
    rng = np.random.default_rng(seed)
    cand = box.lower + rng.random((budget_factor * samples, op.n)) * box.width
    kept, rejected = [], 0
    for y in cand:
        h = default_step(y)
        ok = op.domain.contains(y - h) and op.domain.contains(y + h)
        if ok and op.nonsmooth_margin is not None:
            ok = op.margin(y) > 2 * h
        if ok:
            kept.append(y)
            if len(kept) == samples:
                break
        else:
            rejected += 1
    return np.array(kept).reshape(-1, op.n), rejected


# ---------------------------------------------------------------------------
# Jacobian scan shared with the Bregman checks
# ---------------------------------------------------------------------------

def _violation(mat, sym_tol, eig_tol):
    v = spectral_verdict(mat, sym_tol, eig_tol)
    if not v.symmetric:
        asym = mat - mat.T
        i, j = np.unravel_index(np.argmax(np.abs(asym)), asym.shape)
        return v, ("asymmetry", float(asym[i, j]), (int(i), int(j)))
    if not v.psd:
        return v, ("negative_eigenvalue", v.min_eig, None)
    return v, None


def _agree(a, b) -> bool:
    return a != 0 and 0.5 <= b / a <= 2.0


def scan_jacobians(points, jac_at: Callable, confirm_at: Callable, *, sym_tol: float,
                   eig_tol: float, field_name: str = "f", skipped: int = 0,
                   notes: tuple = ()) -> CheckReport:
    """Run the symmetric-PSD test over ``points``.

    ``jac_at(y)`` returns ``(J, exact)`` or ``None`` to skip the point;
    ``exact`` marks analytic Jacobians, which certify a violation directly.
    Otherwise ``confirm_at(y)`` recomputes ``J`` at half the step and the
    violation must persist and agree within a factor of 2.
    """
    tolerances = {"sym_tol": sym_tol, "eig_tol": eig_tol}
    results = ordered_map(jac_at, list(points))
    used, max_defect, min_eig = 0, 0.0, np.inf
    witness = None
    for y, res in zip(points, results):
        if res is None:
            skipped += 1
            continue
        mat, exact = res
        used += 1
        verdict, bad = _violation(mat, sym_tol, eig_tol)
        max_defect = max(max_defect, verdict.sym_defect)
        min_eig = min(min_eig, verdict.min_eig)
        if bad is None or witness is not None:
            continue
        kind, value, idx = bad
        if exact:
            witness = Witness(kind, np.array(y), value, idx, confirm_value=value, method="analytic")
            continue
        again = confirm_at(y)
        if again is None:
            continue
        v2, bad2 = _violation(again, sym_tol, eig_tol)
        if bad2 is None or bad2[0] != kind:
            continue
        value2 = float(again[idx] - again[idx[::-1]]) if kind == "asymmetry" else v2.min_eig
        if _agree(value, value2):
            witness = Witness(kind, np.array(y), value, idx, confirm_value=value2, method="fd-half-step")
    if witness is not None:
        verdict = NOT_PROX
    elif used == 0:
        verdict = INCONCLUSIVE
    else:
        verdict = PROX_COMPATIBLE
    return CheckReport(verdict=verdict, witness=witness, max_sym_defect=max_defect,
                       min_eig=float(min_eig), samples_used=used, samples_skipped=skipped,
                       tolerances=tolerances, field=field_name, notes=notes)


def _op_jacobian_fns(op: OperatorSpec):
    def jac_at(y):
        try:
            if op.jacobian is not None:
                return op.analytic_jacobian(y), True
            return fd_jacobian(op, y).matrix, False
        except (LocusError, DomainError):
            return None

    def confirm_at(y):
        try:
            return fd_jacobian(op, y, step=0.5 * default_step(y)).matrix
        except (LocusError, DomainError):
            return None

    return jac_at, confirm_at


# ---------------------------------------------------------------------------
# Checks
# ---------------------------------------------------------------------------

def check_monotone_1d(op: OperatorSpec, grid: int = 10_000, box: Box | None = None) -> CheckReport:
    """On the real line a map is a proximity operator iff it is nondecreasing."""
    if op.n != 1 or op.n_out != 1:
        raise UnsupportedError("check_monotone_1d needs a scalar operator")
    box = _resolve_box(op, box)
    ys = np.linspace(box.lower[0], box.upper[0], grid)
    fs = op.eval_many(ys[:, None])[:, 0]
    steps = np.diff(fs)
    bad = np.flatnonzero(steps < -MONOTONE_TOL)
    tol = {"monotone_tol": MONOTONE_TOL}
    if bad.size:
        k = int(bad[0])
        inner = float((fs[k] - fs[k + 1]) * (ys[k] - ys[k + 1]))
        w = Witness("monotonicity", np.array([ys[k]]), inner, point2=np.array([ys[k + 1]]),
                    confirm_value=float(steps[k]), method="grid")
        return CheckReport(NOT_PROX, witness=w, samples_used=grid, tolerances=tol, field="f")
    return CheckReport(PROX_COMPATIBLE, samples_used=grid, tolerances=tol, field="f")


def check_jacobian_prox(op: OperatorSpec, samples: int = 100, box: Box | None = None, seed: int = 0,
                        sym_tol: float = 1e-6, eig_tol: float = 1e-8) -> CheckReport:
    """Symmetric-PSD Jacobian test at margin-respecting random points of ``box``.

    Uses the analytic Jacobian when the operator has one (violations are then
    certified exactly), central differences otherwise (violations are
    re-validated at half the step).
    """
    if op.n_out != op.n:
        raise UnsupportedError("the Jacobian test needs a field from R^n to R^n")
    box = _resolve_box(op, box)
    pts, rejected = margin_points(op, box, samples, seed)
    jac_at, confirm_at = _op_jacobian_fns(op)
    notes = ()
    if rejected:
        notes = (f"{rejected} candidate points rejected near the nonsmooth locus",)
    return scan_jacobians(pts, jac_at, confirm_at, sym_tol=sym_tol, eig_tol=eig_tol,
                          notes=notes)


def classify_penalty(op: OperatorSpec, report: CheckReport, box: Box | None = None,
                     samples: int = 1000, seed: int = 0) -> CheckReport:
    """Attach the Lipschitz estimate and the convexity class of the hidden penalty.

    ``L <= 1`` means a convex penalty.  For ``L > 1`` the penalty plus
    ``(1 - 1/L) ||x||^2 / 2`` is convex.  The worst sampled pair is then
    bisected toward the larger change; if its quotient blows up the map
    jumps, ``L`` is reported as infinite and the class is ``unknown``.
    """
    if report.verdict != PROX_COMPATIBLE:
        raise StateError(f"cannot classify the penalty of a {report.verdict} report")
    box = _resolve_box(op, box)
    lip = lipschitz_estimate(op, samples, box, seed)
    a, b, _ = worst_pair(op, samples, box, seed)
    notes = report.notes
    if refine_quotient(op, a, b) > JUMP_FACTOR * max(lip, 1.0):
        lip, cls, coef = np.inf, UNKNOWN, None
        notes = notes + ("difference quotients blow up under refinement: f jumps, no finite Lipschitz bound",)
    elif lip <= 1 + LIPSCHITZ_SLACK:
        cls, coef = CONVEX, None
    else:
        cls, coef = WEAKLY_CONVEX_SHIFT, 1.0 - 1.0 / lip
    return dataclasses.replace(report, lipschitz=lip, penalty_class=cls, shift_coefficient=coef,
                               notes=notes)


# ---------------------------------------------------------------------------
# Social shrinkage witnesses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AsymmetryWitness:
    """Point where ``df_i/dy_j != df_j/dy_i`` for a social shrinkage operator.

    Neighborhood ``j`` is below threshold and ``i`` above, so the analytic
    asymmetry is ``2 (w^i_j)^2 y_i y_j h'(||diag(w^i) y||^2)``.
    """

    point: np.ndarray
    i: int
    j: int
    asym: float
    fd_asym: Optional[float]
    norm_below: float
    norm_above: float
    margin: float

    @property
    def relative_fd_error(self) -> Optional[float]:
        if self.fd_asym is None:
            return None
        return abs(self.fd_asym - self.asym) / abs(self.asym)

    def to_dict(self) -> dict:
        return {
            "point": _floats(self.point),
            "i": self.i,
            "j": self.j,
            "asym": float(self.asym),
            "fd_asym": None if self.fd_asym is None else float(self.fd_asym),
            "relative_fd_error": self.relative_fd_error,
            "norm_below": float(self.norm_below),
            "norm_above": float(self.norm_above),
            "margin": float(self.margin),
        }


def _admissible_pairs(w: np.ndarray, pair):
    n = w.shape[0]
    cands = [(i, j) for i in range(n) for j in range(n) if i != j]
    if pair is not None:
        i, j = pair
        cands = [(i, j), (j, i)]
    # coupling w^i_j > 0 and a direction where neighborhood i outweighs j
    return [(i, j) for i, j in cands if w[i, j] > 0 and np.any(w[i] > w[j])]


def find_asymmetry_witness(spec: SocialShrinkageSpec, pair: tuple | None = None, seed: int = 0,
                           restarts: int = 10_000, keep: int = 32,
                           fd_confirm: bool = True) -> Optional[AsymmetryWitness]:
    """Exhibit a Jacobian asymmetry of a social shrinkage operator.

    For an ordered pair ``(i, j)`` and a point with
    ``a = ||diag(w^j) y|| < ||diag(w^i) y|| = b``, rescaling by
    ``2 lam / (a + b)`` puts neighborhood ``j`` strictly below threshold and
    ``i`` strictly above.  Coordinate-sparse starts are tried before random
    restarts.  Returns ``None`` when the neighborhoods form a partition, in
    which case no such point exists.  A partition with unequal weights inside
    a block still breaks symmetry; :func:`check_jacobian_prox` detects that.
    """
    if derive_partition(spec.system).ok:
        return None
    w = spec.system.weights
    lam = spec.lam
    n = spec.n
    pairs = _admissible_pairs(w, pair)
    if not pairs:
        return None
    op = social_operator(spec)

    def finalize(y, i, j):
        a = np.linalg.norm(w[j] * y)
        b = np.linalg.norm(w[i] * y)
        if not a < b:
            return None
        y = y * (2 * lam / (a + b))
        if y[i] * y[j] == 0:
            y = y.copy()
            y[[i, j]] = np.where(y[[i, j]] == 0, 1e-3 * lam, y[[i, j]])
        a = np.linalg.norm(w[j] * y)
        b = np.linalg.norm(w[i] * y)
        if not a < lam < b:
            return None
        margin = op.margin(y)
        if margin < 1e-3 * lam:
            return None
        jac = op.analytic_jacobian(y)
        asym = jac[i, j] - jac[j, i]
        if asym == 0:
            return None
        return (y, i, j, float(asym), float(a), float(b), margin)

    found = []
    for i, j in pairs:
        for ell in np.flatnonzero(w[i] > w[j]):
            for t in (1.0, 2.0, 4.0, 8.0):
                y = np.zeros(n)
                y[i] += 1.0
                y[j] += 1.0
                y[ell] += t
                cand = finalize(y, i, j)
                if cand is not None:
                    found.append(cand)
                    break
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        if len(found) >= keep:
            break
        y = rng.standard_normal(n)
        for i, j in pairs:
            cand = finalize(y, i, j)
            if cand is not None:
                found.append(cand)
    if not found:
        return None
    comfortable = [c for c in found if c[6] >= 0.05 * lam] or found
    y, i, j, asym, a, b, margin = max(comfortable, key=lambda c: abs(c[3]))
    fd_asym = None
    if fd_confirm:
        jfd = fd_jacobian(op, y).matrix
        fd_asym = float(jfd[i, j] - jfd[j, i])
    return AsymmetryWitness(point=y, i=int(i), j=int(j), asym=asym, fd_asym=fd_asym,
                            norm_below=a, norm_above=b, margin=float(margin))


# ---------------------------------------------------------------------------
# Exhaustive oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    argmin: np.ndarray
    index: int
    value: float
    ties: np.ndarray
    tie_indices: np.ndarray


def brute_force_prox_oracle(phi, y, grid, tie_tol: float = 1e-12, tie_atol: float = 0.0) -> OracleResult:
    """Minimize ``||y - x||^2 / 2 + phi(x)`` over the finite set ``grid``.

    ``phi`` holds one penalty value per grid point (``+inf`` off the image).
    Ties, i.e. values within ``max(tie_atol, tie_tol * max(1, |min|))`` of
    the minimum, are all reported; the returned argmin is the
    lexicographically smallest.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty grid")
    pts = grid.reshape(-1, 1) if grid.ndim == 1 else grid
    if pts.shape[1] > 2:
        raise UnsupportedError("the brute-force oracle is limited to dimension <= 2")
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if phi.size != pts.shape[0]:
        raise ValueError("phi must have one value per grid point")
    y = np.asarray(y, dtype=float).reshape(pts.shape[1])
    obj = 0.5 * np.sum((pts - y) ** 2, axis=1) + phi
    best = np.min(obj)
    if not np.isfinite(best):
        raise ValueError("penalty is +inf on the whole grid")
    tied = np.flatnonzero(obj <= best + max(tie_atol, tie_tol * max(1.0, abs(best))))
    order = np.lexsort(pts[tied].T[::-1])
    tied = tied[order]
    k = int(tied[0])
    return OracleResult(argmin=pts[k].copy(), index=k, value=float(obj[k]),
                        ties=pts[tied].copy(), tie_indices=tied)
