import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from proxatlas.catalog import CATALOG_IDS, parse_operator_id
from proxatlas.errors import DomainError, LocusError, ShapeError
from proxatlas.fields import Box, make_operator
from proxatlas.numdiff import (
    default_step, directional_monotonicity_defect, fd_jacobian, lipschitz_estimate,
    spectral_verdict,
)
from proxatlas.proxcheck import margin_points


def test_identity_jacobian():
    op = parse_operator_id("identity:n=3")
    np.testing.assert_allclose(fd_jacobian(op, [0.3, -2.0, 7.0]).matrix, np.eye(3), atol=1e-10)


def test_scaled_soft_slope():
    op = parse_operator_id("scaled_soft:C=2")
    np.testing.assert_allclose(fd_jacobian(op, [3.0]).matrix, [[2.0]], atol=1e-8)


def test_group_lasso_against_hand_derivative():
    op = parse_operator_id("group_lasso:groups=1,1")
    y = np.array([3.0, 4.0])
    r = np.linalg.norm(y)
    oracle = np.eye(2) * (1 - 1 / r) + np.outer(y, y) / r ** 3
    np.testing.assert_allclose(fd_jacobian(op, y).matrix, oracle, atol=1e-6)


def test_margin_and_domain_errors():
    with pytest.raises(LocusError):
        fd_jacobian(parse_operator_id("soft"), [1.0 + 1e-7])
    with pytest.raises(DomainError):
        fd_jacobian(parse_operator_id("quantizer"), [0.0])


def test_default_step():
    assert default_step([0.0]) == pytest.approx(np.cbrt(np.finfo(float).eps))
    assert default_step([-10.0, 2.0]) == pytest.approx(10 * np.cbrt(np.finfo(float).eps))


@pytest.mark.parametrize("mat, defect, min_eig", [
    ([[1, 0], [0, 1]], 0.0, 1.0),
    ([[0, 1], [0, 0]], np.sqrt(2), None),
    ([[1, 2], [2, 1]], 0.0, -1.0),
])
def test_spectral_examples(mat, defect, min_eig):
    v = spectral_verdict(np.array(mat, dtype=float))
    assert v.sym_defect == pytest.approx(defect, abs=1e-15)
    if min_eig is not None:
        assert v.min_eig == pytest.approx(min_eig, abs=1e-14)


def test_spectral_rejects_rectangular():
    with pytest.raises(ShapeError):
        spectral_verdict(np.ones((2, 3)))


@given(arrays(float, (3, 3), elements=st.floats(-5, 5)), st.floats(-5, 5))
def test_identity_shift_moves_min_eig(mat, c):
    base = spectral_verdict(mat).min_eig
    shifted = spectral_verdict(mat + c * np.eye(3)).min_eig
    assert shifted == pytest.approx(base + c, abs=1e-12)


def test_analytic_jacobians_match_fd_on_catalog():
    for cid in CATALOG_IDS:
        op = parse_operator_id(cid)
        box = op.domain if op.domain.is_finite else Box.cube(-3, 3, op.n)
        pts, _ = margin_points(op, box, 100, seed=3)
        assert len(pts) == 100, cid
        for y in pts:
            exact = op.analytic_jacobian(y)
            approx = fd_jacobian(op, y).matrix
            assert np.linalg.norm(exact - approx) <= 1e-6 * max(1.0, np.linalg.norm(exact)), cid


class TestLipschitz:
    def test_soft(self):
        est = lipschitz_estimate(parse_operator_id("soft"), 1000, Box.cube(-5, 5, 1), seed=0)
        assert 1 - 1e-9 <= est <= 1.0

    def test_scaled_soft(self):
        est = lipschitz_estimate(parse_operator_id("scaled_soft:C=2"), 1000, Box.cube(-5, 5, 1), seed=0)
        assert 2 - 1e-3 <= est <= 2.0

    def test_constant(self):
        op = make_operator(lambda y: np.full_like(np.asarray(y, dtype=float), 3.0), 2, vectorized=True)
        assert lipschitz_estimate(op, 200, Box.cube(-1, 1, 2)) == 0.0

    @pytest.mark.parametrize("cid", ["group_ew", "pew", "hard"])
    def test_monotone_in_sample_count(self, cid):
        op = parse_operator_id(cid)
        box = Box.cube(-3, 3, op.n)
        values = [lipschitz_estimate(op, k, box, seed=5) for k in (10, 50, 200, 800)]
        assert values == sorted(values)


class TestMonotonicityDefect:
    def test_identity(self):
        op = parse_operator_id("identity:n=2")
        assert directional_monotonicity_defect(op, [1.0, 2.0], [-3.0, 0.5]) == 0.0

    def test_negation(self):
        op = make_operator(lambda y: -np.asarray(y), 1)
        assert directional_monotonicity_defect(op, [1.0], [0.0]) == -1.0

    def test_hard_across_jump(self):
        op = parse_operator_id("hard:λ=2")
        assert directional_monotonicity_defect(op, [2.1], [1.9]) == 0.0

    @pytest.mark.parametrize("cid", ["soft:n=3", "group_lasso"])
    def test_convex_prox_never_violates(self, cid, rng):
        op = parse_operator_id(cid)
        a = rng.uniform(-5, 5, (10_000, op.n))
        b = rng.uniform(-5, 5, (10_000, op.n))
        assert all(directional_monotonicity_defect(op, p, q) == 0.0 for p, q in zip(a, b))
