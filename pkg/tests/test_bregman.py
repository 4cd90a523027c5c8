import numpy as np
import pytest

import proxatlas.bregman as bregman_mod
from proxatlas import Box, NoInverseError, ShapeError, UnsupportedError, check_jacobian_prox, make_operator
from proxatlas.bregman import (GeneralizedFidelity, bregman_divergence, check_bregman_left_prox,
                               check_bregman_right_prox, check_linear_inverse_prox, generator)
from proxatlas.catalog import CATALOG_IDS, parse_operator_id, rotation_operator
from proxatlas.proxcheck import INCONCLUSIVE, NOT_PROX, PROX_COMPATIBLE
from proxatlas.reconstruct import convexity_audit

SQ = generator("sq_norm")
ENTROPY = generator("neg_entropy")
BURG = generator("burg")
ROT = rotation_operator()
IDENTITY2 = parse_operator_id("identity:n=2")


class TestDivergence:
    def test_sq_norm_example(self):
        assert bregman_divergence(SQ, [1.0, 2.0], [0.0, 0.0]) == 2.5

    def test_neg_entropy_example(self):
        assert bregman_divergence(ENTROPY, [1.0], [np.e]) == pytest.approx(np.e - 2, abs=1e-15)

    @pytest.mark.parametrize("gen", [SQ, ENTROPY, BURG], ids=lambda g: g.id)
    def test_self_divergence_zero(self, gen, rng):
        x = rng.uniform(0.1, 4, size=3)
        assert bregman_divergence(gen, x, x) == 0.0

    def test_sq_norm_is_half_squared_distance(self, rng):
        x, y = rng.normal(size=(2, 10_000, 3)) * 3
        d = np.array([bregman_divergence(SQ, a, b) for a, b in zip(x, y)])
        assert np.max(np.abs(d - 0.5 * np.sum((x - y) ** 2, axis=1))) < 1e-12

    @pytest.mark.parametrize("gen", [ENTROPY, BURG], ids=lambda g: g.id)
    def test_nonnegative_on_positive_orthant(self, gen, rng):
        x, y = rng.uniform(1e-3, 5, size=(2, 10_000, 2))
        d = np.array([bregman_divergence(gen, a, b) for a, b in zip(x, y)])
        assert d.min() >= -1e-12

    def test_outside_domain_is_infinite(self):
        assert bregman_divergence(ENTROPY, [1.0], [-1.0]) == np.inf
        assert bregman_divergence(BURG, [0.0], [1.0]) == np.inf

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            bregman_divergence(SQ, [1.0, 2.0], [1.0])

    def test_unknown_generator(self):
        with pytest.raises(UnsupportedError):
            generator("tsallis")

    @pytest.mark.parametrize("gen", [SQ, ENTROPY, BURG], ids=lambda g: g.id)
    def test_generator_convex_and_gradient_consistent(self, gen, rng):
        box = gen.domain_box(2, lo=0.1)
        assert convexity_audit(gen.h, box, pairs=500) <= 1e-9
        h = 1e-6
        for x in rng.uniform(0.2, 4, size=(20, 2)):
            fd = [(gen.h(x + h * e) - gen.h(x - h * e)) / (2 * h) for e in np.eye(2)]
            assert fd == pytest.approx(gen.grad(x), abs=1e-6)


class TestFidelity:
    def test_forms(self):
        left = GeneralizedFidelity("bregman_left", generator=ENTROPY)
        right = GeneralizedFidelity("bregman_right", generator=ENTROPY)
        assert left([np.e], [1.0]) == pytest.approx(np.e - 2)
        assert right([1.0], [np.e]) == pytest.approx(np.e - 2)
        lin = GeneralizedFidelity("linear_inverse", M=2 * np.eye(2))
        assert lin([1.0, 1.0], [3.0, 2.0]) == pytest.approx(0.5)

    @pytest.mark.parametrize("kwargs", [
        {"form": "linear_inverse"},
        {"form": "bregman_left"},
        {"form": "bregman_left", "generator": SQ, "M": np.eye(1)},
        {"form": "mirror", "generator": SQ},
    ])
    def test_exactly_one_form(self, kwargs):
        with pytest.raises(ValueError):
            GeneralizedFidelity(**kwargs)

    def test_check_dispatch(self):
        fid = GeneralizedFidelity("linear_inverse", M=np.eye(2))
        assert fid.check(IDENTITY2, samples=10, box=Box.cube(-2, 2, 2)).verdict == PROX_COMPATIBLE


class TestLeftProx:
    def test_identity_with_entropy(self):
        rep = check_bregman_left_prox(IDENTITY2, ENTROPY, samples=50, box=Box.cube(0.1, 5, 2))
        assert rep.verdict == PROX_COMPATIBLE and rep.field == "grad_h(f(y))"

    def test_rotation_not_prox(self):
        rep = check_bregman_left_prox(ROT, SQ, samples=20, box=Box.cube(-2, 2, 2))
        assert rep.verdict == NOT_PROX and rep.witness is not None

    def test_all_samples_outside_generator_domain(self):
        neg = make_operator(lambda y: -np.abs(y) - 1.0, 2, jacobian=lambda y: -np.diag(np.sign(y)))
        rep = check_bregman_left_prox(neg, ENTROPY, samples=10, box=Box.cube(0.5, 2, 2))
        assert rep.verdict == INCONCLUSIVE

    @pytest.mark.parametrize("gen", [SQ, ENTROPY, BURG], ids=lambda g: g.id)
    def test_identity_strictly_convex_generators(self, gen):
        rep = check_bregman_left_prox(IDENTITY2, gen, samples=30, box=gen.domain_box(2, lo=0.1))
        assert rep.verdict == PROX_COMPATIBLE


class TestRightProx:
    def test_scaled_soft_on_positive_branch(self):
        op = parse_operator_id("scaled_soft:C=2")
        rep = check_bregman_right_prox(op, SQ, samples=30, box=Box.cube(1.5, 5, 1))
        assert rep.verdict == PROX_COMPATIBLE

    def test_identity(self):
        assert check_bregman_right_prox(IDENTITY2, SQ, samples=20, box=Box.cube(-2, 2, 2)).verdict == PROX_COMPATIBLE

    def test_rotation_not_prox(self):
        rep = check_bregman_right_prox(ROT, SQ, samples=20, box=Box.cube(-2, 2, 2))
        assert rep.verdict == NOT_PROX

    def test_numerical_inversion_path(self):
        # no analytic Jacobian: the right check inverts f by Newton
        op = make_operator(lambda y: y + 0.1 * np.sin(y), 2)
        rep = check_bregman_right_prox(op, SQ, samples=20, box=Box.cube(-3, 3, 2))
        assert rep.verdict == PROX_COMPATIBLE

    def test_numerical_inversion_detects_rotation(self):
        op = make_operator(lambda y: np.array([2 * y[0] - y[1], y[0] + 2 * y[1]]), 2)
        rep = check_bregman_right_prox(op, SQ, samples=20, box=Box.cube(-3, 3, 2))
        assert rep.verdict == NOT_PROX

    def test_inversion_failures_make_inconclusive(self, monkeypatch):
        def fail(*args, **kwargs):
            raise NoInverseError("no preimage")

        monkeypatch.setattr(bregman_mod, "invert", fail)
        op = make_operator(lambda y: y + 0.1 * np.sin(y), 2)
        rep = check_bregman_right_prox(op, SQ, samples=10, box=Box.cube(-3, 3, 2))
        assert rep.verdict == INCONCLUSIVE
        assert any("inversions failed" in note for note in rep.notes)


class TestLinearInverse:
    def test_identity_matrix_reduces_to_plain_check(self):
        op = parse_operator_id("group_lasso:groups=1,1,2,2:λ=1")
        a = check_linear_inverse_prox(op, np.eye(4), samples=30, box=Box.cube(-3, 3, 4), seed=2)
        b = check_jacobian_prox(op, samples=30, box=Box.cube(-3, 3, 4), seed=2)
        assert a.verdict == b.verdict == PROX_COMPATIBLE

    def test_scaled_identity_with_soft(self):
        op = parse_operator_id("soft:λ=1:n=2")
        rep = check_linear_inverse_prox(op, 2 * np.eye(2), samples=30, box=Box.cube(-3, 3, 2))
        assert rep.verdict == PROX_COMPATIBLE

    def test_rotation_matrix_not_prox(self):
        rep = check_linear_inverse_prox(IDENTITY2, [[0, 1], [-1, 0]], samples=10, box=Box.cube(-3, 3, 2))
        assert rep.verdict == NOT_PROX

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            check_linear_inverse_prox(IDENTITY2, np.eye(3), samples=5)

    def test_rectangular_operator(self):
        # f: R^3 -> R^2 with M of shape (3, 2); M f(y) = P y for a PSD projector P
        M = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
        op = make_operator(lambda y: y[:2].copy(), 3, n_out=2)
        rep = check_linear_inverse_prox(op, M, samples=10, box=Box.cube(-1, 1, 3))
        assert rep.verdict == PROX_COMPATIBLE


@pytest.mark.parametrize("op_id", CATALOG_IDS)
def test_sq_norm_coherence_with_plain_check(op_id):
    op = parse_operator_id(op_id)
    box = Box.cube(-3, 3, op.n).intersect(op.domain)
    plain = check_jacobian_prox(op, samples=40, box=box, seed=5)
    left = check_bregman_left_prox(op, SQ, samples=40, box=box, seed=5)
    right = check_bregman_right_prox(op, SQ, samples=40, box=box, seed=5)
    assert plain.verdict == left.verdict == right.verdict
