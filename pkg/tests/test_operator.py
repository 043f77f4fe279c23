import numpy as np
import pytest

from lipfree.bases import clamp_projection, haar_bound, interval_projection
from lipfree.errors import StructuralError
from lipfree.freecore.molecule import EllP, LpSum, atoms, coord_dim, point_map_lipschitz
from lipfree.freecore.operator import (
    FreeOperator,
    NormCache,
    compose,
    coordinate_norms,
    exact_is_identity,
    identity,
    operator_from_lipschitz,
    operator_norm,
)
from lipfree.qmetric import dyadic, integer_segment, random_space


def test_identity_map():
    sp = integer_segment(4, 0.5)
    op, lip = operator_from_lipschitz(sp, sp, range(5))
    np.testing.assert_array_equal(op.matrix, np.eye(4))
    assert lip == 1.0
    assert operator_norm(identity(sp)).value == pytest.approx(1.0, rel=1e-12)


def test_clamp_retraction_is_one_lipschitz():
    sp = integer_segment(8, 0.5)
    for k in range(8):
        for m in range(k + 1, 9):
            r = [max(k, min(x, m)) for x in range(9)]
            assert point_map_lipschitz(sp, sp, r) == 1.0


def test_constant_map_is_zero():
    sp = integer_segment(3)
    op, lip = operator_from_lipschitz(sp, sp, [0, 0, 0, 0])
    assert not op.matrix.any()
    assert lip == 0.0


def test_point_map_errors():
    sp = integer_segment(3)
    with pytest.raises(StructuralError):
        operator_from_lipschitz(sp, sp, [1, 1, 2, 3])
    with pytest.raises(StructuralError):
        operator_from_lipschitz(sp, sp, [0, 1, 2])
    with pytest.raises(StructuralError):
        operator_from_lipschitz(sp, sp, [0, 1, 2, 7])


def test_compose_with_identity():
    sp = integer_segment(5, 0.5)
    A = clamp_projection(sp, 1, 4)
    assert np.array_equal(compose(A, identity(sp)).matrix, A.matrix)
    assert compose(A, identity(sp)).exact == A.exact


@pytest.mark.parametrize("k, m", [(k, m) for k in range(1, 8) for m in range(1, 8)])
def test_partial_sums_compose_exactly(k, m):
    sp = integer_segment(7, 0.5)
    C = compose(clamp_projection(sp, 0, k), clamp_projection(sp, 0, m))
    assert C.exact == clamp_projection(sp, 0, min(k, m)).exact


def test_compose_shape_mismatch():
    a, b = integer_segment(3), integer_segment(4)
    with pytest.raises(StructuralError):
        compose(identity(a), identity(b))


def test_exact_identity_check():
    sp = integer_segment(3)
    assert exact_is_identity(identity(sp))
    assert not exact_is_identity(clamp_projection(sp, 0, 2))


@pytest.mark.parametrize("p", [0.5, 2 / 3, 1.0])
def test_partial_sum_projection_norm(p):
    sp = integer_segment(6, p)
    for m in range(1, 7):
        assert operator_norm(clamp_projection(sp, 0, m)).value <= 1 + 1e-9


@pytest.mark.parametrize("p", [0.5, 1.0])
def test_interval_projection_on_dyadic(p):
    K1 = dyadic(2, p)
    K2 = dyadic(1, p)
    assert operator_norm(interval_projection(K1, K2)).value <= haar_bound(p) + 1e-9


def test_operator_norm_witness_and_cache():
    sp = integer_segment(5, 0.5)
    P = clamp_projection(sp, 0, 3)
    cache = NormCache()
    first = operator_norm(P, cache=cache)
    again = operator_norm(P, cache=cache)
    assert cache.hits >= len(atoms(sp))
    assert first.value == again.value
    img = P(first.witness_atom)
    lo, up = coordinate_norms(sp, img)
    assert up[0] == pytest.approx(first.value)


def test_operator_norm_workers_agree():
    sp = random_space(np.random.default_rng(5), 7, 0.5)
    M = np.random.default_rng(6).normal(size=(6, 6))
    T = FreeOperator(sp, sp, M)
    assert operator_norm(T, workers=1).value == operator_norm(T, workers=3).value


def test_coordinate_spaces():
    lp = EllP(3, 0.5)
    lo, up = coordinate_norms(lp, [[1.0, 1.0, 0.0]])
    assert up[0] == pytest.approx(4.0)
    a, b = integer_segment(2, 0.5), integer_segment(1, 0.5)
    s = LpSum((a, b))
    assert coord_dim(s) == 3
    _, up = coordinate_norms(s, [[0.0, 1.0, 1.0]])
    # ||delta(2)|| = 2 on Z[0,2], ||delta(1)|| = 1: (2^(1/2) + 1)^2
    assert up[0] == pytest.approx((2**0.5 + 1) ** 2)
