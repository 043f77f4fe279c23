from fractions import Fraction

import numpy as np
import pytest

from lipfree.bases import (
    basis_constant,
    clamp_projection,
    conditionality_witness,
    dilation_errors,
    grid_inclusion,
    haar_bound,
    haar_system,
    interval_identity_errors,
    interval_projection,
    natural_basis,
    positive_part_bound,
    segment_sum_norms,
    subbasis_norms,
    subgrid_pairs,
)
from lipfree.errors import ResourceError, StructuralError
from lipfree.freecore.operator import exact_is_identity, operator_norm
from lipfree.qmetric import custom_grid, dyadic, integer_segment

# ||sum_n (-1)^n x_n|| on Z[0,m] at p = 1/2 for m = 1..8; m <= 6 agree with
# brute-force enumeration, m = 7, 8 come from the tree search
ALTERNATING_HALF = [1.0, 4.0, 9.0, 16.0, 25.0, 36.0, 47.449944320643645, 62.22672831701139]


def test_natural_basis_single_vector():
    b = natural_basis(1, 0.5)
    assert b.vectors.tolist() == [[1.0]]
    assert exact_is_identity(b.partial[1])


@pytest.mark.parametrize("p", [0.5, 1.0])
def test_natural_basis_invariants(p):
    errs = natural_basis(6, p).invariant_errors()
    assert max(errs.values()) == 0.0


def test_segment_sums_equal_length():
    for (k, m), v in segment_sum_norms(8, 0.5).items():
        assert v == pytest.approx(m - k, rel=1e-12)


@pytest.mark.parametrize("p", [0.5, 2 / 3])
def test_clamp_projections_have_norm_one(p):
    sp = integer_segment(8, p)
    for k in range(8):
        for m in range(k + 1, 9):
            assert operator_norm(clamp_projection(sp, k, m)).value == pytest.approx(1.0, rel=1e-9)


def test_clamp_projection_range():
    with pytest.raises(StructuralError):
        clamp_projection(integer_segment(3), 2, 2)


def test_even_subbasis_is_lp():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(20, 4))
    got, want = subbasis_norms(8, 0.5, A)
    np.testing.assert_allclose(got, want, rtol=1e-9)


def test_doubling_against_aggregate():
    sums = segment_sum_norms(8, 0.5)
    assert sums[(0, 8)] == pytest.approx(2 * sums[(0, 4)])
    _, l4 = subbasis_norms(4, 0.5, np.ones((1, 2)))
    _, l8 = subbasis_norms(8, 0.5, np.ones((1, 4)))
    assert l8[0] == pytest.approx(4.0 * l4[0])


def test_positive_part_bound():
    A = np.random.default_rng(3).normal(size=(30, 6))
    got, pos = positive_part_bound(6, 0.5, A)
    assert np.all(got >= pos * (1 - 1e-9))


def test_interval_projection_identity_and_moreover():
    K = dyadic(1, 0.5)
    assert exact_is_identity(interval_projection(K, K))
    P = interval_projection(K, custom_grid([0, 1], 0.5))
    # delta(1/2) -> 1/2 delta(0) + 1/2 delta(1), i.e. 1/2 delta(1) in delta-coordinates
    assert P.exact[0][0] == Fraction(1, 2)
    assert P.exact[0][1] == 1


def test_interval_projection_containment():
    with pytest.raises(StructuralError):
        interval_projection(dyadic(1), custom_grid([0, Fraction(1, 3), 1]))
    with pytest.raises(StructuralError):
        grid_inclusion(custom_grid([0, Fraction(1, 3), 1]), dyadic(2))


@pytest.mark.parametrize("p", [0.5, 2 / 3, 1.0])
def test_dyadic3_to_dyadic1(p):
    assert operator_norm(interval_projection(dyadic(3, p), dyadic(1, p))).value <= haar_bound(p) + 1e-9


def test_subgrid_pair_count():
    pairs = subgrid_pairs(3)
    assert len(pairs) == 3**7
    assert all(set(K2) <= set(K1) for K1, K2 in pairs)


def test_interval_identities_level2():
    errs = interval_identity_errors(2)
    assert max(errs.values()) <= 1e-12


def test_haar_level0_and_level1():
    h = haar_system(0, 0.5)
    assert len(h) == 1
    assert h.vectors.tolist() == [[1.0]]
    h = haar_system(1, 0.5)
    # P_1 (onto span{h_0}) kills h_[0,1] = delta(0) + delta(1) - 2 delta(1/2)
    img = h.partial[1](h.vectors[1])
    assert np.abs(img).max() == 0.0


@pytest.mark.parametrize("N", [1, 2, 3])
def test_haar_invariants(N):
    errs = haar_system(N, 0.5).invariant_errors()
    assert max(errs.values()) <= 1e-12


def test_haar_cap():
    with pytest.raises(ResourceError):
        haar_system(5, 0.5)


def test_haar_partial_sums_level3_half():
    bc = basis_constant(haar_system(3, 0.5))
    assert bc.value <= haar_bound(0.5) + 1e-9
    # worst case: projection onto the grid {0, 1/4, 1/2, 1}, attained at
    # (delta(5/8) - delta(1/8))/d; brute force on the 4-point grid gives
    # (sqrt(1/8) + sqrt(1/2) + sqrt(3/8))^2
    assert bc.argmax == 3
    assert bc.value == pytest.approx((0.125**0.5 + 0.5**0.5 + 0.375**0.5) ** 2, rel=1e-12)


def test_haar_monotone_at_p1():
    assert basis_constant(haar_system(2, 1.0)).value <= 1 + 1e-9


def test_haar_two_thirds_range():
    v = basis_constant(haar_system(3, 2 / 3)).value
    assert 1 - 1e-9 <= v <= 3**0.5 + 1e-9


def test_natural_basis_bimonotone():
    bc = basis_constant(natural_basis(6, 0.5), bimonotone=True)
    assert bc.value == pytest.approx(1.0, abs=1e-9)
    assert bc.bimonotone == pytest.approx(1.0, abs=1e-9)


def test_conditionality_goldens_half():
    rows = conditionality_witness(8, 0.5)
    np.testing.assert_allclose([r.alternating_norm for r in rows], ALTERNATING_HALF, rtol=1e-9)
    np.testing.assert_allclose([r.sum_norm for r in rows], range(1, 9), rtol=1e-12)
    ratios = [r.ratio for r in rows]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))


def test_conditionality_bounded_at_p1():
    rows = conditionality_witness(8, 1.0)
    assert max(r.ratio for r in rows) <= 1 + 1e-9
    assert all(r.alternating_norm <= r.ellp_aggregate * (1 + 1e-9) for r in rows)


def test_conditionality_cap():
    with pytest.raises(ResourceError):
        conditionality_witness(9, 0.5)


@pytest.mark.parametrize("p", [0.5, 1.0])
def test_dilation_bridge(p):
    A = np.random.default_rng(4).normal(size=(10, 4))
    assert dilation_errors(2, p, A).max() <= 1e-9
