import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipfree.complement import (
    BumpFamily,
    auto_radii,
    bump_family,
    check_bump_operators,
    check_retraction_split,
    bump_operators,
    maltese_isometry,
    nearest_point_retraction,
    partition_operator,
    ratio_gap,
    retraction_complement,
    select_chain,
)
from lipfree.errors import StructuralError
from lipfree.freecore.operator import compose, coordinate_norms
from lipfree.qmetric import PMetricSpace, integer_segment, line_space, random_space, snowflake


def two_points(d=1.0, p=1.0):
    return PMetricSpace(np.array([[0.0, d], [d, 0.0]]), p)


def test_maltese_single_part_is_identity():
    part = integer_segment(3, 0.5)
    iso = maltese_isometry([part])
    np.testing.assert_array_equal(iso.T.matrix, np.eye(3))
    assert iso.norm_T == pytest.approx(1.0)
    assert iso.norm_T_inv == pytest.approx(1.0)


@pytest.mark.parametrize("p", [0.5, 1.0])
def test_maltese_two_parts_is_isometry(p):
    iso = maltese_isometry([two_points(p=p), two_points(p=p)])
    assert iso.space.dist[1, 2] == pytest.approx(2.0 ** (1 / p))
    assert iso.norm_T == pytest.approx(1.0, rel=1e-9)
    assert iso.norm_T_inv == pytest.approx(1.0, rel=1e-9)


def test_maltese_mixed_exponents():
    with pytest.raises(StructuralError):
        maltese_isometry([two_points(p=0.5), two_points(p=1.0)])


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), p=st.sampled_from([0.5, 1.0]))
def test_partition_inverse_bounded_by_constant(seed, p):
    sp = random_space(np.random.default_rng(seed), 6, p)
    pb = partition_operator(sp, [[1, 2], [3], [4, 5]])
    assert pb.norm_T <= 1 + 1e-9
    assert pb.norm_T_inv <= pb.K * (1 + 1e-9)


def test_partition_must_cover_points():
    sp = integer_segment(3)
    with pytest.raises(StructuralError):
        partition_operator(sp, [[1], [2]])


def test_identity_retraction():
    sp = integer_segment(3, 0.5)
    split = retraction_complement(sp, [0, 1, 2, 3])
    assert split.glued.n == sp.n
    np.testing.assert_array_equal(split.T.matrix, np.eye(3))
    np.testing.assert_array_equal(split.S.matrix, np.eye(3))


def test_clamp_retraction_splits_exactly():
    split = retraction_complement(integer_segment(3), [0, 1, 1, 1])
    rep = check_retraction_split(split)
    assert rep["ST_exact"] and rep["TS_exact"]
    assert rep["norm_T"] <= rep["bound"] * (1 + 1e-9)


@pytest.mark.parametrize("p", [0.5, 2 / 3, 1.0])
def test_nearest_point_retraction_within_bound(p):
    sp = random_space(np.random.default_rng(11), 6, p)
    r = nearest_point_retraction(sp, [0, 2, 4])
    rep = check_retraction_split(retraction_complement(sp, r))
    assert rep["ST_exact"]
    assert rep["norm_T"] <= rep["bound"] * (1 + 1e-9)


def test_retraction_errors():
    sp = integer_segment(3)
    with pytest.raises(StructuralError, match="idempotent"):
        retraction_complement(sp, [0, 2, 1, 3])
    with pytest.raises(StructuralError, match="base point"):
        retraction_complement(sp, [1, 1, 2, 3])


def test_single_bump_projection():
    sp = two_points(2.0, 0.5)
    data = BumpFamily(sp, [1], [0], [np.array([0.0, 2.0])], 1.0, 1.0)
    ops = bump_operators(data)
    rep = check_bump_operators(ops)
    assert rep["PS_exact"]
    assert compose(ops.P, ops.S).exact == ((1,),)


def test_bump_family_names_violated_clause():
    sp = integer_segment(3)
    f = [np.array([0, 1.0, 1.0, 0]), np.array([0, 0, 1.0, 1.0])]
    data = BumpFamily(sp, [1, 3], [0, 0], f, 1.0, 1.0)
    problems = data.problems()
    assert any("overlap" in s for s in problems)
    with pytest.raises(StructuralError, match="overlap"):
        bump_operators(data)
    steep = BumpFamily(sp, [1], [0], [np.array([0, 3.0, 0, 0])], 1.0, 1.0)
    assert any("Lip" in s for s in steep.problems())


@pytest.mark.parametrize("p", [0.5, 1.0])
def test_isolated_point_bumps(p):
    sp = snowflake(line_space([0, 1, 3, 4, 7]), 1.0 / p, p=p) if p < 1 else line_space([0, 1, 3, 4, 7])
    data = bump_family(sp, [1, 2, 4], "isolated")
    rep = check_bump_operators(bump_operators(data))
    assert rep["PS_exact"]
    assert rep["norm_P"] <= rep["bound"] * (1 + 1e-9)


def test_single_isolated_bump_support():
    sp = line_space([0, 1, 3])
    data = bump_family(sp, [2], "isolated")
    assert set(np.flatnonzero(data.f[0])) == {2}


@pytest.mark.parametrize("p", [0.5, 1.0])
def test_metric_ball_bumps_on_segment(p):
    sp = integer_segment(9, p)
    data = bump_family(sp, [2, 5, 8], "metric_ball", radii=[1, 1, 1])
    assert data.t == 1.0
    supports = [set(np.flatnonzero(f)) for f in data.f]
    assert all(not (a & b) for i, a in enumerate(supports) for b in supports[i + 1 :])
    rep = check_bump_operators(bump_operators(data))
    assert rep["norm_P"] <= 2 ** (1 / p) + 1e-9


def test_psep_bumps_from_selected_chain():
    sp = snowflake(line_space([2**n for n in range(6)] + [0]), 2.0, p=0.5)
    seq = select_chain(sp, 9.0)
    data = bump_family(sp, seq.points[1:], "radius_psep", radii=seq.radii[1:])
    assert data.problems() == []
    rep = check_bump_operators(bump_operators(data))
    assert rep["norm_P"] <= rep["bound"] * (1 + 1e-9)


def test_auto_radii_half_gap():
    sp = integer_segment(6)
    assert auto_radii(sp, [2, 5], "radius_metric") == [1.0, 1.5]


def test_chain_geometric_points():
    sp = line_space([0, 1, 4, 16, 64])
    seq = select_chain(sp, 9.0)
    assert ratio_gap(9.0) == pytest.approx(0.5)
    assert seq.points == [0, 1, 2, 3, 4]
    np.testing.assert_allclose(seq.radii, [0, 1 / 3, 4 / 3, 16 / 3, 64 / 3])


def test_chain_huge_t_accepts_monotone_chain():
    sp = line_space([0, 1, 1.1, 1.2, 1.3])
    seq = select_chain(sp, 1e8)
    assert len(seq.points) == 5


def test_chain_failing_ratio():
    sp = line_space([0] + [0.9**-n for n in range(6)])
    with pytest.raises(StructuralError, match="s\\^\\(1/p\\)"):
        select_chain(sp, 9.0, length=3)


def test_chain_limit_point_mode():
    sp = line_space([0] + [4.0**-n for n in range(5)])
    seq = select_chain(sp, 9.0, mode="limit_point")
    d0 = sp.dist[0, seq.points[1:]]
    assert np.all(np.diff(d0) < 0)


@pytest.mark.parametrize("p", [0.5, 1.0])
def test_maltese_isometry_on_random_vectors(p):
    rng = np.random.default_rng(8)
    parts = [random_space(rng, k, p) for k in (3, 2, 3)]
    iso = maltese_isometry(parts, measure=False)
    Z = rng.normal(size=(100, iso.T.matrix.shape[1]))
    _, dom = coordinate_norms(iso.T.domain, Z)
    _, img = coordinate_norms(iso.space, Z @ iso.T.matrix.T)
    np.testing.assert_allclose(img, dom, rtol=1e-9)
