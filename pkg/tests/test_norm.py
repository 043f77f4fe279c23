import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lipfree.errors import ResourceError, StructuralError
from lipfree.freecore.molecule import Molecule, elementary_molecules, lipschitz_constant
from lipfree.freecore.norm import (
    batch_norms,
    brute_force,
    dual_lower_bound,
    norm,
    reconstruct,
    transport_lp,
    tree_search,
)
from lipfree.qmetric import PMetricSpace, integer_segment, random_space

P_VALUES = st.sampled_from([0.25, 1 / 3, 0.5, 2 / 3, 1.0])
SEEDS = st.integers(0, 100_000)


def random_molecule(seed, n, p, kind="euclid"):
    rng = np.random.default_rng(seed)
    sp = random_space(rng, n, p, kind)
    return Molecule.from_delta(sp, rng.normal(size=n - 1))


# hand-checked values on Z[0,3]: optimal trees are short enough to list
@pytest.mark.parametrize(
    "p, delta, want",
    [
        (0.5, [1, -2, 1], 4.0),  # two unit edges: (1 + 1)^2
        (1 / 3, [1, -2, 1], 8.0),  # (1 + 1)^3
        (0.5, [1, 1, 1], 16.0),  # edges 0-1, 0-2 (two units), 2-3: (1 + 2 + 1)^2
        (1.0, [1, 1, 1], 6.0),  # 1 + 2 + 3
    ],
)
def test_integer_segment_goldens(p, delta, want):
    mol = Molecule.from_delta(integer_segment(3, p), delta)
    for method in ["enumerate", "brute"]:
        assert norm(mol, method).value == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("p", [0.25, 0.5, 1.0])
@pytest.mark.parametrize("m", [1, 4, 8])
def test_point_mass_norm_is_distance(p, m):
    sp = integer_segment(m, p)
    delta = np.zeros(m)
    delta[-1] = 1.0
    assert norm(Molecule.from_delta(sp, delta)).value == pytest.approx(m, rel=1e-12)


def test_elementary_molecules_have_norm_one():
    sp = random_space(np.random.default_rng(0), 6, 0.5)
    for mol in elementary_molecules(sp):
        assert norm(mol).value == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(seed=SEEDS, n=st.integers(2, 6), p=P_VALUES, kind=st.sampled_from(["euclid", "graph"]))
def test_tree_search_matches_brute_force(seed, n, p, kind):
    mol = random_molecule(seed, n, p, kind)
    a, _ = tree_search(mol.space, mol.coeffs)
    b, _ = brute_force(mol.space, mol.coeffs)
    assert a == pytest.approx(b, rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=SEEDS, n=st.integers(2, 8), kind=st.sampled_from(["euclid", "graph"]))
def test_p1_routes_agree(seed, n, kind):
    mol = random_molecule(seed, n, 1.0, kind)
    lp, _ = transport_lp(mol.space, mol.coeffs)
    dual, f = dual_lower_bound(mol)
    tree, _ = tree_search(mol.space, mol.coeffs)
    assert lp == pytest.approx(dual, rel=1e-8)
    assert lp == pytest.approx(tree, rel=1e-8)
    assert lipschitz_constant(mol.space, f.values) <= 1 + 1e-8


@settings(max_examples=60, deadline=None)
@given(seed=SEEDS, n=st.integers(2, 8), p=P_VALUES, method=st.sampled_from(["auto", "enumerate", "bounds_only"]))
def test_certificate_sandwich(seed, n, p, method):
    mol = random_molecule(seed, n, p)
    cert = norm(mol, method)
    scale = max(1.0, cert.value)
    assert cert.lower <= cert.value + 1e-9 * scale
    assert cert.value <= cert.upper + 1e-9 * scale
    np.testing.assert_allclose(reconstruct(mol.space, cert.primal), mol.coeffs, atol=1e-9 * scale)
    assert cert.dual.lip <= 1 + 1e-8
    assert cert.dual.pair(mol) == pytest.approx(cert.lower, rel=1e-8, abs=1e-12)
    if method != "bounds_only":
        exact = norm(mol, "enumerate").value
        assert cert.value == pytest.approx(exact, rel=1e-9)
        assert cert.exact


@settings(max_examples=40, deadline=None)
@given(seed=SEEDS, n=st.integers(2, 7), p=P_VALUES, c=st.floats(-5, 5).filter(lambda x: abs(x) > 1e-3))
def test_homogeneity(seed, n, p, c):
    mol = random_molecule(seed, n, p)
    assert norm(mol * c).value == pytest.approx(abs(c) * norm(mol).value, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=SEEDS, n=st.integers(2, 7), p=P_VALUES)
def test_p_subadditivity(seed, n, p):
    rng = np.random.default_rng(seed)
    sp = random_space(rng, n, p)
    a = Molecule.from_delta(sp, rng.normal(size=n - 1))
    b = Molecule.from_delta(sp, rng.normal(size=n - 1))
    lhs = norm(a + b).value ** p
    rhs = norm(a).value ** p + norm(b).value ** p
    assert lhs <= rhs * (1 + 1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=SEEDS, n=st.integers(2, 7), c=st.floats(0.01, 100.0), p=P_VALUES)
def test_dilation(seed, n, c, p):
    mol = random_molecule(seed, n, p)
    big = Molecule(mol.space.scaled(c), mol.coeffs)
    assert norm(big).value == pytest.approx(c * norm(mol).value, rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=SEEDS, n=st.integers(2, 7))
def test_norm_grows_as_p_decreases(seed, n):
    # a metric is a p-metric for every p <= 1
    rng = np.random.default_rng(seed)
    base = random_space(rng, n, 1.0)
    delta = rng.normal(size=n - 1)
    vals = [norm(Molecule.from_delta(base.with_p(p), delta)).value for p in [1.0, 0.75, 0.5, 0.25]]
    assert all(a <= b * (1 + 1e-9) for a, b in zip(vals, vals[1:]))


def test_batch_matches_single():
    rng = np.random.default_rng(7)
    sp = random_space(rng, 6, 0.5)
    rows = rng.normal(size=(10, 5))
    lo, up = batch_norms(sp, rows)
    single = [norm(Molecule.from_delta(sp, r)).value for r in rows]
    np.testing.assert_allclose(lo, single, rtol=1e-12)
    np.testing.assert_allclose(up, single, rtol=1e-12)
    lo_b, up_b = batch_norms(sp, rows, "bounds_only")
    assert np.all(lo_b <= lo * (1 + 1e-9)) and np.all(up_b >= up * (1 - 1e-9))


def test_zero_and_single_point():
    sp = integer_segment(3, 0.5)
    assert norm(Molecule.from_delta(sp, [0, 0, 0])).value == 0.0
    one = PMetricSpace(np.zeros((1, 1)), 0.5)
    assert norm(Molecule(one, [0.0])).value == 0.0


def test_method_errors():
    big = integer_segment(11, 0.5)
    mol = Molecule.from_delta(big, np.ones(11))
    with pytest.raises(ResourceError, match="bounds_only"):
        norm(mol, "enumerate")
    assert norm(mol).method == "bounds_only"
    with pytest.raises(StructuralError):
        norm(Molecule.from_delta(integer_segment(3, 0.5), [1, 0, 0]), "lp")
    with pytest.raises(ResourceError):
        brute_force(integer_segment(8, 0.5), np.r_[-1.0, np.zeros(7), 1.0])
    with pytest.raises(StructuralError):
        Molecule(integer_segment(2), [1.0, 0.0, 0.0])


def test_certificate_json():
    mol = Molecule.from_delta(integer_segment(3, 0.5), [1, 1, 1])
    out = norm(mol).to_json()
    assert out["value"] == pytest.approx(16.0)
    assert out["method"] == "enumerate"
    assert {t["x"] for t in out["primal"]} <= {"0", "1", "2", "3"}
    assert len(out["dual"]) == 4
