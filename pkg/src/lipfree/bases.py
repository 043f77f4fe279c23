"""Schauder bases of free p-spaces over integer segments and dyadic grids.

Projections are assembled from explicit point formulas (clamping retractions
and piecewise-linear interpolation between grid points), with an exact
rational copy of every matrix so that composition identities can be checked
without rounding.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ResourceError, StructuralError
from .freecore.molecule import atoms, lp_quasinorm
from .freecore.norm import ENUMERATE_CAP, batch_norms
from .freecore.operator import FreeOperator, compose, operator_norm
from .qmetric import PMetricSpace, custom_grid, dyadic, integer_segment

HAAR_CAP = 4


def _exact(M) -> tuple:
    return tuple(tuple(Fraction(v) for v in row) for row in M)


def _float(M) -> np.ndarray:
    return np.array([[float(v) for v in row] for row in M], dtype=float).reshape(len(M), len(M[0]) if M else 0)


@dataclass
class BasisSystem:
    ambient: PMetricSpace
    vectors: np.ndarray  # one basis vector per row, delta-coordinates
    partial: list  # partial[j]: projection onto the span of the first j vectors
    kind: str
    labels: list = field(default_factory=list)

    def __len__(self):
        return len(self.vectors)

    def invariant_errors(self) -> dict:
        """Largest deviations in P_i P_j = P_min(i,j), P_j x_i = x_i (i < j) and P_j x_j = 0."""
        comp = 0.0
        for i, A in enumerate(self.partial):
            for j, B in enumerate(self.partial):
                C = self.partial[min(i, j)]
                comp = max(comp, float(np.abs(A.matrix @ B.matrix - C.matrix).max(initial=0.0)))
        fix = 0.0
        kill = 0.0
        for j, P in enumerate(self.partial):
            img = self.vectors @ P.matrix.T
            if j:
                fix = max(fix, float(np.abs(img[:j] - self.vectors[:j]).max()))
            if j < len(self.vectors):
                kill = max(kill, float(np.abs(img[j]).max()))
        return {"composition": comp, "fixes_earlier": fix, "kills_next": kill}


# -- the natural basis of F_p over an integer segment ----------------------------------------

def clamp_projection(space: PMetricSpace, k: int, m: int) -> FreeOperator:
    """delta(n) -> delta(clamp(n, k, m)) - delta(k) on Z[0, M]."""
    if not 0 <= k < m < space.n:
        raise StructuralError(f"need 0 <= k < m <= {space.n - 1}")
    n = space.n
    M = [[0] * (n - 1) for _ in range(n - 1)]
    for x in range(1, n):
        r = max(k, min(x, m))
        if r:
            M[r - 1][x - 1] += 1
        if k:
            M[k - 1][x - 1] -= 1
    ex = _exact(M)
    return FreeOperator(space, space, np.array(M, dtype=float), ex)


def zero_operator(space: PMetricSpace) -> FreeOperator:
    k = space.n - 1
    return FreeOperator(space, space, np.zeros((k, k)), tuple(tuple(Fraction(0) for _ in range(k)) for _ in range(k)))


def natural_basis(m: int, p: float) -> BasisSystem:
    """x_n = delta(n) - delta(n - 1) on Z[0, m] with partial sums P_j = clamp to [0, j]."""
    if m < 1:
        raise StructuralError("need m >= 1")
    space = integer_segment(m, p)
    V = np.eye(m) - np.eye(m, k=-1)
    partial = [zero_operator(space)] + [clamp_projection(space, 0, j) for j in range(1, m + 1)]
    return BasisSystem(space, V, partial, "natural_N", [f"x{n}" for n in range(1, m + 1)])


def segment_sum_norms(m: int, p: float, method: str = "auto") -> dict:
    """||x_{k+1} + ... + x_m|| for all 0 <= k < m' <= m."""
    space = integer_segment(m, p)
    pairs = [(k, j) for j in range(1, m + 1) for k in range(j)]
    rows = np.zeros((len(pairs), m))
    for i, (k, j) in enumerate(pairs):
        rows[i, j - 1] += 1.0
        if k:
            rows[i, k - 1] -= 1.0
    _, up = batch_norms(space, rows, method)
    return {pr: float(v) for pr, v in zip(pairs, up)}


def subbasis_norms(m: int, p: float, coeffs, parity: str = "even", method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Norms of sum a_k x_{2k} (or x_{2k-1}) next to the l_p norms of a."""
    space = integer_segment(m, p)
    idx = list(range(2, m + 1, 2)) if parity == "even" else list(range(1, m + 1, 2))
    A = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if A.shape[1] != len(idx):
        raise StructuralError(f"{parity} subbasis of Z[0,{m}] has {len(idx)} vectors")
    V = (np.eye(m) - np.eye(m, k=-1))[[i - 1 for i in idx]]
    _, up = batch_norms(space, A @ V, method)
    return up, lp_quasinorm(A, p, axis=1)


def positive_part_bound(m: int, p: float, coeffs, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """||sum_{n>=1} a_n delta(n)|| next to (sum_{a_n >= 0} a_n^p)^{1/p} on Z[0, m]."""
    space = integer_segment(m, p)
    A = np.atleast_2d(np.asarray(coeffs, dtype=float))
    _, up = batch_norms(space, A, method)
    pos = np.sum(np.where(A > 0, A, 0.0) ** p, axis=1) ** (1.0 / p)
    return up, pos


# -- interpolation projections between grids in [0, 1] ------------------------------------------

def _grid_coords(space: PMetricSpace) -> list:
    if space.coords is None:
        raise StructuralError("grid spaces must carry coordinates")
    return list(space.coords)


def grid_inclusion(small: PMetricSpace, big: PMetricSpace) -> FreeOperator:
    """Canonical map F_p(K2) -> F_p(K1) for K2 inside K1."""
    cb = _grid_coords(big)
    pos = {c: i for i, c in enumerate(cb)}
    cs = _grid_coords(small)
    if any(c not in pos for c in cs):
        raise StructuralError("grid is not contained in the larger grid")
    M = [[0] * (small.n - 1) for _ in range(big.n - 1)]
    for j, c in enumerate(cs):
        if j and pos[c]:
            M[pos[c] - 1][j - 1] = 1
    return FreeOperator(small, big, np.array(M, dtype=float).reshape(big.n - 1, small.n - 1), _exact(M))


def interval_projection(K1: PMetricSpace, K2: PMetricSpace) -> FreeOperator:
    """Linear extension of x -> delta(x) on K2 and linear interpolation between neighbours in K2 otherwise."""
    c1, c2 = _grid_coords(K1), _grid_coords(K2)
    if K1.p != K2.p:
        raise StructuralError("grids must share the exponent")
    if not {Fraction(0), Fraction(1)} <= set(c2):
        raise StructuralError("the smaller grid must contain 0 and 1")
    if not set(c2) <= set(c1):
        raise StructuralError("the smaller grid is not contained in the larger grid")
    if min(c1) < 0 or max(c1) > 1:
        raise StructuralError("grids must lie in [0, 1]")
    pos2 = {c: i for i, c in enumerate(c2)}
    srt = sorted(c2)
    M = [[Fraction(0)] * (K1.n - 1) for _ in range(K2.n - 1)]
    for j, x in enumerate(c1):
        if j == 0:
            continue
        if x in pos2:
            if pos2[x]:
                M[pos2[x] - 1][j - 1] += 1
            continue
        i = next(i for i, c in enumerate(srt) if c > x)
        a, b = srt[i - 1], srt[i]
        for c, w in ((a, (b - x) / (b - a)), (b, (x - a) / (b - a))):
            if pos2[c]:
                M[pos2[c] - 1][j - 1] += w
    ex = tuple(tuple(r) for r in M)
    return FreeOperator(K1, K2, _float(ex).reshape(K2.n - 1, K1.n - 1), ex)


def subgrid_pairs(level: int) -> list[tuple[tuple, tuple]]:
    """All (K1, K2) with {0, 1} in K2, K2 inside K1, K1 inside the dyadic grid; as sorted index tuples."""
    inner = list(range(1, 2**level))
    out = []
    for states in itertools.product((0, 1, 2), repeat=len(inner)):
        K1 = tuple([0] + [x for x, s in zip(inner, states) if s >= 1] + [2**level])
        K2 = tuple([0] + [x for x, s in zip(inner, states) if s == 2] + [2**level])
        out.append((K1, K2))
    return out


class GridFamily:
    """Sub-grids of a dyadic grid, built once and reused (so norm caches key on the same objects)."""

    def __init__(self, level: int, p: float):
        self.level = level
        self.p = p
        self._spaces: dict = {}

    def space(self, idx: tuple) -> PMetricSpace:
        if idx not in self._spaces:
            self._spaces[idx] = custom_grid([Fraction(i, 2**self.level) for i in idx], self.p)
        return self._spaces[idx]


def interval_projection_norms(level: int, p: float, method: str = "auto") -> dict:
    """Operator norms of every interpolation projection between sub-grids of dyadic(level).

    Images are grouped by target grid so each distinct molecule is normed once.
    """
    fam = GridFamily(level, p)
    pairs = subgrid_pairs(level)
    by_target: dict = {}
    for K1, K2 in pairs:
        by_target.setdefault(K2, []).append(K1)
    out = {}
    for K2, sources in by_target.items():
        S2 = fam.space(K2)
        images, owners = [], []
        for K1 in sources:
            P = interval_projection(fam.space(K1), S2)
            img = atoms(P.domain) @ P.matrix.T
            images.append(img)
            owners.append((K1, len(img)))
        allimg = np.vstack(images)
        uniq, inv = np.unique(np.round(allimg, 12), axis=0, return_inverse=True)
        _, up = batch_norms(S2, uniq, method)
        vals = up[inv.ravel()]
        start = 0
        for K1, cnt in owners:
            out[(K1, K2)] = float(vals[start : start + cnt].max())
            start += cnt
    return out


def interval_identity_errors(level: int, p: float = 1.0) -> dict:
    """Largest float deviations in P(K2,K3) P(K1,K2) = P(K1,K3), P(K1,K2) L(K1,K2) = Id and
    P(K1,K3) L(K1,K2) = P(K2,K3), P(K1,K2) L(K1,K3) = L(K2,K3), over all chains K3 in K2 in K1."""
    fam = GridFamily(level, p)
    inner = list(range(1, 2**level))
    P, L = {}, {}

    def proj(a, b):
        if (a, b) not in P:
            P[(a, b)] = interval_projection(fam.space(a), fam.space(b)).matrix
        return P[(a, b)]

    def incl(a, b):
        if (a, b) not in L:
            L[(a, b)] = grid_inclusion(fam.space(b), fam.space(a)).matrix
        return L[(a, b)]

    err = {"composition": 0.0, "left_inverse": 0.0, "restriction": 0.0, "inclusion": 0.0}
    top = 2**level
    for states in itertools.product(range(4), repeat=len(inner)):
        K1 = tuple([0] + [x for x, s in zip(inner, states) if s >= 1] + [top])
        K2 = tuple([0] + [x for x, s in zip(inner, states) if s >= 2] + [top])
        K3 = tuple([0] + [x for x, s in zip(inner, states) if s == 3] + [top])
        P12, P23, P13 = proj(K1, K2), proj(K2, K3), proj(K1, K3)
        L12, L13, L23 = incl(K1, K2), incl(K1, K3), incl(K2, K3)
        err["composition"] = max(err["composition"], float(np.abs(P23 @ P12 - P13).max(initial=0.0)))
        err["left_inverse"] = max(err["left_inverse"], float(np.abs(P12 @ L12 - np.eye(len(K2) - 1)).max(initial=0.0)))
        err["restriction"] = max(err["restriction"], float(np.abs(P13 @ L12 - P23).max(initial=0.0)))
        err["inclusion"] = max(err["inclusion"], float(np.abs(P12 @ L13 - L23).max(initial=0.0)))
    return err


# -- the Haar system on a dyadic grid -------------------------------------------------------------

@dataclass(frozen=True)
class HaarIndex:
    """h_0 first, then dyadic intervals by decreasing length, left to right within a level."""

    intervals: tuple  # (a, b) as Fractions; None stands for h_0

    @classmethod
    def build(cls, N: int) -> "HaarIndex":
        out = [None]
        for lev in range(N):
            w = Fraction(1, 2**lev)
            out += [(i * w, (i + 1) * w) for i in range(2**lev)]
        return cls(tuple(out))

    def midpoint(self, j: int):
        J = self.intervals[j]
        return None if J is None else (J[0] + J[1]) / 2


def haar_system(N: int, p: float, cap: int = HAAR_CAP) -> BasisSystem:
    """Haar molecules through dyadic level N - 1 on dyadic(N), with partial-sum projections."""
    if N > cap:
        raise ResourceError(f"Haar systems are capped at level {cap} ({2**cap + 1} points), got {N}")
    if N < 0:
        raise StructuralError("level must be >= 0")
    amb = dyadic(N, p)
    pos = {c: i for i, c in enumerate(amb.coords)}
    index = HaarIndex.build(N)
    k = amb.n - 1
    V = np.zeros((len(index.intervals), k))
    labels = []
    for j, J in enumerate(index.intervals):
        if J is None:
            pts = [(Fraction(1), 1.0), (Fraction(0), -1.0)]
            labels.append("h0")
        else:
            a, b = J
            pts = [(a, 1.0), (b, 1.0), ((a + b) / 2, -2.0)]
            labels.append(f"h[{a},{b}]")
        for c, w in pts:
            if pos[c]:
                V[j, pos[c] - 1] += w
    fam_pts = [Fraction(0), Fraction(1)]
    partial = [zero_operator(amb)]
    for j in range(len(index.intervals)):
        c = index.midpoint(j)
        if c is not None:
            fam_pts.append(c)
        Kj = custom_grid(fam_pts, p)
        Pj = compose(grid_inclusion(Kj, amb), interval_projection(amb, Kj))
        partial.append(Pj)
    return BasisSystem(amb, V, partial, "haar_dyadic", labels)


# -- constants ------------------------------------------------------------------------------

@dataclass
class BasisConstant:
    value: float  # max_j ||P_j||
    argmax: int
    norms: list
    bimonotone: float | None = None  # max_{k < m} ||P_m - P_k||
    bimonotone_pair: tuple | None = None


def basis_constant(system: BasisSystem, bimonotone: bool = False, method: str = "auto", cap: int = ENUMERATE_CAP) -> BasisConstant:
    norms = [0.0] + [operator_norm(P, method, cap).value for P in system.partial[1:]]
    j = int(np.argmax(norms))
    out = BasisConstant(norms[j], j, norms)
    if bimonotone:
        best, arg = -1.0, None
        for m in range(1, len(system.partial)):
            for k in range(m):
                v = operator_norm(system.partial[m] - system.partial[k], method, cap).value
                if v > best:
                    best, arg = v, (k, m)
        out.bimonotone, out.bimonotone_pair = best, arg
    return out


@dataclass
class ConditionalityRow:
    m: int
    sum_norm: float  # ||x_1 + ... + x_m||
    ellp_aggregate: float  # (sum ||x_n||^p)^{1/p} = m^{1/p}
    alternating_norm: float  # ||sum (-1)^n x_n||
    ratio: float  # alternating_norm / sum_norm


def conditionality_witness(m: int, p: float, method: str = "auto") -> list[ConditionalityRow]:
    """Growth of alternating-sign sums against plain sums of the natural basis, for m' = 1..m."""
    if m > 8:
        raise ResourceError("exact conditionality tables are capped at m = 8")
    rows = []
    for j in range(1, m + 1):
        space = integer_segment(j, p)
        V = np.eye(j) - np.eye(j, k=-1)
        signs = np.array([(-1.0) ** n for n in range(1, j + 1)])
        _, up = batch_norms(space, np.vstack([np.ones(j) @ V, signs @ V]), method)
        rows.append(ConditionalityRow(j, float(up[0]), j ** (1.0 / p), float(up[1]), float(up[1] / up[0])))
    return rows


def dilation_errors(N: int, p: float, coeffs, method: str = "auto") -> np.ndarray:
    """Relative gaps between norms on dyadic(N) and 2^{-N} times the norms on Z[0, 2^N]."""
    A = np.atleast_2d(np.asarray(coeffs, dtype=float))
    a, _ = batch_norms(dyadic(N, p), A, method)
    b, _ = batch_norms(integer_segment(2**N, p), A, method)
    scaled = b * 2.0**-N
    return np.abs(a - scaled) / np.maximum(np.abs(scaled), 1e-300)


def haar_bound(p: float) -> float:
    return 3.0 ** (1.0 / p - 1.0)
