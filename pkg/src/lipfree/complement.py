"""Complemented subspaces of free p-spaces built from explicit operators.

Three constructions are provided: gluing spaces at the base point (and the
more general partition bound), splitting off a Lipschitz retract, and the
l_p-projection given by a family of disjointly supported bump functions.
Every construction returns matrices whose composition identities and norm
bounds can be checked with the exact norm oracle.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import StructuralError
from .freecore.molecule import EllP, LpSum, lipschitz_constant, point_map_lipschitz
from .freecore.operator import FreeOperator, compose, exact_is_identity, operator_norm
from .qmetric import PMetricSpace, maltese_sum, quotient, stats, validate


def _frac_matrix(M) -> tuple:
    return tuple(tuple(Fraction(float(v)) for v in row) for row in np.asarray(M))


# -- gluing at the base point ----------------------------------------------------------

@dataclass
class PartitionBound:
    T: FreeOperator  # l_p-sum of the pieces -> F_p(space)
    T_inv: FreeOperator
    K: float
    norm_T: float | None = None
    norm_T_inv: float | None = None


def partition_constant(space: PMetricSpace, blocks: Sequence[Sequence[int]]) -> float:
    """Smallest K with K^p d^p(x,y) >= d^p(x,0) + d^p(y,0) for x, y in different blocks."""
    p = space.p
    r = space.dist[0] ** p
    K = 1.0
    for a in range(len(blocks)):
        for b in range(a + 1, len(blocks)):
            for x in blocks[a]:
                for y in blocks[b]:
                    K = max(K, ((r[x] + r[y]) / space.dist[x, y] ** p) ** (1.0 / p))
    return K


def partition_operator(space: PMetricSpace, blocks: Sequence[Sequence[int]], measure: bool = True) -> PartitionBound:
    """Sum map from the l_p-sum of F_p(block + base) onto F_p(space).

    ``blocks`` must partition the non-base points.  The map has norm at most 1
    and its inverse norm at most the partition constant K.
    """
    flat = sorted(int(x) for b in blocks for x in b)
    if flat != list(range(1, space.n)):
        raise StructuralError("blocks must partition the non-base points exactly once")
    parts = tuple(space.subspace([0] + sorted(int(x) for x in b)) for b in blocks)
    dom = LpSum(parts)
    order = [x for b in blocks for x in sorted(int(v) for v in b)]
    M = np.zeros((space.n - 1, dom.dim))
    for j, x in enumerate(order):
        M[x - 1, j] = 1.0
    T = FreeOperator(dom, space, M, _frac_matrix(M))
    T_inv = FreeOperator(space, dom, M.T, _frac_matrix(M.T))
    out = PartitionBound(T, T_inv, partition_constant(space, blocks))
    if measure:
        out.norm_T = operator_norm(T).value
        out.norm_T_inv = operator_norm(T_inv).value
    return out


@dataclass
class MalteseIsometry:
    space: PMetricSpace
    maps: list
    T: FreeOperator
    T_inv: FreeOperator
    K: float
    norm_T: float | None = None
    norm_T_inv: float | None = None


def maltese_isometry(parts: Sequence[PMetricSpace], measure: bool = True) -> MalteseIsometry:
    """Canonical map from the l_p-sum of F_p(parts) onto F_p of their maltese sum."""
    W, maps = maltese_sum(parts)
    blocks = [[int(v) for v in idx[1:]] for idx in maps]
    bound = partition_operator(W, blocks, measure=False)
    # the glued copies carry the original part distances, so use them for the domain
    dom = LpSum(tuple(parts))
    T = FreeOperator(dom, W, bound.T.matrix, bound.T.exact)
    T_inv = FreeOperator(W, dom, bound.T_inv.matrix, bound.T_inv.exact)
    out = MalteseIsometry(W, maps, T, T_inv, bound.K)
    if measure:
        out.norm_T = operator_norm(T).value
        out.norm_T_inv = operator_norm(T_inv).value
    return out


# -- retractions -------------------------------------------------------------------------

@dataclass
class RetractionSplit:
    space: PMetricSpace
    retraction: np.ndarray
    image: list  # points of N, base first
    glued: PMetricSpace  # N glued with M/N at the base point
    quotient_map: np.ndarray
    T: FreeOperator  # F_p(M) -> F_p(glued)
    S: FreeOperator  # F_p(glued) -> F_p(M)
    lip: float

    @property
    def bound(self) -> float:
        p = self.space.p
        return (self.lip**p + 1.0) ** (1.0 / p)


def retraction_complement(space: PMetricSpace, r) -> RetractionSplit:
    """Split F_p(M) as F_p(N) (+) F_p(M/N) for a Lipschitz retraction r onto N."""
    r = np.asarray(r, dtype=int)
    n = space.n
    if r.shape != (n,):
        raise StructuralError(f"retraction needs {n} entries")
    if r[0] != 0:
        raise StructuralError("retraction must fix the base point")
    if np.any(r < 0) or np.any(r >= n):
        raise StructuralError("retraction leaves the space")
    if not np.array_equal(r[r], r):
        bad = [int(x) for x in range(n) if r[r[x]] != r[x]]
        raise StructuralError(f"map is not idempotent at points {bad}")
    image = sorted(set(int(v) for v in r))
    Nspace = space.subspace(image)
    Qspace, Q = quotient(space, image)
    W, maps = maltese_sum([Nspace, Qspace])
    pos_N = {x: i for i, x in enumerate(image)}

    T = np.zeros((W.n - 1, n - 1))
    for x in range(1, n):
        a = maps[0][pos_N[int(r[x])]]
        if a:
            T[a - 1, x - 1] += 1.0
        b = maps[1][Q[x]]
        if b:
            T[b - 1, x - 1] += 1.0
    S = np.zeros((n - 1, W.n - 1))
    for i, x in enumerate(image[1:], start=1):
        S[x - 1, maps[0][i] - 1] = 1.0
    for x in range(1, n):
        if Q[x] == 0:
            continue
        col = maps[1][Q[x]] - 1
        S[x - 1, col] += 1.0
        if r[x] != 0:
            S[r[x] - 1, col] -= 1.0
    To = FreeOperator(space, W, T, _frac_matrix(T))
    So = FreeOperator(W, space, S, _frac_matrix(S))
    lip = point_map_lipschitz(space, space, r)
    return RetractionSplit(space, r, image, W, Q, To, So, lip)


def nearest_point_retraction(space: PMetricSpace, N: Sequence[int]) -> np.ndarray:
    """Send each point to its nearest point of N (lowest index on ties)."""
    Nl = sorted(set(int(x) for x in N) | {0})
    r = np.empty(space.n, dtype=int)
    for x in range(space.n):
        r[x] = Nl[int(np.argmin(space.dist[x, Nl]))]
    return r


def check_retraction_split(split: RetractionSplit, tol: float = 1e-10) -> dict:
    """Composition identities and measured norms against the (L^p + 1)^{1/p} bound."""
    ST = compose(split.S, split.T)
    TS = compose(split.T, split.S)
    return {
        "ST_exact": exact_is_identity(ST),
        "TS_exact": exact_is_identity(TS),
        "ST_err": float(np.abs(ST.matrix - np.eye(ST.matrix.shape[0])).max(initial=0.0)),
        "TS_err": float(np.abs(TS.matrix - np.eye(TS.matrix.shape[0])).max(initial=0.0)),
        "norm_T": operator_norm(split.T).value,
        "norm_S": operator_norm(split.S).value,
        "bound": split.bound,
        "lip": split.lip,
    }


# -- bump families and the l_p projection -----------------------------------------------

@dataclass
class BumpFamily:
    space: PMetricSpace
    x: list
    y: list
    f: list  # one value vector per index
    C: float
    t: float
    style: str = "custom"

    @property
    def size(self) -> int:
        return len(self.x)

    def problems(self, tol: float = 1e-12) -> list[str]:
        out = []
        sp = self.space
        F = [np.asarray(v, dtype=float) for v in self.f]
        if not (len(self.x) == len(self.y) == len(F)):
            return ["x, y and f must have the same length"]
        supp = [set(np.flatnonzero(np.abs(v) > 0)) for v in F]
        for g, v in enumerate(F):
            if v.shape != (sp.n,):
                out.append(f"f[{g}] has the wrong length")
                return out
            if v[0] != 0.0:
                out.append(f"f[{g}] does not vanish at the base point")
            if self.x[g] == self.y[g]:
                out.append(f"x[{g}] == y[{g}]")
            if v[self.x[g]] == 0.0:
                out.append(f"f[{g}](x[{g}]) = 0")
        for a in range(len(F)):
            for b in range(a + 1, len(F)):
                both = supp[a] & supp[b]
                if both:
                    out.append(f"supports of f[{a}] and f[{b}] overlap at {sorted(int(i) for i in both)}")
        for a in range(len(F)):
            for b in range(len(F)):
                if a != b and F[a][self.x[b]] != 0.0:
                    out.append(f"f[{a}](x[{b}]) != 0")
                if F[a][self.y[b]] != 0.0:
                    out.append(f"f[{a}](y[{b}]) != 0")
        for g, v in enumerate(F):
            L = lipschitz_constant(sp, v)
            if L > self.C * (1 + tol) + tol:
                out.append(f"Lip(f[{g}]) = {L:.6g} exceeds C = {self.C:.6g}")
            ratio = v[self.x[g]] / sp.dist[self.x[g], self.y[g]]
            if ratio < (1.0 / self.t) * (1 - tol):
                out.append(f"f[{g}](x)/d(x,y) = {ratio:.6g} is below 1/t = {1 / self.t:.6g}")
        return out

    def check(self) -> "BumpFamily":
        bad = self.problems()
        if bad:
            raise StructuralError("bump family invalid: " + "; ".join(bad))
        return self


@dataclass
class BumpProjection:
    S: FreeOperator  # l_p(Gamma) -> F_p(M)
    P: FreeOperator  # F_p(M) -> l_p(Gamma)
    bound: float  # 2^{1/p} C t


def bump_operators(data: BumpFamily) -> BumpProjection:
    """Embedding of l_p(Gamma) spanned by the molecules b = (delta(x) - delta(y))/d(x,y) and its projection."""
    data.check()
    sp = data.space
    k = data.size
    lp = EllP(k, sp.p)
    S = [[Fraction(0)] * k for _ in range(sp.n - 1)]
    P = [[Fraction(0)] * (sp.n - 1) for _ in range(k)]
    for g in range(k):
        x, y = data.x[g], data.y[g]
        d = Fraction(float(sp.dist[x, y]))
        if x:
            S[x - 1][g] += 1 / d
        if y:
            S[y - 1][g] -= 1 / d
        fv = [Fraction(float(v)) for v in data.f[g]]
        c = d / fv[x]
        for z in range(1, sp.n):
            P[g][z - 1] = c * (fv[z] - fv[0])
    Sx = tuple(tuple(r) for r in S)
    Px = tuple(tuple(r) for r in P)
    So = FreeOperator(lp, sp, np.array(Sx, dtype=float).reshape(sp.n - 1, k), Sx)
    Po = FreeOperator(sp, lp, np.array(Px, dtype=float).reshape(k, sp.n - 1), Px)
    return BumpProjection(So, Po, float(2.0 ** (1.0 / sp.p) * data.C * data.t))


def check_bump_operators(ops: BumpProjection) -> dict:
    PS = compose(ops.P, ops.S)
    return {
        "PS_exact": exact_is_identity(PS),
        "norm_S": operator_norm(ops.S).value,
        "norm_P": operator_norm(ops.P).value,
        "bound": ops.bound,
    }


BUMP_STYLES = ("isolated", "metric_ball", "radius_metric", "radius_psep")


def bump_family(
    space: PMetricSpace,
    centers: Sequence[int],
    style: str,
    radii: Sequence[float] | None = None,
    t: float | None = None,
) -> BumpFamily:
    """Disjointly supported bumps around ``centers`` in one of four shapes.

    isolated: f = d(x_i, M - {x_i}) on {x_i}; y_i is the nearest non-center
        point, which must lie within t times the isolation radius.
    metric_ball: f = max{d(x_i, y_i) - d(x, x_i), 0}; y_i is the farthest
        non-center point within ``radii[i]`` (default: the nearest non-center).
    radius_metric: f = max{r_i - d(x, x_i), 0}, y_i = 0.
    radius_psep: f = max{r_i - d^p(x, x_i), 0}, y_i = 0, C = sep^(p-1).
    """
    centers = [int(c) for c in centers]
    if style not in BUMP_STYLES:
        raise StructuralError(f"unknown bump style {style!r}; expected one of {BUMP_STYLES}")
    if not centers:
        raise StructuralError("need at least one center")
    if 0 in centers:
        raise StructuralError("the base point cannot be a bump center")
    if len(set(centers)) != len(centers):
        raise StructuralError("duplicate centers")
    d = space.dist
    n = space.n
    cset = set(centers)
    others = [z for z in range(n) if z not in cset]
    xs, ys, fs = list(centers), [], []

    if style == "isolated":
        iso = dict(stats(space).isolated)
        ratios = []
        for c in centers:
            y = min(others, key=lambda z: (d[c, z], z))
            f = np.zeros(n)
            f[c] = iso[c]
            ys.append(y)
            fs.append(f)
            ratios.append(d[c, y] / iso[c])
        t_used = max(ratios) if t is None else float(t)
        if t is not None and max(ratios) > t * (1 + 1e-12):
            raise StructuralError(f"no non-center point within t = {t} isolation radii (need t >= {max(ratios):.6g})")
        data = BumpFamily(space, xs, ys, fs, 1.0, float(t_used), style)
    elif style == "metric_ball":
        if not validate(space.with_p(1.0)).ok:
            raise StructuralError("metric_ball bumps need distances obeying the ordinary triangle inequality")
        for i, c in enumerate(centers):
            if radii is None:
                y = min(others, key=lambda z: (d[c, z], z))
            else:
                within = [z for z in others if d[c, z] <= radii[i] * (1 + 1e-12)]
                if not within:
                    raise StructuralError(f"no non-center point within radius {radii[i]} of center {c}")
                y = min(within, key=lambda z: (-d[c, z], z))
            ys.append(y)
            fs.append(np.maximum(d[c, y] - d[:, c], 0.0))
        data = BumpFamily(space, xs, ys, fs, 1.0, 1.0, style)
    else:
        if radii is None:
            radii = auto_radii(space, centers, style)
        radii = [float(v) for v in radii]
        if style == "radius_metric":
            if not validate(space.with_p(1.0)).ok:
                raise StructuralError("radius_metric bumps need an ordinary metric")
            fs = [np.maximum(r - d[:, c], 0.0) for c, r in zip(centers, radii)]
            C = 1.0
        else:
            p = space.p
            sep = stats(space).separation
            fs = [np.maximum(r - d[:, c] ** p, 0.0) for c, r in zip(centers, radii)]
            C = sep ** (p - 1.0)
        ys = [0] * len(centers)
        ratio = min(f[c] / d[c, 0] for f, c in zip(fs, centers))
        t_used = 1.0 / ratio if t is None else float(t)
        data = BumpFamily(space, xs, ys, fs, float(C), float(t_used), style)
    bad = data.problems()
    if bad:
        raise StructuralError(f"{style} bumps are not admissible: " + "; ".join(bad))
    return data


def auto_radii(space: PMetricSpace, centers: Sequence[int], style: str) -> list[float]:
    """Half the distance (or p-th power of distance) to the nearest other center or the base point."""
    d = space.dist if style == "radius_metric" else space.dist**space.p
    out = []
    for c in centers:
        near = [d[c, z] for z in list(centers) + [0] if z != c]
        out.append(0.5 * min(near))
    return out


# -- selecting well-spread sequences --------------------------------------------------------

@dataclass
class SeparatedChain:
    space: PMetricSpace
    points: list  # x_0, x_1, ...
    radii: list  # r_0 = 0, r_1, ...
    t: float
    mode: str = "unbounded"
    violations: list = field(default_factory=list)

    @property
    def s(self) -> float:
        return ratio_gap(self.t)


def ratio_gap(t: float) -> float:
    """s in (0, 1) with sqrt(t) = (1 + s)/(1 - s)."""
    q = np.sqrt(t)
    return (q - 1.0) / (q + 1.0)


def chain_inequalities(space: PMetricSpace, points, radii, t: float, tol: float = 1e-12) -> list[str]:
    p = space.p
    out = []
    for a in range(len(points)):
        for b in range(a + 1, len(points)):
            dp = space.dist[points[a], points[b]] ** p
            if dp < (radii[a] + radii[b]) * (1 - tol) - tol:
                out.append(f"d^p(x{a},x{b}) = {dp:.6g} < r{a} + r{b} = {radii[a] + radii[b]:.6g}")
            if abs(radii[a] - radii[b]) / dp < (1.0 / t) * (1 - tol):
                out.append(f"|r{a} - r{b}|/d^p(x{a},x{b}) = {abs(radii[a] - radii[b]) / dp:.6g} < 1/t")
    return out


def select_chain(
    space: PMetricSpace,
    t: float,
    mode: str = "unbounded",
    length: int | None = None,
    origin: int = 0,
) -> SeparatedChain:
    """Greedy chain x_0 = origin, x_1, ... whose distances to x_0 change by a factor below s^{1/p}.

    mode "unbounded" walks outwards (ratios d(x_n)/d(x_{n+1})), "limit_point"
    walks inwards towards x_0.  Radii are r_n = t^{-1/2} d^p(x_n, x_0).
    ``length`` counts the points after x_0; None keeps the whole greedy chain.
    """
    if t <= 1:
        raise StructuralError("t must exceed 1")
    if mode not in ("unbounded", "limit_point"):
        raise StructuralError(f"unknown mode {mode!r}")
    p = space.p
    s = ratio_gap(t)
    lim = s ** (1.0 / p)
    dist0 = space.dist[origin]
    cand = sorted((z for z in range(space.n) if z != origin), key=lambda z: (dist0[z], z))
    if mode == "limit_point":
        cand = sorted(cand, key=lambda z: (-dist0[z], z))
    chain = []
    for z in cand:
        if not chain:
            chain.append(z)
            continue
        prev = chain[-1]
        ratio = dist0[prev] / dist0[z] if mode == "unbounded" else dist0[z] / dist0[prev]
        if ratio < lim:
            chain.append(z)
        if length is not None and len(chain) == length:
            break
    if length is not None and len(chain) < length:
        raise StructuralError(
            f"only {len(chain)} points form a chain whose consecutive distance ratios to x_0 stay below "
            f"s^(1/p) = {lim:.6g} (t = {t}); {length} were requested"
        )
    if not chain:
        raise StructuralError("space has no point besides the origin")
    points = [origin] + chain
    radii = [0.0] + [float(t**-0.5 * dist0[z] ** p) for z in chain]
    bad = chain_inequalities(space, points, radii, t)
    if bad:
        raise StructuralError("selected chain fails the separation inequalities: " + "; ".join(bad))
    return SeparatedChain(space, points, radii, float(t), mode)
