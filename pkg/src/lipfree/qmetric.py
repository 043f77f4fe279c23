"""Finite pointed p-metric spaces and the constructions built on them.

A space is stored as a dense distance matrix together with the exponent ``p``
for which ``dist ** p`` obeys the triangle inequality.  Index 0 is always the
base point.  Every construction in this module re-validates its output rather
than trusting the theory that says it should be valid.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .errors import ResourceError, StructuralError

TRIANGLE_TOL = 1e-12
FULL_SUM_CAP = 10_000


@dataclass(frozen=True, eq=False)
class PMetricSpace:
    """A finite pointed p-metric space; index 0 is the base point."""

    dist: np.ndarray
    p: float
    labels: tuple = ()
    # positions on the real line, kept as Fractions for grid spaces
    coords: tuple | None = None

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
            raise StructuralError(f"distance matrix must be square and non-empty, got shape {d.shape}")
        if not (0.0 < self.p <= 1.0):
            raise StructuralError(f"exponent p must lie in (0, 1], got {self.p}")
        d.flags.writeable = False
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "p", float(self.p))
        labels = tuple(str(x) for x in self.labels) if self.labels else tuple(str(i) for i in range(d.shape[0]))
        if len(labels) != d.shape[0]:
            raise StructuralError(f"{len(labels)} labels for {d.shape[0]} points")
        object.__setattr__(self, "labels", labels)
        if self.coords is not None:
            if len(self.coords) != d.shape[0]:
                raise StructuralError("coords length does not match point count")
            object.__setattr__(self, "coords", tuple(self.coords))

    @property
    def n(self) -> int:
        return self.dist.shape[0]

    def same_as(self, other: "PMetricSpace") -> bool:
        return (
            isinstance(other, PMetricSpace)
            and self.n == other.n
            and self.p == other.p
            and np.array_equal(self.dist, other.dist)
        )

    def subspace(self, indices: Sequence[int]) -> "PMetricSpace":
        """Restrict to ``indices``; the first index becomes the base point."""
        idx = list(indices)
        coords = None if self.coords is None else tuple(self.coords[i] for i in idx)
        return PMetricSpace(self.dist[np.ix_(idx, idx)], self.p, tuple(self.labels[i] for i in idx), coords)

    def scaled(self, c: float) -> "PMetricSpace":
        coords = None
        if self.coords is not None:
            coords = tuple(x * Fraction(c) for x in self.coords)
        return PMetricSpace(self.dist * c, self.p, self.labels, coords)

    def with_p(self, p: float) -> "PMetricSpace":
        return PMetricSpace(self.dist, p, self.labels, self.coords)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: list = field(default_factory=list)  # (i, j, k): d(i,j)^p > d(i,k)^p + d(k,j)^p
    problems: list = field(default_factory=list)

    def __bool__(self):
        return self.ok


@dataclass(frozen=True)
class SpaceStats:
    separation: float
    diameter: float
    isolated: list  # (index, isolation radius d(i, M \ {i}))


def validate(space: PMetricSpace, tol: float = TRIANGLE_TOL, exact: bool = False) -> ValidationReport:
    """Check the p-metric axioms; every violating triple is listed with i < j.

    ``exact=True`` runs the check in rational arithmetic on the stored binary
    values; only meaningful for p = 1, where no irrational powers appear.
    """
    d = space.dist
    n = space.n
    problems = []
    if exact:
        if space.p != 1.0:
            raise StructuralError("exact validation needs p = 1")
        return _validate_exact(space)
    if np.any(np.abs(np.diag(d)) > tol):
        problems.append("nonzero diagonal")
    if np.any(np.abs(d - d.T) > tol):
        problems.append("asymmetric distances")
    off = ~np.eye(n, dtype=bool)
    if np.any(d[off] <= 0) or np.any(~np.isfinite(d)):
        problems.append("non-positive or non-finite distance between distinct points")
    dp = np.abs(d) ** space.p
    # excess[i, j, k] = d(i,j)^p - d(i,k)^p - d(k,j)^p
    excess = dp[:, :, None] - dp[:, None, :] - dp.T[None, :, :]
    bad = np.argwhere(excess > tol)
    violations = [(int(i), int(j), int(k)) for i, j, k in bad if i < j]
    return ValidationReport(not problems and not violations, violations, problems)


def _validate_exact(space: PMetricSpace) -> ValidationReport:
    n = space.n
    q = [[Fraction(float(x)) for x in row] for row in space.dist]
    problems, violations = [], []
    for i in range(n):
        if q[i][i] != 0:
            problems.append("nonzero diagonal")
            break
    for i, j in itertools.combinations(range(n), 2):
        if q[i][j] != q[j][i]:
            problems.append("asymmetric distances")
        if q[i][j] <= 0:
            problems.append("non-positive distance between distinct points")
        for k in range(n):
            if q[i][j] > q[i][k] + q[k][j]:
                violations.append((i, j, k))
    return ValidationReport(not problems and not violations, violations, sorted(set(problems)))


def checked(space: PMetricSpace, what: str = "space") -> PMetricSpace:
    report = validate(space)
    if not report.ok:
        head = report.violations[:5]
        raise StructuralError(f"{what} fails p-metric validation: {report.problems} violations {head}")
    return space


def stats(space: PMetricSpace) -> SpaceStats:
    d = space.dist
    if space.n == 1:
        return SpaceStats(float("inf"), 0.0, [(0, float("inf"))])
    off = d + np.diag(np.full(space.n, np.inf))
    radii = off.min(axis=1)
    return SpaceStats(float(radii.min()), float(d.max()), [(i, float(r)) for i, r in enumerate(radii)])


def snowflake(space: PMetricSpace, r: float, p: float | None = None) -> PMetricSpace:
    """Raise every distance to the power ``r``.

    If ``dist`` is a q-metric then ``dist ** r`` is a (q / r)-metric, which is
    the default exponent (capped at 1).
    """
    if r <= 0:
        raise StructuralError("snowflake exponent must be positive")
    new_p = min(1.0, space.p / r) if p is None else p
    out = PMetricSpace(space.dist ** r, new_p, space.labels)
    return checked(out, "snowflaked space")


def maltese_sum(parts: Sequence[PMetricSpace], mode: str = "maltese", cap: int = FULL_SUM_CAP):
    """Glue pointed spaces at their base points.

    Returns ``(space, index_maps)`` where ``index_maps[a][x]`` is the index of
    the copy of point ``x`` of part ``a``.  ``mode="full_p_sum"`` builds the
    whole finite l_p-product instead of the star-shaped union.
    """
    if not parts:
        raise StructuralError("need at least one part")
    p = parts[0].p
    if any(part.p != p for part in parts):
        raise StructuralError(f"mixed exponents {[part.p for part in parts]}")
    if mode == "maltese":
        return _maltese(parts, p)
    if mode == "full_p_sum":
        return _full_p_sum(parts, p, cap)
    raise StructuralError(f"unknown mode {mode!r}")


def _maltese(parts, p):
    labels = ["0"]
    radius = [0.0]
    maps = []
    for a, part in enumerate(parts):
        idx = [0]
        for x in range(1, part.n):
            idx.append(len(labels))
            labels.append(f"{a}:{part.labels[x]}")
            radius.append(part.dist[x, 0])
        maps.append(np.array(idx))
    rad = np.array(radius)
    d = (rad[:, None] ** p + rad[None, :] ** p) ** (1.0 / p)
    for a, part in enumerate(parts):
        idx = maps[a]
        d[np.ix_(idx, idx)] = part.dist
    np.fill_diagonal(d, 0.0)
    d[0, :] = rad
    d[:, 0] = rad
    space = PMetricSpace(d, p, tuple(labels))
    return checked(space, "maltese sum"), maps


def _full_p_sum(parts, p, cap):
    size = int(np.prod([part.n for part in parts]))
    if size > cap:
        raise ResourceError(f"full p-sum would have {size} points, cap is {cap}")
    tuples = list(itertools.product(*[range(part.n) for part in parts]))
    pos = {t: i for i, t in enumerate(tuples)}
    T = np.array(tuples)
    acc = np.zeros((size, size))
    for a, part in enumerate(parts):
        col = T[:, a]
        acc += part.dist[np.ix_(col, col)] ** p
    d = acc ** (1.0 / p)
    labels = tuple("(" + ",".join(parts[a].labels[x] for a, x in enumerate(t)) + ")" for t in tuples)
    maps = []
    for a, part in enumerate(parts):
        idx = []
        for x in range(part.n):
            t = [0] * len(parts)
            t[a] = x
            idx.append(pos[tuple(t)])
        maps.append(np.array(idx))
    return checked(PMetricSpace(d, p, labels), "full p-sum"), maps


def quotient(space: PMetricSpace, N: Iterable[int]):
    """Collapse the subset ``N`` (which must contain the base point) to the base point.

    Returns ``(space, Q)`` with ``Q[i]`` the new index of old point ``i``.
    """
    Nset = sorted(set(int(i) for i in N))
    if not Nset:
        raise StructuralError("collapsed set is empty")
    if 0 not in Nset:
        raise StructuralError("collapsed set must contain the base point 0")
    if any(i < 0 or i >= space.n for i in Nset):
        raise StructuralError("collapsed set has out-of-range indices")
    p = space.p
    rest = [i for i in range(space.n) if i not in set(Nset)]
    keep = [0] + rest
    to_N = space.dist[:, Nset].min(axis=1)
    sub = space.dist[np.ix_(keep, keep)]
    r = to_N[keep]
    via = (r[:, None] ** p + r[None, :] ** p) ** (1.0 / p)
    d = np.minimum(sub, via)
    d[0, :] = r
    d[:, 0] = r
    np.fill_diagonal(d, 0.0)
    Q = np.zeros(space.n, dtype=int)
    for new, old in enumerate(keep):
        Q[old] = new
    labels = ("0",) + tuple(space.labels[i] for i in rest)
    out = PMetricSpace(d, p, labels)
    return checked(out, "quotient"), Q


def metric_envelope(space: PMetricSpace) -> PMetricSpace:
    """Largest metric dominated by ``dist``: all-pairs shortest paths, p = 1."""
    d = shortest_path(np.asarray(space.dist), method="FW", directed=False)
    return checked(PMetricSpace(d, 1.0, space.labels, space.coords), "metric envelope")


def line_space(coords: Sequence, p: float = 1.0, labels: Sequence[str] | None = None) -> PMetricSpace:
    """Points on the real line with |x - y|; the point 0 becomes the base point."""
    pts = [Fraction(c) for c in coords]
    if len(set(pts)) != len(pts):
        raise StructuralError("duplicate points")
    if Fraction(0) not in pts:
        raise StructuralError("the point 0 must be present to serve as base point")
    order = sorted(range(len(pts)), key=lambda i: (pts[i] != 0, pts[i]))
    pts = [pts[i] for i in order]
    if labels is None:
        labels = [_fmt_coord(x) for x in pts]
    else:
        labels = [labels[i] for i in order]
    arr = np.array([[float(abs(a - b)) for b in pts] for a in pts])
    return checked(PMetricSpace(arr, p, tuple(labels), tuple(pts)), "line space")


def _fmt_coord(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def integer_segment(m: int, p: float = 1.0) -> PMetricSpace:
    if m < 1:
        raise StructuralError("integer segment needs m >= 1")
    return line_space(range(m + 1), p)


def dyadic(level: int, p: float = 1.0) -> PMetricSpace:
    if level < 0:
        raise StructuralError("dyadic level must be >= 0")
    return line_space([Fraction(i, 2**level) for i in range(2**level + 1)], p)


def custom_grid(points: Iterable, p: float = 1.0) -> PMetricSpace:
    pts = [Fraction(x) for x in points]
    if Fraction(0) not in pts or Fraction(1) not in pts:
        raise StructuralError("custom grid must contain 0 and 1")
    if any(x < 0 or x > 1 for x in pts):
        raise StructuralError("custom grid points must lie in [0, 1]")
    return line_space(pts, p)


def make_grid(kind: str, p: float = 1.0, *, m: int | None = None, level: int | None = None, points=None):
    if kind == "integer_segment":
        return integer_segment(m, p)
    if kind == "dyadic":
        return dyadic(level, p)
    if kind == "custom":
        return custom_grid(points, p)
    raise StructuralError(f"unknown grid kind {kind!r}")


def random_space(rng: np.random.Generator, n: int, p: float, kind: str = "euclid") -> PMetricSpace:
    """Random p-metric space: a random metric raised to the power 1/p."""
    if kind == "euclid":
        pts = rng.uniform(0.0, 1.0, size=(n, 2))
        e = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        e = np.maximum(e, 1e-3) * (1 - np.eye(n))
    elif kind == "graph":
        w = rng.uniform(0.2, 1.0, size=(n, n))
        w = np.triu(w, 1)
        w = w + w.T
        e = shortest_path(w, method="FW", directed=False)
    else:
        raise StructuralError(f"unknown random kind {kind!r}")
    return checked(PMetricSpace(e ** (1.0 / p), p), "random space")


# -- JSON --------------------------------------------------------------------

def space_to_json(space: PMetricSpace) -> str:
    rows = ",\n    ".join("[" + ", ".join(f"{x:.17g}" for x in row) + "]" for row in space.dist)
    return (
        "{\n"
        f'  "p": {space.p:.17g},\n'
        f'  "labels": {json.dumps(list(space.labels))},\n'
        '  "base": 0,\n'
        f'  "dist": [\n    {rows}\n  ]\n'
        "}\n"
    )


def space_from_dict(obj: dict) -> PMetricSpace:
    dist = np.array(obj["dist"], dtype=float)
    labels = list(obj.get("labels") or [str(i) for i in range(len(dist))])
    base = int(obj.get("base", 0))
    if base != 0:
        order = [base] + [i for i in range(len(dist)) if i != base]
        dist = dist[np.ix_(order, order)]
        labels = [labels[i] for i in order]
    return PMetricSpace(dist, float(obj["p"]), tuple(labels))


def load_space(path: str | Path) -> PMetricSpace:
    return space_from_dict(json.loads(Path(path).read_text()))


def save_space(space: PMetricSpace, path: str | Path) -> None:
    Path(path).write_text(space_to_json(space))
