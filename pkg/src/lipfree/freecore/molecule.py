"""Molecules, Lipschitz functions and the coordinate spaces operators act on.

Free-space elements are held in delta-coordinates: the base point has
``delta(0) = 0``, so a molecule on an n-point space is a vector of length
``n - 1``.  The full coefficient vector (length n, summing to zero) is
recovered by putting minus the total mass on the base point.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ..errors import StructuralError
from ..qmetric import PMetricSpace

MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Molecule:
    space: PMetricSpace
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.space.n,):
            raise StructuralError(f"molecule needs {self.space.n} coefficients, got shape {c.shape}")
        scale = max(1.0, float(np.abs(c).max(initial=0.0)))
        if abs(c.sum()) > MASS_TOL * scale:
            raise StructuralError(f"molecule coefficients sum to {c.sum():.3e}, not zero")
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_delta(cls, space: PMetricSpace, delta) -> "Molecule":
        v = np.asarray(delta, dtype=float)
        return cls(space, np.concatenate([[-v.sum()], v]))

    @classmethod
    def pair(cls, space: PMetricSpace, x: int, y: int, scale: float = 1.0) -> "Molecule":
        """``scale * (delta(y) - delta(x))``."""
        c = np.zeros(space.n)
        c[y] += scale
        c[x] -= scale
        return cls(space, c)

    @property
    def delta(self) -> np.ndarray:
        return self.coeffs[1:]

    def __add__(self, other: "Molecule") -> "Molecule":
        return Molecule(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "Molecule") -> "Molecule":
        return Molecule(self.space, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "Molecule":
        return Molecule(self.space, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self) -> "Molecule":
        return Molecule(self.space, -self.coeffs)


@dataclass(frozen=True, eq=False)
class LipschitzFunction:
    """Real function on the points of a space, vanishing at the base point."""

    space: PMetricSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.space.n,):
            raise StructuralError("function needs one value per point")
        if v[0] != 0.0:
            raise StructuralError("Lipschitz function must vanish at the base point")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def lip(self) -> float:
        return lipschitz_constant(self.space, self.values)

    def pair(self, mol: Molecule) -> float:
        return float(self.values @ mol.coeffs)


def lipschitz_constant(space: PMetricSpace, values) -> float:
    """max |f(x) - f(y)| / d(x, y) over distinct points, for real-valued f."""
    v = np.asarray(values, dtype=float)
    if space.n < 2:
        return 0.0
    iu = np.triu_indices(space.n, 1)
    return float(np.max(np.abs(v[iu[0]] - v[iu[1]]) / space.dist[iu]))


def point_map_lipschitz(domain: PMetricSpace, codomain: PMetricSpace, f) -> float:
    f = np.asarray(f, dtype=int)
    if domain.n < 2:
        return 0.0
    iu = np.triu_indices(domain.n, 1)
    return float(np.max(codomain.dist[f[iu[0]], f[iu[1]]] / domain.dist[iu]))


def elementary_pairs(space: PMetricSpace) -> list[tuple[int, int]]:
    return list(combinations(range(space.n), 2))


def elementary_molecules(space: PMetricSpace) -> list[Molecule]:
    """(delta(y) - delta(x)) / d(x, y) for every pair x < y."""
    return [Molecule.pair(space, x, y, 1.0 / space.dist[x, y]) for x, y in elementary_pairs(space)]


def elementary_matrix(space: PMetricSpace) -> np.ndarray:
    """Elementary molecules as rows, in delta-coordinates."""
    pairs = elementary_pairs(space)
    A = np.zeros((len(pairs), space.n))
    for r, (x, y) in enumerate(pairs):
        w = 1.0 / space.dist[x, y]
        A[r, y] += w
        A[r, x] -= w
    return A[:, 1:]


def lp_quasinorm(a, p: float, axis=-1):
    """(sum |a|^p)^(1/p)."""
    return np.sum(np.abs(np.asarray(a, dtype=float)) ** p, axis=axis) ** (1.0 / p)


@dataclass(frozen=True)
class EllP:
    """The finite sequence space l_p^dim with its closed-form quasinorm."""

    dim: int
    p: float


@dataclass(frozen=True, eq=False)
class LpSum:
    """l_p-sum of free spaces over ``parts``; coordinates are concatenated."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if len({part.p for part in parts}) > 1:
            raise StructuralError("l_p-sum parts must share the exponent")
        object.__setattr__(self, "parts", parts)

    @property
    def p(self) -> float:
        return self.parts[0].p

    @property
    def dim(self) -> int:
        return sum(part.n - 1 for part in self.parts)

    @property
    def offsets(self) -> list[int]:
        out, acc = [], 0
        for part in self.parts:
            out.append(acc)
            acc += part.n - 1
        return out


def coord_dim(space) -> int:
    if isinstance(space, PMetricSpace):
        return space.n - 1
    return space.dim


def space_p(space) -> float:
    return space.p


def atoms(space) -> np.ndarray:
    """An isometric p-norming set of the coordinate space, one atom per row."""
    if isinstance(space, PMetricSpace):
        return elementary_matrix(space)
    if isinstance(space, EllP):
        return np.eye(space.dim)
    if isinstance(space, LpSum):
        rows = []
        for part, off in zip(space.parts, space.offsets):
            A = elementary_matrix(part)
            block = np.zeros((A.shape[0], space.dim))
            block[:, off : off + part.n - 1] = A
            rows.append(block)
        return np.vstack(rows) if rows else np.zeros((0, space.dim))
    raise TypeError(f"unsupported coordinate space {type(space).__name__}")


def same_coordinate_space(a, b) -> bool:
    if isinstance(a, PMetricSpace) and isinstance(b, PMetricSpace):
        return a.same_as(b)
    if isinstance(a, LpSum) and isinstance(b, LpSum):
        return len(a.parts) == len(b.parts) and all(x.same_as(y) for x, y in zip(a.parts, b.parts))
    return a == b
