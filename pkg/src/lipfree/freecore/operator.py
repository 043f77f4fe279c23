"""Linear operators between free p-spaces (and l_p coordinate spaces).

An operator is a matrix acting on delta-coordinates.  Because the unit ball
of the domain is the closed p-convex hull of its atoms, the operator
quasinorm is the largest codomain norm of an atom's image.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import StructuralError
from ..qmetric import PMetricSpace
from .molecule import EllP, LpSum, atoms, coord_dim, lp_quasinorm, point_map_lipschitz, same_coordinate_space
from .norm import ENUMERATE_CAP, batch_norms


@dataclass(frozen=True, eq=False)
class FreeOperator:
    domain: object
    codomain: object
    matrix: np.ndarray
    # optional exact rational matrix (lists of Fractions) for bit-exact identities
    exact: tuple | None = None

    def __post_init__(self):
        M = np.array(self.matrix, dtype=float)
        shape = (coord_dim(self.codomain), coord_dim(self.domain))
        if M.shape != shape:
            raise StructuralError(f"operator matrix has shape {M.shape}, expected {shape}")
        M.flags.writeable = False
        object.__setattr__(self, "matrix", M)

    def __call__(self, delta) -> np.ndarray:
        return self.matrix @ np.asarray(delta, dtype=float)

    def __sub__(self, other: "FreeOperator") -> "FreeOperator":
        _check_same(self.domain, other.domain, "domains")
        _check_same(self.codomain, other.codomain, "codomains")
        ex = None
        if self.exact is not None and other.exact is not None:
            ex = tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self.exact, other.exact))
        return FreeOperator(self.domain, self.codomain, self.matrix - other.matrix, ex)


def _check_same(a, b, what):
    if not same_coordinate_space(a, b):
        raise StructuralError(f"operator {what} do not match")


def identity(space) -> FreeOperator:
    k = coord_dim(space)
    one, zero = Fraction(1), Fraction(0)
    ex = tuple(tuple(one if i == j else zero for j in range(k)) for i in range(k))
    return FreeOperator(space, space, np.eye(k), ex)


def operator_from_images(domain, codomain, images, exact=None) -> FreeOperator:
    """Operator whose column j is the image (in codomain coordinates) of domain coordinate j."""
    cols = np.asarray(images, dtype=float).reshape(coord_dim(domain), coord_dim(codomain))
    return FreeOperator(domain, codomain, cols.T, exact)


def point_map_matrix(n_dom: int, n_cod: int, f) -> np.ndarray:
    """delta(x) -> delta(f(x)) in delta-coordinates, with delta(0) = 0."""
    M = np.zeros((n_cod - 1, n_dom - 1))
    for x in range(1, n_dom):
        if f[x] != 0:
            M[f[x] - 1, x - 1] = 1.0
    return M


def operator_from_lipschitz(domain: PMetricSpace, codomain: PMetricSpace, f) -> tuple[FreeOperator, float]:
    """Linearisation of a base-point preserving point map, with its Lipschitz constant."""
    f = [int(v) for v in f]
    if len(f) != domain.n:
        raise StructuralError(f"point map needs {domain.n} entries, got {len(f)}")
    if f[0] != 0:
        raise StructuralError("point map must send the base point to the base point")
    if any(v < 0 or v >= codomain.n for v in f):
        raise StructuralError("point map leaves the codomain")
    M = point_map_matrix(domain.n, codomain.n, f)
    ex = tuple(tuple(Fraction(int(v)) for v in row) for row in M)
    return FreeOperator(domain, codomain, M, ex), point_map_lipschitz(domain, codomain, f)


def compose(A: FreeOperator, B: FreeOperator) -> FreeOperator:
    """A after B."""
    _check_same(A.domain, B.codomain, "shapes (A.domain vs B.codomain)")
    ex = None
    if A.exact is not None and B.exact is not None:
        ex = _exact_matmul(A.exact, B.exact)
    return FreeOperator(B.domain, A.codomain, A.matrix @ B.matrix, ex)


def _exact_matmul(A, B):
    k = len(B)
    cols = len(B[0]) if k else 0
    return tuple(tuple(sum((row[i] * B[i][j] for i in range(k)), Fraction(0)) for j in range(cols)) for row in A)


def exact_is_identity(T: FreeOperator) -> bool:
    if T.exact is None:
        raise StructuralError("operator carries no exact matrix")
    return all(v == (1 if i == j else 0) for i, row in enumerate(T.exact) for j, v in enumerate(row))


# -- norms in coordinate spaces ------------------------------------------------------

class NormCache:
    """Memo of coordinate-space norms keyed by the vector rounded to 12 decimals."""

    def __init__(self):
        self._store: dict = {}
        self._spaces: dict = {}  # keeps keyed spaces alive so ids are not reused
        self.hits = 0
        self.misses = 0

    def key(self, space, v) -> tuple:
        self._spaces[id(space)] = space
        return (id(space), np.round(np.asarray(v, dtype=float), 12).tobytes())

    def get(self, space, v):
        k = self.key(space, v)
        if k in self._store:
            self.hits += 1
            return self._store[k]
        self.misses += 1
        return None

    def put(self, space, v, value):
        self._store[self.key(space, v)] = value


def coordinate_norms(space, vectors, method: str = "auto", cap: int = ENUMERATE_CAP):
    """(lower, upper) quasinorms of coordinate vectors (rows) in a coordinate space."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if isinstance(space, EllP):
        vals = lp_quasinorm(V, space.p, axis=1) if V.size else np.zeros(V.shape[0])
        return vals, vals.copy()
    if isinstance(space, PMetricSpace):
        return batch_norms(space, V, method, cap)
    if isinstance(space, LpSum):
        p = space.p
        lo = np.zeros(V.shape[0])
        up = np.zeros(V.shape[0])
        for part, off in zip(space.parts, space.offsets):
            if part.n < 2:
                continue
            l, u = batch_norms(part, V[:, off : off + part.n - 1], method, cap)
            lo += l**p
            up += u**p
        return lo ** (1.0 / p), up ** (1.0 / p)
    raise TypeError(f"unsupported coordinate space {type(space).__name__}")


def _norm_chunk(args):
    space, vectors, method, cap = args
    return coordinate_norms(space, vectors, method, cap)


@dataclass
class OperatorNorm:
    value: float
    upper: float
    lower: float
    witness: int  # index of the maximising domain atom
    witness_atom: np.ndarray
    exact: bool

    def __float__(self):
        return self.value


def operator_norm(
    T: FreeOperator,
    method: str = "auto",
    cap: int = ENUMERATE_CAP,
    cache: NormCache | None = None,
    workers: int = 1,
) -> OperatorNorm:
    """sup over domain atoms z of ||T z|| in the codomain, with the maximising atom.

    ``lower``/``upper`` bracket the true value when the codomain norms are only
    bounded; they coincide when exact norms are available.
    """
    Z = atoms(T.domain)
    if Z.shape[0] == 0:
        return OperatorNorm(0.0, 0.0, 0.0, -1, np.zeros(0), True)
    images = Z @ T.matrix.T
    lo = np.empty(len(images))
    up = np.empty(len(images))
    todo = []
    for i, v in enumerate(images):
        hit = cache.get(T.codomain, v) if cache is not None else None
        if hit is None:
            todo.append(i)
        else:
            lo[i], up[i] = hit
    if todo:
        block = images[todo]
        if workers > 1 and len(todo) > 1:
            chunks = np.array_split(np.arange(len(todo)), workers)
            with ProcessPoolExecutor(max_workers=workers) as ex:
                parts = list(ex.map(_norm_chunk, [(T.codomain, block[c], method, cap) for c in chunks if len(c)]))
            l = np.concatenate([a for a, _ in parts])
            u = np.concatenate([b for _, b in parts])
        else:
            l, u = coordinate_norms(T.codomain, block, method, cap)
        lo[todo] = l
        up[todo] = u
        if cache is not None:
            for j, i in enumerate(todo):
                cache.put(T.codomain, images[i], (l[j], u[j]))
    k = int(np.argmax(up))
    exact = bool(np.allclose(lo, up, rtol=1e-12, atol=0.0))
    return OperatorNorm(float(up[k]), float(up.max()), float(lo.max()), k, Z[k], exact)
