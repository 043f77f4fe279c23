"""Embeddings of l_p into free p-spaces and the tools used to verify them.

Maps into L_q(R) are represented by finite step functions, which is enough
for every map built here (each lands in the span of finitely many
indicators) and keeps quasinorms exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .complement import SeparatedChain, chain_inequalities
from .errors import StructuralError
from .freecore.molecule import lp_quasinorm
from .freecore.norm import ENUMERATE_CAP, batch_norms
from .qmetric import PMetricSpace, checked


# -- step functions -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StepFunction:
    """sum_i values[i] * indicator of (breakpoints[i], breakpoints[i+1]]."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if len(b) == 0 and len(v) == 0:
            pass
        elif len(b) != len(v) + 1:
            raise StructuralError("need one more breakpoint than values")
        if np.any(np.diff(b) <= 0):
            raise StructuralError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls(np.zeros(0), np.zeros(0))

    @classmethod
    def indicator(cls, a: float, b: float, c: float = 1.0) -> "StepFunction":
        """c times the indicator of (a, b]; empty when b <= a."""
        if b <= a or c == 0.0:
            return cls.zero()
        return cls(np.array([a, b]), np.array([c]))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if len(self.values) == 0:
            return np.zeros_like(x)
        i = np.searchsorted(self.breakpoints, x, side="left") - 1
        inside = (i >= 0) & (i < len(self.values))
        return np.where(inside, self.values[np.clip(i, 0, len(self.values) - 1)], 0.0)

    def _on(self, grid: np.ndarray) -> np.ndarray:
        """Values on the cells (grid[i], grid[i+1]] of a refining grid."""
        if len(grid) < 2:
            return np.zeros(0)
        return self(grid[1:])

    def _combine(self, other: "StepFunction", op) -> "StepFunction":
        grid = np.union1d(self.breakpoints, other.breakpoints)
        if len(grid) < 2:
            return StepFunction.zero()
        return StepFunction(grid, op(self._on(grid), other._on(grid))).canonical()

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c: float):
        return StepFunction(self.breakpoints, self.values * c).canonical()

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def canonical(self) -> "StepFunction":
        """Merge equal neighbours and drop zero cells at both ends."""
        b, v = self.breakpoints, self.values
        if len(v) == 0:
            return self
        keep = np.ones(len(v) + 1, dtype=bool)
        keep[1:-1] = v[1:] != v[:-1]
        b2 = b[keep]
        v2 = v[keep[:-1]]
        nz = np.flatnonzero(v2)
        if len(nz) == 0:
            return StepFunction.zero()
        lo, hi = nz[0], nz[-1]
        return StepFunction(b2[lo : hi + 2], v2[lo : hi + 1])

    def quasinorm(self, q: float) -> float:
        """(integral |h|^q)^(1/q)."""
        if len(self.values) == 0:
            return 0.0
        return float(np.sum(np.abs(self.values) ** q * np.diff(self.breakpoints)) ** (1.0 / q))

    def is_zero(self) -> bool:
        return not np.any(self.values)


def step_distance(a: StepFunction, b: StepFunction, q: float) -> float:
    return (a - b).quasinorm(q)


# -- Lipschitz sums with disjoint supports ------------------------------------------------

@dataclass
class SumCheck:
    L: float  # largest measured constant of an individual map
    bound: float  # L * 2^(1/q - 1)
    measured: float  # measured constant of the sum
    pairs: int
    missing_witness: list = field(default_factory=list)  # pairs with no segment point outside both supports

    @property
    def ok(self) -> bool:
        return self.measured <= self.bound * (1 + 1e-6)


def tent(center: float, radius: float, cell: tuple[float, float], sign: float = 1.0) -> Callable:
    """x -> sign * max{radius - |x - center|, 0} times the indicator of ``cell``.

    A cell of length 1 makes the map 1-Lipschitz into every L_q.
    """
    a, b = cell

    def f(x: float) -> StepFunction:
        h = max(radius - abs(x - center), 0.0)
        return StepFunction.indicator(a, b, sign * h)

    f.support = (center - radius, center + radius)
    return f


def _segment_witness(x, y, maps_ab, depth: int):
    """A point of [x, y] where both maps vanish: a known support endpoint, else bisection."""
    lo, hi = min(x, y), max(x, y)
    for f in maps_ab:
        for z in getattr(f, "support", ()):
            if lo <= z <= hi and all(g(z).is_zero() for g in maps_ab):
                return z
    level = [(lo, hi)]
    for _ in range(depth):
        nxt = []
        for a, b in level:
            z = 0.5 * (a + b)
            if all(f(z).is_zero() for f in maps_ab):
                return z
            nxt += [(a, z), (z, b)]
        level = nxt
    return None


def disjoint_sum_check(
    fs: Sequence[Callable],
    samples: Sequence[float],
    q: float,
    L: float | None = None,
    depth: int = 8,
) -> SumCheck:
    """Measured Lipschitz constant of sum(fs) on a 1-D point cloud, against L 2^(1/q - 1).

    The domain is the real line with |x - y|.  ``L`` defaults to the largest
    constant measured for the individual maps on the same samples.  For each
    pair taken from two different supports a point of the segment outside both
    supports is sought by bisection up to ``depth`` levels.
    """
    xs = np.unique(np.asarray(samples, dtype=float))
    if not 1 <= depth <= 8:
        raise StructuralError("bisection depth must lie between 1 and 8")
    vals = [[f(x) for x in xs] for f in fs]
    owner = np.full(len(xs), -1)
    for g, col in enumerate(vals):
        for i, h in enumerate(col):
            if not h.is_zero():
                if owner[i] >= 0:
                    raise StructuralError(f"supports of maps {owner[i]} and {g} overlap at x = {xs[i]:.6g}")
                owner[i] = g
    total = []
    for i in range(len(xs)):
        total.append(vals[owner[i]][i] if owner[i] >= 0 else StepFunction.zero())
    measured = 0.0
    Lm = 0.0
    missing = []
    pairs = 0
    for i in range(len(xs)):
        for j in range(i + 1, len(xs)):
            dx = xs[j] - xs[i]
            measured = max(measured, step_distance(total[i], total[j], q) / dx)
            for col in vals:
                Lm = max(Lm, step_distance(col[i], col[j], q) / dx)
            a, b = owner[i], owner[j]
            if a >= 0 and b >= 0 and a != b:
                pairs += 1
                if _segment_witness(xs[i], xs[j], [fs[a], fs[b]], depth) is None:
                    missing.append((float(xs[i]), float(xs[j])))
    L = Lm if L is None else float(L)
    return SumCheck(L, L * 2.0 ** (1.0 / q - 1.0), measured, pairs, missing)


# -- maps of a space into L_p built from a separated sequence -------------------------------

def embedding_heights(seq: SeparatedChain) -> np.ndarray:
    """g_n(x) = max{r_n - d^p(x, x_n), 0}; row n, column x."""
    sp = seq.space
    Dp = sp.dist[seq.points] ** sp.p
    return np.maximum(np.asarray(seq.radii)[:, None] - Dp, 0.0)


def lp_embedding_maps(seq: SeparatedChain) -> list[Callable[[int], StepFunction]]:
    """Maps x -> indicator of (0, g_n(x)], 1-Lipschitz from the space into L_p."""
    bad = chain_inequalities(seq.space, seq.points, seq.radii, seq.t)
    sep = [
        (a, b)
        for a in range(len(seq.points))
        for b in range(a + 1, len(seq.points))
        if seq.space.dist[seq.points[a], seq.points[b]] ** seq.space.p < seq.radii[a] + seq.radii[b] - 1e-12
    ]
    if sep:
        raise StructuralError(f"sequence points too close for their radii at pairs {sep}")
    if bad:
        raise StructuralError("sequence invalid: " + "; ".join(bad))
    G = embedding_heights(seq)
    return [(lambda x, g=g: StepFunction.indicator(0.0, float(g[x]))) for g in G]


def embedding_lipschitz(seq: SeparatedChain) -> float:
    """Largest ||f_n(x) - f_n(y)||_p / d(x, y) over all maps and pairs of points."""
    sp = seq.space
    maps = lp_embedding_maps(seq)
    worst = 0.0
    for f in maps:
        imgs = [f(x) for x in range(sp.n)]
        for x in range(sp.n):
            for y in range(x + 1, sp.n):
                worst = max(worst, step_distance(imgs[x], imgs[y], sp.p) / sp.dist[x, y])
    return worst


# -- the l_p sandwich for consecutive molecules ----------------------------------------------

@dataclass
class SandwichReport:
    p: float
    t: float
    norms: np.ndarray
    ellp: np.ndarray
    lower_factor: float  # (2 / 2^(1/p)) / t

    @property
    def lower(self) -> np.ndarray:
        return self.lower_factor * self.ellp

    @property
    def min_ratio(self) -> float:
        return float(np.min(self.norms / self.ellp))

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.norms / self.ellp))

    @property
    def distortion(self) -> float:
        return self.max_ratio / self.min_ratio

    def ok(self, tol: float = 1e-9) -> bool:
        lo = np.all(self.norms >= self.lower * (1 - tol) - tol)
        hi = np.all(self.norms <= self.ellp * (1 + tol) + tol)
        return bool(lo and hi)


def chain_molecules(seq: SeparatedChain) -> tuple[PMetricSpace, np.ndarray]:
    """The subspace N = {x_n} (x_0 as base) and b_n = (delta(x_{n-1}) - delta(x_n))/d in delta-coordinates."""
    N = seq.space.subspace(seq.points)
    k = N.n - 1
    B = np.zeros((k, k))
    for n in range(1, N.n):
        d = N.dist[n - 1, n]
        if n - 1 > 0:
            B[n - 1, n - 2] += 1.0 / d
        B[n - 1, n - 1] -= 1.0 / d
    return N, B


def chain_sandwich(seq: SeparatedChain, coeffs, method: str = "auto", cap: int = ENUMERATE_CAP) -> SandwichReport:
    """Exact norms of sum a_n b_n on F_p(N) next to the l_p bounds."""
    N, B = chain_molecules(seq)
    A = np.atleast_2d(np.asarray(coeffs, dtype=float))
    if A.shape[1] != B.shape[0]:
        raise StructuralError(f"coefficient vectors need {B.shape[0]} entries")
    _, up = batch_norms(N, A @ B, method, cap)
    p = N.p
    return SandwichReport(p, seq.t, up, lp_quasinorm(A, p, axis=1), 2.0 ** (1.0 - 1.0 / p) / seq.t)


def ultrametric_chain(scales: Sequence[float], p: float = 1.0) -> PMetricSpace:
    """Points x_0 (base), x_1, ... with d(x_n, x_m) = max(scale_n, scale_m) and scale_0 = 0."""
    s = np.concatenate([[0.0], np.asarray(scales, dtype=float)])
    if np.any(np.diff(s) <= 0):
        raise StructuralError("scales must be positive and strictly increasing")
    d = np.maximum(s[:, None], s[None, :])
    np.fill_diagonal(d, 0.0)
    return checked(PMetricSpace(d, p), "ultrametric chain")


# -- near-l_p block extraction ---------------------------------------------------------------

NormOracle = Callable[[np.ndarray], np.ndarray]


def ellp_oracle(p: float) -> NormOracle:
    return lambda A: lp_quasinorm(np.atleast_2d(A), p, axis=1)


def molecule_oracle(space: PMetricSpace, vectors, method: str = "auto") -> NormOracle:
    """Norms of combinations of fixed delta-coordinate vectors in F_p(space)."""
    V = np.asarray(vectors, dtype=float)

    def oracle(A):
        return batch_norms(space, np.atleast_2d(A) @ V, method)[1]

    return oracle


@dataclass
class BlockExtraction:
    p: float
    eps: float
    M_hat: np.ndarray  # M_hat[n]: estimated domination constant for coefficients vanishing up to n
    M: float
    windows: list  # n_0 < n_1 < ...
    blocks: np.ndarray  # one row per block, coefficients over the ambient sequence
    block_norms: np.ndarray
    lower_constant: float  # min sampled ||sum a_k y_k|| / ||a||_p
    delta_report: float  # shortfall below 1 - eps, if any
    requested: int

    @property
    def achieved(self) -> int:
        return len(self.blocks)


def _best_ratio(oracle, p, J, lo, hi, rng, samples, rounds):
    """Heuristic max of ||b||_p / ||sum b_j x_j|| over b supported in [lo, hi)."""
    w = hi - lo
    cand = np.zeros((samples + w, J))
    cand[:samples, lo:hi] = rng.standard_normal((samples, w))
    cand[samples:, lo:hi] = np.eye(w)
    ratio = lp_quasinorm(cand, p, axis=1) / oracle(cand)
    best = cand[int(np.argmax(ratio))].copy()
    r_best = float(ratio.max())
    step = 0.5
    for _ in range(rounds):
        trial = np.repeat(best[None, :], 2 * w, axis=0)
        scale = np.abs(best[lo:hi]).max()
        for j in range(w):
            trial[2 * j, lo + j] += step * scale
            trial[2 * j + 1, lo + j] -= step * scale
        r = lp_quasinorm(trial, p, axis=1) / np.maximum(oracle(trial), 1e-300)
        k = int(np.argmax(r))
        if r[k] > r_best * (1 + 1e-12):
            best, r_best = trial[k].copy(), float(r[k])
        else:
            step *= 0.5
    return r_best, best


def extract_blocks(
    oracle: NormOracle,
    J: int,
    p: float,
    eps: float,
    k: int,
    seed: int = 42,
    samples: int = 64,
    rounds: int = 12,
    checks: int = 50,
) -> BlockExtraction:
    """Disjoint normalized blocks of an ambient sequence x_1..x_J whose span is nearly l_p from below.

    The domination constants M_n are estimated by seeded random search plus
    coordinate ascent, which only bounds them from below; the final lower
    constant is measured on random coefficient vectors and any shortfall below
    ``1 - eps`` is reported as ``delta_report``.
    """
    if not 0 < eps < 1:
        raise StructuralError("eps must lie in (0, 1)")
    if k < 1 or k > J:
        raise StructuralError("need 1 <= k <= J")
    rng = np.random.default_rng(seed)
    est = np.array([_best_ratio(oracle, p, J, n, J, rng, samples, rounds)[0] for n in range(J)])
    M_hat = est.copy()
    for n in range(J - 2, -1, -1):
        M_hat[n] = max(est[n], M_hat[n + 1])
    # the finite tail still holding k vectors stands in for the limit
    M = float(M_hat[J - k])
    n0 = next(n for n in range(J - k + 1) if M_hat[n] <= (1 - eps) ** -0.5 * M)
    target = (1 - eps) ** 0.5 * M
    windows = [n0]
    blocks = []
    lo = n0
    while len(blocks) < k and lo < J:
        found = None
        for hi in range(lo + 1, J + 1):
            r, b = _best_ratio(oracle, p, J, lo, hi, rng, samples, rounds)
            if r >= target * (1 - 1e-12):
                found = (hi, b)
                break
        if found is None:
            break
        hi, b = found
        blocks.append(b / oracle(b[None, :])[0])
        windows.append(hi)
        lo = hi
    Y = np.array(blocks) if blocks else np.zeros((0, J))
    norms = oracle(Y) if len(Y) else np.zeros(0)
    lower = np.inf
    if len(Y):
        A = np.vstack([np.eye(len(Y)), rng.standard_normal((checks, len(Y)))])
        lower = float(np.min(oracle(A @ Y) / lp_quasinorm(A, p, axis=1)))
    return BlockExtraction(p, eps, M_hat, M, windows, Y, norms, lower, max(0.0, (1 - eps) - lower), k)
