"""Exact and bounding computations of the free p-space quasinorm.

For a molecule mu on a finite space the quasinorm is the gauge of the
absolutely p-convex hull of the elementary molecules::

    ||mu||^p = min sum_e |lambda_e|^p   subject to   sum_e lambda_e z_e = mu

At p = 1 this is a transshipment linear program.  For p < 1 the objective is
concave on every orthant, so the minimum sits at a basic solution; the
independent column sets of the elementary-molecule matrix are exactly the
forests of the complete graph, and on a forest the coefficients are forced
(the flow across an edge is the mass on one side of it).  ``enumerate`` runs
an exhaustive search over these trees organised as a dynamic programme over
vertex subsets; ``brute`` enumerates column subsets literally and solves each
linear system, and is kept as an independent oracle for small spaces.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import linprog

from ..errors import ResourceError, StructuralError
from ..qmetric import PMetricSpace
from .molecule import LipschitzFunction, Molecule, elementary_pairs

ENUMERATE_CAP = 9
BRUTE_CAP = 7
LP_TOL = 1e-10
PIVOT_TOL = 1e-10
# subset masses below this fraction of the total variation are treated as zero
MASS_ZERO = 1e-12

_HIGHS = {"primal_feasibility_tolerance": LP_TOL, "dual_feasibility_tolerance": LP_TOL}


@dataclass
class NormCertificate:
    value: float
    upper: float
    lower: float
    primal: list = field(default_factory=list)  # (x, y, lam): lam * (delta(y) - delta(x)) / d(x, y)
    dual: LipschitzFunction | None = None
    method: str = ""
    exact: bool = True

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    def to_json(self) -> dict:
        space = self.dual.space if self.dual is not None else None
        lab = (lambda i: space.labels[i]) if space is not None else (lambda i: i)
        return {
            "value": self.value,
            "upper": self.upper,
            "lower": self.lower,
            "gap": self.gap,
            "method": self.method,
            "exact": self.exact,
            "primal": [{"x": lab(x), "y": lab(y), "lambda": lam} for x, y, lam in self.primal],
            "dual": [] if self.dual is None else [float(v) for v in self.dual.values],
        }


# -- linear programs (p = 1 and dual bounds) ---------------------------------

def _ordered_pairs(n):
    return [(x, y) for x in range(n) for y in range(n) if x != y]


def transport_lp(space: PMetricSpace, coeffs) -> tuple[float, list]:
    """Flow form: min sum f_xy d(x,y) over f >= 0 with sum f_xy (delta(y) - delta(x)) = mu."""
    n = space.n
    c = np.asarray(coeffs, dtype=float)
    if n == 1 or not np.any(c):
        return 0.0, []
    pairs = _ordered_pairs(n)
    cost = np.array([space.dist[x, y] for x, y in pairs])
    A = np.zeros((n, len(pairs)))
    for k, (x, y) in enumerate(pairs):
        A[y, k] += 1.0
        A[x, k] -= 1.0
    res = linprog(cost, A_eq=A[1:], b_eq=c[1:], bounds=(0, None), method="highs", options=_HIGHS)
    if res.status != 0:
        raise RuntimeError(f"transport LP failed ({res.message}); a zero-mass molecule is always feasible")
    flow = {}
    for k, (x, y) in enumerate(pairs):
        if res.x[k] > 0:
            a, b, s = (x, y, 1.0) if x < y else (y, x, -1.0)
            flow[(a, b)] = flow.get((a, b), 0.0) + s * res.x[k] * space.dist[x, y]
    primal = [(x, y, float(lam)) for (x, y), lam in sorted(flow.items()) if lam != 0.0]
    return float(res.fun), primal


def dual_lower_bound(mol: Molecule) -> tuple[float, LipschitzFunction]:
    """Inequality form: max <f, mu> over f with f(0) = 0 and |f(x) - f(y)| <= d(x, y).

    This equals the p = 1 norm for the same distances, hence is a lower bound
    for every p <= 1.
    """
    space = mol.space
    n = space.n
    if n == 1 or not np.any(mol.coeffs):
        return 0.0, LipschitzFunction(space, np.zeros(n))
    pairs = _ordered_pairs(n)
    A = np.zeros((len(pairs), n))
    b = np.empty(len(pairs))
    for k, (x, y) in enumerate(pairs):
        A[k, y] = 1.0
        A[k, x] = -1.0
        b[k] = space.dist[x, y]
    bounds = [(0.0, 0.0)] + [(None, None)] * (n - 1)
    res = linprog(-mol.coeffs, A_ub=A, b_ub=b, bounds=bounds, method="highs", options=_HIGHS)
    if res.status != 0:
        raise RuntimeError(f"dual LP failed: {res.message}")
    f = np.array(res.x)
    f[0] = 0.0
    return float(f @ mol.coeffs), LipschitzFunction(space, f)


# -- exhaustive tree search ----------------------------------------------------

@lru_cache(maxsize=None)
def _plan(n: int):
    """For each vertex set S and root v in S: the candidate child subtrees.

    A child subtree is any submask T of S - {v} containing its lowest element;
    the remainder S - T stays rooted at v.
    """
    plan = [None] * (1 << n)
    for S in range(1, 1 << n):
        entries = []
        for v in range(n):
            if not (S >> v) & 1:
                continue
            rest = S & ~(1 << v)
            if rest == 0:
                entries.append((v, None, None))
                continue
            low = rest & -rest
            free = rest ^ low
            Ts = []
            sub = free
            while True:
                Ts.append(sub | low)
                if sub == 0:
                    break
                sub = (sub - 1) & free
            Ts = np.array(Ts, dtype=np.int64)
            entries.append((v, Ts, S ^ Ts))
        plan[S] = (entries, np.array([v for v in range(n) if (S >> v) & 1]))
    return plan


def _subset_sums(masses: np.ndarray) -> np.ndarray:
    B, n = masses.shape
    sub = np.zeros((1 << n, B))
    for S in range(1, 1 << n):
        low = (S & -S).bit_length() - 1
        sub[S] = sub[S & (S - 1)] + masses[:, low]
    return sub


def _tree_tables(space: PMetricSpace, masses: np.ndarray):
    n = space.n
    p = space.p
    B = masses.shape[0]
    Dp = space.dist ** p
    sub = _subset_sums(masses)
    scale = np.maximum(np.abs(masses).sum(axis=1), 1e-300)
    sub[np.abs(sub) <= MASS_ZERO * scale[None, :]] = 0.0
    W = np.abs(sub) ** p
    F = np.full((1 << n, n, B), np.inf)
    G = np.full((1 << n, n, B), np.inf)
    plan = _plan(n)
    for S in range(1, 1 << n):
        entries, members = plan[S]
        for v, Ts, Cs in entries:
            if Ts is None:
                F[S, v] = 0.0
            else:
                F[S, v] = np.min(G[Ts, v] + F[Cs, v], axis=0)
        # cheapest way to hang the tree on S below an outside vertex w
        G[S] = np.min(F[S, members][None, :, :] + Dp[:, members][:, :, None] * W[S][None, None, :], axis=1)
    return F, G, W, sub, Dp


def tree_search_values(space: PMetricSpace, masses: np.ndarray) -> np.ndarray:
    """Exact quasinorms of a batch of full coefficient vectors (rows)."""
    masses = np.atleast_2d(np.asarray(masses, dtype=float))
    if space.n == 1:
        return np.zeros(masses.shape[0])
    F, *_ = _tree_tables(space, masses)
    return F[(1 << space.n) - 1, 0] ** (1.0 / space.p)


def tree_search(space: PMetricSpace, coeffs) -> tuple[float, list]:
    """Exact quasinorm of one molecule together with an optimal tree decomposition."""
    n = space.n
    c = np.asarray(coeffs, dtype=float)
    if n == 1:
        return 0.0, []
    F, G, W, sub, Dp = _tree_tables(space, c[None, :])
    plan = _plan(n)
    full = (1 << n) - 1
    terms = []
    stack = [(full, 0)]
    while stack:
        S, v = stack.pop()
        entries, _ = plan[S]
        _, Ts, Cs = next(e for e in entries if e[0] == v)
        if Ts is None:
            continue
        k = int(np.argmin(G[Ts, v, 0] + F[Cs, v, 0]))
        T, C = int(Ts[k]), int(Cs[k])
        members = [u for u in range(n) if (T >> u) & 1]
        u = members[int(np.argmin([F[T, w, 0] + Dp[v, w] * W[T, 0] for w in members]))]
        lam = sub[T, 0] * space.dist[v, u]
        if lam != 0.0:
            terms.append((v, u, float(lam)) if v < u else (u, v, float(-lam)))
        stack.append((T, u))
        stack.append((C, v))
    terms.sort()
    return float(F[full, 0, 0] ** (1.0 / space.p)), terms


# -- literal enumeration of column subsets --------------------------------------

def brute_force(space: PMetricSpace, coeffs) -> tuple[float, list]:
    """Minimise sum |lambda|^p over every independent column subset of size <= n-1."""
    n = space.n
    if n > BRUTE_CAP:
        raise ResourceError(f"brute-force enumeration is capped at {BRUTE_CAP} points, got {n}")
    c = np.asarray(coeffs, dtype=float)
    b = c[1:]
    if not np.any(b):
        return 0.0, []
    pairs = elementary_pairs(space)
    A = np.zeros((n, len(pairs)))
    for k, (x, y) in enumerate(pairs):
        A[y, k] += 1.0 / space.dist[x, y]
        A[x, k] -= 1.0 / space.dist[x, y]
    A = A[1:]
    p = space.p
    best, best_terms = np.inf, []
    bnorm = np.linalg.norm(b)
    for k in range(1, n):
        for cols in itertools.combinations(range(len(pairs)), k):
            sub = A[:, cols]
            s = np.linalg.svd(sub, compute_uv=False)
            if s[-1] <= PIVOT_TOL * s[0]:
                continue
            lam, *_ = np.linalg.lstsq(sub, b, rcond=None)
            if np.linalg.norm(sub @ lam - b) > 1e-10 * (1.0 + bnorm):
                continue
            val = float(np.sum(np.abs(lam) ** p))
            if val < best - 1e-15:
                best = val
                best_terms = [(pairs[j][0], pairs[j][1], float(l)) for j, l in zip(cols, lam) if l != 0.0]
    return best ** (1.0 / p), best_terms


# -- greedy upper bound -----------------------------------------------------------

def greedy_decomposition(space: PMetricSpace, coeffs) -> list:
    """Repeatedly move mass from the most negative to the most positive point."""
    c = np.array(coeffs, dtype=float)
    scale = max(np.abs(c).sum(), 1e-300)
    terms = {}
    while True:
        i = int(np.argmax(c))
        j = int(np.argmin(c))
        if c[i] <= MASS_ZERO * scale:
            break
        a = min(c[i], -c[j])
        lam = a * space.dist[j, i]
        key, s = ((j, i), 1.0) if j < i else ((i, j), -1.0)
        terms[key] = terms.get(key, 0.0) + s * lam
        c[i] -= a
        c[j] += a
    return [(x, y, float(lam)) for (x, y), lam in sorted(terms.items()) if lam != 0.0]


def decomposition_value(terms, p: float) -> float:
    if not terms:
        return 0.0
    return float(np.sum(np.abs([t[2] for t in terms]) ** p) ** (1.0 / p))


def reconstruct(space: PMetricSpace, terms) -> np.ndarray:
    out = np.zeros(space.n)
    for x, y, lam in terms:
        w = lam / space.dist[x, y]
        out[y] += w
        out[x] -= w
    return out


# -- public entry points ------------------------------------------------------------

def resolve_method(space: PMetricSpace, method: str, cap: int = ENUMERATE_CAP) -> str:
    if method == "auto":
        if space.p == 1.0:
            return "lp"
        return "enumerate" if space.n <= cap else "bounds_only"
    if method == "lp" and space.p != 1.0:
        raise StructuralError("the lp method computes the p = 1 norm only; use enumerate for p < 1")
    if method == "enumerate" and space.n > cap:
        raise ResourceError(
            f"exact enumeration is capped at {cap} points (space has {space.n}); rerun with method=bounds_only"
        )
    if method not in {"lp", "enumerate", "brute", "bounds_only"}:
        raise StructuralError(f"unknown norm method {method!r}")
    return method


def norm(mol: Molecule, method: str = "auto", cap: int = ENUMERATE_CAP) -> NormCertificate:
    """Quasinorm of ``mol`` in the free p-space, with primal and dual certificates."""
    space = mol.space
    m = resolve_method(space, method, cap)
    lower, dual = dual_lower_bound(mol)
    if m == "lp":
        value, terms = transport_lp(space, mol.coeffs)
    elif m == "enumerate":
        value, terms = tree_search(space, mol.coeffs)
    elif m == "brute":
        value, terms = brute_force(space, mol.coeffs)
    else:
        terms = greedy_decomposition(space, mol.coeffs)
        value = decomposition_value(terms, space.p)
    upper = decomposition_value(terms, space.p)
    residual = np.abs(reconstruct(space, terms) - mol.coeffs).max(initial=0.0)
    if residual > 1e-10 * max(1.0, np.abs(mol.coeffs).max()):
        raise RuntimeError(f"primal decomposition misses the molecule by {residual:.3e}")
    # a linear functional cannot certify the exact value when p < 1
    lower = min(lower, value) if m != "bounds_only" else lower
    return NormCertificate(value, upper, lower, terms, dual, m, m != "bounds_only")


def batch_norms(space: PMetricSpace, delta_rows, method: str = "auto", cap: int = ENUMERATE_CAP):
    """Quasinorms of many delta-coordinate vectors; returns ``(lower, upper)`` arrays."""
    V = np.atleast_2d(np.asarray(delta_rows, dtype=float))
    if V.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    masses = np.hstack([-V.sum(axis=1, keepdims=True), V])
    # the tree search is exact for every p <= 1 and vectorises over the batch
    m = "enumerate" if method == "auto" and space.n <= cap else resolve_method(space, method, cap)
    if m == "enumerate":
        vals = tree_search_values(space, masses)
        return vals, vals.copy()
    if m == "lp":
        vals = np.array([transport_lp(space, row)[0] for row in masses])
        return vals, vals.copy()
    if m == "brute":
        vals = np.array([brute_force(space, row)[0] for row in masses])
        return vals, vals.copy()
    up = np.array([decomposition_value(greedy_decomposition(space, row), space.p) for row in masses])
    lo = np.array([dual_lower_bound(Molecule(space, row))[0] for row in masses])
    return lo, up
