"""The fourteen acceptance checks, each runnable on its own.

Every check returns a :class:`CriterionResult` whose ``rows`` are per-instance
records (instance, p, bound, measured, margin) suitable for CSV reports.
Randomness is drawn from ``numpy.random.default_rng(seed)`` only.
"""
from __future__ import annotations

import inspect
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import bases, complement, embed
from .freecore.molecule import lipschitz_constant
from .freecore.norm import transport_lp, tree_search
from .freecore.operator import operator_norm
from .qmetric import (
    integer_segment,
    line_space,
    quotient,
    random_space,
    validate,
)


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    summary: str
    rows: list = field(default_factory=list)  # (instance, p, bound, measured, margin)

    def line(self, passed: bool | None = None) -> str:
        passed = self.passed if passed is None else passed
        return f"[{'PASS' if passed else 'FAIL'}] criterion {self.cid:2d} {self.name}: {self.summary}"


def _row(instance, p, bound, measured, lower: bool = False):
    """Margin is positive when the check holds: measured <= bound, or measured >= bound for lower bounds."""
    margin = measured - bound if lower else bound - measured
    return (str(instance), float(p), float(bound), float(measured), float(margin))


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def norm_oracle_equivalence(seed: int = 42, count: int = 100, max_points: int = 7) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, worst = [], 0.0
    for i in range(count):
        n = int(rng.integers(2, max_points + 1))
        space = random_space(rng, n, 1.0, "euclid" if i % 2 == 0 else "graph")
        c = rng.standard_normal(n)
        c -= c.mean()
        lp, _ = transport_lp(space, c)
        en, _ = tree_search(space, c)
        err = _rel(en, lp)
        worst = max(worst, err)
        rows.append(_row(f"space{i}_n{n}", 1.0, 1e-8, err))
    return CriterionResult(1, "lp and tree-search norms agree at p=1", worst <= 1e-8, f"max rel gap {worst:.2e} over {count} spaces", rows)


def segment_sums(m: int = 8, ps=(0.5, 2 / 3, 1.0)) -> CriterionResult:
    rows, worst = [], 0.0
    for p in ps:
        for (k, j), v in bases.segment_sum_norms(m, p).items():
            err = abs(v - (j - k))
            worst = max(worst, err)
            rows.append(_row(f"k{k}_m{j}", p, 1e-8, err))
    return CriterionResult(2, "||x_{k+1}+...+x_m|| = m-k on Z[0,8]", worst <= 1e-8, f"max abs error {worst:.2e} over {len(rows)} cases", rows)


def subbasis_isometry(seed: int = 42, m: int = 8, count: int = 50, ps=(0.5, 1.0)) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, worst = [], 0.0
    for p in ps:
        for parity in ("even", "odd"):
            k = len(range(2, m + 1, 2)) if parity == "even" else len(range(1, m + 1, 2))
            A = rng.standard_normal((count, k))
            got, want = bases.subbasis_norms(m, p, A, parity)
            err = np.abs(got - want) / want
            worst = max(worst, float(err.max()))
            rows += [_row(f"{parity}{i}", p, 1e-8, e) for i, e in enumerate(err)]
    return CriterionResult(3, "even/odd subbases are isometric to the l_p basis", worst <= 1e-8, f"max rel error {worst:.2e}", rows)


def clamp_projection_norms(m: int = 8, ps=(0.5, 2 / 3, 1.0)) -> CriterionResult:
    rows, worst = [], 0.0
    for p in ps:
        space = integer_segment(m, p)
        for j in range(1, m + 1):
            for k in range(j):
                v = operator_norm(bases.clamp_projection(space, k, j)).value
                worst = max(worst, abs(v - 1.0))
                rows.append(_row(f"P[{k},{j}]", p, 1e-9, abs(v - 1.0)))
    return CriterionResult(4, "every clamp projection P[k,m] on Z[0,8] has norm 1", worst <= 1e-9, f"max |norm - 1| = {worst:.2e}", rows)


def interval_projections(level: int = 3, ps=(0.5, 2 / 3, 1.0)) -> CriterionResult:
    rows, ok = [], True
    parts = []
    for p in ps:
        bound = bases.haar_bound(p)
        norms = bases.interval_projection_norms(level, p)
        worst = max(norms.values())
        ok &= worst <= bound + 1e-9
        parts.append(f"p={p:.3g}: max {worst:.6f} <= {bound:.6f}")
        rows.append(_row(f"all_{len(norms)}_pairs", p, bound, worst))
    err = bases.interval_identity_errors(level)
    ok &= max(err.values()) <= 1e-12
    rows.append(_row("identities", 0.0, 1e-12, max(err.values())))
    return CriterionResult(5, "interpolation projections on dyadic(3)", bool(ok), "; ".join(parts) + f"; identity err {max(err.values()):.1e}", rows)


def haar_constants(N: int = 3, ps=(0.5, 2 / 3, 1.0)) -> CriterionResult:
    rows, ok, parts = [], True, []
    for p in ps:
        sysm = bases.haar_system(N, p)
        bc = bases.basis_constant(sysm)
        inv = sysm.invariant_errors()
        bound = bases.haar_bound(p)
        ok &= bc.value <= bound + 1e-9 and inv["kills_next"] <= 1e-12 and inv["composition"] <= 1e-12
        if p == 1.0:
            ok &= bc.value <= 1 + 1e-9
        rows.append(_row(f"haar{N}", p, bound, bc.value))
        parts.append(f"p={p:.3g}: {bc.value:.6f} <= {bound:.6f}")
    return CriterionResult(6, "Haar basis constant on dyadic(3)", bool(ok), "; ".join(parts), rows)


def retraction_instances(seed: int = 42, count: int = 50, max_points: int = 7) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, ok, worst_id = [], True, 0.0
    for i in range(count):
        n = int(rng.integers(3, max_points + 1))
        p = float(rng.choice([0.5, 2 / 3, 1.0]))
        space = random_space(rng, n, p, "euclid" if i % 2 else "graph")
        k = int(rng.integers(1, n))
        N = [0] + sorted(rng.choice(np.arange(1, n), size=k - 1, replace=False).tolist()) if k > 1 else [0]
        split = complement.retraction_complement(space, complement.nearest_point_retraction(space, N))
        res = complement.check_retraction_split(split)
        worst_id = max(worst_id, res["ST_err"], res["TS_err"])
        good = (
            res["ST_err"] <= 1e-10
            and res["TS_err"] <= 1e-10
            and res["norm_T"] <= res["bound"] + 1e-9
            and res["norm_S"] <= res["bound"] + 1e-9
        )
        ok &= good
        rows.append(_row(f"retract{i}_T", p, res["bound"], res["norm_T"]))
        rows.append(_row(f"retract{i}_S", p, res["bound"], res["norm_S"]))
    return CriterionResult(7, "retraction splitting F(M) = F(N) + F(M/N)", bool(ok), f"{count} instances, identity err {worst_id:.1e}", rows)


def _bump_instances():
    out = []
    for p in (0.5, 1.0):
        seg = integer_segment(8, p)
        out.append((f"Z8_isolated_p{p}", complement.bump_family(seg, [2, 4, 6], "isolated")))
        out.append((f"Z8_ball_p{p}", complement.bump_family(seg, [2, 5, 8], "metric_ball")))
        sparse = line_space([0, 1, 3, 4, 7, 10, 11, 15], p)
        out.append((f"sparse_isolated_p{p}", complement.bump_family(sparse, [2, 4, 5, 7], "isolated")))
        out.append((f"sparse_ball_p{p}", complement.bump_family(sparse, [2, 4, 6], "metric_ball")))
        sep = line_space([0, 2, 3, 7, 9, 14], p)
        out.append((f"sep_isolated_p{p}_t2", complement.bump_family(sep, [1, 3, 5], "isolated", t=2.0)))
    return out


def bump_projections() -> CriterionResult:
    rows, ok = [], True
    for name, data in _bump_instances():
        ops = complement.bump_operators(data)
        res = complement.check_bump_operators(ops)
        good = res["PS_exact"] and res["norm_P"] <= ops.bound + 1e-9 and res["norm_S"] <= 1 + 1e-9
        if data.style == "metric_ball":
            good &= res["norm_P"] <= 2 ** (1 / data.space.p) + 1e-9
        ok &= good
        rows.append(_row(name, data.space.p, ops.bound, res["norm_P"]))
    return CriterionResult(8, "bump-family l_p projections", bool(ok), f"{len(rows)} instances", rows)


def maltese_instances(seed: int = 42, count: int = 10, max_points: int = 8) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, ok = [], True
    for i in range(count):
        p = float(rng.choice([0.5, 1.0]))
        sizes = [int(rng.integers(2, 4)) for _ in range(3)]
        while 1 + sum(s - 1 for s in sizes) > max_points:
            sizes[int(np.argmax(sizes))] -= 1
        parts = [random_space(rng, s, p) for s in sizes]
        mi = complement.maltese_isometry(parts)
        ok &= abs(mi.norm_T - 1.0) <= 1e-9 and mi.norm_T_inv <= mi.K + 1e-9
        rows.append(_row(f"maltese{i}_T", p, 1e-9, abs(mi.norm_T - 1.0)))
        rows.append(_row(f"maltese{i}_Tinv", p, mi.K, mi.norm_T_inv))
    return CriterionResult(9, "maltese sum is isometric to the l_p-sum", bool(ok), f"{count} instances of 3 parts", rows)


def chain_t(p: float, ratio: float = 0.25) -> float:
    """t = 9 (s = 1/2) unless the chain needs more; then 1% above the strict threshold."""
    s = ratio**p
    return max(9.0, 1.01 * ((1 + s) / (1 - s)) ** 2)


def sandwich_chains(seed: int = 42, count: int = 50, ps=(0.5, 1.0)) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, ok, parts = [], True, []
    for p in ps:
        t = chain_t(p)
        space = line_space([0, 1, 4, 16, 64, 256], p)
        seq = complement.select_chain(space, t)
        A = rng.standard_normal((count, len(seq.points) - 1))
        rep = embed.chain_sandwich(seq, A)
        ok &= rep.ok()
        rows.append(_row("chain_lower", p, rep.lower_factor, rep.min_ratio, lower=True))
        rows.append(_row("chain_upper", p, 1.0, rep.max_ratio))
        parts.append(f"p={p}: ratio in [{rep.min_ratio:.4f}, {rep.max_ratio:.4f}] vs [{rep.lower_factor:.4f}, 1]")
    return CriterionResult(10, "geometric-chain molecules sandwich l_p", bool(ok), "; ".join(parts), rows)


def ultrametric_distortion(seed: int = 42, count: int = 50, ts=(1.1, 1.01), points: int = 4) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, dist = [], []
    for t in ts:
        s = complement.ratio_gap(t)
        space = embed.ultrametric_chain([(0.5 * s) ** -i for i in range(points)], 1.0)
        seq = complement.select_chain(space, t)
        rep = embed.chain_sandwich(seq, rng.standard_normal((count, len(seq.points) - 1)))
        dist.append(rep.distortion)
        rows.append(_row(f"ultra_t{t}", 1.0, t, rep.distortion))
    ok = all(d <= t + 1e-6 for d, t in zip(dist, ts)) and all(a >= b for a, b in zip(dist, dist[1:]))
    return CriterionResult(11, "ultrametric chains are nearly l_1", bool(ok), ", ".join(f"t={t}: {d:.6f}" for t, d in zip(ts, dist)), rows)


def _bump_sum_cases():
    # tents on disjoint supports, placed in the same or in separate unit cells
    return [
        ("same_cell_opposite", [embed.tent(1, 1, (0, 1)), embed.tent(3, 1, (0, 1), -1)]),
        ("separate_cells", [embed.tent(1, 1, (0, 1)), embed.tent(3, 1, (1, 2), -1)]),
        ("three_tents", [embed.tent(1, 1, (0, 1)), embed.tent(2.5, 0.5, (1, 2)), embed.tent(4, 1, (2, 3), -1)]),
        ("gap", [embed.tent(1, 0.5, (0, 1)), embed.tent(3, 1, (1, 2))]),
    ]


def sum_lipschitz(samples: int = 81) -> CriterionResult:
    rows, ok = [], True
    xs = np.linspace(-0.5, 5.5, samples)
    for q in (0.5, 1.0):
        for name, fs in _bump_sum_cases():
            r = embed.disjoint_sum_check(fs, xs, q)
            ok &= r.measured <= r.bound * (1 + 1e-6)
            rows.append(_row(name, q, r.bound, r.measured))
    return CriterionResult(12, "disjointly supported Lipschitz sums", bool(ok), f"{len(rows)} sampled sums", rows)


def quotient_instances(seed: int = 42, count: int = 100, funcs: int = 20, max_points: int = 8) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, ok, worst = [], True, 0.0
    for i in range(count):
        n = int(rng.integers(3, max_points + 1))
        p = float(rng.choice([0.5, 2 / 3, 1.0]))
        space = random_space(rng, n, p, "graph" if i % 2 else "euclid")
        k = int(rng.integers(1, n - 1))
        N = [0] + sorted(rng.choice(np.arange(1, n), size=k - 1, replace=False).tolist()) if k > 1 else [0]
        Qs, Q = quotient(space, N)
        ok &= validate(Qs).ok
        here = 0.0
        for _ in range(funcs):
            g = rng.standard_normal(Qs.n)
            g[0] = 0.0
            f = g[Q]  # vanishes on N
            before = lipschitz_constant(space, f)
            after = lipschitz_constant(Qs, g)
            here = max(here, abs(before - after) / max(after, 1e-300))
        worst = max(worst, here)
        rows.append(_row(f"quotient{i}_n{n}_N{len(N)}", p, 1e-12, here))
    ok &= worst <= 1e-12
    return CriterionResult(13, "quotients are valid and keep Lipschitz constants", bool(ok), f"{count} quotients, max rel gap {worst:.1e}", rows)


def dilation_bridge(seed: int = 42, count: int = 20, levels=(0, 1, 2, 3), ps=(0.5, 1.0)) -> CriterionResult:
    rng = np.random.default_rng(seed)
    rows, worst = [], 0.0
    for N in levels:
        for p in ps:
            A = rng.standard_normal((count, 2**N))
            err = bases.dilation_errors(N, p, A)
            worst = max(worst, float(err.max()))
            rows.append(_row(f"dyadic{N}", p, 1e-9, float(err.max())))
    return CriterionResult(14, "dyadic(N) = 2^-N Z[0,2^N] under dilation", worst <= 1e-9, f"max rel gap {worst:.1e}", rows)


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: norm_oracle_equivalence,
    2: segment_sums,
    3: subbasis_isometry,
    4: clamp_projection_norms,
    5: interval_projections,
    6: haar_constants,
    7: retraction_instances,
    8: bump_projections,
    9: maltese_instances,
    10: sandwich_chains,
    11: ultrametric_distortion,
    12: sum_lipschitz,
    13: quotient_instances,
    14: dilation_bridge,
}

SUITES = {
    "qmetric": (13,),
    "norms": (1, 2, 3, 14),
    "complement": (7, 8, 9),
    "embed": (10, 11, 12),
    "bases": (4, 5, 6),
}
SUITES["all"] = tuple(sorted(CRITERIA))


def run(cid: int, seed: int = 42, ps=None, max_points: int | None = None) -> CriterionResult:
    """Run one criterion; ``ps`` and ``max_points`` override defaults where the check has them."""
    fn = CRITERIA[cid]
    params = inspect.signature(fn).parameters
    kw = {}
    if "seed" in params:
        kw["seed"] = seed
    if ps is not None and "ps" in params:
        kw["ps"] = tuple(ps)
    if max_points is not None and "max_points" in params:
        kw["max_points"] = max_points
    return fn(**kw)
