"""Command-line entry point: ``lipfree norm`` and ``lipfree verify``."""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import acceptance
from .errors import ResourceError, StructuralError
from .freecore.molecule import Molecule
from .freecore.norm import ENUMERATE_CAP, norm
from .qmetric import checked, load_space, space_from_dict

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_RESOURCE = 0, 1, 2, 3
CSV_HEADER = ["criterion", "instance", "p", "bound", "measured", "margin", "status"]


# -- norm -----------------------------------------------------------------------------

def _load_molecule(args):
    mol_path = Path(args.molecule)
    obj = json.loads(mol_path.read_text())
    if args.space:
        space = load_space(args.space)
    else:
        ref = obj.get("space")
        if ref is None:
            raise StructuralError("molecule file names no space and --space was not given")
        if isinstance(ref, dict):
            space = space_from_dict(ref)
        else:
            p = Path(ref)
            space = load_space(p if p.is_absolute() else mol_path.parent / p)
    space = checked(space)
    coeffs = np.asarray(obj["coeffs"], dtype=float)
    if coeffs.shape == (space.n - 1,):
        return Molecule.from_delta(space, coeffs)
    return Molecule(space, coeffs)


def cmd_norm(args) -> int:
    try:
        mol = _load_molecule(args)
        cert = norm(mol, args.method, args.cap)
    except ResourceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (StructuralError, ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    json.dump(cert.to_json(), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return EXIT_OK


# -- verify ---------------------------------------------------------------------------

CONFIG_KEYS = {"suite", "p", "max_points", "seed", "out", "workers", "tolerance"}


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; blank lines and ``#`` comments are ignored."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise StructuralError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise StructuralError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = val
    return out


def _p_list(text) -> list[float] | None:
    if text is None:
        return None
    vals = []
    for tok in str(text).replace(",", " ").split():
        if "/" in tok:
            a, b = tok.split("/")
            vals.append(float(a) / float(b))
        else:
            vals.append(float(tok))
    if any(not 0 < v <= 1 for v in vals):
        raise StructuralError("every p must lie in (0, 1]")
    return vals


def resolve_verify_config(args) -> dict:
    cfg = {"suite": "all", "p": None, "max_points": None, "seed": "42", "out": None, "workers": None, "tolerance": None}
    if args.config:
        cfg.update(read_config(args.config))
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    if cfg["suite"] not in acceptance.SUITES:
        raise StructuralError(f"unknown suite {cfg['suite']!r}; choose from {sorted(acceptance.SUITES)}")
    mp = cfg["max_points"]
    if mp is not None:
        mp = int(mp)
        if not 2 <= mp <= ENUMERATE_CAP:
            raise StructuralError(f"max-points must lie in [2, {ENUMERATE_CAP}]")
    return {
        "suite": cfg["suite"],
        "ps": _p_list(cfg["p"]),
        "max_points": mp,
        "seed": int(cfg["seed"]),
        "out": cfg["out"],
        "workers": int(cfg["workers"]) if cfg["workers"] is not None else (os.cpu_count() or 1),
        "tolerance": float(cfg["tolerance"]) if cfg["tolerance"] is not None else None,
    }


def _run_one(job):
    cid, seed, ps, mp = job
    return acceptance.run(cid, seed=seed, ps=ps, max_points=mp)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_csv(path: Path, results, tol: float) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in results:
            for inst, p, bound, measured, margin in r.rows:
                status = "pass" if margin >= -tol else "fail"
                w.writerow([r.cid, inst, _fmt(p), _fmt(bound), _fmt(measured), _fmt(margin), status])


def cmd_verify(args) -> int:
    try:
        cfg = resolve_verify_config(args)
    except (StructuralError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    ids = acceptance.SUITES[cfg["suite"]]
    jobs = [(cid, cfg["seed"], cfg["ps"], cfg["max_points"]) for cid in ids]
    if cfg["workers"] > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg["workers"], len(jobs))) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]

    row_tol = 1e-9 if cfg["tolerance"] is None else cfg["tolerance"]
    failed = 0
    for r in results:
        bad_rows = [row for row in r.rows if row[4] < -row_tol]
        passed = r.passed if cfg["tolerance"] is None else not bad_rows
        failed += not passed
        print(r.line(passed))
        if not passed:
            for row in bad_rows[:5]:
                print(f"    failing row: instance={row[0]} p={row[1]:.6g} bound={row[2]:.6g} measured={row[3]:.6g}")
    print(f"summary: {len(results) - failed} passed, {failed} failed ({cfg['suite']})")

    if cfg["out"]:
        out = Path(cfg["out"])
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / f"{cfg['suite']}_report.csv", results, row_tol)
        summary = {
            "suite": cfg["suite"],
            "seed": cfg["seed"],
            "criteria": [{"id": r.cid, "name": r.name, "passed": r.passed, "summary": r.summary} for r in results],
        }
        (out / f"{cfg['suite']}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK if failed == 0 else EXIT_FAIL


# -- parser -----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lipfree", description="Norms and verification suites for finite Lipschitz free p-spaces.")
    sub = ap.add_subparsers(dest="command", required=True)

    pn = sub.add_parser("norm", help="quasinorm of a molecule, with primal and dual certificates")
    pn.add_argument("--space", help="space JSON file (overrides the molecule's own reference)")
    pn.add_argument("--molecule", required=True, help="molecule JSON file")
    pn.add_argument("--method", default="auto", choices=["auto", "lp", "enumerate", "brute", "bounds_only"])
    pn.add_argument("--cap", type=int, default=ENUMERATE_CAP, help="largest space size for exact enumeration")
    pn.set_defaults(func=cmd_norm)

    pv = sub.add_parser("verify", help="run acceptance suites and write reports")
    pv.add_argument("--suite", choices=sorted(acceptance.SUITES))
    pv.add_argument("--p", help="comma-separated exponents overriding each check's defaults, e.g. 1/2,1")
    pv.add_argument("--max-points", dest="max_points", type=int)
    pv.add_argument("--seed", type=int)
    pv.add_argument("--out", help="directory for CSV and JSON reports")
    pv.add_argument("--workers", type=int, help="parallel processes (default: all cores)")
    pv.add_argument("--tolerance", type=float, help="judge every report row with this slack instead of the built-in one")
    pv.add_argument("--config", help="flat key = value file; flags given here win")
    pv.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
