"""Command-line entry point wiring the verification and production pipelines.

Every artifact gets a sidecar manifest (config echo, package version,
timings) and carries the hash of the producing configuration, so re-running
the same configuration and seed reproduces it byte for byte.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IDENTITY = 3
EXIT_NUMERICAL = 4


def _version() -> str:
    from . import __version__

    return __version__


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def write_manifest(artifact_path: str, config: dict, timings: dict) -> None:
    manifest = {
        "config": config,
        "config_hash": config_hash(config),
        "version": _version(),
        "timings": {k: round(v, 3) for k, v in timings.items()},
    }
    with open(artifact_path + ".manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def n_threads() -> int:
    try:
        return max(1, int(os.environ.get("SHAPEDECOMP_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def _verify_shapes(report: list) -> None:
    from . import harmonics, shapes

    harmonics.check_syzygies("x")
    report.append(("syzygies", "pass"))
    dims = harmonics.degree_dimensions(3)
    if dims != (1, 2, 2, 1):
        raise shapes.TableMismatch(f"degree counts {dims}")
    report.append(("degree_counts", "pass"))
    shapes.canonical_shapes()
    report.append(("shape_table", "pass"))
    shapes.verify_q_basis_consistency()
    report.append(("q_basis", "pass"))
    if not shapes.septiplet_identity():
        raise shapes.TableMismatch("septiplet identity failed")
    report.append(("septiplet", "pass"))
    shapes.verify_derivative_span()
    report.append(("derivative_span", "pass"))


def _verify_group(report: list) -> None:
    from . import symgroup

    for name, msg in symgroup.verify_character_identities().items():
        report.append((name, msg))
    for name, msg in symgroup.verify_rep_matrices().items():
        report.append((f"rep_{name}", msg))


def _verify_decompose(report: list, seed: int = 12345) -> None:
    import random

    from . import decompose
    from .harmonics import vandermonde
    from .ringcore import Poly9, linear_combination
    from .shapes import canonical_shapes
    from .symgroup import ETA_BAR_TABLE

    rng = random.Random(seed)
    pts = []
    while len(pts) < 5:
        pt = [Fraction(rng.randrange(-9, 10), rng.randrange(1, 7)) for _ in range(9)]
        if all(vandermonde(a).evaluate(pt) != 0 for a in "xyz"):
            pts.append(pt)
    for name, msg in decompose.verify_block_inverses(pts).items():
        report.append((f"inverse_{name}", msg))
    if decompose.eta_bar_from_extraction() != ETA_BAR_TABLE:
        raise decompose.TableMismatch("eta-bar re-derivation disagrees")
    report.append(("eta_bar_rederived", "pass"))

    ss = canonical_shapes()
    e1 = [Poly9.variable(a, 1) + Poly9.variable(a, 2) + Poly9.variable(a, 3)
          for a in "xyz"]
    coeffs = [Poly9.constant(rng.randrange(1, 7)) * e1[i % 3] for i in range(36)]
    psi = linear_combination((1, c * s) for c, s in zip(coeffs, ss.shapes))
    bv = decompose.extract_bosonic_symbolic(psi)
    if any(bv.phi[i] != coeffs[i] for i in range(36)):
        raise decompose.TableMismatch("selftest round trip failed")
    report.append(("roundtrip", "pass"))


def cmd_verify(args) -> int:
    report: list = []
    t0 = time.time()
    targets = ("shapes", "group", "decompose") if args.target == "all" \
        else (args.target,)
    for t in targets:
        {"shapes": _verify_shapes, "group": _verify_group,
         "decompose": _verify_decompose}[t](report)
    width = max(len(k) for k, _ in report)
    for key, msg in report:
        print(f"{key:<{width}}  {msg}")
    print(f"all checks passed in {time.time() - t0:.1f}s")
    return EXIT_OK


# ---------------------------------------------------------------------------
# shapes dump
# ---------------------------------------------------------------------------

def cmd_shapes_dump(args) -> int:
    from .shapes import BLOCKS, canonical_shapes

    ss = canonical_shapes()
    payload = {
        "blocks": [list(b) for b in BLOCKS],
        "shapes": [
            {"index": i, "degree": ss.degrees[i], "block": ss.block_of(i),
             "poly": s.to_json_obj()}
            for i, s in enumerate(ss.shapes)
        ],
    }
    text = json.dumps(payload, indent=1) + "\n"
    if args.out:
        config = {"command": "shapes dump", "format": args.format,
                  "out": args.out}
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        write_manifest(args.out, config, {})
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------

def cmd_decompose(args) -> int:
    from . import decompose
    from .ringcore import Poly9

    if args.selftest:
        report: list = []
        _verify_decompose(report)
        for key, msg in report:
            print(f"{key}  {msg}")
        return EXIT_OK
    if not args.input:
        print("error: --input or --selftest required", file=sys.stderr)
        return EXIT_VALIDATION
    with open(args.input, encoding="utf-8") as fh:
        psi = Poly9.from_json(fh.read())
    config = {"command": "decompose", "input": args.input, "mode": args.mode,
              "point": args.point}
    t0 = time.time()
    if args.mode == "symbolic":
        bv = decompose.extract_bosonic_symbolic(psi)
        payload = {"mode": "symbolic",
                   "config_hash": config_hash(config),
                   "phi": [p.to_json_obj() for p in bv.phi]}
    else:
        if not args.point or len(args.point) != 9:
            print("error: numeric mode needs --point with 9 floats",
                  file=sys.stderr)
            return EXIT_VALIDATION
        point = np.array(args.point, dtype=float)
        fn = lambda pts: np.asarray(
            psi.evaluate([np.asarray(pts)[..., i] for i in range(9)])
        )
        bv = decompose.extract_bosonic_numeric(fn, point, eps=args.eps)
        payload = {"mode": "numeric", "config_hash": config_hash(config),
                   "point": list(map(float, point)),
                   "phi": [float(v) for v in bv.phi]}
    text = json.dumps(payload, indent=1) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        write_manifest(args.out, config, {"total": time.time() - t0})
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# ecg
# ---------------------------------------------------------------------------

def cmd_ecg_optimize(args) -> int:
    from . import ecg

    sizes = [int(s) for s in args.sizes.split(",")]
    config = {"command": "ecg optimize", "sizes": sizes, "seed": args.seed,
              "cycles": args.cycles, "trials": args.trials}
    t0 = time.time()
    basis = ecg.optimize_basis(sizes, seed=args.seed, n_cycles=args.cycles,
                               trials_per_param=args.trials)
    payload = basis.to_dict()
    payload["config_hash"] = config_hash(config)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    write_manifest(args.out, config, {"total": time.time() - t0})
    print(f"stages: {basis.stage_history}")
    print(f"final energy {basis.energy:.7f} hartree at size {basis.size}")
    if basis.stall:
        print("warning: optimizer stalled before exhausting its budget")
    return EXIT_OK


def cmd_ecg_weights(args) -> int:
    from . import ecg

    with open(args.basis, encoding="utf-8") as fh:
        basis = ecg.ECGBasis.from_dict(json.load(fh))
    if basis.coefficients is None:
        ecg.normalize(basis)
    config = {"command": "ecg weights", "basis": args.basis, "out": args.out}
    t0 = time.time()
    bw = ecg.block_amplitudes(basis)
    lines = ["# shapedecomp block weights", f"# config_hash={config_hash(config)}",
             f"# basis_size={bw.basis_size}",
             f"# energy={float(bw.energy)!r}", "k,a_k,w_k"]
    for k in range(11):
        lines.append(f"{k},{float(bw.a[k])!r},{float(bw.w[k])!r}")
    text = "\n".join(lines) + "\n"
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    write_manifest(args.out, config, {"total": time.time() - t0})
    print(f"sum of weights: {bw.w.sum():.12f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

def cmd_density(args) -> int:
    from . import density, ecg

    with open(args.basis, encoding="utf-8") as fh:
        basis = ecg.ECGBasis.from_dict(json.load(fh))
    if basis.coefficients is None:
        ecg.normalize(basis)
    config = {"command": "density", "basis": args.basis, "kind": args.kind,
              "grid": args.grid, "seed": args.seed, "budget": args.budget}
    t0 = time.time()
    kind = args.kind
    lo, hi, n = density.parse_grid_spec(args.grid)
    if kind == "rho" or n_threads() == 1:
        grid = density.density_grid(basis, kind, args.grid, seed=args.seed,
                                    budget=args.budget)
    else:
        # thread over grid points; per-point seeds keep the result
        # independent of the worker count
        step = (hi - lo) / (n - 1)
        grid = density.DensityGrid(
            kind, np.array([lo] * 3), np.array([step] * 3), (n, n, n),
            np.empty(n ** 3))
        pts = grid.points()
        i = int(kind[1:])

        def work(k):
            val, _ = density.bosonic_density(
                basis, i, pts[k], budget=args.budget, seed=args.seed + k)
            return k, val

        with ThreadPoolExecutor(max_workers=n_threads()) as pool:
            for k, val in pool.map(work, range(len(pts))):
                grid.values[k] = val
    grid.write(args.out, config_hash(config))
    write_manifest(args.out, config, {"total": time.time() - t0})
    print(f"wrote {args.out} ({n}^3 points, kind {kind})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="shapedecomp",
        description="Shape decomposition of three-fermion wave functions "
                    "and the lithium quartet ECG analysis.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run exact identity suites")
    v.add_argument("target", choices=["shapes", "group", "decompose", "all"])
    v.set_defaults(func=cmd_verify)

    sh = sub.add_parser("shapes", help="shape table utilities")
    shsub = sh.add_subparsers(dest="subcommand", required=True)
    dump = shsub.add_parser("dump", help="emit the 36 expanded shapes")
    dump.add_argument("--format", choices=["json"], default="json")
    dump.add_argument("--out", default=None)
    dump.set_defaults(func=cmd_shapes_dump)

    d = sub.add_parser("decompose", help="extract bosonic coefficients")
    d.add_argument("--input", default=None, help="Poly9 JSON file")
    d.add_argument("--mode", choices=["symbolic", "numeric"], default="symbolic")
    d.add_argument("--point", type=float, nargs="*", default=None)
    d.add_argument("--eps", type=float, default=1e-6)
    d.add_argument("--out", default=None)
    d.add_argument("--selftest", action="store_true")
    d.set_defaults(func=cmd_decompose)

    e = sub.add_parser("ecg", help="variational solver")
    esub = e.add_subparsers(dest="subcommand", required=True)
    opt = esub.add_parser("optimize")
    opt.add_argument("--sizes", default="1,2,3,4,6,9")
    opt.add_argument("--seed", type=int, default=7)
    opt.add_argument("--cycles", type=int, default=10)
    opt.add_argument("--trials", type=int, default=60)
    opt.add_argument("--out", required=True)
    opt.set_defaults(func=cmd_ecg_optimize)
    wts = esub.add_parser("weights")
    wts.add_argument("--basis", required=True)
    wts.add_argument("--out", required=True)
    wts.set_defaults(func=cmd_ecg_weights)

    de = sub.add_parser("density", help="density fields on a grid")
    de.add_argument("--basis", required=True)
    de.add_argument("--kind", default="rho",
                    help="rho or D<i> for a bosonic density, e.g. D32")
    de.add_argument("--grid", default="-0.5:0.5:21")
    de.add_argument("--seed", type=int, default=0)
    de.add_argument("--budget", type=int, default=4000)
    de.add_argument("--out", required=True)
    de.set_defaults(func=cmd_density)
    return ap


def main(argv=None) -> int:
    from .decompose import NearSingularError, SingularPointError
    from .density import BudgetExhaustedError
    from .ecg import (IllConditionedOverlapError, NegativeBlockNormError,
                      NotNegativeDefiniteError)
    from .harmonics import SyzygyViolation
    from .ringcore import NotAlternatingError, NotDivisibleError
    from .shapes import SpanFailure
    from .symgroup import TableMismatch

    argv = list(sys.argv[1:] if argv is None else argv)
    # glue option values that begin with '-' (e.g. --grid -0.5:0.5:21)
    for flag in ("--grid",):
        while flag in argv:
            i = argv.index(flag)
            if i + 1 < len(argv):
                argv[i:i + 2] = [f"{flag}={argv[i + 1]}"]
            else:
                break
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NotAlternatingError, ValueError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (TableMismatch, SyzygyViolation, SpanFailure,
            NotDivisibleError) as exc:
        print(f"identity check failed: {exc}", file=sys.stderr)
        return EXIT_IDENTITY
    except (NearSingularError, SingularPointError, NotNegativeDefiniteError,
            IllConditionedOverlapError, NegativeBlockNormError,
            BudgetExhaustedError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
