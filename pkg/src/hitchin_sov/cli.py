"""Command line front end: ``hitchin-sov <command> ...``.

All inputs and outputs are JSON; complex numbers are [re, im] pairs and
matrices nested lists of them. Output is written with sorted keys so that a
run with a fixed ``--seed`` is byte-for-byte reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .curves import random_base_curve
from .diffper import (
    OrbitBase,
    angle_coordinates,
    curve_samples,
    cut_from_json,
    orbit_base,
    path_between,
    period_matrix,
    prym_map_so4,
    prym_path_identities,
    reintegrate_normalization,
)
from .dynamics import PhaseState, current_hamiltonians, flow
from .errors import EXIT_CODES, HitchinError, HypothesisViolated, SchemaError
from .product import (
    build_product,
    factorization_identity,
    product_branch_count,
    product_differentials_match,
    product_genus,
)
from .sov import SeparatingDivisor, sample_divisor, same_up_to_q_sign, solve_hamiltonians
from .spectral import (
    SpectralModel,
    SpectralPoint,
    branch_points,
    expected_counts,
    gluing_summary,
    parse_complex,
    parse_complex_list,
    random_hamiltonians,
    singular_points,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VERIFY_FAILED = 4
EXIT_BAD_ARGUMENT = 5
EXIT_IO = 6
EXIT_INTERNAL = 7


def _exit_code_help() -> str:
    rows = [
        (EXIT_OK, "success"),
        (EXIT_USAGE, "command line usage error"),
        (EXIT_VERIFY_FAILED, "verification suite failed"),
        (EXIT_BAD_ARGUMENT, "invalid argument value"),
        (EXIT_IO, "input file missing or unreadable"),
        (EXIT_INTERNAL, "unexpected internal error"),
    ]
    rows += [(code, name) for name, code in EXIT_CODES.items()]
    return "exit codes:\n" + "\n".join(f"  {c:>3}  {n}" for c, n in sorted(rows))


# --- JSON helpers -----------------------------------------------------------------


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=True) + "\n"


def read_json(path, what: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {what} file {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}", what) from exc


def load_model(path):
    """Model JSON, either bare or under a ``model`` key; returns (model, H or None)."""
    data = read_json(path, "model")
    if isinstance(data, dict) and "model" in data and "lie" not in data:
        data = data["model"]
    return SpectralModel.from_json(data)


def load_H(path, m: SpectralModel):
    data = read_json(path, "H")
    where = "H"
    if isinstance(data, dict):
        if "H" not in data:
            raise SchemaError("missing field 'H'", "H")
        data, where = data["H"], "H.H"
    H = parse_complex_list(data, where)
    if len(H) != m.N:
        raise SchemaError(f"expected {m.N} entries, got {len(H)}", where)
    return H


def resolve_H(args, m, H_model):
    if getattr(args, "H", None):
        return load_H(args.H, m)
    if H_model is None:
        raise SchemaError("no Hamiltonians: pass --H or include 'H' in the model", "model.H")
    return H_model


def load_divisor(path, what="divisor") -> SeparatingDivisor:
    data = read_json(path, what)
    if isinstance(data, dict) and what in data and "points" not in data:
        data = data[what]
    return SeparatingDivisor.from_json(data)


def load_point(path, m, H, what="base") -> SpectralPoint:
    data = read_json(path, what)
    if not isinstance(data, dict):
        raise SchemaError("expected an object", what)
    for key in ("x", "y", "lambda"):
        if key not in data:
            raise SchemaError(f"missing field {key!r}", what)
    x, y, lam = (parse_complex(data[k], f"{what}.{k}") for k in ("x", "y", "lambda"))
    res = float(m.relative_residual(H, x, y, lam))
    dy = abs(y * y - m.base.P(x)) / max(1.0, abs(x)) ** (2 * m.g + 1)
    if res > 1e-8 or dy > 1e-8:
        raise HypothesisViolated(f"{what} point is not on the spectral curve (residual {max(res, dy):.2e})")
    return SpectralPoint(x, y, lam, what)


# --- commands ---------------------------------------------------------------------


def cmd_describe(args):
    exp = expected_counts(args.lie, args.genus)
    out = {"expected": exp}
    rng = np.random.default_rng(args.seed)
    m = SpectralModel(args.lie, random_base_curve(args.genus, rng))
    try:
        m, H = harness.generic_model(args.lie, args.genus, rng)
        nb = len(branch_points(m, H))
        ns = len(singular_points(m, H)) if m.lie.series == "D" else 0
        out["numeric"] = {"branch_points": nb, "singular_points": ns, "gluing": gluing_summary(m, nu=nb).to_json()}
    except HitchinError as exc:
        out["numeric"] = None
        out["numeric_unavailable"] = str(exc)
    out["gluing"] = gluing_summary(m, nu=exp["branch_points"]).to_json()
    out["labels"] = m.layout.labels()
    if args.json:
        return out, None
    lines = [f"{exp['lie']} over a genus {exp['genus']} base"]
    for key in ("dim_g", "N", "n", "degrees", "branch_points", "singular_points", "spectral_genus"):
        num = ""
        if key in ("branch_points", "singular_points") and out["numeric"]:
            num = f"   (counted: {out['numeric'][key]})"
        lines.append(f"  {key:<16} {exp[key]}{num}")
    gl = out["gluing"]
    lines.append(
        f"  gluing           {gl['sheets']} sheets, {gl['cuts']} cuts ({gl['independent_cuts']} independent), "
        f"{gl['total_cycles']} cycles"
    )
    return out, "\n".join(lines)


def cmd_sample(args):
    rng = np.random.default_rng(args.seed)
    if args.model:
        m, H = load_model(args.model)
        if H is None:
            H = random_hamiltonians(m, rng)
    else:
        if args.lie is None or args.genus is None:
            raise ValueError("sample needs --model or both --lie and --genus")
        m = SpectralModel(args.lie, random_base_curve(args.genus, rng))
        H = random_hamiltonians(m, rng)
    d = sample_divisor(m, H, seed=int(rng.integers(2**63)), radius=args.radius)
    return {"model": m.to_json(H), "divisor": d.to_json()}, None


def cmd_solve(args):
    m, H_model = load_model(args.model)
    d = load_divisor(args.divisor)
    if len(d) != m.N:
        raise SchemaError(f"expected {m.N} points, got {len(d)}", "divisor.points")
    rep = solve_hamiltonians(m, d, method=args.method)
    out = rep.to_json()
    if H_model is not None and rep.H is not None:
        # so(4) divisors can fit several H; compare with the nearest candidate
        cands = rep.candidates or [rep.H]
        dist = [same_up_to_q_sign(m, c, H_model) for c in cands]
        out["error_vs_model_H"] = float(min(dist))
        out["matching_candidate"] = int(np.argmin(dist))
    return out, None


def cmd_flow(args):
    m, H_model = load_model(args.model)
    s0 = PhaseState.from_divisor(load_divisor(args.state, "divisor"))
    if len(s0.x) != m.N:
        raise SchemaError(f"expected {m.N} points, got {len(s0.x)}", "divisor.points")
    if not 0 <= args.hamiltonian < m.N:
        raise ValueError(f"--hamiltonian must lie in 0..{m.N - 1}")
    H = H_model if H_model is not None else current_hamiltonians(m, s0)
    tr = flow(m, s0, args.hamiltonian, args.t, rtol=args.rtol, H=H, track_phi=False)
    out = tr.to_json()
    out["final_state"] = tr.state().to_json()
    if tr.H is not None:
        out["H_end"] = tr.H[-1]
    return out, None


def _load_cuts(path, m, H):
    data = read_json(path, "cuts")
    if isinstance(data, dict):
        if "cuts" not in data:
            raise SchemaError("missing field 'cuts'", "cuts")
        data, where = data["cuts"], "cuts.cuts"
    else:
        where = "cuts"
    if isinstance(data, str):
        return data
    if not isinstance(data, list):
        raise SchemaError("expected a cut-system name or a list of cuts", where)
    return [cut_from_json(c, f"{where}[{i}]") for i, c in enumerate(data)]


def cmd_periods(args):
    m, H_model = load_model(args.model)
    H = resolve_H(args, m, H_model)
    cuts = _load_cuts(args.cuts, m, H) if args.cuts else "auto"
    pd = period_matrix(m, H, cuts)
    out = pd.to_json()
    out["condition"] = float(np.linalg.cond(pd.Ainv))
    if args.reintegrate:
        R = reintegrate_normalization(pd)
        out["reintegration_deviation"] = float(np.abs(R - np.eye(m.N)).max())
    return out, None


def cmd_angles(args):
    m, H_model = load_model(args.model)
    H = resolve_H(args, m, H_model)
    d = load_divisor(args.divisor)
    base = load_point(args.base, m, H) if args.base else None
    res = angle_coordinates(m, H, d, base=base)
    out = res.to_json()
    b = res.base
    if isinstance(b, OrbitBase):
        out["base"] = {"orbit": [{"x": p.x, "y": p.y, "lambda": p.lam} for p in (b.Q1, b.Q2)]}
    else:
        out["base"] = {"x": b.x, "y": b.y, "lambda": b.lam}
    return out, None


def cmd_prym(args):
    m, H_model = load_model(args.model)
    H = resolve_H(args, m, H_model)
    if str(m.lie) != "D2":
        raise ValueError("prym works with D2 models")
    rng = np.random.default_rng(args.seed)
    out = {"identities": prym_path_identities(m, H, rng, args.paths)}
    if args.point:
        P = load_point(args.point, m, H, "point")
        ob = orbit_base(m, H)
        gamma, _ = path_between(m, H, ob.Q1, P)
        out["eta"] = prym_map_so4(m, H, P, ob.Q1, ob.Q2, ob.rho, gamma).eta
    return out, None


def cmd_product(args):
    m, H_model = load_model(args.model)
    H = resolve_H(args, m, H_model)
    pc = build_product(m, H)
    cnt = product_branch_count(pc)
    rng = np.random.default_rng(args.seed)
    x, y, lam = curve_samples(m, H, rng, args.points)
    mr = product_differentials_match(pc, m, H, x, y, lam)
    lhs, rhs = factorization_identity(pc)
    tol = 1e-10 if args.tol is None else args.tol
    return {
        "curve": pc.to_json(),
        "branch_count": cnt.to_json(),
        "genus": product_genus(pc, cnt),
        "expected": {"genus": 3 * (m.g - 1), "total": 6 * m.g - 4},
        "differentials": mr.to_json(),
        "differentials_ok": mr.max_relative_deviation < tol,
        "factorization_exact": lhs == rhs,
    }, None


def cmd_verify(args):
    names = harness.SUITES if args.suite == "all" else (args.suite,)
    reports = [harness.run_suite(n, args.seed, args.tol) for n in names]
    out = {"passed": all(r.passed for r in reports), "suites": [r.to_json() for r in reports]}
    text = "\n\n".join(r.table() for r in reports)
    return out, text


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def globals_parser(suppress: bool):
        # the sub-command copy must not overwrite values given before the command
        dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        g = argparse.ArgumentParser(add_help=False)
        g.add_argument("--seed", type=int, default=dflt(0), help="random seed (default 0)")
        g.add_argument(
            "--tol", type=float, default=dflt(None),
            help="override the pass threshold of verify checks and of the product match",
        )
        g.add_argument("--json", action="store_true", default=dflt(False), help="JSON output for describe and verify")
        g.add_argument("--out", type=Path, default=dflt(None), help="write the JSON result to this file")
        return g

    common = globals_parser(False)
    sub_common = globals_parser(True)

    p = argparse.ArgumentParser(
        prog="hitchin-sov",
        description="Separation of variables for Hitchin systems of classical type over hyperelliptic curves.",
        epilog=_exit_code_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
        parents=[common],
    )
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_, parents=[sub_common], epilog=_exit_code_help(),
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=func)
        return sp

    sp = add("describe", cmd_describe, "dimensions, branch counts and genus for a Lie type and base genus")
    sp.add_argument("lie", help="Lie type such as A1, B2, C2, D2")
    sp.add_argument("genus", type=int, help="genus of the base curve (>= 2)")

    sp = add("sample", cmd_sample, "random model, Hamiltonians and separating divisor")
    sp.add_argument("--lie")
    sp.add_argument("--genus", type=int)
    sp.add_argument("--model", help="use the base curve (and H, if present) of this model")
    sp.add_argument("--radius", type=float, default=1.0, help="scale of the sampled x_i (default 1)")

    sp = add("solve", cmd_solve, "recover the Hamiltonians from a separating divisor")
    sp.add_argument("--model", required=True)
    sp.add_argument("--divisor", required=True)
    sp.add_argument("--method", choices=["linear", "cramer", "radicals", "newton"], default=None)

    sp = add("flow", cmd_flow, "integrate the Hamiltonian flow of H_j")
    sp.add_argument("--model", required=True)
    sp.add_argument("--state", required=True, help="divisor JSON of the initial point")
    sp.add_argument("--hamiltonian", type=int, required=True, help="index j of H_j, counted from 0")
    sp.add_argument("--t", type=float, default=1.0, help="end time (default 1.0)")
    sp.add_argument("--rtol", type=float, default=1e-10, help="integrator relative tolerance (default 1e-10)")

    sp = add("periods", cmd_periods, "period matrix of the angle differentials and its inverse")
    sp.add_argument("--model", required=True)
    sp.add_argument("--H")
    sp.add_argument("--cuts", help="cut system: a name, or a list of cuts as written by this command")
    sp.add_argument("--reintegrate", action="store_true", help="check the normalisation on independent loops")

    sp = add("angles", cmd_angles, "angle coordinates of a divisor")
    sp.add_argument("--model", required=True)
    sp.add_argument("--divisor", required=True)
    sp.add_argument("--base", help="base point JSON {x, y, lambda}; default chosen automatically")
    sp.add_argument("--H")

    sp = add("prym", cmd_prym, "Prym path identities and the Prym map for so(4)")
    sp.add_argument("--model", required=True)
    sp.add_argument("--H")
    sp.add_argument("--point", help="point JSON {x, y, lambda} to map")
    sp.add_argument("--paths", type=int, default=10, help="number of random paths (default 10)")

    sp = add("product", cmd_product, "product of the sl(2) spectral curve with the base curve")
    sp.add_argument("--model", required=True)
    sp.add_argument("--H")
    sp.add_argument("--points", type=int, default=50, help="sample points for the differential match (default 50)")

    sp = add("verify", cmd_verify, "run verification suites")
    sp.add_argument("suite", choices=list(harness.SUITES) + ["all"])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out, text = args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return exc.exit_code
    except HitchinError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid argument: {exc}", file=sys.stderr)
        return EXIT_BAD_ARGUMENT
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    payload = dumps(out)
    if args.out is not None:
        args.out.write_text(payload)
    if text is not None and not args.json:
        print(text)
    elif args.out is None:
        sys.stdout.write(payload)
    if args.command == "verify" and not out["passed"]:
        return EXIT_VERIFY_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
