"""``hermsos`` command line front end.

Exit codes: 0 success, 1 input error, 2 search exhausted, 3 hypothesis
violation, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

import numpy as np

from . import certify as cert_mod
from .forms import (DegenerateInputError, DimensionError, FormatError, fubini_study, load_form,
                    norm_power, sgcs_sample_check)
from .projective import (ExactModeError, OperatorSetup, asymptotic_sweep, fitted_constant,
                         gram_matrix, operator_matrix, section_from_spec)
from .quadlab import (DecompositionReport, InfeasibleRadius, QuadratureError, QuadratureGrid,
                      decompose, lemma52, lemma52_quadrature, radius_schedule)
from .series import ChartRadiusError, SGCS2Violation, TemplateError

EXIT_OK, EXIT_INPUT, EXIT_EXHAUSTED, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, msg, code):
        super().__init__(msg)
        self.code = code


def fmt(x) -> str:
    return format(float(x), ".17g")


def child_seed(seed: int, stream: int) -> int:
    """Independent integer seed for one consumer, derived from the run seed."""
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


def parse_m_range(text: str) -> list:
    """``"a..b"`` (inclusive) or a comma list."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            out = list(range(int(lo), int(hi) + 1))
        else:
            out = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(f"bad m range {text!r}", EXIT_INPUT) from None
    if not out:
        raise CliError(f"empty m range {text!r}", EXIT_INPUT)
    return out


def parse_radius(text: str):
    if text == "auto":
        return None
    if text.startswith("fixed:"):
        try:
            r = float(text[6:])
        except ValueError:
            r = -1.0
        if r > 0:
            return r
    raise CliError(f"radius must be 'auto' or 'fixed:<positive value>', got {text!r}", EXIT_INPUT)


def parse_form_spec(text: str, N: int):
    """``fs:e`` for a norm power, ``1`` for the constant form, otherwise a JSON path."""
    if text == "1":
        return norm_power(0, N)
    if text.startswith("fs:"):
        return norm_power(int(text[3:]), N)
    return load_form(text)


class Output:
    def __init__(self, path):
        self.path = path
        self.buf = io.StringIO()

    def write(self, text):
        self.buf.write(text)

    def close(self):
        text = self.buf.getvalue()
        if self.path:
            with open(self.path, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _csv(out, rows):
    w = csv.writer(out, lineterminator="\n")
    for r in rows:
        w.writerow(r)


# ---------------------------------------------------------------------------
# subcommands


# largest m used for the certify report's fitted constant; exact sweeps grow fast with N
SWEEP_WINDOW = {2: 60, 3: 12}


def cmd_certify(args, out):
    f = load_form(args.form)
    tol = args.tol if args.tol is not None else cert_mod.PSD_TOL
    try:
        c = cert_mod.minimal_power(f, ell_max=args.ell_max, tol=tol, seed=child_seed(args.seed, 1))
    except cert_mod.HypothesisViolation as e:
        w = [[float(v.real), float(v.imag)] for v in np.asarray(e.witness)]
        out.write(json.dumps({"error": "hypothesis_violation", "min": float(e.value), "witness": w}) + "\n")
        raise CliError(str(e), EXIT_HYPOTHESIS) from None
    except cert_mod.SearchExhausted as e:
        out.write(json.dumps({"error": "search_exhausted", "ell_max": e.ell_max,
                              "min_eig_trajectory": [float(v) for v in e.trajectory]}) + "\n")
        raise CliError(str(e), EXIT_EXHAUSTED) from None
    obj = c.to_json()
    # empirical constant from the exact P = 1 sweep on the same projective space
    top = SWEEP_WINDOW.get(f.N)
    obj["C_hat"] = None if top is None else fitted_constant(asymptotic_sweep(f.N, 0, "mono:0", range(1, top + 1)))
    obj["C_hat_m_max"] = top
    out.write(json.dumps(obj) + "\n")


def cmd_operator(args, out):
    setup = OperatorSetup(args.N, args.m, args.e)
    G, K = gram_matrix(setup), operator_matrix(setup)
    B = setup.sections
    mats = (("gram", G), ("operator", K))
    if args.format == "json":
        obj = {"N": args.N, "m": args.m, "e": setup.e, "basis": [list(a) for a in B.indices]}
        for name, M in mats:
            obj[name] = M.strings() if args.exact else [[float(v) for v in row] for row in M.to_float().real]
        out.write(json.dumps(obj, indent=2) + "\n")
        return
    rows = [("matrix", "row", "col", "alpha", "beta", "value")]
    for name, M in mats:
        S = M.strings() if args.exact else None
        F = M.to_float().real
        for i in range(M.shape[0]):
            for j in range(M.shape[1]):
                val = S[i][j] if args.exact else fmt(F[i, j])
                rows.append((name, i, j, " ".join(map(str, B.indices[i])), " ".join(map(str, B.indices[j])), val))
    _csv(out, rows)


def cmd_sweep(args, out):
    e = _sweep_e(args.P)
    ms = parse_m_range(args.m)
    try:
        rows = asymptotic_sweep(args.N, e, args.s, ms)
    except ValueError as err:
        raise CliError(str(err), EXIT_INPUT) from None
    C = fitted_constant(rows)
    if args.format == "json":
        obj = {"rows": [dict(zip(("m", "K_ss", "norm_sq", "err", "scaled_err"), r.floats())) for r in rows],
               "C_hat": C}
        if args.exact:
            for d, r in zip(obj["rows"], rows):
                d["exact"] = {k: str(getattr(r, k)) for k in ("K_ss", "norm_sq", "err", "scaled_err")}
        out.write(json.dumps(obj, indent=2) + "\n")
        return
    head = ["m", "K_ss", "norm_sq", "err", "scaled_err"]
    if args.exact:
        head += ["K_ss_exact", "norm_sq_exact", "err_exact", "scaled_err_exact"]
    table = [head]
    for r in rows:
        line = [r.m] + [fmt(v) for v in r.floats()[1:]]
        if args.exact:
            line += [str(r.K_ss), str(r.norm_sq), str(r.err), str(r.scaled_err)]
        table.append(line)
    _csv(out, table)
    out.write(f"# C_hat={fmt(C)}\n")


def _sweep_e(spec):
    if spec in ("1", "fs:0"):
        return 0
    if spec.startswith("fs:"):
        try:
            return int(spec[3:])
        except ValueError:
            pass
    raise CliError(f"sweep runs in exact mode: P must be '1' or 'fs:<e>', got {spec!r}", EXIT_INPUT)


def cmd_decompose(args, out):
    R = parse_form_spec(args.R, 2) if args.R else fubini_study(2)
    P = parse_form_spec(args.P, 2)
    if R.N != 2 or P.N != 2:
        raise CliError("decompose works on P^1: forms must have N = 2", EXIT_INPUT)
    for name, f in (("R", R), ("P", P)):
        _, _, ok = cert_mod.positivity_margin(f, seed=child_seed(args.seed, 2))
        if not ok:
            raise CliError(f"{name} is not positive on the sphere", EXIT_HYPOTHESIS)
    radius = parse_radius(args.radius)
    grid = QuadratureGrid(args.grid_order)
    reports = []
    for m in parse_m_range(args.m):
        if radius is None:
            try:
                r = radius_schedule(m, 1, args.r9)
            except InfeasibleRadius as e:
                raise CliError(f"{e}; use --radius fixed:VALUE for desk-scale studies", EXIT_INPUT) from None
        else:
            r = radius
        s = section_from_spec(args.s, 2, m * R.d + P.d)
        reports.append(decompose(R, P, m, s, r, grid))
    if args.format == "json":
        keys = DecompositionReport.CSV_HEADER.split(",")
        out.write(json.dumps([dict(zip(keys, map(float, rep.row()))) for rep in reports], indent=2) + "\n")
        return
    table = [DecompositionReport.CSV_HEADER.split(",")]
    table += [[rep.m] + [fmt(v) for v in rep.row()[1:]] for rep in reports]
    _csv(out, table)


def cmd_lemma52(args, out):
    try:
        a = Fraction(args.a)
    except (ValueError, ZeroDivisionError):
        raise CliError(f"bad value for a: {args.a!r}", EXIT_INPUT) from None
    try:
        v = lemma52(args.n, args.k, a, args.m)
    except ValueError as e:
        raise CliError(str(e), EXIT_INPUT) from None
    out.write(f"{v}\n{fmt(v)}\n")
    if args.check:
        q = lemma52_quadrature(args.n, args.k, a, args.m)
        rel = abs(q - float(v)) / abs(float(v))
        ok = rel <= (args.tol if args.tol is not None else 1e-10)
        out.write(f"quadrature {fmt(q)} rel_err {rel:.3e} {'match' if ok else 'MISMATCH'}\n")
        if not ok:
            raise CliError("quadrature cross-check failed", EXIT_NUMERIC)


def cmd_sgcs_check(args, out):
    R = load_form(args.form)
    rep = sgcs_sample_check(R, num_samples=args.samples, seed=child_seed(args.seed, 3))
    obj = {"num_pairs": rep.num_pairs, "max_psi": rep.max_psi, "min_ratio": rep.min_ratio,
           "min_hessian_eig": rep.min_hessian_eig, "sgcs1": rep.sgcs1_ok, "sgcs2": rep.sgcs2_ok}
    out.write(json.dumps(obj, indent=2) + "\n")
    if not rep.ok:
        raise CliError("sampled SGCS condition fails", EXIT_HYPOTHESIS)


# ---------------------------------------------------------------------------
# parser


def _add_common(p, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--seed", type=int, default=d(42))
    p.add_argument("--tol", type=float, default=d(None))
    p.add_argument("--out", default=d(None), help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=d("csv"))
    p.add_argument("--exact", action="store_true", default=d(False))
    p.add_argument("--grid-order", type=int, default=d(96))
    p.add_argument("--radius", default=d("fixed:0.4"), help="auto | fixed:VALUE")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hermsos", description=__doc__.splitlines()[0])
    _add_common(p, False)
    sub = p.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, True)

    c = sub.add_parser("certify", parents=[common], help="find the minimal norm power giving a sum of squares")
    c.add_argument("form")
    c.add_argument("--ell-max", type=int, default=cert_mod.ELL_MAX)
    c.set_defaults(func=cmd_certify)

    o = sub.add_parser("operator", parents=[common], help="exact Gram and operator matrices")
    o.add_argument("--N", type=int, required=True)
    o.add_argument("--m", type=int, required=True)
    o.add_argument("--e", type=int, default=0)
    o.set_defaults(func=cmd_operator)

    s = sub.add_parser("sweep", parents=[common], help="exact asymptotic sweep over m")
    s.add_argument("--N", type=int, required=True)
    s.add_argument("--P", default="1", help="'1' or 'fs:<e>'")
    s.add_argument("--s", default="mono:0", help="mono:<index> or pattern:c0,c1,...")
    s.add_argument("--m", default="1..60", help="a..b or comma list")
    s.set_defaults(func=cmd_sweep)

    d = sub.add_parser("decompose", parents=[common], help="ball/complement split on P^1")
    d.add_argument("--m", default="4,16,64")
    d.add_argument("--R", default=None, help="JSON path (default Fubini-Study)")
    d.add_argument("--P", default="1", help="'1', 'fs:<e>' or JSON path")
    d.add_argument("--s", default="mono:0")
    d.add_argument("--r9", type=float, default=0.5, help="upper-bound constant for --radius auto")
    d.set_defaults(func=cmd_decompose)

    lm = sub.add_parser("lemma52", parents=[common], help="closed-form ball integral")
    lm.add_argument("n", type=int)
    lm.add_argument("k", type=int)
    lm.add_argument("a")
    lm.add_argument("m", type=int)
    lm.add_argument("--check", action="store_true")
    lm.set_defaults(func=cmd_lemma52)

    g = sub.add_parser("sgcs-check", parents=[common], help="sampled SGCS evidence for a form")
    g.add_argument("form")
    g.add_argument("--samples", type=int, default=10_000)
    g.set_defaults(func=cmd_sgcs_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INPUT if e.code else EXIT_OK
    if args.tol is not None and args.tol <= 0:
        print("hermsos: --tol must be positive", file=sys.stderr)
        return EXIT_INPUT
    out = Output(args.out)
    code = EXIT_OK
    try:
        args.func(args, out)
    except CliError as e:
        print(f"hermsos: {e}", file=sys.stderr)
        code = e.code
    except (FormatError, DimensionError, ExactModeError, OSError) as e:
        print(f"hermsos: {e}", file=sys.stderr)
        code = EXIT_INPUT
    except (QuadratureError, ChartRadiusError, DegenerateInputError, TemplateError, SGCS2Violation,
            np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"hermsos: numerical failure: {e}", file=sys.stderr)
        code = EXIT_NUMERIC
    out.close()
    return code


if __name__ == "__main__":
    sys.exit(main())
