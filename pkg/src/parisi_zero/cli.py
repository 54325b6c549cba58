"""Command-line front end: ``parisi-zero {classify,solve,certify,energy,scan}``.

JSON goes to stdout as a single object tagged ``"schema": "parisi-zero/1"``;
``scan`` writes CSV. Exit codes: 0 success, 1 usage or parse error,
2 resolution failure, 3 numeric domain error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Optional, Sequence

from . import __version__
from . import certifier, dual, solver
from . import system2rsb as sys2
from ._num import DomainError
from .measure import chen_sen_verify, crisanti_sommers
from .mixture import MixtureModel, ModelSpecError, classify_g_constant, is_convex

SCHEMA = "parisi-zero/1"
EXIT_OK, EXIT_USAGE, EXIT_UNRESOLVED, EXIT_DOMAIN = 0, 1, 2, 3
THREADS_ENV = "PARISI_ZERO_THREADS"

PHASE_COLUMNS = (
    "s", "p", "lambda", "class", "G", "ansatz", "q", "z1", "z2", "Delta",
    "energy", "certified", "lambda_star", "error",
)
_COLUMN_HELP = """CSV columns (fixed order):
  s, p         powers of (1 - lambda) x^s + lambda x^p
  lambda       mixture weight, exact decimal from the grid
  class        pure-like | full-mixture | critical
  G            the classification constant
  ansatz       RS | OneRSB | TwoRSB | Unresolved
  q, z1, z2    2-RSB coordinates (empty otherwise; z1 holds z for OneRSB)
  Delta        atom at 1 (empty when Unresolved)
  energy       ground-state energy -Q(nu) (empty when Unresolved)
  certified    true when a rectangle certificate was obtained (TwoRSB only)
  lambda_star  monotonicity threshold as a fraction (empty if undefined)
  error        failure summary for this row, empty on success
"""
_ANSATZ_NAMES = {"RS": "RS", "1RSB": "OneRSB", "2RSB": "TwoRSB"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _clean(obj: Any) -> Any:
    """Make a payload strict JSON: non-finite floats become null."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def _emit(payload: dict) -> None:
    doc = {"schema": SCHEMA, **payload}
    sys.stdout.write(json.dumps(_clean(doc), indent=2, allow_nan=False) + "\n")


def _error_payload(exc: BaseException, model_spec: Optional[str] = None) -> dict:
    err = {"type": type(exc).__name__, "message": str(exc)}
    diag = getattr(exc, "diagnostics", None)
    if diag:
        err["diagnostics"] = diag
    pos = getattr(exc, "position", None)
    if pos is not None:
        err["position"] = pos
    out = {"error": err}
    if model_spec is not None:
        out["model"] = model_spec
    return out


def _floats(raw: str, n: int, what: str) -> tuple[float, ...]:
    parts = raw.split(",")
    if len(parts) != n:
        raise UsageError(f"{what} needs {n} comma-separated numbers, got {raw!r}")
    try:
        return tuple(float(x) for x in parts)
    except ValueError:
        raise UsageError(f"{what}: cannot parse {raw!r}") from None


def lambda_grid(raw: str) -> list[Fraction]:
    """``a:b:h`` as exact fractions ``a, a+h, ...`` up to and including b."""
    try:
        a, b, h = (Fraction(x.strip()) for x in raw.split(":"))
    except ValueError:
        raise UsageError(f"--lambda-grid must be a:b:h, got {raw!r}") from None
    if h <= 0 or a > b or a < 0 or b > 1:
        raise UsageError(f"--lambda-grid needs 0 <= a <= b <= 1 and h > 0, got {raw!r}")
    n = int((b - a) / h)
    return [a + k * h for k in range(n + 1)]


def _fraction_text(x: Fraction) -> str:
    return repr(float(x)) if Fraction(repr(float(x))) == x else str(x)


def _solve_payload(model: MixtureModel, res: solver.SolveResult) -> dict:
    out = res.to_dict()
    out["ansatz"] = _ANSATZ_NAMES[res.ansatz.value]
    nu = res.measure
    Q = crisanti_sommers(model, nu)
    out["Q"] = Q
    out["ground_state_energy"] = -Q
    out["verified"] = bool(res.criterion.passed) if res.criterion is not None else False
    return out


def cmd_classify(args) -> int:
    model = MixtureModel.parse(args.model)
    G, cls = classify_g_constant(model)
    _emit({
        "model": model.to_spec(),
        "G": G,
        "class": cls.value,
        "convex": is_convex(model),
        "xi1_prime": model.d1(1.0),
        "xi1_doubleprime": model.d2(1.0),
        "solver_excluded": model.is_sk,
    })
    return EXIT_OK


def _solve(model: MixtureModel, args, executor=None) -> solver.SolveResult:
    tol = args.tol_residual
    if args.ansatz == "auto":
        if args.qrange is not None:
            raise UsageError("--qrange only applies with --ansatz 2rsb")
        return solver.resolve_ansatz(model, args.grid_step, executor=executor, residual_tol=tol)
    if args.ansatz == "rs":
        res = solver.solve_rs(model)
    elif args.ansatz == "1rsb":
        res = solver.solve_1rsb(model)
    elif args.qrange is not None:
        lo, hi = _floats(args.qrange, 2, "--qrange")
        if not 0.0 < lo < hi < 1.0:
            raise UsageError(f"--qrange needs 0 < a < b < 1, got {args.qrange!r}")
        res = solver.solve_2rsb(model, lo, hi, tol)
    else:
        candidates, rejected = solver.scan_2rsb(model, executor=executor, residual_tol=tol)
        for cand in candidates:
            cand.criterion = chen_sen_verify(model, cand.measure, args.grid_step)
            if cand.criterion.passed:
                cand.rejected = rejected
                return cand
            rejected.append({"ansatz": "2RSB", "bracket": list(cand.bracket[:2]), "reason": "ChenSenFail",
                             "detail": "; ".join(cand.criterion.reasons)})
        raise solver.NoSignChange(
            "no sign change of zeta1 - zeta2 yields an admissible 2-RSB point",
            grid=list(solver.SCAN_GRID), rejected=rejected,
        )
    if res.max_residual > tol:
        raise solver.SolverError(f"residual {res.max_residual:.3e} above {tol:g}", residuals=res.residuals)
    if res.criterion is None:
        res.criterion = chen_sen_verify(model, res.measure, args.grid_step)
    return res


def cmd_solve(args) -> int:
    model = MixtureModel.parse(args.model)
    res = _solve(model, args)
    payload = {"model": model.to_spec(), **_solve_payload(model, res)}
    _emit(payload)
    return EXIT_OK if payload["verified"] else EXIT_UNRESOLVED


def cmd_certify(args) -> int:
    model = MixtureModel.parse(args.model)
    rect = _floats(args.rect, 4, "--rect")
    rep = certifier.certify_rectangle(model, rect, args.grid_step)
    _emit({"model": model.to_spec(), **rep.to_dict()})
    return EXIT_OK if rep.certified else EXIT_UNRESOLVED


def cmd_energy(args) -> int:
    model = MixtureModel.parse(args.model)
    res = solver.resolve_ansatz(model, args.grid_step, residual_tol=args.tol_residual)
    nu = res.measure
    Q = crisanti_sommers(model, nu)
    B = dual.optimal_B(model, nu)
    P = dual.parisi_dual(model, dual.DualPoint(B, nu))
    _emit({
        "model": model.to_spec(),
        "ansatz": _ANSATZ_NAMES[res.ansatz.value],
        "Q": Q,
        "B_P": B,
        "P": P,
        "dual_gap": abs(P - Q),
        "ground_state_energy": -Q,
    })
    return EXIT_OK


@dataclass(frozen=True)
class _ScanJob:
    s: int
    p: int
    grid_step: float
    residual_tol: float
    lambda_star: str

    def __call__(self, lam: Fraction) -> dict:
        return phase_row(self.s, self.p, lam, self.grid_step, self.residual_tol, self.lambda_star)


def phase_row(s: int, p: int, lam: Fraction, grid_step: float = 1e-4,
              residual_tol: float = solver.RESIDUAL_TOL, lambda_star: Optional[str] = None) -> dict:
    """One PhaseRow; failures land in the ``error`` field instead of raising."""
    if lambda_star is None:
        lambda_star = _lambda_star(s, p)
    row: dict[str, Any] = {c: "" for c in PHASE_COLUMNS}
    row.update(s=s, p=p, **{"lambda": _fraction_text(lam)}, lambda_star=lambda_star,
               ansatz="Unresolved", certified="false")
    try:
        model = MixtureModel.s_plus_p(s, p, lam)
        G, cls = classify_g_constant(model)
        row.update(G=repr(G), **{"class": cls.value})
        res = solver.resolve_ansatz(model, grid_step, residual_tol=residual_tol)
        c = res.coords
        row["ansatz"] = _ANSATZ_NAMES[res.ansatz.value]
        row["Delta"] = repr(c.Delta)
        row["energy"] = repr(-crisanti_sommers(model, res.measure))
        if isinstance(c, sys2.TwoRsbCoordinates):
            row.update(q=repr(c.q), z1=repr(c.z1), z2=repr(c.z2))
            rep = certifier.certify_solution(model, c, grid_step)
            row["certified"] = "true" if rep.certified else "false"
            if not rep.certified:
                row["error"] = "; ".join(rep.reasons)
        elif isinstance(c, solver.OneRsbCoordinates):
            row["z1"] = repr(c.z)
    except (solver.SolverError, DomainError, ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def _lambda_star(s: int, p: int) -> str:
    try:
        return str(sys2.lambda_threshold(s, p))
    except ValueError:
        return ""


def _workers() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise UsageError(f"{THREADS_ENV} must be a positive integer, got {cap!r}") from None
    return n


def cmd_scan(args) -> int:
    if args.s < 2 or args.p <= args.s:
        raise UsageError("--s must be >= 2 and --p must exceed --s")
    lams = lambda_grid(args.lambda_grid)
    job = _ScanJob(args.s, args.p, args.grid_step, args.tol_residual, _lambda_star(args.s, args.p))
    workers = _workers() if args.parallel else 1
    if workers > 1 and len(lams) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, lams))
    else:
        rows = [job(lam) for lam in lams]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=PHASE_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="parisi-zero",
                     description="Zero-temperature Parisi measures of spherical mixed p-spin models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, model=True):
        if model:
            p.add_argument("model", help='mixture, e.g. "5/7:3,2/7:16" or a JSON {"terms": [...]} object')
        p.add_argument("--grid-step", type=float, default=1e-4,
                       help="grid step of the Chen-Sen and sign checks (default: 1e-4)")
        p.add_argument("--tol-residual", type=float, default=solver.RESIDUAL_TOL,
                       help=f"maximum accepted equation residual (default: {solver.RESIDUAL_TOL:g})")

    p = sub.add_parser("classify", help="G constant, class and convexity")
    p.add_argument("model")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("solve", help="solve an ansatz and check it against the Chen-Sen criterion")
    common(p)
    p.add_argument("--ansatz", choices=("auto", "rs", "1rsb", "2rsb"), default="auto")
    p.add_argument("--qrange", metavar="A,B", help="q bracket for --ansatz 2rsb")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="rectangle certificate for a 2-RSB Parisi measure")
    common(p)
    p.add_argument("--rect", required=True, metavar="Q-,Q+,Z2-,Z2+")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("energy", help="Q, optimal B and duality gap of the resolved measure")
    common(p)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("scan", help="phase rows for an s+p family, CSV to stdout",
                       epilog=_COLUMN_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    common(p, model=False)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--lambda-grid", required=True, metavar="A:B:H")
    p.add_argument("--parallel", action="store_true",
                   help=f"compute rows in worker processes (capped by ${THREADS_ENV})")
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    spec = getattr(args, "model", None)
    try:
        return args.func(args)
    except (UsageError, ModelSpecError, certifier.InvalidRectangle) as exc:
        _emit(_error_payload(exc, spec))
        return EXIT_USAGE
    except (solver.SolverError, dual.InadmissibleError) as exc:
        _emit(_error_payload(exc, spec))
        return EXIT_UNRESOLVED
    except (DomainError, ArithmeticError, ValueError) as exc:
        _emit(_error_payload(exc, spec))
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
