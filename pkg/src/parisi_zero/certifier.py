"""Rectangle certificates for 2-RSB Parisi measures of s+p models.

Given a rectangle ``[q-, q+] x [z2-, z2+]`` the endpoint inequalities are
evaluated at the fixed corner combinations for which each expression is
monotone, so a positive margin at the corners covers the whole rectangle.
The rectangle is then solved inside and the assembled measure is checked
against the Chen-Sen criterion, the psi hypotheses and the fbar conditions.

These are floating-point certificates with stated tolerances, not
interval-arithmetic proofs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from . import dual, system2rsb as sys2
from ._num import DomainError
from .measure import DiscreteMeasure, chen_sen_verify
from .mixture import MixtureModel, is_convex
from .solver import SolverError, solve_2rsb
from .solver import zeta1 as solver_zeta1, zeta2 as solver_zeta2

STRICT_TOL = 1e-12
PSI_DELTA = 1e-4
PSI_REL_TOL = 1e-12
ANCHOR_TOL = 1e-8
FBAR_MIN_TOL = 1e-9
G_MAX_TOL = 1e-9
FLAT_TOL = 1e-9
PHI_GRID = 1001

CERTIFIED = "Certified2RSB"
NOT_CERTIFIED = "NotCertified"


class InvalidRectangle(ValueError):
    pass


@dataclass
class Check:
    name: str
    margin: float
    passed: bool
    mandatory: bool = True
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "margin": self.margin, "passed": self.passed,
                "mandatory": self.mandatory, "detail": self.detail}


@dataclass
class CertificationReport:
    rectangle: tuple[float, float, float, float]
    checks: list[Check]
    verdict: str
    reasons: list[str] = field(default_factory=list)
    solution: Optional[sys2.TwoRsbCoordinates] = None
    chen_sen: Optional[dict] = None
    certificate: str = "numerical"

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def certified(self) -> bool:
        return self.verdict == CERTIFIED

    def to_dict(self) -> dict:
        return {
            "rectangle": list(self.rectangle),
            "verdict": self.verdict,
            "reasons": list(self.reasons),
            "checks": [c.to_dict() for c in self.checks],
            "solution": self.solution.as_dict() if self.solution else None,
            "chen_sen": self.chen_sen,
            "certificate": self.certificate,
        }


@dataclass
class RootIsolation:
    roots: list[float]
    suspected_doubles: list[float]

    @property
    def count(self) -> int:
        return len(self.roots)


def _evaluate(fn: Callable, xs: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(fn(xs), dtype=float)
        if out.shape == xs.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(float(x))) for x in xs])


def isolate_roots(
    fn: Callable,
    interval: tuple[float, float],
    refine_tol: float = 1e-10,
    step: float = 1e-4,
    flat_tol: float = FLAT_TOL,
) -> RootIsolation:
    """Roots of ``fn`` in the open interval, found as grid sign changes.

    Grid points where ``|fn|`` dips below ``flat_tol`` as a local minimum
    without a sign change are reported as suspected double roots.
    """
    a, b = interval
    n = max(int(math.ceil((b - a) / step)), 2)
    xs = np.linspace(a, b, n + 1)[1:-1]
    v = _evaluate(fn, xs)
    s = np.sign(v)
    roots, doubles = [], []
    for i in range(len(xs) - 1):
        if s[i] == 0:
            if 0 < i and s[i - 1] * s[i + 1] < 0:
                roots.append(float(xs[i]))
            continue
        if s[i] * s[i + 1] < 0:
            roots.append(float(brentq(lambda x: float(fn(x)), xs[i], xs[i + 1], xtol=refine_tol)))
    for i in range(1, len(xs) - 1):
        if abs(v[i]) < flat_tol and abs(v[i]) <= abs(v[i - 1]) and abs(v[i]) <= abs(v[i + 1]):
            if s[i - 1] * s[i + 1] > 0:
                doubles.append(float(xs[i]))
    return RootIsolation(roots, doubles)


def count_roots(fn: Callable, interval: tuple[float, float], refine_tol: float = 1e-10, step: float = 1e-4) -> int:
    return isolate_roots(fn, interval, refine_tol, step).count


@dataclass
class PsiCheck:
    psi1_ok: bool
    psi2_ok: bool
    worst_margins: dict[str, float]
    anchors: dict[str, float]
    h1_roots: int
    h2_roots: int

    def to_dict(self) -> dict:
        return {"psi1_ok": self.psi1_ok, "psi2_ok": self.psi2_ok, "worst_margins": self.worst_margins,
                "anchors": self.anchors, "h1_roots": self.h1_roots, "h2_roots": self.h2_roots}


def _interior(lo: float, hi: float, step: float, delta: float) -> np.ndarray:
    n = max(int(math.ceil((hi - lo - 2 * delta) / step)), 1)
    return np.linspace(lo + delta, hi - delta, n + 1)


def check_psi_negativity(model: MixtureModel, coords: sys2.TwoRsbCoordinates, grid_step: float = 1e-4) -> PsiCheck:
    """psi1 < 0 on (0, q) and psi2 < 0 on (q, 1), on a grid kept PSI_DELTA from the anchors.

    Strictness is relative: ``psi < -PSI_REL_TOL * scale`` where ``scale`` is
    the size of the two terms psi is the difference of. Near a = 0, psi1 is
    of order a^s, far below any absolute threshold.
    """
    q = coords.q
    a = _interior(0.0, q, grid_step, PSI_DELTA)
    b = _interior(q, 1.0, grid_step, PSI_DELTA)
    p1 = sys2.psi1(model, coords, a)
    p2 = sys2.psi2(model, coords, b)
    scale1 = np.abs(sys2._legendre_part(model, a)) + np.abs(p1)
    scale2 = np.abs(sys2._taylor_gap(model, q, b)) + np.abs(p2)
    rel1 = p1 / scale1
    rel2 = p2 / scale2
    anchors = {
        "psi1(0)": sys2.psi1(model, coords, 0.0),
        "psi1(q)": sys2.psi1(model, coords, q),
        "psi2(q)": sys2.psi2(model, coords, q),
        "psi2(1)": sys2.psi2(model, coords, 1.0),
    }
    n1 = count_roots(lambda u: sys2.h1(model, coords, u), (0.0, q))
    n2 = count_roots(lambda u: sys2.h2(model, coords, u), (q, 1.0))
    anchors_ok = all(abs(v) <= ANCHOR_TOL for v in anchors.values())
    return PsiCheck(
        psi1_ok=bool(np.all(rel1 < -PSI_REL_TOL)) and anchors_ok and n1 == 1,
        psi2_ok=bool(np.all(rel2 < -PSI_REL_TOL)) and anchors_ok and n2 == 1,
        worst_margins={
            "psi1_max": float(p1.max()),
            "psi2_max": float(p2.max()),
            "psi1_max_relative": float(rel1.max()),
            "psi2_max_relative": float(rel2.max()),
        },
        anchors=anchors,
        h1_roots=n1,
        h2_roots=n2,
    )


@dataclass
class FbarCheck:
    ok: bool
    anchors: dict[str, float]
    min_margin: float
    sign_mismatches: int = 0
    closed_form_gap: float = 0.0

    def to_dict(self) -> dict:
        return {"ok": self.ok, "anchors": self.anchors, "min_margin": self.min_margin,
                "sign_mismatches": self.sign_mismatches, "closed_form_gap": self.closed_form_gap}


def check_fbar_measure(model: MixtureModel, nu: DiscreteMeasure, q: float, grid_step: float = 1e-4) -> FbarCheck:
    """fbar conditions for an arbitrary two-step measure with B at its optimum."""
    B = dual.optimal_B(model, nu)
    anchors = {
        "fbar(0)": dual.fbar(model, nu, B, 0.0),
        "fbar(q)": dual.fbar(model, nu, B, q),
        "f(1)": dual.f_function(model, nu, B, 1.0),
        "f(q)": dual.f_function(model, nu, B, q),
    }
    grid = np.linspace(0.0, 1.0, int(round(1.0 / grid_step)) + 1)
    vals = dual.fbar(model, nu, B, grid)
    mn = float(vals.min())
    ok = mn >= -FBAR_MIN_TOL and all(abs(v) <= ANCHOR_TOL for v in anchors.values())
    return FbarCheck(ok, anchors, mn)


def check_fbar(model: MixtureModel, coords: sys2.TwoRsbCoordinates, grid_step: float = 1e-4) -> FbarCheck:
    """fbar >= 0 with anchors, and sign(fbar') = -sign(h1), -sign(h2) on the two pieces."""
    q = coords.q
    rep = check_fbar_measure(model, coords.to_measure(), q, grid_step)
    nu = coords.to_measure()
    B = dual.optimal_B(model, nu)
    grid = np.linspace(0.0, 1.0, int(round(1.0 / grid_step)) + 1)
    closed = sys2.fbar(model, coords, grid)
    general = dual.fbar(model, nu, B, grid)
    gap = float(np.max(np.abs(closed - general)))

    eps = 1e-6
    inner = grid[(grid > eps) & (grid < 1 - eps) & (np.abs(grid - q) > eps)]
    h = np.where(inner < q, sys2.h1(model, coords, inner), sys2.h2(model, coords, inner))
    d = (sys2.fbar(model, coords, inner + eps) - sys2.fbar(model, coords, inner - eps)) / (2 * eps)
    live = (np.abs(h) >= 1e-8) & (np.abs(d) >= 1e-12)
    mismatches = int(np.count_nonzero(np.sign(d[live]) != -np.sign(h[live])))
    min_closed = float(closed.min())
    ok = rep.ok and mismatches == 0 and min_closed >= -FBAR_MIN_TOL
    return FbarCheck(ok, rep.anchors, min(rep.min_margin, min_closed), mismatches, gap)


def _g_nonpositive(model, coords, grid_step):
    q = coords.q
    a = np.linspace(0.0, q, max(int(q / grid_step), 2) + 1)
    b = np.linspace(q, 1.0, max(int((1 - q) / grid_step), 2) + 1)
    return float(max(sys2.g1(model, coords, a).max(), sys2.g2(model, coords, b).max()))


def _validate(rect) -> tuple[float, float, float, float]:
    try:
        qm, qp, zm, zp = (float(x) for x in rect)
    except (TypeError, ValueError):
        raise InvalidRectangle(f"rectangle must be four numbers, got {rect!r}") from None
    if not (0.0 < qm < qp < 1.0 and 0.0 < zm < zp):
        raise InvalidRectangle(f"rectangle {rect!r} must satisfy 0 < q- < q+ < 1 and 0 < z2- < z2+")
    return qm, qp, zm, zp


def corner_margins(model: MixtureModel, rect) -> dict[str, float]:
    """Endpoint inequalities at their worst corners; each must be > 0."""
    qm, qp, zm, zp = _validate(rect)
    d1 = model.d1
    x1 = d1(1.0)
    z1_low = qm * (x1 - d1(qp)) / (d1(qp) * (1.0 - qm)) - zp - 1.0
    z1_high = qp * (x1 - d1(qm)) / (d1(qm) * (1.0 - qp)) - zm - 1.0
    return {
        "z1_positive": z1_low,
        "ordering": qm * zm / (1.0 - qm) - z1_high,
        "second_derivative": -(model.d2(qp) * (1.0 + zp) * (1.0 - qm) + d1(qp) - x1),
        "h1_at_1": (1.0 + zm) * (x1 * qp - d1(qp) + x1 * (1.0 - qp)) - x1 * qm * (x1 - d1(qm)) / d1(qm),
        "h2_at_0": -(x1 * qp - (1.0 + zm) * d1(qm)),
    }


def certify_rectangle(model: MixtureModel, rect, grid_step: float = 1e-4) -> CertificationReport:
    """Evaluate every sufficient condition for a 2-RSB Parisi measure in ``rect``."""
    qm, qp, zm, zp = _validate(rect)
    checks: list[Check] = []
    reasons: list[str] = []

    params = model.s_plus_p_params()
    in_scope = params is not None and params[0] >= 3 and params[1] >= params[0] + 2
    if not in_scope:
        reasons.append("NotSPlusP: the rectangle certificate needs (1-l) x^s + l x^p with s >= 3, p >= s + 2")

    for name, m in corner_margins(model, rect).items():
        checks.append(Check(name, float(m), m > STRICT_TOL))

    try:
        gaps = []
        for q in (qm, qp):
            z_s = sys2.z2_critical_points(model, q)[0]
            gaps.append(z_s - zp)
        checks.append(Check("branch_check", min(gaps), min(gaps) > STRICT_TOL,
                            detail="z2_s(q) - z2+ at q- and q+"))
        f1_m = min(min(sys2.f1(model, q, zm), -sys2.f1(model, q, zp)) for q in (qm, qp))
        checks.append(Check("f1_enclosure", f1_m, f1_m > STRICT_TOL,
                            detail="f1(q, z2-) > 0 > f1(q, z2+) at q- and q+"))
        f2_m = min(-sys2.f2(model, qm, zp), sys2.f2(model, qp, zm))
        checks.append(Check("f2_enclosure", f2_m, f2_m > STRICT_TOL,
                            detail="f2(q-, z2+) < 0 < f2(q+, z2-)"))
    except DomainError as exc:
        checks.append(Check("branch_check", float("nan"), False, detail=str(exc)))

    checks.append(_lambda_check(model, params, qm, qp, in_scope))

    solution = None
    cs = None
    try:
        res = solve_2rsb(model, qm, qp)
        c = res.coords
        inside = min(c.q - qm, qp - c.q, c.z2 - zm, zp - c.z2)
        checks.append(Check("solution_in_rectangle", inside, inside > 0,
                            detail=f"q={c.q!r}, z2={c.z2!r}"))
        solution = c
    except SolverError as exc:
        reasons.append(f"NoSolution: {type(exc).__name__}: {exc}")
        checks.append(Check("solution_in_rectangle", float("nan"), False, detail=str(exc)))

    if solution is not None:
        rep = chen_sen_verify(model, solution.to_measure(), grid_step)
        cs = rep.to_dict()
        zero_res = max([abs(v) for v in rep.required_zeros.values()] + [abs(v) for v in rep.required_flat.values()])
        checks.append(Check("chen_sen", rep.min_g, rep.passed,
                            detail=f"residual={rep.residual:.3e}, max anchor={zero_res:.3e}"))
        convex = is_convex(model)
        psi = check_psi_negativity(model, solution, grid_step)
        checks.append(Check("psi1_negative", psi.worst_margins["psi1_max_relative"], psi.psi1_ok, convex,
                            detail=f"max psi1={psi.worst_margins['psi1_max']:.3e}, h1 roots in (0,q)={psi.h1_roots}"))
        checks.append(Check("psi2_negative", psi.worst_margins["psi2_max_relative"], psi.psi2_ok, convex,
                            detail=f"max psi2={psi.worst_margins['psi2_max']:.3e}, h2 roots in (q,1)={psi.h2_roots}"))
        fb = check_fbar(model, solution, grid_step)
        checks.append(Check("fbar_nonnegative", fb.min_margin, fb.ok, convex,
                            detail=f"max anchor={max(abs(v) for v in fb.anchors.values()):.3e}"))
        gmax = _g_nonpositive(model, solution, grid_step)
        checks.append(Check("g_nonpositive", -gmax, gmax <= G_MAX_TOL, False,
                            detail="max of g1 on [0,q] and g2 on [q,1]"))

    failed = [c.name for c in checks if c.mandatory and not c.passed]
    reasons.extend(f"check failed: {n}" for n in failed)
    verdict = CERTIFIED if not reasons else NOT_CERTIFIED
    return CertificationReport((qm, qp, zm, zp), checks, verdict, reasons, solution, cs)


def _lambda_check(model, params, qm, qp, in_scope) -> Check:
    """dz2/dq < 0 on [q-, q+]: the exact lambda condition, else phi1 < 0 on a grid."""
    detail = "threshold needs an s+p model"
    if in_scope:
        s, p, lam = params
        lam_f = lam if isinstance(lam, Fraction) else Fraction(lam)
        try:
            star = sys2.lambda_threshold(s, p)
            if sys2.lambda_condition_holds(s, p, lam_f):
                margin = float(lam_f - star) if lam_f != 0 else 0.0
                return Check("lambda_monotone", margin, True, detail=f"lambda*={star}")
            detail = f"lambda={lam_f} < lambda*={star}"
        except ValueError as exc:
            detail = str(exc)
    qs = np.linspace(qm, qp, PHI_GRID)
    worst = max(sys2.phi1(model, float(q)) for q in qs)
    return Check("lambda_monotone", -worst, worst < -STRICT_TOL, detail=f"{detail}; phi1 < 0 on grid of [q-, q+]")


def rectangle_around(model: MixtureModel, coords: sys2.TwoRsbCoordinates, half_width: float = 1e-3):
    """A candidate rectangle about a solved point.

    The z2 side spans both curve values at q- and q+, padded by a tenth of
    their spread, so the enclosure checks have room to pass.
    """
    qm = max(coords.q - half_width, 0.5 * coords.q)
    qp = min(coords.q + half_width, 0.5 * (1.0 + coords.q))
    zs = [coords.z2]
    for q in (qm, qp):
        zs.append(solver_zeta2(model, q))
        zs.append(solver_zeta1(model, q))
    lo, hi = min(zs), max(zs)
    pad = 0.1 * (hi - lo) + 1e-9 * max(1.0, hi)
    return (qm, qp, max(lo - pad, 0.5 * lo), hi + pad)


def certify_solution(model: MixtureModel, coords: sys2.TwoRsbCoordinates, grid_step: float = 1e-4,
                     widths=(1e-3, 2e-4, 5e-5)) -> CertificationReport:
    """Try shrinking rectangles around ``coords``; return the first certified report, else the last."""
    report = None
    for w in widths:
        try:
            report = certify_rectangle(model, rectangle_around(model, coords, w), grid_step)
        except (SolverError, DomainError, InvalidRectangle) as exc:
            report = CertificationReport((coords.q, coords.q, coords.z2, coords.z2), [], NOT_CERTIFIED,
                                         [f"NoRectangle: {type(exc).__name__}: {exc}"], coords)
            continue
        if report.certified:
            return report
    return report
