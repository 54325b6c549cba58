"""Find RS, 1-RSB and 2-RSB candidates for the Parisi measure.

All root finding is bracketed (``scipy.optimize.brentq``: bisection with
secant/inverse-quadratic steps that never leave the bracket). The 2-RSB
solve intersects two curves in the (q, z2) plane: the unique positive zero
``zeta2(q)`` of ``f2(q, .)`` and the smaller zero ``zeta1(q)`` of ``f1(q, .)``,
which lies below the local minimum ``z2_s(q)``. A 2-RSB point is a zero of
``D(q) = zeta1(q) - zeta2(q)``.
"""

from __future__ import annotations

import enum
import logging
import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq

from ._num import DomainError, bracket_term
from .measure import CriterionReport, DiscreteMeasure, chen_sen_verify
from .mixture import MixtureModel
from . import system2rsb as sys2

log = logging.getLogger(__name__)

XTOL = 1e-15
RTOL = 4 * np.finfo(float).eps
RESIDUAL_TOL = 1e-10
D_TOL = 1e-11
DEFAULT_STEP = 1e-4
MAX_HALVINGS = 10
SCAN_GRID = (0.01, 0.99, 0.005)


class SolverError(Exception):
    """Base class; ``diagnostics`` carries whatever was learned before failing."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class NoRoot(SolverError):
    pass


class BracketFailure(SolverError):
    pass


class BranchAmbiguity(SolverError):
    pass


class NoSignChange(SolverError):
    pass


class NegativeZ1(SolverError):
    pass


class OrderingViolation(SolverError):
    pass


class ExcludedModel(SolverError):
    pass


class AllAnsaetzeFail(SolverError):
    pass


class Ansatz(str, enum.Enum):
    RS = "RS"
    ONE_RSB = "1RSB"
    TWO_RSB = "2RSB"


@dataclass(frozen=True)
class RsCoordinates:
    Delta: float

    def to_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.replica_symmetric(self.Delta)

    def as_dict(self) -> dict:
        return {"Delta": self.Delta}


@dataclass(frozen=True)
class OneRsbCoordinates:
    z: float
    Delta: float
    A: float

    def to_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.one_step(self.A, self.Delta)

    def as_dict(self) -> dict:
        return {"z": self.z, "Delta": self.Delta, "A": self.A}


Coordinates = Union[RsCoordinates, OneRsbCoordinates, sys2.TwoRsbCoordinates]


@dataclass
class SolveResult:
    ansatz: Ansatz
    coords: Coordinates
    residuals: dict[str, float]
    bracket: Optional[tuple[float, float, float, float]] = None
    criterion: Optional[CriterionReport] = None
    rejected: list[dict] = field(default_factory=list)
    heuristic_bracket: bool = False

    @property
    def measure(self) -> DiscreteMeasure:
        return self.coords.to_measure()

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0

    def to_dict(self) -> dict:
        out = {
            "ansatz": self.ansatz.value,
            "coords": self.coords.as_dict(),
            "measure": self.measure.to_json(),
            "residuals": dict(self.residuals),
            "bracket": list(self.bracket) if self.bracket else None,
            "heuristic_bracket": self.heuristic_bracket,
            "rejected": list(self.rejected),
        }
        if self.criterion is not None:
            out["chen_sen"] = self.criterion.to_dict()
        return out


def _root(f, a: float, b: float) -> float:
    return brentq(f, a, b, xtol=XTOL, rtol=RTOL, maxiter=500)


def solve_rs(model: MixtureModel) -> SolveResult:
    """nu = Delta delta_1 with Delta = xi'(1)^(-1/2), the minimiser of Q on atoms."""
    delta = 1.0 / math.sqrt(model.d1(1.0))
    return SolveResult(
        Ansatz.RS,
        RsCoordinates(delta),
        {"functional": abs(model.d1(1.0) * delta * delta - 1.0)},
    )


def solve_1rsb(model: MixtureModel) -> SolveResult:
    """Solve 1/xi'(1) = (1+z)/z^2 log(1+z) - 1/z, then Delta and A = z Delta."""
    x1 = model.d1(1.0)
    if not x1 > 2.0:
        raise NoRoot(f"xi'(1) = {x1:g} <= 2: no positive 1-RSB root", xi1=x1)
    target = 1.0 / x1
    h = lambda z: bracket_term(z) - target  # noqa: E731
    hi = 1.0
    while h(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise NoRoot("could not bracket the 1-RSB root")
    z = _root(h, 0.0, hi)
    delta = 1.0 / math.sqrt(x1 * (1.0 + z))
    A = z * delta
    return SolveResult(
        Ansatz.ONE_RSB,
        OneRsbCoordinates(z, delta, A),
        {
            "scalar_equation": abs(h(z)),
            "functional": abs(x1 * delta * (A + delta) - 1.0),
        },
        bracket=(0.0, hi, float("nan"), float("nan")),
    )


def zeta2(model: MixtureModel, q: float) -> float:
    """The unique positive zero of f2(q, .)."""
    f = lambda z: sys2.f2(model, q, z)  # noqa: E731
    lo = 0.0
    if not f(lo) > 0:
        raise BracketFailure(f"f2({q}, 0+) is not positive", q=q)
    hi = 1.0
    while f(hi) >= 0:
        lo, hi = hi, hi * 2.0
        if hi > 1e12:
            raise BracketFailure(f"f2({q}, .) has no sign change below 1e12", q=q)
    return _root(f, lo, hi)


def zeta1(model: MixtureModel, q: float, warm: Optional[float] = None) -> float:
    """The smaller zero of f1(q, .), strictly below z2_s(q)."""
    z_s, _ = sys2.z2_critical_points(model, q)
    f = lambda z: sys2.f1(model, q, z)  # noqa: E731
    top = f(z_s)
    if not top < 0:
        raise BranchAmbiguity(f"f1({q}, z2_s) = {top:g} is not negative", q=q, z2_s=z_s)
    if warm is not None and -1.0 < warm < z_s:
        width = 1e-3 * (1.0 + abs(warm))
        for _ in range(30):
            a = max(warm - width, -1.0 + 0.5 * (warm + 1.0))
            b = min(warm + width, z_s)
            try:
                fa, fb = f(a), f(b)
            except DomainError:
                break
            if fa > 0 > fb:
                return _root(f, a, b)
            width *= 4.0
    eps = 1e-3 * (1.0 + z_s)
    while True:
        lo = -1.0 + eps
        try:
            if f(lo) > 0:
                break
        except DomainError:
            pass
        eps *= 0.1
        if eps < 1e-15:
            raise BranchAmbiguity(f"f1({q}, .) not positive near -1", q=q)
    return _root(f, lo, z_s)


def _q_grid(q_lo: float, q_hi: float, step: float) -> np.ndarray:
    if not 0.0 < q_lo < q_hi < 1.0:
        raise ValueError(f"[{q_lo}, {q_hi}] must be a proper subinterval of (0, 1)")
    n = max(int(math.ceil((q_hi - q_lo) / step - 1e-9)), 1)
    return np.linspace(q_lo, q_hi, n + 1)


def trace_f2_curve(model: MixtureModel, q_lo: float, q_hi: float, step: float = DEFAULT_STEP):
    """[(q, zeta2(q))] on a grid of [q_lo, q_hi], sorted by q."""
    out = []
    for q in _q_grid(q_lo, q_hi, step):
        try:
            out.append((float(q), zeta2(model, float(q))))
        except (BracketFailure, DomainError) as exc:
            raise BracketFailure(f"f2 bracketing failed at q={q}: {exc}", q=float(q)) from exc
    return out


def trace_f1_small_branch(model: MixtureModel, q_lo: float, q_hi: float, step: float = DEFAULT_STEP):
    """Continue the smaller zero of f1 from q_lo to q_hi.

    Each step warm-starts from the previous root; a failed step is retried
    with half the step size, at most ``MAX_HALVINGS`` times.
    """
    for q in (q_lo, q_hi):
        z = zeta1(model, q)
        if not z < sys2.z2_critical_points(model, q)[0]:
            raise BranchAmbiguity(f"root {z} at q={q} is not below z2_s", q=q)
    out = [(q_lo, zeta1(model, q_lo))]
    q, h = q_lo, step
    while q < q_hi:
        for _ in range(MAX_HALVINGS + 1):
            qn = min(q + h, q_hi)
            try:
                z = zeta1(model, qn, warm=out[-1][1])
                break
            except (BranchAmbiguity, DomainError, ValueError):
                h *= 0.5
        else:
            raise BranchAmbiguity(f"continuation stalled at q={q}", q=q)
        out.append((qn, z))
        q = qn
    return out


def branch_gap(model: MixtureModel, q: float) -> float:
    """D(q) = zeta1(q) - zeta2(q); NaN where either curve is unavailable."""
    try:
        return zeta1(model, q) - zeta2(model, q)
    except (SolverError, DomainError, ValueError, ZeroDivisionError, OverflowError):
        return float("nan")


def solve_2rsb(model: MixtureModel, q_lo: float, q_hi: float, residual_tol: float = RESIDUAL_TOL) -> SolveResult:
    """Intersect the f1 small branch with the f2 curve for q in [q_lo, q_hi]."""
    if model.is_sk:
        raise ExcludedModel("xi(x) = x^2 is excluded from 2-RSB solving")
    if not 0.0 < q_lo < q_hi < 1.0:
        raise ValueError(f"[{q_lo}, {q_hi}] must be a proper subinterval of (0, 1)")
    d_lo, d_hi = branch_gap(model, q_lo), branch_gap(model, q_hi)
    if not (np.isfinite(d_lo) and np.isfinite(d_hi)) or d_lo * d_hi > 0:
        raise NoSignChange(
            f"zeta1 - zeta2 does not change sign on [{q_lo}, {q_hi}]",
            q_lo=q_lo, q_hi=q_hi, D_lo=d_lo, D_hi=d_hi,
        )
    if d_lo == 0:
        q = q_lo
    elif d_hi == 0:
        q = q_hi
    else:
        q = _root(lambda x: zeta1(model, x) - zeta2(model, x), q_lo, q_hi)
    z2 = zeta2(model, q)
    gap = abs(zeta1(model, q) - z2)
    coords = sys2.TwoRsbCoordinates.from_q_z2(model, q, z2)
    z_lo, z_hi = sorted((zeta2(model, q_lo), zeta2(model, q_hi)))
    bracket = (q_lo, q_hi, z_lo, z_hi)
    if not coords.z1 > 0:
        raise NegativeZ1(f"z1 = {coords.z1:g} <= 0", coords=coords.as_dict(), bracket=bracket)
    if not coords.ordering_margin() > 0:
        raise OrderingViolation(
            f"A1 = {coords.A1:g} >= A2 = {coords.A2:g}", coords=coords.as_dict(), bracket=bracket
        )
    residuals = sys2.stationarity_residuals(model, coords)
    residuals["branch_gap"] = gap
    residuals.update({k: v for k, v in coords.invariant_residuals(model).items()})
    worst = max(residuals.values())
    if worst > residual_tol or gap > D_TOL:
        raise SolverError(f"2-RSB residual {worst:.3e} above tolerance", residuals=residuals)
    return SolveResult(Ansatz.TWO_RSB, coords, residuals, bracket=bracket)


def _map(fn, items, executor: Optional[Executor]):
    if executor is None:
        return [fn(x) for x in items]
    return list(executor.map(fn, items))


@dataclass
class _GapAt:
    model: MixtureModel

    def __call__(self, q: float) -> float:
        return branch_gap(self.model, q)


def scan_branch_gap(model: MixtureModel, grid=SCAN_GRID, executor: Optional[Executor] = None):
    """D(q) on a uniform grid; returns (qs, gaps). Results are ordered by q."""
    lo, hi, step = grid
    qs = np.round(np.arange(lo, hi + step / 2, step), 12)
    gaps = np.array(_map(_GapAt(model), [float(q) for q in qs], executor))
    return qs, gaps


def scan_2rsb(model: MixtureModel, grid=SCAN_GRID, executor: Optional[Executor] = None,
              residual_tol: float = RESIDUAL_TOL):
    """Solve 2-RSB on every grid cell where D changes sign.

    Returns ``(candidates, rejected)``; rejected entries carry the bracket
    and the failure reason. The grid is a heuristic, not a guarantee.
    """
    qs, gaps = scan_branch_gap(model, grid, executor)
    candidates, rejected = [], []
    for a, b, da, db in zip(qs[:-1], qs[1:], gaps[:-1], gaps[1:]):
        if not (np.isfinite(da) and np.isfinite(db)) or da * db > 0:
            continue
        try:
            res = solve_2rsb(model, float(a), float(b), residual_tol)
            res.heuristic_bracket = True
            candidates.append(res)
        except SolverError as exc:
            rejected.append(
                {"ansatz": Ansatz.TWO_RSB.value, "bracket": [float(a), float(b)],
                 "reason": type(exc).__name__, "detail": str(exc)}
            )
    return candidates, rejected


def resolve_ansatz(
    model: MixtureModel,
    grid_step: float = 1e-4,
    scan_grid=SCAN_GRID,
    executor: Optional[Executor] = None,
    residual_tol: float = RESIDUAL_TOL,
) -> SolveResult:
    """Lowest-level ansatz that passes the Chen-Sen check."""
    if model.is_sk:
        raise ExcludedModel("xi(x) = x^2 is excluded")
    rejected: list[dict] = []

    def attempt(res: SolveResult) -> Optional[SolveResult]:
        rep = chen_sen_verify(model, res.measure, grid_step)
        res.criterion = rep
        if rep.passed:
            res.rejected = rejected
            return res
        rejected.append({"ansatz": res.ansatz.value, "reason": "ChenSenFail", "detail": "; ".join(rep.reasons),
                         "coords": res.coords.as_dict()})
        return None

    found = attempt(solve_rs(model))
    if found:
        return found
    try:
        found = attempt(solve_1rsb(model))
    except NoRoot as exc:
        rejected.append({"ansatz": Ansatz.ONE_RSB.value, "reason": "NoRoot", "detail": str(exc)})
    if found:
        return found
    candidates, bad = scan_2rsb(model, scan_grid, executor, residual_tol)
    rejected.extend(bad)
    for res in candidates:
        found = attempt(res)
        if found:
            return found
    if not candidates:
        rejected.append({"ansatz": Ansatz.TWO_RSB.value, "reason": "NoSignChange",
                         "detail": f"no sign change of zeta1 - zeta2 on grid {scan_grid}"})
    raise AllAnsaetzeFail("no RS, 1-RSB or 2-RSB candidate passes the Chen-Sen check", rejected=rejected)
