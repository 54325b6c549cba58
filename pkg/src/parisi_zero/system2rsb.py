"""The reduced 2-RSB system in the coordinates (q, z2).

A two-step candidate ``gamma = A1 on [0, q), A2 on [q, 1)`` with atom ``Delta``
is reparametrised by ``z1 = A1 q / Delta`` and ``z2 = A2 (1 - q) / Delta``.
Given ``(q, z2)`` both ``z1`` and ``Delta`` follow from two identities, so the
stationarity conditions collapse to ``f1(q, z2) = f2(q, z2) = 0``. The
auxiliary functions ``g1, g2`` (rescaled Chen-Sen function), ``h1, h2`` (their
derivative numerators, polynomial in ``u``), ``psi1, psi2`` (m-derivatives of
the coupled dual functional) and ``fbar`` live here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._num import DomainError, bracket_term, bracket_term_deriv_factor, log1p_rem, safe_log, safe_log1p
from .measure import DiscreteMeasure
from .mixture import MixtureModel

COORD_TOL = 1e-10


def _check_q(model: MixtureModel, q: float) -> None:
    if not 0.0 < q < 1.0:
        raise DomainError(f"q={q!r} must lie in (0, 1)")
    if model.is_sk:
        raise DomainError("xi(x) = x^2 is excluded from the 2-RSB system")


def _spread(model: MixtureModel, q: float) -> float:
    """xi'(1) - xi'(q) > 0."""
    return model.d1(1.0) - model.d1(q)


def f1(model: MixtureModel, q: float, z2: float) -> float:
    """First reduced equation; its zero set in z2 has two points per q."""
    _check_q(model, q)
    if not z2 > -1.0:
        raise DomainError(f"f1 needs z2 > -1, got {z2!r}")
    xq, dq = model.xi(q), model.d1(q)
    D = _spread(model, q)
    w = 1.0 + z2
    C = q * D / (dq * (1.0 - q))
    return (
        -(q * dq - xq) * (1.0 - q) * w / D
        - q * q * safe_log(C / w)
        + q * q
        - 2.0 * xq * q / dq
        + xq * q * q * D / (w * dq * dq * (1.0 - q))
    )


def f2(model: MixtureModel, q: float, z2: float) -> float:
    """Second reduced equation; exactly one positive zero in z2 per q."""
    _check_q(model, q)
    if not np.all(np.asarray(z2) >= 0.0):
        raise DomainError(f"f2 needs z2 > 0, got {z2!r}")
    return (1.0 - q) * _spread(model, q) * bracket_term(z2) + model.d1(q) * (1.0 - q) - 1.0 + model.xi(q)


def f2_at_infinity(model: MixtureModel, q: float) -> float:
    """lim f2(q, z2) as z2 -> inf; negative on (0, 1)."""
    _check_q(model, q)
    return model.d1(q) * (1.0 - q) - 1.0 + model.xi(q)


def z2_critical_points(model: MixtureModel, q: float) -> tuple[float, float]:
    """(z2_s, z2_b): local minimum and local maximum of f1(q, .).

    f1(q, z2_b) = 0, and the other zero of f1(q, .) lies below z2_s.
    """
    _check_q(model, q)
    xq, dq = model.xi(q), model.d1(q)
    D = _spread(model, q)
    z2_b = q * D / ((1.0 - q) * dq) - 1.0
    z2_s = q * xq * D / (dq * (q * dq - xq) * (1.0 - q)) - 1.0
    return z2_s, z2_b


def z1_from(model: MixtureModel, q: float, z2: float) -> float:
    """z1 from 1 + z1 + z2 = q [xi'(1) - xi'(q)] / (xi'(q) (1 - q))."""
    return z2_critical_points(model, q)[1] - z2


def delta_sq(model: MixtureModel, q: float, z2: float) -> float:
    _check_q(model, q)
    return (1.0 - q) / ((1.0 + z2) * _spread(model, q))


@dataclass(frozen=True)
class TwoRsbCoordinates:
    q: float
    z1: float
    z2: float
    Delta: float
    A1: float
    A2: float

    @classmethod
    def from_q_z2(cls, model: MixtureModel, q: float, z2: float) -> "TwoRsbCoordinates":
        z1 = z1_from(model, q, z2)
        d2 = delta_sq(model, q, z2)
        if not d2 > 0:
            raise DomainError(f"Delta^2 = {d2!r} is not positive")
        delta = math.sqrt(d2)
        return cls(q=q, z1=z1, z2=z2, Delta=delta, A1=z1 * delta / q, A2=z2 * delta / (1.0 - q))

    def to_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.two_step(self.q, self.A1, self.A2, self.Delta)

    def invariant_residuals(self, model: MixtureModel) -> dict[str, float]:
        q, z1, z2, d = self.q, self.z1, self.z2, self.Delta
        D = _spread(model, q)
        return {
            "z1_definition": abs(z1 - self.A1 * q / d),
            "z2_definition": abs(z2 - self.A2 * (1.0 - q) / d),
            "consistency": abs(1.0 + z1 + z2 - q * D / (model.d1(q) * (1.0 - q))),
            "delta_sq_relative": abs(d * d * (1.0 + z2) * D / (1.0 - q) - 1.0),
        }

    def ordering_margin(self) -> float:
        """q z2 - (1 - q) z1; positive iff A1 < A2."""
        return self.q * self.z2 - (1.0 - self.q) * self.z1

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in ("q", "z1", "z2", "Delta", "A1", "A2")}


def stationarity_residuals(model: MixtureModel, c: TwoRsbCoordinates) -> dict[str, float]:
    """Residuals of the un-reduced stationarity conditions in (q, z1, z2, Delta).

    ``g_at_0`` and ``g_at_q`` are g(0) = 0 and g(q) = 0; ``xi_prime_1`` and
    ``xi_prime_q`` are the two derivative conditions, each scaled by Delta^2.
    """
    q, z1, z2, d2 = c.q, c.z1, c.z2, c.Delta**2
    s = 1.0 + z1 + z2
    r_g0 = q * q / (z1 * z1) * math.log1p(z1 / (1.0 + z2)) - q * q / (z1 * s) - model.xi(q) * d2
    r_gq = (
        (1.0 - q) * q / ((1.0 + z2) * s)
        + (1.0 - q) ** 2 / (z2 * z2) * math.log1p(z2)
        - (1.0 - q) ** 2 / (z2 * (1.0 + z2))
        - (model.xi(1.0) - model.xi(q)) * d2
    )
    r_xi1 = q / ((1.0 + z2) * s) + (1.0 - q) / (1.0 + z2) - model.d1(1.0) * d2
    r_xiq = q / (model.d1(q) * (1.0 + z2) * s) - d2
    return {
        "f1": abs(f1(model, q, z2)),
        "f2": abs(f2(model, q, z2)),
        "xi_prime_q": abs(r_xiq),
        "g_at_0": abs(r_g0),
        "g_at_q": abs(r_gq),
        "xi_prime_1": abs(r_xi1),
    }


def g1(model: MixtureModel, c: TwoRsbCoordinates, u):
    """Rescaled Chen-Sen condition on [0, q]; nonpositive at a Parisi measure."""
    q, z1, z2 = c.q, c.z1, c.z2
    s = 1.0 + z1 + z2
    u = np.asarray(u, dtype=float)
    out = (
        q * q / (z1 * z1) * np.log1p(z1 * (q - u) / (q * (1.0 + z2)))
        - q * (q - u) / (z1 * s)
        + (1.0 - q) * q / ((1.0 + z2) * s)
        + (1.0 - q) ** 2 / (z2 * z2) * math.log1p(z2)
        - (1.0 - q) ** 2 / (z2 * (1.0 + z2))
        - (1.0 - model.xi(u)) * q / (model.d1(q) * (1.0 + z2) * s)
    )
    return out if out.ndim else float(out)


def g2(model: MixtureModel, c: TwoRsbCoordinates, u):
    """Rescaled Chen-Sen condition on [q, 1]."""
    q, z2 = c.q, c.z2
    D = _spread(model, q)
    u = np.asarray(u, dtype=float)
    out = (
        (1.0 - u) * model.d1(q) / ((1.0 + z2) * D)
        - (1.0 - u) / (z2 * (1.0 + z2))
        + (1.0 - q) / (z2 * z2) * np.log1p(z2 * (1.0 - u) / (1.0 - q))
        - (1.0 - model.xi(u)) / ((1.0 + z2) * D)
    )
    return out if out.ndim else float(out)


def h1(model: MixtureModel, c: TwoRsbCoordinates, u):
    q, z1, z2 = c.q, c.z1, c.z2
    return model.d1(u) * (q + q * z1 + q * z2 - u * z1) - (1.0 + z2) * model.d1(q) * u


def h2(model: MixtureModel, c: TwoRsbCoordinates, u):
    q, z2 = c.q, c.z2
    dq = model.d1(q)
    return (model.d1(u) - dq) * (1.0 + z2 - q - u * z2) - (u - q) * (model.d1(1.0) - dq)


def h1_coefficients(model: MixtureModel, c: TwoRsbCoordinates) -> np.ndarray:
    """Ascending monomial coefficients of h1."""
    d1 = model.coefficients(1)
    q, z1, z2 = c.q, c.z1, c.z2
    out = np.zeros(len(d1) + 1)
    out[: len(d1)] += d1 * q * (1.0 + z1 + z2)
    out[1:] -= d1 * z1
    out[1] -= (1.0 + z2) * model.d1(q)
    return out


def h2_coefficients(model: MixtureModel, c: TwoRsbCoordinates) -> np.ndarray:
    d1 = model.coefficients(1).copy()
    q, z2 = c.q, c.z2
    dq = model.d1(q)
    d1[0] -= dq
    out = np.zeros(len(d1) + 1)
    out[: len(d1)] += d1 * (1.0 + z2 - q)
    out[1:] -= d1 * z2
    out[1] -= model.d1(1.0) - dq
    out[0] += q * (model.d1(1.0) - dq)
    return out


def _taylor_gap(model: MixtureModel, x: float, at):
    """xi(x) - xi(at) - xi'(at)(x - at), computed termwise."""
    at = np.asarray(at, dtype=float)
    out = model.xi(x) - model.xi(at) - model.d1(at) * (x - at)
    return out


def _legendre_part(model: MixtureModel, a):
    """a xi'(a) - xi(a) = sum w (p - 1) a^p, without cancellation."""
    a = np.asarray(a, dtype=float)
    return sum(w * (p - 1) * a ** int(p) for w, p in zip(model.weights, model.powers))


def psi1(model: MixtureModel, c: TwoRsbCoordinates, a):
    """m-derivative of the coupled functional for overlaps in [0, q]."""
    q, z1, z2 = c.q, c.z1, c.z2
    dq = model.d1(q)
    C = q * dq * (1.0 + z2) * (1.0 + z1 + z2) / (z1 * z1)
    x = z1 * np.asarray(model.d1(a), dtype=float) / ((1.0 + z2) * dq)
    out = C * x * x * log1p_rem(x) - _legendre_part(model, a)
    return out if np.ndim(out) else float(out)


def psi2(model: MixtureModel, c: TwoRsbCoordinates, b):
    """m-derivative of the coupled functional for overlaps in [q, 1]."""
    q, z2 = c.q, c.z2
    D = _spread(model, q)
    K = (1.0 - q) * (1.0 + z2) * D / (z2 * z2)
    y = (np.asarray(model.d1(b), dtype=float) - model.d1(q)) * z2 / D
    out = K * y * y * log1p_rem(y) - _taylor_gap(model, q, b)
    return out if np.ndim(out) else float(out)


def psi1_literal(model: MixtureModel, c: TwoRsbCoordinates, a: float) -> float:
    """psi1 term by term as usually displayed; loses digits near a = 0."""
    q, z1, z2 = c.q, c.z1, c.z2
    dq, da = model.d1(q), model.d1(a)
    s = 1.0 + z1 + z2
    return (
        s * q * da / z1
        - a * da
        + model.xi(a)
        - q * dq * (1.0 + z2) * s / (z1 * z1) * math.log1p(z1 * da / ((1.0 + z2) * dq))
    )


def psi2_literal(model: MixtureModel, c: TwoRsbCoordinates, b: float) -> float:
    q, z2 = c.q, c.z2
    dq, db = model.d1(q), model.d1(b)
    D = _spread(model, q)
    return (
        db * (q - b)
        + model.xi(b)
        - model.xi(q)
        + (db - dq) * (1.0 - q) / z2
        + (db - dq) * (1.0 - q)
        - (1.0 - q) * (1.0 + z2) * D / (z2 * z2) * math.log1p((db - dq) * z2 / D)
    )


def fbar(model: MixtureModel, c: TwoRsbCoordinates, s):
    """Closed form of fbar(s) = int_s^1 f(r) xi''(r) dr at a 2-RSB point."""
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    q, z1, z2 = c.q, c.z1, c.z2
    dq, ds = model.d1(q), model.d1(s)
    tot = 1.0 + z1 + z2
    C = q * dq * (1.0 + z2) * tot / (z1 * z1)
    lower = (
        s * ds
        + model.xi(q)
        - model.xi(s)
        - q * dq
        + q * (dq - ds) * tot / z1
        - C * (math.log1p(z1 / (1.0 + z2)) - np.log1p(z1 * ds / ((1.0 + z2) * dq)))
    )
    D = _spread(model, q)
    K = (1.0 - q) * (1.0 + z2) * D / (z2 * z2)
    with np.errstate(invalid="ignore", divide="ignore"):
        upper = (
            s * ds
            - ds
            + 1.0
            - model.xi(s)
            + (model.d1(1.0) - ds) * (1.0 - q) / z2
            - K * (math.log1p(z2) - np.log1p(z2 * (ds - dq) / D))
        )
    out = np.where(s <= q, lower, upper)
    return float(out) if scalar else out


def phi1(model: MixtureModel, q: float) -> float:
    """Sign of dz2/dq along the f2 zero curve: negative iff decreasing."""
    _check_q(model, q)
    xq, dq = model.xi(q), model.d1(q)
    x1 = model.d1(1.0)
    return model.d2(q) * ((1.0 - q) * x1 - 1.0 + xq) - (x1 - dq) / (1.0 - q) * (1.0 - xq - dq * (1.0 - q))


def dz2_dq(model: MixtureModel, q: float, z2: float) -> float:
    """Implicit slope of the f2 zero curve at (q, z2)."""
    _check_q(model, q)
    D = _spread(model, q)
    dd = model.d2(q)
    num = dd * (1.0 - q) - (D + (1.0 - q) * dd) * bracket_term(z2)
    den = (1.0 - q) * D * bracket_term_deriv_factor(z2)
    return num / den


def lambda_threshold(s: int, p: int) -> Fraction:
    """Smallest lambda with dz2/dq < 0 guaranteed for (1-lambda) x^s + lambda x^p.

    Exact: both polynomials are multiplied by 6 before dividing.
    """
    if s < 3 or p < s + 2:
        raise ValueError(f"need s >= 3 and p >= s + 2, got (s, p) = ({s}, {p})")
    num6 = 6 * p * s + 6 - s**3 - p * s * s - 5 * s - 5 * p
    den6 = 6 * p * s + 6 - s**3 - 6 * p - 5 * s
    if den6 <= 0:
        raise ValueError(f"threshold condition vacuous for (s, p) = ({s}, {p})")
    return Fraction(num6, den6)


def lambda_condition_holds(s: int, p: int, lam) -> bool:
    """lambda = 0 or lambda >= lambda_threshold(s, p), compared exactly when possible."""
    if lam == 0:
        return True
    lam = lam if isinstance(lam, Fraction) else Fraction(lam)
    return lam >= lambda_threshold(s, p)
