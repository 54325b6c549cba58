"""Mixed p-spin models xi(x) = sum_p c_p^2 x^p.

Models are immutable and evaluated in double precision. Weights given as
strings ("5/7", "0.25") are kept as exact rationals so that thresholds
built from them (see :func:`parisi_zero.system2rsb.lambda_threshold`) can be
compared without rounding.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

Weight = Union[Fraction, float]

NORMALIZATION_TOL = 1e-12
G_ZERO_BAND = 1e-12


class ModelSpecError(ValueError):
    """Raised for unparseable model specs; ``position`` is a character offset."""

    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ModelClass(str, enum.Enum):
    PURE_LIKE = "pure-like"
    FULL_MIXTURE = "full-mixture"
    CRITICAL = "critical"


def _as_weight(w) -> Weight:
    if isinstance(w, Fraction):
        return w
    if isinstance(w, str):
        return Fraction(w.strip())
    if isinstance(w, int):
        return Fraction(w)
    return float(w)


@dataclass(frozen=True)
class MixtureModel:
    """A finite mixture ``xi(x) = sum(weight * x**power)``.

    ``terms`` is a tuple of ``(weight, power)`` pairs sorted by power.
    Construct through :meth:`from_terms` unless the terms are already
    validated.
    """

    terms: tuple[tuple[Weight, int], ...]

    def __post_init__(self):
        powers = [p for _, p in self.terms]
        if not self.terms:
            raise ValueError("model needs at least one term")
        if powers != sorted(powers) or len(set(powers)) != len(powers):
            raise ValueError("powers must be sorted and distinct")
        for w, p in self.terms:
            if not isinstance(p, (int, np.integer)) or p < 2:
                raise ValueError(f"power must be an integer >= 2, got {p!r}")
            if w < 0:
                raise ValueError(f"weights must be nonnegative, got {w!r}")
        if not any(w > 0 for w, _ in self.terms):
            raise ValueError("at least one weight must be positive")
        total = sum(float(w) for w, _ in self.terms)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        object.__setattr__(self, "_w", np.array([float(w) for w, _ in self.terms]))
        object.__setattr__(self, "_p", np.array(powers, dtype=np.int64))

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[object, int]], normalize: bool = False) -> "MixtureModel":
        merged: dict[int, Weight] = {}
        for w, p in terms:
            p = int(p)
            if p in merged:
                raise ValueError(f"duplicate power {p}")
            merged[p] = _as_weight(w)
        items = sorted(((w, p) for p, w in merged.items()), key=lambda t: t[1])
        if normalize:
            total = sum(w for w, _ in items)
            if total <= 0:
                raise ValueError("at least one weight must be positive")
            items = [(w / total, p) for w, p in items]
        return cls(tuple(items))

    @classmethod
    def s_plus_p(cls, s: int, p: int, lam) -> "MixtureModel":
        """The two-term model ``(1 - lam) x^s + lam x^p``."""
        lam = _as_weight(lam)
        return cls.from_terms([(1 - lam, s), (lam, p)])

    @classmethod
    def parse(cls, spec: str, normalize: bool = False) -> "MixtureModel":
        """Parse ``"5/7:3,2/7:16"`` or a JSON ``{"terms": [...]}`` document."""
        text = spec.strip()
        if text.startswith("{"):
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ModelSpecError(f"invalid JSON: {exc.msg}", exc.pos) from None
            try:
                raw = [(str(t["weight"]), int(t["power"])) for t in doc["terms"]]
            except (KeyError, TypeError, ValueError) as exc:
                raise ModelSpecError(f"malformed terms: {exc}", 0) from None
            return cls._checked(raw, normalize, 0)

        raw = []
        pos = 0
        for chunk in spec.split(","):
            if ":" not in chunk:
                raise ModelSpecError(f"expected weight:power, got {chunk.strip()!r}", pos)
            w_txt, p_txt = chunk.split(":", 1)
            try:
                w = Fraction(w_txt.strip())
            except (ValueError, ZeroDivisionError):
                raise ModelSpecError(f"bad weight {w_txt.strip()!r}", pos) from None
            try:
                p = int(p_txt.strip())
            except ValueError:
                raise ModelSpecError(f"bad power {p_txt.strip()!r}", pos + len(w_txt) + 1) from None
            raw.append((w, p))
            pos += len(chunk) + 1
        return cls._checked(raw, normalize, 0)

    @classmethod
    def _checked(cls, raw, normalize, pos):
        try:
            return cls.from_terms(raw, normalize=normalize)
        except ValueError as exc:
            raise ModelSpecError(str(exc), pos) from None

    def to_spec(self) -> str:
        return ",".join(f"{w}:{p}" for w, p in self.terms)

    def to_json(self) -> dict:
        return {"terms": [{"weight": str(w), "power": int(p)} for w, p in self.terms]}

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def powers(self) -> np.ndarray:
        return self._p

    @property
    def is_sk(self) -> bool:
        """True for xi(x) = x^2, which the 2-RSB machinery excludes."""
        return len(self.terms) == 1 and self.terms[0][1] == 2

    def s_plus_p_params(self):
        """Return ``(s, p, lam)`` for a two-term model, else None."""
        if len(self.terms) != 2:
            return None
        (_, s), (lam, p) = self.terms
        return s, p, lam

    def __call__(self, x, order: int = 0):
        return eval_xi(self, x, order)

    def xi(self, x):
        return eval_xi(self, x, 0)

    def d1(self, x):
        return eval_xi(self, x, 1)

    def d2(self, x):
        return eval_xi(self, x, 2)

    def coefficients(self, order: int = 0) -> np.ndarray:
        """Dense ascending coefficient array of the ``order``-th derivative."""
        deg = int(self._p[-1]) - order
        out = np.zeros(max(deg, 0) + 1)
        for w, p in zip(self._w, self._p):
            k = int(p) - order
            if k >= 0:
                out[k] += w * _falling(int(p), order)
        return out


def _falling(p: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= p - i
    return out


def eval_xi(model: MixtureModel, x, order: int = 0):
    """xi, xi' or xi'' at ``x`` (scalar or array)."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    w, p = model.weights, model.powers
    coef = w * np.array([_falling(int(k), order) for k in p], dtype=float)
    expo = p - order
    if np.ndim(x) == 0:
        x = float(x)
        return float(sum(c * x ** int(e) for c, e in zip(coef, expo)))
    x = np.asarray(x, dtype=float)
    return sum(c * x ** int(e) for c, e in zip(coef, expo))


def g_constant(xi1: float, xi2: float) -> float:
    """The pure-like/full-mixture constant built from xi'(1) and xi''(1)."""
    d = xi2 - xi1
    return math.log(xi2 / xi1) - d * (d + xi1 * xi1) / (xi2 * xi1 * xi1)


def classify_g_constant(model: MixtureModel) -> tuple[float, ModelClass]:
    xi1, xi2 = model.d1(1.0), model.d2(1.0)
    if xi2 <= 0 or xi1 <= 0:
        raise ValueError("degenerate model: xi'(1) and xi''(1) must be positive")
    G = g_constant(xi1, xi2)
    if abs(G) <= G_ZERO_BAND:
        return G, ModelClass.CRITICAL
    return G, ModelClass.PURE_LIKE if G > 0 else ModelClass.FULL_MIXTURE


def is_convex(model: MixtureModel, grid: int = 2001) -> bool:
    """Whether xi'' >= 0 on [-1, 1].

    On [0, 1] this is automatic. On [-1, 0] we write xi'' = x^m r(x) with
    r(0) != 0, isolate the real roots of r and test the sign between them
    and on a uniform grid.
    """
    c = model.coefficients(2)
    nz = np.flatnonzero(c)
    m = int(nz[0])
    r = c[m:]
    samples = [-1.0, 0.0]
    if len(r) > 1:
        roots = np.roots(r[::-1])
        real = sorted(
            float(z.real) for z in roots if abs(z.imag) < 1e-9 and -1.0 <= z.real <= 0.0
        )
        pts = [-1.0] + real + [0.0]
        samples += [(a + b) / 2 for a, b in zip(pts[:-1], pts[1:])]
    samples = np.concatenate([np.asarray(samples), np.linspace(-1.0, 0.0, grid)])
    vals = np.polynomial.polynomial.polyval(samples, r) * samples**m
    scale = np.abs(r).sum()
    return bool(np.all(vals >= -1e-14 * scale))
