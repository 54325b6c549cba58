"""Step-density candidates nu(ds) = gamma(s) ds + Delta delta_1 and their functionals.

A :class:`DiscreteMeasure` stores the left endpoints ``0 = t_0 < ... < t_{k-1} < 1``
of its pieces and a level per piece; piece ``i`` is ``[t_i, t_{i+1})`` with
``t_k = 1``. Everything here is closed form: the tail ``nu((r, 1])`` is
affine on each piece, so the Crisanti-Sommers functional and the Chen-Sen
function ``g`` reduce to rational and logarithmic terms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._num import log1p_over, log1p_rem
from .mixture import MixtureModel

CS_MIN_G_TOL = 1e-9
CS_ZERO_TOL = 1e-8
CS_RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteMeasure:
    breakpoints: tuple[float, ...]
    levels: tuple[float, ...]
    atom: float

    def __post_init__(self):
        t = tuple(float(x) for x in self.breakpoints)
        lv = tuple(float(x) for x in self.levels)
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "levels", lv)
        object.__setattr__(self, "atom", float(self.atom))
        if len(t) != len(lv) or not t:
            raise ValueError("need one level per breakpoint and at least one piece")
        if t[0] != 0.0:
            raise ValueError("first breakpoint must be 0")
        if any(b <= a for a, b in zip(t, t[1:])) or t[-1] >= 1.0:
            raise ValueError("breakpoints must increase strictly inside [0, 1)")
        if any(x < 0 for x in lv) or any(b < a for a, b in zip(lv, lv[1:])):
            raise ValueError("levels must be nonnegative and nondecreasing")
        if not self.atom > 0:
            raise ValueError("atom at 1 must be positive")

        edges = np.array(t + (1.0,))
        gam = np.array(lv)
        widths = np.diff(edges)
        # tail at the right end of each piece, then at the left end
        mass = gam * widths
        t_right = self.atom + np.concatenate([np.cumsum(mass[::-1])[::-1][1:], [0.0]])
        t_left = t_right + mass
        # F(s) = int_0^s dr / tail(r)^2 at each left endpoint
        per_piece = widths / (t_left * t_right)
        f_left = np.concatenate([[0.0], np.cumsum(per_piece)[:-1]])
        object.__setattr__(self, "_edges", edges)
        object.__setattr__(self, "_gam", gam)
        object.__setattr__(self, "_tr", t_right)
        object.__setattr__(self, "_tl", t_left)
        object.__setattr__(self, "_fl", f_left)
        object.__setattr__(self, "_f1", float(f_left[-1] + per_piece[-1]))

    @classmethod
    def replica_symmetric(cls, delta: float, level: float = 0.0) -> "DiscreteMeasure":
        return cls((0.0,), (level,), delta)

    @classmethod
    def one_step(cls, A: float, delta: float) -> "DiscreteMeasure":
        return cls((0.0,), (A,), delta)

    @classmethod
    def two_step(cls, q: float, A1: float, A2: float, delta: float) -> "DiscreteMeasure":
        return cls((0.0, q), (A1, A2), delta)

    @classmethod
    def from_json(cls, doc) -> "DiscreteMeasure":
        if isinstance(doc, str):
            doc = json.loads(doc)
        return cls(tuple(doc["breakpoints"]), tuple(doc["levels"]), doc["atom"])

    def to_json(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "levels": list(self.levels), "atom": self.atom}

    @property
    def total_mass(self) -> float:
        """nu([0, 1])."""
        return float(self._tl[0])

    def _piece(self, r):
        idx = np.searchsorted(self._edges, r, side="right") - 1
        return np.clip(idx, 0, len(self.levels) - 1)

    def charged_points(self) -> list[tuple[int, float]]:
        """Breakpoints where the measure drho = d gamma puts mass."""
        out = []
        prev = 0.0
        for i, (t, g) in enumerate(zip(self.breakpoints, self.levels)):
            if g > prev:
                out.append((i, t))
            prev = g
        return out


def tail_mass(nu: DiscreteMeasure, r):
    """nu((r, 1]), with the atom counted at r = 1."""
    scalar = np.ndim(r) == 0
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > 1)):
        raise ValueError("r must lie in [0, 1]")
    i = nu._piece(r)
    out = nu._tr[i] + nu._gam[i] * (nu._edges[i + 1] - r)
    return float(out) if scalar else out


def inverse_tail_sq_integral(nu: DiscreteMeasure, s):
    """F(s) = int_0^s dr / nu((r, 1])^2."""
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    i = nu._piece(s)
    a = nu._edges[i]
    ts = nu._tr[i] + nu._gam[i] * (nu._edges[i + 1] - s)
    out = nu._fl[i] + (s - a) / (ts * nu._tl[i])
    return float(out) if scalar else out


def _int_F_from(nu: DiscreteMeasure, x, i):
    """int_x^{b_i} F(s) ds for x inside piece i."""
    a, b = nu._edges[i], nu._edges[i + 1]
    t, c, gam = nu._tr[i], nu._tl[i], nu._gam[i]
    w = b - x
    y = gam * w / t
    return nu._fl[i] * w + w * (b - a) / (t * c) - w * w / (t * t) * log1p_rem(y)


def _piece_F_integrals(nu: DiscreteMeasure):
    k = len(nu.levels)
    full = np.array([_int_F_from(nu, nu._edges[i], i) for i in range(k)], dtype=float)
    # int_{a_i}^1 F for each piece start
    return np.concatenate([np.cumsum(full[::-1])[::-1], [0.0]])


def crisanti_sommers(model: MixtureModel, nu: DiscreteMeasure) -> float:
    """Q(nu) = (int xi'(s) nu(ds) + int_0^1 dq / nu((q,1])) / 2."""
    e = nu._edges
    lin = float(np.sum(nu._gam * (model.xi(e[1:]) - model.xi(e[:-1])))) + nu.atom * model.d1(1.0)
    if np.any(nu._tr <= 0):
        raise ValueError("nonpositive tail mass")
    widths = np.diff(e)
    y = nu._gam * widths / nu._tr
    inv = float(np.sum(widths / nu._tr * log1p_over(y)))
    return 0.5 * (lin + inv)


def chen_sen_g(model: MixtureModel, nu: DiscreteMeasure, u):
    """g(u) = int_u^1 (xi'(s) - F(s)) ds."""
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("u must lie in [0, 1]")
    tails = _piece_F_integrals(nu)
    i = nu._piece(u)
    intF = tails[i + 1] + _int_F_from(nu, u, i)
    out = model.xi(1.0) - model.xi(u) - intF
    out = np.where(u >= 1.0, 0.0, out)
    return float(out) if scalar else out


def chen_sen_g_prime(model: MixtureModel, nu: DiscreteMeasure, u):
    return inverse_tail_sq_integral(nu, u) - model.d1(u)


def chen_sen_g_second(model: MixtureModel, nu: DiscreteMeasure, u):
    """g''(u) = -xi''(u) + 1 / nu([u, 1])^2 away from breakpoints."""
    return -model.d2(u) + 1.0 / tail_mass(nu, u) ** 2


@dataclass
class CriterionReport:
    residual: float
    min_g: float
    argmin_g: float
    g_at_breakpoints: dict[float, float]
    required_zeros: dict[float, float]
    required_flat: dict[float, float]
    g_at_1: float
    grid_step: float
    passed: bool
    reasons: list[str] = field(default_factory=list)
    certificate: str = "numerical"

    def to_dict(self) -> dict:
        return {
            "residual": self.residual,
            "min_g": self.min_g,
            "argmin_g": self.argmin_g,
            "g_at_breakpoints": {repr(k): v for k, v in self.g_at_breakpoints.items()},
            "required_zeros": {repr(k): v for k, v in self.required_zeros.items()},
            "required_flat": {repr(k): v for k, v in self.required_flat.items()},
            "g_at_1": self.g_at_1,
            "grid_step": self.grid_step,
            "passed": self.passed,
            "reasons": list(self.reasons),
            "certificate": self.certificate,
        }


def chen_sen_verify(
    model: MixtureModel,
    nu: DiscreteMeasure,
    grid_step: float = 1e-4,
    min_g_tol: float = CS_MIN_G_TOL,
    zero_tol: float = CS_ZERO_TOL,
    residual_tol: float = CS_RESIDUAL_TOL,
) -> CriterionReport:
    """Check the Chen-Sen optimality conditions on a grid plus exact anchors.

    Support condition for step measures: g vanishes at every breakpoint where
    gamma jumps up, and g' vanishes there too for interior breakpoints.
    """
    if not 0 < grid_step <= 1e-2:
        raise ValueError("grid_step must lie in (0, 1e-2]")
    residual = abs(model.d1(1.0) - nu._f1)
    n = int(round(1.0 / grid_step))
    grid = np.unique(np.concatenate([np.linspace(0.0, 1.0, n + 1), nu.breakpoints]))
    g = chen_sen_g(model, nu, grid)
    j = int(np.argmin(g))
    at_bp = {t: chen_sen_g(model, nu, t) for t in nu.breakpoints}
    zeros = {t: at_bp[t] for _, t in nu.charged_points()}
    flat = {t: chen_sen_g_prime(model, nu, t) for _, t in nu.charged_points() if t > 0}

    reasons = []
    if residual > residual_tol:
        reasons.append(f"functional residual {residual:.3e} > {residual_tol:g}")
    if g[j] < -min_g_tol:
        reasons.append(f"g dips to {g[j]:.3e} at u={grid[j]:.6f}")
    for t, v in zeros.items():
        if abs(v) > zero_tol:
            reasons.append(f"g({t:.6f}) = {v:.3e} is not zero")
    for t, v in flat.items():
        if abs(v) > zero_tol:
            reasons.append(f"g'({t:.6f}) = {v:.3e} is not zero")
    return CriterionReport(
        residual=float(residual),
        min_g=float(g[j]),
        argmin_g=float(grid[j]),
        g_at_breakpoints=at_bp,
        required_zeros=zeros,
        required_flat=flat,
        g_at_1=chen_sen_g(model, nu, 1.0),
        grid_step=grid_step,
        passed=not reasons,
        reasons=reasons,
    )
