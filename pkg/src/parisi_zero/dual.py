"""The zero-temperature Parisi functional P(B, nu) and its optimal B.

For a step measure, ``B - nu_hat(s)`` is affine in ``xi'(s)`` on every piece,
so every integral below is closed form. The atom at 1 contributes
``Delta * xi''(1)`` to ``nu_hat(s)`` for all ``s`` in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._num import log1p_over, log1p_rem
from .measure import DiscreteMeasure
from .mixture import MixtureModel

ADMISSIBLE_MARGIN = 1e-12


class InadmissibleError(ValueError):
    pass


def nu_hat(model: MixtureModel, nu: DiscreteMeasure, s: float) -> float:
    """int_s^1 xi''(r) nu(dr), atom included."""
    if not 0.0 <= s <= 1.0:
        raise ValueError("s must lie in [0, 1]")
    e = nu._edges
    out = nu.atom * model.d2(1.0)
    for i, gam in enumerate(nu.levels):
        a, b = e[i], e[i + 1]
        if b <= s:
            continue
        out += gam * (model.d1(b) - model.d1(max(a, s)))
    return float(out)


@dataclass(frozen=True)
class DualPoint:
    B: float
    nu: DiscreteMeasure

    def margin(self, model: MixtureModel) -> float:
        return self.B - nu_hat(model, self.nu, 0.0)


def _piece_denominators(model: MixtureModel, nu: DiscreteMeasure, B: float):
    """B - nu_hat at the left end of each piece, and the xi' increments."""
    e = nu._edges
    d1 = model.d1(e)
    dv = np.diff(d1)
    D_left = np.array([B - nu_hat(model, nu, float(a)) for a in e[:-1]])
    return D_left, dv, d1


def parisi_dual(model: MixtureModel, point: DualPoint) -> float:
    """P(B, nu) = (int xi''/(B - nu_hat) + B - int s xi''(s) nu(ds)) / 2."""
    nu, B = point.nu, point.B
    if not point.margin(model) > ADMISSIBLE_MARGIN:
        raise InadmissibleError(f"B={B!r} is not above nu_hat(0)={nu_hat(model, nu, 0.0)!r}")
    D_left, dv, _ = _piece_denominators(model, nu, B)
    gam = nu._gam
    first = float(np.sum(dv / D_left * log1p_over(gam * dv / D_left)))
    e = nu._edges
    leg = e * model.d1(e) - model.xi(e)
    third = float(np.sum(gam * np.diff(leg))) + nu.atom * model.d2(1.0)
    return 0.5 * (first + B - third)


def optimal_B(model: MixtureModel, nu: DiscreteMeasure) -> float:
    """B = nu_hat(0) + 1 / nu([0, 1])."""
    return nu_hat(model, nu, 0.0) + 1.0 / nu.total_mass


def dual_gap(model: MixtureModel, nu: DiscreteMeasure) -> float:
    from .measure import crisanti_sommers

    return parisi_dual(model, DualPoint(optimal_B(model, nu), nu)) - crisanti_sommers(model, nu)


def _f_pieces(model: MixtureModel, nu: DiscreteMeasure, B: float):
    D_left, dv, d1 = _piece_denominators(model, nu, B)
    gam = nu._gam
    per = dv / (D_left * (D_left + gam * dv))
    cum = np.concatenate([[0.0], np.cumsum(per)])
    return D_left, d1, cum


def f_function(model: MixtureModel, nu: DiscreteMeasure, B: float, r: float) -> float:
    """f(r) = int_0^r xi''(t) dt / (B - nu_hat(t))^2 - r."""
    D_left, d1, cum = _f_pieces(model, nu, B)
    i = int(nu._piece(r))
    v = model.d1(r) - d1[i]
    return float(cum[i] + v / (D_left[i] * (D_left[i] + nu._gam[i] * v)) - r)


def fbar(model: MixtureModel, nu: DiscreteMeasure, B: float, s):
    """fbar(s) = int_s^1 f(r) xi''(r) dr, for any step measure and B."""
    scalar = np.ndim(s) == 0
    s = np.asarray(s, dtype=float)
    D_left, d1, cum = _f_pieces(model, nu, B)
    e = nu._edges
    gam = nu._gam

    def leg(x):
        return x * model.d1(x) - model.xi(x)

    def piece(i, x):
        Da, g = D_left[i], gam[i]
        vx = model.d1(x) - d1[i]
        w = d1[i + 1] - model.d1(x)
        Dx = Da + g * vx
        term2 = w * vx / (Da * Dx) + w * w / (Dx * Dx) * log1p_rem(g * w / Dx)
        return cum[i] * w + term2 - (leg(e[i + 1]) - leg(x))

    k = len(nu.levels)
    full = piece(np.arange(k), e[:-1])
    after = np.concatenate([np.cumsum(full[::-1])[::-1][1:], [0.0]])
    i0 = nu._piece(s)
    out = piece(i0, s) + after[i0]
    return float(out) if scalar else out
