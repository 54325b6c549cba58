import numpy as np
import pytest
from scipy.integrate import quad

from conftest import EXAMPLES, solved
from parisi_zero import dual
from parisi_zero.dual import DualPoint, InadmissibleError, nu_hat, optimal_B, parisi_dual
from parisi_zero.measure import DiscreteMeasure, crisanti_sommers
from parisi_zero.mixture import MixtureModel
from parisi_zero.solver import solve_1rsb, solve_rs

IDS = [e.name for e in EXAMPLES]
EX1 = EXAMPLES[0].model


def _pieces(nu, lo, hi):
    return [lo] + [t for t in nu.breakpoints if lo < t < hi] + [hi]


def quad_nu_hat(model, nu, s):
    gamma = lambda r: nu.levels[int(nu._piece(r))]  # noqa: E731
    pts = _pieces(nu, s, 1.0)
    body = sum(quad(lambda r: model.d2(r) * gamma(r), a, b, epsabs=1e-14)[0] for a, b in zip(pts, pts[1:]))
    return body + nu.atom * model.d2(1.0)


def quad_P(model, nu, B):
    gamma = lambda s: nu.levels[int(nu._piece(s))]  # noqa: E731
    pts = _pieces(nu, 0.0, 1.0)
    first = sum(quad(lambda s: model.d2(s) / (B - quad_nu_hat(model, nu, s)), a, b, epsabs=1e-13)[0]
                for a, b in zip(pts, pts[1:]))
    third = sum(quad(lambda s: s * model.d2(s) * gamma(s), a, b, epsabs=1e-14)[0] for a, b in zip(pts, pts[1:]))
    third += nu.atom * model.d2(1.0)
    return 0.5 * (first + B - third)


@pytest.mark.parametrize("ex", EXAMPLES, ids=IDS)
def test_duality_gap(ex):
    nu = solved(ex).measure
    assert abs(dual.dual_gap(ex.model, nu)) <= 1e-9


@pytest.mark.parametrize("ex", EXAMPLES, ids=IDS)
def test_optimal_b_matches_two_step_display(ex):
    c = solved(ex).coords
    m = ex.model
    expected = (c.A1 * m.d1(c.q) + c.A2 * (m.d1(1) - m.d1(c.q)) + c.Delta * m.d2(1)
                + 1 / (c.A1 * c.q + c.A2 * (1 - c.q) + c.Delta))
    assert optimal_B(m, solved(ex).measure) == pytest.approx(expected, rel=1e-13)


def test_b_minus_nu_hat_on_first_piece():
    ex = EXAMPLES[0]
    c = solved(ex).coords
    nu = solved(ex).measure
    B = optimal_B(ex.model, nu)
    for s in np.linspace(0, c.q, 7):
        assert B - nu_hat(ex.model, nu, s) == pytest.approx(c.A1 * ex.model.d1(s) + 1 / nu.total_mass, rel=1e-12)


def test_nu_hat_includes_atom_at_one():
    nu = DiscreteMeasure.two_step(0.4, 0.5, 1.5, 0.3)
    assert nu_hat(EX1, nu, 1.0) == pytest.approx(0.3 * EX1.d2(1.0), rel=1e-15)
    for s in (0.0, 0.2, 0.4, 0.7, 0.99):
        assert nu_hat(EX1, nu, s) == pytest.approx(quad_nu_hat(EX1, nu, s), rel=1e-11)


def test_rs_and_one_rsb_nu_hat_and_b():
    nu = DiscreteMeasure.one_step(0.8, 0.3)
    assert nu_hat(EX1, nu, 0.0) == pytest.approx(0.8 * EX1.d1(1.0) + 0.3 * EX1.d2(1.0), rel=1e-14)
    assert optimal_B(EX1, nu) == pytest.approx(0.8 * EX1.d1(1) + 0.3 * EX1.d2(1) + 1 / 1.1, rel=1e-14)


def test_parisi_dual_matches_quadrature():
    rng = np.random.default_rng(41)
    for _ in range(10):
        q = rng.uniform(0.1, 0.9)
        a1, a2 = np.sort(rng.uniform(0.0, 2.0, 2))
        nu = DiscreteMeasure.two_step(q, a1, a2, rng.uniform(0.1, 1.0))
        B = optimal_B(EX1, nu) + rng.uniform(0.0, 1.0)
        assert parisi_dual(EX1, DualPoint(B, nu)) == pytest.approx(quad_P(EX1, nu, B), abs=1e-10)


@pytest.mark.parametrize("ex", EXAMPLES, ids=IDS)
def test_b_optimality(ex):
    nu = solved(ex).measure
    B = optimal_B(ex.model, nu)
    P = lambda b: parisi_dual(ex.model, DualPoint(b, nu))  # noqa: E731
    h = 1e-5
    assert abs((P(B + h) - P(B - h)) / (2 * h)) <= 1e-6
    assert P(B + 1e-3) > P(B)


def test_p_convex_in_b():
    nu = solved(EXAMPLES[0]).measure
    b0 = nu_hat(EX1, nu, 0.0)
    bs = b0 + np.geomspace(1e-3, 10, 60)
    P = np.array([parisi_dual(EX1, DualPoint(b, nu)) for b in bs])
    for i in range(1, len(bs) - 1):
        # second divided difference on a non-uniform grid
        d2 = ((P[i + 1] - P[i]) / (bs[i + 1] - bs[i]) - (P[i] - P[i - 1]) / (bs[i] - bs[i - 1]))
        assert d2 >= -1e-8


def test_inadmissible_point():
    nu = DiscreteMeasure.two_step(0.4, 0.5, 1.5, 0.3)
    with pytest.raises(InadmissibleError):
        parisi_dual(EX1, DualPoint(nu_hat(EX1, nu, 0.0), nu))


@pytest.mark.parametrize("spec", ["1:3", "1:4"])
def test_one_rsb_and_rs_duality(spec):
    m = MixtureModel.parse(spec)
    nu = solve_1rsb(m).measure
    assert abs(dual.dual_gap(m, nu)) <= 1e-9
    rs = solve_rs(m).measure
    assert abs(dual.dual_gap(m, rs)) <= 1e-9


@pytest.mark.parametrize("ex", EXAMPLES, ids=IDS)
def test_fbar_general_matches_closed_form(ex):
    from parisi_zero import system2rsb as sys2

    res = solved(ex)
    nu = res.measure
    B = optimal_B(ex.model, nu)
    s = np.linspace(0, 1, 101)
    assert np.allclose(dual.fbar(ex.model, nu, B, s), sys2.fbar(ex.model, res.coords, s), atol=1e-10)
    assert abs(dual.f_function(ex.model, nu, B, 1.0)) <= 1e-8
    assert abs(dual.f_function(ex.model, nu, B, res.coords.q)) <= 1e-8


def test_fbar_matches_quadrature_of_f():
    ex = EXAMPLES[1]
    nu = solved(ex).measure
    B = optimal_B(ex.model, nu)
    for s in (0.0, 0.3, 0.9):
        pts = _pieces(nu, s, 1.0)
        oracle = sum(quad(lambda r: dual.f_function(ex.model, nu, B, r) * ex.model.d2(r), a, b, epsabs=1e-13)[0]
                     for a, b in zip(pts, pts[1:]))
        assert dual.fbar(ex.model, nu, B, s) == pytest.approx(oracle, abs=1e-10)


def test_q_closed_form_energy_sign():
    nu = solved(EXAMPLES[0]).measure
    assert crisanti_sommers(EX1, nu) > 0
