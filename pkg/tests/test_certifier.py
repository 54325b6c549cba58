import json

import numpy as np
import pytest

from conftest import EXAMPLES, solved
from parisi_zero import certifier
from parisi_zero import system2rsb as sys2
from parisi_zero.certifier import (
    CERTIFIED,
    InvalidRectangle,
    certify_rectangle,
    certify_solution,
    check_fbar,
    check_fbar_measure,
    check_psi_negativity,
    count_roots,
    isolate_roots,
)
from parisi_zero.measure import DiscreteMeasure
from parisi_zero.mixture import MixtureModel

IDS = [e.name for e in EXAMPLES]
EX1 = EXAMPLES[0]
CORNER_CHECKS = ("z1_positive", "ordering", "second_derivative", "h1_at_1", "h2_at_0")
NAMED = CORNER_CHECKS + ("branch_check", "lambda_monotone", "chen_sen", "psi1_negative", "psi2_negative",
                         "fbar_nonnegative")

_REPORTS = {}


def report(ex):
    if ex.name not in _REPORTS:
        _REPORTS[ex.name] = certify_rectangle(ex.model, ex.rect)
    return _REPORTS[ex.name]


@pytest.mark.parametrize("ex", EXAMPLES, ids=IDS)
def test_reference_rectangles_certify(ex):
    rep = report(ex)
    assert rep.verdict == CERTIFIED, rep.reasons
    for name in NAMED:
        assert rep.check(name).passed, name
    for name in CORNER_CHECKS + ("branch_check",):
        assert rep.check(name).margin > 1e-12


@pytest.mark.parametrize("ex", EXAMPLES, ids=IDS)
def test_mandatory_flags_follow_convexity(ex):
    rep = report(ex)
    for name in ("psi1_negative", "psi2_negative", "fbar_nonnegative"):
        assert rep.check(name).mandatory is ex.convex


@pytest.mark.parametrize("ex", EXAMPLES, ids=IDS)
def test_three_optimality_formulations_agree(ex):
    rep = report(ex)
    assert rep.check("chen_sen").passed
    assert rep.check("g_nonpositive").passed
    assert rep.check("fbar_nonnegative").passed


def test_margins_bitwise_reproducible():
    a = certify_rectangle(EX1.model, EX1.rect).to_dict()
    b = certify_rectangle(EX1.model, EX1.rect).to_dict()
    assert json.dumps(a) == json.dumps(b)


def test_nested_rectangles_never_flip_to_fail():
    c = solved(EX1).coords
    outer = report(EX1)
    passed = {ch.name for ch in outer.checks if ch.passed}
    for dq in (2e-3, 1e-3, 5e-4, 2e-4, 1e-4):
        rect = (c.q - dq, c.q + dq, c.z2 - 20 * dq, c.z2 + 20 * dq)
        inner = certify_rectangle(EX1.model, rect)
        for ch in inner.checks:
            if ch.name in passed:
                assert ch.passed, (dq, ch.name, ch.margin)
        passed = {ch.name for ch in inner.checks if ch.passed}


@pytest.mark.parametrize("rect", [(0.745, 0.745, 3.1, 3.3), (0.7, 0.6, 3.1, 3.3), (0.5, 0.6, 3.3, 3.1),
                                  (0.0, 0.6, 1, 2), (0.5, 1.0, 1, 2), (0.5, 0.6, -1, 2), "abc"])
def test_invalid_rectangles(rect):
    with pytest.raises(InvalidRectangle):
        certify_rectangle(EX1.model, rect)


def test_rectangle_without_solution():
    rep = certify_rectangle(EX1.model, (0.5, 0.6, 3.17, 3.25))
    assert not rep.certified
    assert any(r.startswith("NoSolution") for r in rep.reasons)


def test_out_of_scope_model_not_certified():
    m = MixtureModel.parse("1/3:3,1/3:4,1/3:16")
    rep = certify_rectangle(m, (0.7, 0.75, 1.0, 4.0))
    assert not rep.certified
    assert any(r.startswith("NotSPlusP") for r in rep.reasons)


def test_report_json_contains_every_margin():
    d = report(EX1).to_dict()
    json.dumps(d, allow_nan=False)
    names = [c["name"] for c in d["checks"]]
    for name in NAMED:
        assert name in names
    assert d["rectangle"] == list(EX1.rect)
    assert d["certificate"] == "numerical"


@pytest.mark.parametrize("ex", EXAMPLES, ids=IDS)
def test_h_roots(ex):
    c = solved(ex).coords
    assert count_roots(lambda u: sys2.h1(ex.model, c, u), (0.0, c.q)) == 1
    assert count_roots(lambda u: sys2.h2(ex.model, c, u), (c.q, 1.0)) == 1


def test_isolate_roots_known_polynomial():
    iso = isolate_roots(lambda x: (x - 0.25) * (x - 0.5) * (x - 0.75), (0.0, 1.0))
    assert iso.count == 3
    assert np.allclose(iso.roots, [0.25, 0.5, 0.75], atol=1e-10)


def test_isolate_roots_flags_double_root():
    iso = isolate_roots(lambda x: (x - 0.3) ** 2, (0.0, 1.0))
    assert iso.count == 0 and len(iso.suspected_doubles) >= 1


def test_isolate_roots_open_interval():
    # endpoint zeros are excluded
    assert count_roots(lambda x: x * (1 - x), (0.0, 1.0)) == 0


@pytest.mark.parametrize("ex", [EXAMPLES[2], EXAMPLES[3]], ids=["ex3", "ex4"])
def test_psi_negative_for_convex_examples(ex):
    psi = check_psi_negativity(ex.model, solved(ex).coords)
    assert psi.psi1_ok and psi.psi2_ok
    assert all(abs(v) <= 1e-8 for v in psi.anchors.values())


@pytest.mark.parametrize("ex", EXAMPLES, ids=IDS)
def test_fbar_check(ex):
    fb = check_fbar(ex.model, solved(ex).coords)
    assert fb.ok and fb.sign_mismatches == 0
    assert fb.closed_form_gap <= 1e-10
    assert abs(fb.anchors["f(q)"]) <= 1e-8


def test_fbar_anchors_fail_for_perturbed_delta():
    c = solved(EX1).coords
    nu = DiscreteMeasure.two_step(c.q, c.A1, c.A2, c.Delta * 1.05)
    fb = check_fbar_measure(EX1.model, nu, c.q)
    assert not fb.ok
    assert max(abs(v) for v in fb.anchors.values()) > 1e-8


def test_lambda_fallback_for_example2():
    chk = report(EXAMPLES[1]).check("lambda_monotone")
    assert chk.passed and "phi1" in chk.detail


def test_certify_solution_auto_rectangle():
    c = solved(EX1).coords
    rep = certify_solution(EX1.model, c)
    assert rep.certified
    qm, qp, zm, zp = rep.rectangle
    assert qm < c.q < qp and zm < c.z2 < zp


def test_corner_margins_match_report():
    margins = certifier.corner_margins(EX1.model, EX1.rect)
    rep = report(EX1)
    for name, m in margins.items():
        assert rep.check(name).margin == m
