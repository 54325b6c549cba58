from dataclasses import dataclass
from fractions import Fraction

import pytest

from parisi_zero.mixture import MixtureModel


@dataclass(frozen=True)
class Example:
    name: str
    spec: str
    rect: tuple  # (q-, q+, z2-, z2+)
    signs: tuple  # ((fname, q, z2, sign), ...)
    klass: str
    convex: bool
    lam: Fraction

    @property
    def model(self) -> MixtureModel:
        return MixtureModel.parse(self.spec)


def _signs(f1, f2):
    out = [("f1", q, z, s) for q, z, s in f1]
    out += [("f2", q, z, s) for q, z, s in f2]
    return tuple(out)


EXAMPLES = (
    Example(
        "ex1", "5/7:3,2/7:16", (0.743, 0.747, 3.17, 3.25),
        _signs([(0.743, 3.2, 1), (0.743, 3.22, -1), (0.747, 3.2, 1), (0.747, 3.22, -1)],
               [(0.743, 3.22, 1), (0.743, 3.25, -1), (0.747, 3.17, 1), (0.747, 3.2, -1)]),
        "pure-like", False, Fraction(2, 7),
    ),
    Example(
        "ex2", "5/6:3,1/6:16", (0.824, 0.828, 1.54, 1.64),
        _signs([(0.824, 1.58, 1), (0.824, 1.6, -1), (0.828, 1.57, 1), (0.828, 1.6, -1)],
               [(0.824, 1.6, 1), (0.824, 1.64, -1), (0.828, 1.54, 1), (0.828, 1.57, -1)]),
        "full-mixture", False, Fraction(1, 6),
    ),
    Example(
        "ex3", "5/6:4,1/6:40", (0.89, 0.9, 3.5, 4.1),
        _signs([(0.89, 3.6, 1), (0.89, 3.8, -1), (0.9, 3.7, 1), (0.9, 3.9, -1)],
               [(0.89, 3.9, 1), (0.89, 4.1, -1), (0.9, 3.5, 1), (0.9, 3.7, -1)]),
        "full-mixture", True, Fraction(1, 6),
    ),
    Example(
        "ex4", "5/8:4,3/8:40", (0.83, 0.833, 9.3, 9.8),
        _signs([(0.83, 9.2, 1), (0.83, 9.51, -1), (0.833, 9.4, 1), (0.833, 9.8, -1)],
               [(0.83, 9.51, 1), (0.83, 9.8, -1), (0.833, 9.3, 1), (0.833, 9.4, -1)]),
        "pure-like", True, Fraction(3, 8),
    ),
)


@pytest.fixture(params=EXAMPLES, ids=[e.name for e in EXAMPLES])
def example(request) -> Example:
    return request.param


_SOLVED = {}


def solved(ex: Example):
    """Cached 2-RSB solution inside the example rectangle."""
    from parisi_zero.solver import solve_2rsb

    if ex.name not in _SOLVED:
        _SOLVED[ex.name] = solve_2rsb(ex.model, ex.rect[0], ex.rect[1])
    return _SOLVED[ex.name]


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS, _line
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        name, ok, detail = RESULTS[num]
        terminalreporter.write_line(_line(num, name, ok, detail))
