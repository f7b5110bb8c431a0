import numpy as np
import pytest

from vako import boundary, extremals, problems
from vako.errors import UnknownProblem
from vako.geometry import Submanifold

NAMES = ["flat-3", "flat-2", "flat-1", "heisenberg", "heisenberg-potential", "martinet", "driven-flat"]


@pytest.mark.parametrize("name", NAMES)
def test_self_check(name):
    problems.builtin(name).self_check()


def test_flat_bvp_straight_line():
    sol = boundary.shoot(problems.builtin("flat-3").bvp("default", 100))
    t = sol.path.times
    assert np.allclose(sol.path.q, np.outer(t, [1.0, 1.0, 1.0]), atol=1e-10)
    assert sol.action == pytest.approx(1.5, abs=1e-10)


def test_heisenberg_frame_annihilated(rng):
    prob = problems.builtin("heisenberg").problem
    for q in rng.normal(size=(100, 3)):
        assert np.max(np.abs(prob.theta(0.0, q) @ prob.X(0.0, q))) <= 1e-15


def test_martinet_line_singular():
    prob = problems.builtin("martinet").problem
    curve = extremals.line_probe(prob)
    verdict = extremals.abnormal_test(prob, curve, Submanifold.Point(curve.q[0]), Submanifold.Point(curve.q[-1]))
    assert verdict.singular


@pytest.mark.parametrize("name, params", [("nope", {}), ("flat-4", {"n": 3}), ("heisenberg", {"n": 3}),
                                          ("flat-0", {})])
def test_unknown(name, params):
    with pytest.raises(UnknownProblem):
        problems.builtin(name, **params)


def test_unknown_is_a_key_error():
    with pytest.raises(KeyError):
        problems.builtin("nope")


def test_flat_dimension_parameter():
    bp = problems.builtin("flat-2", n=4)
    assert (bp.problem.n, bp.problem.k) == (4, 2)


@pytest.mark.parametrize("name", ["heisenberg", "martinet", "driven-flat"])
def test_presets_have_anchor_on_P(name):
    bp = problems.builtin(name)
    for key, d in bp.bvps.items():
        assert d.P.contains(d.q0), key
        bp.bvp(key, 10)


def test_corpus_and_facts():
    names = [bp.name for bp in problems.corpus()]
    assert "heisenberg" in names and "martinet" in names
    assert not problems.builtin("driven-flat").autonomous
    assert problems.builtin("heisenberg").facts
