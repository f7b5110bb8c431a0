import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vako import flow, problems
from vako.hamiltonian import DegenerateHamiltonian, eval_H

TWO_PI = 2.0 * np.pi


def dh_of(name):
    return DegenerateHamiltonian(problems.builtin(name).lagrangian)


def test_free_particle():
    dh = dh_of("flat-3")
    path = flow.integrate_hamilton(dh, 0.0, 1.0, np.zeros(3), np.array([1.0, 0.0, 0.0]), 100)
    assert np.allclose(path.q[-1], [1.0, 0.0, 0.0], atol=1e-10)
    assert np.allclose(path.p, [1.0, 0.0, 0.0], atol=1e-10)
    assert flow.flow_report(path, dh.problem, True).energy_drift <= 1e-12


def test_heisenberg_straight_line():
    path = flow.integrate_hamilton(dh_of("heisenberg"), 0.0, 1.0, np.zeros(3), np.array([1.0, 0.0, 0.0]), 200)
    assert np.allclose(path.q[-1], [1.0, 0.0, 0.0], atol=1e-9)


def test_heisenberg_circle_closes():
    dh = dh_of("heisenberg")
    p0 = np.array([1.0, 0.0, TWO_PI])
    path = flow.integrate_hamilton(dh, 0.0, 1.0, np.zeros(3), p0, 2000)
    ref = flow.flow_endpoint(dh, 0.0, 1.0, np.zeros(3), p0, 20000)[0]
    assert np.max(np.abs(path.q[-1, :2])) <= 1e-6
    assert path.q[-1, 2] == pytest.approx(ref[2], abs=1e-9)
    # unit speed circle of circumference 1 encloses area 1/(4 pi)
    assert path.q[-1, 2] == pytest.approx(1.0 / (2.0 * TWO_PI), abs=1e-9)


def test_horizontality_refinement():
    dh = dh_of("heisenberg")
    p0 = np.array([1.0, 0.0, TWO_PI])
    h = [flow.flow_report(flow.integrate_hamilton(dh, 0.0, 1.0, np.zeros(3), p0, s), dh.problem, True)
         .horizontality_max for s in (500, 1000, 2000)]
    assert h[-1] <= 1e-4
    assert 3.0 < h[0] / h[1] < 5.0 and 3.0 < h[1] / h[2] < 5.0


def test_driven_problem_has_no_drift_field():
    bp = problems.builtin("driven-flat")
    path = flow.integrate_hamilton(DegenerateHamiltonian(bp.lagrangian), 0.0, 1.0, np.zeros(3),
                                   np.array([1.0, 0.5, 0.0]), 100)
    assert flow.flow_report(path, bp.problem, bp.autonomous).energy_drift is None


def test_endpoint_matches_full_path():
    dh = dh_of("martinet")
    q0, p0 = np.zeros(3), np.array([0.7, 1.0, 3.0])
    qb, pb = flow.flow_endpoint(dh, 0.0, 1.0, q0, p0, 300)
    path = flow.integrate_hamilton(dh, 0.0, 1.0, q0, p0, 300)
    assert np.array_equal(qb, path.q[-1]) and np.array_equal(pb, path.p[-1])


def test_path_samples_consistent():
    dh = dh_of("heisenberg-potential")
    path = flow.integrate_hamilton(dh, 0.0, 1.0, np.zeros(3), np.array([1.0, 0.3, 0.5]), 50)
    assert len(path) == 51 and path.u.shape == (51, 2)
    for j in (0, 25, 50):
        assert path.H[j] == pytest.approx(eval_H(dh, path.times[j], path.q[j], path.p[j]).H, abs=1e-14)


@pytest.mark.parametrize("name", ["heisenberg", "heisenberg-potential", "martinet"])
def test_energy_drift_order(name):
    dh = dh_of(name)
    p0 = np.array([1.0, 0.5, 3.0])
    drift = [flow.flow_report(flow.integrate_hamilton(dh, 0.0, 1.0, np.zeros(3), p0, s), dh.problem, True)
             .energy_drift for s in (250, 500, 1000)]
    assert drift[-1] <= 1e-8
    if drift[1] > 1e-13:
        assert np.log2(drift[1] / drift[2]) >= 3.7


def test_lift_flat():
    lagr = problems.builtin("flat-3").lagrangian
    assert np.allclose(flow.lift_from_velocity(lagr, 0.0, np.zeros(3), np.array([1.0, 2.0, 3.0])), [1, 2, 3])


def test_lift_heisenberg_origin(heis):
    p = flow.lift_from_velocity(heis.lagrangian, 0.0, np.zeros(3), np.array([1.0, 0.0]))
    assert np.allclose(p, [1.0, 0.0, 0.0])


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 3, elements=st.floats(-2, 2)), arrays(np.float64, 2, elements=st.floats(-2, 2)),
       st.sampled_from(["heisenberg", "heisenberg-potential", "martinet"]))
def test_lift_round_trip(q, u, name):
    bp = problems.builtin(name)
    p = flow.lift_from_velocity(bp.lagrangian, 0.0, q, u)
    assert np.allclose(eval_H(DegenerateHamiltonian(bp.lagrangian), 0.0, q, p).u, u, atol=1e-8)
