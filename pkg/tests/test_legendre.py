import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vako import legendre
from vako.errors import NotHyperRegular
from vako.legendre import FiberMap
from vako.numerics import NewtonConfig

BASE = (0.0, np.zeros(1))
A = np.array([[2.0, 0.0], [0.0, 1.0]])
B = np.array([0.5, -1.0])


def quadratic(A=A, b=B):
    return FiberMap(lambda base, v: 0.5 * v @ A @ v + b @ v, len(b),
                    dZ=lambda base, v: A @ v + b, d2Z=lambda base, v: A)


def quartic_convex():
    def Z(base, v):
        s = v @ v
        return 0.25 * s * s + 0.5 * s

    return FiberMap(Z, 2, dZ=lambda base, v: (v @ v + 1.0) * v,
                    d2Z=lambda base, v: (v @ v + 1.0) * np.eye(2) + 2.0 * np.outer(v, v),
                    check_base=BASE)


def exponential():
    return FiberMap(lambda base, v: float(np.exp(v[0])), 1,
                    dZ=lambda base, v: np.exp(v), d2Z=lambda base, v: np.exp(v)[None, :])


def half_square(m=2):
    return FiberMap(lambda base, v: 0.5 * v @ v, m, dZ=lambda base, v: v, d2Z=lambda base, v: np.eye(m))


def test_energy_half_square():
    assert legendre.energy(half_square(), BASE, np.array([3.0, 4.0])) == pytest.approx(12.5, abs=1e-12)


def test_energy_linear_is_zero():
    Z = FiberMap(lambda base, v: np.array([1.0, -2.0]) @ v, 2, dZ=lambda base, v: np.array([1.0, -2.0]))
    for v in ([0.0, 0.0], [1.0, 3.0], [-7.0, 2.0]):
        assert legendre.energy(Z, BASE, np.array(v)) == pytest.approx(0.0, abs=1e-12)


def test_energy_quadratic():
    Z = quadratic(b=np.zeros(2))
    assert legendre.energy(Z, BASE, np.array([1.0, 1.0])) == pytest.approx(1.5, abs=1e-12)


def test_fiber_derivative_half_square():
    assert np.allclose(legendre.fiber_derivative(half_square(), BASE, np.array([3.0, 4.0])), [3.0, 4.0])


def test_fiber_derivative_quadratic():
    v = np.array([0.3, -0.7])
    assert np.allclose(legendre.fiber_derivative(quadratic(), BASE, v), A @ v + B)


def test_quartic_without_callbacks_matches_analytic():
    plain = FiberMap(quartic_convex().Z, 2)
    v = np.array([0.8, -0.3])
    assert np.allclose(plain.gradient(BASE, v), quartic_convex().gradient(BASE, v), atol=1e-8)
    assert np.allclose(plain.hessian(BASE, v), quartic_convex().hessian(BASE, v), atol=1e-5)


def test_fiber_derivative_by_differences_without_callback():
    Z = FiberMap(lambda base, v: 0.5 * v @ A @ v + B @ v, 2)
    v = np.array([0.3, -0.7])
    assert np.allclose(legendre.fiber_derivative(Z, BASE, v), A @ v + B, atol=1e-8)


@pytest.mark.parametrize("p", [[0.0, 0.0], [1.0, 2.0], [-3.0, 0.5]])
def test_transform_quadratic_closed_form(p):
    p = np.array(p)
    zs, v = legendre.legendre_transform(quadratic(), BASE, p)
    expected = 0.5 * (p - B) @ np.linalg.solve(A, p - B)
    assert zs == pytest.approx(expected, abs=1e-12)
    assert np.allclose(A @ v + B, p)


def test_transform_exponential_at_one():
    zs, v = legendre.legendre_transform(exponential(), BASE, np.array([1.0]))
    assert v[0] == pytest.approx(0.0, abs=1e-12)
    assert zs == pytest.approx(-1.0, abs=1e-12)


def test_transform_heisenberg_value():
    zs, _ = legendre.legendre_transform(half_square(), BASE, np.array([0.3, -0.7]))
    assert zs == pytest.approx(0.29, abs=1e-14)


def test_involution_quadratic(rng):
    pts = rng.normal(size=(20, 2))
    assert legendre.involution_check(quadratic(), BASE, pts) <= 1e-8


def test_involution_exponential():
    assert legendre.involution_check(exponential(), BASE, [[-1.0], [0.0], [1.0]]) <= 1e-8


def test_exponential_dual_closed_form():
    res = legendre.dual(exponential())
    for p in (0.5, 1.0, 3.0):
        assert res.Zstar.value(BASE, np.array([p])) == pytest.approx(p * np.log(p) - p, abs=1e-12)


def test_involution_quartic_convex(rng):
    pts = rng.uniform(-1.5, 1.5, size=(10, 2))
    assert legendre.involution_check(quartic_convex(), BASE, pts,
                                     NewtonConfig(abs_tolerance=1e-13)) <= 1e-7


def test_mutual_inverse_and_dual_gradient(rng):
    Z = quartic_convex()
    primal = rng.uniform(-1, 1, size=(5, 2))
    dual_pts = rng.uniform(-2, 2, size=(5, 2))
    assert legendre.mutual_inverse_deviation(Z, BASE, primal, dual_pts) <= 1e-10
    assert legendre.dual_gradient_deviation(Z, BASE, dual_pts) <= 1e-6


def test_dual_hessian_is_inverse():
    res = legendre.dual(quartic_convex())
    p = np.array([0.4, -1.1])
    v = res.inverse(BASE, p)
    assert np.allclose(res.Zstar.hessian(BASE, p) @ quartic_convex().hessian(BASE, v), np.eye(2))


def test_non_injective_detected():
    Z = FiberMap(lambda base, u: 0.25 * u[0] ** 4 - 0.5 * u[0] ** 2, 1,
                 dZ=lambda base, u: u ** 3 - u, d2Z=lambda base, u: (3 * u ** 2 - 1)[None, :])
    with pytest.raises(NotHyperRegular):
        legendre.inverse_fiber_derivative(Z, BASE, np.array([0.01]), check_unique=True)


def test_singular_hessian_rejected():
    Z = FiberMap(lambda base, u: 0.25 * u[0] ** 4, 1, dZ=lambda base, u: u ** 3,
                 d2Z=lambda base, u: (3 * u ** 2)[None, :])
    with pytest.raises(NotHyperRegular):
        legendre.inverse_fiber_derivative(Z, BASE, np.array([0.0]))


def test_spot_check_catches_wrong_gradient():
    with pytest.raises(ValueError):
        FiberMap(lambda base, v: 0.5 * v @ v, 2, dZ=lambda base, v: 2.0 * v, check_base=BASE)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, 2, elements=st.floats(-3, 3)))
def test_round_trip_property(v):
    Z = quartic_convex()
    back = legendre.inverse_fiber_derivative(Z, BASE, Z.gradient(BASE, v))
    assert np.allclose(back, v, atol=1e-9)
