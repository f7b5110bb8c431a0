"""Fiberwise Legendre transform with numerical inversion of the fiber derivative."""
from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from . import numerics
from .errors import MaxIterations, NonFiniteEvaluation, NotHyperRegular, SingularJacobian
from .numerics import NewtonConfig

HESSIAN_COND_LIMIT = 1e10
N_RESTARTS = 8


@dataclass(frozen=True)
class FiberMap:
    """A scalar map ``Z(base, v)`` on the fibers of a vector bundle of rank ``m``.

    ``dZ`` and ``d2Z`` are optional analytic fiber derivatives; missing ones
    are replaced by central differences. When ``check_base`` is given the
    supplied callbacks are spot-checked against differences of ``Z`` at 5
    random fiber points over that base.
    """
    Z: Callable
    m: int
    dZ: Optional[Callable] = None
    d2Z: Optional[Callable] = None
    check_base: Any = None
    check_scale: float = 1.0

    def __post_init__(self):
        if self.check_base is not None and (self.dZ is not None or self.d2Z is not None):
            self.spot_check(self.check_base)

    def value(self, base, v):
        z = float(self.Z(base, np.asarray(v, dtype=float)))
        if not np.isfinite(z):
            raise NonFiniteEvaluation("fiber map returned a non-finite value")
        return z

    def gradient(self, base, v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if self.dZ is not None:
            g = np.atleast_1d(np.asarray(self.dZ(base, v), dtype=float))
            if not np.all(np.isfinite(g)):
                raise NonFiniteEvaluation("fiber gradient is non-finite")
            return g
        return numerics.fd_gradient(lambda w: self.value(base, w), v)

    def hessian(self, base, v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        if self.d2Z is not None:
            return np.atleast_2d(np.asarray(self.d2Z(base, v), dtype=float))
        H = numerics.fd_jacobian(lambda w: self.gradient(base, w), v, 1e-5 * (1.0 + np.abs(v)))
        return 0.5 * (H + H.T)

    def spot_check(self, base, samples=5, tol=1e-5, seed=0):
        rng = np.random.default_rng(seed)
        plain = FiberMap(self.Z, self.m)
        for _ in range(samples):
            v = self.check_scale * rng.uniform(-1.0, 1.0, self.m)
            if self.dZ is not None:
                err = np.max(np.abs(self.gradient(base, v) - plain.gradient(base, v)))
                if err > tol * (1.0 + np.max(np.abs(plain.gradient(base, v)))):
                    raise ValueError(f"dZ disagrees with finite differences by {err:.3g}")
            if self.d2Z is not None:
                ref = numerics.fd_jacobian(lambda w: self.gradient(base, w), v, 1e-5)
                err = np.max(np.abs(self.hessian(base, v) - ref))
                if err > tol * (1.0 + np.max(np.abs(ref))):
                    raise ValueError(f"d2Z disagrees with finite differences by {err:.3g}")


def energy(Z, base, v):
    """``dZ(v) v - Z(v)``."""
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return float(Z.gradient(base, v) @ v - Z.value(base, v))


def fiber_derivative(Z, base, v):
    return Z.gradient(base, v)


def _newton_inverse(Z, base, p, guess, cfg):
    return numerics.newton_solve(
        lambda v: Z.gradient(base, v) - p, guess, cfg,
        jac=lambda v: Z.hessian(base, v), damped=True)


def _restart_points(p, m, seed):
    rng = np.random.default_rng(seed)
    scale = 1.0 + np.linalg.norm(p)
    for _ in range(N_RESTARTS):
        d = rng.normal(size=m)
        d *= rng.uniform() ** (1.0 / m) / np.linalg.norm(d)
        yield scale * d


def inverse_fiber_derivative(Z, base, p, guess=None, cfg=None, check_unique=False, seed=0):
    """Solve ``dZ(base, v) = p`` for ``v``.

    Starts from ``guess`` (zero when absent); a failed cold start falls back
    to random restarts in a ball of radius ``1 + |p|``. With ``check_unique``
    all restarts are run and distinct roots raise NotHyperRegular.
    """
    cfg = cfg or NewtonConfig()
    p = np.atleast_1d(np.asarray(p, dtype=float))
    start = np.zeros(Z.m) if guess is None else np.atleast_1d(np.asarray(guess, dtype=float))
    v = None
    try:
        v = _newton_inverse(Z, base, p, start, cfg).x
    except (MaxIterations, SingularJacobian, NonFiniteEvaluation):
        if guess is not None and not check_unique:
            raise
    if v is None or check_unique:
        for w0 in _restart_points(p, Z.m, seed):
            try:
                w = _newton_inverse(Z, base, p, w0, cfg).x
            except (MaxIterations, SingularJacobian, NonFiniteEvaluation):
                continue
            if v is None:
                v = w
            elif check_unique and np.max(np.abs(w - v)) > 1e-6 * (1.0 + np.max(np.abs(v))):
                raise NotHyperRegular(
                    f"fiber derivative is not injective: distinct preimages {v} and {w}")
            elif not check_unique:
                break
    if v is None:
        raise MaxIterations(f"could not invert the fiber derivative at p={p}")
    hess = Z.hessian(base, v)
    cond = np.linalg.cond(hess)
    if not cond < HESSIAN_COND_LIMIT:
        raise NotHyperRegular(f"fiber Hessian condition estimate {cond:.3g} at the solution")
    return v


def legendre_transform(Z, base, p, guess=None, cfg=None, check_unique=False):
    """Return ``(Z*(p), v)`` with ``v`` the preimage of ``p`` under the fiber derivative."""
    v = inverse_fiber_derivative(Z, base, p, guess, cfg, check_unique)
    p = np.atleast_1d(np.asarray(p, dtype=float))
    return float(p @ v - Z.value(base, v)), v


@dataclass(frozen=True)
class LegendreResult:
    Zstar: FiberMap
    forward: Callable
    inverse: Callable


def dual(Z, cfg=None, guess=None):
    """The transformed map on the dual fiber.

    Its fiber derivative is the inverse of that of ``Z`` and its fiber
    Hessian is the inverse of the Hessian of ``Z`` at the preimage.
    """
    cfg = cfg or NewtonConfig(abs_tolerance=1e-13)

    def inv(base, p):
        return inverse_fiber_derivative(Z, base, p, guess, cfg)

    def zstar(base, p):
        v = inv(base, p)
        return float(np.atleast_1d(p) @ v - Z.value(base, v))

    def d2(base, p):
        return np.linalg.inv(Z.hessian(base, inv(base, p)))

    Zs = FiberMap(zstar, Z.m, dZ=inv, d2Z=d2)
    return LegendreResult(Zs, lambda base, v: Z.gradient(base, v), inv)


def involution_check(Z, base, samples, cfg=None):
    """Max ``|Z**(v) - Z(v)|`` over the sample fiber points."""
    cfg = cfg or NewtonConfig(abs_tolerance=1e-12)
    res = dual(Z, cfg)
    start = Z.gradient(base, np.zeros(Z.m))
    worst = 0.0
    for v in samples:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        zz, _ = legendre_transform(res.Zstar, base, v, guess=start, cfg=cfg)
        worst = max(worst, abs(zz - Z.value(base, v)))
    return worst


def mutual_inverse_deviation(Z, base, primal, dual_points, cfg=None):
    """Max deviation of the two round trips through the fiber derivative."""
    cfg = cfg or NewtonConfig(abs_tolerance=1e-12)
    worst = 0.0
    for v in primal:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        back = inverse_fiber_derivative(Z, base, Z.gradient(base, v), cfg=cfg)
        worst = max(worst, np.max(np.abs(back - v)))
    for p in dual_points:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        there = Z.gradient(base, inverse_fiber_derivative(Z, base, p, cfg=cfg))
        worst = max(worst, np.max(np.abs(there - p)))
    return worst


def dual_gradient_deviation(Z, base, dual_points, cfg=None):
    """Max ``|d(Z*)(p) - (dZ)^{-1}(p)|`` with ``d(Z*)`` by central differences."""
    cfg = cfg or NewtonConfig(abs_tolerance=1e-12)
    worst = 0.0
    for p in dual_points:
        p = np.atleast_1d(np.asarray(p, dtype=float))
        v = inverse_fiber_derivative(Z, base, p, cfg=cfg)

        def zstar(w):
            return legendre_transform(Z, base, w, guess=v, cfg=cfg)[0]

        g = numerics.fd_gradient(zstar, p, 1e-5)
        worst = max(worst, np.max(np.abs(g - v)))
    return worst

