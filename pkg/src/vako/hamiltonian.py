"""Degenerate Hamiltonian of a Lagrangian defined on the distribution.

Velocities and momenta on D are kept in frame coordinates: a horizontal
velocity is ``X(t, q) @ u`` and the restriction of a covector ``p`` to D is
``rho = X(t, q).T @ p``.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import legendre, numerics
from .errors import NotPositiveDefinite
from .legendre import FiberMap
from .numerics import NewtonConfig


@dataclass(frozen=True)
class ConstrainedLagrangian:
    """``L(t, q, u)`` with ``u`` the frame coefficients of a horizontal velocity.

    ``H0`` is an optional closed form ``(t, q, rho) -> (H0 value, u)`` of the
    transformed map; ``dVdq``-style spatial derivatives come through ``dLdq``.
    """
    problem: object
    L: Callable
    dLdq: Optional[Callable] = None
    dLdu: Optional[Callable] = None
    d2Ldu2: Optional[Callable] = None
    H0: Optional[Callable] = None
    autonomous: bool = True

    def value(self, t, q, u):
        return float(self.L(t, q, u))

    def fiber_map(self):
        dZ = None if self.dLdu is None else (lambda b, u: self.dLdu(b[0], b[1], u))
        d2Z = None if self.d2Ldu2 is None else (lambda b, u: self.d2Ldu2(b[0], b[1], u))
        return FiberMap(lambda b, u: self.L(b[0], b[1], u), self.problem.k, dZ=dZ, d2Z=d2Z)

    def grad_q(self, t, q, u):
        if self.dLdq is not None:
            return np.asarray(self.dLdq(t, q, u), dtype=float)
        return numerics.fd_gradient(lambda x: self.L(t, x, u), q)

    def grad_u(self, t, q, u):
        return self.fiber_map().gradient((t, q), u)


@dataclass(frozen=True)
class SubRiemannianData:
    G: Callable
    V: Optional[Callable] = None
    dVdq: Optional[Callable] = None
    dGdq: Optional[Callable] = None


def _cholesky(G):
    if np.max(np.abs(G - G.T), initial=0.0) > 1e-12:
        raise NotPositiveDefinite("metric matrix is not symmetric")
    try:
        return np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("metric matrix is not positive definite") from exc


def make_subriemannian(data, problem, autonomous=True):
    """``L = 1/2 u^T G u - V(q)`` with analytic fiber derivatives."""
    V = data.V or (lambda t, q: 0.0)
    k = problem.k
    checked = {"G": None, "inv": None}

    def G(t, q):
        return np.asarray(data.G(t, q), dtype=float).reshape(k, k)

    def checked_G(t, q):
        """``(G, G^-1)``; the SPD check and inverse are cached for repeated matrices."""
        Gm = G(t, q)
        last = checked["G"]
        if last is None or not np.array_equal(last, Gm):
            _cholesky(Gm)
            checked["G"], checked["inv"] = Gm.copy(), np.linalg.inv(Gm)
        return Gm, checked["inv"]

    def L(t, q, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * u @ G(t, q) @ u - V(t, q)

    def dLdu(t, q, u):
        return G(t, q) @ np.asarray(u, dtype=float)

    def d2Ldu2(t, q, u):
        return checked_G(t, q)[0]

    def dLdq(t, q, u):
        u = np.asarray(u, dtype=float)
        if data.dGdq is not None:
            dG = np.asarray(data.dGdq(t, q), dtype=float)
            kin = 0.5 * u @ (u @ dG.reshape(k, -1)).reshape(k, -1)
        else:
            kin = numerics.fd_gradient(lambda x: 0.5 * u @ G(t, x) @ u, q)
        if data.dVdq is not None:
            pot = np.asarray(data.dVdq(t, q), dtype=float)
        elif data.V is None:
            pot = np.zeros_like(kin)
        else:
            pot = numerics.fd_gradient(lambda x: V(t, x), q)
        return kin - pot

    def H0(t, q, rho):
        u = checked_G(t, q)[1] @ rho
        return 0.5 * rho @ u + V(t, q), u

    return ConstrainedLagrangian(problem, L, dLdq=dLdq, dLdu=dLdu, d2Ldu2=d2Ldu2, H0=H0,
                                 autonomous=autonomous)


@dataclass(frozen=True)
class HamiltonianValue:
    H: float
    u: np.ndarray
    rho: np.ndarray


@dataclass(frozen=True)
class DegenerateHamiltonian:
    lagrangian: ConstrainedLagrangian
    newton: NewtonConfig = field(default_factory=lambda: NewtonConfig(abs_tolerance=1e-12))
    use_closed_form: bool = True

    @property
    def problem(self):
        return self.lagrangian.problem

    def restrict(self, t, q, p):
        return self.problem.X(t, q).T @ np.asarray(p, dtype=float)

    def generic(self):
        """Same Hamiltonian forced through the Newton inversion path."""
        return DegenerateHamiltonian(self.lagrangian, self.newton, use_closed_form=False)


def _eval(dh, t, q, p, warm):
    X = dh.problem.X(t, q)
    rho = X.T @ p
    lagr = dh.lagrangian
    if dh.use_closed_form and lagr.H0 is not None:
        H, u = lagr.H0(t, q, rho)
        return HamiltonianValue(float(H), np.asarray(u, dtype=float), rho), X
    Z = lagr.fiber_map()
    H, u = legendre.legendre_transform(Z, (t, q), rho, guess=warm, cfg=dh.newton)
    return HamiltonianValue(H, u, rho), X


def eval_H(dh, t, q, p, warm=None):
    return _eval(dh, t, np.asarray(q, dtype=float), np.asarray(p, dtype=float), warm)[0]


def grad_H(dh, t, q, p, warm=None):
    """Return ``(dH/dq, dH/dp, u)``.

    Uses ``dH/dp = X u`` and ``dH/dq = -dL/dq + sum_i u_i p.dX_i/dq``; the
    derivative of the minimizer drops out by stationarity.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    val, X = _eval(dh, t, q, p, warm)
    problem = dh.problem
    u = val.u
    dHdp = X @ u
    if problem.frame.dX is not None:
        pdX = (p @ problem.dX(t, q).reshape(problem.n, -1)).reshape(problem.k, problem.n)
        dHdq = u @ pdX - dh.lagrangian.grad_q(t, q, u)
    else:
        dHdq = numerics.fd_gradient(lambda x: eval_H(dh, t, x, p, u).H, q)
    return dHdq, dHdp, u


@dataclass(frozen=True)
class InvariantReport:
    involution_max_dev: float
    mutual_inverse_max_dev: float
    envelope_max_dev: float


def invariant_suite(dh, samples=50, seed=0, fiber_scale=1.0):
    """Legendre and envelope identities at ``samples`` seeded random points.

    Per sample: a base point, a fiber velocity, a dual point in the image of
    the fiber derivative (inverted with the multi-root check, so a
    non-injective fiber derivative raises NotHyperRegular) and a full
    covector for the envelope identity ``dH/dq = -dL/dq + ...`` against
    central differences of ``H``.
    """
    rng = np.random.default_rng(seed)
    problem = dh.problem
    lagr = dh.lagrangian
    Z = lagr.fiber_map()
    cfg = NewtonConfig(abs_tolerance=1e-12)
    inv_dev = mut_dev = env_dev = 0.0
    for _ in range(samples):
        t = 0.0 if lagr.autonomous else float(rng.uniform(0.0, 1.0))
        q = rng.normal(size=problem.n)
        v = fiber_scale * rng.uniform(-1.0, 1.0, problem.k)
        w = fiber_scale * rng.uniform(-1.0, 1.0, problem.k)
        p = rng.normal(size=problem.n)
        base = (t, q)
        rho = Z.gradient(base, w)
        legendre.inverse_fiber_derivative(Z, base, rho, cfg=cfg, check_unique=True)
        inv_dev = max(inv_dev, legendre.involution_check(Z, base, [v], cfg))
        mut_dev = max(mut_dev, legendre.mutual_inverse_deviation(Z, base, [v], [rho], cfg))
        dHdq, dHdp, u = grad_H(dh, t, q, p)
        fd_q = numerics.fd_gradient(lambda x: eval_H(dh, t, x, p, u).H, q)
        fd_p = numerics.fd_gradient(lambda y: eval_H(dh, t, q, y, u).H, p)
        env_dev = max(env_dev, float(np.max(np.abs(fd_q - dHdq))), float(np.max(np.abs(fd_p - dHdp))))
    return InvariantReport(inv_dev, mut_dev, env_dev)
