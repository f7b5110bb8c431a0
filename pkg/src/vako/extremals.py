"""Characteristics along horizontal curves and the singularity verdicts built on them.

A finite-difference endpoint-map oracle cross-checks the verdicts; the
contact test works pointwise on the annihilator."""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import interpolate, linalg

from . import numerics
from .errors import InconsistentControls, NonHorizontal
from .geometry import DiscreteCurve, Submanifold, tangent_basis

CONTROL_TOL = 1e-6
ABNORMAL_TOL = 1e-7
ORACLE_TOL = 1e-6


def _velocity(curve):
    """Fourth-order differences on uniform grids with at least 5 samples."""
    if not curve.uniform or len(curve) < 5:
        return curve.velocities()
    q = curve.q
    h = curve.times[1] - curve.times[0]
    v = np.empty_like(q)
    v[2:-2] = (q[:-4] - 8.0 * q[1:-3] + 8.0 * q[3:-1] - q[4:]) / (12.0 * h)
    v[0] = (-25.0 * q[0] + 48.0 * q[1] - 36.0 * q[2] + 16.0 * q[3] - 3.0 * q[4]) / (12.0 * h)
    v[1] = (-3.0 * q[0] - 10.0 * q[1] + 18.0 * q[2] - 6.0 * q[3] + q[4]) / (12.0 * h)
    v[-1] = -(-25.0 * q[-1] + 48.0 * q[-2] - 36.0 * q[-3] + 16.0 * q[-4] - 3.0 * q[-5]) / (12.0 * h)
    v[-2] = -(-3.0 * q[-1] - 10.0 * q[-2] + 18.0 * q[-3] - 6.0 * q[-4] + q[-5]) / (12.0 * h)
    return v


def controls(problem, curve, tol=CONTROL_TOL):
    """Frame controls of the curve, checked against the sampled velocity.

    Supplied controls must reproduce the velocity within ``tol`` at the
    interior samples (InconsistentControls otherwise); missing ones are
    fitted by least squares (NonHorizontal when the fit misses by more
    than ``tol``).
    """
    v = _velocity(curve)
    Xs = np.array([problem.X(t, q) for t, q in zip(curve.times, curve.q)])
    if curve.u is None:
        u = np.array([np.linalg.lstsq(X, w, rcond=None)[0] for X, w in zip(Xs, v)])
        err = np.linalg.norm(np.einsum("sak,sk->sa", Xs, u) - v, axis=1)
        if np.max(err) > tol:
            raise NonHorizontal(f"curve leaves the distribution by {np.max(err):.3g}")
        return u
    u = curve.u
    err = np.linalg.norm(np.einsum("sak,sk->sa", Xs, u) - v, axis=1)
    inner = err[1:-1] if len(err) > 2 else err
    if np.max(inner) > tol:
        raise InconsistentControls(f"controls miss the velocity by {np.max(inner):.3g}")
    return u


class _Interpolant:
    """Smooth evaluation of ``q(t)`` and ``u(t)`` between grid samples."""

    def __init__(self, problem, curve, u):
        self.problem = problem
        dq = np.array([problem.X(t, q) @ ui for t, q, ui in zip(curve.times, curve.q, u)])
        self.q = interpolate.CubicHermiteSpline(curve.times, curve.q, dq, axis=0)
        self.u = interpolate.CubicSpline(curve.times, u, axis=0) if len(curve) >= 3 else \
            interpolate.interp1d(curve.times, u, axis=0)

    def generator(self, t):
        """``A = sum_i u_i dX_i/dq`` at time ``t``."""
        q = self.q(t)
        u = self.u(t)
        return np.einsum("aij,i->aj", self.problem.dX(t, q), u)


@dataclass(frozen=True)
class Transport:
    times: np.ndarray
    Phi: np.ndarray

    def apply(self, p0):
        """Covector path ``Phi(t) p0``, shape ``(samples, n)``."""
        return self.Phi @ np.asarray(p0, dtype=float)


def transport_covectors(problem, curve, tol=CONTROL_TOL):
    """Fundamental matrices of ``p' = -sum_i u_i (dX_i/dq)^T p`` with ``Phi(t0) = I``."""
    u = controls(problem, curve, tol)
    interp = _Interpolant(problem, curve, u)
    n = problem.n
    Phi = np.empty((len(curve), n, n))
    Phi[0] = np.eye(n)
    times = curve.times
    for i in range(len(times) - 1):
        t, h = times[i], times[i + 1] - times[i]
        A0 = interp.generator(t).T
        Am = interp.generator(t + 0.5 * h).T
        A1 = interp.generator(t + h).T
        P = Phi[i]
        k1 = -A0 @ P
        k2 = -Am @ (P + 0.5 * h * k1)
        k3 = -Am @ (P + 0.5 * h * k2)
        k4 = -A1 @ (P + h * k3)
        Phi[i + 1] = P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Transport(times, Phi)


@dataclass(frozen=True)
class CharacteristicBasis:
    curve: DiscreteCurve
    basis: np.ndarray
    constraint_residuals: float

    @property
    def dimension(self):
        return len(self.basis)

    def at(self, idx):
        """Basis covectors at sample ``idx`` as columns."""
        return self.basis[:, idx, :].T


REGULAR = "Regular"
SINGULAR = "Singular"


@dataclass(frozen=True)
class AbnormalVerdict:
    kind: str
    basis: Optional[CharacteristicBasis] = None

    @property
    def singular(self):
        return self.kind == SINGULAR

    @property
    def dimension(self):
        return 0 if self.basis is None else self.basis.dimension


def abnormal_test(problem, curve, P, Q, tol=ABNORMAL_TOL):
    """Nonzero characteristics with ``p(a)`` vanishing on ``T_P`` and ``p(b)`` on ``T_Q``.

    The initial covector is constrained by rows for ``T_P``, by membership of
    the transported covector in the annihilator at every sample and by rows
    for ``T_Q`` at the end; the curve is Singular iff the relative
    nullspace at ``tol`` is nonzero.
    """
    tr = transport_covectors(problem, curve)
    qa, qb = curve.q[0], curve.q[-1]
    rows = [tangent_basis(P, qa, check=False).T]
    for t, q, Phi in zip(curve.times, curve.q, tr.Phi):
        rows.append(problem.X(t, q).T @ Phi)
    rows.append(tangent_basis(Q, qb, check=False).T @ tr.Phi[-1])
    M = np.vstack(rows)
    null = numerics.nullspace(M, tol)
    if null.shape[1] == 0:
        return AbnormalVerdict(REGULAR)
    paths = np.stack([tr.apply(c) for c in null.T])
    worst = 0.0
    for j, (t, q) in enumerate(zip(curve.times, curve.q)):
        worst = max(worst, float(np.max(np.abs(paths[:, j, :] @ problem.X(t, q)))))
    return AbnormalVerdict(SINGULAR, CharacteristicBasis(curve, paths, worst))


def _bumps(times, count):
    a, b = times[0], times[-1]
    width = (b - a) / (count + 1)
    out = []
    for j in range(count):
        s = (times - (a + j * width)) / (2.0 * width)
        prof = np.sin(np.pi * np.clip(s, 0.0, 1.0)) ** 2
        out.append(prof)
    return out


def _endpoint(problem, times, q0, u):
    ctrl = interpolate.CubicSpline(times, u, axis=0)
    x = np.array(q0, dtype=float)
    for i in range(len(times) - 1):
        t, h = times[i], times[i + 1] - times[i]
        um = ctrl(t + 0.5 * h)
        k1 = problem.X(t, x) @ u[i]
        k2 = problem.X(t + 0.5 * h, x + 0.5 * h * k1) @ um
        k3 = problem.X(t + 0.5 * h, x + 0.5 * h * k2) @ um
        k4 = problem.X(t + h, x + h * k3) @ u[i + 1]
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def endpoint_map_oracle(problem, curve, P, bumps_per_control=4, h=1e-6, tol=ORACLE_TOL):
    """Annihilator of the finite-difference image of the endpoint map.

    Directions are ``bumps_per_control`` bump perturbations of each control
    plus the tangent directions of P at the start; the endpoint is recomputed
    by RK4 and differenced centrally. Returns orthonormal columns.
    """
    u = controls(problem, curve)
    times = curve.times
    qa = curve.q[0]
    cols = []
    for prof in _bumps(times, bumps_per_control):
        for i in range(problem.k):
            du = np.zeros_like(u)
            du[:, i] = h * prof
            cols.append((_endpoint(problem, times, qa, u + du)
                         - _endpoint(problem, times, qa, u - du)) / (2.0 * h))
    for d in tangent_basis(P, qa, check=False).T:
        cols.append((_endpoint(problem, times, P.retract(qa + h * d), u)
                     - _endpoint(problem, times, P.retract(qa - h * d), u)) / (2.0 * h))
    J = np.column_stack(cols)
    return numerics.nullspace(J.T, tol)


def principal_angle(A, B):
    """Largest principal angle between two column spaces; ``pi/2`` when the
    dimensions differ and 0 when both are empty."""
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    if A.shape[1] != B.shape[1]:
        return math.pi / 2
    if A.shape[1] == 0:
        return 0.0
    return float(np.max(linalg.subspace_angles(A, B)))


def oracle_agreement(problem, curve, P, tol=ABNORMAL_TOL):
    """Angle between the characteristics at ``b`` (free end) and the oracle annihilator."""
    verdict = abnormal_test(problem, curve, P, Submanifold.Point(curve.q[-1]), tol)
    ours = verdict.basis.at(-1) if verdict.singular else np.zeros((problem.n, 0))
    if ours.shape[1]:
        ours = linalg.orth(ours)
    return principal_angle(ours, endpoint_map_oracle(problem, curve, P))


NONDEGENERATE = "NondegenerateOnAnnihilator"
DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class ContactVerdict:
    kind: str
    q: np.ndarray
    kernel: Optional[np.ndarray] = None


def annihilator_form(problem, t, q, rho):
    """Skew matrix of the canonical form on the tangent space of the annihilator
    at ``p = theta(q)^T rho``, in coordinates ``(dq, drho)``."""
    n, m = problem.n, problem.n - problem.k
    th = problem.theta(t, q)
    dth = problem.dtheta(t, q)
    B = np.zeros((2 * n, n + m))
    B[:n, :n] = np.eye(n)
    B[n:, :n] = np.einsum("r,raj->aj", rho, dth)
    B[n:, n:] = th.T
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    return B.T @ J @ B


def contact_test(problem, points, tol=1e-8, t=0.0, rho=None):
    """Rank test of the canonical form restricted to the annihilator at each point."""
    m = problem.n - problem.k
    out = []
    for q in points:
        q = np.asarray(q, dtype=float)
        if m == 0:
            out.append(ContactVerdict(NONDEGENERATE, q))
            continue
        r = np.ones(m) if rho is None else np.asarray(rho, dtype=float)
        if not np.any(r):
            raise ValueError("rho must be nonzero")
        W = annihilator_form(problem, t, q, r)
        ker = numerics.nullspace(W, tol)
        if ker.shape[1]:
            out.append(ContactVerdict(DEGENERATE, q, ker))
        else:
            out.append(ContactVerdict(NONDEGENERATE, q))
    return out


def line_probe(problem, t0=0.0, t1=1.0, samples=201, direction=0):
    """Integral curve of the frame field ``X_direction`` from the origin, with its controls."""
    times = np.linspace(t0, t1, samples)
    u = np.zeros((samples, problem.k))
    u[:, direction] = 1.0
    q = np.empty((samples, problem.n))
    q[0] = 0.0
    for i in range(samples - 1):
        t, h = times[i], times[i + 1] - times[i]
        f = lambda s, x: problem.X(s, x)[:, direction]  # noqa: E731
        k1 = f(t, q[i])
        k2 = f(t + 0.5 * h, q[i] + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, q[i] + 0.5 * h * k2)
        k4 = f(t + h, q[i] + h * k3)
        q[i + 1] = q[i] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return DiscreteCurve(times, q, u)
