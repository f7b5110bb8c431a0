"""Manifold in one global chart with a distribution frame and boundary sets.

Shapes used throughout:

* ``X(t, q)``      -> ``(n, k)``, columns are the horizontal fields
* ``theta(t, q)``  -> ``(n-k, n)``, rows are the annihilating one-forms
* ``Xprime(t, q)`` -> ``(n, n-k)``, columns span the complement D'
* ``dX(t, q)``     -> ``(n, k, n)``, ``dX[a, i, j] = d(X_i)_a / dq_j``
* ``dtheta(t, q)`` -> ``(n-k, n, n)``, ``dtheta[r, a, j] = d(theta_r)_a / dq_j``
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import numerics
from .errors import DegenerateFrame, NotOnSubmanifold, RankDeficientConstraint

FRAME_COND_LIMIT = 1e10


def _fd_spatial(fn, t, q):
    """Derivative of a matrix-valued field with respect to q, last axis = q index."""
    q = np.asarray(q, dtype=float)
    h = 1e-6 * (1.0 + np.abs(q))
    cols = []
    for j in range(q.size):
        e = np.zeros(q.size)
        e[j] = h[j]
        cols.append((fn(t, q + e) - fn(t, q - e)) / (2.0 * h[j]))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class DistributionFrame:
    X: Callable
    theta: Callable
    Xprime: Callable
    dX: Optional[Callable] = None
    dtheta: Optional[Callable] = None

    def frame_derivative(self, t, q):
        if self.dX is not None:
            return np.asarray(self.dX(t, q), dtype=float)
        return _fd_spatial(self.X, t, q)

    def theta_derivative(self, t, q):
        if self.dtheta is not None:
            return np.asarray(self.dtheta(t, q), dtype=float)
        return _fd_spatial(self.theta, t, q)


@dataclass(frozen=True)
class ChartProblem:
    n: int
    k: int
    frame: DistributionFrame
    domain_check: Optional[Callable] = None
    name: str = ""

    def __post_init__(self):
        if not 1 <= self.k <= self.n:
            raise ValueError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")

    def X(self, t, q):
        return np.asarray(self.frame.X(t, q), dtype=float).reshape(self.n, self.k)

    def theta(self, t, q):
        return np.asarray(self.frame.theta(t, q), dtype=float).reshape(self.n - self.k, self.n)

    def Xprime(self, t, q):
        return np.asarray(self.frame.Xprime(t, q), dtype=float).reshape(self.n, self.n - self.k)

    def dX(self, t, q):
        return self.frame.frame_derivative(t, q).reshape(self.n, self.k, self.n)

    def dtheta(self, t, q):
        return self.frame.theta_derivative(t, q).reshape(self.n - self.k, self.n, self.n)

    def full_frame(self, t, q):
        return np.hstack([self.X(t, q), self.Xprime(t, q)])

    def in_domain(self, t, q):
        return self.domain_check is None or bool(self.domain_check(t, q))

    def check_frame(self, points, t=0.0, tol=1e-10):
        """Annihilator and invertibility self-checks; returns the worst values."""
        worst_annihilation, worst_cond = 0.0, 1.0
        for q in points:
            X = self.X(t, q)
            th = self.theta(t, q)
            if th.size:
                worst_annihilation = max(worst_annihilation, np.max(np.abs(th @ X)))
                thx = th @ self.Xprime(t, q)
                if not np.linalg.cond(thx) < FRAME_COND_LIMIT:
                    raise DegenerateFrame(f"theta(X') is singular at q={q}")
            worst_cond = max(worst_cond, np.linalg.cond(self.full_frame(t, q)))
        if worst_annihilation > tol:
            raise DegenerateFrame(f"theta(X_i) = {worst_annihilation:.3g} exceeds {tol:g}")
        if not worst_cond < FRAME_COND_LIMIT:
            raise DegenerateFrame(f"frame condition estimate {worst_cond:.3g}")
        return worst_annihilation, worst_cond


@dataclass(frozen=True)
class TangentSplit:
    """Projections for ``TM = D + D'`` at one point, in chart coordinates.

    ``to_D`` (k x n) and ``to_Dprime`` (n-k x n) give frame coefficients of
    the two components of an ambient vector.
    """
    X: np.ndarray
    Xprime: np.ndarray
    to_D: np.ndarray
    to_Dprime: np.ndarray

    @property
    def pi_D(self):
        return self.X @ self.to_D

    @property
    def pi_Dprime(self):
        return self.Xprime @ self.to_Dprime

    def coords(self, w):
        return self.to_D @ w, self.to_Dprime @ w

    def from_coords(self, u, uprime=None):
        v = self.X @ np.asarray(u, dtype=float)
        if uprime is not None and self.Xprime.shape[1]:
            v = v + self.Xprime @ np.asarray(uprime, dtype=float)
        return v


def eval_split(problem, t, q):
    X = problem.X(t, q)
    Xp = problem.Xprime(t, q)
    F = np.hstack([X, Xp])
    cond = np.linalg.cond(F)
    if not cond < FRAME_COND_LIMIT:
        raise DegenerateFrame(f"frame matrix condition estimate {cond:.3g}", time=t)
    Finv = np.linalg.inv(F)
    return TangentSplit(X, Xp, Finv[: problem.k], Finv[problem.k:])


@dataclass(frozen=True)
class DiscreteCurve:
    """Samples of a curve on a strictly increasing grid, optionally with the
    frame controls ``u`` (one row per sample)."""
    times: np.ndarray
    q: np.ndarray
    u: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "q", q)
        if self.u is not None:
            object.__setattr__(self, "u", np.asarray(self.u, dtype=float).reshape(len(times), -1))
        if times.ndim != 1 or len(times) != len(q):
            raise ValueError("times and q must have matching lengths")
        if len(times) < 2 or np.any(np.diff(times) <= 0):
            raise ValueError("grid must be strictly increasing with at least 2 samples")

    def __len__(self):
        return len(self.times)

    @property
    def uniform(self):
        d = np.diff(self.times)
        return bool(np.allclose(d, d[0], rtol=1e-9, atol=0.0))

    def velocities(self):
        edge = 2 if len(self.times) >= 3 else 1
        return np.gradient(self.q, self.times, axis=0, edge_order=edge)


def horizontality_residual(problem, curve):
    """Per-sample norms of ``theta(gamma')``, shape ``(samples,)``.

    Returns an array of zeros when ``n == k``.
    """
    w = curve.velocities()
    out = np.zeros(len(curve))
    if problem.n == problem.k:
        return out
    for i, (t, q) in enumerate(zip(curve.times, curve.q)):
        eval_split(problem, t, q)
        out[i] = np.linalg.norm(problem.theta(t, q) @ w[i])
    return out


@dataclass(frozen=True)
class Submanifold:
    """A boundary set: a point, the whole chart, or a regular level set.

    For level sets ``g`` maps R^n to R^c and ``jac`` (optional) returns the
    ``c x n`` Jacobian.
    """
    kind: str
    point: Optional[np.ndarray] = None
    g: Optional[Callable] = None
    jac: Optional[Callable] = None
    codim: int = 0
    n: Optional[int] = None
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def Point(cls, q):
        q = np.asarray(q, dtype=float)
        return cls("point", point=q, n=q.size, codim=q.size)

    @classmethod
    def Whole(cls, n=None):
        return cls("whole", n=n, codim=0)

    @classmethod
    def LevelSet(cls, g, codim, jac=None, n=None, **meta):
        return cls("levelset", g=g, jac=jac, codim=codim, n=n, meta=meta)

    def residual(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "point":
            return q - self.point
        if self.kind == "whole":
            return np.zeros(0)
        return np.atleast_1d(np.asarray(self.g(q), dtype=float))

    def jacobian(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind == "point":
            return np.eye(q.size)
        if self.kind == "whole":
            return np.zeros((0, q.size))
        if self.jac is not None:
            return np.atleast_2d(np.asarray(self.jac(q), dtype=float))
        return numerics.fd_jacobian(self.g, q)

    def dim(self, n):
        return n - self.codim if self.kind != "whole" else n

    def contains(self, q, tol=1e-8):
        return np.linalg.norm(self.residual(q)) <= tol

    def normal_projector(self, q):
        """Orthogonal projector onto the row space of the constraint Jacobian."""
        J = self.jacobian(q)
        if J.shape[0] == 0:
            return np.zeros((J.shape[1], J.shape[1]))
        return J.T @ np.linalg.solve(J @ J.T, J)

    def retract(self, q, iterations=5, tol=1e-12):
        """Gauss-Newton projection of ``q`` onto the set."""
        q = np.array(q, dtype=float)
        if self.kind == "point":
            return self.point.copy()
        if self.kind == "whole":
            return q
        for _ in range(iterations):
            r = self.residual(q)
            if np.linalg.norm(r) <= tol:
                break
            J = self.jacobian(q)
            q = q - J.T @ np.linalg.solve(J @ J.T, r)
        return q


def tangent_basis(S, q, check=True):
    """Orthonormal columns spanning the tangent space of ``S`` at ``q``."""
    q = np.asarray(q, dtype=float)
    n = q.size
    if check and not S.contains(q):
        raise NotOnSubmanifold(f"point is off the submanifold by {np.linalg.norm(S.residual(q)):.3g}")
    if S.kind == "point":
        return np.zeros((n, 0))
    if S.kind == "whole":
        return np.eye(n)
    J = S.jacobian(q)
    if numerics.rank(J, 1e-8) < S.codim:
        raise RankDeficientConstraint(f"level-set Jacobian has rank below {S.codim}")
    return numerics.nullspace(J, 1e-8)


REGULAR = "Regular"
INCONCLUSIVE = "Inconclusive"


def endpoint_regularity_sufficient(problem, S, t, q):
    """Sufficient test: tangent space of S plus D spans the whole tangent space.

    Never returns a singular verdict, the condition is only sufficient.
    """
    T = tangent_basis(S, q)
    M = np.hstack([T, problem.X(t, q)])
    return REGULAR if numerics.rank(M, 1e-8) == problem.n else INCONCLUSIVE
