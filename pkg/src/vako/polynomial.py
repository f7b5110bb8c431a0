"""Sparse multivariate polynomials for inline problem definitions.

A polynomial is a list of terms ``{"c": coefficient, "e": [exponents]}``
over an ordered list of variables.
"""
from dataclasses import dataclass

import numpy as np

from .geometry import ChartProblem, DistributionFrame, Submanifold
from .hamiltonian import ConstrainedLagrangian


@dataclass(frozen=True)
class Polynomial:
    coeffs: np.ndarray
    exps: np.ndarray

    @classmethod
    def from_terms(cls, terms, nvars):
        if not terms:
            return cls(np.zeros(0), np.zeros((0, nvars), dtype=int))
        c = np.array([float(t["c"]) for t in terms])
        e = np.array([list(t["e"]) for t in terms], dtype=int).reshape(len(terms), -1)
        if e.shape[1] != nvars:
            raise ValueError(f"term exponent lists must have length {nvars}")
        if np.any(e < 0):
            raise ValueError("exponents must be non-negative")
        return cls(c, e)

    @property
    def nvars(self):
        return self.exps.shape[1]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.coeffs.size == 0:
            return 0.0
        return float(self.coeffs @ np.prod(x ** self.exps, axis=1))

    def derivative(self, j):
        e = self.exps.copy()
        c = self.coeffs * e[:, j]
        keep = c != 0.0
        e = e[keep]
        e[:, j] -= 1
        return Polynomial(c[keep], e)

    def gradient(self, x):
        return np.array([self.derivative(j)(x) for j in range(self.nvars)])


class PolyMatrix:
    """Matrix of polynomials in ``q`` with analytic derivative along ``q``."""

    def __init__(self, rows, nvars):
        self.entries = [[Polynomial.from_terms(t, nvars) for t in row] for row in rows]
        self.shape = (len(rows), len(rows[0]) if rows else 0)
        self.derivs = [[[p.derivative(j) for j in range(nvars)] for p in row] for row in self.entries]

    def __call__(self, t, q):
        return np.array([[p(q) for p in row] for row in self.entries]).reshape(self.shape)

    def jacobian(self, t, q):
        return np.array([[[d(q) for d in ds] for ds in row] for row in self.derivs]).reshape(
            self.shape + (len(q),))


def inline_problem(spec):
    """``ChartProblem`` and ``ConstrainedLagrangian`` from an inline description.

    Keys: ``n``, ``k``, ``X`` (n x k), ``theta`` (n-k x n), ``Xprime``
    (n x n-k) as polynomial matrices in ``q``, and ``lagrangian`` as a
    polynomial in ``(q, u)``.
    """
    n, k = int(spec["n"]), int(spec["k"])
    X = PolyMatrix(spec["X"], n)
    if X.shape != (n, k):
        raise ValueError(f"X must be {n} x {k}")
    if n > k:
        th = PolyMatrix(spec["theta"], n)
        Xp = PolyMatrix(spec["Xprime"], n)
        if th.shape != (n - k, n) or Xp.shape != (n, n - k):
            raise ValueError("theta must be (n-k) x n and Xprime n x (n-k)")
        theta, dtheta, Xprime = th, th.jacobian, Xp
    else:
        theta = lambda t, q: np.zeros((0, n))  # noqa: E731
        dtheta = lambda t, q: np.zeros((0, n, n))  # noqa: E731
        Xprime = lambda t, q: np.zeros((n, 0))  # noqa: E731
    problem = ChartProblem(n, k, DistributionFrame(X, theta, Xprime, dX=X.jacobian, dtheta=dtheta),
                           name=spec.get("name", "inline"))
    L = Polynomial.from_terms(spec["lagrangian"], n + k)
    dL = [L.derivative(j) for j in range(n + k)]
    d2L = [[dL[n + i].derivative(n + j) for j in range(k)] for i in range(k)]

    def z(q, u):
        return np.concatenate([np.asarray(q, dtype=float), np.atleast_1d(np.asarray(u, dtype=float))])

    lagr = ConstrainedLagrangian(
        problem,
        L=lambda t, q, u: L(z(q, u)),
        dLdq=lambda t, q, u: np.array([dL[j](z(q, u)) for j in range(n)]),
        dLdu=lambda t, q, u: np.array([dL[n + i](z(q, u)) for i in range(k)]),
        d2Ldu2=lambda t, q, u: np.array([[d2L[i][j](z(q, u)) for j in range(k)] for i in range(k)]),
    )
    return problem, lagr


def level_set(polys, n):
    """Level set ``{q : g_i(q) = 0}`` of polynomial constraints."""
    gs = [Polynomial.from_terms(p, n) for p in polys]
    grads = [[g.derivative(j) for j in range(n)] for g in gs]
    return Submanifold.LevelSet(
        lambda q: np.array([g(q) for g in gs]), len(gs),
        jac=lambda q: np.array([[d(q) for d in row] for row in grads]), n=n)
