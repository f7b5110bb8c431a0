"""Lagrangian-side checks of candidate extremals.

Covers the action and its discrete first variation, plus Euler-Lagrange
residuals of the multiplier-extended Lagrangian."""
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, linalg

from . import numerics
from .errors import DegenerateFrame, NonHorizontal, NotPositiveDefinite
from .geometry import DiscreteCurve, eval_split

__all__ = [
    "DiscreteCurve", "VariationBasis", "FirstVariation", "ELResidual", "Multiplier",
    "ExtendedLagrangian", "recover_controls", "action", "extended_lagrangian",
    "el_residual", "variation_basis", "first_variation", "recover_multiplier",
    "horizontal_perturbation", "difference_pair", "discrete_action",
]

CONTROL_TOL = 1e-4
PERTURBED_TOL = 1e-2
BUMP_SPACING = 25


def recover_controls(problem, curve):
    """Least-squares frame coefficients of the sampled velocities.

    Returns ``(u, residual)`` with ``residual[i] = |X u_i - q'_i|``.
    """
    w = curve.velocities()
    u = np.empty((len(curve), problem.k))
    res = np.empty(len(curve))
    for i, (t, q) in enumerate(zip(curve.times, curve.q)):
        X = problem.X(t, q)
        u[i] = np.linalg.lstsq(X, w[i], rcond=None)[0]
        res[i] = np.linalg.norm(X @ u[i] - w[i])
    return u, res


def _quadrature(values, times, uniform):
    if uniform and len(times) >= 3:
        return float(integrate.simpson(values, x=times))
    return float(integrate.trapezoid(values, x=times))


def action(lagr, curve, tol=CONTROL_TOL):
    """Integral of ``L(t, q, u)`` along the curve.

    Composite Simpson on uniform grids, trapezoid otherwise. Missing
    controls are recovered by least squares; NonHorizontal is raised when
    that fit misses the sampled velocity by more than ``tol``.
    """
    u = curve.u
    if u is None:
        u, res = recover_controls(lagr.problem, curve)
        worst = float(np.max(res))
        if worst > tol:
            raise NonHorizontal(f"velocity leaves the distribution by {worst:.3g}")
    vals = np.array([lagr.value(t, q, ui) for t, q, ui in zip(curve.times, curve.q, u)])
    return _quadrature(vals, curve.times, curve.uniform)


@dataclass(frozen=True)
class ExtendedLagrangian:
    """``L(t, pi_D w) + 1/2 g'(pi_D' w, pi_D' w) - lam(t) . theta(w)`` on ambient velocities."""
    lagr: object
    gprime: Callable
    lam: Optional[Callable] = None

    @property
    def problem(self):
        return self.lagr.problem

    def _parts(self, t, q, w):
        split = eval_split(self.problem, t, q)
        u, up = split.coords(np.asarray(w, dtype=float))
        return split, u, up

    def value(self, t, q, w):
        q = np.asarray(q, dtype=float)
        w = np.asarray(w, dtype=float)
        _, u, up = self._parts(t, q, w)
        out = self.lagr.value(t, q, u) + 0.5 * up @ self.gprime(t, q) @ up
        if self.lam is not None and self.problem.n > self.problem.k:
            out -= self.lam(t) @ (self.problem.theta(t, q) @ w)
        return float(out)

    def momentum(self, t, q, w):
        """``dL~/dw``."""
        q = np.asarray(q, dtype=float)
        split, u, up = self._parts(t, q, w)
        m = split.to_D.T @ self.lagr.grad_u(t, q, u) + split.to_Dprime.T @ (self.gprime(t, q) @ up)
        if self.lam is not None and self.problem.n > self.problem.k:
            m = m - self.problem.theta(t, q).T @ self.lam(t)
        return m

    def grad_q(self, t, q, w):
        return numerics.fd_gradient(lambda x: self.value(t, x, w), q)

    def with_multiplier(self, times, lam):
        """Attach ``lam`` sampled on ``times``; linear interpolation in between."""
        times = np.asarray(times, dtype=float)
        lam = np.asarray(lam, dtype=float).reshape(len(times), -1)

        def lam_at(t):
            return np.array([np.interp(t, times, lam[:, j]) for j in range(lam.shape[1])])

        return ExtendedLagrangian(self.lagr, self.gprime, lam_at)


def extended_lagrangian(lagr, gprime):
    """Unconstrained Lagrangian on full velocities; ``gprime`` is a constant SPD
    matrix or a callable ``(t, q) -> matrix`` on D' frame coordinates."""
    m = lagr.problem.n - lagr.problem.k
    if callable(gprime):
        gfun = gprime
    else:
        G = np.atleast_2d(np.asarray(gprime, dtype=float)).reshape(m, m)
        if m:
            if np.max(np.abs(G - G.T)) > 1e-12:
                raise NotPositiveDefinite("gprime is not symmetric")
            try:
                np.linalg.cholesky(G)
            except np.linalg.LinAlgError as exc:
                raise NotPositiveDefinite("gprime is not positive definite") from exc
        gfun = lambda t, q: G  # noqa: E731
    return ExtendedLagrangian(lagr, gfun)


@dataclass(frozen=True)
class ELResidual:
    per_sample: np.ndarray
    max: float


def el_residual(Ltilde, curve):
    """``d/dt dL~/dq' - dL~/dq`` per sample, velocities and the time derivative
    by second-order differences. ``max`` skips two samples at each end."""
    if len(curve) < 5:
        raise ValueError("need at least 5 samples")
    w = curve.velocities()
    mom = np.array([Ltilde.momentum(t, q, wi) for t, q, wi in zip(curve.times, curve.q, w)])
    force = np.array([Ltilde.grad_q(t, q, wi) for t, q, wi in zip(curve.times, curve.q, w)])
    dmom = np.gradient(mom, curve.times, axis=0, edge_order=2)
    per = np.linalg.norm(dmom - force, axis=1)
    return ELResidual(per, float(np.max(per[2:-2])))


@dataclass(frozen=True)
class VariationBasis:
    """Fields along a curve, shape ``(m, samples, n)``."""
    curve: DiscreteCurve
    fields: np.ndarray

    def __len__(self):
        return len(self.fields)


def _bump(times, lo, hi):
    s = (times - lo) / (hi - lo)
    out = np.sin(np.pi * np.clip(s, 0.0, 1.0)) ** 4
    out[(s <= 0.0) | (s >= 1.0)] = 0.0
    return out


_SBP_BLOCK = np.array([
    [-24 / 17, 59 / 34, -4 / 17, -3 / 34, 0.0, 0.0],
    [-1 / 2, 0.0, 1 / 2, 0.0, 0.0, 0.0],
    [4 / 43, -59 / 86, 0.0, 59 / 86, -4 / 43, 0.0],
    [3 / 98, 0.0, -59 / 98, 0.0, 32 / 49, -4 / 49],
])
_SBP_WEIGHTS = np.array([17 / 48, 59 / 48, 43 / 48, 49 / 48])


def difference_pair(times):
    """Differentiation matrix ``D`` and quadrature weights ``w`` with
    ``w . (D v) = v[-1] - v[0]`` exactly (summation by parts).

    Uniform grids with at least 8 samples get the diagonal-norm operator with
    fourth-order interior stencil; otherwise trapezoid weights with the
    matching central-difference operator.
    """
    times = np.asarray(times, dtype=float)
    N = len(times)
    d = np.diff(times)
    if N >= 8 and np.allclose(d, d[0], rtol=1e-9, atol=0.0):
        h = d[0]
        D = np.zeros((N, N))
        for off, c in ((-2, 1 / 12), (-1, -2 / 3), (1, 2 / 3), (2, -1 / 12)):
            D += c * np.eye(N, k=off)
        D[:4] = 0.0
        D[:4, :6] = _SBP_BLOCK
        D[-4:] = 0.0
        D[-4:, -6:] = -_SBP_BLOCK[::-1, ::-1]
        w = np.ones(N)
        w[:4] = _SBP_WEIGHTS
        w[-4:] = _SBP_WEIGHTS[::-1]
        return D / h, w * h
    w = np.zeros(N)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    Q = 0.5 * (np.eye(N, k=1) - np.eye(N, k=-1))
    Q[0, 0], Q[-1, -1] = -0.5, 0.5
    return Q / w[:, None], w


def discrete_action(lagr, curve, tol=PERTURBED_TOL, pair=None):
    """Action with controls fitted to ``D q`` and summed with the paired weights.

    This is the discretization whose derivative the first-variation test
    measures; NonHorizontal is raised when the fit misses by more than ``tol``.
    """
    D, w = pair if pair is not None else difference_pair(curve.times)
    vel = D @ curve.q
    problem = lagr.problem
    total = 0.0
    for wi, t, q, v in zip(w, curve.times, curve.q, vel):
        X = problem.X(t, q)
        u = np.linalg.lstsq(X, v, rcond=None)[0]
        miss = np.linalg.norm(X @ u - v)
        if miss > tol:
            raise NonHorizontal(f"perturbed velocity leaves the distribution by {miss:.3g}", time=float(t))
        total += wi * lagr.value(t, q, u)
    return float(total)


def _constraint_matrix(problem, curve, P, Q, D):
    """Linearization of the discrete horizontality map plus endpoint rows."""
    N, n, k = len(curve), problem.n, problem.k
    w = D @ curve.q
    blocks = []
    if n > k:
        J = np.zeros((N, n - k, N, n))
        for i, (t, q) in enumerate(zip(curve.times, curve.q)):
            th = problem.theta(t, q)
            J[i] += np.einsum("ra,l->ral", th, D[i]).transpose(0, 2, 1)
            J[i, :, i, :] += np.einsum("rbj,b->rj", problem.dtheta(t, q), w[i])
        blocks.append(J.reshape(N * (n - k), N * n))
    for S, idx in ((P, 0), (Q, N - 1)):
        if S is None:
            rows = np.eye(n)
        else:
            rows = S.jacobian(curve.q[idx])
        if rows.shape[0]:
            E = np.zeros((rows.shape[0], N * n))
            E[:, idx * n:(idx + 1) * n] = rows
            blocks.append(E)
    return np.vstack(blocks) if blocks else np.zeros((0, N * n))


def variation_basis(problem, curve, P=None, Q=None, n_bumps=None):
    """Test variations along a horizontal curve with ends on ``P`` and ``Q``.

    Starts from ``k * ceil(samples / 25)`` interior bumps in the frame
    directions, plus endpoint fields along ``T_P`` and ``T_Q``. Every field
    is then projected onto the kernel of the linearized horizontality
    constraint (discretized with ``difference_pair``) and the endpoint
    conditions, so perturbing the curve along it keeps the curve horizontal
    to second order. Ends default to fixed points.
    """
    N, n, k = len(curve), problem.n, problem.k
    times = curve.times
    a, b = times[0], times[-1]
    m = n_bumps if n_bumps is not None else math.ceil(N / BUMP_SPACING)
    width = (b - a) / (m + 1)
    raw = []
    Xs = np.array([problem.X(t, q) for t, q in zip(times, curve.q)])
    for j in range(m):
        prof = _bump(times, a + j * width, a + (j + 2) * width)
        for i in range(k):
            raw.append(prof[:, None] * Xs[:, :, i])
    for S, idx, near in ((P, 0, times <= a + width), (Q, N - 1, times >= b - width)):
        if S is None or S.kind == "point":
            continue
        T = numerics.nullspace(S.jacobian(curve.q[idx]), 1e-8) if S.kind == "levelset" else np.eye(n)
        s = np.abs(times - times[idx]) / width
        prof = np.where(near, np.cos(0.5 * np.pi * np.clip(s, 0.0, 1.0)) ** 2, 0.0)
        for c in T.T:
            raw.append(prof[:, None] * c[None, :])
    raw = np.array(raw).reshape(len(raw), N * n)
    C = _constraint_matrix(problem, curve, P, Q, difference_pair(times)[0])
    if C.shape[0]:
        R = linalg.orth(C.T, rcond=1e-12)
        raw = raw - (raw @ R) @ R.T
    scale = np.max(np.abs(raw), axis=1)
    keep = scale > 1e-8 * max(1.0, float(np.max(scale, initial=0.0)))
    fields = (raw[keep] / scale[keep, None]).reshape(-1, N, n)
    return VariationBasis(curve, fields)


@dataclass(frozen=True)
class FirstVariation:
    derivatives: np.ndarray

    @property
    def max(self):
        return float(np.max(np.abs(self.derivatives), initial=0.0))


def first_variation(lagr, curve, basis, eps=1e-4):
    """Central differences of the discrete action along each basis field.

    Perturbed curves get their velocities re-projected onto D by a
    least-squares control fit; NonHorizontal is raised if that fit misses
    by more than 1e-2.
    """
    if not 1e-6 <= eps <= 1e-2:
        raise ValueError("eps must lie in [1e-6, 1e-2]")
    pair = difference_pair(curve.times)
    out = []
    for v in basis.fields:
        plus = discrete_action(lagr, DiscreteCurve(curve.times, curve.q + eps * v), pair=pair)
        minus = discrete_action(lagr, DiscreteCurve(curve.times, curve.q - eps * v), pair=pair)
        out.append((plus - minus) / (2.0 * eps))
    return FirstVariation(np.array(out))


@dataclass(frozen=True)
class Multiplier:
    times: np.ndarray
    lam: np.ndarray
    smoothness: float


def recover_multiplier(problem, path):
    """Per sample solve ``theta(X')^T lam = -X'^T p`` so ``p + theta^T lam`` kills D'.

    ``smoothness`` is the largest centered second difference divided by ``h^2``.
    """
    N = len(path.times)
    m = problem.n - problem.k
    lam = np.zeros((N, m))
    if m == 0:
        return Multiplier(path.times, lam, 0.0)
    for i, (t, q, p) in enumerate(zip(path.times, path.q, path.p)):
        Xp = problem.Xprime(t, q)
        A = problem.theta(t, q) @ Xp
        if not np.linalg.cond(A) < 1e10:
            raise DegenerateFrame("theta(X') is singular along the path", time=float(t))
        lam[i] = np.linalg.solve(A.T, -Xp.T @ p)
    smooth = 0.0
    if N >= 3:
        h = np.diff(path.times)
        d2 = (lam[2:] - 2.0 * lam[1:-1] + lam[:-2]) / (h[1:, None] * h[:-1, None])
        smooth = float(np.max(np.abs(d2)))
    return Multiplier(path.times, lam, smooth)


def horizontal_perturbation(problem, curve, du, amplitude):
    """Integrate ``q' = X(t, q)(u + amplitude * du)`` from the curve's start.

    ``du`` is sampled on the curve grid; controls are interpolated linearly
    at RK4 half steps. The result is horizontal by construction.
    """
    if curve.u is None:
        u0, _ = recover_controls(problem, curve)
    else:
        u0 = curve.u
    controls = u0 + amplitude * np.asarray(du, dtype=float).reshape(u0.shape)
    times = curve.times
    q = np.empty_like(curve.q)
    q[0] = curve.q[0]

    def f(t, x, c):
        return problem.X(t, x) @ c

    for i in range(len(times) - 1):
        t, h = times[i], times[i + 1] - times[i]
        cm = 0.5 * (controls[i] + controls[i + 1])
        k1 = f(t, q[i], controls[i])
        k2 = f(t + 0.5 * h, q[i] + 0.5 * h * k1, cm)
        k3 = f(t + 0.5 * h, q[i] + 0.5 * h * k2, cm)
        k4 = f(t + h, q[i] + h * k3, controls[i + 1])
        q[i + 1] = q[i] + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return DiscreteCurve(times, q, controls)
