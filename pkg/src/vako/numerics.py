"""Dense numerical kernels shared by the other modules.

Everything here is a pure function of its inputs.
"""
from dataclasses import dataclass

import numpy as np

from .errors import MaxIterations, NonFiniteEvaluation, NumericalError, SingularJacobian

COND_LIMIT = 1e12
TRUNCATION = 1e-4


@dataclass(frozen=True)
class NewtonConfig:
    abs_tolerance: float = 1e-10
    max_iterations: int = 50
    fd_step: float = 1e-6

    def __post_init__(self):
        if not self.abs_tolerance > 0:
            raise ValueError("abs_tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")


@dataclass(frozen=True)
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int


def _steps(x, h):
    if h is None:
        return 1e-6 * (1.0 + np.abs(x))
    return np.broadcast_to(np.asarray(h, dtype=float), x.shape)


def fd_gradient(f, x, h=None):
    """Central-difference gradient of the scalar map ``f`` at ``x``.

    ``h`` is either a scalar step or None, in which case each component uses
    ``1e-6 * (1 + |x_i|)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    steps = _steps(x, h)
    grad = np.empty(x.size)
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = steps[i]
        fp = f(x + e)
        fm = f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteEvaluation(f"non-finite value on the stencil of component {i}")
        grad[i] = (fp - fm) / (2.0 * steps[i])
    return grad


def fd_jacobian(F, x, h=None):
    """Central-difference Jacobian of ``F: R^m -> R^r`` as an ``r x m`` array."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    steps = _steps(x, h)
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = steps[i]
        fp = np.atleast_1d(F(x + e))
        fm = np.atleast_1d(F(x - e))
        if not (np.all(np.isfinite(fp)) and np.all(np.isfinite(fm))):
            raise NonFiniteEvaluation(f"non-finite value on the stencil of component {i}")
        cols.append((fp - fm) / (2.0 * steps[i]))
    if not cols:
        return np.zeros((np.atleast_1d(F(x)).size, 0))
    return np.column_stack(cols)


def fd_jacobian_forward(F, x, fx, h=None):
    """One-sided Jacobian reusing the known value ``fx = F(x)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    fx = np.atleast_1d(np.asarray(fx, dtype=float))
    steps = _steps(x, h)
    J = np.empty((fx.size, x.size))
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = steps[i]
        fp = np.atleast_1d(F(x + e))
        if not np.all(np.isfinite(fp)):
            raise NonFiniteEvaluation(f"non-finite value on the stencil of component {i}")
        J[:, i] = (fp - fx) / steps[i]
    return J


def _eval(F, x):
    try:
        fx = np.atleast_1d(np.asarray(F(x), dtype=float))
    except (FloatingPointError, ZeroDivisionError, OverflowError, ValueError) as exc:
        raise NonFiniteEvaluation(str(exc)) from exc
    if not np.all(np.isfinite(fx)):
        raise NonFiniteEvaluation("residual map returned a non-finite value")
    return fx


def _try(F, x):
    try:
        return _eval(F, x)
    except NumericalError:
        return None


def _line_search(F, x, step, truncated, norm0, max_halvings):
    """Full step, then the truncated step, then halvings of the full step."""
    ft = _try(F, x + step)
    if ft is not None and np.linalg.norm(ft) < norm0:
        return x + step, ft
    if truncated is not None:
        ft = _try(F, x + truncated)
        if ft is not None and np.linalg.norm(ft) < norm0:
            return x + truncated, ft
    alpha = 0.5
    for _ in range(max_halvings):
        ft = _try(F, x + alpha * step)
        if ft is not None and np.linalg.norm(ft) < norm0:
            return x + alpha * step, ft
        alpha *= 0.5
    return x, None


def newton_solve(F, x0, cfg=None, jac=None, damped=False, max_halvings=12, lstsq=False):
    """Solve ``F(x) = 0`` by Newton's method.

    The Jacobian comes from ``jac`` when given, otherwise from central finite
    differences with step ``cfg.fd_step * (1 + |x|)``. With ``damped`` the
    step is halved until the residual norm decreases. With ``lstsq`` the
    step is the minimum-norm least-squares solution, which also handles
    rectangular or rank-deficient systems; when that step is rejected by the
    line search, a step with singular values below ``1e-4 * sigma_max``
    truncated is tried before halving, which keeps convergence fast next
    to a continuum of roots.

    Raises SingularJacobian if the starting Jacobian is singular (condition
    estimate above 1e12) and ``lstsq`` is off; later singular Jacobians fall
    back to a least-squares step. Raises MaxIterations when the iteration
    budget runs out or no further progress is possible.
    """
    cfg = cfg or NewtonConfig()
    x = np.atleast_1d(np.array(x0, dtype=float))
    fx = _eval(F, x)
    best_x, best_r = x.copy(), np.max(np.abs(fx), initial=0.0)
    for it in range(cfg.max_iterations + 1):
        r = np.max(np.abs(fx), initial=0.0)
        if r < best_r:
            best_x, best_r = x.copy(), r
        if r <= cfg.abs_tolerance:
            return NewtonResult(x, r, it)
        if it == cfg.max_iterations:
            break
        J = np.atleast_2d(jac(x)) if jac is not None else fd_jacobian(
            F, x, cfg.fd_step * (1.0 + np.abs(x)))
        square = J.shape[0] == J.shape[1]
        cond = np.linalg.cond(J) if square else np.inf
        truncated = None
        if lstsq or not square or not cond < COND_LIMIT:
            if not lstsq and square and it == 0:
                raise SingularJacobian(f"Jacobian condition estimate {cond:.3g} at the start")
            step = np.linalg.lstsq(J, -fx, rcond=1e-12)[0]
            truncated = np.linalg.lstsq(J, -fx, rcond=TRUNCATION)[0]
            if np.allclose(truncated, step, rtol=0.0, atol=1e-14):
                truncated = None
        else:
            step = np.linalg.solve(J, -fx)
        if not np.any(step):
            break
        if damped:
            norm0 = np.linalg.norm(fx)
            trial, ft = _line_search(F, x, step, truncated, norm0, max_halvings)
            if ft is None:
                break
            x, fx = trial, ft
        else:
            x = x + step
            fx = _eval(F, x)
    raise MaxIterations(
        f"Newton did not reach {cfg.abs_tolerance:g} (best residual {best_r:.3g})",
        best=best_x, residual=best_r)


def rk4_integrate(rhs, x0, t0, t1, steps):
    """Classical fixed-step RK4 for ``dx/dt = rhs(t, x)``.

    Returns ``(times, xs)`` with ``steps + 1`` samples, endpoints included.
    Increments are accumulated with compensated summation.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    x = np.atleast_1d(np.array(x0, dtype=float))
    h = (t1 - t0) / steps
    times = t0 + h * np.arange(steps + 1)
    times[-1] = t1
    out = np.empty((steps + 1,) + x.shape)
    out[0] = x
    comp = np.zeros_like(x)
    for i in range(steps):
        t = times[i]
        k1 = rhs(t, x)
        k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = rhs(t + h, x + h * k3)
        dx = (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4) - comp
        new = x + dx
        comp = (new - x) - dx
        x = new
        if not np.all(np.isfinite(x)):
            raise NonFiniteEvaluation("state left the finite range", time=float(times[i + 1]))
        out[i + 1] = x
    return times, out


def _svd(A):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.all(np.isfinite(A)):
        raise NonFiniteEvaluation("matrix has non-finite entries")
    return np.linalg.svd(A, full_matrices=True)


def nullspace(A, tol=1e-10):
    """Orthonormal basis (as columns) of the approximate right kernel of ``A``.

    Directions whose singular value is below ``tol * sigma_max`` are kept;
    every direction is kept when ``A`` is zero.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    m, n = A.shape
    if n == 0:
        return np.zeros((0, 0))
    if m == 0:
        return np.eye(n)
    _, s, vt = _svd(A)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(n)
    sv = np.zeros(n)
    sv[: s.size] = s
    return vt[sv < tol * smax].T.copy()


def rank(A, tol=1e-10):
    """Numerical rank relative to the largest singular value."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s >= tol * s[0]))
