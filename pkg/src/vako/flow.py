"""Hamilton equations of the degenerate Hamiltonian and their lifts."""
import time as _time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numerics
from .errors import NumericalError
from .geometry import DiscreteCurve, eval_split, horizontality_residual
from .hamiltonian import eval_H, grad_H


@dataclass(frozen=True)
class PhasePath:
    times: np.ndarray
    q: np.ndarray
    p: np.ndarray
    u: np.ndarray
    H: np.ndarray
    wall_time: float = 0.0

    @property
    def curve(self):
        return DiscreteCurve(self.times, self.q, self.u)

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class FlowReport:
    energy_drift: Optional[float]
    horizontality_max: float
    steps: int
    wall_time: float


def hamilton_rhs(dh, warm=None):
    """Vector field ``(dH/dp, -dH/dq)`` on the ``2n`` state, warm-starting ``u``."""
    n = dh.problem.n
    state = {"u": None if warm is None else np.asarray(warm, dtype=float)}

    def rhs(t, y):
        try:
            dHdq, dHdp, u = grad_H(dh, t, y[:n], y[n:], state["u"])
        except NumericalError as exc:
            if exc.time is None:
                exc.time = float(t)
            raise
        state["u"] = u
        return np.concatenate([dHdp, -dHdq])

    return rhs, state


def flow_endpoint(dh, t0, t1, q0, p0, steps, warm=None):
    """Final ``(q, p)`` of the Hamilton flow, without per-sample bookkeeping."""
    n = dh.problem.n
    rhs, _ = hamilton_rhs(dh, warm)
    y0 = np.concatenate([np.asarray(q0, dtype=float), np.asarray(p0, dtype=float)])
    _, ys = numerics.rk4_integrate(rhs, y0, t0, t1, steps)
    return ys[-1, :n].copy(), ys[-1, n:].copy()


def integrate_hamilton(dh, t0, t1, q0, p0, steps, warm=None):
    """RK4 on ``dq/dt = dH/dp, dp/dt = -dH/dq`` with ``2n`` unknowns.

    The Legendre inversion is warm-started from the previous evaluation.
    Failures carry the time at which they happened.
    """
    n = dh.problem.n
    rhs, state = hamilton_rhs(dh, warm)
    y0 = np.concatenate([np.asarray(q0, dtype=float), np.asarray(p0, dtype=float)])
    started = _time.perf_counter()
    times, ys = numerics.rk4_integrate(rhs, y0, t0, t1, steps)
    us, Hs = [], []
    warm_u = state["u"] if warm is None else np.asarray(warm, dtype=float)
    for t, y in zip(times, ys):
        try:
            val = eval_H(dh, t, y[:n], y[n:], warm_u)
        except NumericalError as exc:
            exc.time = float(t)
            raise
        warm_u = val.u
        us.append(val.u)
        Hs.append(val.H)
    return PhasePath(times, ys[:, :n].copy(), ys[:, n:].copy(), np.array(us), np.array(Hs),
                     _time.perf_counter() - started)


def flow_report(path, problem, autonomous):
    drift = float(np.max(np.abs(path.H - path.H[0]))) if autonomous else None
    resid = horizontality_residual(problem, DiscreteCurve(path.times, path.q))
    return FlowReport(drift, float(np.max(resid)), len(path) - 1,
                      path.wall_time)


def lift_from_velocity(lagr, t, q, u, lambda_Dprime=None):
    """Covector with ``p.X_i = dL/du_i`` and ``p.X'_j = lambda_Dprime_j`` (default 0)."""
    problem = lagr.problem
    split = eval_split(problem, t, q)
    rho = lagr.grad_u(t, np.asarray(q, dtype=float), np.asarray(u, dtype=float))
    extra = np.zeros(problem.n - problem.k) if lambda_Dprime is None else np.asarray(lambda_Dprime, dtype=float)
    # rows of [to_D; to_Dprime] are the dual coframe of [X | X']
    return split.to_D.T @ rho + split.to_Dprime.T @ extra
