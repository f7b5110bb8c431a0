"""Two-point boundary-value problems for the degenerate Hamiltonian by shooting.

Unknowns are a position on P (coordinates along the tangent space at the
anchor, re-projected onto P) and the full initial covector. Equations are
the restriction of the initial covector to ``T_P``, membership of the final
point in Q and the restriction of the final covector to ``T_Q``.
"""
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import flow, numerics
from .errors import DimensionMismatch, MaxIterations, NoSolutionFound, NotHyperRegular, NotOnSubmanifold, NumericalError
from .geometry import Submanifold, tangent_basis
from .numerics import NewtonConfig
from .variation import action

DEDUP_TOL = 1e-6
MAX_HALVINGS = 12


@dataclass(frozen=True)
class BvpSpec:
    P: Submanifold
    Q: Submanifold
    t0: float
    t1: float
    dh: object
    steps: int
    q0: np.ndarray
    p0: np.ndarray

    def __post_init__(self):
        n = self.dh.problem.n
        q0 = np.asarray(self.q0, dtype=float)
        p0 = np.asarray(self.p0, dtype=float)
        object.__setattr__(self, "q0", q0)
        object.__setattr__(self, "p0", p0)
        if q0.shape != (n,) or p0.shape != (n,):
            raise DimensionMismatch(f"anchor must have shape ({n},)")
        for name, S in (("P", self.P), ("Q", self.Q)):
            if S.n is not None and S.n != n:
                raise DimensionMismatch(f"{name} lives in R^{S.n}, problem in R^{n}")
            if not 0 <= S.codim <= n:
                raise DimensionMismatch(f"{name} has codimension {S.codim} in R^{n}")
        if not self.steps >= 1:
            raise ValueError("steps must be at least 1")
        if not self.t1 > self.t0:
            raise ValueError("need t1 > t0")
        if not self.P.contains(q0, 1e-8):
            raise NotOnSubmanifold("anchor q0 is not on P")
        unknowns = self.P.dim(n) + n
        equations = self.P.dim(n) + self.Q.codim + self.Q.dim(n)
        if unknowns != equations:
            raise DimensionMismatch(f"{unknowns} unknowns against {equations} equations")

    @property
    def n(self):
        return self.dh.problem.n

    def with_steps(self, steps):
        return BvpSpec(self.P, self.Q, self.t0, self.t1, self.dh, steps, self.q0, self.p0)

    def with_anchor(self, q0, p0):
        return BvpSpec(self.P, self.Q, self.t0, self.t1, self.dh, self.steps, q0, p0)


@dataclass(frozen=True)
class BvpSolution:
    path: flow.PhasePath
    residuals: tuple
    newton_iterations: int
    action: float = field(default=float("nan"))

    @property
    def q0(self):
        return self.path.q[0]

    @property
    def p0(self):
        return self.path.p[0]


def _tangent_residual(S, q, p, basis):
    if basis.shape[1] == 0:
        return np.zeros(0)
    return basis.T @ (p - S.normal_projector(q) @ p)


class _ShootingMap:
    """Residual map of the shooting unknowns ``(s, p0)``."""

    def __init__(self, spec):
        self.spec = spec
        self._last = None
        n = spec.n
        self.BP = tangent_basis(spec.P, spec.q0)
        self.dP = self.BP.shape[1]
        if spec.Q.kind == "levelset":
            qb, _ = self.endpoint(np.concatenate([np.zeros(self.dP), spec.p0]))
            self.BQ = tangent_basis(spec.Q, spec.Q.retract(qb), check=False)
        else:
            self.BQ = tangent_basis(spec.Q, spec.Q.retract(spec.q0), check=False)
        self.size = self.dP + n

    def start(self, s, p):
        q0 = self.spec.P.retract(self.spec.q0 + self.BP @ s)
        return q0, p

    def endpoint(self, x):
        q0, p0 = self.start(x[: self.dP], x[self.dP:])
        s = self.spec
        return flow.flow_endpoint(s.dh, s.t0, s.t1, q0, p0, s.steps)

    def jacobian(self, x):
        """Forward differences around the cached value at ``x``."""
        x = np.asarray(x, dtype=float)
        fx = self(x) if self._last is None or not np.array_equal(self._last[0], x) else self._last[1]
        return numerics.fd_jacobian_forward(self._raw, x, fx, 1e-7 * (1.0 + np.abs(x)))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        fx = self._raw(x)
        self._last = (x.copy(), fx)
        return fx

    def _raw(self, x):
        s = self.spec
        q0, p0 = self.start(x[: self.dP], x[self.dP:])
        qb, pb = flow.flow_endpoint(s.dh, s.t0, s.t1, q0, p0, s.steps)
        return np.concatenate([
            _tangent_residual(s.P, q0, p0, self.BP),
            s.Q.residual(qb),
            _tangent_residual(s.Q, qb, pb, self.BQ),
        ])


def boundary_residuals(spec, path):
    """``(|Gamma(a) on T_P|, |g_Q(gamma(b))|, |Gamma(b) on T_Q|)`` recomputed from scratch."""
    qa, pa, qb, pb = path.q[0], path.p[0], path.q[-1], path.p[-1]
    TP = tangent_basis(spec.P, qa, check=False)
    TQ = tangent_basis(spec.Q, qb, check=False)
    return (float(np.linalg.norm(TP.T @ pa)), float(np.linalg.norm(spec.Q.residual(qb))),
            float(np.linalg.norm(TQ.T @ pb)))


def shoot(spec, tol=1e-10, max_iterations=50):
    """Damped Newton on the shooting residual; the returned solution is
    re-checked against ``tol`` independently of the solver."""
    F = _ShootingMap(spec)
    x0 = np.concatenate([np.zeros(F.dP), spec.p0])
    cfg = NewtonConfig(abs_tolerance=0.1 * tol, max_iterations=max_iterations, fd_step=1e-6)
    res = numerics.newton_solve(F, x0, cfg, jac=F.jacobian, damped=True,
                                max_halvings=MAX_HALVINGS, lstsq=True)
    q0, p0 = F.start(res.x[: F.dP], res.x[F.dP:])
    path = flow.integrate_hamilton(spec.dh, spec.t0, spec.t1, q0, p0, spec.steps)
    r = boundary_residuals(spec, path)
    if max(r) > tol:
        raise MaxIterations(f"re-evaluated boundary residuals {r} exceed {tol:g}",
                            best=res.x, residual=max(r))
    return BvpSolution(path, r, res.iterations, action(spec.dh.lagrangian, path.curve))


@dataclass(frozen=True)
class MultiStartResult:
    best: BvpSolution
    solutions: list
    failures: int


def _thread_cap():
    try:
        return max(1, int(os.environ.get("VAKO_THREADS", "1")))
    except ValueError:
        return 1


def _starts(spec, dP, n_starts, seed):
    """Seeded starts in nested balls around the anchor; start 0 is the anchor."""
    rng = np.random.default_rng(seed)
    n = spec.n
    scale = 1.0 + np.linalg.norm(spec.p0)
    out = [np.concatenate([np.zeros(dP), spec.p0])]
    for i in range(1, n_starts):
        radius = scale * i / max(1, n_starts - 1)
        d = rng.normal(size=dP + n)
        d *= rng.uniform() ** (1.0 / (dP + n)) / np.linalg.norm(d)
        step = radius * d
        step[:dP] *= 0.25
        out.append(out[0] + step)
    return out


def _distinct(sols):
    kept = []
    for s in sols:
        z = np.concatenate([s.q0, s.p0])
        if all(np.max(np.abs(z - np.concatenate([o.q0, o.p0]))) >= DEDUP_TOL for o in kept):
            kept.append(s)
    return kept


def _rank_key(sol):
    return (round(sol.action, 9),) + tuple(np.round(sol.p0, 9)) + tuple(np.round(sol.q0, 9))


def multi_start_shoot(spec, tol=1e-10, n_starts=16, seed=0, screen_steps=None):
    """Shoot from ``n_starts`` seeded starts and collect the distinct solutions.

    Starts are first solved at ``screen_steps`` (default ``steps // 4``,
    at least 100) and to a loose tolerance; the distinct roots are then
    polished at full resolution. Solutions are ranked by action, then by
    initial covector. ``VAKO_THREADS`` caps concurrent starts.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    if n_starts == 1:
        sol = shoot(spec, tol)
        return MultiStartResult(sol, [sol], 0)
    F = _ShootingMap(spec)
    coarse_steps = screen_steps or max(100, spec.steps // 4)
    coarse = spec.with_steps(min(coarse_steps, spec.steps))
    screen_tol = max(tol, 1e-6)

    best_residual = [np.inf]

    def run(x):
        q0, p0 = F.start(x[: F.dP], x[F.dP:])
        try:
            return shoot(coarse.with_anchor(q0, p0), screen_tol, max_iterations=40)
        except NotHyperRegular:
            raise
        except MaxIterations as exc:
            if exc.residual is not None:
                best_residual[0] = min(best_residual[0], float(exc.residual))
            return None
        except NumericalError:
            return None

    starts = _starts(spec, F.dP, n_starts, seed)
    with ThreadPoolExecutor(max_workers=_thread_cap()) as pool:
        screened = list(pool.map(run, starts))
    found = _distinct([s for s in screened if s is not None])
    failures = n_starts - sum(s is not None for s in screened)

    def polish(s):
        try:
            return shoot(spec.with_anchor(s.q0, s.p0), tol)
        except NotHyperRegular:
            raise
        except NumericalError:
            return None

    with ThreadPoolExecutor(max_workers=_thread_cap()) as pool:
        polished = [s for s in pool.map(polish, found) if s is not None]
    sols = sorted(_distinct(polished), key=_rank_key)
    if not sols:
        best = best_residual[0] if np.isfinite(best_residual[0]) else None
        raise NoSolutionFound(f"all {n_starts} starts failed (best residual {best})",
                              best_residual=best)
    return MultiStartResult(sols[0], sols, failures)
