"""Built-in problem corpus with known ground truth."""
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import UnknownProblem
from .geometry import ChartProblem, DistributionFrame, Submanifold
from .hamiltonian import DegenerateHamiltonian, SubRiemannianData, make_subriemannian

NAMES = ("flat-k", "heisenberg", "heisenberg-potential", "martinet", "driven-flat")


@dataclass(frozen=True)
class BvpDefault:
    P: Submanifold
    Q: Submanifold
    q0: np.ndarray
    p0: np.ndarray
    t0: float = 0.0
    t1: float = 1.0


@dataclass(frozen=True)
class BuiltinProblem:
    name: str
    problem: ChartProblem
    lagrangian: object
    bvps: dict = field(default_factory=dict)
    facts: tuple = ()

    @property
    def autonomous(self):
        return self.lagrangian.autonomous

    @property
    def hamiltonian(self):
        return DegenerateHamiltonian(self.lagrangian)

    def bvp(self, key="default", steps=500):
        from .boundary import BvpSpec

        d = self.bvps[key]
        return BvpSpec(d.P, d.Q, d.t0, d.t1, self.hamiltonian, steps, d.q0, d.p0)

    def self_check(self, samples=20, seed=0):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(samples, self.problem.n))
        self.problem.check_frame(pts)
        Z = self.lagrangian.fiber_map()
        for q in pts[:5]:
            Z.spot_check((0.0, q))
            u = rng.normal(size=self.problem.k)
            if not np.linalg.cond(Z.hessian((0.0, q), u)) < 1e10:
                raise ValueError(f"{self.name}: fiber Hessian is singular")


def _identity_metric(k):
    eye = np.eye(k)
    return lambda t, q: eye


def _zero_dG(k, n):
    z = np.zeros((k, k, n))
    return lambda t, q: z


def _flat(n, k, name=None):
    eye = np.eye(n)
    X, Xp, th = eye[:, :k].copy(), eye[:, k:].copy(), eye[k:, :].copy()
    return ChartProblem(n, k, DistributionFrame(
        lambda t, q: X, lambda t, q: th, lambda t, q: Xp,
        dX=lambda t, q: np.zeros((n, k, n)),
        dtheta=lambda t, q: np.zeros((n - k, n, n))), name=name or f"flat-{k}")


def heisenberg_frame():
    def X(t, q):
        x, y, _ = q
        return np.array([[1.0, 0.0], [0.0, 1.0], [-0.5 * y, 0.5 * x]])

    def dX(t, q):
        d = np.zeros((3, 2, 3))
        d[2, 0, 1] = -0.5
        d[2, 1, 0] = 0.5
        return d

    def theta(t, q):
        x, y, _ = q
        return np.array([[0.5 * y, -0.5 * x, 1.0]])

    def dtheta(t, q):
        d = np.zeros((1, 3, 3))
        d[0, 0, 1] = 0.5
        d[0, 1, 0] = -0.5
        return d

    ez = np.array([[0.0], [0.0], [1.0]])
    return ChartProblem(3, 2, DistributionFrame(X, theta, lambda t, q: ez, dX=dX, dtheta=dtheta),
                        name="heisenberg")


def martinet_frame():
    def X(t, q):
        y = q[1]
        return np.array([[1.0, 0.0], [0.0, 1.0], [0.5 * y * y, 0.0]])

    def dX(t, q):
        d = np.zeros((3, 2, 3))
        d[2, 0, 1] = q[1]
        return d

    def theta(t, q):
        y = q[1]
        return np.array([[-0.5 * y * y, 0.0, 1.0]])

    def dtheta(t, q):
        d = np.zeros((1, 3, 3))
        d[0, 0, 1] = -q[1]
        return d

    ez = np.array([[0.0], [0.0], [1.0]])
    return ChartProblem(3, 2, DistributionFrame(X, theta, lambda t, q: ez, dX=dX, dtheta=dtheta),
                        name="martinet")


def _vertical_line(x, y):
    """The line ``{q1 = x, q2 = y}`` in R^3 as a codimension-2 level set."""
    J = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    return Submanifold.LevelSet(lambda q: np.array([q[0] - x, q[1] - y]), 2,
                                jac=lambda q: J, n=3)


def flat(k, n=3):
    problem = _flat(n, k)
    lagr = make_subriemannian(SubRiemannianData(_identity_metric(k), dGdq=_zero_dG(k, n)), problem)
    target = np.ones(n)
    target[k:] = 0.0
    bvps = {"default": BvpDefault(Submanifold.Point(np.zeros(n)), Submanifold.Point(target),
                                  np.zeros(n), np.zeros(n))}
    if n >= 3:
        plane_jac = np.zeros((1, n))
        plane_jac[0, n - 1] = 1.0
        plane = Submanifold.LevelSet(lambda q: np.array([q[n - 1]]), 1, jac=lambda q: plane_jac, n=n)
        top = np.zeros(n)
        top[n - 1] = 1.0
        if k == n:
            bvps["plane-to-point"] = BvpDefault(plane, Submanifold.Point(top),
                                                np.array([0.2, -0.1] + [0.0] * (n - 2)), 0.5 * top)
    facts = (f"straight line 0 -> target has action {0.5 * k:g}",)
    return BuiltinProblem(f"flat-{k}", problem, lagr, bvps, facts)


def heisenberg(potential=False):
    problem = heisenberg_frame()
    if potential:
        data = SubRiemannianData(_identity_metric(2), V=lambda t, q: 0.5 * q[2] ** 2,
                                 dVdq=lambda t, q: np.array([0.0, 0.0, q[2]]),
                                 dGdq=_zero_dG(2, 3))
        name = "heisenberg-potential"
    else:
        data = SubRiemannianData(_identity_metric(2), dGdq=_zero_dG(2, 3))
        name = "heisenberg"
    lagr = make_subriemannian(data, problem)
    origin = np.zeros(3)
    bvps = {
        "default": BvpDefault(Submanifold.Point(origin), Submanifold.Point([1.0, 0.0, 0.0]),
                              origin, np.array([0.8, 0.1, 0.2])),
        "skew": BvpDefault(Submanifold.Point(origin), Submanifold.Point([1.0, 0.5, 0.3]),
                           origin, np.array([1.0, 0.5, 0.5])),
        "vertical": BvpDefault(Submanifold.Point(origin), Submanifold.Point([0.0, 0.0, 0.5]),
                               origin, np.array([2.0, 1.0, 5.0])),
    }
    facts = ("contact distribution: nonconstant horizontal curves are regular",
             "p_z is conserved when there is no potential")
    return BuiltinProblem(name, problem, lagr, bvps, facts)


def martinet():
    problem = martinet_frame()
    lagr = make_subriemannian(SubRiemannianData(_identity_metric(2),
                                                dGdq=_zero_dG(2, 3)), problem)
    origin = np.zeros(3)
    bvps = {
        "default": BvpDefault(Submanifold.Point(origin), Submanifold.Point([1.0, 0.5, 0.1]),
                              origin, np.array([1.0, 0.5, 0.0])),
    }
    facts = ("the line t -> (t, 0, 0) is an abnormal extremal",)
    return BuiltinProblem("martinet", problem, lagr, bvps, facts)


def driven_flat():
    problem = _flat(3, 2, "driven-flat")
    data = SubRiemannianData(_identity_metric(2), V=lambda t, q: np.sin(t) * q[0],
                             dVdq=lambda t, q: np.array([np.sin(t), 0.0, 0.0]),
                             dGdq=_zero_dG(2, 3))
    origin = np.zeros(3)
    bvps = {"default": BvpDefault(Submanifold.Point(origin), _vertical_line(1.0, 0.5),
                                  origin, np.array([1.0, 0.5, 0.0]))}
    facts = ("time-dependent potential, no conservation law",)
    lagr = make_subriemannian(data, problem, autonomous=False)
    return BuiltinProblem("driven-flat", problem, lagr, bvps, facts)


def builtin(name, **params):
    """Look up a built-in problem; ``flat-<k>`` accepts an ``n`` parameter."""
    m = re.fullmatch(r"flat-(\d+)", name)
    if m:
        n = int(params.pop("n", 3))
        k = int(m.group(1))
        if not 1 <= k <= n:
            raise UnknownProblem(f"flat-{k} needs 1 <= k <= n (n={n})")
        out = flat(k, n)
    elif name == "heisenberg":
        out = heisenberg()
    elif name == "heisenberg-potential":
        out = heisenberg(potential=True)
    elif name == "martinet":
        out = martinet()
    elif name == "driven-flat":
        out = driven_flat()
    else:
        raise UnknownProblem(f"unknown problem {name!r}")
    if params:
        raise UnknownProblem(f"unexpected parameters for {name!r}: {sorted(params)}")
    return out


def corpus():
    return [builtin(n) for n in ("flat-3", "flat-2", "heisenberg", "heisenberg-potential",
                                 "martinet", "driven-flat")]
