"""Built-in models, Jacobian polytopes, fixed-step simulation and trajectory checks."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dissipativity import OpenVertexFamily
from .dominance import VertexFamily
from .errors import Divergence, InputError

DEFAULT_DT = 1e-3
DEFAULT_T = 100.0


@dataclass(frozen=True, eq=False)
class ModelDef:
    """A vector field with its Jacobian and a box around the nonlinear entries.

    ``linear_part`` holds the constant Jacobian entries (zeros where the
    Jacobian varies); ``nonlinear_entries`` maps (row, col) to the interval
    the varying entry stays in. ``feedthrough`` bounds a scalar D for models
    used as open subsystems.
    """

    name: str
    n: int
    params: dict
    vector_field: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    linear_part: np.ndarray
    nonlinear_entries: dict
    inputs: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    feedthrough: tuple | None = None
    state_names: tuple = ()

    def f(self, x):
        return np.asarray(self.vector_field(np.asarray(x, dtype=float)), dtype=float)

    def J(self, x):
        return self.jacobian(np.asarray(x, dtype=float))


# --- mechanical potentials: alpha, d alpha, true slope range, default cover -------------

def _potential(kind: str, k: float):
    if kind == "linear":
        return (lambda x: k * x), (lambda x: k), (k, k), (k, k)
    if kind == "convex":
        return (lambda x: 3 * x + 2 * math.sin(x)), (lambda x: 3 + 2 * math.cos(x)), (1.0, 5.0), (1.0, 5.0)
    if kind == "double_well":
        return (lambda x: 0.5 * x - math.sin(x)), (lambda x: 0.5 - math.cos(x)), (-0.5, 1.5), (-2.0, 5.0)
    if kind == "polynomial":
        # slope unbounded above; the default cover holds on |x_p| <= sqrt(2)
        return (lambda x: x**3 - x), (lambda x: 3 * x * x - 1), (-1.0, math.inf), (-1.0, 5.0)
    raise InputError(f"unknown potential {kind!r}")


def _slope_bounds(kind, params, true, default):
    lo = params.get("dalpha_lo", default[0])
    hi = params.get("dalpha_hi", default[1])
    if lo > hi:
        raise InputError("dalpha_lo must not exceed dalpha_hi")
    if math.isfinite(true[1]) and (lo > true[0] + 1e-12 or hi < true[1] - 1e-12):
        raise InputError(
            f"slope bounds [{lo}, {hi}] do not cover the {kind} potential's range {true}")
    return float(lo), float(hi)


def _check_params(params, allowed):
    unknown = set(params) - set(allowed)
    if unknown:
        raise InputError(f"unknown parameters {sorted(unknown)}")
    out = dict(allowed)
    out.update(params)
    for k, v in out.items():
        if k == "potential" or v is None:
            continue
        if not isinstance(v, (int, float)) or not math.isfinite(v):
            raise InputError(f"parameter {k} must be a finite number")
    return out


def _duffing(params):
    p = _check_params(params, dict(potential="double_well", c=5.0, k=1.0, u=0.0,
                                   dalpha_lo=None, dalpha_hi=None))
    p = {k: v for k, v in p.items() if v is not None}
    alpha, dalpha, true, default = _potential(p["potential"], p["k"])
    c, u = p["c"], p["u"]
    lo, hi = _slope_bounds(p["potential"], p, true, default)

    def f(x):
        return (x[1], -alpha(x[0]) - c * x[1] + u)

    def J(x):
        return np.array([[0.0, 1.0], [-dalpha(x[0]), -c]])

    lin = np.array([[0.0, 1.0], [0.0, -c]])
    nl = {(1, 0): (-hi, -lo)}
    if lo == hi:  # linear spring: a single vertex
        lin[1, 0], nl = -lo, {}
    return ModelDef("duffing", 2, p, f, J, lin, nl,
                    inputs={"u": np.array([0.0, 1.0])},
                    outputs={"x_p": np.array([1.0, 0.0]), "x_v": np.array([0.0, 1.0]),
                             "neg_x_p": np.array([-1.0, 0.0])},
                    state_names=("x_p", "x_v"))


def _duffing_dc(params):
    p = _check_params(params, dict(potential="double_well", c=5.0, k=1.0, R=1.0, k_f=1.0,
                                   k_e=1.0, L=0.1, V=0.0, dalpha_lo=None, dalpha_hi=None))
    p = {k: v for k, v in p.items() if v is not None}
    if p["L"] <= 0:
        raise InputError("inductance L must be positive")
    alpha, dalpha, true, default = _potential(p["potential"], p["k"])
    lo, hi = _slope_bounds(p["potential"], p, true, default)
    c, R, kf, ke, L, V = p["c"], p["R"], p["k_f"], p["k_e"], p["L"], p["V"]

    def f(x):
        return (x[1], -alpha(x[0]) - c * x[1] + kf * x[2], (-R * x[2] - ke * x[1] + V) / L)

    lin = np.array([[0.0, 1.0, 0.0], [0.0, -c, kf], [0.0, -ke / L, -R / L]])

    def J(x):
        A = lin.copy()
        A[1, 0] = -dalpha(x[0])
        return A

    return ModelDef("duffing_dc", 3, p, f, J, lin, {(1, 0): (-hi, -lo)},
                    inputs={"V": np.array([0.0, 0.0, 1.0 / L])},
                    outputs={"x_p": np.array([1.0, 0.0, 0.0]), "x_v": np.array([0.0, 1.0, 0.0])},
                    state_names=("x_p", "x_v", "x_i"))


def _duffing_dc_pi(params):
    p = _check_params(params, dict(potential="double_well", c=5.0, k=1.0, R=1.0, k_f=1.0,
                                   k_e=1.0, L=0.1, k_P=1.0, k_I=5.0, r=0.0,
                                   dalpha_lo=None, dalpha_hi=None))
    p = {k: v for k, v in p.items() if v is not None}
    if p["L"] <= 0:
        raise InputError("inductance L must be positive")
    alpha, dalpha, true, default = _potential(p["potential"], p["k"])
    lo, hi = _slope_bounds(p["potential"], p, true, default)
    c, R, kf, ke, L = p["c"], p["R"], p["k_f"], p["k_e"], p["L"]
    kP, kI, r = p["k_P"], p["k_I"], p["r"]

    def f(x):
        V = kP * (r - x[0]) + kI * x[3]
        return (x[1], -alpha(x[0]) - c * x[1] + kf * x[2],
                (-R * x[2] - ke * x[1] + V) / L, r - x[0])

    lin = np.array([[0.0, 1.0, 0.0, 0.0],
                    [0.0, -c, kf, 0.0],
                    [-kP / L, -ke / L, -R / L, kI / L],
                    [-1.0, 0.0, 0.0, 0.0]])

    def J(x):
        A = lin.copy()
        A[1, 0] = -dalpha(x[0])
        return A

    return ModelDef("duffing_dc_pi", 4, p, f, J, lin, {(1, 0): (-hi, -lo)},
                    outputs={"x_p": np.array([1.0, 0, 0, 0]), "x_v": np.array([0, 1.0, 0, 0])},
                    state_names=("x_p", "x_v", "x_i", "x_c"))


def _sech2(z):
    return 1.0 / math.cosh(z) ** 2 if abs(z) < 350 else 0.0


def _spring_damper_terms(p):
    """Shared pieces of the tanh-feedback mass-spring-damper loops."""
    c, kP = p["c"], p["k_P"]
    ks, kd = p["spring_kappa"], p["damping_kappa"]

    def accel(xp, xv):
        return (-xp - ks * math.sin(xp) - c * xv - kd * math.sin(xv)
                + kP * math.tanh(2 * xp))

    def d_xp(xp):
        return -1.0 - ks * math.cos(xp) + 2 * kP * _sech2(2 * xp)

    def d_xv(xv):
        return -c - kd * math.cos(xv)

    slope = sorted((0.0, 2 * kP))
    nl = {(1, 0): (-1.0 - abs(ks) + slope[0], -1.0 + abs(ks) + slope[1])}
    if kd != 0:
        nl[(1, 1)] = (-c - abs(kd), -c + abs(kd))
    return accel, d_xp, d_xv, nl


def _mass_spring_tanh_P(params):
    p = _check_params(params, dict(c=5.0, k_P=1.0, v=0.0, spring_kappa=0.0, damping_kappa=0.0))
    accel, d_xp, d_xv, nl = _spring_damper_terms(p)
    v = p["v"]

    def f(x):
        return (x[1], accel(x[0], x[1]) + v)

    def J(x):
        return np.array([[0.0, 1.0], [d_xp(x[0]), d_xv(x[1])]])

    lin = np.array([[0.0, 1.0], [0.0, 0.0 if (1, 1) in nl else -p["c"]]])
    return ModelDef("mass_spring_tanh_P", 2, p, f, J, lin, nl,
                    inputs={"v": np.array([0.0, 1.0])},
                    outputs={"x_p": np.array([1.0, 0.0]), "x_v": np.array([0.0, 1.0])},
                    state_names=("x_p", "x_v"))


def _mass_spring_tanh_PI(params, name="mass_spring_tanh_PI"):
    p = _check_params(params, dict(c=5.0, k_P=1.0, k_I=-1.0, v=0.0,
                                   spring_kappa=0.0, damping_kappa=0.0))
    accel, d_xp, d_xv, nl = _spring_damper_terms(p)
    kI, v = p["k_I"], p["v"]

    def f(x):
        return (x[1], accel(x[0], x[1]) + kI * x[2] + v, x[0])

    def J(x):
        return np.array([[0.0, 1.0, 0.0], [d_xp(x[0]), d_xv(x[1]), kI], [1.0, 0.0, 0.0]])

    lin = np.array([[0.0, 1.0, 0.0], [0.0, 0.0 if (1, 1) in nl else -p["c"], kI], [1.0, 0.0, 0.0]])
    return ModelDef(name, 3, p, f, J, lin, nl,
                    inputs={"v": np.array([0.0, 1.0, 0.0])},
                    outputs={"x_p": np.array([1.0, 0, 0]), "x_v": np.array([0, 1.0, 0])},
                    state_names=("x_p", "x_v", "x_c"))


def _perturbed(which):
    def build(params):
        params = dict(params)
        kappa = params.pop("kappa", 0.0)
        params[f"{which}_kappa"] = kappa
        return _mass_spring_tanh_PI(params, f"mass_spring_tanh_PI_{which}")
    return build


def _pendulum(params):
    # lifted from the cylinder S x R to R^2; angles are not wrapped
    p = _check_params(params, dict(c=1.0, u=0.0))
    c, u = p["c"], p["u"]

    def f(x):
        return (x[1], -math.sin(x[0]) - c * x[1] + u)

    def J(x):
        return np.array([[0.0, 1.0], [-math.cos(x[0]), -c]])

    return ModelDef("pendulum", 2, p, f, J, np.array([[0.0, 1.0], [0.0, -c]]), {(1, 0): (-1.0, 1.0)},
                    inputs={"u": np.array([0.0, 1.0])},
                    outputs={"x_p": np.array([1.0, 0.0]), "x_v": np.array([0.0, 1.0])},
                    state_names=("x_p", "x_v"))


def _pi_controller(params):
    p = _check_params(params, dict(k_I=-1.0, dkP_lo=0.0, dkP_hi=2.0, u_bar=0.0))
    if p["dkP_lo"] < 0 or p["dkP_hi"] < p["dkP_lo"]:
        raise InputError("proportional slope bounds must satisfy 0 <= lo <= hi")
    u_bar = p["u_bar"]
    return ModelDef("pi_controller", 1, p, lambda x: (u_bar,), lambda x: np.zeros((1, 1)),
                    np.zeros((1, 1)), {},
                    inputs={"u_bar": np.array([1.0])},
                    outputs={"y_bar": np.array([p["k_I"]])},
                    feedthrough=(p["dkP_lo"], p["dkP_hi"]),
                    state_names=("x_c",))


BUILTINS = {
    "duffing": _duffing,
    "duffing_dc": _duffing_dc,
    "duffing_dc_pi": _duffing_dc_pi,
    "mass_spring_tanh_P": _mass_spring_tanh_P,
    "mass_spring_tanh_PI": _mass_spring_tanh_PI,
    "mass_spring_tanh_PI_spring": _perturbed("spring"),
    "mass_spring_tanh_PI_damping": _perturbed("damping"),
    "pendulum": _pendulum,
    "pi_controller": _pi_controller,
}


def builtin(name: str, params: dict | None = None) -> ModelDef:
    """Instantiate a built-in model; unknown names or parameters raise ``InputError``."""
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise InputError(f"unknown model {name!r}; known: {sorted(BUILTINS)}") from None
    return factory(dict(params or {}))


def linear_model(A, name="linear") -> ModelDef:
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("A must be square")
    A.setflags(write=False)
    return ModelDef(name, A.shape[0], {}, lambda x: A @ x, lambda x: A, A, {})


# --- polytopes and samples ---------------------------------------------------------

def _corners(model: ModelDef):
    keys = sorted(model.nonlinear_entries)
    for (i, j) in keys:
        lo, hi = model.nonlinear_entries[(i, j)]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise InputError(f"Jacobian entry ({i}, {j}) of {model.name} is unbounded")
    choices = [sorted({model.nonlinear_entries[k][0], model.nonlinear_entries[k][1]}) for k in keys]
    for combo in itertools.product(*choices):
        A = model.linear_part.copy()
        for (i, j), v in zip(keys, combo):
            A[i, j] = v
        yield A


def jacobian_vertices(model: ModelDef) -> VertexFamily:
    """Corner matrices of the Jacobian box (2^k for k varying entries)."""
    return VertexFamily(list(_corners(model)))


def _channel(spec, table, n, kind):
    if isinstance(spec, str):
        try:
            return np.asarray(table[spec], dtype=float)
        except KeyError:
            raise InputError(f"unknown {kind} {spec!r}; known: {sorted(table)}") from None
    v = np.asarray(spec, dtype=float).ravel()
    if v.shape != (n,):
        raise InputError(f"{kind} vector must have length {n}")
    return v


def open_family(model: ModelDef, input, output) -> OpenVertexFamily:
    """Open vertex family for one input channel and one output row.

    ``input``/``output`` name a channel of the model or give the B column /
    C row explicitly. Feedthrough corners multiply the A corners.
    """
    B = _channel(input, model.inputs, model.n, "input").reshape(-1, 1)
    C = _channel(output, model.outputs, model.n, "output").reshape(1, -1)
    ds = [0.0] if model.feedthrough is None else sorted(set(model.feedthrough))
    verts = [(A, B, C, np.array([[d]])) for A in _corners(model) for d in ds]
    return OpenVertexFamily(verts)


def jacobian_samples(model: ModelDef, states) -> list[np.ndarray]:
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if states.shape[0] == 0:
        raise InputError("empty state grid")
    return [model.J(x) for x in states]


def position_grid(model: ModelDef, lo: float, hi: float, num: int) -> np.ndarray:
    """States with x_p on a uniform grid and every other coordinate zero."""
    X = np.zeros((num, model.n))
    X[:, 0] = np.linspace(lo, hi, num)
    return X


# --- integration ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def to_csv(self) -> str:
        n = self.states.shape[1]
        lines = [",".join(["t"] + [f"x{i + 1}" for i in range(n)])]
        for t, x in zip(self.times, self.states):
            lines.append(",".join(f"{v:.12g}" for v in (t, *x)))
        return "\n".join(lines) + "\n"


def _num_steps(dt, T):
    if not (dt > 0 and T >= dt):
        raise InputError("need dt > 0 and T >= dt")
    return int(round(T / dt))


def _rk4(rhs, z0, dt, steps, renorm=None):
    out = np.empty((steps + 1, len(z0)))
    z = np.array(z0, dtype=float)
    out[0] = z
    h2 = 0.5 * dt
    for k in range(steps):
        k1 = rhs(z)
        k2 = rhs(z + h2 * k1)
        k3 = rhs(z + h2 * k2)
        k4 = rhs(z + dt * k3)
        z = z + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if renorm is not None:
            z = renorm(z)
        if not np.all(np.isfinite(z)):
            raise Divergence(f"state became non-finite at t={(k + 1) * dt:.6g}", (k + 1) * dt)
        out[k + 1] = z
    return out


def _rk4_scalar(field, z0, dt, steps):
    """RK4 on plain float lists; much cheaper than numpy for a handful of states."""
    out = [None] * (steps + 1)
    z = [float(v) for v in z0]
    out[0] = z
    h2, h6 = 0.5 * dt, dt / 6.0
    k = 0
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(steps):
                k1 = field(z)
                k2 = field([a + h2 * b for a, b in zip(z, k1)])
                k3 = field([a + h2 * b for a, b in zip(z, k2)])
                k4 = field([a + dt * b for a, b in zip(z, k3)])
                z = [a + h6 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(z, k1, k2, k3, k4)]
                if not math.isfinite(sum(z)):
                    raise Divergence(f"state became non-finite at t={(k + 1) * dt:.6g}",
                                     (k + 1) * dt)
                out[k + 1] = z
    except (OverflowError, ValueError):
        raise Divergence(f"state overflowed at t={(k + 1) * dt:.6g}", (k + 1) * dt) from None
    return np.array(out, dtype=float)


def integrate(model: ModelDef, x0, dt: float = DEFAULT_DT, T: float = DEFAULT_T) -> Trajectory:
    """Classical fixed-step RK4 from ``x0`` over [0, T]."""
    steps = _num_steps(dt, T)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (model.n,):
        raise InputError(f"x0 must have length {model.n}")
    X = _rk4_scalar(model.vector_field, x0, dt, steps)
    return Trajectory(dt * np.arange(steps + 1), X)


def _prolonged_rhs(model):
    n = model.n

    def rhs(z):
        x, dx = z[:n], z[n:]
        return np.concatenate([np.asarray(model.vector_field(x), dtype=float), model.jacobian(x) @ dx])
    return rhs


def integrate_prolonged(model: ModelDef, x0, dx0, dt: float = DEFAULT_DT,
                        T: float = DEFAULT_T) -> tuple[Trajectory, Trajectory]:
    """Joint RK4 of (x, dx) under (f(x), J(x) dx)."""
    steps = _num_steps(dt, T)
    z0 = np.concatenate([np.asarray(x0, float), np.asarray(dx0, float)])
    if z0.shape != (2 * model.n,):
        raise InputError(f"x0 and dx0 must have length {model.n}")
    Z = _rk4(_prolonged_rhs(model), z0, dt, steps)
    t = dt * np.arange(steps + 1)
    return Trajectory(t, Z[:, :model.n]), Trajectory(t, Z[:, model.n:])


# --- attractor classification --------------------------------------------------------

@dataclass(frozen=True)
class FixedPoint:
    point: tuple
    kind: str = "fixed_point"

    def to_dict(self):
        return {"kind": self.kind, "point": list(self.point)}


@dataclass(frozen=True)
class PeriodicOrbit:
    period: float
    amplitude: float
    kind: str = "periodic_orbit"

    def to_dict(self):
        return {"kind": self.kind, "period": self.period, "amplitude": self.amplitude}


@dataclass(frozen=True)
class Unknown:
    diagnostics: dict
    kind: str = "unknown"

    def to_dict(self):
        return {"kind": self.kind, "diagnostics": self.diagnostics}


def classify_attractor(traj: Trajectory, tail_fraction: float = 0.5, tol: float | None = None):
    """Fixed point, periodic orbit or unknown, judged on the trajectory tail.

    Fixed point: the tail stays within ``tol`` of the final state.
    Periodic orbit: distances to the first tail state dip to near zero at
    near-uniform spacing, with oscillation amplitude above ``10*tol``.
    """
    X = traj.states
    start = int(len(X) * (1 - tail_fraction))
    tail = X[start:]
    times = traj.times[start:]
    if len(tail) < 100:
        raise InputError("tail must contain at least 100 samples")
    xT = tail[-1]
    if tol is None:
        tol = 1e-4 * (1 + float(np.linalg.norm(xT)))
    drift = float(np.max(np.linalg.norm(tail - xT, axis=1)))
    if drift <= tol:
        return FixedPoint(tuple(float(v) for v in xT))
    amplitude = float(np.max(np.ptp(tail, axis=0)))
    d = np.linalg.norm(tail - tail[0], axis=1)
    dmax = float(d.max())
    diag = {"drift": drift, "amplitude": amplitude, "tol": tol}
    if amplitude <= 10 * tol:
        return Unknown({**diag, "reason": "small amplitude but not settled"})
    near = 0.02 * dmax
    idx = _returns(d, near, 0.25 * dmax)
    diag["returns"] = len(idx)
    if len(idx) < 2:
        return Unknown({**diag, "reason": "fewer than two recurrences"})
    marks = np.concatenate([[times[0]], times[idx]])
    gaps = np.diff(marks)
    spread = float(np.std(gaps) / np.mean(gaps))
    diag["gap_spread"] = spread
    if spread > 0.05:
        return Unknown({**diag, "reason": "recurrences not uniformly spaced"})
    return PeriodicOrbit(float(np.mean(gaps)), amplitude)


def _returns(d, near, far):
    """Closest-approach index of each dip below ``near`` after an excursion past ``far``."""
    idx = []
    away = False
    k = 0
    N = len(d)
    while k < N:
        if not away:
            if d[k] > far:
                away = True
            k += 1
            continue
        if d[k] < near:
            j = k
            while j + 1 < N and d[j + 1] < near:
                j += 1
            if j + 1 >= N:  # excursion cut off by the end of the tail
                break
            idx.append(k + int(np.argmin(d[k:j + 1])))
            away = False
            k = j + 1
            continue
        k += 1
    return idx


# --- trajectory-level property checks ------------------------------------------------

@dataclass(frozen=True)
class CheckResult:
    verdict: bool
    worst: float


def check_incremental_decay(model: ModelDef, P, lam: float, x0, y0, dt: float = DEFAULT_DT,
                            T: float = 5.0, rtol: float = 1e-6) -> CheckResult:
    """Is t -> exp(2 lam t) V(x(t) - y(t)) nonincreasing along two solutions?

    ``worst`` is the largest one-step increase relative to the local
    magnitude of the sequence; the verdict allows ``rtol``.
    """
    P = np.asarray(P, dtype=float)
    X = integrate(model, x0, dt, T)
    Y = integrate(model, y0, dt, T)
    E = X.states - Y.states
    w = np.exp(2 * lam * X.times) * np.einsum("ij,jk,ik->i", E, P, E)
    inc = np.diff(w)
    mag = np.maximum(np.abs(w[:-1]), np.abs(w[1:]))
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(mag > 1e-300, inc / mag, 0.0)
    worst = float(rel.max()) if len(rel) else 0.0
    return CheckResult(worst <= rtol, worst)


def cone_invariance_check(model: ModelDef, P, x0, dx0, dt: float = DEFAULT_DT, T: float = 10.0,
                          tol: float = 1e-9) -> CheckResult:
    """Does dx stay in {V(dx) <= 0} under the prolonged flow?

    dx is renormalized after every step (V is quadratic, so its sign is
    unaffected); ``worst`` is the largest V(dx)/|dx|^2 seen.
    """
    P = np.asarray(P, dtype=float)
    dx0 = np.asarray(dx0, dtype=float)
    if dx0 @ P @ dx0 > 0:
        raise InputError("dx0 must lie in the negative cone V(dx0) <= 0")
    n = model.n
    steps = _num_steps(dt, T)

    def renorm(z):
        z[n:] /= np.linalg.norm(z[n:])
        return z

    z0 = np.concatenate([np.asarray(x0, float), dx0 / np.linalg.norm(dx0)])
    Z = _rk4(_prolonged_rhs(model), z0, dt, steps, renorm=renorm)
    D = Z[:, n:]
    ratios = np.einsum("ij,jk,ik->i", D, P, D)
    worst = float(ratios.max())
    return CheckResult(worst <= tol, worst)


def box_samples(model: ModelDef, num: int = 21) -> list[np.ndarray]:
    """Jacobians on a uniform grid over the box of varying entries."""
    keys = sorted(model.nonlinear_entries)
    axes = [np.linspace(*model.nonlinear_entries[k], num) for k in keys]
    out = []
    for combo in itertools.product(*axes):
        A = model.linear_part.copy()
        for (i, j), v in zip(keys, combo):
            A[i, j] = v
        out.append(A)
    return out
