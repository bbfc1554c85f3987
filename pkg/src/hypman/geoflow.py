"""Geodesic flows on conformally flat surface charts.

The metric is e^{2G(x,y)} (dx^2 + dy^2) on a single chart.  The module
integrates the unit-speed geodesic flow in (x, y, theta) coordinates,
co-integrates Jacobi coordinates (a, b) along trajectories, and certifies
hyperbolicity through invariant cone fields when the Gauss curvature is
pinched between two negative bounds.  Everything is local to one chart:
closed negatively curved surfaces admit no global chart, so certificates
apply to finite-time trajectory segments.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidBounds, OutOfDomain, TruncatedTrajectory
from .numcore import rk4_step

DEFAULT_STEP = 1e-3


@dataclass(frozen=True)
class IsothermalSurface:
    """Chart data for the conformal exponent G and its derivatives.

    g_grad returns (dG/dx, dG/dy); g_lap, when supplied, the flat Laplacian
    of G (otherwise a 5-point finite difference with h = 1e-4 is used).
    `domain` bounds the chart; trajectories are truncated at its edge.
    """

    g_fun: Callable[[float, float], float]
    g_grad: Callable[[float, float], tuple[float, float]]
    g_lap: Callable[[float, float], float] | None = None
    domain: Callable[[float, float], bool] = lambda x, y: True
    name: str = ""


@dataclass(frozen=True)
class FlowState:
    """Point of the unit cosphere bundle in chart coordinates."""

    x: float
    y: float
    theta: float

    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class JacobiVector:
    """Coordinates (a, b) of a normal Jacobi vector in the (V, X_perp) frame."""

    a: float
    b: float

    def array(self) -> np.ndarray:
        return np.array([self.a, self.b])


@dataclass(frozen=True)
class ConeParams:
    """Cone-field constants from curvature pinching 0 < k0 <= -K <= k1."""

    k0: float
    k1: float

    def __post_init__(self):
        if not 0.0 < self.k0 <= self.k1:
            raise InvalidBounds(f"need 0 < k0 <= k1, got k0={self.k0}, k1={self.k1}")

    @property
    def zeta(self) -> float:
        return 1.0 / self.k1

    @property
    def gamma(self) -> float:
        return np.sqrt(self.k0) / 3.0

    @property
    def nu(self) -> float:
        return self.gamma * (1.0 + self.zeta * self.k0)


# ---------------------------------------------------------------------------
# built-in surfaces


def flat_surface() -> IsothermalSurface:
    return IsothermalSurface(
        g_fun=lambda x, y: 0.0,
        g_grad=lambda x, y: (0.0, 0.0),
        g_lap=lambda x, y: 0.0,
        name="flat",
    )


def poincare_surface() -> IsothermalSurface:
    """Unit disk with exponent G = log(2/(1 - x^2 - y^2)); curvature -1."""

    def g(x, y):
        return np.log(2.0 / (1.0 - x * x - y * y))

    def grad(x, y):
        d = 1.0 - x * x - y * y
        return (2.0 * x / d, 2.0 * y / d)

    def lap(x, y):
        d = 1.0 - x * x - y * y
        return 4.0 / (d * d)

    return IsothermalSurface(
        g_fun=g,
        g_grad=grad,
        g_lap=lap,
        domain=lambda x, y: x * x + y * y < 1.0,
        name="poincare",
    )


def gaussian_bump_surface(amplitude: float = 0.4, width: float = 1.0) -> IsothermalSurface:
    """Smooth exponent G = A exp(-(x^2+y^2)/(2 w^2)); sign-changing curvature."""
    a, w2 = float(amplitude), float(width) ** 2

    def g(x, y):
        return a * np.exp(-(x * x + y * y) / (2.0 * w2))

    def grad(x, y):
        e = g(x, y)
        return (-x / w2 * e, -y / w2 * e)

    def lap(x, y):
        r2 = x * x + y * y
        return g(x, y) * (r2 / w2 - 2.0) / w2

    return IsothermalSurface(g_fun=g, g_grad=grad, g_lap=lap, name="gaussian-bump")


_BUILTIN_SURFACES = {
    "flat": flat_surface,
    "poincare": poincare_surface,
    "gaussian-bump": gaussian_bump_surface,
}


def builtin_surface(name: str, **params) -> IsothermalSurface:
    try:
        factory = _BUILTIN_SURFACES[name]
    except KeyError:
        raise ValueError(
            f"unknown surface {name!r}; known: {', '.join(sorted(_BUILTIN_SURFACES))}"
        ) from None
    return factory(**params)


# ---------------------------------------------------------------------------
# curvature and the flow


def _lap5(g: Callable[[float, float], float], x: float, y: float, h: float) -> float:
    return (g(x + h, y) + g(x - h, y) + g(x, y + h) + g(x, y - h) - 4.0 * g(x, y)) / (h * h)


def curvature(s: IsothermalSurface, x: float, y: float) -> float:
    """Gauss curvature -e^{-2G} (Gxx + Gyy) at a chart point.

    Without an analytic Laplacian, G is differenced with the 5-point stencil
    at two step sizes and Richardson-extrapolated; a single h small enough
    for the O(h^2) truncation already sits on the roundoff floor of double
    precision, which the extrapolated O(h^4) pair avoids.
    """
    if not s.domain(x, y):
        raise OutOfDomain(f"({x:g}, {y:g}) outside the chart domain")
    if s.g_lap is not None:
        lap = s.g_lap(x, y)
    else:
        h = 3e-3
        lap = (4.0 * _lap5(s.g_fun, x, y, h / 2.0) - _lap5(s.g_fun, x, y, h)) / 3.0
    return -np.exp(-2.0 * s.g_fun(x, y)) * lap


def geodesic_field(s: IsothermalSurface, st: FlowState) -> np.ndarray:
    """Generator of the unit-speed geodesic flow in (x, y, theta)."""
    if not s.domain(st.x, st.y):
        raise OutOfDomain(f"({st.x:g}, {st.y:g}) outside the chart domain")
    gx, gy = s.g_grad(st.x, st.y)
    e = np.exp(-s.g_fun(st.x, st.y))
    c, sn = np.cos(st.theta), np.sin(st.theta)
    return e * np.array([c, sn, gy * c - gx * sn])


def _field_rhs(s: IsothermalSurface) -> Callable[[np.ndarray], np.ndarray]:
    def rhs(state):
        x, y, theta = state
        gx, gy = s.g_grad(x, y)
        e = np.exp(-s.g_fun(x, y))
        c, sn = np.cos(theta), np.sin(theta)
        return e * np.array([c, sn, gy * c - gx * sn])

    return rhs


def _march(
    s: IsothermalSurface,
    state0: np.ndarray,
    t: float,
    step: float,
    rhs: Callable[[np.ndarray], np.ndarray],
    observer: Callable[[float, np.ndarray], None] | None = None,
) -> np.ndarray:
    """RK4 march with domain checks at every accepted step."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    y = np.asarray(state0, dtype=float).copy()
    direction = 1.0 if t >= 0 else -1.0
    remaining = abs(t)
    elapsed = 0.0
    if observer is not None:
        observer(0.0, y)
    while remaining > 0.0:
        h = direction * min(step, remaining)
        y = rk4_step(rhs, y, h)
        elapsed += abs(h)
        remaining -= abs(h)
        if not (np.all(np.isfinite(y)) and s.domain(y[0], y[1])):
            raise TruncatedTrajectory(
                f"trajectory left the chart at t={direction * elapsed:g}",
                exit_time=direction * elapsed,
            )
        if observer is not None:
            observer(direction * elapsed, y)
    return y


def flow(s: IsothermalSurface, st: FlowState, t: float, step: float = DEFAULT_STEP) -> FlowState:
    """Geodesic flow of st for time t (negative t flows backwards)."""
    out = _march(s, st.array(), t, step, _field_rhs(s))
    return FlowState(out[0], out[1], out[2] % (2.0 * np.pi))


def metric_speed(s: IsothermalSurface, st: FlowState) -> float:
    """e^G times the chart speed; identically 1 along unit-speed geodesics."""
    vel = geodesic_field(s, st)[:2]
    return float(np.exp(s.g_fun(st.x, st.y)) * np.hypot(vel[0], vel[1]))


def _jacobi_rhs(s: IsothermalSurface) -> Callable[[np.ndarray], np.ndarray]:
    base = _field_rhs(s)

    def rhs(state):
        d = np.empty(5)
        d[:3] = base(state[:3])
        k = curvature(s, state[0], state[1])
        d[3] = k * state[4]
        d[4] = -state[3]
        return d

    return rhs


def jacobi_flow(
    s: IsothermalSurface,
    st: FlowState,
    v: JacobiVector,
    t: float,
    step: float = DEFAULT_STEP,
) -> JacobiVector:
    """Transport (a, b) by the linearized flow: a' = K(t) b, b' = -a.

    The curvature is evaluated at the integration stage points of the
    coupled 5-dimensional system, so base and Jacobi data stay in sync.
    """
    state = np.concatenate([st.array(), v.array()])
    out = _march(s, state, t, step, _jacobi_rhs(s))
    return JacobiVector(out[3], out[4])


def theta_invariant(v: JacobiVector, p: ConeParams) -> float:
    """Scale-invariant cone coordinate ab / (zeta a^2 + b^2)."""
    r = p.zeta * v.a * v.a + v.b * v.b
    if r == 0.0:
        raise ValueError("theta invariant undefined for the zero vector")
    return v.a * v.b / r


def cone_norm_sq(v: JacobiVector, p: ConeParams) -> float:
    return p.zeta * v.a * v.a + v.b * v.b


# ---------------------------------------------------------------------------
# cone verification


@dataclass(frozen=True)
class ConeDirectionRecord:
    theta0: float
    max_theta_violation: float  # max over samples of (Theta(t) + gamma); <= 0 is good
    min_growth_margin: float  # min over samples of R(t)/(e^{2 nu t} R(0)) - 1

    @property
    def ok(self) -> bool:
        return self.max_theta_violation <= 1e-9 and self.min_growth_margin >= -1e-6


@dataclass(frozen=True)
class ConeReport:
    params: ConeParams
    t_max: float
    curvature_range: tuple[float, float]
    unstable: tuple[ConeDirectionRecord, ...]
    stable: tuple[ConeDirectionRecord, ...]

    @property
    def passed(self) -> bool:
        return all(r.ok for r in self.unstable) and all(r.ok for r in self.stable)


def _cone_directions(p: ConeParams, n_dirs: int) -> list[JacobiVector]:
    """Vectors with Theta log-spaced from the boundary -gamma to the center.

    The minimum of Theta over directions is -1/(2 sqrt(zeta)), attained at
    the cone center b = -a sqrt(zeta); invariance is hardest at the boundary.
    """
    theta_min = -1.0 / (2.0 * np.sqrt(p.zeta))
    n_levels = max(2, (n_dirs + 1) // 2)
    fracs = np.geomspace(1.0, theta_min / -p.gamma, n_levels)
    out: list[JacobiVector] = []
    for frac in fracs:
        target = -p.gamma * frac
        # solve Theta(1, b) = target: b^2 * T - b + zeta * T = 0
        disc = 1.0 - 4.0 * p.zeta * target * target
        disc = max(disc, 0.0)
        for sign in (+1.0, -1.0):
            b = (1.0 + sign * np.sqrt(disc)) / (2.0 * target)
            out.append(JacobiVector(1.0, b))
            if len(out) == n_dirs:
                return out
    return out


def _fundamental_rhs(s: IsothermalSurface) -> Callable[[np.ndarray], np.ndarray]:
    """Joint system: base point plus the 2x2 fundamental matrix of (a, b)."""
    base = _field_rhs(s)

    def rhs(state):
        d = np.empty(7)
        d[:3] = base(state[:3])
        k = curvature(s, state[0], state[1])
        # columns of Phi obey a' = K b, b' = -a
        d[3] = k * state[4]
        d[4] = -state[3]
        d[5] = k * state[6]
        d[6] = -state[5]
        return d

    return rhs


def fundamental_matrix(
    s: IsothermalSurface,
    st: FlowState,
    t: float,
    step: float = DEFAULT_STEP,
    observer: Callable[[float, np.ndarray], None] | None = None,
) -> np.ndarray:
    """2x2 transport matrix of Jacobi coordinates over [0, t]; det is 1."""
    state0 = np.concatenate([st.array(), [1.0, 0.0, 0.0, 1.0]])
    out = _march(s, state0, t, step, _fundamental_rhs(s), observer=observer)
    return np.array([[out[3], out[5]], [out[4], out[6]]])


def verify_cones(
    s: IsothermalSurface,
    st: FlowState,
    p: ConeParams,
    t_max: float,
    n_dirs: int = 16,
    step: float = DEFAULT_STEP,
) -> ConeReport:
    """Certify cone invariance and norm growth along one trajectory.

    Forward in time, every direction with Theta(0) <= -gamma must keep
    Theta <= -gamma and grow as R(t) >= e^{2 nu t} R(0); the mirror holds
    backwards for the stable cone.  Curvature pinching -K in [k0, k1] is
    checked at every step and violating trajectories raise InvalidBounds.
    The (a, b) system is linear, so one fundamental-matrix integration per
    time direction transports every test direction at once.
    """
    dirs = _cone_directions(p, n_dirs)
    k_seen: list[float] = []

    def observe(t, y):
        k = curvature(s, y[0], y[1])
        k_seen.append(k)
        if not (p.k0 - 1e-9 <= -k <= p.k1 + 1e-9):
            raise InvalidBounds(f"curvature {k:g} outside [-k1, -k0] at t={t:g}")

    def run(direction: float) -> tuple[ConeDirectionRecord, ...]:
        history: list[tuple[float, np.ndarray]] = []

        def keep(t, y):
            observe(t, y)
            history.append((t, np.array([[y[3], y[5]], [y[4], y[6]]])))

        fundamental_matrix(s, st, direction * t_max, step, observer=keep)
        records = []
        for v0 in dirs:
            if direction < 0:
                v0 = JacobiVector(v0.a, -v0.b)  # mirror into the stable cone
            r0 = cone_norm_sq(v0, p)
            worst_theta = -np.inf
            worst_growth = np.inf
            for t, phi in history:
                v = JacobiVector(*(phi @ v0.array()))
                th = theta_invariant(v, p)
                # the stable cone backwards mirrors the unstable cone forwards
                worst_theta = max(worst_theta, (th if direction > 0 else -th) + p.gamma)
                growth = cone_norm_sq(v, p) / (np.exp(2.0 * p.nu * abs(t)) * r0)
                worst_growth = min(worst_growth, growth - 1.0)
            records.append(
                ConeDirectionRecord(
                    theta0=theta_invariant(v0, p),
                    max_theta_violation=float(worst_theta),
                    min_growth_margin=float(worst_growth),
                )
            )
        return tuple(records)

    unstable = run(+1.0)
    stable = run(-1.0)
    return ConeReport(
        params=p,
        t_max=t_max,
        curvature_range=(float(np.min(k_seen)), float(np.max(k_seen))),
        unstable=unstable,
        stable=stable,
    )


# ---------------------------------------------------------------------------
# stable/unstable directions


@dataclass(frozen=True)
class DirectionEstimate:
    e_u: np.ndarray  # unit (a, b)
    e_s: np.ndarray
    drift_u: float  # angle change when halving the horizon
    drift_s: float

    @property
    def transverse(self) -> bool:
        return abs(np.linalg.det(np.column_stack([self.e_u, self.e_s]))) >= 1e-3


def _push_direction(
    s: IsothermalSurface,
    st: FlowState,
    horizon: float,
    which: str,
    p: ConeParams,
    step: float,
) -> np.ndarray:
    """Transport the cone-center direction across the full horizon."""
    if which == "unstable":
        start = flow(s, st, -horizon, step)
        seed = JacobiVector(1.0, -np.sqrt(p.zeta))
        v = jacobi_flow(s, start, seed, horizon, step)
    else:
        start = flow(s, st, horizon, step)
        seed = JacobiVector(1.0, np.sqrt(p.zeta))
        v = jacobi_flow(s, start, seed, -horizon, step)
    arr = v.array()
    arr = arr / np.linalg.norm(arr)
    return arr if arr[0] >= 0 else -arr


def estimate_stable_unstable(
    s: IsothermalSurface,
    st: FlowState,
    horizon: float = 8.0,
    step: float = DEFAULT_STEP,
    cone: ConeParams | None = None,
) -> DirectionEstimate:
    """Unstable/stable (a, b) directions by pushing cone centers along the flow.

    E_u is the image at st of the cone center transported forward from time
    -horizon, E_s the mirror backwards; convergence is measured by the angle
    drift between horizons T and T/2.  Curvature bounds are sampled along
    the trajectory when no cone parameters are supplied.
    """
    if cone is None:
        ks: list[float] = []

        def collect(t, y):
            ks.append(curvature(s, y[0], y[1]))

        _march(s, st.array(), horizon, step, _field_rhs(s), observer=collect)
        _march(s, st.array(), -horizon, step, _field_rhs(s), observer=collect)
        k = -np.asarray(ks)
        if np.min(k) <= 0:
            raise InvalidBounds("curvature is not strictly negative along the trajectory")
        cone = ConeParams(k0=float(np.min(k)), k1=float(np.max(k)))
    e_u = _push_direction(s, st, horizon, "unstable", cone, step)
    e_u_half = _push_direction(s, st, horizon / 2.0, "unstable", cone, step)
    e_s = _push_direction(s, st, horizon, "stable", cone, step)
    e_s_half = _push_direction(s, st, horizon / 2.0, "stable", cone, step)
    ang = lambda u, v: float(np.arccos(np.clip(abs(u @ v), 0.0, 1.0)))
    return DirectionEstimate(
        e_u=e_u, e_s=e_s, drift_u=ang(e_u, e_u_half), drift_s=ang(e_s, e_s_half)
    )
