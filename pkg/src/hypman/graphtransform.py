"""Graph transforms and local stable/unstable manifolds of planar saddles.

A hyperbolic fixed point is first normalized: translated to the origin,
rotated into its eigenframe, and rescaled by a factor delta_1 until the
nonlinearity is small.  The action of the normalized map on unstable graphs
{x2 = F(x1)} (and of its inverse on stable graphs {x1 = F(x2)}) is then a
contraction on grid functions, and the local manifolds are its fixed points.
The same machinery runs over periodic sequences of normalized maps, which is
how manifolds along periodic orbits are produced.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import numcore
from .errors import (
    DeltaTooLarge,
    InversionFailure,
    NoConvergence,
    NotHyperbolic,
    OutOfDomain,
    UndefinedRatio,
)
from .numcore import GridFunction, cheb_nodes, fd_jacobian, invert_monotone

DEFAULT_GRID_N = 33
DEFAULT_DELTA_TARGET = 0.05


# ---------------------------------------------------------------------------
# basic geometry


@dataclass(frozen=True)
class Affine:
    """Affine change of variables q -> offset + linear @ q."""

    linear: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float))
        object.__setattr__(self, "offset", np.asarray(self.offset, dtype=float))

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        off = self.offset if q.ndim == 1 else self.offset[:, None]
        return self.linear @ q + off

    def inverse(self) -> "Affine":
        inv = np.linalg.inv(self.linear)
        return Affine(inv, -inv @ self.offset)

    @classmethod
    def identity(cls) -> "Affine":
        return cls(np.eye(2), np.zeros(2))


def _zeros2() -> np.ndarray:
    return np.zeros(2)


@dataclass(frozen=True)
class PlanarMap:
    """A 2-D diffeomorphism germ.

    `forward` (and the optional `inverse`/`jacobian`) take a point of shape
    (2,); maps with `vectorized=True` also accept batches of shape (2, N).
    `difference` subtracts two phase points and exists so that phase spaces
    with a periodic coordinate (billiard boundaries) can supply a wrap-aware
    version; everything downstream, including finite-difference Jacobians,
    uses it instead of plain subtraction.
    """

    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    fixed_point: np.ndarray = field(default_factory=_zeros2)
    vectorized: bool = False
    difference: Callable[[np.ndarray, np.ndarray], np.ndarray] = np.subtract
    fd_step: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "fixed_point", np.asarray(self.fixed_point, dtype=float))

    def jacobian_at(self, x: np.ndarray) -> np.ndarray:
        if self.jacobian is not None:
            return np.asarray(self.jacobian(np.asarray(x, dtype=float)), dtype=float)
        return fd_jacobian(self.forward, x, self.fd_step, diff=self.difference)

    def invert(
        self,
        y: np.ndarray,
        x0: np.ndarray | None = None,
        tol: float = 1e-12,
        max_iter: int = 60,
    ) -> np.ndarray:
        """Inverse image of y: the analytic inverse or damped-Newton on forward."""
        y = np.asarray(y, dtype=float)
        if self.inverse is not None:
            return np.asarray(self.inverse(y), dtype=float)
        x = np.array(y if x0 is None else x0, dtype=float)
        res = np.asarray(self.difference(self.forward(x), y), dtype=float)
        err = float(np.max(np.abs(res)))
        for _ in range(max_iter):
            if err <= tol:
                return x
            step = np.linalg.solve(self.jacobian_at(x), res)
            for damp in (1.0, 0.5, 0.25, 0.125):
                x_try = x - damp * step
                res_try = np.asarray(self.difference(self.forward(x_try), y), dtype=float)
                err_try = float(np.max(np.abs(res_try)))
                if err_try < err:
                    break
            else:
                raise InversionFailure(f"Newton stalled at residual {err:g}")
            x, res, err = x_try, res_try, err_try
        if err <= tol:
            return x
        raise InversionFailure(f"no convergence after {max_iter} iterations, residual {err:g}")

    def eval_batch(self, pts: np.ndarray) -> np.ndarray:
        """forward on a (2, N) batch, looping when the map is not vectorized."""
        pts = np.asarray(pts, dtype=float)
        if self.vectorized:
            return np.asarray(self.forward(pts), dtype=float)
        return np.column_stack([self.forward(pts[:, j]) for j in range(pts.shape[1])])


# ---------------------------------------------------------------------------
# hyperbolicity data


@dataclass
class HyperbolicityParams:
    """Rates and bounds for a hyperbolic saddle.

    lam < 1 < mu are the contraction/expansion rates, lam_t/mu_t fixed
    intermediate rates used by the quantitative trajectory bounds, c0 a bound
    on the diagonal blocks, delta the achieved nonlinearity bound and n_reg
    the regularity order of the graph iteration.
    """

    lam: float
    mu: float
    c0: float | None = None
    delta: float = 0.0
    n_reg: int = 2
    lam_t: float | None = None
    mu_t: float | None = None

    def __post_init__(self):
        if self.lam_t is None:
            self.lam_t = (2.0 * self.lam + 1.0) / 3.0
        if self.mu_t is None:
            self.mu_t = (2.0 * self.mu + 1.0) / 3.0
        if self.c0 is None:
            self.c0 = max(self.mu, 1.0 / self.lam)
        if not 0.0 < self.lam < self.lam_t < 1.0 < self.mu_t < self.mu:
            raise ValueError(
                f"rates must satisfy 0 < lam < lam_t < 1 < mu_t < mu, got "
                f"lam={self.lam}, lam_t={self.lam_t}, mu_t={self.mu_t}, mu={self.mu}"
            )
        if self.c0 < max(self.mu, 1.0 / self.lam):
            raise ValueError(f"c0={self.c0} below max(mu, 1/lam)")
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        if self.n_reg < 1:
            raise ValueError("n_reg must be at least 1")


@dataclass(frozen=True)
class NormalizedMap:
    """A planar map conjugated so the saddle sits at 0 with diagonal dphi(0).

    `conjugacy` maps unrescaled eigenframe coordinates to the original ones;
    `scale` is the zoom factor delta_1, so original = conjugacy(scale * q).
    """

    base: PlanarMap
    params: HyperbolicityParams
    conjugacy: Affine
    scale: float

    @property
    def chart(self) -> Affine:
        """Full affine back-map: normalized coordinates -> original ones."""
        return Affine(self.conjugacy.linear * self.scale, self.conjugacy.offset)

    def to_original(self, q):
        return self.chart(q)

    def from_original(self, w):
        return self.chart.inverse()(w)

    @classmethod
    def trivial(cls, base: PlanarMap, params: HyperbolicityParams) -> "NormalizedMap":
        """Wrap a map that is already in normalized coordinates."""
        return cls(base=base, params=params, conjugacy=Affine.identity(), scale=1.0)


@dataclass(frozen=True)
class ManifoldGraph:
    """Converged local manifold graph in normalized coordinates."""

    which: str  # "unstable" | "stable"
    graph: GridFunction
    chart: Affine
    residual: float
    iterations: int

    def point(self, t: float) -> np.ndarray:
        """Normalized-coordinate point of the graph at parameter t."""
        ft = self.graph(t)
        return np.array([t, ft]) if self.which == "unstable" else np.array([ft, t])

    def polyline(self, num: int = 201, extent: float = 1.0) -> np.ndarray:
        """(num, 2) polyline in original coordinates."""
        ts = np.linspace(-extent, extent, num)
        fs = np.asarray(self.graph(ts))
        q = np.vstack([ts, fs]) if self.which == "unstable" else np.vstack([fs, ts])
        return self.chart(q).T


# ---------------------------------------------------------------------------
# normalization


def _eig2(j: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray]:
    """Real eigenpairs of a 2x2 matrix sorted by |eigenvalue| descending."""
    tr = j[0, 0] + j[1, 1]
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    disc = tr * tr - 4.0 * det
    scale = max(1.0, abs(tr), abs(det))
    if disc <= 1e-12 * scale * scale:
        raise NotHyperbolic(
            f"eigenvalues complex or defective (trace {tr:g}, det {det:g})"
        )
    s = np.sqrt(disc)
    l1, l2 = (tr + s) / 2.0, (tr - s) / 2.0
    if abs(l2) > abs(l1):
        l1, l2 = l2, l1

    def eigvec(lam: float) -> np.ndarray:
        a = np.array([j[0, 0] - lam, j[0, 1]])
        b = np.array([j[1, 0], j[1, 1] - lam])
        row = a if np.linalg.norm(a) >= np.linalg.norm(b) else b
        v = np.array([-row[1], row[0]])
        nrm = np.linalg.norm(v)
        if nrm == 0.0:
            raise NotHyperbolic("defective Jacobian: no eigenvector")
        v = v / nrm
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        return v

    return l1, l2, eigvec(l1), eigvec(l2)


_CENTRAL_STENCILS = {
    1: ((-1, 0, 1), (-0.5, 0.0, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 0, 1, 2), (-0.5, 1.0, 0.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}

_FD_STEP_BY_ORDER = {2: 1e-4, 3: 1e-3, 4: 1e-2}


def estimate_delta(nm: NormalizedMap, n_reg: int | None = None, grid: int = 21) -> float:
    """Max finite-difference partial derivative of orders 2..n_reg+1.

    Sampled on a grid x grid lattice of the closed unit sup-norm ball in
    normalized coordinates; this is the nonlinearity bound delta.
    """
    if n_reg is None:
        n_reg = nm.params.n_reg
    if n_reg < 1:
        raise ValueError("n_reg must be at least 1")
    top = min(n_reg + 1, max(_CENTRAL_STENCILS))
    axis = np.linspace(-1.0, 1.0, grid)
    gx, gy = np.meshgrid(axis, axis)
    centers = np.vstack([gx.ravel(), gy.ravel()])
    worst = 0.0
    for order in range(2, top + 1):
        h = _FD_STEP_BY_ORDER[order]
        for a1 in range(order + 1):
            a2 = order - a1
            off1, c1 = _CENTRAL_STENCILS.get(a1, ((0,), (1.0,)))
            off2, c2 = _CENTRAL_STENCILS.get(a2, ((0,), (1.0,)))
            acc = np.zeros((2, centers.shape[1]))
            for o1, w1 in zip(off1, c1):
                for o2, w2 in zip(off2, c2):
                    if w1 * w2 == 0.0:
                        continue
                    shifted = centers + np.array([[o1 * h], [o2 * h]])
                    acc += (w1 * w2) * nm.base.eval_batch(shifted)
            worst = max(worst, float(np.max(np.abs(acc))) / h**order)
    return worst


def normalize_fixed_point(
    map: PlanarMap,
    params: HyperbolicityParams | None = None,
    delta_target: float = DEFAULT_DELTA_TARGET,
    max_halvings: int = 40,
) -> NormalizedMap:
    """Conjugate and rescale a saddle so dphi(0) is diagonal and delta small.

    The zoom factor delta_1 is chosen so that the sampled second-derivative
    bound times delta_1 stays below delta_target; the achieved bound is
    recorded in params.delta.  Raises NotHyperbolic for complex, defective,
    or unit-modulus eigenvalues.
    """
    if delta_target <= 0:
        raise ValueError("delta_target must be positive")
    fixed = np.asarray(map.fixed_point, dtype=float)
    j = map.jacobian_at(fixed)
    l_big, l_small, v_big, v_small = _eig2(j)
    if abs(abs(l_big) - 1.0) < 1e-9 or abs(abs(l_small) - 1.0) < 1e-9:
        raise NotHyperbolic(f"eigenvalue of unit modulus ({l_big:g}, {l_small:g})")
    if not (abs(l_small) < 1.0 < abs(l_big)):
        raise NotHyperbolic(f"eigenvalues ({l_big:g}, {l_small:g}) are not a saddle")
    if params is None:
        params = HyperbolicityParams(lam=abs(l_small), mu=abs(l_big))
    else:
        if abs(params.lam - abs(l_small)) > 1e-6 or abs(params.mu - abs(l_big)) > 1e-6:
            raise ValueError(
                f"params rates (lam={params.lam:g}, mu={params.mu:g}) do not match "
                f"eigenvalue magnitudes ({abs(l_small):g}, {abs(l_big):g})"
            )
    conj = Affine(np.column_stack([v_big, v_small]), fixed)

    def normalized(scale: float) -> NormalizedMap:
        chart = Affine(conj.linear * scale, conj.offset)
        back = chart.inverse()

        def fwd(q):
            return back(map.forward(chart(q)))

        inv_fn = None
        if map.inverse is not None:
            def inv_fn(q):
                return back(map.inverse(chart(q)))

        jac_fn = None
        if map.jacobian is not None:
            vinv = np.linalg.inv(conj.linear)

            def jac_fn(q):
                return vinv @ map.jacobian(chart(q)) @ conj.linear

        base = PlanarMap(
            forward=fwd,
            inverse=inv_fn,
            jacobian=jac_fn,
            vectorized=map.vectorized,
        )
        return NormalizedMap(base=base, params=params, conjugacy=conj, scale=scale)

    # probe the second derivatives at unit zoom, then verify at the chosen zoom
    probe = normalized(1.0)
    m2 = estimate_delta(probe, n_reg=1, grid=11)
    scale = min(1.0, delta_target / m2) if m2 > delta_target else 1.0
    nm = normalized(scale)
    achieved = estimate_delta(nm, n_reg=params.n_reg)
    # 1e-5 relative slack absorbs the finite-difference roundoff floor
    for _ in range(max_halvings):
        if achieved <= delta_target * (1.0 + 1e-5):
            break
        scale *= 0.5
        nm = normalized(scale)
        achieved = estimate_delta(nm, n_reg=params.n_reg)
    else:
        raise DeltaTooLarge(
            f"could not reach delta_target={delta_target:g}; best {achieved:g}"
        )
    params.delta = achieved
    return nm


# ---------------------------------------------------------------------------
# the transforms


def _require_admissible(f: GridFunction, n_reg: int) -> None:
    if abs(f(0.0)) > 1e-9:
        raise ValueError(f"graph must vanish at 0, got {f(0.0):g}")
    c1 = f.seminorm(1)
    if c1 > 1.0 + 1e-8:
        warnings.warn(
            f"graph C^1 seminorm {c1:g} exceeds the admissibility gate 1",
            stacklevel=3,
        )
    top = max(f.seminorm(n_reg), f.lipschitz_top(n_reg))
    if top > 1.0 + 1e-8:
        warnings.warn(
            f"graph C^{{{n_reg},1}} seminorm {top:g} exceeds the admissibility gate 1",
            stacklevel=3,
        )


def _monotone_cover(sampled: np.ndarray) -> None:
    d = np.diff(sampled)
    if not (np.all(d > 0.0) or np.all(d < 0.0)):
        raise DeltaTooLarge("graph image is not monotone over the ball; rescale further")
    lo, hi = min(sampled[0], sampled[-1]), max(sampled[0], sampled[-1])
    if lo > -1.0 or hi < 1.0:
        raise DeltaTooLarge(
            f"graph image [{lo:g}, {hi:g}] does not cover [-1, 1]; rescale further"
        )


def _solve_on_grid(g: Callable[[float], float], sampled: np.ndarray, x: np.ndarray, y: float) -> float:
    """Solve g(x)=y given samples of monotone g at the nodes x."""
    s = sampled if sampled[-1] > sampled[0] else sampled[::-1]
    xs = x if sampled[-1] > sampled[0] else x[::-1]
    i = int(np.clip(np.searchsorted(s, y) - 1, 0, len(s) - 2))
    lo, hi = sorted((xs[i], xs[i + 1]))
    return invert_monotone(g, y, (lo, hi), tol=1e-12, screen_points=0)


def graph_transform_u(nm: NormalizedMap, f: GridFunction) -> GridFunction:
    """One unstable graph-transform step.

    The image of {x2 = f(x1)} under the map, restricted to |x1| <= 1, is
    again a graph: for each output node y the solver inverts
    G1(x) = phi_1(x, f(x)) and evaluates G2 = phi_2(x, f(x)) there.
    """
    _require_admissible(f, nm.params.n_reg)
    x = f.nodes
    pts = np.vstack([x, f.values])
    img = nm.base.eval_batch(pts)
    _monotone_cover(img[0])

    def g1(t: float) -> float:
        return float(nm.base.forward(np.array([t, f(t)]))[0])

    out = np.empty_like(f.values)
    for k, y in enumerate(x):
        xs = _solve_on_grid(g1, img[0], x, float(y))
        out[k] = nm.base.forward(np.array([xs, f(xs)]))[1]
    return GridFunction(out)


def graph_transform_s(nm: NormalizedMap, f: GridFunction) -> GridFunction:
    """One stable graph-transform step (the unstable transform of the inverse).

    Solved implicitly through the forward map: the transformed graph value
    u = (Phi_s f)(t) satisfies phi_1(u, t) = f(phi_2(u, t)), which avoids a
    nested 2-D Newton inversion per evaluation.
    """
    _require_admissible(f, nm.params.n_reg)
    t_nodes = f.nodes
    a0 = nm.base.jacobian_at(np.zeros(2))
    a1, a2 = float(a0[0, 0]), float(a0[1, 1])

    def residual(u: float, t: float) -> float:
        z = nm.base.forward(np.array([u, t]))
        return float(z[0] - f(float(z[1])))

    h = 1e-7
    out = np.empty_like(f.values)
    for k, t in enumerate(t_nodes):
        t = float(t)
        u = float(f(a2 * t)) / a1
        ok = False
        for _ in range(60):
            r = residual(u, t)
            if abs(r) <= 1e-12:
                ok = True
                break
            slope = (residual(u + h, t) - residual(u - h, t)) / (2.0 * h)
            if slope == 0.0 or not np.isfinite(slope):
                break
            u -= r / slope
            if abs(u) > 2.0:
                break
        if not ok and abs(residual(u, t)) > 1e-10:
            raise DeltaTooLarge(
                f"stable transform failed to solve the graph condition at t={t:g}"
            )
        out[k] = u
    return GridFunction(out)


def _transform(nm: NormalizedMap, f: GridFunction, which: str) -> GridFunction:
    if which == "unstable":
        return graph_transform_u(nm, f)
    if which == "stable":
        return graph_transform_s(nm, f)
    raise ValueError(f"which must be 'unstable' or 'stable', got {which!r}")


def invariance_residual(nm: NormalizedMap, f: GridFunction, which: str) -> float:
    """sup over nodes, restricted to the unit ball, of the graph defect."""
    x = f.nodes
    if which == "unstable":
        pts = np.vstack([x, f.values])
        img = nm.base.eval_batch(pts)
        keep = np.abs(img[0]) <= 1.0
        if not np.any(keep):
            return np.inf
        return float(np.max(np.abs(np.asarray(f(img[0][keep])) - img[1][keep])))
    pts = np.vstack([f.values, x])
    img = nm.base.eval_batch(pts)
    keep = np.abs(img[1]) <= 1.0
    if not np.any(keep):
        return np.inf
    return float(np.max(np.abs(np.asarray(f(img[1][keep])) - img[0][keep])))


def compute_manifold(
    nm: NormalizedMap,
    which: str,
    tol: float = 1e-12,
    max_iter: int = 100,
    n: int = DEFAULT_GRID_N,
) -> ManifoldGraph:
    """Iterate the graph transform from F = 0 to its fixed point.

    Stops when the C^1 grid seminorm of successive differences drops below
    tol; records the invariance residual of the converged graph.
    """
    f = GridFunction.zeros(n)
    for it in range(1, max_iter + 1):
        f_new = _transform(nm, f, which)
        dist = f_new.c1_distance(f)
        f = f_new
        if dist <= tol:
            res = invariance_residual(nm, f, which)
            return ManifoldGraph(
                which=which, graph=f, chart=nm.chart, residual=res, iterations=it
            )
    raise NoConvergence(f"graph transform did not converge in {max_iter} iterations")


def contraction_ratio(nm: NormalizedMap, f: GridFunction, g: GridFunction) -> float:
    """d_N(Phi f, Phi g) / d_N(f, g) in the C^N grid seminorm metric."""
    n_reg = nm.params.n_reg
    d0 = GridFunction(f.values - g.values).seminorm(n_reg)
    if d0 == 0.0:
        raise UndefinedRatio("input graphs coincide")
    tf = graph_transform_u(nm, f)
    tg = graph_transform_u(nm, g)
    d1 = GridFunction(tf.values - tg.values).seminorm(n_reg)
    return d1 / d0


def distance_to_manifold(w: np.ndarray, m: ManifoldGraph) -> float:
    """Graph distance |w2 - F_u(w1)| (unstable) or |w1 - F_s(w2)| (stable)."""
    w = np.asarray(w, dtype=float)
    if np.max(np.abs(w)) > 1.0 + 1e-12:
        raise OutOfDomain(f"point {w} outside the closed unit sup-norm ball")
    if m.which == "unstable":
        return abs(float(w[1]) - float(m.graph(float(w[0]))))
    return abs(float(w[0]) - float(m.graph(float(w[1]))))


# ---------------------------------------------------------------------------
# trajectory-based characterizations


@dataclass(frozen=True)
class MembershipReport:
    """Backward-survival certificate for membership in the unstable manifold."""

    steps_inside: int
    requested: int
    bound: float

    @property
    def certified(self) -> bool:
        return self.steps_inside == self.requested


def membership_test(
    nm: NormalizedMap, w: np.ndarray, n: int, sigma: float = 1.0
) -> MembershipReport:
    """Iterate the inverse map up to n times inside the sigma-ball.

    Returns the largest l with all iterates through l inside, and the implied
    bound lam_t^l * 2 * sigma on the graph distance to the unstable manifold.
    """
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"sigma must lie in (0, 1], got {sigma}")
    z = np.asarray(w, dtype=float)
    if np.max(np.abs(z)) > sigma:
        raise OutOfDomain(f"point {z} outside the sigma-ball, nothing to certify")
    a_inv = np.linalg.inv(nm.base.jacobian_at(np.zeros(2)))
    steps = 0
    for ell in range(1, n + 1):
        z = nm.base.invert(z, x0=a_inv @ z)
        if np.max(np.abs(z)) > sigma:
            break
        steps = ell
    return MembershipReport(
        steps_inside=steps, requested=n, bound=float(nm.params.lam_t**steps * 2.0 * sigma)
    )


@dataclass(frozen=True)
class ConvexityReport:
    """Two-sided survival bound |w| <= (lam_t^n + mu_t^-r) * 8 * sigma."""

    bound: float
    backward_exit: int | None
    forward_exit: int | None
    within: bool | None


def convexity_bound(
    nm: NormalizedMap, w: np.ndarray, n: int, r: int, sigma: float = 1.0
) -> ConvexityReport:
    """Verify the two-sided trajectory stays in the sigma-ball, bound |w|.

    If some iterate escapes, the exit index is reported instead of a verdict.
    """
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"sigma must lie in (0, 1], got {sigma}")
    w = np.asarray(w, dtype=float)
    a = nm.base.jacobian_at(np.zeros(2))
    a_inv = np.linalg.inv(a)
    backward_exit = forward_exit = None
    z = w.copy()
    for ell in range(1, n + 1):
        z = nm.base.invert(z, x0=a_inv @ z)
        if np.max(np.abs(z)) > sigma:
            backward_exit = ell
            break
    z = w.copy()
    for ell in range(1, r + 1):
        z = np.asarray(nm.base.forward(z), dtype=float)
        if np.max(np.abs(z)) > sigma:
            forward_exit = ell
            break
    bound = float((nm.params.lam_t**n + nm.params.mu_t ** (-r)) * 8.0 * sigma)
    ok = None
    if backward_exit is None and forward_exit is None and np.max(np.abs(w)) <= sigma:
        ok = bool(np.max(np.abs(w)) <= bound)
    return ConvexityReport(
        bound=bound, backward_exit=backward_exit, forward_exit=forward_exit, within=ok
    )


# ---------------------------------------------------------------------------
# periodic sequences


def sequence_fixed_point(
    maps: Sequence[NormalizedMap],
    which: str,
    tol: float = 1e-12,
    max_iter: int = 100,
    n: int = DEFAULT_GRID_N,
) -> list[ManifoldGraph]:
    """Simultaneous graph fixed point for a period-p sequence of maps.

    Entry m of the result is the graph at slot m; unstable graphs satisfy
    map_m(W_m) restricted to the ball = W_{m+1}, stable graphs the analogous
    pullback relation, indices mod p.
    """
    p = len(maps)
    if p < 1:
        raise ValueError("need at least one map")
    fs = [GridFunction.zeros(n) for _ in range(p)]
    for it in range(1, max_iter + 1):
        if which == "unstable":
            new = [graph_transform_u(maps[(m - 1) % p], fs[(m - 1) % p]) for m in range(p)]
        elif which == "stable":
            new = [graph_transform_s(maps[m], fs[(m + 1) % p]) for m in range(p)]
        else:
            raise ValueError(f"which must be 'unstable' or 'stable', got {which!r}")
        dist = max(new[m].c1_distance(fs[m]) for m in range(p))
        fs = new
        if dist <= tol:
            break
    else:
        raise NoConvergence(f"sequence transform did not converge in {max_iter} iterations")
    out = []
    for m in range(p):
        if which == "unstable":
            res = _sequence_defect_u(maps[m], fs[m], fs[(m + 1) % p])
        else:
            res = _sequence_defect_s(maps[m], fs[m], fs[(m + 1) % p])
        out.append(
            ManifoldGraph(
                which=which,
                graph=fs[m],
                chart=maps[m].chart,
                residual=res,
                iterations=it,
            )
        )
    return out


def _sequence_defect_u(nm: NormalizedMap, f_m: GridFunction, f_next: GridFunction) -> float:
    pts = np.vstack([f_m.nodes, f_m.values])
    img = nm.base.eval_batch(pts)
    keep = np.abs(img[0]) <= 1.0
    if not np.any(keep):
        return np.inf
    return float(np.max(np.abs(np.asarray(f_next(img[0][keep])) - img[1][keep])))


def _sequence_defect_s(nm: NormalizedMap, f_m: GridFunction, f_next: GridFunction) -> float:
    pts = np.vstack([f_m.values, f_m.nodes])
    img = nm.base.eval_batch(pts)
    keep = np.abs(img[1]) <= 1.0
    if not np.any(keep):
        return np.inf
    return float(np.max(np.abs(np.asarray(f_next(img[1][keep])) - img[0][keep])))
