"""Hyperbolic machinery for concrete maps along periodic orbits.

Monodromy eigendirections give the stable/unstable splitting on a periodic
orbit; truncated forward/backward sums build adapted norms in which one step
already contracts by the chosen intermediate rate; affine adapted charts send
the splitting to the coordinate axes isometrically.  Conjugating the map
through zoomed adapted charts produces a periodic sequence of normalized
maps whose graph fixed points, pulled back, are the local stable/unstable
manifolds.  Cone-field certificates and empirical direction probes cover
invariant sets without periodic structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DeltaTooLarge, NotHyperbolic, NumericsError, RateTooTight
from .graphtransform import (
    Affine,
    HyperbolicityParams,
    ManifoldGraph,
    NormalizedMap,
    PlanarMap,
    estimate_delta,
    sequence_fixed_point,
)

DEFAULT_DELTA_TARGET = 0.05


# ---------------------------------------------------------------------------
# orbits and directions


@dataclass(frozen=True)
class OrbitData:
    """A closed orbit with per-point differentials."""

    points: tuple[np.ndarray, ...]
    jacobians: tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(
            self, "points", tuple(np.asarray(p, dtype=float) for p in self.points)
        )
        object.__setattr__(
            self, "jacobians", tuple(np.asarray(j, dtype=float) for j in self.jacobians)
        )
        if len(self.points) != len(self.jacobians):
            raise ValueError("points and jacobians must have equal length")

    @property
    def period(self) -> int:
        return len(self.points)

    @classmethod
    def from_map(
        cls, map: PlanarMap, x0: np.ndarray, period: int, closure_tol: float = 1e-9
    ) -> "OrbitData":
        """Iterate x0 for one period, validating closure."""
        pts = [np.asarray(x0, dtype=float)]
        for _ in range(period - 1):
            pts.append(np.asarray(map.forward(pts[-1]), dtype=float))
        back = np.asarray(map.forward(pts[-1]), dtype=float)
        defect = float(np.max(np.abs(map.difference(back, pts[0]))))
        if defect > closure_tol:
            raise ValueError(f"orbit does not close: defect {defect:g} > {closure_tol:g}")
        return cls(points=tuple(pts), jacobians=tuple(map.jacobian_at(p) for p in pts))


def monodromy(orbit: OrbitData, base: int = 0) -> np.ndarray:
    """Product of the differentials around the orbit, starting at `base`."""
    p = orbit.period
    m = np.eye(2)
    for i in range(p):
        m = orbit.jacobians[(base + i) % p] @ m
    return m


def stable_unstable_directions(
    map: PlanarMap, orbit: OrbitData
) -> tuple[np.ndarray, np.ndarray]:
    """Unit unstable/stable directions at each orbit point, shape (p, 2).

    Eigendirections of the monodromy at the base point, propagated around
    the orbit by the differentials (which preserves the invariant splitting
    exactly).  Raises NotHyperbolic when the monodromy eigenvalues are not
    off the unit circle.
    """
    m = monodromy(orbit, 0)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    disc = tr * tr - 4.0 * det
    if disc <= 0.0:
        raise NotHyperbolic(f"monodromy eigenvalues complex (trace {tr:g}, det {det:g})")
    s = np.sqrt(disc)
    eig_big, eig_small = (tr + s) / 2.0, (tr - s) / 2.0
    if abs(eig_small) > abs(eig_big):
        eig_big, eig_small = eig_small, eig_big
    if not abs(eig_small) < 1.0 - 1e-12 < 1.0 + 1e-12 < abs(eig_big):
        raise NotHyperbolic(
            f"monodromy eigenvalues ({eig_big:g}, {eig_small:g}) touch the unit circle"
        )

    def kernel_vec(mat: np.ndarray, lam: float) -> np.ndarray:
        a = np.array([mat[0, 0] - lam, mat[0, 1]])
        b = np.array([mat[1, 0], mat[1, 1] - lam])
        row = a if np.linalg.norm(a) >= np.linalg.norm(b) else b
        v = np.array([-row[1], row[0]])
        return v / np.linalg.norm(v)

    e_u = [kernel_vec(m, eig_big)]
    e_s = [kernel_vec(m, eig_small)]
    for i in range(orbit.period - 1):
        j = orbit.jacobians[i]
        e_u.append((j @ e_u[-1]) / np.linalg.norm(j @ e_u[-1]))
        e_s.append((j @ e_s[-1]) / np.linalg.norm(j @ e_s[-1]))
    return np.array(e_u), np.array(e_s)


def _stretches(orbit: OrbitData, dirs: np.ndarray) -> np.ndarray:
    """Signed factor by which each differential maps dirs[i] to dirs[i+1]."""
    p = orbit.period
    out = np.empty(p)
    for i in range(p):
        image = orbit.jacobians[i] @ dirs[i]
        target = dirs[(i + 1) % p]
        out[i] = float(image @ target)  # dirs are unit, image is parallel to target
    return out


# ---------------------------------------------------------------------------
# adapted metrics and charts


@dataclass(frozen=True)
class AdaptedFrame:
    """Per-point splitting, adapted quadratic norms, and affine charts.

    norm_u/norm_s hold the squared adapted norms of the unit Euclidean
    direction vectors; the chart's linear part sends e_u, e_s to the axes
    scaled so that unit adapted norm becomes unit Euclidean norm.
    """

    e_u: np.ndarray  # (p, 2)
    e_s: np.ndarray
    norm_u: np.ndarray  # (p,)
    norm_s: np.ndarray
    centers: tuple[np.ndarray, ...]
    m_used: int

    @property
    def period(self) -> int:
        return len(self.centers)

    def chart_linear(self, i: int) -> np.ndarray:
        basis = np.column_stack([self.e_u[i], self.e_s[i]])
        scaling = np.diag([np.sqrt(self.norm_u[i]), np.sqrt(self.norm_s[i])])
        return scaling @ np.linalg.inv(basis)

    def to_chart(self, map: PlanarMap, i: int, w: np.ndarray) -> np.ndarray:
        return self.chart_linear(i) @ np.asarray(
            map.difference(np.asarray(w, dtype=float), self.centers[i]), dtype=float
        )

    def from_chart(self, i: int, q: np.ndarray) -> np.ndarray:
        return self.centers[i] + np.linalg.inv(self.chart_linear(i)) @ np.asarray(
            q, dtype=float
        )

    def adapted_norm_u(self, i: int, v: np.ndarray) -> float:
        """|v|_u for v parallel to e_u(i) (1-D unstable subspace)."""
        return abs(float(v @ self.e_u[i])) * np.sqrt(self.norm_u[i])

    def adapted_norm_s(self, i: int, v: np.ndarray) -> float:
        return abs(float(v @ self.e_s[i])) * np.sqrt(self.norm_s[i])


def adapted_metric(
    map: PlanarMap, orbit: OrbitData, lambda_t: float, m_cap: int = 10_000
) -> AdaptedFrame:
    """Adapted norms: one map step contracts stably (expands unstably) by lambda_t.

    The squared stable norm of a unit stable vector is the truncated sum of
    lambda_t^{-2n} times the squared forward stretches over n steps (and the
    mirror backward sum for the unstable norm); m grows until the one-step
    inequalities hold at every orbit point.
    """
    if not 0.0 < lambda_t < 1.0:
        raise ValueError(f"lambda_t must lie in (0, 1), got {lambda_t}")
    e_u, e_s = stable_unstable_directions(map, orbit)
    p = orbit.period
    c_u = _stretches(orbit, e_u)  # |c_u[i]| > 1 on average around the orbit
    c_s = _stretches(orbit, e_s)

    def norms_for(m: int) -> tuple[np.ndarray, np.ndarray]:
        norm_s = np.empty(p)
        norm_u = np.empty(p)
        for i in range(p):
            acc_s = 1.0
            prod = 1.0
            for n in range(1, m):
                prod *= c_s[(i + n - 1) % p]
                acc_s += lambda_t ** (-2 * n) * prod * prod
            norm_s[i] = acc_s
            acc_u = 1.0
            prod = 1.0
            for n in range(1, m):
                prod /= c_u[(i - n) % p]
                acc_u += lambda_t ** (-2 * n) * prod * prod
            norm_u[i] = acc_u
        return norm_u, norm_s

    m = 1
    while m <= m_cap:
        norm_u, norm_s = norms_for(m)
        ok = True
        for i in range(p):
            lhs_s = c_s[i] ** 2 * norm_s[(i + 1) % p]
            lhs_u = norm_u[(i - 1) % p] / c_u[(i - 1) % p] ** 2
            if (
                lhs_s > lambda_t**2 * norm_s[i] * (1.0 + 1e-12)
                or lhs_u > lambda_t**2 * norm_u[i] * (1.0 + 1e-12)
            ):
                ok = False
                break
        if ok:
            return AdaptedFrame(
                e_u=e_u,
                e_s=e_s,
                norm_u=norm_u,
                norm_s=norm_s,
                centers=orbit.points,
                m_used=m,
            )
        m = m + 1 if m < 8 else m * 2
    raise RateTooTight(f"no adapted norm with m <= {m_cap}; lambda_t too close to the rate")


# ---------------------------------------------------------------------------
# local manifolds along a periodic orbit


@dataclass(frozen=True)
class LocalManifolds:
    """Stable/unstable local manifolds at every point of a periodic orbit."""

    frame: AdaptedFrame
    scale: float
    params: HyperbolicityParams
    unstable: tuple[ManifoldGraph, ...]
    stable: tuple[ManifoldGraph, ...]
    maps: tuple[NormalizedMap, ...]

    @property
    def period(self) -> int:
        return len(self.unstable)


def _chart_maps(
    map: PlanarMap, orbit: OrbitData, frame: AdaptedFrame, scale: float
) -> list[PlanarMap]:
    """The map conjugated through consecutive zoomed adapted charts."""
    p = orbit.period
    out = []
    for i in range(p):
        li = frame.chart_linear(i)
        li_inv = np.linalg.inv(li)
        ln = frame.chart_linear((i + 1) % p)
        ln_inv = np.linalg.inv(ln)
        x_i = orbit.points[i]
        x_n = orbit.points[(i + 1) % p]

        def fwd(q, li_inv=li_inv, ln=ln, x_i=x_i, x_n=x_n):
            amb = x_i + li_inv @ (scale * np.asarray(q, dtype=float))
            img = np.asarray(map.forward(amb), dtype=float)
            return ln @ np.asarray(map.difference(img, x_n), dtype=float) / scale

        def jac(q, li=li, li_inv=li_inv, ln=ln, x_i=x_i):
            amb = x_i + li_inv @ (scale * np.asarray(q, dtype=float))
            return ln @ map.jacobian_at(amb) @ li_inv

        inv_fn = None
        if map.inverse is not None:

            def inv_fn(q, li=li, ln_inv=ln_inv, x_i=x_i, x_n=x_n):
                amb = x_n + ln_inv @ (scale * np.asarray(q, dtype=float))
                pre = np.asarray(map.inverse(amb), dtype=float)
                return li @ np.asarray(map.difference(pre, x_i), dtype=float) / scale

        out.append(PlanarMap(forward=fwd, inverse=inv_fn, jacobian=jac, vectorized=False))
    return out


def local_manifolds_periodic(
    map: PlanarMap,
    orbit: OrbitData,
    params: HyperbolicityParams | None = None,
    lambda_t: float | None = None,
    delta_target: float = DEFAULT_DELTA_TARGET,
    tol: float = 1e-10,
    max_iter: int = 100,
    n: int = 33,
) -> LocalManifolds:
    """Local stable/unstable manifolds at every orbit point.

    Builds the adapted frame, zooms the chart-conjugated maps until their
    nonlinearity is below delta_target, runs the periodic-sequence graph
    fixed point both ways, and returns graphs whose charts map back to the
    original coordinates.  The default tolerance sits above the noise floor
    of the C^1 stopping metric for maps evaluated at machine precision
    (spectral differentiation amplifies value roundoff by about n^2).
    """
    mono = monodromy(orbit)
    eigs = np.linalg.eigvals(mono)
    lam_step = float(np.min(np.abs(eigs))) ** (1.0 / orbit.period)
    if lambda_t is None:
        lambda_t = params.lam_t if params is not None else float(np.sqrt(lam_step))
    frame = adapted_metric(map, orbit, lambda_t)

    def nonlinearity(s: float) -> float | None:
        worst = 0.0
        for cm in _chart_maps(map, orbit, frame, s):
            probe = NormalizedMap.trivial(cm, HyperbolicityParams(lam=0.5, mu=2.0, n_reg=1))
            try:
                worst = max(worst, estimate_delta(probe, n_reg=1, grid=11))
            except NumericsError:
                # the unit chart ball pokes outside the map's domain
                return None
        return worst

    scale = 1.0
    m2 = None
    for _ in range(60):
        m2 = nonlinearity(scale)
        if m2 is None:
            scale /= 4.0
        elif m2 > delta_target * (1.0 + 1e-5):
            scale = min(scale * delta_target / m2, scale / 2.0)
        else:
            break
    else:
        raise DeltaTooLarge("could not zoom the chart maps below delta_target")
    # grow back toward delta_target: an overly small zoom shrinks the chart
    # coverage and amplifies roundoff in the normalized coordinates
    for _ in range(8):
        if m2 > delta_target / 5.0 or scale >= 1.0:
            break
        candidate = min(1.0, scale * min(4.0, delta_target / (m2 * 1.3)))
        if candidate <= scale * 1.05:
            break
        m2_cand = nonlinearity(candidate)
        if m2_cand is None or m2_cand > delta_target * (1.0 + 1e-5):
            break
        scale, m2 = candidate, m2_cand

    chart_maps = _chart_maps(map, orbit, frame, scale)
    diag = [m.jacobian_at(np.zeros(2)) for m in chart_maps]

    if params is None:
        lam_seq = max(abs(d[1, 1]) for d in diag)
        mu_seq = min(abs(d[0, 0]) for d in diag)
        if not lam_seq < 1.0 < mu_seq:
            raise NotHyperbolic(
                f"chart-conjugated rates ({mu_seq:g}, {lam_seq:g}) are not hyperbolic"
            )
        params = HyperbolicityParams(lam=lam_seq, mu=mu_seq)
    params.delta = m2

    normalized = [
        NormalizedMap(
            base=cm,
            params=params,
            conjugacy=Affine(np.linalg.inv(frame.chart_linear(i)), orbit.points[i]),
            scale=scale,
        )
        for i, cm in enumerate(_chart_maps(map, orbit, frame, scale))
    ]
    graphs_u = sequence_fixed_point(normalized, "unstable", tol=tol, max_iter=max_iter, n=n)
    graphs_s = sequence_fixed_point(normalized, "stable", tol=tol, max_iter=max_iter, n=n)
    return LocalManifolds(
        frame=frame,
        scale=scale,
        params=params,
        unstable=tuple(graphs_u),
        stable=tuple(graphs_s),
        maps=tuple(normalized),
    )


# ---------------------------------------------------------------------------
# global manifolds


@dataclass(frozen=True)
class GlobalManifold:
    points: np.ndarray  # (m, 2) ambient polyline
    truncated: bool


def polyline_distance(q: np.ndarray, polyline: np.ndarray) -> float:
    """Distance from a point to a polyline (segments, not just vertices)."""
    q = np.asarray(q, dtype=float)
    pl = np.asarray(polyline, dtype=float)
    a, b = pl[:-1], pl[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0.0] = 1.0
    t = np.clip(np.einsum("ij,ij->i", q - a, ab) / denom, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return float(np.min(np.linalg.norm(proj - q, axis=1)))


def global_manifold(
    map: PlanarMap,
    local: LocalManifolds,
    index: int,
    k: int,
    refine_tol: float = 1e-2,
    max_points: int = 20_000,
) -> GlobalManifold:
    """Push the local unstable manifold at the orbit point k steps forward.

    Seeds from the local graph at the orbit point k steps upstream, pushes
    sample points through the map, and bisects parameter intervals until
    adjacent image points are within refine_tol.  Points whose forward
    orbit leaves the map's domain truncate the polyline (reported, not
    fatal).
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    p = local.period
    base = (index - k) % p
    mg = local.unstable[base]

    def image_of(t: float) -> np.ndarray | None:
        q = mg.point(float(t))
        w = mg.chart(q)
        try:
            for _ in range(k):
                w = np.asarray(map.forward(w), dtype=float)
        except NumericsError:
            return None
        return w

    ts = list(np.linspace(-1.0, 1.0, 65))
    pts = [image_of(t) for t in ts]
    truncated = any(q is None for q in pts)

    def gap(a, b) -> float:
        return float(np.max(np.abs(np.asarray(map.difference(a, b), dtype=float))))

    i = 0
    while i < len(ts) - 1 and len(ts) < max_points:
        a, b = pts[i], pts[i + 1]
        if a is None or b is None:
            i += 1
            continue
        if gap(a, b) > refine_tol and ts[i + 1] - ts[i] > 1e-12:
            mid = 0.5 * (ts[i] + ts[i + 1])
            q = image_of(mid)
            if q is None:
                truncated = True
                i += 1
                continue
            ts.insert(i + 1, mid)
            pts.insert(i + 1, q)
        else:
            i += 1
    keep = [q for q in pts if q is not None]
    return GlobalManifold(points=np.array(keep), truncated=truncated)


# ---------------------------------------------------------------------------
# cone certificates


@dataclass(frozen=True)
class QuadrantCone:
    """Sign cone {v : sign * v0 * v1 >= 0} in a two-dimensional tangent space."""

    sign: float = 1.0

    def contains(self, v: np.ndarray, tol: float = 1e-12) -> bool:
        return self.sign * v[0] * v[1] >= -tol * float(v @ v)

    def directions(self, n: int = 8) -> np.ndarray:
        """Boundary and interior unit vectors of the cone, antipodal pairs."""
        half = max(2, (n + 1) // 2)
        angles = np.linspace(0.0, np.pi / 2.0, half)
        if self.sign < 0:
            angles = -angles
        one = np.column_stack([np.cos(angles), np.sin(angles)])
        return np.vstack([one, -one])[:n]


@dataclass(frozen=True)
class ConeCertificate:
    sample_points: tuple[np.ndarray, ...]
    lambda_measured: float
    invariance_ok: np.ndarray  # (n_samples,) bool

    @property
    def valid(self) -> bool:
        return bool(np.all(self.invariance_ok)) and self.lambda_measured > 1.0


def cone_certify(
    map: PlanarMap,
    samples: Sequence[np.ndarray],
    cone_u: QuadrantCone,
    cone_s: QuadrantCone,
    norm: Callable[[np.ndarray, np.ndarray], float] | None = None,
    n_dirs: int = 8,
) -> ConeCertificate:
    """Check one-step cone invariance and norm expansion over samples.

    For each sample, every test vector of the unstable cone must map into
    the unstable cone under the differential and grow in the supplied norm;
    stable-cone vectors must do the same under the inverse differential.
    Failures are recorded per sample, never raised.
    """
    if norm is None:
        norm = lambda w, v: float(np.linalg.norm(v))
    flags = np.ones(len(samples), dtype=bool)
    lam_min = np.inf
    for idx, w in enumerate(samples):
        w = np.asarray(w, dtype=float)
        try:
            w_next = np.asarray(map.forward(w), dtype=float)
            j = map.jacobian_at(w)
            w_prev = map.invert(w)
            j_prev = map.jacobian_at(w_prev)
            j_prev_inv = np.linalg.inv(j_prev)
        except NumericsError:
            flags[idx] = False
            continue
        for v in cone_u.directions(n_dirs):
            image = j @ v
            if not cone_u.contains(image):
                flags[idx] = False
            lam_min = min(lam_min, norm(w_next, image) / norm(w, v))
        for v in cone_s.directions(n_dirs):
            image = j_prev_inv @ v
            if not cone_s.contains(image):
                flags[idx] = False
            lam_min = min(lam_min, norm(w_prev, image) / norm(w, v))
    return ConeCertificate(
        sample_points=tuple(np.asarray(w, dtype=float) for w in samples),
        lambda_measured=float(lam_min),
        invariance_ok=flags,
    )


# ---------------------------------------------------------------------------
# empirical directions and continuity


def empirical_directions(
    map: PlanarMap, w: np.ndarray, n_steps: int = 12
) -> tuple[np.ndarray, np.ndarray]:
    """Finite-horizon stable/unstable directions at a non-periodic point.

    The unstable direction is the image of a generic expanding vector
    pushed forward n_steps from the backward iterate; the stable direction
    mirrors this under the inverse map.
    """
    w = np.asarray(w, dtype=float)
    back = [w]
    for _ in range(n_steps):
        back.append(np.asarray(map.invert(back[-1]), dtype=float))
    v = np.array([1.0, 1.0]) / np.sqrt(2.0)
    for z in reversed(back[1:]):
        v = map.jacobian_at(z) @ v
        v = v / np.linalg.norm(v)
    e_u = v if v[np.argmax(np.abs(v))] >= 0 else -v

    fwd = [w]
    for _ in range(n_steps):
        fwd.append(np.asarray(map.forward(fwd[-1]), dtype=float))
    v = np.array([1.0, -1.0]) / np.sqrt(2.0)
    for z in reversed(fwd[:-1]):
        v = np.linalg.solve(map.jacobian_at(z), v)
        v = v / np.linalg.norm(v)
    e_s = v if v[np.argmax(np.abs(v))] >= 0 else -v
    return e_u, e_s


def continuity_probe(
    map: PlanarMap,
    set_samples: Sequence[np.ndarray],
    pair_budget: int = 100,
    n_steps: int = 12,
) -> np.ndarray:
    """(distance, stable-direction angle gap) rows for nearest-neighbor pairs.

    Diagnostic only: no pass/fail.  Directions come from finite-horizon
    pushes, distances use the map's phase difference.
    """
    samples = [np.asarray(w, dtype=float) for w in set_samples]
    if len(samples) < 2:
        raise ValueError("need at least two samples")
    dirs = []
    kept = []
    for w in samples:
        try:
            dirs.append(empirical_directions(map, w, n_steps)[1])
            kept.append(w)
        except NumericsError:
            continue
    rows = []
    for i, w in enumerate(kept):
        best_j, best_d = -1, np.inf
        for j, z in enumerate(kept):
            if j == i:
                continue
            d = float(np.linalg.norm(np.asarray(map.difference(w, z), dtype=float)))
            if d < best_d:
                best_d, best_j = d, j
        if best_j >= 0:
            dot = abs(float(dirs[i] @ dirs[best_j]))
            rows.append((best_d, float(np.arccos(np.clip(dot, 0.0, 1.0)))))
        if len(rows) >= pair_budget:
            break
    return np.array(rows)
