"""Shared numerical kernels.

Spectral grid functions on Chebyshev-Gauss-Lobatto nodes with barycentric
interpolation and differentiation (Trefethen, Spectral Methods in MATLAB),
safeguarded monotone inversion, fixed-step RK4 integration, and central
finite-difference Jacobians.  Everything here is pure and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import BlowUp, NoRoot, NotMonotone, OutOfDomain

#: barycentric extrapolation is permitted this far beyond the sample interval
EXTRAPOLATION_MARGIN = 1.25


def cheb_nodes(n: int) -> np.ndarray:
    """n Chebyshev-Gauss-Lobatto points cos(k*pi/(n-1)) sorted ascending."""
    if n < 2:
        raise ValueError(f"need at least 2 nodes, got n={n}")
    k = np.arange(n)
    return np.cos(np.pi * k[::-1] / (n - 1))


@lru_cache(maxsize=64)
def _grid_data(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes (ascending), barycentric weights, differentiation matrix."""
    x = cheb_nodes(n)
    w = np.ones(n)
    w[1::2] = -1.0
    w[0] *= 0.5
    w[-1] *= 0.5
    # negative-sum-trick differentiation matrix for the barycentric weights
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    d = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    x.setflags(write=False)
    w.setflags(write=False)
    d.setflags(write=False)
    return x, w, d


@dataclass(frozen=True)
class GridFunction:
    """A scalar function on [-1,1] sampled at Chebyshev-Gauss-Lobatto nodes."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("values must be a 1-D array with at least 2 samples")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def nodes(self) -> np.ndarray:
        return _grid_data(self.n)[0]

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray], n: int) -> "GridFunction":
        x = cheb_nodes(n)
        return cls(np.asarray([float(fn(xi)) for xi in x]))

    @classmethod
    def zeros(cls, n: int) -> "GridFunction":
        return cls(np.zeros(n))

    def __call__(self, x):
        return interp_eval(self, x)

    def derivative(self, k: int = 1) -> "GridFunction":
        return derivative(self, k)

    def seminorm(self, k: int) -> float:
        """max over j=1..k of the sup of the j-th spectral derivative at nodes."""
        _, _, d = _grid_data(self.n)
        v = self.values
        out = 0.0
        for _ in range(k):
            v = d @ v
            out = max(out, float(np.max(np.abs(v))))
        return out

    def lipschitz_top(self, k: int) -> float:
        """Lipschitz quotient of the k-th derivative over adjacent node pairs."""
        x, _, d = _grid_data(self.n)
        v = self.values
        for _ in range(k):
            v = d @ v
        return float(np.max(np.abs(np.diff(v) / np.diff(x))))

    def c1_distance(self, other: "GridFunction") -> float:
        """max(sup|f-g|, sup|f'-g'|) over nodes; the stopping metric."""
        _, _, d = _grid_data(self.n)
        dv = self.values - other.values
        return max(float(np.max(np.abs(dv))), float(np.max(np.abs(d @ dv))))


def interp_eval(f: GridFunction, x) -> float | np.ndarray:
    """Barycentric interpolation of f at x; exact at nodes.

    Extrapolation is allowed for |x| <= EXTRAPOLATION_MARGIN.
    """
    xs = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xs)):
        raise OutOfDomain("non-finite evaluation point")
    if np.any(np.abs(xs) > EXTRAPOLATION_MARGIN):
        bad = float(np.max(np.abs(xs)))
        raise OutOfDomain(f"|x|={bad:g} exceeds extrapolation margin {EXTRAPOLATION_MARGIN}")
    nodes, w, _ = _grid_data(f.n)
    scalar = xs.ndim == 0
    pts = np.atleast_1d(xs)
    diff = pts[:, None] - nodes[None, :]
    hit = np.abs(diff) < 1e-15
    out = np.empty(pts.size)
    exact = hit.any(axis=1)
    if exact.any():
        idx = hit[exact].argmax(axis=1)
        out[exact] = f.values[idx]
    rest = ~exact
    if rest.any():
        ratio = w[None, :] / diff[rest]
        out[rest] = (ratio @ f.values) / ratio.sum(axis=1)
    return float(out[0]) if scalar else out


def derivative(f: GridFunction, k: int = 1) -> GridFunction:
    """Spectral differentiation applied k times (1 <= k <= n-1)."""
    if not 1 <= k <= f.n - 1:
        raise ValueError(f"derivative order k={k} out of range 1..{f.n - 1}")
    _, _, d = _grid_data(f.n)
    v = f.values
    for _ in range(k):
        v = d @ v
    return GridFunction(v)


def invert_monotone(
    g: Callable[[float], float],
    y: float,
    bracket: tuple[float, float],
    tol: float = 1e-12,
    max_iter: int = 60,
    screen_points: int = 9,
) -> float:
    """Solve g(x) = y for strictly monotone g on the bracket.

    Safeguarded Newton (secant slope) with bisection fallback; the returned
    x satisfies |g(x) - y| <= tol.  `screen_points` controls the coarse
    monotonicity check (0 skips it when the caller already sampled g).
    """
    a, b = float(bracket[0]), float(bracket[1])
    ga, gb = float(g(a)), float(g(b))
    increasing = gb > ga
    if screen_points >= 3:
        xs = np.linspace(a, b, screen_points)
        gs = np.array([g(xi) for xi in xs])
        dg = np.diff(gs)
        if increasing and np.any(dg < -tol) or (not increasing) and np.any(dg > tol):
            raise NotMonotone("sampled values are not monotone on the bracket")
    lo, hi = (ga, gb) if increasing else (gb, ga)
    if not lo - tol <= y <= hi + tol:
        raise NoRoot(f"target {y:g} outside sampled range [{lo:g}, {hi:g}]")

    x = a + (b - a) * np.clip((y - ga) / (gb - ga), 0.0, 1.0) if gb != ga else 0.5 * (a + b)
    fa, fb = ga - y, gb - y
    xa, xb = a, b
    h = max(1e-7 * (b - a), 1e-9)
    for _ in range(max_iter):
        fx = g(x) - y
        if abs(fx) <= tol:
            return float(x)
        if (fx > 0) == (fa > 0):
            xa, fa = x, fx
        else:
            xb, fb = x, fx
        slope = (g(x + h) - g(x - h)) / (2 * h)
        step = fx / slope if slope != 0 else np.inf
        x_new = x - step
        if not (min(xa, xb) <= x_new <= max(xa, xb)) or not np.isfinite(x_new):
            x_new = 0.5 * (xa + xb)
        x = x_new
    fx = g(x) - y
    if abs(fx) <= tol:
        return float(x)
    raise NoRoot(f"no convergence after {max_iter} iterations, residual {fx:g}")


@dataclass(frozen=True)
class OdeField:
    """Autonomous ODE right-hand side with a fixed dimension."""

    dimension: int
    rhs: Callable[[np.ndarray], np.ndarray]


def rk4_step(rhs: Callable[[np.ndarray], np.ndarray], y: np.ndarray, h: float) -> np.ndarray:
    k1 = rhs(y)
    k2 = rhs(y + 0.5 * h * k1)
    k3 = rhs(y + 0.5 * h * k2)
    k4 = rhs(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    field: OdeField,
    state: np.ndarray,
    t0: float,
    t1: float,
    step: float = 1e-3,
) -> np.ndarray:
    """Classical fixed-step RK4 from t0 to t1 (final partial step allowed)."""
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    y = np.asarray(state, dtype=float).copy()
    span = t1 - t0
    direction = 1.0 if span >= 0 else -1.0
    remaining = abs(span)
    while remaining > 0.0:
        h = direction * min(step, remaining)
        y = rk4_step(field.rhs, y, h)
        if not np.all(np.isfinite(y)):
            raise BlowUp(f"non-finite state after t={t1 - direction * remaining:g}")
        remaining -= abs(h)
    return y


def fd_jacobian(
    fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    h: float = 1e-6,
    diff: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None,
) -> np.ndarray:
    """Central finite-difference Jacobian of a 2-D map, entry error O(h^2).

    `diff` overrides plain subtraction of the two evaluations; phase spaces
    with periodic coordinates pass a wrap-aware difference here.
    """
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if diff is None:
        diff = np.subtract
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        cols.append(np.asarray(diff(fn(x + e), fn(x - e)), dtype=float) / (2.0 * h))
    return np.column_stack(cols)
