"""Built-in planar maps used by the CLI, tests and examples.

All evaluators accept a point of shape (2,) or a batch of shape (2, N) and
return the same shape, so they can be used both pointwise and vectorized.
"""

from __future__ import annotations

import numpy as np

from .graphtransform import PlanarMap


def linear_map(mu: float = 2.0, lam: float = 0.5) -> PlanarMap:
    """Diagonal saddle (mu, lam) with exact inverse and Jacobian."""
    d = np.array([mu, lam])

    def forward(x):
        x = np.asarray(x, dtype=float)
        return (d if x.ndim == 1 else d[:, None]) * x

    def inverse(y):
        y = np.asarray(y, dtype=float)
        return y / (d if y.ndim == 1 else d[:, None])

    def jac(x):
        return np.diag(d)

    return PlanarMap(forward=forward, inverse=inverse, jacobian=jac, vectorized=True)


def polynomial_map(
    fx_terms: list[tuple[float, int, int]],
    fy_terms: list[tuple[float, int, int]],
    fixed_point=(0.0, 0.0),
) -> PlanarMap:
    """Polynomial diffeomorphism germ from term lists [(coeff, i, j), ...].

    Component k evaluates sum of coeff * x1^i * x2^j over its term list.
    The Jacobian is assembled analytically from the terms.
    """
    terms = (tuple(fx_terms), tuple(fy_terms))

    def forward(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for comp, tl in enumerate(terms):
            for c, i, j in tl:
                out[comp] += c * x[0] ** i * x[1] ** j
        return out

    def jac(x):
        x = np.asarray(x, dtype=float)
        m = np.zeros((2, 2))
        for comp, tl in enumerate(terms):
            for c, i, j in tl:
                if i > 0:
                    m[comp, 0] += c * i * x[0] ** (i - 1) * x[1] ** j
                if j > 0:
                    m[comp, 1] += c * j * x[0] ** i * x[1] ** (j - 1)
        return m

    return PlanarMap(
        forward=forward,
        jacobian=jac,
        fixed_point=np.asarray(fixed_point, dtype=float),
        vectorized=True,
    )


def quadratic_saddle(coupling: float = 0.5) -> PlanarMap:
    """Saddle (2, 1/2) with quadratic cross coupling.

    forward(x1, x2) = (2 x1 + c x2^2, x2/2 + c x1^2).
    """
    c = float(coupling)
    return polynomial_map(
        fx_terms=[(2.0, 1, 0), (c, 0, 2)],
        fy_terms=[(0.5, 0, 1), (c, 2, 0)],
    )


def perturbed_cat_map(eps: float = 0.05) -> PlanarMap:
    """Planar lift of a perturbed torus automorphism.

    forward(x, y) = (2x + y + eps*sin(2*pi*x), x + y); descends to the
    2-torus because the perturbation is 1-periodic.  Hyperbolic fixed
    point at the origin for small eps.
    """
    e = float(eps)
    tau = 2.0 * np.pi

    def forward(x):
        x = np.asarray(x, dtype=float)
        return np.stack([2.0 * x[0] + x[1] + e * np.sin(tau * x[0]), x[0] + x[1]])

    def jac(x):
        x = np.asarray(x, dtype=float)
        return np.array([[2.0 + e * tau * np.cos(tau * x[0]), 1.0], [1.0, 1.0]])

    return PlanarMap(forward=forward, jacobian=jac, vectorized=True)


_BUILTINS = {
    "linear": linear_map,
    "quadratic-saddle": quadratic_saddle,
    "perturbed-cat": perturbed_cat_map,
}


def builtin_map(name: str, **params) -> PlanarMap:
    """Look up a named built-in map; `polynomial` takes fx/fy term lists."""
    if name == "polynomial":
        return polynomial_map(
            [tuple(t) for t in params["fx"]],
            [tuple(t) for t in params["fy"]],
            fixed_point=params.get("fixed_point", (0.0, 0.0)),
        )
    try:
        factory = _BUILTINS[name]
    except KeyError:
        known = ", ".join(sorted(_BUILTINS) + ["polynomial"])
        raise ValueError(f"unknown map {name!r}; known: {known}") from None
    return factory(**params)
