"""Deterministic example spaces."""

from __future__ import annotations

import math

import numpy as np

from .core import DomainWithBoundary, FiniteMetricMeasureSpace, space_to_json


def two_point() -> FiniteMetricMeasureSpace:
    """Two unit atoms at distance 1."""
    return FiniteMetricMeasureSpace([1.0, 1.0], coords=[[0.0], [1.0]])


def interval_grid(n: int = 1024) -> DomainWithBoundary:
    """Midpoints (i + 1/2)/n of weight 1/n in (0, 1); boundary {0, 1} with counting nu."""
    if n < 1:
        raise ValueError("size must be positive")
    x = np.concatenate([(np.arange(n) + 0.5) / n, [0.0, 1.0]])
    w = np.concatenate([np.full(n, 1.0 / n), [1.0, 1.0]])
    space = FiniteMetricMeasureSpace(w, coords=x)
    return DomainWithBoundary(space, [n, n + 1], metadata={"example": "interval-grid", "theta": 1.0})


def square_grid_bottom_edge(n: int = 32, side: float = 1.0) -> DomainWithBoundary:
    """n x n cell centres of [0, side]^2 with the bottom-edge points as boundary.

    Interior weights side^2/n^2; boundary atoms (i + 1/2) side/n on y = 0 with
    weight side/n, so nu is codimension 1.
    """
    if n < 1:
        raise ValueError("size must be positive")
    h = side / n
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    inner = np.c_[(i.ravel() + 0.5) * h, (j.ravel() + 0.5) * h]
    edge = np.c_[(np.arange(n) + 0.5) * h, np.zeros(n)]
    w = np.r_[np.full(n * n, h * h), np.full(n, h)]
    space = FiniteMetricMeasureSpace(w, coords=np.r_[inner, edge])
    meta = {"example": "square-grid-bottom-edge", "theta": 1.0, "side": side}
    return DomainWithBoundary(space, np.arange(n * n, n * n + n), metadata=meta)


def _cantor_cells(depth: int) -> np.ndarray:
    """Ternary indices (0 .. 3^depth - 1) of the depth-level middle-thirds cells."""
    cells = np.array([0], dtype=np.int64)
    for _ in range(depth):
        cells = np.concatenate([3 * cells, 3 * cells + 2])
    return np.sort(cells)


def cantor_boundary(size: int = 81) -> DomainWithBoundary:
    """[0, 1] minus the middle-thirds Cantor set, at depth ceil(log3 size).

    The 3^k triadic cells are split into the 2^k Cantor cells (boundary atoms
    at their centres, nu = 2^-k each) and the rest (interior, mu = 3^-k each).
    """
    if size < 1:
        raise ValueError("size must be positive")
    k = 0
    while 3**k < size:
        k += 1
    cells = _cantor_cells(k)
    total = 3**k
    mask = np.zeros(total, dtype=bool)
    mask[cells] = True
    x = (np.arange(total) + 0.5) / total
    order = np.r_[np.flatnonzero(~mask), cells]
    w = np.r_[np.full(total - cells.size, 1.0 / total), np.full(cells.size, 2.0**-k)]
    space = FiniteMetricMeasureSpace(w, coords=x[order])
    theta = 1.0 - math.log(2) / math.log(3)
    meta = {"example": "cantor-boundary", "depth": k, "theta": theta}
    return DomainWithBoundary(space, np.arange(total - cells.size, total), metadata=meta)


def circle_net(n: int = 16, radius: float = 0.45) -> FiniteMetricMeasureSpace:
    """n equally spaced points on a circle, weights 1/n."""
    if n < 1:
        raise ValueError("size must be positive")
    t = 2 * np.pi * np.arange(n) / n
    return FiniteMetricMeasureSpace(np.full(n, 1.0 / n), coords=radius * np.c_[np.cos(t), np.sin(t)])


def snowflake_circle(n: int = 16, radius: float = 0.45, s: float = 0.5) -> FiniteMetricMeasureSpace:
    """The circle net under the snowflake metric |x - y|^s."""
    c = circle_net(n, radius)
    return FiniteMetricMeasureSpace(c.weights, coords=c.coords, metric="snowflake", exponent=s)


EXAMPLES = {
    "interval-grid": (interval_grid, 1024),
    "square-grid-bottom-edge": (square_grid_bottom_edge, 32),
    "cantor-boundary": (cantor_boundary, 81),
    "circle-net": (circle_net, 16),
    "snowflake-circle": (snowflake_circle, 16),
    "two-point": (lambda size=2: two_point(), 2),
}


def generate(name: str, size: int | None = None) -> dict:
    """Space-description document of a named example."""
    if name not in EXAMPLES:
        raise ValueError(f"unknown example {name!r}; choose from {', '.join(sorted(EXAMPLES))}")
    make, default = EXAMPLES[name]
    obj = make(default if size is None else int(size))
    if isinstance(obj, DomainWithBoundary):
        return space_to_json(obj.space, obj)
    return space_to_json(obj, metadata={"example": name})
