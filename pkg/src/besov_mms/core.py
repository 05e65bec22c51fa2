"""Finite metric measure spaces, domains with boundary, and regularity diagnostics.

Every integral over a space is a weighted sum over its atoms, averages are
weighted means, and balls are open: ``y in B(x, r)`` iff ``d(x, y) < r``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

METRIC_TOL = 1e-9


class EmptyBall(ValueError):
    """Raised when an average is requested over a ball with no atoms."""


class EmptyInterior(ValueError):
    pass


class MetricError(ValueError):
    pass


class FiniteMetricMeasureSpace:
    """Weighted finite point set with a metric oracle.

    Args:
        weights: positive measure of each atom.
        coords: optional ``(n, dim)`` coordinates; required for the
            ``euclidean`` and ``snowflake`` metrics.
        metric: ``"euclidean"``, ``"snowflake"`` (Euclidean distance raised to
            ``exponent``) or ``"matrix"``.
        exponent: snowflake exponent ``s`` in (0, 1].
        matrix: explicit symmetric distance matrix for ``metric="matrix"``.
        ids: unique point identifiers, defaults to ``range(n)``.
        validate: check the triangle inequality of explicit matrices.
    """

    def __init__(
        self,
        weights: Sequence[float],
        coords: np.ndarray | None = None,
        metric: str = "euclidean",
        exponent: float = 1.0,
        matrix: np.ndarray | None = None,
        ids: Sequence | None = None,
        validate: bool = True,
    ):
        self.weights = np.asarray(weights, dtype=float)
        if self.weights.ndim != 1 or self.weights.size == 0:
            raise ValueError("weights must be a nonempty 1-d array")
        if not np.all(self.weights > 0):
            raise ValueError("all weights must be strictly positive")
        n = self.weights.size
        self.metric = metric
        self.exponent = float(exponent)
        self.coords = None
        self._matrix = None
        if metric in ("euclidean", "snowflake"):
            if coords is None:
                raise ValueError(f"metric {metric!r} needs coordinates")
            c = np.asarray(coords, dtype=float)
            if c.ndim == 1:
                c = c[:, None]
            if c.shape[0] != n:
                raise ValueError("coords and weights disagree in length")
            self.coords = c
            if metric == "euclidean":
                self.exponent = 1.0
            elif not 0.0 < self.exponent <= 1.0:
                raise MetricError("snowflake exponent must lie in (0, 1]")
        elif metric == "matrix":
            if matrix is None:
                raise ValueError("metric 'matrix' needs a distance matrix")
            m = np.asarray(matrix, dtype=float)
            if m.shape != (n, n):
                raise ValueError("distance matrix shape does not match weights")
            if coords is not None:
                self.coords = np.asarray(coords, dtype=float)
            self._matrix = m
            if validate:
                validate_metric_matrix(m)
        else:
            raise ValueError(f"unknown metric kind {metric!r}")
        self.ids = tuple(range(n)) if ids is None else tuple(ids)
        if len(self.ids) != n or len(set(self.ids)) != n:
            raise ValueError("point identifiers must be unique, one per weight")

    @property
    def n(self) -> int:
        return self.weights.size

    def __len__(self) -> int:
        return self.n

    def _check_index(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.n:
            raise IndexError(f"unknown point index {i}")
        return i

    def distances_from(self, i: int, to: np.ndarray | None = None) -> np.ndarray:
        """Distances from point ``i`` to ``to`` (all points by default)."""
        i = self._check_index(i)
        if self._matrix is not None:
            row = self._matrix[i]
            return row if to is None else row[to]
        target = self.coords if to is None else self.coords[to]
        d = np.sqrt(np.sum((target - self.coords[i]) ** 2, axis=1))
        if self.metric == "snowflake":
            d = d**self.exponent
        return d

    def distance(self, i: int, j: int) -> float:
        return float(self.distances_from(i, np.array([self._check_index(j)]))[0])

    def block(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=int)
        cols = np.asarray(cols, dtype=int)
        if self._matrix is not None:
            return self._matrix[np.ix_(rows, cols)]
        a = self.coords[rows]
        b = self.coords[cols]
        d = np.sqrt(np.maximum(_sqdist(a, b), 0.0))
        if self.metric == "snowflake":
            d = d**self.exponent
        return d

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        if self._matrix is not None:
            return self._matrix
        idx = np.arange(self.n)
        return self.block(idx, idx)

    @cached_property
    def diameter(self) -> float:
        if self.n == 1:
            return 0.0
        return float(self.distance_matrix.max())

    @cached_property
    def breakpoints(self) -> np.ndarray:
        """Sorted distinct positive pairwise distances."""
        d = self.distance_matrix[np.triu_indices(self.n, k=1)]
        return np.unique(d[d > 0])

    def subspace(self, indices: Sequence[int], weights: Sequence[float] | None = None):
        idx = np.asarray(indices, dtype=int)
        w = self.weights[idx] if weights is None else weights
        ids = [self.ids[i] for i in idx]
        if self._matrix is None:
            return FiniteMetricMeasureSpace(
                w, coords=self.coords[idx], metric=self.metric,
                exponent=self.exponent, ids=ids,
            )
        return FiniteMetricMeasureSpace(
            w, metric="matrix", matrix=self._matrix[np.ix_(idx, idx)],
            ids=ids, validate=False,
        )


def _sqdist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # exact (no cancellation) for the small dimensions used here
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def validate_metric_matrix(m: np.ndarray, tol: float = METRIC_TOL) -> None:
    """Raise MetricError unless ``m`` is a metric up to ``tol``."""
    n = m.shape[0]
    if not np.allclose(m, m.T, rtol=0, atol=tol):
        raise MetricError("distance matrix is not symmetric")
    if np.any(np.abs(np.diag(m)) > 0):
        raise MetricError("distance matrix has a nonzero diagonal")
    off = m[~np.eye(n, dtype=bool)]
    if np.any(off <= 0):
        raise MetricError("distinct points at zero distance")
    for k in range(n):
        # d(i, j) <= d(i, k) + d(k, j) for every pair (i, j)
        if np.any(m > m[:, k][:, None] + m[k][None, :] + tol):
            i, j = np.argwhere(m > m[:, k][:, None] + m[k][None, :] + tol)[0]
            raise MetricError(f"triangle inequality fails for ({i}, {k}, {j})")


@dataclass(frozen=True)
class Ball:
    center: int
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")


@dataclass(frozen=True)
class BesovParams:
    alpha: float
    p: float
    q: float = 2.0
    theta: float = 1.0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 1 <= self.p < math.inf:
            raise ValueError("p must lie in [1, inf)")
        if not self.q >= 1:
            raise ValueError("q must lie in [1, inf]")
        if not self.theta > 0:
            raise ValueError("theta must be positive")

    def with_alpha(self, alpha: float) -> "BesovParams":
        return BesovParams(alpha, self.p, self.q, self.theta)


class DomainWithBoundary:
    """A finite space split into interior atoms (measure mu) and boundary atoms (nu).

    ``interior`` and ``boundary`` are index arrays into ``space``; functions on
    the interior (resp. boundary) are arrays aligned with them.
    """

    def __init__(
        self,
        space: FiniteMetricMeasureSpace,
        boundary: Sequence[int],
        boundary_weights: Sequence[float] | None = None,
        metadata: dict | None = None,
    ):
        self.space = space
        b = np.asarray(sorted(set(int(i) for i in boundary)), dtype=int)
        if b.size == 0:
            raise ValueError("boundary must be nonempty")
        if b.size != len(boundary):
            raise ValueError("boundary indices must be unique")
        if b[0] < 0 or b[-1] >= space.n:
            raise IndexError("boundary index outside the space")
        order = np.argsort(np.asarray(boundary, dtype=int), kind="stable")
        mask = np.zeros(space.n, dtype=bool)
        mask[b] = True
        self.boundary = b
        self.interior = np.flatnonzero(~mask)
        self.is_boundary = mask
        self.mu = space.weights[self.interior].copy()
        if boundary_weights is None:
            self.nu = space.weights[b].copy()
        else:
            bw = np.asarray(boundary_weights, dtype=float)[order]
            if bw.size != b.size or not np.all(bw > 0):
                raise ValueError("boundary weights must be positive, one per index")
            self.nu = bw
        self.metadata = dict(metadata or {})
        if self.interior.size and not np.all(self.dist_to_boundary > 0):
            raise ValueError("an interior point sits at distance 0 from the boundary")

    @property
    def n_interior(self) -> int:
        return self.interior.size

    @property
    def n_boundary(self) -> int:
        return self.boundary.size

    @cached_property
    def interior_boundary_distances(self) -> np.ndarray:
        return self.space.block(self.interior, self.boundary)

    @cached_property
    def dist_to_boundary(self) -> np.ndarray:
        if self.n_interior == 0:
            return np.zeros(0)
        return self.interior_boundary_distances.min(axis=1)

    @cached_property
    def nearest_boundary(self) -> np.ndarray:
        """Row of the nearest boundary point per interior point (ties -> smallest index)."""
        if self.n_interior == 0:
            return np.zeros(0, dtype=int)
        # boundary is sorted ascending, so argmin's first hit is the smallest index
        return np.argmin(self.interior_boundary_distances, axis=1)

    @cached_property
    def boundary_diameter(self) -> float:
        if self.n_boundary == 1:
            return 0.0
        return float(self.space.block(self.boundary, self.boundary).max())

    @cached_property
    def min_gap(self) -> float:
        """Smallest interior-to-boundary distance."""
        return float(self.dist_to_boundary.min())

    def interior_space(self) -> FiniteMetricMeasureSpace:
        return self.space.subspace(self.interior, self.mu)

    def boundary_space(self) -> FiniteMetricMeasureSpace:
        return self.space.subspace(self.boundary, self.nu)

    def measure_vector(self, which: str = "total") -> np.ndarray:
        """Per-point weights over the whole space for ``mu``, ``nu`` or ``total``."""
        w = np.zeros(self.space.n)
        if which in ("mu", "total"):
            w[self.interior] = self.mu
        if which in ("nu", "total"):
            w[self.boundary] = self.nu
        if which not in ("mu", "nu", "total"):
            raise ValueError(f"unknown measure {which!r}")
        return w


# ---------------------------------------------------------------------------
# ball queries


def _space_of(obj) -> FiniteMetricMeasureSpace:
    return obj.space if isinstance(obj, DomainWithBoundary) else obj


def ball_members(space, center: int, r: float) -> np.ndarray:
    """Indices of the points at distance < r from ``center``."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    sp = _space_of(space)
    return np.flatnonzero(sp.distances_from(center) < r)


def ball_measure(space_or_domain, center: int, r: float, which: str = "total") -> float:
    if isinstance(space_or_domain, DomainWithBoundary):
        w = space_or_domain.measure_vector(which)
    else:
        if which != "total":
            raise ValueError("a bare space only carries the total measure")
        w = space_or_domain.weights
    members = ball_members(space_or_domain, center, r)
    return float(np.sum(w[members]))


def average_over_ball(space: FiniteMetricMeasureSpace, u: np.ndarray, center: int, r: float) -> float:
    members = ball_members(space, center, r)
    if members.size == 0:
        raise EmptyBall(f"B({center}, {r}) is empty")
    w = space.weights[members]
    return float(np.dot(w, np.asarray(u, dtype=float)[members]) / w.sum())


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class DoublingReport:
    ratio: float
    center: int
    radius: float
    samples: int


def doubling_radii(space: FiniteMetricMeasureSpace) -> np.ndarray:
    """Radii at which some ratio mu(B(x,2r))/mu(B(x,r)) changes value.

    Membership of B(x, r) changes at pairwise distances d and that of
    B(x, 2r) at d/2; the ratio is constant on each interval between
    consecutive values and is attained at the interval's right end.
    """
    bp = space.breakpoints
    return np.unique(np.concatenate([bp, bp / 2]))


def doubling_constant_estimate(space: FiniteMetricMeasureSpace, radii="all-breakpoints",
                               centers: Sequence[int] | None = None) -> DoublingReport:
    if space.n == 1:
        return DoublingReport(1.0, 0, math.inf, 0)
    rs = doubling_radii(space) if isinstance(radii, str) else np.asarray(radii, dtype=float)
    if isinstance(radii, str) and radii != "all-breakpoints":
        raise ValueError(f"unknown radii option {radii!r}")
    cs = range(space.n) if centers is None else centers
    best = DoublingReport(1.0, -1, math.nan, 0)
    for c in cs:
        row = space.distances_from(c)
        order = np.argsort(row, kind="stable")
        d = row[order]
        cum = np.concatenate([[0.0], np.cumsum(space.weights[order])])
        # searchsorted(side="left") counts the atoms at distance < r
        small = cum[np.searchsorted(d, rs, side="left")]
        big = cum[np.searchsorted(d, 2 * rs, side="left")]
        ratio = big / small
        best.samples += rs.size
        k = int(np.argmax(ratio))
        if ratio[k] > best.ratio or best.center < 0:
            best.ratio, best.center, best.radius = float(ratio[k]), int(c), float(rs[k])
    return best


@dataclass
class CodimensionProfile:
    theta: float
    min_ratio: float
    max_ratio: float
    table: list[dict] = field(default_factory=list)
    skipped: list[dict] = field(default_factory=list)

    @property
    def constant(self) -> float:
        return max(self.max_ratio, 1.0 / self.min_ratio)


def codimension_profile(domain: DomainWithBoundary, theta: float, radii: Sequence[float],
                        centers: Sequence[int] | None = None) -> CodimensionProfile:
    """Ratios r^theta * nu(B(z,r)) / mu(B(z,r) cap Omega) over boundary centers."""
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    rmax = 2 * domain.boundary_diameter
    cs = domain.boundary if centers is None else np.asarray(centers, dtype=int)
    rows, skipped = [], []
    mu_w = domain.measure_vector("mu")
    nu_w = domain.measure_vector("nu")
    for z in cs:
        if not domain.is_boundary[z]:
            raise ValueError(f"center {z} is not a boundary point")
        d = domain.space.distances_from(z)
        for r in radii:
            if not 0 < r <= rmax * (1 + 1e-12) and rmax > 0:
                raise ValueError(f"radius {r} outside (0, 2 diam(boundary)]")
            inside = d < r
            m = float(mu_w[inside].sum())
            v = float(nu_w[inside].sum())
            row = {"center": int(z), "r": float(r), "mu": m, "nu": v}
            if m == 0:
                skipped.append(row)
                continue
            row["ratio"] = r**theta * v / m
            rows.append(row)
    ratios = [row["ratio"] for row in rows]
    lo = min(ratios) if ratios else math.nan
    hi = max(ratios) if ratios else math.nan
    return CodimensionProfile(theta, lo, hi, rows, skipped)


def hausdorff_codim_content(domain: DomainWithBoundary, theta: float, eps: float) -> float:
    """Scale-eps upper estimate of the codimension-theta Hausdorff content of the boundary.

    The boundary is covered by radius-eps balls centred on a greedy maximal
    eps-separated boundary net; the sum of mu(B)/eps^theta over that cover is
    returned. Greedy covers are not optimal, so this bounds the infimum from
    above.
    """
    from .nets import maximal_separated_net

    if not eps > 0:
        raise ValueError("eps must be positive")
    net = maximal_separated_net(domain.space, eps, int(domain.boundary[0]), among=domain.boundary)
    mu_w = domain.measure_vector("mu")
    total = 0.0
    for c in net.members:
        total += float(mu_w[domain.space.distances_from(c) < eps].sum()) / eps**theta
    return total


# ---------------------------------------------------------------------------
# space-description JSON


def space_to_json(space: FiniteMetricMeasureSpace, domain: DomainWithBoundary | None = None,
                  metadata: dict | None = None) -> dict:
    metric: dict = {"kind": space.metric}
    if space.metric == "snowflake":
        metric["s"] = space.exponent
    if space.metric == "matrix":
        metric["matrix"] = space.distance_matrix.tolist()
    doc = {
        "points": space.coords.tolist() if space.coords is not None else [None] * space.n,
        "metric": metric,
        "weights": space.weights.tolist(),
    }
    if domain is not None:
        doc["boundary"] = {"indices": domain.boundary.tolist(), "weights": domain.nu.tolist()}
    meta = dict(metadata or {})
    if domain is not None:
        meta = {**domain.metadata, **meta}
    if meta:
        doc["metadata"] = meta
    return doc


def space_from_json(doc: dict):
    """Build ``(space, domain_or_None, metadata)`` from a space-description dict."""
    metric = doc.get("metric", {"kind": "euclidean"})
    kind = metric.get("kind", "euclidean")
    pts = doc.get("points")
    coords = None
    if pts is not None and all(p is not None for p in pts):
        coords = np.asarray(pts, dtype=float)
    space = FiniteMetricMeasureSpace(
        doc["weights"], coords=coords, metric=kind,
        exponent=metric.get("s", 1.0), matrix=metric.get("matrix"),
    )
    meta = doc.get("metadata", {})
    domain = None
    if doc.get("boundary"):
        b = doc["boundary"]
        domain = DomainWithBoundary(space, b["indices"], b.get("weights"), metadata=meta)
    return space, domain, meta


def load_space(path: str | Path):
    return space_from_json(json.loads(Path(path).read_text(encoding="utf-8")))
