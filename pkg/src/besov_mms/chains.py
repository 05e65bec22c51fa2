"""Harnack chains along discrete paths and boundary-to-boundary ball chains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

from .core import DomainWithBoundary
from .nets import overlap_count


class PathTooSparse(ValueError):
    """Raised when a discrete path (or grid) is too coarse to certify a chain."""


class DisconnectedShell(ValueError):
    """Raised when a shell has no interior point or cannot be reached in the graph."""


@dataclass
class BallChain:
    centers: list[int]
    radii: list[float]
    z: int | None = None
    w: int | None = None
    split: int = 0
    levels: list[int] = field(default_factory=list)
    a_est: float = 1.0
    tol: float = 0.0
    leg_lengths: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.centers)

    @property
    def signed_index(self) -> np.ndarray:
        """k for each ball: >= 0 on the z side, < 0 on the w side."""
        return np.arange(len(self.centers)) - self.split

    def to_json(self) -> dict:
        return {
            "centers": [int(c) for c in self.centers],
            "radii": [float(r) for r in self.radii],
            "levels": [int(v) for v in self.levels],
            "z": self.z, "w": self.w, "split": self.split,
            "a_est": self.a_est, "tol": self.tol, "leg_lengths": list(self.leg_lengths),
        }


# ---------------------------------------------------------------------------
# proximity graphs


def proximity_graph(domain: DomainWithBoundary, radius: float) -> csr_matrix:
    """Interior points joined when d <= radius (edge weight d); indices are space indices."""
    space = domain.space
    inner = domain.interior
    reach = radius * (1 + 1e-9)
    if space.coords is not None and space.metric == "euclidean":
        pairs = cKDTree(space.coords[inner]).query_pairs(reach, output_type="ndarray")
        i, j = inner[pairs[:, 0]], inner[pairs[:, 1]]
        d = np.sqrt(np.sum((space.coords[i] - space.coords[j]) ** 2, axis=1))
    else:
        dd = space.block(inner, inner)
        a, b = np.nonzero(np.triu(dd <= reach, k=1))
        i, j, d = inner[a], inner[b], dd[a, b]
    rows = np.concatenate([i, j])
    cols = np.concatenate([j, i])
    return csr_matrix((np.concatenate([d, d]), (rows, cols)), shape=(space.n, space.n))


def mesh_step(domain: DomainWithBoundary) -> float:
    """Largest nearest-neighbour distance among interior points: the smallest radius
    at which every interior point has a proximity-graph neighbour."""
    space = domain.space
    inner = domain.interior
    if inner.size < 2:
        return 0.0
    if space.coords is not None and space.metric == "euclidean":
        d, _ = cKDTree(space.coords[inner]).query(space.coords[inner], k=2)
        return float(d[:, 1].max())
    dd = space.block(inner, inner)
    np.fill_diagonal(dd, np.inf)
    return float(dd.min(axis=1).max())


def graph_step(graph: csr_matrix) -> float:
    """Longest edge of the graph (the resolution of paths drawn in it)."""
    return float(graph.data.max()) if graph.nnz else 0.0


def shortest_path(graph: csr_matrix, a: int, b: int) -> list[int]:
    dist, pred = dijkstra(graph, directed=False, indices=a, return_predecessors=True)
    if not np.isfinite(dist[b]):
        raise DisconnectedShell(f"no path from {a} to {b} in the proximity graph")
    path = [b]
    while path[-1] != a:
        path.append(int(pred[path[-1]]))
    return path[::-1]


# ---------------------------------------------------------------------------
# chains


def harnack_chain(domain: DomainWithBoundary, path: Sequence[int], r: float, M: float = 2.0) -> BallChain:
    """Fixed-radius chain along ``path`` whose consecutive M^-1-dilates meet.

    Greedy: from the current center jump to the last later path point closer
    than 2r/M.  Every path step must be at most r/M.
    """
    if not M > 1:
        raise ValueError("M must exceed 1")
    if not r > 0:
        raise ValueError("r must be positive")
    path = [int(p) for p in path]
    if not path:
        raise ValueError("empty path")
    space = domain.space
    pa = np.asarray(path)
    if np.any(domain.is_boundary[pa]):
        raise ValueError("path touches the boundary")
    rows = np.searchsorted(domain.interior, pa)
    if np.any(domain.dist_to_boundary[rows] <= r):
        raise ValueError("path comes within r of the boundary")
    for a, b in zip(path, path[1:]):
        if space.distance(a, b) > r / M * (1 + 1e-9):
            raise PathTooSparse(f"path step {a}->{b} exceeds r/M = {r / M:.6g}")
    centers = [path[0]]
    i = 0
    while i < len(path) - 1:
        d = space.distances_from(path[i], pa[i + 1:])
        i = i + 1 + int(np.flatnonzero(d < 2 * r / M)[-1])
        centers.append(path[i])
    return BallChain(centers, [float(r)] * len(centers))


def _shell_point(domain: DomainWithBoundary, z: int, rho: float, tol: float) -> int:
    d = domain.space.distances_from(z, domain.interior)
    shell = np.flatnonzero(np.abs(d - rho) <= tol)
    if shell.size == 0:
        raise DisconnectedShell(f"shell of radius {rho:.6g} around {z} has no interior point")
    # argmax of the distance to the boundary; first hit is the smallest index
    return int(domain.interior[shell[np.argmax(domain.dist_to_boundary[shell])]])


def _resolvable(r: float, M: float, step: float) -> bool:
    return r / M >= step * (1 - 1e-9)


def _side_legs(domain, z, r0, graph, a_est, tol, M, step):
    """Shell points x_0, x_1, ... and the Harnack legs joining them, for the resolvable levels."""
    scale = 64 * a_est**2
    # leg i (radius r_i) is built while r_i / M is at least the graph step
    levels = 0
    while _resolvable(r0 * 2.0**-levels / scale, M, step):
        levels += 1
    xs = [_shell_point(domain, z, r0 * 2.0**-i, tol) for i in range(levels + 1)]
    legs = [harnack_chain(domain, shortest_path(graph, xs[i], xs[i + 1]), r0 * 2.0**-i / scale, M)
            for i in range(levels)]
    return xs, legs


def boundary_chain(domain: DomainWithBoundary, z: int, w: int, graph: csr_matrix,
                   a_est: float = 4.0, tol: float | None = None, M: float = 2.0) -> BallChain:
    """Two-sided chain of balls from w to z.

    With r_0 = d(z, w)/4, x_i is the shell point at distance r_0 2^-i from z
    farthest from the boundary; consecutive x_i are joined by graph shortest
    paths, each turned into a 2-Harnack chain of radius r_0 2^-i/(64 A^2).
    Legs are generated while the radius stays resolvable by the graph
    (r_i/M >= longest edge); the same is done from w and the two sides are
    joined at level 0 by a chain from y_0 to x_0.  Balls are ordered from the
    w end to the z end and index 0 sits at the middle of the joining chain.
    """
    z, w = int(z), int(w)
    if z == w:
        raise ValueError("z and w must differ")
    if not (domain.is_boundary[z] and domain.is_boundary[w]):
        raise ValueError("z and w must be boundary points")
    if not a_est > 0:
        raise ValueError("a_est must be positive")
    step = graph_step(graph)
    tol = step if tol is None else float(tol)
    r0 = domain.space.distance(z, w) / 4
    scale = 64 * a_est**2
    if not _resolvable(r0 / scale, M, step):
        raise PathTooSparse(
            f"level-0 radius {r0 / scale:.6g} is below the graph resolution {M * step:.6g}")
    xz, legs_z = _side_legs(domain, z, r0, graph, a_est, tol, M, step)
    xw, legs_w = _side_legs(domain, w, r0, graph, a_est, tol, M, step)
    join = harnack_chain(domain, shortest_path(graph, xw[0], xz[0]), r0 / scale, M)
    pieces = [(list(reversed(leg.centers)), leg.radii, i) for i, leg in reversed(list(enumerate(legs_w)))]
    pieces.append((join.centers, join.radii, 0))
    pieces += [(leg.centers, leg.radii, i) for i, leg in enumerate(legs_z)]
    centers: list[int] = []
    radii: list[float] = []
    levels: list[int] = []
    join_span = [0, 0]
    for n_piece, (cs, rs, lvl) in enumerate(pieces):
        start = len(centers)
        for c, r in zip(cs, rs):
            # legs share their end points; drop a repeated (center, radius) pair
            if centers and c == centers[-1] and r == radii[-1]:
                continue
            centers.append(int(c))
            radii.append(float(r))
            levels.append(lvl)
        if n_piece == len(legs_w):
            join_span = [start, len(centers)]
    split = (join_span[0] + join_span[1] - 1) // 2
    chain = BallChain(centers, radii, z, w, split, levels, float(a_est), tol)
    chain.leg_lengths = [len(leg) for leg in legs_w + legs_z]
    return chain


@dataclass
class ChainReport:
    eight_dilate_inside: bool
    eight_dilate_witness: tuple | None
    half_balls_meet: bool
    half_ball_witness: int | None
    endpoints_ok: bool
    endpoint_gaps: tuple[float, float]
    fitted_N: float
    decay_constant_z: float
    decay_constant_w: float
    overlap_4: int
    length: int

    @property
    def exact_passed(self) -> bool:
        return self.eight_dilate_inside and self.half_balls_meet

    def to_json(self) -> dict:
        return asdict(self)


def verify_chain(chain: BallChain, domain: DomainWithBoundary) -> ChainReport:
    """Exact checks (i) 8B inside and (iii) half-balls meet; constants for the rest."""
    space = domain.space
    c = np.asarray(chain.centers, dtype=int)
    r = np.asarray(chain.radii, dtype=float)

    witness = None
    for k in range(c.size):
        d = space.distances_from(int(c[k]), domain.boundary)
        hit = np.flatnonzero(d < 8 * r[k])
        if hit.size:
            witness = (k, int(domain.boundary[hit[0]]))
            break

    half_witness = None
    for k in range(c.size - 1):
        if not space.distance(int(c[k]), int(c[k + 1])) < (r[k] + r[k + 1]) / 2:
            half_witness = k
            break

    gaps = (math.nan, math.nan)
    ends_ok = True
    fitted = math.inf
    cz = cw = math.nan
    if chain.z is not None and chain.w is not None and c.size:
        scale = 64 * chain.a_est**2
        gz = space.distance(int(c[-1]), chain.z) - scale * r[-1]
        gw = space.distance(int(c[0]), chain.w) - scale * r[0]
        gaps = (float(gz), float(gw))
        ends_ok = gz <= chain.tol * (1 + 1e-9) and gw <= chain.tol * (1 + 1e-9)
        dzw = space.distance(chain.z, chain.w)
        k = chain.signed_index
        # radii halve from one leg to the next, so N is the mean number of balls per leg
        if chain.leg_lengths:
            fitted = float(np.mean(chain.leg_lengths))
        env = 2.0 ** (-np.abs(k) / fitted) * dzw
        ratio = r / env
        cz = float(ratio[k >= 0].max()) if np.any(k >= 0) else math.nan
        cw = float(ratio[k < 0].max()) if np.any(k < 0) else math.nan

    ov = overlap_count(space, c, r, K=4.0, ground=domain.interior) if c.size else None
    return ChainReport(
        eight_dilate_inside=witness is None,
        eight_dilate_witness=witness,
        half_balls_meet=half_witness is None,
        half_ball_witness=half_witness,
        endpoints_ok=bool(ends_ok),
        endpoint_gaps=gaps,
        fitted_N=float(fitted),
        decay_constant_z=cz,
        decay_constant_w=cw,
        overlap_4=ov.max_overlap if ov else 0,
        length=int(c.size),
    )
