"""Uniformized hyperbolic fillings of finite doubling spaces.

Vertices are pairs (z, n) with z in the level-n net A_n, nested
A_0 = {z_0} in A_1 in ... in A_N, each A_n a maximal 2^-n-separated subset.
Edges are unit intervals; along an edge the unit-graph distance to the root is
min(a + t, b + 1 - t), so uniformized lengths integrate e^{-eps d_X} in closed
form.  Boundary points of Z are modelled as pendant leaves hung below their
level-N ray vertex, with the closed-form truncation length 2^{-N}/log 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra, shortest_path

from .core import BesovParams, DomainWithBoundary, FiniteMetricMeasureSpace
from .nets import maximal_separated_net
from .trace import ParameterWindowError, TraceResult, trace, whitney_extension

EPSILON = math.log(2.0)


class Disconnected(ValueError):
    pass


@dataclass(frozen=True)
class FillingParams:
    levels: int
    beta: float
    base: int = 0
    epsilon: float = EPSILON

    def __post_init__(self):
        if self.levels < 0:
            raise ValueError("levels must be nonnegative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.epsilon != EPSILON:
            raise ValueError("epsilon is fixed to log 2")

    @property
    def sigma(self) -> float:
        """Codimension exponent beta/epsilon of the boundary measure."""
        return self.beta / self.epsilon


# ---------------------------------------------------------------------------
# closed-form edge integrals


def edge_integral(a: float, b: float, t0: float = 0.0, t1: float = 1.0, eps: float = EPSILON) -> float:
    """int_{t0}^{t1} exp(-eps min(a + t, b + 1 - t)) dt on an edge with end depths a, b."""
    if t1 <= t0:
        return 0.0
    if eps == 0:
        return t1 - t0
    ts = min(max((b + 1 - a) / 2, 0.0), 1.0)
    total = 0.0
    lo, hi = t0, min(t1, ts)
    if hi > lo:
        total += math.exp(-eps * a) * (math.exp(-eps * lo) - math.exp(-eps * hi)) / eps
    lo, hi = max(t0, ts), t1
    if hi > lo:
        total += math.exp(-eps * (b + 1)) * (math.exp(eps * hi) - math.exp(eps * lo)) / eps
    return total


def truncation_bound(levels: int) -> float:
    """Sum over n >= N of the vertical edge lengths between levels n and n + 1."""
    return 2.0**-levels / EPSILON


# ---------------------------------------------------------------------------
# the filling


@dataclass
class HyperbolicFilling:
    space: FiniteMetricMeasureSpace
    nu: np.ndarray
    params: FillingParams
    scale: float
    nets: list[list[int]]
    vz: np.ndarray
    vn: np.ndarray
    index: dict
    edges: np.ndarray
    kinds: list[str]
    d_x: np.ndarray
    mu_hat: np.ndarray
    lengths: np.ndarray
    density: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_vertices(self) -> int:
        return self.vz.size

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    def vertex(self, key) -> int:
        """Vertex id from an id or a (point index, level) key."""
        if isinstance(key, tuple):
            return self.index[(int(key[0]), int(key[1]))]
        return int(key)

    @cached_property
    def graph(self) -> csr_matrix:
        n = self.n_vertices
        if self.n_edges == 0:
            return csr_matrix((n, n))
        i, j = self.edges[:, 0], self.edges[:, 1]
        return csr_matrix((np.r_[self.lengths, self.lengths], (np.r_[i, j], np.r_[j, i])), shape=(n, n))

    @cached_property
    def vertex_distances(self) -> np.ndarray:
        """All-pairs d_epsilon between vertices (whole-edge geodesics)."""
        if self.n_edges == 0:
            return np.zeros((self.n_vertices, self.n_vertices))
        d = dijkstra(self.graph, directed=False)
        # path sums in opposite directions can differ in the last bit
        return np.minimum(d, d.T)

    @property
    def total_measure(self) -> float:
        """mu_beta of the whole filling: sum over edges of the endpoint-weight density."""
        return math.fsum(self.density.tolist())

    def to_json(self) -> dict:
        return {
            "scale": self.scale,
            "epsilon": self.params.epsilon,
            "beta": self.params.beta,
            "levels": self.params.levels,
            "nets": [list(map(int, a)) for a in self.nets],
            "vertices": [
                {"z": int(z), "n": int(n), "d_X": int(d), "mu_hat": float(m)}
                for z, n, d, m in zip(self.vz, self.vn, self.d_x, self.mu_hat)
            ],
            "edges": [
                {"v": int(e[0]), "w": int(e[1]), "kind": k, "length": float(l), "density": float(dn)}
                for e, k, l, dn in zip(self.edges, self.kinds, self.lengths, self.density)
            ],
        }


def build_filling(space: FiniteMetricMeasureSpace, params: FillingParams,
                  nu: Sequence[float] | None = None) -> HyperbolicFilling:
    """Nested nets, threshold edges, root depths by BFS, weights and edge lengths.

    ``nu`` is the measure of Z (nonnegative, defaults to the space weights).
    A space of diameter >= 1 is rescaled by 0.5/diam first; the factor is kept
    in ``scale``.
    """
    nu = space.weights.copy() if nu is None else np.asarray(nu, dtype=float)
    if nu.shape != (space.n,) or np.any(nu < 0):
        raise ValueError("nu must be a nonnegative weight per point")
    scale = 1.0
    if space.diameter >= 1:
        scale = 0.5 / space.diameter
        space = FiniteMetricMeasureSpace(space.weights, metric="matrix",
                                         matrix=space.distance_matrix * scale,
                                         ids=space.ids, validate=False)
    z0 = int(params.base)
    nets = [[z0]]
    for n in range(1, params.levels + 1):
        nets.append(maximal_separated_net(space, 2.0**-n, z0, initial=nets[-1]).members)

    vz = np.array([z for a in nets for z in a], dtype=int)
    vn = np.array([n for n, a in enumerate(nets) for _ in a], dtype=int)
    index = {(int(z), int(n)): k for k, (z, n) in enumerate(zip(vz, vn))}
    start = np.cumsum([0] + [len(a) for a in nets])

    edges, kinds = [], []
    for n, a in enumerate(nets):
        ids = np.arange(start[n], start[n + 1])
        d = space.block(a, a)
        ii, jj = np.nonzero(np.triu(d < 2.0 ** (-n + 2), k=1))
        edges += [(int(ids[i]), int(ids[j])) for i, j in zip(ii, jj)]
        kinds += ["horizontal"] * ii.size
        if n + 1 < len(nets):
            below = np.arange(start[n + 1], start[n + 2])
            d = space.block(a, nets[n + 1])
            ii, jj = np.nonzero(d < 2.0**-n + 2.0 ** -(n + 1))
            edges += [(int(ids[i]), int(below[j])) for i, j in zip(ii, jj)]
            kinds += ["vertical"] * ii.size
    edges_arr = np.array(edges, dtype=int).reshape(-1, 2)

    nv = vz.size
    if edges_arr.size:
        unit = csr_matrix((np.ones(2 * len(edges)), (np.r_[edges_arr[:, 0], edges_arr[:, 1]],
                                                      np.r_[edges_arr[:, 1], edges_arr[:, 0]])),
                          shape=(nv, nv))
        hops = shortest_path(unit, unweighted=True, directed=False, indices=0)
    else:
        hops = np.zeros(nv)
    if not np.all(np.isfinite(hops)):
        raise Disconnected("filling graph is not connected")
    d_x = hops.astype(int)

    sp_nu = nu
    mu_hat = np.empty(nv)
    for k, (z, n) in enumerate(zip(vz, vn)):
        inside = space.distances_from(int(z)) < 2.0 ** -int(n)
        mu_hat[k] = math.exp(-params.beta * n) * float(sp_nu[inside].sum())
    lengths = np.array([edge_integral(d_x[i], d_x[j]) for i, j in edges_arr]) if edges else np.zeros(0)
    density = (mu_hat[edges_arr[:, 0]] + mu_hat[edges_arr[:, 1]]) if edges else np.zeros(0)
    return HyperbolicFilling(space, nu, params, scale, nets, vz, vn, index, edges_arr, kinds,
                             d_x, mu_hat, lengths, density)


def uniformized_edge_length(filling: HyperbolicFilling, edge: int, eps: float | None = None) -> float:
    i, j = filling.edges[edge]
    e = filling.params.epsilon if eps is None else eps
    return edge_integral(filling.d_x[i], filling.d_x[j], eps=e)


def d_epsilon(filling: HyperbolicFilling, v, w) -> float:
    d = float(filling.vertex_distances[filling.vertex(v), filling.vertex(w)])
    if not math.isfinite(d):
        raise Disconnected(f"no path between {v} and {w}")
    return d


@dataclass
class BoundaryRay:
    point: int
    ray: list[tuple[int, int]]
    truncation: float

    @property
    def end(self) -> tuple[int, int]:
        return self.ray[-1]


def boundary_embed(filling: HyperbolicFilling, z: int) -> BoundaryRay:
    """Nearest level-n net point to z for n = 0..N (ties -> smallest index)."""
    ray = []
    for n, a in enumerate(filling.nets):
        arr = np.asarray(a, dtype=int)
        d = filling.space.distances_from(int(z), arr)
        best = np.flatnonzero(d == d.min())
        ray.append((int(arr[best].min()), n))
    return BoundaryRay(int(z), ray, truncation_bound(filling.params.levels))


# ---------------------------------------------------------------------------
# lifted measure


def _midpoint_distances(filling: HyperbolicFilling, center: int, m: int) -> np.ndarray:
    """(n_edges, m) d_epsilon from a vertex to the midpoints of each edge's m segments."""
    dv = filling.vertex_distances[center]
    out = np.empty((filling.n_edges, m))
    t = (np.arange(m) + 0.5) / m
    for e, (i, j) in enumerate(filling.edges):
        a, b = filling.d_x[i], filling.d_x[j]
        for s in range(m):
            out[e, s] = min(dv[i] + edge_integral(a, b, 0.0, t[s]), dv[j] + edge_integral(a, b, t[s], 1.0))
    return out


def mu_beta_ball(filling: HyperbolicFilling, center, radius: float, m: int = 8) -> float:
    """mu_beta(B(center, radius)) with each edge cut into m equal segments.

    A segment counts when its midpoint lies in the ball; an edge contributes
    density * (count / m), so a fully covered edge contributes its density
    exactly and a huge ball reproduces ``total_measure`` bit for bit.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    if radius <= 0 or filling.n_edges == 0:
        return 0.0
    dist = _midpoint_distances(filling, filling.vertex(center), m)
    counts = (dist < radius).sum(axis=1)
    return math.fsum((filling.density * (counts / m)).tolist())


# ---------------------------------------------------------------------------
# verification


@dataclass
class FillingSamples:
    vertex_radii: list[tuple[tuple[int, int], float]]
    boundary_points: list[int]
    boundary_radii: list[float]
    pairs: list[tuple[int, int]]
    m: int = 8


def default_samples(filling: HyperbolicFilling, max_level: int = 3,
                    factors: Sequence[float] = (0.25, 0.5, 1.0), n_radii: int = 5,
                    m: int = 8) -> FillingSamples:
    """Doubling balls B((z, n), f 2^-n) for n <= max_level, boundary balls at
    diam 2^-k down to twice the truncation length, and all boundary pairs.

    Doubling radii follow the vertex scale so every small ball reaches the
    midpoints of the incident segments.
    """
    vr = [((int(z), int(n)), f * 2.0 ** -int(n))
          for z, n in zip(filling.vz, filling.vn) if n <= max_level for f in factors]
    diam = float(filling.space.diameter)
    pts = list(range(filling.space.n))
    pairs = [(a, b) for a in pts for b in pts if a < b]
    tail = truncation_bound(filling.params.levels)
    radii = [diam * 2.0**-k for k in range(n_radii) if diam * 2.0**-k >= 2 * tail]
    return FillingSamples(vr, pts, radii, pairs, m)


@dataclass
class FillingReport:
    sigma: float
    doubling: float
    doubling_witness: tuple | None
    codim_min: float
    codim_max: float
    bilip_min: float
    bilip_max: float
    bilip_L: float
    truncation: float
    rows: list[dict] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.rows


def verify_filling(filling: HyperbolicFilling, samples: FillingSamples | None = None) -> FillingReport:
    """Sampled doubling, codimension-sigma and bi-Lipschitz constants."""
    sigma = filling.params.sigma
    tail = truncation_bound(filling.params.levels)
    if filling.n_vertices == 1:
        return FillingReport(sigma, math.nan, None, math.nan, math.nan, math.nan, math.nan, math.nan, tail)
    samples = default_samples(filling) if samples is None else samples
    rows: list[dict] = []
    m = samples.m

    def measure(dist, r):
        return math.fsum((filling.density * ((dist < r).sum(axis=1) / m)).tolist())

    dbl, witness = 1.0, None
    cache: dict = {}
    for key, r in samples.vertex_radii:
        v = filling.vertex(key)
        if v not in cache:
            cache[v] = _midpoint_distances(filling, v, m)
        small, big = measure(cache[v], r), measure(cache[v], 2 * r)
        ratio = big / small if small > 0 else math.inf
        rows.append({"check": "doubling", "vertex": f"{key[0]}:{key[1]}", "r": r, "value": ratio})
        if ratio > dbl:
            dbl, witness = ratio, (key, r)

    # boundary balls are centred at the leaf of z: tail plus the distance from its ray end
    lo, hi = math.inf, 0.0
    for z in samples.boundary_points:
        end = boundary_embed(filling, z).end
        dist = tail + _midpoint_distances(filling, filling.vertex(end), m)
        dz = filling.space.distances_from(int(z))
        for r in samples.boundary_radii:
            mu_b = measure(dist, r)
            nu_b = float(filling.nu[dz < r].sum())
            # balls not much larger than the truncated leaf only see the truncation
            if mu_b == 0 or r < 2 * tail:
                rows.append({"check": "codimension-unresolved", "vertex": str(z), "r": r, "value": math.nan})
                continue
            ratio = r**sigma * nu_b / mu_b
            rows.append({"check": "codimension", "vertex": str(z), "r": r, "value": ratio})
            lo, hi = min(lo, ratio), max(hi, ratio)

    blo, bhi = math.inf, 0.0
    for a, b in samples.pairs:
        ea, eb = boundary_embed(filling, a).end, boundary_embed(filling, b).end
        dd = d_epsilon(filling, ea, eb)
        dz = filling.space.distance(a, b)
        lower, upper = dd / dz, (dd + 2 * tail) / dz
        rows.append({"check": "bilipschitz", "vertex": f"{a}-{b}", "r": dz, "value": lower, "upper": upper})
        blo, bhi = min(blo, lower), max(bhi, upper)
    big_l = max(bhi, 1.0 / blo) if blo > 0 else math.inf
    return FillingReport(sigma, dbl, witness, lo, hi, blo, bhi, big_l, tail, rows)


# ---------------------------------------------------------------------------
# composed trace


@dataclass
class SubdividedFilling:
    """Segment midpoints of the filling plus one leaf per point of Z, as a finite metric space."""

    space: FiniteMetricMeasureSpace
    atoms: np.ndarray       # indices of the midpoint atoms in ``space``
    leaves: np.ndarray      # index in ``space`` of the leaf of each original point
    atom_weights: np.ndarray


def subdivide(filling: HyperbolicFilling, m: int = 2) -> SubdividedFilling:
    """Refine each edge at t = k/(2m); atoms at odd k carry mass density/m (zero-mass ones dropped).

    Each original point hangs as a leaf of length 2^-N/log 2 from its level-N
    ray vertex, so all distances are shortest paths in one weighted graph.
    """
    nv = filling.n_vertices
    rows, cols, vals = [], [], []
    atom_nodes, atom_w = [], []
    node = nv
    ts = np.arange(2 * m + 1) / (2 * m)
    for e, (i, j) in enumerate(filling.edges):
        a, b = filling.d_x[i], filling.d_x[j]
        ids = [int(i)] + list(range(node, node + 2 * m - 1)) + [int(j)]
        node += 2 * m - 1
        for k in range(2 * m):
            rows.append(ids[k])
            cols.append(ids[k + 1])
            vals.append(edge_integral(a, b, ts[k], ts[k + 1]))
        w = filling.density[e] / m
        if w > 0:
            for k in range(1, 2 * m, 2):
                atom_nodes.append(ids[k])
                atom_w.append(w)
    tail = truncation_bound(filling.params.levels)
    leaf_nodes = []
    for z in range(filling.space.n):
        end = filling.vertex(boundary_embed(filling, z).end)
        rows.append(end)
        cols.append(node)
        vals.append(tail)
        leaf_nodes.append(node)
        node += 1
    g = csr_matrix((np.r_[vals, vals], (np.r_[rows, cols], np.r_[cols, rows])), shape=(node, node))
    keep = np.array(atom_nodes + leaf_nodes, dtype=int)
    dist = dijkstra(g, directed=False, indices=keep)[:, keep]
    dist = np.minimum(dist, dist.T)
    np.fill_diagonal(dist, 0.0)
    na = len(atom_nodes)
    weights = np.r_[np.asarray(atom_w), np.ones(filling.space.n)]
    sp = FiniteMetricMeasureSpace(weights, metric="matrix", matrix=dist, validate=False)
    return SubdividedFilling(sp, np.arange(na), np.arange(na, na + filling.space.n), np.asarray(atom_w))


@dataclass
class ComposedTraceResult:
    values: np.ndarray
    beta: float
    sigma: float
    filling: HyperbolicFilling
    extension_values: np.ndarray
    trace_stage: TraceResult
    stage_params: BesovParams

    @property
    def residual_root(self) -> np.ndarray:
        return self.trace_stage.residual_root


def saturation_level(space: FiniteMetricMeasureSpace) -> int:
    """First level whose 2^-n-separated net must be all of the (rescaled) space."""
    d = space.distance_matrix
    if space.n < 2:
        return 0
    dmin = float(d[~np.eye(space.n, dtype=bool)].min())
    if space.diameter >= 1:
        dmin *= 0.5 / space.diameter
    n = 0
    while 2.0**-n > dmin:
        n += 1
    return n


def composed_beta(params: BesovParams) -> float:
    """beta = eps * p (1 - alpha) / 2, i.e. sigma = beta/eps = p (1 - alpha)/2."""
    return EPSILON * params.p * (1 - params.alpha) / 2


def composed_trace(domain: DomainWithBoundary, u, params: BesovParams, levels: int | None = None,
                   m: int = 2, scales: Sequence[float] | None = None) -> ComposedTraceResult:
    """Trace of u on the domain boundary through the filling of the closure.

    Stage 1 fills the closure (all points, measure nu of the domain interior,
    zero on the boundary).  Stage 2 extends u from Z into the subdivided
    filling with the Whitney extension, Z acting as the boundary.  Stage 3
    traces that extension onto the designated boundary with codimension
    sigma + theta and smoothness alpha + sigma/p.  By default the filling
    runs one level past the saturation level of the closure.
    """
    a, p, th = params.alpha, params.p, params.theta
    if not th / p < a < 1:
        raise ParameterWindowError(f"composed trace needs theta/p < alpha < 1, got {a} vs {th / p}")
    u = np.asarray(u, dtype=float)
    beta = composed_beta(params)
    if levels is None:
        levels = saturation_level(domain.space) + 1
    fp = FillingParams(levels, beta, base=int(domain.interior[0]))
    nu = domain.measure_vector("mu")
    filling = build_filling(domain.space, fp, nu=nu)
    sigma = fp.sigma
    sub = subdivide(filling, m)
    atoms = sub.atoms

    # stage 2: Z (the interior of the original domain) as boundary of the filling
    z_leaves = sub.leaves[domain.interior]
    keep2 = np.r_[atoms, z_leaves]
    sp2 = sub.space.subspace(keep2, np.r_[sub.atom_weights, domain.mu])
    dom2 = DomainWithBoundary(sp2, np.arange(atoms.size, keep2.size))
    ext = whitney_extension(dom2, u).values

    # stage 3: the designated boundary as boundary of the filling
    b_leaves = sub.leaves[domain.boundary]
    keep3 = np.r_[atoms, b_leaves]
    sp3 = sub.space.subspace(keep3, np.r_[sub.atom_weights, domain.nu])
    dom3 = DomainWithBoundary(sp3, np.arange(atoms.size, keep3.size))
    stage = BesovParams(a + sigma / p, p, params.q, sigma + th)
    tr = trace(dom3, ext, stage, scales)
    return ComposedTraceResult(tr.values, beta, sigma, filling, ext, tr, stage)
