"""Besov energies on finite spaces: exact integral form, dyadic sums, envelopes.

The scale energy

    E(t) = sum_x w_x * mean_{y in B(x,t)} |u(y) - u(x)|^p

only changes when t crosses a pairwise distance.  With the distinct positive
distances b_1 < ... < b_K, E is constant on each (b_j, b_{j+1}] (open balls),
equal to 0 on (0, b_1] and to E_inf beyond b_K.  Every form below is computed
from that step function, so integrals and sups are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import BesovParams, FiniteMetricMeasureSpace


def scale_energy(space: FiniteMetricMeasureSpace, u, t: float, p: float) -> float:
    """E(t) by direct evaluation (the brute-force reference)."""
    if not t > 0:
        raise ValueError("t must be positive")
    u = np.asarray(u, dtype=float)
    w = space.weights
    d = space.distance_matrix
    total = 0.0
    for x in range(space.n):
        inside = d[x] < t
        wy = w[inside]
        total += w[x] * float(np.dot(wy, np.abs(u[inside] - u[x]) ** p) / wy.sum())
    return total


@dataclass
class EnergyCurve:
    """Step function E: ``values[j]`` holds on (b_j, b_{j+1}], with b_0 = 0, b_{K+1} = inf."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __call__(self, t):
        idx = np.searchsorted(self.breakpoints, t, side="left")
        return self.values[idx]

    @property
    def e_inf(self) -> float:
        return float(self.values[-1])

    @property
    def lower_edges(self) -> np.ndarray:
        return np.concatenate([[0.0], self.breakpoints])

    @property
    def upper_edges(self) -> np.ndarray:
        return np.concatenate([self.breakpoints, [np.inf]])


def energy_curve(space: FiniteMetricMeasureSpace, u, p: float) -> EnergyCurve:
    """Exact E(t) for all t > 0 by one sweep over the sorted pairwise distances.

    For each x, the term w_x * N_x / D_x (N_x = sum w_y |du|^p, D_x = sum w_y
    over the ball) jumps when a neighbour enters.  Sorting all (x, y) entries
    by distance, the jump sizes are accumulated in that fixed order; E right
    after b_j is the running total at the last entry with distance b_j.
    """
    u = np.asarray(u, dtype=float)
    n = space.n
    w = space.weights
    d = space.distance_matrix
    if n == 1:
        return EnergyCurve(np.zeros(0), np.zeros(1))
    order = np.argsort(d, axis=1, kind="stable")
    ds = np.take_along_axis(d, order, axis=1)
    wy = w[order]
    osc = np.abs(u[order] - u[:, None]) ** p
    num = np.cumsum(wy * osc, axis=1)
    den = np.cumsum(wy, axis=1)
    term = w[:, None] * num / den
    jump = np.diff(term, axis=1)  # entry k >= 1 of each row, the self entry carries term 0
    dist = ds[:, 1:].ravel()
    jump = jump.ravel()
    g = np.argsort(dist, kind="stable")
    dist, jump = dist[g], jump[g]
    run = np.cumsum(jump)
    bp = np.unique(dist)
    # index of the last occurrence of each distinct distance
    last = np.searchsorted(dist, bp, side="right") - 1
    values = np.concatenate([[0.0], run[last]])
    np.maximum(values, 0.0, out=values)
    return EnergyCurve(bp, values)


@dataclass
class EnergyReport:
    value: float
    form: str
    params: BesovParams
    k_range: tuple[int, int] | None = None
    table: list[dict] = field(default_factory=list)
    tail: float = 0.0

    @property
    def infinite(self) -> bool:
        return math.isinf(self.value)


def default_k_range(space: FiniteMetricMeasureSpace) -> tuple[int, int]:
    """[floor log2 dmin, ceil log2 diam + 1]; outside it E(2^k) is 0 below and E_inf above."""
    bp = space.breakpoints
    if bp.size == 0:
        return (0, 0)
    return (math.floor(math.log2(bp[0])), math.ceil(math.log2(bp[-1])) + 1)


def besov_energy_dyadic(space: FiniteMetricMeasureSpace, u, params: BesovParams,
                        k_range: tuple[int, int] | None = None,
                        curve: EnergyCurve | None = None) -> EnergyReport:
    """(sum_k 2^{-k alpha q} E(2^k)^{q/p})^{1/q}, or the sup form for q = inf.

    Scales above the window are summed in closed form using E = E_inf there.
    """
    a, p, q = params.alpha, params.p, params.q
    curve = energy_curve(space, u, p) if curve is None else curve
    dk = default_k_range(space)
    kmin, kmax = dk if k_range is None else k_range
    # explicit terms reach at least the default top so the tail is exactly E_inf
    ktop = max(kmax, dk[1])
    ks = np.arange(kmin, ktop + 1)
    e = curve(2.0 ** ks.astype(float))
    table = []
    if math.isinf(q):
        vals = 2.0 ** (-ks * a) * e ** (1 / p)
        tail = 2.0 ** (-(ktop + 1) * a) * curve.e_inf ** (1 / p)
        for k, ek, c in zip(ks, e, vals):
            table.append({"k": int(k), "E": float(ek), "contribution": float(c)})
        value = max(float(vals.max()) if vals.size else 0.0, tail)
        return EnergyReport(value, "sup", params, (int(kmin), int(ktop)), table, tail)
    contrib = 2.0 ** (-ks * a * q) * e ** (q / p)
    tail = curve.e_inf ** (q / p) * 2.0 ** (-(ktop + 1) * a * q) / (1 - 2.0 ** (-a * q))
    for k, ek, c in zip(ks, e, contrib):
        table.append({"k": int(k), "E": float(ek), "contribution": float(c)})
    value = (float(contrib.sum()) + tail) ** (1 / q)
    return EnergyReport(value, "dyadic", params, (int(kmin), int(ktop)), table, tail)


def _integral_pieces(curve: EnergyCurve, params: BesovParams):
    a, p, q = params.alpha, params.p, params.q
    s = a * q
    lo = curve.lower_edges[1:]
    hi = curve.upper_edges[1:]
    # interval (0, b_1] carries E = 0 and is skipped; the last piece is the tail
    hi_pow = np.where(np.isinf(hi), 0.0, hi ** -s)
    contrib = curve.values[1:] ** (q / p) * (lo**-s - hi_pow) / s
    return lo, hi, contrib


def besov_energy_integral(space: FiniteMetricMeasureSpace, u, params: BesovParams,
                          curve: EnergyCurve | None = None) -> EnergyReport:
    """Exact (int_0^inf E(t)^{q/p} t^{-alpha q - 1} dt)^{1/q}."""
    if math.isinf(params.q):
        raise ValueError("the integral form needs q < inf; use the dyadic sup form")
    curve = energy_curve(space, u, params.p) if curve is None else curve
    lo, hi, contrib = _integral_pieces(curve, params)
    table = [
        {"t_lo": float(l), "t_hi": float(h), "E": float(e), "contribution": float(c)}
        for l, h, e, c in zip(lo, hi, curve.values[1:], contrib)
    ]
    tail = float(contrib[-1]) if contrib.size else 0.0
    value = math.fsum(contrib) ** (1 / params.q)
    return EnergyReport(value, "integral", params, None, table, tail)


def lp_norm(weights, u, p: float) -> float:
    u = np.abs(np.asarray(u, dtype=float))
    if math.isinf(p):
        return float(u.max())
    return float(np.dot(weights, u**p)) ** (1 / p)


def inhomogeneous_norm(space: FiniteMetricMeasureSpace, u, params: BesovParams) -> float:
    """||u||_{L^p} + dyadic homogeneous energy."""
    return lp_norm(space.weights, u, params.p) + besov_energy_dyadic(space, u, params).value


@dataclass
class EnvelopeBracket:
    lower: float
    value: float
    upper: float
    k_range: tuple[int, int]

    @property
    def holds(self) -> bool:
        return self.lower <= self.value <= self.upper


def envelope_bracket(space: FiniteMetricMeasureSpace, u, params: BesovParams,
                     k_range: tuple[int, int] | None = None,
                     curve: EnergyCurve | None = None) -> EnvelopeBracket:
    """Exact lower/upper dyadic envelopes of the integral-form energy^q.

    On the block (2^{k-1}, 2^k] the weight integrates to c 2^{-k alpha q} with
    c = (2^{alpha q} - 1)/(alpha q), so bounding E by its inf/sup there
    brackets the integral.  Blocks below the smallest distance carry E = 0 and
    blocks above the window E = E_inf (closed-form geometric tail); a supplied
    ``k_range`` is widened to the default window so the bracket covers all of Z.
    """
    a, p, q = params.alpha, params.p, params.q
    if math.isinf(q):
        raise ValueError("envelope bracket needs q < inf")
    curve = energy_curve(space, u, p) if curve is None else curve
    dk = default_k_range(space)
    kmin, kmax = dk if k_range is None else (min(k_range[0], dk[0]), max(k_range[1], dk[1]))
    s = a * q
    # common refinement of the breakpoints and the block edges 2^k; every
    # piece carries one weight shared by lower, value and upper, so the
    # inequalities hold term by term and survive correctly rounded sums
    block_edges = 2.0 ** np.arange(kmin - 1, kmax + 1, dtype=float)
    bp = curve.breakpoints
    cuts = np.union1d(block_edges, bp[(bp > block_edges[0]) & (bp < block_edges[-1])])
    left, right = cuts[:-1], cuts[1:]
    w = (left**-s - right**-s) / s
    ev = curve(right) ** (q / p)
    block = np.searchsorted(block_edges, right, side="left")
    lo_b = np.full(block_edges.size, np.inf)
    hi_b = np.full(block_edges.size, -np.inf)
    np.minimum.at(lo_b, block, ev)
    np.maximum.at(hi_b, block, ev)
    # above 2^kmax (> diam) the energy is the constant E_inf
    tail = 2.0 ** (-kmax * s) / s * float(curve.e_inf ** (q / p))
    lows = (w * lo_b[block]).tolist() + [tail]
    vals = (w * ev).tolist() + [tail]
    ups = (w * hi_b[block]).tolist() + [tail]
    lower, value, upper = math.fsum(lows), math.fsum(vals), math.fsum(ups)
    return EnvelopeBracket(lower, value, upper, (kmin, kmax))


@dataclass
class SumFormLpCheck:
    lhs: float
    rhs: float
    ratio: float


def sum_form_lp_check(space: FiniteMetricMeasureSpace, u, params: BesovParams,
                      curve: EnergyCurve | None = None) -> SumFormLpCheck:
    """Compare energy^q with ||u||_p^q + sum_{k>=0} 2^{k alpha q} E(2^{-k})^{q/p}.

    Only the small scales enter the right side; the ratio lhs/rhs is the
    empirical comparison constant.
    """
    a, p, q = params.alpha, params.p, params.q
    curve = energy_curve(space, u, p) if curve is None else curve
    lhs = besov_energy_integral(space, u, params, curve).value ** q
    kmin = default_k_range(space)[0]
    ks = np.arange(0, max(-kmin, 0) + 1)
    small = float(np.sum(2.0 ** (ks * a * q) * curve(2.0 ** (-ks.astype(float))) ** (q / p)))
    rhs = lp_norm(space.weights, u, p) ** q + small
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return SumFormLpCheck(lhs, rhs, ratio)


@dataclass
class RearrangementCheck:
    lhs: float
    rhs_bound: float | None
    ratio: float
    holds: bool | None


def sum_rearrangement_check(a: float, b: float, c: Sequence[float], offset: int = 0) -> RearrangementCheck:
    """sum_i (sum_j a^{-|j-i|} c_j)^b against ((a+1)/(a-1))^b sum_j c_j^b.

    ``c`` is supported on indices offset, ..., offset + len(c) - 1.  The outer
    sum runs over all of Z: outside the support the inner sum is a geometric
    multiple of the edge value, so both tails are summed in closed form.  The
    bound follows from Young's inequality since sum_j a^{-|j|} = (a+1)/(a-1);
    it is asserted for b >= 1 and only the ratio is reported for b < 1.
    """
    if not a > 1 or not b > 0:
        raise ValueError("need a > 1 and b > 0")
    c = np.asarray(c, dtype=float)
    if np.any(c < 0):
        raise ValueError("c must be nonnegative")
    m = c.size
    if m == 0 or not np.any(c > 0):
        rhs = 0.0 if b >= 1 else None
        return RearrangementCheck(0.0, rhs, 0.0, True if b >= 1 else None)
    # both sides are b-homogeneous; work with c / max c so tiny inputs do not underflow
    scale = float(c.max())
    c = c / scale
    idx = np.arange(m)
    kernel = a ** (-np.abs(idx[:, None] - idx[None, :]).astype(float))
    inner = kernel @ c
    # i < 0: inner(i) = a^{i} * S_left, S_left = sum_j a^{-j} c_j; similarly to the right
    s_left = float(np.dot(a ** (-idx.astype(float)), c))
    s_right = float(np.dot(a ** (-(m - 1 - idx).astype(float)), c))
    tail = (s_left**b + s_right**b) / (a**b - 1)
    lhs_n = float(np.sum(inner**b)) + tail
    total_n = float(np.sum(c**b))
    bound_n = ((a + 1) / (a - 1)) ** b * total_n
    ratio = lhs_n / total_n
    lhs = lhs_n * scale**b
    if b >= 1:
        return RearrangementCheck(lhs, bound_n * scale**b, ratio, lhs_n <= bound_n * (1 + 1e-12))
    return RearrangementCheck(lhs, None, ratio, None)
