"""Trace and extension operators between a domain and its boundary.

Functions on the interior are arrays aligned with ``domain.interior``; boundary
data are aligned with ``domain.boundary``.  Every operator here produces convex
combinations (means, partition-of-unity sums); results are clipped to the hull
of the combined values so constants are reproduced bit-exactly and rounding
never leaves the hull.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .besov import besov_energy_dyadic, besov_energy_integral, lp_norm
from .core import BesovParams, DomainWithBoundary
from .nets import WhitneyCover, maximal_separated_net, whitney_cover
from .partition import PartitionOfUnity, UncoveredPoint


class ScaleTooFine(ValueError):
    """Raised when no boundary net ball at the requested scale meets the interior."""


class ParameterWindowError(ValueError):
    pass


def _hull_mean(weights: np.ndarray, values: np.ndarray) -> float:
    m = float(np.dot(weights, values) / weights.sum())
    return min(max(m, float(values.min())), float(values.max()))


def _hull_combine(phi: np.ndarray, coef: np.ndarray) -> np.ndarray:
    """Rows of phi @ coef, clipped to the range of the coefficients each row uses."""
    out = phi @ coef
    active = phi > 0
    lo = np.where(active, coef[None, :], np.inf).min(axis=1)
    hi = np.where(active, coef[None, :], -np.inf).max(axis=1)
    return np.clip(out, lo, hi)


def check_trace_window(params: BesovParams) -> float:
    s = params.alpha - params.theta / params.p
    if not 0 < s < 1:
        raise ParameterWindowError(
            f"trace theorem needs 0 < alpha - theta/p < 1, got {s:.6g}")
    return s


def check_extension_window(alpha_b: float, params: BesovParams) -> float:
    s = alpha_b + params.theta / params.p
    if not (0 < alpha_b and s < 1):
        raise ParameterWindowError(
            f"extension theorem needs alpha > 0 and alpha + theta/p < 1, got {alpha_b:.6g}, {s:.6g}")
    return s


# ---------------------------------------------------------------------------
# trace


@dataclass
class TraceStep:
    r: float
    values: np.ndarray
    net: list[int]
    active: list[int]
    averages: np.ndarray


def trace_at_scale(domain: DomainWithBoundary, u, r: float) -> TraceStep:
    """T_r u on the boundary: partition-of-unity blend of mu-averages over net balls.

    The net is a maximal r-separated subset of the boundary seeded at its
    smallest index.  Net balls missing the interior are dropped.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    u = np.asarray(u, dtype=float)
    space = domain.space
    net = maximal_separated_net(space, r, int(domain.boundary[0]), among=domain.boundary)
    active, avgs = [], []
    for c in net.members:
        inside = space.distances_from(c, domain.interior) < r
        if inside.any():
            active.append(c)
            avgs.append(_hull_mean(domain.mu[inside], u[inside]))
    if not active:
        raise ScaleTooFine(f"no boundary ball of radius {r} meets the interior")
    avgs = np.asarray(avgs)
    pou = PartitionOfUnity(space, active, np.full(len(active), r))
    try:
        phi = pou.weights(domain.boundary)
    except UncoveredPoint as exc:
        raise ScaleTooFine(f"scale {r}: {exc}") from exc
    return TraceStep(float(r), _hull_combine(phi, avgs), net.members, active, avgs)


def default_trace_scales(domain: DomainWithBoundary) -> list[float]:
    """diam(boundary) 2^-k down to four times the smallest interior-boundary gap."""
    top = domain.boundary_diameter or domain.space.diameter
    floor = 4 * domain.min_gap
    scales = [top]
    while scales[-1] / 2 >= floor:
        scales.append(scales[-1] / 2)
    return scales


@dataclass
class TraceResult:
    values: np.ndarray
    scales: list[float]
    steps: list[TraceStep]
    cauchy_diffs: np.ndarray
    cauchy_ratios: np.ndarray
    decay_slope: float
    residuals: np.ndarray  # (n_scales, n_boundary) mean |u - Tu(z)|^p over B(z, r_k) cap Omega
    exponent: float
    p: float

    @property
    def residual(self) -> np.ndarray:
        """Residual per boundary point at the finest scale."""
        return self.residuals[-1]

    @property
    def residual_root(self) -> np.ndarray:
        """p-th root of the finest residual, in the units of u."""
        return self.residuals[-1] ** (1 / self.p)

    def to_json(self) -> dict:
        return {
            "values": self.values.tolist(),
            "scales": list(self.scales),
            "cauchy_diffs": self.cauchy_diffs.tolist(),
            "cauchy_ratios": self.cauchy_ratios.tolist(),
            "decay_slope": self.decay_slope,
            "residual": self.residual.tolist(),
            "exponent": self.exponent,
        }


def lp_boundary(domain: DomainWithBoundary, f, p: float) -> float:
    return lp_norm(domain.nu, f, p)


def lp_interior(domain: DomainWithBoundary, u, p: float) -> float:
    return lp_norm(domain.mu, u, p)


def lebesgue_residuals(domain: DomainWithBoundary, u, tu, scales: Sequence[float], p: float) -> np.ndarray:
    """mean over B(z, r) cap Omega of |u - tu(z)|^p, per scale and boundary point (nan if empty)."""
    u = np.asarray(u, dtype=float)
    d = domain.interior_boundary_distances.T  # (n_boundary, n_interior)
    out = np.full((len(scales), domain.n_boundary), np.nan)
    for k, r in enumerate(scales):
        for b in range(domain.n_boundary):
            inside = d[b] < r
            if inside.any():
                w = domain.mu[inside]
                out[k, b] = float(np.dot(w, np.abs(u[inside] - tu[b]) ** p) / w.sum())
    return out


def trace(domain: DomainWithBoundary, u, params: BesovParams,
          scales: Sequence[float] | None = None) -> TraceResult:
    """Trace at the finest admissible scale, with Cauchy and residual diagnostics."""
    s = check_trace_window(params)
    scales = default_trace_scales(domain) if scales is None else sorted(map(float, scales), reverse=True)
    if any(b >= a for a, b in zip(scales, scales[1:])):
        raise ValueError("scales must be strictly decreasing")
    steps = [trace_at_scale(domain, u, r) for r in scales]
    p = params.p
    diffs = np.array([lp_boundary(domain, a.values - b.values, p) for a, b in zip(steps, steps[1:])])
    ratios = diffs / np.asarray(scales[:-1]) ** s if diffs.size else np.zeros(0)
    pos = np.flatnonzero(diffs > 0)
    slope = math.nan
    if pos.size >= 2:
        slope = float(np.polyfit(pos.astype(float), np.log2(diffs[pos]), 1)[0])
    values = steps[-1].values
    res = lebesgue_residuals(domain, u, values, scales, p)
    return TraceResult(values, list(scales), steps, diffs, ratios, slope, res, s, p)


# ---------------------------------------------------------------------------
# fractional maximal function


def fractional_maximal(domain: DomainWithBoundary, f, theta: float, R: float) -> np.ndarray:
    """sup_{0<r<R} r^theta * mean_{B(z,r) cap Omega} |f| dmu, exactly, per boundary point.

    As r grows the ball gains interior atoms at their distances d_1 <= d_2 <= ...;
    on (d_j, d_{j+1}] the mean is fixed, so the sup over that interval is
    min(d_{j+1}, R)^theta times the mean.  Radii up to d_1 give an empty ball
    and contribute 0.
    """
    if not R > 0:
        raise ValueError("R must be positive")
    af = np.abs(np.asarray(f, dtype=float))
    d = domain.interior_boundary_distances.T
    out = np.zeros(domain.n_boundary)
    for b in range(domain.n_boundary):
        order = np.argsort(d[b], kind="stable")
        ds = d[b][order]
        w = domain.mu[order]
        mean = np.cumsum(w * af[order]) / np.cumsum(w)
        nxt = np.append(ds[1:], np.inf)
        ok = (ds < R) & (nxt > ds)
        if ok.any():
            out[b] = float(np.max(np.minimum(nxt[ok], R) ** theta * mean[ok]))
    return out


@dataclass
class Weak11Table:
    lambdas: np.ndarray
    level_measure: np.ndarray
    normalized: np.ndarray
    maximal: np.ndarray

    @property
    def max_normalized(self) -> float:
        return float(self.normalized.max()) if self.normalized.size else 0.0

    def rows(self) -> list[dict]:
        return [{"lambda": float(a), "nu_level": float(b), "normalized": float(c)}
                for a, b, c in zip(self.lambdas, self.level_measure, self.normalized)]


def weak11_check(domain: DomainWithBoundary, f, theta: float, R: float,
                 lambda_grid: Sequence[float]) -> Weak11Table:
    """lambda * nu{M f > lambda} / ||f||_{L^1(mu)} over the supplied lambdas."""
    l1 = lp_interior(domain, f, 1.0)
    if not l1 > 0:
        raise ValueError("f must have positive L^1 norm")
    m = fractional_maximal(domain, f, theta, R)
    lam = np.asarray(lambda_grid, dtype=float)
    level = np.array([float(domain.nu[m > x].sum()) for x in lam])
    return Weak11Table(lam, level, lam * level / l1, m)


def log_lambda_grid(maximal: np.ndarray, count: int = 20, spread: float = 100.0) -> np.ndarray:
    """``count`` log-spaced levels at the bin midpoints of [max(M)/spread, max(M)].

    No level sits on max(M) itself, where the strict level set would flip on
    rounding noise.
    """
    top = float(np.max(maximal))
    if not top > 0:
        raise ValueError("maximal function vanishes")
    return top * spread ** (-(np.arange(count)[::-1] + 0.5) / count)


# ---------------------------------------------------------------------------
# extensions


@dataclass
class ExtensionResult:
    values: np.ndarray
    cover: WhitneyCover
    coefficients: np.ndarray
    cutoff: np.ndarray | None = None


def shadow_coefficients(domain: DomainWithBoundary, f, cover: WhitneyCover) -> np.ndarray:
    """a_{i,j}: nu-mean of f over each shadow U_{i,j}."""
    f = np.asarray(f, dtype=float)
    col = {int(b): k for k, b in enumerate(domain.boundary)}
    coef = np.empty(len(cover))
    for k, ball in enumerate(cover.balls):
        cols = np.array([col[int(q)] for q in ball.shadow], dtype=int)
        coef[k] = _hull_mean(domain.nu[cols], f[cols])
    return coef


def whitney_extension(domain: DomainWithBoundary, f, cover: WhitneyCover | None = None) -> ExtensionResult:
    """sum_{i,j} a_{i,j} phi_{i,j} on the interior."""
    cover = whitney_cover(domain) if cover is None else cover
    coef = shadow_coefficients(domain, f, cover)
    pou = PartitionOfUnity.from_cover(domain.space, cover)
    values = _hull_combine(pou.weights(domain.interior), coef)
    return ExtensionResult(values, cover, coef)


def cutoff_profile(domain: DomainWithBoundary) -> np.ndarray:
    """1 within distance 1 of the boundary, 0 beyond 2, linear in between."""
    return np.clip(2.0 - domain.dist_to_boundary, 0.0, 1.0)


def cutoff_extension(domain: DomainWithBoundary, f, cover: WhitneyCover | None = None) -> ExtensionResult:
    ext = whitney_extension(domain, f, cover)
    phi = cutoff_profile(domain)
    return ExtensionResult(phi * ext.values, ext.cover, ext.coefficients, phi)


@dataclass
class RoundtripReport:
    deviation: np.ndarray
    max_deviation: float
    lp_deviation: float
    trace: TraceResult
    extension: ExtensionResult


def roundtrip_check(domain: DomainWithBoundary, f, params: BesovParams,
                    scales: Sequence[float] | None = None) -> RoundtripReport:
    """|T(E f) - f| on the boundary."""
    check_trace_window(params)
    f = np.asarray(f, dtype=float)
    ext = whitney_extension(domain, f)
    tr = trace(domain, ext.values, params, scales)
    dev = np.abs(tr.values - f)
    return RoundtripReport(dev, float(dev.max()), lp_boundary(domain, dev, params.p), tr, ext)


# ---------------------------------------------------------------------------
# operator norm ratios


def _energy(space, u, params: BesovParams) -> float:
    if math.isinf(params.q):
        return besov_energy_dyadic(space, u, params).value
    return besov_energy_integral(space, u, params).value


@dataclass
class NormRow:
    family: str
    function: str
    lhs: float
    rhs: float
    ratio: float | None

    @property
    def skipped(self) -> bool:
        return self.ratio is None


@dataclass
class NormReport:
    rows: list[NormRow] = field(default_factory=list)

    def family_max(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.rows:
            if r.ratio is not None:
                out[r.family] = max(out.get(r.family, 0.0), r.ratio)
        return out


def _ratio(lhs: float, rhs: float) -> float | None:
    if rhs == 0:
        return None if lhs == 0 else math.inf
    return lhs / rhs


def operator_norm_report(domain: DomainWithBoundary, params: BesovParams,
                         interior_functions: Mapping[str, Sequence[float]] | None = None,
                         boundary_functions: Mapping[str, Sequence[float]] | None = None,
                         scales: Sequence[float] | None = None) -> NormReport:
    """Ratios lhs/rhs of the trace and extension norm inequalities.

    Families:
      trace_energy     ||Tu||_{HB^{alpha - theta/p}(nu)} / ||u||_{HB^alpha(mu)}
      trace_lp         ||Tu||_{L^p(nu)} / (||u||_{L^p(mu)} + ||u||_{HB^alpha(mu)})
      extension_energy ||Ef||_{HB^{alpha_b + theta/p}(mu)} / ||f||_{HB^{alpha_b}(nu)}
      extension_lp     ||Ef||_{L^p(mu)} / ||f||_{L^p(nu)}
    with boundary smoothness alpha_b = alpha - theta/p.  0/0 ratios are skipped.
    """
    report = NormReport()
    p = params.p
    interior = domain.interior_space()
    bspace = domain.boundary_space()
    if interior_functions:
        s = check_trace_window(params)
        bparams = params.with_alpha(s)
        for name, u in sorted(interior_functions.items()):
            u = np.asarray(u, dtype=float)
            tu = trace(domain, u, params, scales).values
            eu = _energy(interior, u, params)
            lhs = _energy(bspace, tu, bparams)
            report.rows.append(NormRow("trace_energy", name, lhs, eu, _ratio(lhs, eu)))
            lhs = lp_boundary(domain, tu, p)
            rhs = lp_interior(domain, u, p) + eu
            report.rows.append(NormRow("trace_lp", name, lhs, rhs, _ratio(lhs, rhs)))
    if boundary_functions:
        alpha_b = params.alpha - params.theta / p
        s = check_extension_window(alpha_b, params)
        cover = whitney_cover(domain)
        for name, f in sorted(boundary_functions.items()):
            f = np.asarray(f, dtype=float)
            ef = whitney_extension(domain, f, cover).values
            lhs = _energy(interior, ef, params.with_alpha(s))
            rhs = _energy(bspace, f, params.with_alpha(alpha_b))
            report.rows.append(NormRow("extension_energy", name, lhs, rhs, _ratio(lhs, rhs)))
            lhs = lp_interior(domain, ef, p)
            rhs = lp_boundary(domain, f, p)
            report.rows.append(NormRow("extension_lp", name, lhs, rhs, _ratio(lhs, rhs)))
    return report
