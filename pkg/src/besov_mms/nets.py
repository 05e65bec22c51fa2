"""Separated nets, Whitney covers with boundary shadows, and their checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from .core import DomainWithBoundary, EmptyInterior, FiniteMetricMeasureSpace


@dataclass
class SeparatedNet:
    separation: float
    members: list[int]

    @property
    def seed(self) -> int:
        return self.members[0]


def maximal_separated_net(
    space: FiniteMetricMeasureSpace,
    separation: float,
    seed_index: int,
    among: Sequence[int] | None = None,
    initial: Sequence[int] = (),
) -> SeparatedNet:
    """Greedy maximal ``separation``-separated subset of ``among``.

    Scan order is ``initial`` (kept unconditionally, assumed separated), then
    the seed, then the remaining candidates by ascending index. A candidate is
    kept iff it lies at distance >= separation from every member so far.
    """
    if not separation > 0:
        raise ValueError("separation must be positive")
    cand = np.arange(space.n) if among is None else np.asarray(sorted(set(int(i) for i in among)), dtype=int)
    if cand.size == 0:
        raise ValueError("empty point set")
    pos = {int(c): k for k, c in enumerate(cand)}
    if int(seed_index) not in pos:
        raise ValueError(f"seed {seed_index} is not in the point set")
    order = [int(i) for i in initial]
    seen = set(order)
    for c in [int(seed_index)] + [int(c) for c in cand]:
        if c not in seen:
            order.append(c)
            seen.add(c)
    dmin = np.full(cand.size, np.inf)
    members: list[int] = []
    n_initial = len(initial)
    for k, c in enumerate(order):
        if k >= n_initial and dmin[pos[c]] < separation:
            continue
        members.append(c)
        dmin = np.minimum(dmin, space.distances_from(c, cand))
    return SeparatedNet(float(separation), members)


def dyadic_level(dist: float) -> int:
    """The level i with 2^(i+2) < dist <= 2^(i+3), computed without log rounding."""
    m, e = math.frexp(dist)  # dist = m * 2**e with 0.5 <= m < 1
    ceil_log2 = e - 1 if m == 0.5 else e
    return ceil_log2 - 3


@dataclass
class WhitneyBall:
    level: int
    index: int
    center: int
    radius: float
    anchor: int
    shadow: np.ndarray
    enlarged_shadow: np.ndarray

    def to_json(self) -> dict:
        return {
            "i": self.level,
            "j": self.index,
            "center": self.center,
            "radius": self.radius,
            "anchor": self.anchor,
            "shadow_indices": self.shadow.tolist(),
            "enlarged_shadow_indices": self.enlarged_shadow.tolist(),
        }


@dataclass
class WhitneyCover:
    balls: list[WhitneyBall]

    def __len__(self) -> int:
        return len(self.balls)

    @property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.balls], dtype=int)

    @property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls], dtype=float)

    @property
    def levels(self) -> np.ndarray:
        return np.array([b.level for b in self.balls], dtype=int)

    def to_json(self) -> list[dict]:
        return [b.to_json() for b in self.balls]


def whitney_cover(domain: DomainWithBoundary) -> WhitneyCover:
    """Layered Whitney cover: per dyadic layer, a maximal 2^(i-1)-net with r = dist/8."""
    if domain.n_interior == 0:
        raise EmptyInterior("Whitney cover of an empty interior")
    space = domain.space
    dist = domain.dist_to_boundary
    levels = np.array([dyadic_level(float(d)) for d in dist])
    anchors = domain.boundary[domain.nearest_boundary]
    row_of = {int(p): k for k, p in enumerate(domain.interior)}
    balls: list[WhitneyBall] = []
    for i in sorted(set(levels.tolist())):
        layer = domain.interior[levels == i]
        net = maximal_separated_net(space, 2.0 ** (i - 1), int(layer[0]), among=layer)
        for j, p in enumerate(net.members):
            k = row_of[p]
            r = float(dist[k]) / 8
            q = int(anchors[k])
            dq = space.distances_from(q, domain.boundary)
            balls.append(WhitneyBall(
                level=i, index=j, center=p, radius=r, anchor=q,
                shadow=domain.boundary[dq < r],
                enlarged_shadow=domain.boundary[dq < 32 * r],
            ))
    return WhitneyCover(balls)


@dataclass
class OverlapReport:
    max_overlap: int
    witness: int


def overlap_count(space: FiniteMetricMeasureSpace, centers: Sequence[int], radii: Sequence[float],
                  K: float = 1.0, ground: Sequence[int] | None = None) -> OverlapReport:
    """Max over ground points of the number of K-dilated balls containing the point."""
    if K < 1:
        raise ValueError("K must be at least 1")
    pts = np.arange(space.n) if ground is None else np.asarray(ground, dtype=int)
    counts = np.zeros(pts.size, dtype=int)
    for c, r in zip(centers, radii):
        counts += space.distances_from(int(c), pts) < K * r
    if counts.size == 0:
        return OverlapReport(0, -1)
    k = int(np.argmax(counts))
    return OverlapReport(int(counts[k]), int(pts[k]))


@dataclass
class CheckResult:
    name: str
    passed: bool
    witness: object = None
    value: float | None = None


@dataclass
class WhitneyReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def rows(self) -> list[dict]:
        return [asdict(c) for c in self.checks]


def verify_whitney(cover: WhitneyCover, domain: DomainWithBoundary) -> WhitneyReport:
    """Check coverage, 2-dilate overlap, level windows, radius rule and level separation."""
    report = WhitneyReport()
    space = domain.space
    if not cover.balls:
        vacuous = domain.n_interior == 0
        for name in ("coverage", "overlap", "levels", "radius_rule", "separation"):
            report.checks.append(CheckResult(name, vacuous))
        return report
    dist_of = dict(zip(domain.interior.tolist(), domain.dist_to_boundary.tolist()))

    covered = np.zeros(domain.n_interior, dtype=bool)
    for b in cover.balls:
        covered |= space.distances_from(b.center, domain.interior) < b.radius
    miss = np.flatnonzero(~covered)
    report.checks.append(CheckResult(
        "coverage", miss.size == 0, int(domain.interior[miss[0]]) if miss.size else None))

    ov = overlap_count(space, cover.centers, cover.radii, K=2.0, ground=domain.interior)
    report.checks.append(CheckResult("overlap", math.isfinite(ov.max_overlap), ov.witness, ov.max_overlap))

    bad = [b for b in cover.balls if not 2.0 ** (b.level - 1) < b.radius <= 2.0 ** b.level]
    report.checks.append(CheckResult("levels", not bad, bad[0].center if bad else None))

    bad = [b for b in cover.balls if b.center not in dist_of or b.radius != dist_of[b.center] / 8]
    report.checks.append(CheckResult("radius_rule", not bad, bad[0].center if bad else None))

    witness = None
    for lvl in sorted(set(cover.levels.tolist())):
        cs = [b.center for b in cover.balls if b.level == lvl]
        d = space.block(cs, cs)
        np.fill_diagonal(d, np.inf)
        if d.min() < 2.0 ** (lvl - 1):
            a, c = np.unravel_index(np.argmin(d), d.shape)
            witness = (cs[a], cs[c])
            break
    report.checks.append(CheckResult("separation", witness is None, witness))
    return report
