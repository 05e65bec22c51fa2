"""Tent-bump partitions of unity subordinate to a finite ball collection."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Ball, FiniteMetricMeasureSpace

SUM_TOL = 1e-9


class UncoveredPoint(ValueError):
    """Raised when a point lies outside every doubled ball of a partition."""


def bump(distance, radius: float):
    """Tent profile clamp(2 - d/r, 0, 1): 1 on B(c, r), 0 off B(c, 2r)."""
    return np.clip(2.0 - np.asarray(distance, dtype=float) / radius, 0.0, 1.0)


def bump_at(space: FiniteMetricMeasureSpace, ball: Ball, x: int) -> float:
    return float(bump(space.distance(ball.center, x), ball.radius))


class PartitionOfUnity:
    """phi_B = psi_B / sum psi over the balls ``(centers[k], radii[k])``.

    The sum of bumps is at least 1 on the union of the undilated balls, so the
    normalisation is safe there; evaluation where every bump vanishes raises
    ``UncoveredPoint``.
    """

    def __init__(self, space: FiniteMetricMeasureSpace, centers: Sequence[int], radii: Sequence[float]):
        self.space = space
        self.centers = np.asarray(centers, dtype=int)
        self.radii = np.asarray(radii, dtype=float)
        if self.centers.shape != self.radii.shape:
            raise ValueError("centers and radii disagree in length")
        if np.any(self.radii <= 0):
            raise ValueError("ball radii must be positive")

    @classmethod
    def from_cover(cls, space, cover) -> "PartitionOfUnity":
        return cls(space, cover.centers, cover.radii)

    def __len__(self) -> int:
        return self.centers.size

    @property
    def balls(self) -> list[Ball]:
        return [Ball(int(c), float(r)) for c, r in zip(self.centers, self.radii)]

    def distances(self, points: Sequence[int]) -> np.ndarray:
        """(len(points), n_balls) distances from points to ball centers."""
        return self.space.block(np.asarray(points, dtype=int), self.centers)

    def bumps(self, points: Sequence[int]) -> np.ndarray:
        return bump(self.distances(points), self.radii[None, :])

    def weights(self, points: Sequence[int]) -> np.ndarray:
        """Matrix of phi_B(x), one row per point."""
        pts = np.asarray(points, dtype=int)
        psi = self.bumps(pts)
        s = psi.sum(axis=1)
        if np.any(s == 0):
            raise UncoveredPoint(f"point {int(pts[np.argmax(s == 0)])} lies outside every 2B")
        return psi / s[:, None]

    def combine(self, coefficients: Sequence[float], points: Sequence[int]) -> np.ndarray:
        """sum_B c_B phi_B at each point."""
        return self.weights(points) @ np.asarray(coefficients, dtype=float)


def partition_evaluate(partition: PartitionOfUnity, x: int) -> dict[int, float]:
    """Nonzero weights phi_B(x), keyed by ball position in the partition."""
    row = partition.weights([x])[0]
    return {int(k): float(row[k]) for k in np.flatnonzero(row > 0)}


@dataclass
class PartitionReport:
    max_sum_deviation: float
    sum_witness: int | None
    support_ok: bool
    support_witness: tuple | None
    lipschitz_max: float
    lipschitz_witness: tuple | None = None
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.max_sum_deviation <= SUM_TOL and self.support_ok


def verify_partition(partition: PartitionOfUnity, sample_points: Sequence[int],
                     phi: np.ndarray | None = None) -> PartitionReport:
    """Check sum-to-one, support in 2B, and the scaled Lipschitz quotients.

    The Lipschitz quotient of ball B over a sample pair (x, y) is
    |phi_B(x) - phi_B(y)| * r_B / d(x, y); the max over all pairs with at least
    one endpoint in the support of phi_B is reported.  ``phi`` may carry a
    precomputed weight matrix (used to inject faults in tests).
    """
    pts = np.asarray(sample_points, dtype=int)
    if phi is None:
        phi = partition.weights(pts)
    dev = np.abs(phi.sum(axis=1) - 1.0)
    k = int(np.argmax(dev)) if dev.size else 0
    max_dev = float(dev[k]) if dev.size else 0.0

    dist = partition.distances(pts)
    bad = np.argwhere((phi > 0) & (dist >= 2 * partition.radii[None, :]))
    support_witness = None
    if bad.size:
        support_witness = (int(pts[bad[0, 0]]), int(bad[0, 1]))

    dpp = partition.space.block(pts, pts)
    lip, lip_w = 0.0, None
    for b in range(len(partition)):
        col = phi[:, b]
        active = np.flatnonzero(col > 0)
        if active.size == 0:
            continue
        d = dpp[active]
        with np.errstate(divide="ignore", invalid="ignore"):
            quot = np.abs(col[active][:, None] - col[None, :]) / d
        quot[d == 0] = 0.0
        i, j = np.unravel_index(np.argmax(quot), quot.shape)
        val = float(quot[i, j]) * float(partition.radii[b])
        if val > lip:
            lip, lip_w = val, (int(pts[active[i]]), int(pts[j]), b)
    return PartitionReport(
        max_sum_deviation=max_dev,
        sum_witness=int(pts[k]) if max_dev > SUM_TOL else None,
        support_ok=support_witness is None,
        support_witness=support_witness,
        lipschitz_max=lip,
        lipschitz_witness=lip_w,
    )
