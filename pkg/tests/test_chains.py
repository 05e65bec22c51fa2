import numpy as np
import pytest

from besov_mms.chains import (BallChain, PathTooSparse, boundary_chain, harnack_chain, mesh_step,
                              proximity_graph, verify_chain)
from besov_mms.core import DomainWithBoundary, FiniteMetricMeasureSpace
from besov_mms.examples import interval_grid, square_grid_bottom_edge


@pytest.fixture(scope="module")
def segment():
    """Eleven points spanning [0, 1] on a line, boundary point far above the middle."""
    pts = np.r_[np.c_[np.arange(11) / 10, np.zeros(11)], [[0.5, 5.0]]]
    sp = FiniteMetricMeasureSpace(np.ones(12), coords=pts)
    return DomainWithBoundary(sp, [11])


def quarter_points(dom):
    b = dom.boundary
    return int(b[len(b) // 4]), int(b[(3 * len(b)) // 4])


def chain_on(dom, a_est):
    z, w = quarter_points(dom)
    graph = proximity_graph(dom, mesh_step(dom))
    return boundary_chain(dom, z, w, graph, a_est=a_est)


def test_harnack_single_point(segment):
    ch = harnack_chain(segment, [4], 0.3)
    assert len(ch) == 1 and ch.centers == [4]


def test_harnack_segment(segment):
    ch = harnack_chain(segment, list(range(11)), 0.3, 2.0)
    assert len(ch) <= 8
    assert ch.centers == [0, 2, 4, 7, 9, 10]
    x = segment.space.coords[ch.centers, 0]
    # consecutive M^-1 dilates meet
    assert np.all(np.diff(x) < 2 * 0.3 / 2)


def test_harnack_gap(segment):
    with pytest.raises(PathTooSparse):
        harnack_chain(segment, [0, 5, 10], 0.3, 2.0)


def test_boundary_chain_same_point():
    dom = interval_grid(64)
    graph = proximity_graph(dom, mesh_step(dom))
    with pytest.raises(ValueError):
        boundary_chain(dom, 64, 64, graph)


@pytest.fixture(scope="module")
def square_chain():
    dom = square_grid_bottom_edge(256)
    return dom, chain_on(dom, 0.5)


def test_square_chain_exact_checks(square_chain):
    dom, ch = square_chain
    rep = verify_chain(ch, dom)
    assert rep.eight_dilate_inside and rep.half_balls_meet and rep.exact_passed
    assert rep.endpoints_ok
    assert rep.overlap_4 == 23


def test_radii_halve_per_level():
    dom = interval_grid(1024)
    ch = chain_on(dom, 1.0)
    by_level = {}
    for lv, r in zip(ch.levels, ch.radii):
        by_level.setdefault(lv, set()).add(r)
    assert all(len(v) == 1 for v in by_level.values())
    levels = sorted(by_level)
    assert levels == list(range(len(levels)))
    for a, b in zip(levels, levels[1:]):
        assert by_level[b].pop() * 2 == by_level[a].pop()


def test_fault_ball_on_boundary():
    dom = interval_grid(1024)
    ch = chain_on(dom, 1.0)
    centers = list(ch.centers)
    centers[3] = int(dom.boundary[0])
    bad = BallChain(centers, list(ch.radii), ch.z, ch.w, ch.split, ch.levels, ch.a_est, ch.tol, ch.leg_lengths)
    rep = verify_chain(bad, dom)
    assert not rep.eight_dilate_inside
    assert rep.eight_dilate_witness == (3, int(dom.boundary[0]))


def test_single_ball_chain():
    dom = interval_grid(64)
    rep = verify_chain(BallChain([10], [0.01]), dom)
    assert rep.half_balls_meet and rep.half_ball_witness is None
    assert rep.length == 1


def test_interval_constants_stable():
    reps = [verify_chain(chain_on(interval_grid(n), 1.0), interval_grid(n)) for n in (1024, 2048)]
    assert all(r.exact_passed and r.endpoints_ok for r in reps)
    assert reps[0].overlap_4 == reps[1].overlap_4 == 19
    assert reps[0].fitted_N == 54.5 and reps[1].fitted_N == 49.0
    for name in ("fitted_N", "decay_constant_z", "decay_constant_w"):
        a, b = getattr(reps[0], name), getattr(reps[1], name)
        assert abs(b - a) <= 0.25 * a, name
