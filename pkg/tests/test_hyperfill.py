import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from besov_mms.core import BesovParams, FiniteMetricMeasureSpace
from besov_mms.examples import circle_net, interval_grid
from besov_mms.hyperfill import (EPSILON, FillingParams, boundary_embed, build_filling, composed_beta,
                                 composed_trace, d_epsilon, edge_integral, mu_beta_ball,
                                 truncation_bound, verify_filling)


@pytest.fixture(scope="module")
def circle():
    return build_filling(circle_net(16), FillingParams(4, EPSILON))


def pair_filling(beta=0.5):
    sp = FiniteMetricMeasureSpace(np.ones(2), coords=[0.0, 0.6])
    return build_filling(sp, FillingParams(1, beta))


def test_level_zero_single_vertex():
    f = build_filling(circle_net(8), FillingParams(0, 1.0))
    assert f.n_vertices == 1 and f.n_edges == 0
    assert f.total_measure == 0.0


def test_two_point_filling():
    f = pair_filling(0.5)
    assert f.n_vertices == 3 and f.n_edges == 3
    assert sorted(f.kinds) == ["horizontal", "vertical", "vertical"]
    assert f.scale == 1.0
    assert f.mu_hat[0] == 2.0
    assert np.all(f.mu_hat[1:] == math.exp(-0.5))
    assert f.d_x.tolist() == [0, 1, 1]


def test_edge_lengths():
    f = pair_filling()
    vertical = (1 - math.exp(-EPSILON)) / EPSILON
    horizontal = 2 * math.exp(-EPSILON) * (1 - math.exp(-EPSILON / 2)) / EPSILON
    for kind, length in zip(f.kinds, f.lengths):
        expect = vertical if kind == "vertical" else horizontal
        assert length == pytest.approx(expect, rel=1e-15)
    assert vertical == pytest.approx(0.721348, abs=1e-6)


@given(st.integers(0, 6), st.integers(0, 6), st.floats(0, 1), st.floats(0, 1))
@settings(max_examples=50, deadline=None)
def test_edge_integral_quadrature(a, b, t0, t1):
    if abs(a - b) > 1:
        b = a + 1
    t0, t1 = min(t0, t1), max(t0, t1)
    ref = quad(lambda t: math.exp(-EPSILON * min(a + t, b + 1 - t)), t0, t1, points=[(b + 1 - a) / 2])[0]
    assert edge_integral(a, b, t0, t1) == pytest.approx(ref, rel=1e-9, abs=1e-14)


def test_truncation_bound():
    assert truncation_bound(10) == pytest.approx(0.001409, abs=1e-6)


def test_boundary_ray(circle):
    ray = boundary_embed(circle, 1)
    assert [n for _, n in ray.ray] == list(range(5))
    assert ray.ray[0] == (0, 0)
    # level-4 net is all 16 points, so the ray ends at z itself
    assert ray.end == (1, 4)
    for z, n in ray.ray:
        d = circle.space.distances_from(1, np.asarray(circle.nets[n]))
        assert circle.space.distance(1, z) == d.min()


def test_d_epsilon_metric(circle):
    d = circle.vertex_distances
    assert np.allclose(d, d.T, rtol=0, atol=0)
    assert np.all(np.diag(d) == 0)
    n = d.shape[0]
    for k in range(n):
        assert np.all(d <= d[:, [k]] + d[[k], :] + 1e-12)
    assert d_epsilon(circle, (0, 0), (0, 0)) == 0.0


def test_mu_beta_total_exact(circle):
    for m in (1, 8, 64):
        assert mu_beta_ball(circle, 0, 1e9, m) == circle.total_measure
    assert mu_beta_ball(circle, 0, 0.0) == 0.0
    a, b = mu_beta_ball(circle, 0, 0.3, 64), mu_beta_ball(circle, 0, 0.3, 128)
    assert abs(a - b) < circle.total_measure / 64


def test_edge_rules_recomputed(circle):
    sp = circle.space
    want = set()
    for n, a in enumerate(circle.nets):
        for i, x in enumerate(a):
            for y in a[i + 1:]:
                if sp.distance(x, y) < 2.0 ** (2 - n):
                    want.add(((x, n), (y, n)))
            if n + 1 < len(circle.nets):
                for y in circle.nets[n + 1]:
                    if sp.distance(x, y) < 2.0**-n + 2.0 ** -(n + 1):
                        want.add(((x, n), (y, n + 1)))
    got = {((int(circle.vz[i]), int(circle.vn[i])), (int(circle.vz[j]), int(circle.vn[j])))
           for i, j in circle.edges}
    assert got == want


def test_nets_nested_and_separated(circle):
    sp = circle.space
    for n, (a, b) in enumerate(zip(circle.nets, circle.nets[1:])):
        assert b[: len(a)] == a
        m = np.asarray(b)
        d = sp.block(m, m)
        np.fill_diagonal(d, np.inf)
        assert np.all(d >= 2.0 ** -(n + 1))


def test_edge_length_bound(circle):
    for (i, j), length in zip(circle.edges, circle.lengths):
        n = min(circle.d_x[i], circle.d_x[j])
        assert length <= 2.0**-n / EPSILON + 1e-15


def test_sigma_and_empty_report():
    assert FillingParams(3, 0.5).sigma == 0.5 / math.log(2)
    rep = verify_filling(build_filling(circle_net(8), FillingParams(0, 1.0)))
    assert rep.empty and math.isnan(rep.doubling)


def test_verify_filling_circle(circle):
    rep = verify_filling(circle)
    assert rep.sigma == 1.0
    assert 1 <= rep.doubling < math.inf
    assert 0 < rep.codim_min <= rep.codim_max < math.inf
    assert 0 < rep.bilip_min <= rep.bilip_max < math.inf
    assert not any(r["check"] == "doubling" and not math.isfinite(r["value"]) for r in rep.rows)


def test_composed_constants_preserved():
    dom = interval_grid(16)
    params = BesovParams(0.75, 2.0, 2.0, 1.0)
    res = composed_trace(dom, np.full(16, 2.5), params)
    assert np.all(res.values == 2.5)
    assert res.beta == composed_beta(params) == pytest.approx(0.25 * math.log(2), rel=1e-15)
    assert res.sigma == pytest.approx(0.25, rel=1e-15)
