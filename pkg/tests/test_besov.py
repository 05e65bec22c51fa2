import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besov_mms.besov import (besov_energy_dyadic, besov_energy_integral, energy_curve,
                             envelope_bracket, inhomogeneous_norm, scale_energy, sum_form_lp_check,
                             sum_rearrangement_check)
from besov_mms.core import BesovParams, FiniteMetricMeasureSpace
from besov_mms.examples import two_point

P11 = BesovParams(0.5, 1.0, 1.0)


def line(xs, w=None):
    xs = np.asarray(xs, dtype=float)
    return FiniteMetricMeasureSpace(np.ones(xs.size) if w is None else w, coords=xs)


def grid16():
    return line(np.arange(16) / 16.0)


def test_scale_energy_examples():
    sp = two_point()
    u = np.array([0.0, 1.0])
    assert scale_energy(sp, u, 2.0, 1.0) == 1.0
    assert scale_energy(sp, u, 1.0, 1.0) == 0.0
    assert scale_energy(sp, np.full(2, 4.0), 5.0, 2.0) == 0.0


def test_two_point_oracles():
    sp, u = two_point(), np.array([0.0, 1.0])
    assert abs(besov_energy_integral(sp, u, P11).value - 2.0) <= 1e-12
    assert abs(besov_energy_dyadic(sp, u, P11).value - 1 / (math.sqrt(2) - 1)) <= 1e-12
    sup = besov_energy_dyadic(sp, u, BesovParams(0.5, 1.0, math.inf))
    assert abs(sup.value - 2**-0.5) <= 1e-12
    assert sup.form == "sup"
    assert abs(inhomogeneous_norm(sp, u, P11) - (1 + 1 / (math.sqrt(2) - 1))) <= 1e-12


def test_three_point_integral_oracle():
    # E = 0 on (0, 1/2], 1/3 + 1/2 on (1/2, 1], 1/3 + 1/3 + 2/3 above 1
    sp = line([0, 0.5, 1])
    u = np.array([0.0, 0.0, 1.0])
    exact = (5 / 6) * 2 * (math.sqrt(2) - 1) + (4 / 3) * 2
    assert abs(besov_energy_integral(sp, u, P11).value - exact) <= 1e-12
    assert exact == pytest.approx((5 * math.sqrt(2) + 3) / 3, abs=1e-14)


def test_constant_energy_zero():
    sp = grid16()
    c = np.full(16, 1.7)
    for params in [P11, BesovParams(0.3, 2, 2), BesovParams(0.6, 1.5, math.inf)]:
        assert besov_energy_dyadic(sp, c, params).value == 0.0
        if not math.isinf(params.q):
            assert besov_energy_integral(sp, c, params).value == 0.0
    br = envelope_bracket(sp, c, P11)
    assert (br.lower, br.value, br.upper) == (0.0, 0.0, 0.0)


def test_two_point_vanishing_energy_forces_equal_values():
    sp = two_point()
    for u in [np.array([0.0, 0.0]), np.array([0.0, 1e-9])]:
        e = besov_energy_integral(sp, u, P11).value
        assert (e == 0) == (u[0] == u[1])


def test_inhomogeneous_constant():
    sp = line([0, 0.2, 0.9], w=np.array([0.5, 1.0, 1.5]))
    c = 2.0
    assert inhomogeneous_norm(sp, np.full(3, c), BesovParams(0.5, 2, 2)) == pytest.approx(c * 3.0**0.5, rel=1e-15)
    assert inhomogeneous_norm(sp, np.zeros(3), BesovParams(0.5, 2, 2)) == 0.0


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=10), st.floats(0.01, 0.99), st.floats(1, 3))
@settings(max_examples=40, deadline=None)
def test_energy_curve_matches_brute_force(values, alpha, p):
    n = len(values)
    sp = line(np.arange(n) / n)
    u = np.array(values)
    curve = energy_curve(sp, u, p)
    for t in list(sp.breakpoints) + [1e-3, 0.55, 3.0]:
        assert curve(t) == pytest.approx(scale_energy(sp, u, t, p), rel=1e-12, abs=1e-13)


def _bracket_oracle(sp, u, params):
    """Envelopes from brute-force scale energies at every breakpoint of each block."""
    a, p, q = params.alpha, params.p, params.q
    s = a * q
    bp = sp.breakpoints
    lower = upper = 0.0
    kmin = math.floor(math.log2(bp[0]))
    kmax = math.ceil(math.log2(bp[-1])) + 1
    for k in range(kmin, kmax + 200):
        left, right = 2.0 ** (k - 1), 2.0**k
        ts = [t for t in bp if left < t <= right] + [right]
        vals = [scale_energy(sp, u, t, p) ** (q / p) for t in ts]
        w = (left**-s - right**-s) / s
        lower += w * min(vals)
        upper += w * max(vals)
    return lower, upper


def test_envelope_two_point_exact():
    br = envelope_bracket(two_point(), np.array([0.0, 1.0]), P11)
    assert (br.lower, br.value, br.upper) == (2.0, 2.0, 2.0)


def test_envelope_random_16_grid_against_oracle():
    rng = np.random.default_rng(0)
    sp = grid16()
    params = BesovParams(0.4, 2.0, 1.5)
    frozen = []
    for _ in range(5):
        u = rng.normal(size=16)
        br = envelope_bracket(sp, u, params)
        lo, hi = _bracket_oracle(sp, u, params)
        assert br.lower == pytest.approx(lo, rel=1e-9)
        assert br.upper == pytest.approx(hi, rel=1e-9)
        assert br.lower <= br.value <= br.upper
        frozen.append((br.lower, br.value, br.upper))
    assert frozen[0] == pytest.approx((73.9545664926049, 75.48995447729793, 77.82447537085493), rel=1e-12)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=12), st.floats(0.05, 0.95),
       st.floats(1, 4), st.floats(1, 4), st.floats(-4, 4))
@settings(max_examples=60, deadline=None)
def test_homogeneity_and_bracket(values, alpha, p, q, lam):
    n = len(values)
    sp = line(np.arange(n) / n)
    u = np.array(values)
    params = BesovParams(alpha, p, q)
    e = besov_energy_dyadic(sp, u, params).value
    assert besov_energy_dyadic(sp, lam * u, params).value == pytest.approx(abs(lam) * e, rel=1e-9, abs=1e-12)
    br = envelope_bracket(sp, u, params)
    assert br.holds


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.lists(st.floats(-3, 3), min_size=4, max_size=4),
       st.floats(0.05, 0.95), st.floats(1, 3), st.floats(1, 3))
@settings(max_examples=60, deadline=None)
def test_triangle_inequality(u, v, alpha, p, q):
    sp = line([0, 0.1, 0.35, 0.8])
    params = BesovParams(alpha, p, q)
    u, v = np.array(u), np.array(v)
    for energy in (besov_energy_dyadic, besov_energy_integral):
        lhs = energy(sp, u + v, params).value
        assert lhs <= energy(sp, u, params).value + energy(sp, v, params).value + 1e-9


def test_dyadic_integral_ratio_two_point():
    sp, u = two_point(), np.array([0.0, 1.0])
    ratio = besov_energy_dyadic(sp, u, P11).value / besov_energy_integral(sp, u, P11).value
    assert ratio == pytest.approx(1 / (2 * (math.sqrt(2) - 1)), abs=1e-12)


def test_sum_form_lp_check_two_point():
    chk = sum_form_lp_check(two_point(), np.array([0.0, 1.0]), P11)
    # small scales t = 2^-k, k >= 0 never see the other atom: rhs is the L^1 norm
    assert chk.rhs == 1.0 and chk.lhs == 2.0 and chk.ratio == 2.0


def test_rearrangement_examples():
    assert sum_rearrangement_check(2, 1, [0, 0, 0]).lhs == 0.0
    spike = sum_rearrangement_check(2, 1, [1.0])
    assert spike.lhs == pytest.approx(3.0, abs=1e-15) and spike.rhs_bound == 3.0 and spike.holds
    low = sum_rearrangement_check(2, 0.5, [1.0, 2.0])
    assert low.rhs_bound is None and low.holds is None


def _rearrangement_oracle(a, b, c, pad=200):
    """Direct evaluation over a wide index window."""
    m = len(c)
    idx = np.arange(-pad, m + pad)
    cj = np.arange(m)
    inner = (a ** (-np.abs(idx[:, None] - cj[None, :]).astype(float))) @ np.asarray(c)
    return float(np.sum(inner**b))


@given(st.lists(st.floats(0, 10), min_size=1, max_size=15), st.sampled_from([1.5, 2.0, 4.0]),
       st.sampled_from([0.5, 1.0, 2.0, 3.0]))
@settings(max_examples=80, deadline=None)
def test_rearrangement_matches_direct_sum(c, a, b):
    chk = sum_rearrangement_check(a, b, c)
    assert chk.lhs == pytest.approx(_rearrangement_oracle(a, b, c), rel=1e-9, abs=1e-12)
    if b >= 1:
        assert chk.holds
