import numpy as np
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from specpack import packing as pk
from specpack import rayleigh as R
from specpack import spectrum
from specpack.mmspace import MetricMeasureSpace

SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@st.composite
def graphs(draw, max_points=14):
    P = draw(st.integers(2, max_points))
    parent = [draw(st.integers(0, i - 1)) for i in range(1, P)]
    edges = {(p, i) for i, p in zip(range(1, P), parent)}
    extra = draw(st.lists(st.tuples(st.integers(0, P - 1), st.integers(0, P - 1)), max_size=P))
    edges |= {tuple(sorted(e)) for e in extra if e[0] != e[1]}
    edges = sorted(edges)
    lengths = draw(st.lists(st.floats(0.1, 3.0), min_size=len(edges), max_size=len(edges)))
    mu = draw(st.lists(st.floats(0.1, 5.0), min_size=P, max_size=P))
    return MetricMeasureSpace(mu, edges=edges, lengths=lengths)


radii = st.floats(0.0, 6.0)


@SETTINGS
@given(graphs(), radii, radii, st.data())
def test_balls_grow_with_radius(s, r1, r2, data):
    x = data.draw(st.integers(0, s.n_points - 1))
    lo, hi = sorted((r1, r2))
    assert s.ball(x, lo).issubset(s.ball(x, hi))


@SETTINGS
@given(graphs(), radii, radii, st.data())
def test_enlarged_ball_inside_bigger_ball(s, r, t, data):
    x = data.draw(st.integers(0, s.n_points - 1))
    assert s.enlarge(s.ball(x, r), t).issubset(s.ball(x, r + t))


@SETTINGS
@given(graphs(), st.data())
def test_set_distance_symmetric_and_zero_iff_meet(s, data):
    idx = st.lists(st.integers(0, s.n_points - 1), min_size=1, max_size=s.n_points)
    A, B = s.pointset(data.draw(idx)), s.pointset(data.draw(idx))
    d = s.set_distance(A, B)
    assert d == s.set_distance(B, A)
    assert (d == 0) == (not A.isdisjoint(B))


@SETTINGS
@given(graphs(), st.floats(0.2, 5.0), st.integers(1, 3))
def test_scaling_multiplies_measure_and_distance(s, t, n):
    s = MetricMeasureSpace(s.measure, edges=s.edges, lengths=s.lengths, dimension=n)
    u = s.scale(t)
    np.testing.assert_allclose(u.distances, t * s.distances, rtol=1e-14)
    assert np.isclose(u.omega, t**n * s.omega, rtol=1e-13)


@SETTINGS
@given(graphs(), st.floats(0.1, 4.0), st.data())
def test_plateau_lipschitz_and_collar_bound(s, r, data):
    core = data.draw(st.lists(st.integers(0, s.n_points - 1), min_size=1, max_size=4))
    A = s.pointset(core)
    f = R.plateau(s, A, r)
    assert np.all((0 <= f.values) & (f.values <= 1))
    assert np.all(f.values[A.indices] == 1)
    assert R.lipschitz_violation(s, f) <= 1e-12
    assert f.rayleigh <= R.rayleigh_bound_lemma2(s, A, r, f)


@SETTINGS
@given(graphs(max_points=9), st.floats(0.1, 3.0), st.integers(1, 4))
def test_greedy_below_exhaustive(s, r, m):
    exact, _ = pk.xi(s, pk.CoverageMaximizer("exhaustive"), m, r)
    greedy, _ = pk.xi(s, pk.CoverageMaximizer("greedy"), m, r)
    assert greedy <= exact * (1 + 1e-12)
    assert greedy >= (1 - 1 / np.e) * exact - 1e-12


@SETTINGS
@given(graphs(), st.floats(0.1, 3.0))
def test_covering_estimate_dominates_lower_bound(s, r):
    assert s.covering_lower_bound(r) <= s.estimate_covering_constant(r)


@SETTINGS
@given(graphs(max_points=12))
def test_spectrum_nonnegative_with_zero_ground_state(s):
    lam = spectrum.space_spectrum(s, s.n_points).eigenvalues
    assert abs(lam[0]) <= 1e-9 * max(1.0, lam[-1])
    assert np.all(lam >= -1e-9 * max(1.0, lam[-1]))
    assert np.all(np.diff(lam) >= -1e-9 * max(1.0, lam[-1]))
