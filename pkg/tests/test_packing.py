import math

import numpy as np
import pytest

from specpack import domains
from specpack import packing as pk
from specpack.errors import ConstructionError, DomainError, HypothesisError
from specpack.mmspace import INF, MetricMeasureSpace

from .oracles import brute_xi

EXACT = pk.CoverageMaximizer("exhaustive")
GREEDY = pk.CoverageMaximizer("greedy", seed=3)


def small_spaces():
    rng = np.random.default_rng(11)
    out = [domains.path(7, neumann_mass=False), domains.cycle(9), domains.grid((3, 4), 0.5)]
    for P in (8, 10, 12):
        X = rng.random((P, 2))
        D = np.sqrt(((X[:, None] - X[None]) ** 2).sum(-1))
        out.append(MetricMeasureSpace(rng.uniform(0.5, 2.0, P), distance_matrix=D))
    return out


class TestXi:
    def test_path5_one_ball(self, path5):
        value, centers = pk.xi(path5, EXACT, 1, 1)
        assert value == 3 and centers[0] in {1, 2, 3}

    def test_path5_two_balls(self, path5):
        assert pk.xi(path5, EXACT, 2, 1)[0] == 5

    def test_m_beyond_points_is_total(self, path5):
        for strategy in (EXACT, GREEDY):
            assert pk.xi(path5, strategy, 9, 1)[0] == path5.omega

    @pytest.mark.parametrize("idx", range(6))
    def test_exhaustive_matches_brute_force(self, idx):
        s = small_spaces()[idx]
        D = s.distances
        rng = np.random.default_rng(idx)
        restriction = s.pointset(np.flatnonzero(rng.random(s.n_points) < 0.7))
        w = np.zeros(s.n_points)
        w[restriction.indices] = s.measure[restriction.indices]
        for r in (0.3 * D.max() / 4, D.max() / 4):
            for m in (1, 2, 3):
                got, centers = pk.xi(s, EXACT, m, r, restriction)
                assert got == pytest.approx(brute_xi(D, s.measure, w, m, r), rel=1e-12)
                covered = (D[centers] <= r * (1 + 1e-12)).any(axis=0)
                assert w[covered].sum() == pytest.approx(got, rel=1e-12)

    def test_greedy_never_exceeds_optimum_and_is_monotone(self):
        s = domains.point_cloud(60, seed=2, eps=0.3)
        vals = [pk.xi(s, GREEDY, m, 0.1)[0] for m in range(1, 8)]
        assert vals == sorted(vals)
        # greedy max coverage achieves at least 1 - 1/e of the optimum
        for m, v in zip(range(1, 3), vals):
            assert v >= (1 - 1 / math.e) * brute_xi(s.distances, s.measure, s.measure, m, 0.1) - 1e-12

    def test_argument_errors(self, path5):
        with pytest.raises(DomainError):
            pk.xi(path5, EXACT, 0, 1)
        with pytest.raises(DomainError):
            pk.xi(path5, EXACT, 1, 0)
        with pytest.raises(DomainError):
            pk.CoverageMaximizer("annealing")

    def test_auto_resolution(self):
        m = pk.CoverageMaximizer()
        assert m.resolve(12) == "exhaustive" and m.resolve(13) == "greedy"

    def test_exhaustive_limit(self):
        s = domains.path(40, neumann_mass=False)
        with pytest.raises(ConstructionError, match="limit"):
            pk.xi(s, pk.CoverageMaximizer("exhaustive", exhaustive_limit=100), 3, 0.5)


class TestLemma:
    def test_path5_large_alpha(self, path5):
        res = pk.lemma1_construct(path5, EXACT, 2, 1, strict=False)
        assert res.k == 1
        assert res.A.tolist() == [0, 1, 2]
        assert res.D.tolist() == [0, 1, 2, 3, 4]
        assert path5.set_distance(res.A, path5.difference(path5.all_points(), res.D)) == INF
        assert not all(c.passed for c in res.hypothesis)
        assert res.ok

    def test_path5_strict_rejects(self, path5):
        with pytest.raises(HypothesisError):
            pk.lemma1_construct(path5, EXACT, 2, 1)

    def test_path20(self, path20):
        res = pk.lemma1_construct(path20, EXACT, 5 / 3, 1, strict=False)
        assert len(res.A) >= 2
        assert res.D.measure <= 10
        rest = path20.difference(path20.all_points(), res.D)
        assert path20.set_distance(res.A, rest) >= 3

    def test_small_alpha_small_radius_one_ball(self, path20):
        res = pk.lemma1_construct(path20, EXACT, 0.5, 0.25, strict=False)
        assert res.k == 1 and res.A == path20.ball(res.centers[0], 0.25)
        assert res.ok

    def test_small_alpha_still_checks_postconditions(self, path20):
        # one ball suffices, but its 4r-thickening is too heavy for 2 C alpha
        with pytest.raises(ConstructionError) as info:
            pk.lemma1_construct(path20, EXACT, 0.5, 1, strict=False)
        assert info.value.condition == "mu(D) <= 2 C alpha"

    def test_strict_construction_uses_many_balls(self, path20):
        res = pk.lemma1_construct(path20, EXACT, 6, 0.25)
        assert res.k == 6 and res.ok
        assert res.A.measure <= 1.5 * 6

    @pytest.mark.parametrize("strategy", [EXACT, GREEDY])
    def test_postconditions_on_grid_restriction(self, strategy):
        s = domains.grid((7, 7), 1.0, neumann_mass=False)
        Y = s.pointset([i for i in range(49) if i % 7 < 5])
        res = pk.lemma1_construct(s, strategy, 4.0, 0.5, Y, strict=False)
        assert res.A.issubset(res.D) and res.D.issubset(Y)
        assert res.A.measure >= 4.0
        assert res.D.measure <= 2 * res.C_hat * 4.0

    def test_unreachable_alpha(self, path5):
        with pytest.raises(ConstructionError):
            pk.lemma1_construct(path5, EXACT, 6, 1, strict=False)

    def test_nonpositive_alpha(self, path5):
        with pytest.raises(DomainError):
            pk.lemma1_construct(path5, EXACT, 0, 1, strict=False)


class TestCorollary:
    def test_path20_pair(self, path20):
        fam = pk.corollary1_family(path20, EXACT, 2, 1, strict=False)
        assert fam.ok
        assert len(fam.sets) == 2
        assert path20.set_distance(*fam.sets) >= 3
        assert all(m >= fam.alpha for m in fam.measures)

    def test_single_set_is_the_lemma(self, path20):
        fam = pk.corollary1_family(path20, EXACT, 1, 1, strict=False)
        res = pk.lemma1_construct(path20, EXACT, fam.alpha, 1, strict=False, C_hat=fam.C_hat)
        assert fam.sets[0] == res.A and fam.enclosures[0] == res.D

    def test_grid16_four_sets(self):
        g = domains.grid((16, 16), neumann_mass=False)
        fam = pk.corollary1_family(g, pk.CoverageMaximizer(), 4, 1, strict=False)
        assert fam.ok and fam.N == 4
        D = g.distances
        for i in range(4):
            for j in range(i + 1, 4):
                assert D[np.ix_(fam.sets[i].indices, fam.sets[j].indices)].min() >= 3

    def test_strict_hypothesis_error_suggests_radius(self, path20):
        with pytest.raises(HypothesisError) as info:
            pk.corollary1_family(path20, EXACT, 2, 1)
        r = info.value.suggested_r
        assert r is not None and r < 1
        fam = pk.corollary1_family(path20, EXACT, 2, r)
        assert fam.ok and all(c.passed for c in fam.hypothesis)

    def test_strict_family_on_torus(self):
        t = domains.torus_grid((32, 32), 1 / 32)
        r = pk.admissible_radius(t, 4)
        fam = pk.corollary1_family(t, pk.CoverageMaximizer(), 4, r)
        assert fam.ok and fam.strict

    def test_round_trip(self, path20):
        fam = pk.corollary1_family(path20, EXACT, 2, 1, strict=False)
        back = pk.PackingFamily.from_dict(path20, fam.to_dict())
        assert back.sets == fam.sets and back.ok

    def test_verify_detects_tampering(self, path20):
        fam = pk.corollary1_family(path20, EXACT, 2, 1, strict=False)
        d = fam.to_dict()
        d["sets"][1] = [3, 4, 5]
        back = pk.PackingFamily.from_dict(path20, d)
        assert not back.ok
        failed = {c.name for c in back.report if not c.passed}
        assert "min_{i != j} d(A_i, A_j) >= 3r" in failed

    def test_argument_errors(self, path20):
        with pytest.raises(DomainError):
            pk.corollary1_family(path20, EXACT, 0, 1)
        with pytest.raises(DomainError):
            pk.corollary1_family(path20, EXACT, 2, -1)


class TestAdmissibleRadius:
    def test_path20(self, path20):
        r = pk.admissible_radius(path20, 2)
        assert pk.corollary_hypothesis(path20, 2, r).passed
        # a tenth larger breaks it
        assert not pk.corollary_hypothesis(path20, 2, 1.1 * r + 0.5).passed

    def test_brute_force_scan(self):
        g = domains.grid((10, 10), 0.1)
        r = pk.admissible_radius(g, 2)
        assert r is not None and pk.corollary_hypothesis(g, 2, r).passed
        for s in np.linspace(r * 1.01, g.diameter, 40):
            assert not pk.corollary_hypothesis(g, 2, float(s)).passed

    def test_none_when_impossible(self):
        assert pk.admissible_radius(domains.path(3, neumann_mass=False), 5) is None

    def test_min_radius(self, path20):
        assert pk.admissible_radius(path20, 2, min_radius=0.3) is None
