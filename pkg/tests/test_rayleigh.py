import numpy as np
import pytest
import scipy.linalg

from specpack import domains, geometry
from specpack import packing as pk
from specpack import rayleigh as R
from specpack.errors import DomainError, HypothesisError, InvariantError, PreconditionError
from specpack.mmspace import MetricMeasureSpace

from .oracles import dense_laplacian


def dense_eigs(space):
    L, M = dense_laplacian(space)
    return scipy.linalg.eigh(L, M, eigvals_only=True)


class TestPlateau:
    def test_path10_example(self, path10):
        A = path10.pointset([0, 1, 2])
        f = R.plateau(path10, A, 2)
        np.testing.assert_array_equal(f.values, [1, 1, 1, 0.5, 0, 0, 0, 0, 0, 0])
        assert f.energy == 0.5 and f.mass == 3.25
        assert abs(f.rayleigh - 2 / 13) <= 1e-12
        assert R.c_geom(path10) == 2.0
        # the collar {3, 4, 5} carries mass 3
        assert R.rayleigh_bound_lemma2(path10, A, 2, f) == pytest.approx(2 / 4 * 3 / 3)

    def test_whole_space_is_constant(self, path10):
        A = path10.all_points()
        f = R.plateau(path10, A, 1.5)
        assert f.rayleigh == 0
        assert R.rayleigh_bound_lemma2(path10, A, 1.5, f) == 0

    def test_singleton_with_huge_radius(self, path10):
        f = R.plateau(path10, path10.pointset([4]), 100)
        assert len(f.support) == 10 and np.all(f.values > 0)
        assert f.rayleigh <= R.rayleigh_bound_lemma2(path10, path10.pointset([4]), 100, f)

    def test_energy_matches_quadratic_form(self):
        s = domains.point_cloud(50, seed=1, eps=0.35)
        f = R.plateau(s, s.pointset([0, 3, 9]), 0.2)
        L, _ = dense_laplacian(s)
        assert f.energy == pytest.approx(f.values @ L @ f.values, rel=1e-12)

    @pytest.mark.parametrize("make", [
        lambda: domains.grid((12, 9), 0.1),
        lambda: domains.point_cloud(80, seed=2, eps=0.3),
        lambda: domains.conformal_grid((10, 10), 0.1, 0.5),
        lambda: domains.disk_grid(1.0, 0.2),
    ])
    def test_lipschitz_and_collar_bound(self, make):
        s = make()
        rng = np.random.default_rng(0)
        for _ in range(10):
            A = s.pointset(rng.choice(s.n_points, rng.integers(1, 6), replace=False))
            r = float(rng.uniform(0.5, 3) * s.max_edge_length)
            f = R.plateau(s, A, r)
            assert R.lipschitz_violation(s, f) <= 1e-12
            assert f.rayleigh <= R.rayleigh_bound_lemma2(s, A, r, f)

    def test_bad_core(self, path10):
        with pytest.raises(DomainError):
            R.plateau(path10, path10.pointset([]), 1)
        with pytest.raises(DomainError):
            R.plateau(path10, path10.pointset([1]), 0)
        s = MetricMeasureSpace([0.0, 1.0], edges=[(0, 1)], lengths=[1.0])
        with pytest.raises(DomainError):
            R.plateau(s, s.pointset([0]), 1)

    def test_violated_collar_bound_raises(self, path10, monkeypatch):
        monkeypatch.setattr(R, "c_geom", lambda space: 1e-6)
        with pytest.raises(InvariantError):
            R.rayleigh_bound_lemma2(path10, path10.pointset([0, 1, 2]), 2)


def fake_family(space, sets, r):
    sets = [space.pointset(s) for s in sets]
    return pk.PackingFamily(r=r, alpha=1.0, C_hat=1, N=len(sets), sets=sets, enclosures=sets,
                            centers=[], strategy="manual", seed=0, strict=False)


class TestQFilter:
    def test_keeps_smallest_enlargements(self, path20):
        fam = fake_family(path20, [[0], [5, 6, 7, 8], [12], [17, 18]], 1)
        # enlargement masses 2, 6, 3, 4
        assert R.q_filter(path20, fam, 20, 2) == [0, 2]
        assert R.q_filter(path20, fam, 20, 3) == [0, 2, 3]

    def test_adversarial_heavy_set_excluded(self, path20):
        fam = fake_family(path20, [list(range(0, 12)), [15], [18]], 1)
        assert R.q_filter(path20, fam, 20, 2) == [1, 2]

    def test_too_few_light_sets(self, path20):
        fam = fake_family(path20, [list(range(0, 11)), list(range(13, 20))], 1)
        with pytest.raises(InvariantError):
            R.q_filter(path20, fam, 20, 2)

    def test_arguments(self, path20):
        fam = fake_family(path20, [[0]], 1)
        with pytest.raises(DomainError):
            R.q_filter(path20, fam, 20, 0)
        with pytest.raises(DomainError):
            R.q_filter(path20, fam, 0, 1)


class TestMinMax:
    def test_split_path_against_dense(self, path10):
        fns = [R.plateau(path10, path10.pointset([0, 1]), 2), R.plateau(path10, path10.pointset([7, 8, 9]), 2)]
        bounds = R.eigen_upper_bounds(path10, fns)
        lam = dense_eigs(path10)
        assert np.all(lam[:2] <= bounds + 1e-12)
        assert bounds[0] == min(f.rayleigh for f in fns)
        assert bounds[1] == max(f.rayleigh for f in fns)

    def test_overlapping_supports(self, path10):
        fns = [R.plateau(path10, path10.pointset([0]), 3), R.plateau(path10, path10.pointset([4]), 3)]
        with pytest.raises(PreconditionError, match="overlap"):
            R.eigen_upper_bounds(path10, fns)

    def test_adjacent_positive_parts(self, path10):
        # supports {0,1} and {2,3,4} are disjoint but f > 0 on both ends of edge (1, 2)
        fns = [R.plateau(path10, path10.pointset([0]), 1.5), R.plateau(path10, path10.pointset([3]), 1.5)]
        with pytest.raises(PreconditionError, match="edge"):
            R.eigen_upper_bounds(path10, fns)

    def test_disconnected_components(self):
        s = MetricMeasureSpace(np.ones(8), edges=[(0, 1), (1, 2), (2, 3), (4, 5), (5, 6), (6, 7)],
                               lengths=np.ones(6), require_connected=False)
        fns = [R.plateau(s, s.pointset([0, 1, 2, 3]), 1), R.plateau(s, s.pointset([4, 5, 6, 7]), 1)]
        np.testing.assert_array_equal(R.eigen_upper_bounds(s, fns), [0, 0])
        np.testing.assert_allclose(dense_eigs(s)[:2], 0, atol=1e-12)

    def test_empty(self, path10):
        assert R.eigen_upper_bounds(path10, []).size == 0

    def test_random_separated_plateaus_bound_spectrum(self):
        s = domains.grid((14, 14), 1 / 13)
        lam = dense_eigs(s)
        rng = np.random.default_rng(5)
        for _ in range(5):
            r = 2 / 13
            cores, used = [], np.zeros(s.n_points, bool)
            for x in rng.permutation(s.n_points):
                A = s.pointset([x])
                halo = s.enlarge(A, 2 * r + 1 / 13)
                if not used[halo.indices].any():
                    cores.append(A)
                    used[s.enlarge(A, r + 1 / 13 / 2).indices] = True
                if len(cores) == 6:
                    break
            fns = [R.plateau(s, A, r) for A in cores]
            b = R.eigen_upper_bounds(s, fns)
            assert np.all(lam[: len(b)] <= b + 1e-9)


@pytest.fixture(scope="module")
def torus():
    return domains.torus_grid((32, 32), 1 / 32)


class TestPipeline:
    def test_torus_k4(self, torus):
        res = R.theorem2_pipeline(torus, geometry.theorem2_constants(2), 0.0, 4)
        rep = res.report
        assert res.passed
        assert rep["N"] == 8 and len(rep["selected"]) == 4
        assert rep["schedule"]["case"] == "k0_is_1" and rep["schedule"]["A_term"] == 0.0
        assert all(row["slack"] >= -1e-10 for row in rep["minmax"])
        assert rep["lambda_k"] <= rep["certified_bound"] <= rep["bound_theorem"]
        assert 3 * rep["r"] > rep["h"]
        lam = R.space_spectrum(torus, 4).eigenvalues
        assert rep["lambda_k"] == pytest.approx(lam[3], rel=1e-9)

    def test_curvature_scaling(self, torus):
        c = geometry.theorem2_constants(2)
        res = R.theorem2_pipeline(torus, c, 1.5, 2)
        rep = res.report
        assert res.passed and rep["scale"] == 1.5
        assert rep["lambda_k"] == pytest.approx(R.space_spectrum(torus, 2).eigenvalues[1], rel=1e-9)
        assert rep["bound_theorem"] == geometry.bound_theorem2(c, 1.5, torus.omega, 2)

    def test_k_below_k0(self):
        space = domains.torus_grid((32, 32), 1.0)
        res = R.theorem2_pipeline(space, geometry.theorem2_constants(2), 100.0, 2)
        sch = res.report["schedule"]
        assert sch["case"] == "k_lt_k0" and sch["k_0"] > 2
        assert sch["A_term"] == pytest.approx(geometry.theorem2_constants(2).A_n * 1e4)
        assert res.passed

    def test_infeasible_radius(self):
        with pytest.raises(HypothesisError):
            R.theorem2_pipeline(domains.cycle(40), geometry.theorem2_constants(1), 0.0, 1)

    def test_argument_errors(self, torus):
        c2 = geometry.theorem2_constants(2)
        with pytest.raises(DomainError):
            R.theorem2_pipeline(torus, c2, 0.0, 0)
        with pytest.raises(DomainError):
            R.theorem2_pipeline(torus, c2, -1.0, 1)
        with pytest.raises(DomainError):
            R.theorem2_pipeline(torus, geometry.theorem2_constants(3), 0.0, 1)

    def test_thread_count_does_not_change_report(self, torus, monkeypatch):
        c = geometry.theorem2_constants(2)
        monkeypatch.setenv("SPECPACK_THREADS", "1")
        one = R.theorem2_pipeline(torus, c, 0.0, 3).report
        monkeypatch.setenv("SPECPACK_THREADS", "4")
        four = R.theorem2_pipeline(torus, c, 0.0, 3).report
        assert one == four

    def test_worker_count_env(self, monkeypatch):
        monkeypatch.setenv("SPECPACK_THREADS", "3")
        assert R.worker_count() == 3
        monkeypatch.setenv("SPECPACK_THREADS", "x")
        with pytest.raises(DomainError):
            R.worker_count()

    def test_sweep(self, torus):
        rows = R.theorem2_sweep(torus, geometry.theorem2_constants(2), 0.0, 10)
        assert [r["k"] for r in rows] == list(range(1, 11))
        assert all(r["pass"] for r in rows)
        with pytest.raises(DomainError):
            R.theorem2_sweep(torus, geometry.theorem2_constants(2), 0.0, 0)
