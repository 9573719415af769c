import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from modef.errors import DimensionError
from modef.pareto import (
    FrontEstimate,
    ParetoPoint,
    UtopianPoint,
    WeightVector,
    crowding_distances,
    dominates,
    hypervolume_2d,
    pareto_prune,
    read_front_csv,
    scalarize_chebyshev,
    scalarize_linear,
    write_front_csv,
)

# Reference front from the baseline tuning run (game C returns).
BASELINE_FRONT = [
    (-4576.593262, 5497.799805),
    (-2731.05542, 5448.600098),
    (-2153.070068, 5262.200195),
    (-1753.648071, 5180.649902),
    (-1159.431396, 4817.149902),
    (-872.6861572, 3661.550049),
    (-780.8148193, 3217.899902),
    (-740.6045532, 3534.550049),
    (-716.069397, 2698.5),
    (-733.4193115, 2488.300049),
    (-686.8294678, 2360.149902),
]


def brute_force_front(points):
    """O(n^2) pairwise dominance oracle with duplicate collapse."""
    out = []
    seen = set()
    for i, p in enumerate(points):
        if p.f in seen:
            continue
        if not any(dominates(q, p) for j, q in enumerate(points) if j != i):
            out.append(p)
            seen.add(p.f)
    return sorted(out, key=lambda p: p.f)


def mc_hypervolume(points, ref, n_samples=1_000_000, seed=0):
    """Monte-Carlo rectangle-membership area oracle."""
    arr = np.array([p.f for p in points])
    ref = np.asarray(ref, dtype=np.float64)
    live = arr[(arr[:, 0] > ref[0]) & (arr[:, 1] > ref[1])]
    if live.size == 0:
        return 0.0
    hi = live.max(axis=0)
    rng = np.random.default_rng(seed)
    samples = rng.uniform(ref, hi, size=(n_samples, 2))
    inside = np.zeros(n_samples, dtype=bool)
    for f0, f1 in live:
        inside |= (samples[:, 0] <= f0) & (samples[:, 1] <= f1)
    box = float(np.prod(hi - ref))
    return box * inside.mean()


def pts(values, tags=None):
    if tags is None:
        return [ParetoPoint.of(v) for v in values]
    return [ParetoPoint.of(v, t) for v, t in zip(values, tags)]


class TestDominates:
    def test_baseline_pair(self):
        assert dominates(ParetoPoint.of((-740.6045532, 3534.550049)),
                         ParetoPoint.of((-780.8148193, 3217.899902)))

    def test_equal_points_do_not_dominate(self):
        assert not dominates(ParetoPoint.of((1, 2)), ParetoPoint.of((1, 2)))

    def test_tradeoff_incomparable(self):
        a, b = ParetoPoint.of((2, 1)), ParetoPoint.of((1, 2))
        assert not dominates(a, b) and not dominates(b, a)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            dominates(ParetoPoint.of((1,)), ParetoPoint.of((1, 2)))


class TestPrune:
    def test_baseline_front_prunes_to_nine(self):
        front = pareto_prune(pts(BASELINE_FRONT))
        assert len(front) == 9
        removed = set(BASELINE_FRONT) - {p.f for p in front.points}
        assert removed == {(-780.8148193, 3217.899902), (-733.4193115, 2488.300049)}
        oracle = brute_force_front(pts(BASELINE_FRONT))
        assert [p.f for p in front.points] == [p.f for p in oracle]

    def test_empty(self):
        assert len(pareto_prune([])) == 0

    def test_single(self):
        front = pareto_prune(pts([(3.0, 4.0)]))
        assert [p.f for p in front.points] == [(3.0, 4.0)]

    def test_duplicates_collapse(self):
        front = pareto_prune(pts([(1, 1), (1, 1), (0, 0)]))
        assert [p.f for p in front.points] == [(1.0, 1.0)]

    def test_sorted_by_first_objective(self):
        front = pareto_prune(pts([(2, 1), (0, 3), (1, 2)]))
        assert [p.f for p in front.points] == [(0.0, 3.0), (1.0, 2.0), (2.0, 1.0)]

    @given(
        st.lists(
            st.tuples(st.integers(-20, 20), st.integers(-20, 20)).map(
                lambda t: (float(t[0]), float(t[1]))
            ),
            max_size=40,
        )
    )
    def test_matches_brute_force(self, values):
        mine = pareto_prune(pts(values))
        oracle = brute_force_front(pts(values))
        assert [p.f for p in mine.points] == [p.f for p in oracle]

    @given(
        st.lists(
            st.tuples(st.floats(-100, 100, allow_nan=False), st.floats(-100, 100, allow_nan=False)),
            max_size=30,
        )
    )
    def test_idempotent_and_mutually_nondominated(self, values):
        once = pareto_prune(pts(values))
        twice = pareto_prune(once.points)
        assert [p.f for p in once.points] == [p.f for p in twice.points]
        for a in once.points:
            for b in once.points:
                if a is not b:
                    assert not dominates(a, b)


class TestHypervolume:
    def test_unit_square(self):
        assert hypervolume_2d(FrontEstimate(pts([(1, 1)])), ParetoPoint.of((0, 0))) == 1.0

    def test_two_point_staircase(self):
        assert hypervolume_2d(FrontEstimate(pts([(2, 1), (1, 2)])), ParetoPoint.of((0, 0))) == 3.0

    def test_points_below_ref_contribute_nothing(self):
        assert hypervolume_2d(FrontEstimate(pts([(-1, -1), (2, 2)])), ParetoPoint.of((0, 0))) == 4.0

    def test_baseline_front_matches_monte_carlo(self):
        front = pareto_prune(pts(BASELINE_FRONT))
        ref = (-5000.0, 2000.0)
        exact = hypervolume_2d(front, ParetoPoint.of(ref))
        mc = mc_hypervolume(front.points, ref, n_samples=1_000_000, seed=42)
        assert exact == pytest.approx(mc, rel=0.005)

    def test_monotone_under_new_nondominated_point(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            base = pareto_prune(pts(rng.uniform(1, 10, size=(8, 2)).tolist()))
            ref = ParetoPoint.of((0.0, 0.0))
            hv = hypervolume_2d(base, ref)
            # a point beyond the current maxima dominates ref and is non-dominated
            arr = base.arrays()
            extra = ParetoPoint.of((arr[:, 0].max() + 1.0, arr[:, 1].max() + 1.0))
            hv2 = hypervolume_2d(FrontEstimate(base.points + [extra]), ref)
            assert hv2 > hv

    def test_dimension_guard(self):
        with pytest.raises(DimensionError):
            hypervolume_2d(FrontEstimate([ParetoPoint.of((1, 2, 3))]), ParetoPoint.of((0, 0, 0)))


class TestCrowding:
    def test_two_points_both_infinite(self):
        assert crowding_distances(pts([(0, 0), (1, 1)])) == [float("inf")] * 2

    def test_equally_spaced_middle_point(self):
        d = crowding_distances(pts([(0, 5), (1, 5), (2, 5)]))
        assert d[0] == float("inf") and d[2] == float("inf")
        assert d[1] == 1.0

    def test_duplicates_share_distance(self):
        d = crowding_distances(pts([(0, 0), (1, 1), (1, 1), (2, 2)]))
        assert d[1] == d[2]

    @given(
        st.lists(
            st.tuples(st.integers(-5, 5), st.integers(-5, 5)).map(
                lambda t: (float(t[0]), float(t[1]))
            ),
            min_size=1,
            max_size=12,
        ),
        st.randoms(use_true_random=False),
    )
    def test_permutation_equivariance(self, values, rnd):
        base = pts(values)
        perm = list(range(len(base)))
        rnd.shuffle(perm)
        shuffled = [base[i] for i in perm]
        d_base = crowding_distances(base)
        d_shuf = crowding_distances(shuffled)
        assert d_shuf == [d_base[i] for i in perm]


class TestScalarizers:
    def test_linear_selector(self):
        assert scalarize_linear([-3, 5], WeightVector.of([1, 0])) == -3.0

    def test_linear_even(self):
        assert scalarize_linear([-3, 5], WeightVector.of([0.5, 0.5])) == 1.0

    def test_linear_general(self):
        v = [2.5, -4.0]
        w = WeightVector.of([0.4, 0.6])
        assert scalarize_linear(v, w) == pytest.approx(0.4 * 2.5 + 0.6 * -4.0)

    def test_chebyshev_example(self):
        val = scalarize_chebyshev([-3, 5], WeightVector.of([0.5, 0.5]), UtopianPoint.of([0, 10]))
        assert val == -2.5

    def test_chebyshev_utopian_fixed_point(self):
        z = UtopianPoint.of([1.5, -2.0])
        assert scalarize_chebyshev([1.5, -2.0], WeightVector.of([0.3, 0.7]), z) == 0.0

    def test_chebyshev_selector(self):
        val = scalarize_chebyshev([-3, 5], WeightVector.of([1, 0]), UtopianPoint.of([4, 10]))
        assert val == -abs(4 - -3)

    def test_single_objective_linear_identity(self):
        assert scalarize_linear([7.25], WeightVector.of([1.0])) == 7.25

    @given(
        st.tuples(st.floats(-50, 50), st.floats(-50, 50)),
        st.tuples(st.floats(0, 40), st.floats(0, 40)),
        st.tuples(st.floats(0.01, 1), st.floats(0.01, 1)),
    )
    def test_dominance_implies_scalar_order(self, base, bump, raw_w):
        b = ParetoPoint.of(base)
        a = ParetoPoint.of((base[0] + bump[0] + 0.5, base[1] + bump[1] + 0.5))
        assert dominates(a, b)
        w = WeightVector.of(raw_w)
        assert scalarize_linear(a.f, w) >= scalarize_linear(b.f, w)
        z = UtopianPoint.from_batch(np.array([a.f, b.f]))
        assert scalarize_chebyshev(a.f, w, z) >= scalarize_chebyshev(b.f, w, z)

    def test_weight_normalization(self):
        w = WeightVector.of([2, 6])
        assert w.w == (0.25, 0.75)
        with pytest.raises(ValueError):
            WeightVector.of([-1, 2])
        with pytest.raises(ValueError):
            WeightVector.of([0, 0])


class TestFrontCsv:
    def test_round_trip_equal_point_set(self, tmp_path):
        # six-digit-representable values survive the trip unchanged
        front = FrontEstimate(pts(BASELINE_FRONT[:4], tags=["a", "b", "c", "d"]))
        path = tmp_path / "front.csv"
        write_front_csv(path, front)
        back = read_front_csv(path)
        assert {(round(p.f[0], 6), round(p.f[1], 6)) for p in front.points} == {
            p.f for p in back.points
        }
        assert [p.tag for p in back.points] == ["a", "b", "c", "d"]

    def test_re_export_is_byte_identical(self, tmp_path):
        front = FrontEstimate(pts([(1 / 3, 2 / 7), (0.1234567, -9.87654321)]))
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_front_csv(p1, front)
        write_front_csv(p2, read_front_csv(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_header_enforced(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y,z\n1,2,3\n")
        with pytest.raises(ValueError):
            read_front_csv(path)
