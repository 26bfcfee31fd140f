import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from cachecast import traffic
from cachecast.topology import CacheNode, CellLayout, UserDistribution
from cachecast.traffic import FileSpec, ShadowingModel

LAYOUT = CellLayout(500.0, (CacheNode((350.0, 0.0), 90.0), CacheNode((-350.0, 0.0), 90.0)))


def cumulative_horizon(mean, eps):
    """Independent oracle: accumulate the pmf until the remaining tail drops below eps."""
    n, term, cdf = 0, math.exp(-mean), 0.0
    cdf = term
    while 1.0 - cdf >= eps:
        n += 1
        term *= mean / n
        cdf += term
    return n


class TestPoissonPmf:
    def test_zero_mean(self):
        assert traffic.poisson_pmf(0.0, 0) == 1.0
        assert traffic.poisson_pmf(0.0, 3) == 0.0

    def test_two_two(self):
        assert traffic.poisson_pmf(2.0, 2) == pytest.approx(2 * math.exp(-2), rel=1e-14)
        assert traffic.poisson_pmf(2.0, 2) == pytest.approx(0.27067, abs=1e-5)
        assert traffic.poisson_weights(2.0, 100).sum() == pytest.approx(1.0, abs=1e-12)

    def test_large_counts_are_stable(self):
        assert traffic.poisson_pmf(1000.0, 1000) == pytest.approx(stats.poisson.pmf(1000, 1000.0), rel=1e-10)

    def test_negative_mean_rejected(self):
        with pytest.raises(ValueError):
            traffic.poisson_pmf(-1.0, 0)


class TestTruncation:
    def test_zero_mean(self):
        assert traffic.truncation_horizon(0.0) == 0

    def test_five_matches_cumulative_oracle(self):
        assert traffic.truncation_horizon(5.0, 1e-6) == cumulative_horizon(5.0, 1e-6)

    def test_random_means_tail_property(self):
        rng = np.random.default_rng(0)
        for mean in rng.uniform(0.01, 60.0, 50):
            n = traffic.truncation_horizon(mean, 1e-6)
            assert stats.poisson.sf(n, mean) < 1e-6
            assert n == 0 or stats.poisson.sf(n - 1, mean) >= 1e-6

    @given(st.floats(min_value=0.0, max_value=80.0), st.floats(min_value=1e-9, max_value=0.5))
    def test_normalisation_under_truncation(self, mean, eps):
        n = traffic.truncation_horizon(mean, eps)
        s = traffic.poisson_weights(mean, n).sum()
        assert 1 - eps - 1e-15 < s < 1 + 1e-12

    def test_bad_eps(self):
        with pytest.raises(ValueError):
            traffic.truncation_horizon(1.0, 0.0)


class TestGenerateRequests:
    def test_zero_load_is_empty(self):
        spec = FileSpec(0, 0.0, 100.0)
        assert traffic.generate_requests(spec, UserDistribution(), LAYOUT, ShadowingModel(),
                                         np.random.default_rng(0)) == []

    def test_events_within_lifetime_and_sorted(self):
        spec = FileSpec(3, 0.05, 200.0, start_time=50.0, num_segments=2)
        evs = traffic.generate_requests(spec, UserDistribution(), LAYOUT, ShadowingModel(),
                                        np.random.default_rng(1))
        times = [e.arrival_time for e in evs]
        assert times == sorted(times)
        assert all(50.0 <= t <= 250.0 for t in times)
        assert all(e.file_id == 3 and e.user_shadowing.shape == (2,) for e in evs)
        assert all(e.cache_shadowing.shape == (2, 2) for e in evs)

    def test_reproducible(self):
        spec = FileSpec(0, 0.02, 1000.0)
        a = traffic.generate_requests(spec, UserDistribution(), LAYOUT, ShadowingModel(), np.random.default_rng(7))
        b = traffic.generate_requests(spec, UserDistribution(), LAYOUT, ShadowingModel(), np.random.default_rng(7))
        assert len(a) == len(b)
        for x, y in zip(a, b):
            assert x.arrival_time == y.arrival_time and x.point == y.point
            assert np.array_equal(x.cache_shadowing, y.cache_shadowing)

    def test_mean_count(self):
        spec = FileSpec(0, 0.005, 1000.0)
        rng = np.random.default_rng(2)
        counts = np.array([len(traffic.generate_requests(spec, UserDistribution(), LAYOUT,
                                                         ShadowingModel(), rng)) for _ in range(10_000)])
        assert abs(counts.mean() - 5.0) < 3 * math.sqrt(5.0 / len(counts))

    def test_region_matches_point(self):
        spec = FileSpec(0, 0.5, 100.0)
        evs = traffic.generate_requests(spec, UserDistribution(), LAYOUT, ShadowingModel(),
                                        np.random.default_rng(3))
        from cachecast.topology import coverage_region_of
        assert all(e.serving_cache == coverage_region_of(e.point, LAYOUT) for e in evs)


class TestShadowing:
    def test_clipping_and_spread(self):
        m = ShadowingModel(8.0, 3.0)
        db = 10 * np.log10(m.draw(np.random.default_rng(0), 200_000))
        assert db.min() >= -24.0 - 1e-9 and db.max() <= 24.0 + 1e-9
        assert db.std() == pytest.approx(8.0 * 0.986, rel=0.02)

    def test_zero_sigma_is_unity(self):
        assert np.all(ShadowingModel(0.0).draw(np.random.default_rng(0), 10) == 1.0)


def test_synthetic_events_count():
    evs = traffic.synthetic_events(17, UserDistribution(), LAYOUT, ShadowingModel(),
                                   np.random.default_rng(0), num_segments=3)
    assert len(evs) == 17 and evs[0].user_shadowing.shape == (3,)
