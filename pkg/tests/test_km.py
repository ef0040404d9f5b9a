import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from censored_exploration import (
    CensoredSample,
    DomainError,
    KaplanMeierTail,
    VenueCounters,
    VenueModel,
    cutoff,
    ingest,
    km_tail,
    km_tail_exact,
    optimistic_km,
)
from censored_exploration.km import concentration_halfwidth, load_checkpoint, save_checkpoint

from .conftest import draw_censored


def brute_counts(samples, s_max):
    """Evaluate the defining indicators sample by sample."""
    d = np.zeros(s_max + 1, dtype=int)
    n = np.zeros(s_max + 1, dtype=int)
    for v, r in samples:
        for s in range(s_max + 1):
            d[s] += r == s and v > s
            n[s] += r >= s and v > s
    return d, n


def brute_km(samples, s_max):
    """Exact product-limit curve with rational arithmetic."""
    d, n = brute_counts(samples, s_max)
    t = [Fraction(1)]
    for s in range(s_max + 1):
        z = Fraction(int(d[s]), int(n[s])) if n[s] else Fraction(0)
        t.append(t[-1] * (1 - z))
    return t


WORKED = [(3, 2), (2, 2), (2, 0)]


class TestIngest:
    def test_direct(self):
        c = ingest(VenueCounters(4), CensoredSample(3, 2))
        np.testing.assert_array_equal(c.d, [0, 0, 1, 0, 0])
        np.testing.assert_array_equal(c.n, [1, 1, 1, 0, 0])
        assert c.total_obs == 1

    def test_censored(self):
        c = ingest(VenueCounters(4), CensoredSample(2, 2))
        np.testing.assert_array_equal(c.d, [0] * 5)
        np.testing.assert_array_equal(c.n, [1, 1, 0, 0, 0])

    def test_empty_submission(self):
        c = ingest(VenueCounters(4), CensoredSample(0, 0))
        assert not c.d.any() and not c.n.any()
        assert c.total_obs == 1

    def test_over_capacity(self):
        with pytest.raises(DomainError):
            ingest(VenueCounters(3), CensoredSample(4, 1))

    def test_inconsistent_sample(self):
        with pytest.raises(DomainError):
            ingest(VenueCounters(3), CensoredSample(2, 3))


samples_st = st.lists(
    st.integers(0, 12).flatmap(lambda v: st.tuples(st.just(v), st.integers(0, v))),
    max_size=60,
)


@given(samples_st)
@settings(max_examples=150, deadline=None)
def test_counters_match_indicator_definitions(samples):
    c = VenueCounters(12)
    for s in samples:
        c.ingest(s)
    d, n = brute_counts(samples, 12)
    np.testing.assert_array_equal(c.d, d)
    np.testing.assert_array_equal(c.n, n)
    assert np.all(c.d <= c.n)
    assert np.all(np.diff(c.n) <= 0)
    batch = VenueCounters(12).ingest_many(np.array(samples, dtype=int).reshape(-1, 2))
    np.testing.assert_array_equal(batch.d, c.d)
    np.testing.assert_array_equal(batch.n, c.n)
    assert batch.total_obs == c.total_obs == len(samples)


@given(samples_st, st.randoms())
@settings(max_examples=100, deadline=None)
def test_order_invariance(samples, shuffler):
    a = VenueCounters(12)
    for s in samples:
        a.ingest(s)
    shuffled = list(samples)
    shuffler.shuffle(shuffled)
    b = VenueCounters(12)
    for s in shuffled:
        b.ingest(s)
    np.testing.assert_array_equal(a.d, b.d)
    np.testing.assert_array_equal(a.n, b.n)


@given(samples_st)
@settings(max_examples=150, deadline=None)
def test_km_matches_rational_product(samples):
    t = km_tail(VenueCounters(12).ingest_many(np.array(samples, dtype=int).reshape(-1, 2))).t
    exact = brute_km(samples, 12)
    np.testing.assert_allclose(t[:13], [float(x) for x in exact[:13]], atol=1e-12)
    assert t[13] == 0.0
    assert np.all(np.diff(t) <= 0) and np.all((0 <= t) & (t <= 1))


class TestKmTail:
    def test_empty_counters(self):
        t = km_tail(VenueCounters(5)).t
        np.testing.assert_array_equal(t[:6], 1.0)

    def test_worked_example(self):
        c = VenueCounters(3).ingest_many(WORKED)
        np.testing.assert_array_equal(c.d, [1, 0, 1, 0])
        np.testing.assert_array_equal(c.n, [3, 2, 1, 0])
        exact = brute_km(WORKED, 3)
        assert exact[1:4] == [Fraction(2, 3), Fraction(2, 3), 0]
        np.testing.assert_allclose(km_tail(c).t[:4], [1, 2 / 3, 2 / 3, 0], atol=1e-15)

    def test_uncensored_equals_empirical_survival(self, rng):
        truth = VenueModel("zb-power-law", 30, 0.4, 0.6)
        X = draw_censored(truth, np.full(100, 30), rng)
        # a latent value of 30 is reported as a censored fill at 30; exclude it
        X = X[X[:, 1] < 30]
        t = km_tail(VenueCounters(30).ingest_many(X)).t
        empirical = [(X[:, 1] >= s).mean() for s in range(31)]
        np.testing.assert_allclose(t[:31], empirical, atol=1e-12)


@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6)), max_size=30))
def test_exact_curve_matches_float_curve(pairs):
    samples = [(v, min(v, r)) for v, r in pairs]
    c = VenueCounters(6).ingest_many(samples) if samples else VenueCounters(6)
    exact = km_tail_exact(c)
    assert exact[:7] == brute_km(samples, 6)[:7]
    np.testing.assert_allclose(km_tail(c).t, [float(x) for x in exact], atol=1e-15)


def opportunities_needed(s, eps, delta, v, k):
    return k * (s * v / eps) ** 2 * math.log(2 * v / delta)


class TestCutoff:
    threshold = staticmethod(opportunities_needed)

    def test_empty(self):
        assert cutoff(VenueCounters(5), 0.5, 0.1, 5, 128) == 0

    def test_threshold_boundary(self):
        need = self.threshold(1, 0.5, 0.1, 2, 128)
        assert 7554 < need < 7555
        c = VenueCounters(2)
        c.n[0] = 7555
        assert cutoff(c, 0.5, 0.1, 2, 128) >= 1
        c.n[0] = 7554
        assert cutoff(c, 0.5, 0.1, 2, 128) == 0

    def test_matches_literal_definition(self, rng):
        for _ in range(50):
            n = np.sort(rng.integers(0, 5000, size=9))[::-1]
            c = VenueCounters(8, np.zeros(9, int), n)
            eps, delta, k = rng.uniform(0.5, 5), rng.uniform(0.01, 0.5), rng.uniform(1e-3, 1)
            qualifying = [0] + [s for s in range(1, 9)
                                if n[s - 1] >= self.threshold(s, eps, delta, 8, k)]
            assert cutoff(c, eps, delta, 8, k) == max(qualifying)

    def test_bad_parameters(self):
        with pytest.raises(DomainError):
            cutoff(VenueCounters(3), 0.0, 0.1, 3, 1)
        with pytest.raises(DomainError):
            cutoff(VenueCounters(3), 1.0, 1.0, 3, 1)

    def test_nondecreasing_as_data_arrives(self, rng):
        truth = VenueModel("zb-power-law", 20, 0.3, 0.5)
        c = VenueCounters(10)
        last = 0
        for v in rng.integers(1, 11, size=3000):
            c.ingest((int(v), min(int(v), truth.sample(rng))))
            now = cutoff(c, 5.0, 0.1, 10, 0.01)
            assert now >= last
            last = now
        assert last > 0


class TestOptimisticKm:
    def test_fresh_counters_fully_optimistic(self):
        curve = optimistic_km(VenueCounters(4), 1.0, 0.1, 4, 128)
        assert curve.cutoff == 0
        np.testing.assert_array_equal(curve.t[:5], 1.0)

    def test_no_modification_at_cap(self):
        c = VenueCounters(3).ingest_many([(3, 1)] * 50 + [(3, 3)] * 50)
        curve = optimistic_km(c, 100.0, 0.5, 3, 1e-6)
        assert curve.cutoff == 3
        np.testing.assert_array_equal(curve.t, km_tail(c).t)

    def test_worked_example_at_cutoff_one(self):
        c = VenueCounters(3).ingest_many(WORKED)
        # n[0] = 3 qualifies s = 1; n[1] = 2 is short of the s = 2 threshold
        eps, delta, v, k = 3.0, 0.5, 3, 0.5
        assert opportunities_needed(1, eps, delta, v, k) <= 3
        assert opportunities_needed(2, eps, delta, v, k) > 2
        curve = optimistic_km(c, eps, delta, v, k)
        assert curve.cutoff == 1
        np.testing.assert_allclose(curve.t[:4], [1, 2 / 3, 2 / 3, 0], atol=1e-15)

    def test_raises_next_unit(self):
        c = VenueCounters(5).ingest_many([(5, 0)] * 10 + [(5, 1)] * 10)
        raw = km_tail(c).t
        curve = optimistic_km(c, 1.0, 0.1, 5, 1e-4)
        k = curve.cutoff
        assert 0 < k < 5
        assert curve.t[k + 1] == raw[k]
        np.testing.assert_array_equal(np.delete(curve.t, k + 1), np.delete(raw, k + 1))
        assert curve.is_monotone()


def test_product_difference_bound(rng):
    for _ in range(10_000):
        ell = rng.integers(1, 21)
        x = rng.random(ell)
        y = rng.random(ell)
        eps = np.abs(x - y)
        assert abs(np.prod(x) - np.prod(y)) <= eps.sum()


def test_concentration_bound_coverage(rng):
    """Violations of the per-s deviation bound occur in at most a delta fraction of runs."""
    truth = VenueModel("zb-power-law", 15, 0.3, 0.4)
    V, delta, runs, n = 10, 0.1, 60, 5000
    violations = 0
    for _ in range(runs):
        X = draw_censored(truth, rng.integers(1, V + 1, size=n), rng)
        c = VenueCounters(V).ingest_many(X)
        t = km_tail(c).t
        width = concentration_halfwidth(c, delta, V)
        s = np.arange(1, V + 1)
        violations += np.any(np.abs(truth.tail.t[s] - t[s]) > width[s])
    assert violations / runs <= delta


def test_halfwidth_values():
    c = VenueCounters(3)
    c.n[:] = [100, 50, 0, 0]
    w = concentration_halfwidth(c, 0.1, 3)
    assert w[0] == 0.0
    assert w[1] == pytest.approx(math.sqrt(2 * math.log(60) / 100))
    assert w[2] == pytest.approx(2 * math.sqrt(2 * math.log(60) / 50))
    assert math.isinf(w[3])


def test_checkpoint_round_trip(tmp_path):
    a = VenueCounters(6).ingest_many(WORKED)
    b = VenueCounters(6).ingest_many([(6, 6), (4, 1)])
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, {"A": a, "B": b})
    loaded = load_checkpoint(path)
    assert list(loaded) == ["A", "B"]
    for orig, again in zip((a, b), loaded.values()):
        np.testing.assert_array_equal(orig.d, again.d)
        np.testing.assert_array_equal(orig.n, again.n)
        assert orig.total_obs == again.total_obs


class TestEstimatorApi:
    def test_fit_predict(self):
        est = KaplanMeierTail(v_cap=3, optimistic=False).fit(WORKED)
        np.testing.assert_allclose(est.predict([0, 1, 2, 3, 9]), [1, 2 / 3, 2 / 3, 0, 0])
        assert est.cutoff_ is None

    def test_partial_fit_accumulates(self):
        est = KaplanMeierTail(v_cap=3, epsilon=3.0, delta=0.5, explore_const=0.5)
        est.partial_fit(WORKED[:1]).partial_fit(WORKED[1:])
        once = KaplanMeierTail(v_cap=3, epsilon=3.0, delta=0.5, explore_const=0.5).fit(WORKED)
        np.testing.assert_array_equal(est.tail_.t, once.tail_.t)
        assert est.cutoff_ == once.cutoff_ == 1

    def test_clone_is_unfitted(self):
        est = KaplanMeierTail(v_cap=3).fit(WORKED)
        fresh = clone(est)
        assert not hasattr(fresh, "counters_")
        assert fresh.get_params()["v_cap"] == 3
