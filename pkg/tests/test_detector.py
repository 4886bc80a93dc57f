import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from provfaas.detector import (
    BenignProfile,
    CentroidDistanceDetector,
    detect,
    fit_profile,
    score,
)


def test_identical_vectors_radius_clamped():
    X = np.tile([0.3, -0.2, 0.9], (10, 1))
    prof = fit_profile(X)
    assert np.allclose(prof.centroid, X[0]) and prof.radius == 1e-9


def test_two_symmetric_points_midpoint():
    prof = fit_profile([[1.0, 2.0], [3.0, -2.0]])
    assert np.allclose(prof.centroid, [2.0, 0.0])


def test_profile_matches_brute_force(rng):
    X = rng.standard_normal((1000, 8))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    prof = fit_profile(X, quantile=0.99)
    c = [sum(X[:, j]) / len(X) for j in range(8)]
    d = sorted(float(np.sqrt(sum((x - cj) ** 2 for x, cj in zip(row, c)))) for row in X)
    pos = 0.99 * (len(d) - 1)
    lo = int(pos)
    want = d[lo] + (pos - lo) * (d[lo + 1] - d[lo])
    assert np.allclose(prof.centroid, c, atol=1e-12)
    assert abs(prof.radius - want) < 1e-12


def test_fit_profile_rejects_empty():
    with pytest.raises(ValueError):
        fit_profile(np.zeros((0, 3)))


def test_score_zero_at_centroid():
    prof = BenignProfile(np.array([1.0, 2.0]), 0.5)
    ranked, alerts = detect([0], np.array([[1.0, 2.0]]), prof)
    assert ranked == [(0, 0.0)] and alerts == []


def test_eps_radius_alerts_on_any_other_vector():
    prof = fit_profile(np.ones((4, 3)))
    _, alerts = detect([7], np.array([[1.0, 1.0, 1.0 + 1e-6]]), prof)
    assert [a.node for a in alerts] == [7]


def test_alert_set_equals_brute_force_filter(rng):
    X = rng.standard_normal((200, 5))
    prof = BenignProfile(rng.standard_normal(5), 2.2)
    ids = list(range(100, 300))
    attrs = {v: f"attr{v}" for v in ids}
    ranked, alerts = detect(ids, X, prof, interval=3, attrs=attrs)
    want = {v for v, x in zip(ids, X) if np.linalg.norm(x - prof.centroid) > 2.2}
    assert {a.node for a in alerts} == want
    assert all(a.interval == 3 and a.attr == f"attr{a.node}" for a in alerts)
    keys = [(-s, v) for v, s in ranked]
    assert keys == sorted(keys)


def test_ties_broken_by_node_id():
    prof = BenignProfile(np.zeros(2), 0.1)
    X = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    ranked, alerts = detect([9, 2, 5], X, prof)
    assert [v for v, _ in ranked] == [2, 5, 9]
    assert [a.node for a in alerts] == [2, 5, 9]


def test_dimension_mismatch():
    with pytest.raises(ValueError, match="dim"):
        score(np.zeros((2, 3)), BenignProfile(np.zeros(4), 1.0))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_translation_consistency(seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((20, 4))
    shift = rng.uniform(-50, 50, 4)
    prof = BenignProfile(rng.standard_normal(4), 1.0)
    moved = BenignProfile(prof.centroid + shift, 1.0)
    np.testing.assert_allclose(score(X + shift, moved), score(X, prof), atol=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 3), st.floats(0.01, 3))
def test_alerts_monotone_in_radius(seed, r1, r2):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((40, 3))
    c = rng.standard_normal(3)
    lo, hi = sorted((r1, r2))
    _, a_lo = detect(range(40), X, BenignProfile(c, lo))
    _, a_hi = detect(range(40), X, BenignProfile(c, hi))
    assert {a.node for a in a_hi} <= {a.node for a in a_lo}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([0.5, 0.9, 0.99, 0.999]), st.integers(1, 300))
def test_training_set_alert_bound(seed, q, n):
    X = np.random.default_rng(seed).standard_normal((n, 4))
    prof = fit_profile(X, q)
    _, alerts = detect(range(n), X, prof)
    assert len(alerts) <= (1 - q) * n + 1


def test_profile_json_round_trip(tmp_path):
    prof = fit_profile(np.random.default_rng(0).standard_normal((30, 6)))
    p = tmp_path / "profile.json"
    prof.save(p)
    back = BenignProfile.load(p)
    assert np.array_equal(back.centroid, prof.centroid) and back.radius == prof.radius


def test_profile_rejects_bad_radius():
    with pytest.raises(ValueError):
        BenignProfile(np.zeros(2), 0.0)


# -- estimator wrapper -----------------------------------------------------------

def test_estimator_agrees_with_functions(rng):
    X = rng.standard_normal((300, 4))
    est = CentroidDistanceDetector(quantile=0.95).fit(X)
    prof = fit_profile(X, 0.95)
    assert np.allclose(est.centroid_, prof.centroid) and est.radius_ == prof.radius
    Y = rng.standard_normal((50, 4)) * 2
    d = score(Y, prof)
    np.testing.assert_allclose(est.score_samples(Y), -d)
    assert np.array_equal(est.predict(Y) == -1, d > prof.radius)
    assert est.get_params() == {"quantile": 0.95, "eps": 1e-9}
    assert clone(est).get_params() == est.get_params()


def test_estimator_fit_predict_and_errors(rng):
    X = rng.standard_normal((100, 3))
    labels = CentroidDistanceDetector(quantile=0.9).fit_predict(X)
    assert set(labels.tolist()) <= {-1, 1} and (labels == -1).sum() <= 0.1 * 100 + 1
    with pytest.raises(ValueError):
        CentroidDistanceDetector(quantile=1.5).fit(X)
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        CentroidDistanceDetector().predict(X)
