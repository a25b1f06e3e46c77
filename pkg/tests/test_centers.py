import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from epkr.centers import (
    build_fundamental_system,
    gram_rank,
    poly_dim,
    sample_sphere,
    sample_uniform_ball,
)
from epkr.errors import CenterVerificationError, ConfigError


def test_poly_dim_examples():
    assert poly_dim(0, 4) == 1
    assert poly_dim(2, 3) == 10
    assert poly_dim(9, 1) == 10


def test_poly_dim_overflow_is_explicit():
    with pytest.raises(Exception):
        poly_dim(10**6, 10**6)


@given(st.integers(1, 40), st.integers(2, 8))
def test_poly_dim_pascal(s, d):
    assert poly_dim(s, d) == poly_dim(s - 1, d) + poly_dim(s, d - 1)


def test_poly_dim_matches_monomial_count():
    for s in range(5):
        for d in range(1, 4):
            count = sum(1 for e in np.ndindex(*(s + 1,) * d) if sum(e) <= s)
            assert poly_dim(s, d) == count


def test_uniform_ball_reproducible_and_in_range():
    a = sample_uniform_ball(1, 3, seed=5)
    assert np.array_equal(a, sample_uniform_ball(1, 3, seed=5))
    assert np.all(np.abs(a) <= 1)


def test_uniform_ball_statistics():
    x = sample_uniform_ball(3, 10000, seed=1)
    assert np.all(np.abs(x.mean(axis=0)) < 0.05)
    y = sample_uniform_ball(2, 10000, seed=2)
    assert abs(np.mean(np.linalg.norm(y, axis=1) <= 0.5) - 0.25) < 0.02
    assert np.all(np.linalg.norm(y, axis=1) <= 1.0)


def test_sphere_norms_and_uniformity():
    x = sample_sphere(2, 10000, seed=3)
    assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)
    angles = (np.arctan2(x[:, 1], x[:, 0]) + np.pi) / (2 * np.pi)
    assert stats.kstest(angles, "uniform").statistic < 0.02
    z = sample_sphere(3, 10000, seed=4)
    assert np.all(np.abs(z.mean(axis=0)) < 0.05)


def test_sphere_needs_two_dimensions():
    with pytest.raises(ConfigError):
        sample_sphere(1, 5, seed=0)


def test_two_distinct_points_verify():
    cs = build_fundamental_system(1, 1, seed=0)
    assert cs.n == 2 and cs.verified
    assert cs.points[0, 0] != cs.points[1, 0]


def test_determinant_oracle_for_s1_d1(rng):
    for _ in range(20):
        a, b = rng.uniform(-1, 1, 2)
        g = np.array([[1 + a * a, 1 + a * b], [1 + a * b, 1 + b * b]])
        assert np.linalg.det(g) == pytest.approx((a - b) ** 2, abs=1e-12)


def test_uniform_first_draw_success_rate():
    first_draw = sum(build_fundamental_system(2, 2, seed=seed).attempts == 1 for seed in range(200))
    assert first_draw >= 199


def test_failure_rate_small_degrees():
    failures = 0
    trials = 0
    for s in range(1, 5):
        for d in range(1, 4):
            for seed in range(20):
                trials += 1
                failures += build_fundamental_system(s, d, seed=seed).attempts > 1
    assert trials >= 200 and failures / trials <= 0.01


def test_equispaced_cubic():
    cs = build_fundamental_system(3, 1, "equispaced-1d")
    assert np.allclose(cs.points[:, 0], [0, 1 / 3, 2 / 3, 1])
    assert cs.verified and gram_rank(cs.points, 3)[0] == 4


def test_equispaced_only_in_one_dimension():
    with pytest.raises(ConfigError):
        build_fundamental_system(2, 2, "equispaced-1d")


def test_gaussian_strategy_projects_into_ball():
    cs = build_fundamental_system(4, 2, "gaussian", seed=11)
    assert np.all(np.linalg.norm(cs.points, axis=1) <= 1 + 1e-12)
    assert cs.verified and cs.n == poly_dim(4, 2)


def test_first_samples_repairs_duplicates(rng):
    source = np.repeat(rng.uniform(-1, 1, (3, 1)), 4, axis=0)
    cs = build_fundamental_system(4, 1, "first-samples", source=source, seed=1)
    assert cs.verified and cs.n == 5


def test_first_samples_needs_enough_source():
    with pytest.raises(ConfigError):
        build_fundamental_system(4, 1, "first-samples", source=np.zeros((3, 1)))


def test_verification_failure_reports_rank():
    with pytest.raises(CenterVerificationError) as info:
        build_fundamental_system(40, 1, seed=0, max_retries=2)
    assert info.value.achieved_rank < info.value.required_rank == 41


def test_unstrict_returns_unverified():
    cs = build_fundamental_system(40, 1, seed=0, max_retries=0, strict=False)
    assert not cs.verified and cs.n == 41


@given(st.integers(1, 4), st.integers(1, 3), st.integers(0, 10**6))
def test_center_set_invariants(s, d, seed):
    cs = build_fundamental_system(s, d, seed=seed)
    assert cs.points.shape == (math.comb(s + d, d), d)
    assert np.all(np.linalg.norm(cs.points, axis=1) <= 1 + 1e-12)
    assert cs.verified
