import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from kaclab.fixed_point import (
    MixtureLaw,
    build_pool,
    feasible_terms,
    fixed_point_residual,
    load_pool,
    moments_recursive,
    sample_m_infinity,
    sample_steady,
    save_pool,
    steady_cf,
    steady_tail_expansion,
)
from kaclab.kernels import Deterministic, Discrete, InelasticKac, Uniform, find_alpha
from kaclab.metrics import kolmogorov_distance, ks_critical
from kaclab.stable import StableParams, cf_stable, stable_cdf, tail_coefficients

R2 = 2**-0.5
NONCONS = Discrete(((0.7, 0.7, 0.5), (0.5, 0.5, 0.5)))
# E[L + R] = 1 without L + R = 1 a.s., so alpha = 1 with a nontrivial mixing law
CAUCHY_MIX = Discrete(((0.3, 0.3, 0.5), (0.7, 0.7, 0.5)))


@pytest.fixture(scope="module")
def noncons_pool():
    a = find_alpha(NONCONS)
    return build_pool(NONCONS, a, 20_000, 1 << 13, seed=1, adaptive=False)


@pytest.fixture(scope="module")
def cauchy_mix_pool():
    return build_pool(CAUCHY_MIX, 1.0, 20_000, 1 << 12, seed=2, adaptive=False)


def test_moments_conserving_kernels():
    for k, a in ((Uniform(), 1.0), (Deterministic(R2, R2), 2.0), (InelasticKac(1 / 3), 1.5)):
        mt = moments_recursive(k, a, 5)
        assert mt[1] == 1
        assert all(f for f in mt.finite)
        assert mt.m == pytest.approx((1.0,) * 5, rel=1e-9)


def test_moment_recursion_second_order():
    a = find_alpha(NONCONS)
    mt = moments_recursive(NONCONS, a, 2)
    # m2 = 2 E[L^a R^a] / (1 - E[L^2a + R^2a]) with L = R on each atom
    cross = 0.5 * 0.7 ** (2 * a) + 0.5 * 0.5 ** (2 * a)
    assert mt[2] == pytest.approx(2 * cross / (1 - 2 * cross), rel=1e-12)


# an atom with L > 1 makes S positive for large orders
HEAVY = Discrete(((1.2, 0.0, 0.5), (0.3, 0.3, 0.5)))


def test_infinite_moments_propagate():
    a = find_alpha(HEAVY)
    mt = moments_recursive(HEAVY, a, 8)
    assert mt.finite == (True,) * 5 + (False,) * 3
    assert all(math.isinf(m) for m in mt.m[5:])


def test_exact_pool_when_conserving():
    pool = build_pool(Uniform(), 1.0, 100)
    assert pool.exact and np.all(pool.pool == 1)
    assert sample_m_infinity(Deterministic(R2, R2), 2.0, 64, np.random.default_rng(0)) == pytest.approx(1.0, abs=1e-12)


def test_pool_mean(noncons_pool):
    x = noncons_pool.pool
    assert abs(x.mean() - 1) <= 4 * x.std() / math.sqrt(x.size)


@pytest.mark.parametrize("i", [2, 3, 4])
def test_pool_moments_match_recursion(noncons_pool, i):
    mt = moments_recursive(NONCONS, noncons_pool.alpha, 4)
    m, se = noncons_pool.moment(i)
    assert abs(m - mt[i]) <= 4 * se


def test_fixed_point_residual(noncons_pool):
    d = fixed_point_residual(noncons_pool, NONCONS, noncons_pool.alpha, np.random.default_rng(4))
    n = noncons_pool.size
    # two-sample 1% critical value with equal sizes
    assert d < 1.628 * math.sqrt(2 / n)


def test_adaptive_depth_records_history():
    a = find_alpha(NONCONS)
    pool = build_pool(NONCONS, a, 2000, 64, seed=3, adaptive=True, max_depth=1 << 12)
    hist = pool.diagnostics["history"]
    assert hist[-1]["depth"] == pool.depth
    assert pool.converged == (abs(hist[-1]["z"]) <= 4)


def test_steady_cf_stationarity(noncons_pool):
    st_ = StableParams(noncons_pool.alpha, 1.0, 0.0)
    scale = noncons_pool.pool ** (1 / noncons_pool.alpha)

    def cf_and_se(x):
        v = cf_stable(st_, x * scale)
        return np.mean(v), np.std(v.real) / math.sqrt(v.size)

    worst = 0.0
    for xi in np.geomspace(0.05, 5, 16):
        lhs, se_l = cf_and_se(xi)
        rhs, se_r = 0j, 0.0
        for l, r, w in NONCONS.atoms():
            fl, sl = cf_and_se(l * xi)
            fr, sr = cf_and_se(r * xi)
            rhs += w * fl * fr
            se_r += w * (abs(fr) * sl + abs(fl) * sr)
        assert abs(lhs - steady_cf(noncons_pool, st_, xi)) < 1e-15
        worst = max(worst, abs(lhs - rhs) / (se_l + se_r))
    assert worst <= 3


def test_steady_cf_exact_pool():
    st_ = StableParams(1, 2.0)
    pool = build_pool(Uniform(), 1.0, 10)
    assert steady_cf(pool, st_, 0.7) == pytest.approx(math.exp(-1.4))


def test_sample_steady_examples():
    rng = np.random.default_rng(5)
    ones = build_pool(Uniform(), 1.0, 10)
    cauchy = StableParams(1, 1.0)
    x = sample_steady(Uniform(), cauchy, ones, rng, 100_000)
    assert kolmogorov_distance(x, stats.cauchy().cdf) < ks_critical(x.size)
    z = sample_steady(Uniform(), StableParams(1, 0.0), ones, rng, 100)
    assert np.all(z == 0)
    g = sample_steady(Deterministic(R2, R2), StableParams(2, 0.5), build_pool(Deterministic(R2, R2), 2.0, 10), rng, 100_000)
    assert kolmogorov_distance(g, stats.norm(0, 1).cdf) < ks_critical(g.size)
    assert isinstance(sample_steady(Uniform(), cauchy, ones, rng), float)


def test_tail_expansion_conserving_equals_stable():
    st_ = StableParams(1.5, 1.0, 0.3)
    k = InelasticKac(1 / 3)
    te = steady_tail_expansion(k, st_, 3)
    tc = tail_coefficients(st_, 3)
    assert te.c_plus == pytest.approx(tc.c_plus, rel=1e-9)
    assert te.c_minus == pytest.approx(tc.c_minus, rel=1e-9)
    assert not te.truncated


def test_tail_expansion_truncates():
    a = find_alpha(HEAVY)
    assert feasible_terms(HEAVY, a, 10) == 5
    te = steady_tail_expansion(HEAVY, StableParams(a, 1.0), 10)
    assert te.truncated and te.k == 5 and te.requested_k == 10
    assert not steady_tail_expansion(HEAVY, StableParams(a, 1.0), 5).truncated


@pytest.mark.parametrize("x", [20.0, 50.0])
def test_steady_tail_law(cauchy_mix_pool, x):
    st_ = StableParams(1, 1.0)
    rng = np.random.default_rng(int(x))
    v = sample_steady(CAUCHY_MIX, st_, cauchy_mix_pool, rng, 1_000_000)
    freq = np.mean(v > x)
    se = math.sqrt(freq * (1 - freq) / v.size)
    te = steady_tail_expansion(CAUCHY_MIX, st_, 1)
    assert te.c_plus[0] == pytest.approx(1 / math.pi, rel=1e-12)
    assert abs(x * freq - te.c_plus[0]) <= 4 * x * se + 0.02 * te.c_plus[0]


def test_pool_roundtrip(tmp_path, noncons_pool):
    f = tmp_path / "pool.bin"
    save_pool(f, noncons_pool)
    assert np.array_equal(load_pool(f), noncons_pool.pool)
    save_pool(f, np.array([0.5, 2.0]))
    assert load_pool(f).tolist() == [0.5, 2.0]


def test_bad_pool_header(tmp_path):
    f = tmp_path / "bad.bin"
    f.write_bytes(b"NOTAPOOL" + b"\0" * 16)
    with pytest.raises(ValueError, match="bad pool header"):
        load_pool(f)
    f.write_bytes(b"KFPOOL01" + (5).to_bytes(8, "little") + b"\0" * 8)
    with pytest.raises(ValueError, match="expected 5"):
        load_pool(f)


@settings(max_examples=20)
@given(st.floats(0.3, 0.95), st.floats(0.05, 0.5))
def test_moments_positive_and_increasing(l, r):
    k = Discrete(((l, l, 0.5), (r, r, 0.5)))
    try:
        a = find_alpha(k)
    except Exception:
        return
    mt = moments_recursive(k, a, 4)
    finite = [m for m, f in zip(mt.m, mt.finite) if f]
    assert finite[0] == 1
    # Jensen: E[M^i] is nondecreasing in i when E M = 1
    assert all(b >= a_ - 1e-9 for a_, b in zip(finite, finite[1:]))
