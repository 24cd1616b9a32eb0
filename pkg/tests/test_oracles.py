import math

import numpy as np
import pytest
from scipy import stats

from invbo.errors import InvalidArgumentError
from invbo.oracles import (
    OracleKind,
    SyntheticOracle,
    generate_pool,
    observe,
    sphere_eval,
    triangle_eval,
)


def test_triangle_at_zero():
    v = triangle_eval(0.0)
    np.testing.assert_array_equal(v[:6], 0.0)
    np.testing.assert_array_equal(v[6:], 5.0)


def test_triangle_at_half_pi():
    v = triangle_eval(math.pi / 2)
    assert v[0] == pytest.approx(5.0, abs=1e-14)
    assert v[6] == pytest.approx(0.0, abs=1e-14)
    assert v[1] == pytest.approx(5 - math.sqrt(math.pi / 2), abs=1e-14)  # 3.7466859
    assert v[7] == pytest.approx(-2.50663, abs=1e-5)
    assert v[7] == pytest.approx(-2 * math.sqrt(math.pi / 2), abs=1e-14)


def test_triangle_identities(rng):
    for x in rng.uniform(-10, 10, 1000):
        f, g = triangle_eval(x)[:6], triangle_eval(x)[6:]
        assert abs(f[5] - f[0]) <= 1e-10
        assert abs(g[2] - g[1]) <= 1e-10
        assert abs(g[4] - g[3]) <= 1e-10
        assert abs(f[3] + f[4] - 2 * f[0]) <= 1e-10
        assert np.all(np.abs(triangle_eval(x)) <= 5 + 2 * math.sqrt(abs(x)) + 1e-12)


def test_sphere_radius_vanishes_at_quarter_pi():
    v = sphere_eval(math.pi / 4)
    np.testing.assert_allclose(v, 5 * math.sqrt(2) / 2, atol=1e-12)
    assert v[0] == pytest.approx(3.53553, abs=1e-5)


def test_sphere_identities(rng):
    for x in rng.uniform(-10, 10, 1000):
        v = sphere_eval(x)
        f, g = v[:10], v[10:]
        c0, c1, r = 5 * math.sin(x), 5 * math.cos(x), 5 * abs(math.sin(x) - math.cos(x))
        assert abs(f.mean() - c0) <= 1e-10
        np.testing.assert_allclose((f - c0) ** 2 + (g - c1) ** 2, r * r, atol=1e-10)
        if abs(x) <= math.pi:
            assert np.all(np.abs(v) <= 5 + r + 1e-12) and 5 + r <= 15 + 1e-12


def test_output_dimensions():
    assert triangle_eval(0.3).shape == (12,) and sphere_eval(0.3).shape == (20,)
    assert OracleKind.TRIANGLE.output_dim == 12 and OracleKind.SPHERE.output_dim == 20


def test_observe_without_noise_is_exact():
    o = SyntheticOracle(OracleKind.TRIANGLE)
    np.testing.assert_array_equal(observe(o, 1.3), triangle_eval(1.3))


def test_observe_noise_variance():
    o = SyntheticOracle.with_noise("sphere", 0.01)
    rng = np.random.default_rng(0)
    Y = np.array([observe(o, 0.7, rng) for _ in range(100_000)])
    var = Y.var(axis=0, ddof=1)
    assert np.all((var >= 0.008) & (var <= 0.012))


def test_observe_deterministic_per_generator_state():
    o = SyntheticOracle.with_noise("triangle", 1e-2)
    a = observe(o, 0.2, np.random.default_rng(4))
    b = observe(o, 0.2, np.random.default_rng(4))
    np.testing.assert_array_equal(a, b)
    with pytest.raises(InvalidArgumentError):
        observe(o, 0.2)


def test_noise_length_checked():
    from invbo.mogp import NoiseParams
    with pytest.raises(InvalidArgumentError):
        SyntheticOracle(OracleKind.SPHERE, NoiseParams(np.ones(12)))


def test_pool_basic():
    p = generate_pool("triangle", 1, seed=0)
    assert p.shape == (1, 1) and -5 <= p[0, 0] <= 5
    p = generate_pool("sphere", 100, (-5, 5), seed=1)
    assert p.shape == (100, 1) and np.all(np.diff(p[:, 0]) >= 0)
    assert np.all((p >= -5) & (p <= 5))
    np.testing.assert_array_equal(p, generate_pool("sphere", 100, (-5, 5), seed=1))


def test_pool_uniform_ks():
    p = generate_pool("triangle", 20_000, (-5, 5), seed=3)[:, 0]
    assert stats.kstest(p, stats.uniform(loc=-5, scale=10).cdf).pvalue > 0.01


@pytest.mark.parametrize("rng_", [(1, 1), (2, -2), (0, np.inf)])
def test_pool_rejects_bad_range(rng_):
    with pytest.raises(InvalidArgumentError):
        generate_pool("triangle", 10, rng_)
