import math

import numpy as np
import pytest

from gustat.core import Dataset
from gustat.exceptions import InvalidArgs
from gustat.generators import (Discrete, Empirical, LinearGaussian, OneMinusX, TwoPoint,
                               UniformBox, generate, parse_generator)


def test_one_minus_x_noiseless():
    ds = generate(OneMinusX(sigma=0.0), 3, seed=1)
    np.testing.assert_array_equal(ds.y, 1.0 - ds.X[:, 0])
    assert ((ds.X >= 0) & (ds.X < 1)).all()


def test_two_point_mean():
    ds = generate(TwoPoint((0.0, 1.0), (0.5, 0.5)), 10_000, seed=3)
    assert abs(ds.y.mean() - 0.5) <= 3 * 0.5 / 100


def test_linear_gaussian_noiseless():
    ds = generate(LinearGaussian(beta=2.0, sigma=0.0), 50, seed=2)
    np.testing.assert_array_equal(ds.y, 2.0 * ds.X[:, 0])


def test_generate_deterministic():
    a = generate(LinearGaussian((1.0, -1.0), 0.5), 20, seed=9)
    b = generate(LinearGaussian((1.0, -1.0), 0.5), 20, seed=9)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)


@pytest.mark.parametrize("gen", [
    LinearGaussian((1.0, 2.0), 0.5),
    LinearGaussian((1.0,), 1.0, covariates="uniform"),
    OneMinusX(0.3),
    UniformBox(3, "linear", 0.2),
    UniformBox(2, "step", 0.0),
    UniformBox(2, "constant", 1.0),
    Discrete(((0.0,), (1.0,), (3.0,)), (1.0, -2.0, 5.0), (0.2, 0.5, 0.3)),
], ids=lambda g: g.family)
def test_response_moments(gen):
    X, y = gen.draw(np.random.default_rng(0), (200_000,))
    assert X.shape == (200_000, gen.p)
    mu, var = gen.response_mean(), gen.response_var()
    assert abs(y.mean() - mu) < 4 * math.sqrt(var / y.size) + 1e-12
    se_var = math.sqrt(max(np.var((y - mu) ** 2), 1e-30) / y.size)
    # (ȳ - μ)² is of order var/n
    assert abs(y.var() - var) < 4 * se_var + 20 * var / y.size + 1e-12


def test_draw_shapes():
    X, y = UniformBox(2).draw(np.random.default_rng(0), (4, 5))
    assert X.shape == (4, 5, 2) and y.shape == (4, 5)


def test_gaussian_abs_moments():
    g = LinearGaussian((0.0,), 1.0)
    assert g.response_abs_moment(3) == pytest.approx(2 * math.sqrt(2 / math.pi), rel=1e-14)
    assert g.response_central_moment(4) == pytest.approx(3.0, rel=1e-14)
    assert g.response_abs_moment(6) == pytest.approx(15.0, rel=1e-14)


def test_discrete_exact_moments():
    g = TwoPoint((-1.0, 1.0), (0.5, 0.5))
    assert g.response_mean() == 0.0
    assert g.response_var() == 1.0
    assert g.response_central_moment(4) == 1.0


@pytest.mark.parametrize("d", [
    {"family": "LinearGaussian", "beta": [1, 2], "sigma": 0.5},
    {"family": "OneMinusX", "sigma": 1},
    {"family": "UniformBox", "d": 2, "response": "step", "sigma": 0.1},
    {"family": "TwoPoint", "values": [0, 1], "probs": [0.3, 0.7]},
])
def test_parse_roundtrip(d):
    g = parse_generator(d)
    assert parse_generator(g.to_dict()) == g or d["family"] == "TwoPoint"


@pytest.mark.parametrize("bad", [
    {"family": "Nope"},
    {"family": "OneMinusX", "sigma": -1},
    {"family": "TwoPoint", "values": [0, 1], "probs": [0.3, 0.3]},
    {"family": "UniformBox", "d": 0},
    {"family": "LinearGaussian", "covariates": "cauchy"},
    {"family": "OneMinusX", "bogus": 1},
])
def test_parse_invalid(bad):
    with pytest.raises(InvalidArgs):
        parse_generator(bad)


def test_empirical_resamples_rows():
    ds = Dataset(np.arange(6.0)[:, None], np.arange(6.0) * 10)
    X, y = Empirical(ds).draw(np.random.default_rng(0), (100,))
    np.testing.assert_array_equal(y, X[:, 0] * 10)
    assert set(X[:, 0]) <= set(range(6))
