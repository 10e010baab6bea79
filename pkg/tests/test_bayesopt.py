import numpy as np
import numpy.testing as npt
import pytest

from qcmol.bayesopt import (
    BoConfig, latin_hypercube, expected_improvement, optimize, TWO_PI,
)
from qcmol.errors import ConfigurationError


class Counting:
    def __init__(self, fn):
        self.fn = fn
        self.calls = []

    def __call__(self, theta):
        self.calls.append(np.array(theta))
        return self.fn(theta)


def bowl(theta):
    return -float(np.sum((theta - np.pi) ** 2))


def test_lhs_is_stratified():
    pts = latin_hypercube(10, 3, seed=4)
    assert pts.shape == (10, 3)
    assert pts.min() >= 0.0 and pts.max() < 1.0
    for axis in range(3):
        assert sorted(np.floor(pts[:, axis] * 10).astype(int)) == \
            list(range(10))


def test_lhs_is_seeded():
    npt.assert_array_equal(latin_hypercube(5, 2, 1), latin_hypercube(5, 2, 1))


def test_ei_without_uncertainty():
    npt.assert_allclose(expected_improvement([1.0, 2.0, 3.5], [0, 0, 0], 2.0),
                        [0.0, 0.0, 1.5])


def test_ei_properties():
    mu = np.linspace(-2, 2, 9)
    ei = expected_improvement(mu, np.full(9, 0.5), 0.0)
    assert np.all(ei >= 0)
    assert np.all(np.diff(ei) > 0)
    at_best = expected_improvement([0.0, 0.0], [0.5, 1.0], 0.0)
    npt.assert_allclose(at_best, np.array([0.5, 1.0]) / np.sqrt(2 * np.pi))


@pytest.mark.parametrize("budget,n_init", [(20, 5), (3, 5), (1, 1), (6, 6)])
def test_uses_exact_budget(budget, n_init):
    fn = Counting(bowl)
    result = optimize(fn, 2, BoConfig(budget=budget, n_init=n_init), seed=1)
    assert len(fn.calls) == budget
    assert len(result.trace) == budget
    assert all(np.all((c >= 0) & (c < TWO_PI)) for c in fn.calls)


def test_best_is_the_incumbent():
    result = optimize(bowl, 2, BoConfig(budget=12), seed=2)
    values = [v for _, v in result.trace]
    assert result.best_value == max(values)
    assert bowl(result.best_theta) == result.best_value
    assert result.incumbents[-1] == result.best_value
    assert all(a <= b for a, b in zip(result.incumbents,
                                      result.incumbents[1:]))


def test_zero_dimensions():
    fn = Counting(lambda theta: 0.75)
    result = optimize(fn, 0, BoConfig(budget=10), seed=0)
    assert len(fn.calls) == 1
    assert result.best_theta.shape == (0,)
    assert result.best_value == 0.75


def test_flat_objective():
    fn = Counting(lambda theta: 0.5)
    result = optimize(fn, 3, BoConfig(budget=8, n_init=3), seed=5)
    assert len(fn.calls) == 8
    assert result.best_value == 0.5


def test_runs_are_reproducible():
    a = optimize(bowl, 3, BoConfig(budget=9), seed=11)
    b = optimize(bowl, 3, BoConfig(budget=9), seed=11)
    for (ta, va), (tb, vb) in zip(a.trace, b.trace):
        npt.assert_array_equal(ta, tb)
        assert va == vb


def test_finds_bowl_minimum():
    hits = 0
    for seed in range(20):
        result = optimize(bowl, 1, BoConfig(budget=20, n_init=5), seed=seed)
        hits += abs(result.best_theta[0] - np.pi) < 0.2
    assert hits >= 18


@pytest.mark.parametrize("config", [
    BoConfig(budget=0), BoConfig(n_init=0), BoConfig(candidate_pool=0),
    BoConfig(length_scale=0.0),
])
def test_bad_config(config):
    with pytest.raises(ConfigurationError):
        optimize(bowl, 2, config)


def test_negative_dimensions():
    with pytest.raises(ConfigurationError):
        optimize(bowl, -1)
