from typing import Callable, List, Tuple
from dataclasses import dataclass, field
import logging
import warnings
import numpy as np
import numpy.typing as npt
from scipy.stats import norm, qmc
from sklearn.exceptions import ConvergenceWarning
from sklearn.gaussian_process import GaussianProcessRegressor
from sklearn.gaussian_process.kernels import RBF

from .errors import ConfigurationError

log = logging.getLogger(__name__)

TWO_PI = 2 * np.pi
Objective = Callable[[npt.NDArray[np.float64]], float]


@dataclass(frozen=True)
class BoConfig:
    budget: int = 20
    n_init: int = 5
    candidate_pool: int = 512
    length_scale: float = 0.2
    jitter: float = 1e-6

    def check(self):
        if self.budget < 1:
            raise ConfigurationError(f"budget must be >= 1, got {self.budget}")
        if self.n_init < 1:
            raise ConfigurationError(
                f"n_init must be >= 1, got {self.n_init}")
        if self.candidate_pool < 1:
            raise ConfigurationError(
                f"candidate_pool must be >= 1, got {self.candidate_pool}")
        if self.length_scale <= 0:
            raise ConfigurationError("length_scale must be positive")


@dataclass(frozen=True)
class BoResult:
    best_theta: npt.NDArray[np.float64]
    best_value: float
    trace: List[Tuple[npt.NDArray[np.float64], float]] = field(repr=False)

    @property
    def incumbents(self) -> List[float]:
        return list(np.maximum.accumulate([v for _, v in self.trace]))


def latin_hypercube(n: int, d: int, seed: int) -> npt.NDArray[np.float64]:
    return qmc.LatinHypercube(d=d, seed=seed).random(n)


def expected_improvement(mu: npt.ArrayLike, sigma: npt.ArrayLike,
                         best: float) -> npt.NDArray[np.float64]:
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    gain = mu - best
    safe = np.where(sigma > 1e-12, sigma, 1.0)
    z = gain / safe
    ei = gain * norm.cdf(z) + safe * norm.pdf(z)
    return np.where(sigma > 1e-12, ei, np.maximum(gain, 0.0))


def _surrogate(config: BoConfig) -> GaussianProcessRegressor:
    return GaussianProcessRegressor(
        kernel=RBF(length_scale=config.length_scale),
        alpha=config.jitter, optimizer=None, normalize_y=True)


def optimize(objective: Objective, n_dims: int,
             config: BoConfig = BoConfig(), seed: int = 0) -> BoResult:
    config.check()
    if n_dims < 0:
        raise ConfigurationError(f"n_dims must be >= 0, got {n_dims}")
    trace: List[Tuple[npt.NDArray[np.float64], float]] = []

    def evaluate(unit: npt.NDArray) -> float:
        theta = unit * TWO_PI
        value = float(objective(theta))
        trace.append((theta, value))
        return value

    if n_dims == 0:
        value = evaluate(np.zeros(0))
        return BoResult(trace[0][0], value, trace)

    rng = np.random.default_rng(seed)
    n_init = min(config.n_init, config.budget)
    points = list(latin_hypercube(n_init, n_dims, seed))
    values = [evaluate(p) for p in points]
    gp = _surrogate(config)
    while len(trace) < config.budget:
        ys = np.asarray(values)
        if np.ptp(ys) == 0:
            # flat observations carry no signal for the surrogate
            nxt = rng.random(n_dims)
        else:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                gp.fit(np.asarray(points), ys)
            pool = rng.random((config.candidate_pool, n_dims))
            mu, sigma = gp.predict(pool, return_std=True)
            nxt = pool[int(np.argmax(expected_improvement(mu, sigma,
                                                          ys.max())))]
        points.append(nxt)
        values.append(evaluate(nxt))
    best = int(np.argmax(values))
    log.debug("bo: %d evaluations, best %.4f at step %d",
              len(trace), values[best], best)
    return BoResult(trace[best][0], values[best], trace)
