from typing import Dict, List, Mapping, Optional, Sequence, Tuple, TypeVar
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
import logging
import math
import numpy as np
import numpy.typing as npt
from scipy.stats import spearmanr
from sklearn.neighbors import KernelDensity

from .errors import (
    DegenerateDataError, ShapeMismatchError, ConfigurationError,
)
from .svm import PerformanceLabel
from .utils import write_csv

log = logging.getLogger(__name__)

GRID_POINTS = 512
GRID_REACH = 4.0
Record = TypeVar("Record", bound=Sequence)


@dataclass(frozen=True)
class DensityEstimate:
    grid: npt.NDArray[np.float64]
    density: npt.NDArray[np.float64]
    bandwidth: float
    lower: Optional[npt.NDArray[np.float64]] = None
    upper: Optional[npt.NDArray[np.float64]] = None


class Quadrant(Enum):
    high_high = "high/high"
    high_low = "high/low"
    low_high = "low/high"
    low_low = "low/low"


@dataclass(frozen=True)
class EnrichmentReport:
    high_rule: str
    low_rule: str
    high_counts: Dict[PerformanceLabel, int]
    low_counts: Dict[PerformanceLabel, int]
    high_fraction: float
    low_fraction: float
    ratio: float


def _samples(samples: npt.ArrayLike, minimum: int) -> npt.NDArray:
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if x.size < minimum:
        raise DegenerateDataError(
            f"need at least {minimum} samples, got {x.size}")
    return x


def silverman_bandwidth(samples: npt.ArrayLike) -> float:
    x = _samples(samples, 2)
    sigma = np.std(x)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sigma, (q75 - q25) / 1.34) if q75 > q25 else sigma
    h = 0.9 * spread * x.size ** -0.2
    if h <= 0:
        raise DegenerateDataError("zero bandwidth: all samples identical")
    return float(h)


def default_grid(samples: npt.ArrayLike, bandwidth: float,
                 n_points: int = GRID_POINTS) -> npt.NDArray[np.float64]:
    x = np.asarray(samples, dtype=np.float64)
    return np.linspace(x.min() - GRID_REACH * bandwidth,
                       x.max() + GRID_REACH * bandwidth, n_points)


def _evaluate(x: npt.NDArray, grid: npt.NDArray, h: float) -> npt.NDArray:
    kde = KernelDensity(kernel="gaussian", bandwidth=h).fit(x[:, None])
    return np.exp(kde.score_samples(grid[:, None]))


def kde_density(samples: npt.ArrayLike, grid: Optional[npt.ArrayLike] = None,
                bandwidth: Optional[float] = None) -> DensityEstimate:
    x = _samples(samples, 2)
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if h <= 0:
        raise DegenerateDataError(f"bandwidth must be positive, got {h}")
    grid = default_grid(x, h) if grid is None else \
        np.asarray(grid, dtype=np.float64).reshape(-1)
    return DensityEstimate(grid, _evaluate(x, grid, h), h)


def bootstrap_band(samples: npt.ArrayLike,
                   grid: Optional[npt.ArrayLike] = None, n_boot: int = 200,
                   level: float = 0.95, seed: int = 0,
                   bandwidth: Optional[float] = None) -> DensityEstimate:
    # resamples reuse the bandwidth of the full sample
    x = _samples(samples, 5)
    if not (0.0 < level < 1.0):
        raise ConfigurationError(f"level must be in (0, 1), got {level}")
    if n_boot < 1:
        raise ConfigurationError(f"n_boot must be >= 1, got {n_boot}")
    point = kde_density(x, grid, bandwidth)
    curves = np.empty((n_boot, point.grid.size))
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_boot)):
        rng = np.random.default_rng(child)
        resample = x[rng.integers(0, x.size, x.size)]
        curves[i] = _evaluate(resample, point.grid, point.bandwidth)
    tail = 100 * (1 - level) / 2
    lower, upper = np.percentile(curves, [tail, 100 - tail], axis=0)
    return DensityEstimate(point.grid, point.density, point.bandwidth,
                           lower, upper)


def quadrant_of(r_min: float, r_max: float, r_min_threshold: float,
                r_max_threshold: float) -> Quadrant:
    # equal to a threshold counts as low
    hi_min = r_min > r_min_threshold
    hi_max = r_max > r_max_threshold
    if hi_min:
        return Quadrant.high_high if hi_max else Quadrant.high_low
    return Quadrant.low_high if hi_max else Quadrant.low_low


def quadrant_split(records: Sequence[Record], r_min_threshold: float,
                   r_max_threshold: float) -> Dict[Quadrant, List[Record]]:
    if not (math.isfinite(r_min_threshold) and
            math.isfinite(r_max_threshold)):
        raise ConfigurationError("thresholds must be finite")
    rv: Dict[Quadrant, List[Record]] = {q: [] for q in Quadrant}
    for rec in records:
        rv[quadrant_of(rec[0], rec[1], r_min_threshold,
                       r_max_threshold)].append(rec)
    return rv


def median_thresholds(records: Sequence[Sequence]) -> Tuple[float, float]:
    arr = np.asarray([(r[0], r[1]) for r in records], dtype=np.float64)
    if arr.size == 0:
        raise DegenerateDataError("no records to take medians of")
    return float(np.median(arr[:, 0])), float(np.median(arr[:, 1]))


def _counts(labels: Sequence[PerformanceLabel]) -> Dict[PerformanceLabel, int]:
    return {p: sum(1 for lab in labels if lab == p) for p in PerformanceLabel}


def enrichment(high: Sequence[PerformanceLabel],
               low: Sequence[PerformanceLabel], high_rule: str = "high",
               low_rule: str = "low") -> EnrichmentReport:
    if not high or not low:
        raise DegenerateDataError(
            f"empty group (high {len(high)}, low {len(low)})")
    high_counts, low_counts = _counts(high), _counts(low)
    hf = high_counts[PerformanceLabel.performant] / len(high)
    lf = low_counts[PerformanceLabel.performant] / len(low)
    if lf > 0:
        ratio = hf / lf
    else:
        ratio = math.inf if hf > 0 else math.nan
    return EnrichmentReport(high_rule, low_rule, high_counts, low_counts,
                            hf, lf, ratio)


def enrichment_to_text(report: EnrichmentReport) -> str:
    def group(name, rule, counts, fraction):
        tallies = " ".join(f"{p.value}={counts[p]}" for p in PerformanceLabel)
        return f"{name}: {rule} {tallies} performant_fraction={fraction!r}"
    return "\n".join([
        group("high", report.high_rule, report.high_counts,
              report.high_fraction),
        group("low", report.low_rule, report.low_counts, report.low_fraction),
        f"ratio: {report.ratio!r}",
    ]) + "\n"


def top_k(records: Sequence[Record], k: int, key: int = 0,
          largest: bool = True) -> List[Record]:
    if k < 0:
        raise ConfigurationError(f"k must be >= 0, got {k}")
    values = np.asarray([r[key] for r in records], dtype=np.float64)
    order = np.argsort(-values if largest else values, kind="stable")
    return [records[i] for i in order[:k]]


def spearman_sign(values: npt.ArrayLike, indicator: npt.ArrayLike) -> int:
    """Sign of the rank correlation, 0 when it is undefined."""
    values = np.asarray(values, dtype=np.float64)
    indicator = np.asarray(indicator, dtype=np.float64)
    if values.shape != indicator.shape:
        raise ShapeMismatchError(
            f"{values.shape[0]} values for {indicator.shape[0]} indicators")
    if values.size < 2 or np.ptp(values) == 0 or np.ptp(indicator) == 0:
        return 0
    rho = spearmanr(values, indicator)[0]
    if not np.isfinite(rho) or rho == 0:
        return 0
    return 1 if rho > 0 else -1


def write_densities(path: Path, estimates: Mapping[str, DensityEstimate]):
    names = list(estimates)
    if not names:
        raise DegenerateDataError("no densities to write")
    grid = estimates[names[0]].grid
    for name in names[1:]:
        if not np.array_equal(estimates[name].grid, grid):
            raise ShapeMismatchError(f"density {name!r} uses another grid")
    header = ["grid"]
    for name in names:
        header += [name, f"{name}_lo", f"{name}_hi"]

    def rows():
        for i, g in enumerate(grid):
            row = [g]
            for name in names:
                est = estimates[name]
                row += [est.density[i],
                        None if est.lower is None else est.lower[i],
                        None if est.upper is None else est.upper[i]]
            yield row

    write_csv(path, header, rows())
