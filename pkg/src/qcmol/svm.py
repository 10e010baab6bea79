from typing import List, Optional, Sequence
from dataclasses import dataclass
from enum import Enum
import logging
import numpy as np
import numpy.typing as npt

from .errors import (
    ShapeMismatchError, DegenerateDataError, DatasetFormatError,
    ConfigurationError,
)

log = logging.getLogger(__name__)


class PerformanceLabel(Enum):
    performant = "P"
    underperforming = "U"
    discarded = "D"


@dataclass(frozen=True)
class SvmSettings:
    c: float = 1.0
    tol: float = 1e-3
    max_iter: int = 100_000


@dataclass(frozen=True)
class SvmModel:
    alpha: npt.NDArray[np.float64]
    y: npt.NDArray[np.float64]
    b: float
    c: float
    support: npt.NDArray[np.int64]
    iterations: int = 0


def _check_labels(y: npt.ArrayLike) -> npt.NDArray[np.float64]:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DatasetFormatError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise DegenerateDataError("labels contain a single class")
    return y


def train_svm(gram: npt.ArrayLike, y: npt.ArrayLike, c: float = 1.0,
              tol: float = 1e-3, max_iter: int = 100_000) -> SvmModel:
    # pairwise ascent on the maximal violating pair, tracking
    # g = 1 - y * K (a*y) against the bounds on y*a
    k = np.asarray(gram, dtype=np.float64)
    if k.ndim != 2 or k.shape[0] != k.shape[1]:
        raise ShapeMismatchError(f"gram of shape {k.shape} is not square")
    y = _check_labels(y)
    if y.shape[0] != k.shape[0]:
        raise ShapeMismatchError(
            f"{y.shape[0]} labels for a {k.shape[0]}-point gram")
    if c <= 0:
        raise ConfigurationError(f"C must be positive, got {c}")

    n = y.shape[0]
    alpha = np.zeros(n)
    g = np.ones(n)
    lower = np.where(y > 0, 0.0, -c)
    upper = np.where(y > 0, c, 0.0)
    diag = np.diag(k)
    it = 0
    while it < max_iter:
        ya = y * alpha
        crit = y * g
        up = ya < upper
        low = ya > lower
        i = int(np.argmax(np.where(up, crit, -np.inf)))
        j = int(np.argmin(np.where(low, crit, np.inf)))
        gap = crit[i] - crit[j]
        if not (up[i] and low[j]) or gap < tol:
            break
        quad = diag[i] + diag[j] - 2 * k[i, j]
        step = min(upper[i] - ya[i], ya[j] - lower[j])
        if quad > 1e-12:
            step = min(step, gap / quad)
        g += step * y * (k[j] - k[i])
        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        it += 1
    else:
        log.warning("SMO stopped at the iteration cap (%d)", max_iter)

    alpha = np.clip(alpha, 0.0, c)
    crit = y * g
    free = (alpha > 1e-8) & (alpha < c - 1e-8)
    if np.any(free):
        b = float(np.mean(crit[free]))
    else:
        ya = y * alpha
        m_up = np.max(np.where(ya < upper, crit, -np.inf))
        m_low = np.min(np.where(ya > lower, crit, np.inf))
        b = float(0.5 * (m_up + m_low)) if np.isfinite(m_up + m_low) else 0.0
    return SvmModel(alpha=alpha, y=y, b=b, c=c,
                    support=np.flatnonzero(alpha > 1e-8), iterations=it)


def decision_function(model: SvmModel,
                      cross_gram: npt.ArrayLike) -> npt.NDArray:
    cross = np.atleast_2d(np.asarray(cross_gram, dtype=np.float64))
    if cross.shape[1] != model.y.shape[0]:
        raise ShapeMismatchError(
            f"cross gram has {cross.shape[1]} columns, model was trained "
            f"on {model.y.shape[0]} points")
    return cross @ (model.alpha * model.y) + model.b


def predict(model: SvmModel, cross_gram: npt.ArrayLike) -> npt.NDArray:
    return np.where(decision_function(model, cross_gram) >= 0, 1, -1)


def dual_objective(model: SvmModel, gram: npt.ArrayLike) -> float:
    ay = model.alpha * model.y
    return float(model.alpha.sum() - 0.5 * ay @ np.asarray(gram) @ ay)


def kkt_violation(model: SvmModel, gram: npt.ArrayLike) -> float:
    k = np.asarray(gram, dtype=np.float64)
    y, alpha, c = model.y, model.alpha, model.c
    crit = y * (1.0 - y * (k @ (alpha * y)))
    ya = y * alpha
    up = ya < np.where(y > 0, c, 0.0)
    low = ya > np.where(y > 0, 0.0, -c)
    if not (np.any(up) and np.any(low)):
        return 0.0
    return float(max(0.0, crit[up].max() - crit[low].min()))


def balanced_accuracy(predicted: npt.ArrayLike,
                      actual: npt.ArrayLike) -> float:
    predicted = np.asarray(predicted).reshape(-1)
    actual = np.asarray(actual).reshape(-1)
    if predicted.shape != actual.shape:
        raise ShapeMismatchError(
            f"{predicted.shape[0]} predictions for {actual.shape[0]} labels")
    pos = actual > 0
    if pos.all() or not pos.any():
        raise DegenerateDataError("actual labels contain a single class")
    tpr = np.mean(predicted[pos] > 0)
    tnr = np.mean(predicted[~pos] <= 0)
    return float((tpr + tnr) / 2)


def label_performance(accuracies: Sequence[float], margin: float = 0.10,
                      relative: bool = False,
                      reference: Optional[Sequence[float]] = None
                      ) -> List[PerformanceLabel]:
    """Boundary and range come from reference when given, else accuracies."""
    acc = np.asarray(accuracies, dtype=np.float64)
    if acc.size == 0:
        raise DegenerateDataError("no accuracies to label")
    if margin < 0:
        raise ConfigurationError(f"margin must be >= 0, got {margin}")
    ref = acc if reference is None else np.asarray(reference,
                                                   dtype=np.float64)
    if ref.size == 0:
        raise DegenerateDataError("no reference accuracies")
    hi, lo = ref.max(), ref.min()
    boundary = (hi + lo) / 2
    band = margin * (hi - lo) if relative else margin
    rv = []
    for a in acc:
        if a > boundary + band:
            rv.append(PerformanceLabel.performant)
        elif a < boundary - band:
            rv.append(PerformanceLabel.underperforming)
        else:
            rv.append(PerformanceLabel.discarded)
    return rv


def model_to_text(model: SvmModel) -> str:
    def vec(v):
        return " ".join(repr(float(x)) for x in v)
    return "\n".join([
        f"c {model.c!r}",
        f"b {model.b!r}",
        f"iterations {model.iterations}",
        f"alpha {vec(model.alpha)}",
        f"y {vec(model.y)}",
        "support " + " ".join(str(int(i)) for i in model.support),
    ]) + "\n"
