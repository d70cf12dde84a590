"""Accuracy and average precision over ranked scores."""
import numpy as np

from .errors import EmptyInputError, InvalidLabelError, ShapeError, UndefinedMetricError


def _scores_labels(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ShapeError(f"{s.size} scores vs {y.size} labels")
    if s.size == 0:
        raise EmptyInputError("no scores")
    if not np.isin(y, (0, 1)).all():
        raise InvalidLabelError("labels must be 0 or 1")
    return s, y.astype(np.int64)


def accuracy(scores, labels, threshold=0.5):
    """Fraction of samples where ``score >= threshold`` agrees with the label."""
    s, y = _scores_labels(scores, labels)
    return float(np.count_nonzero((s >= threshold).astype(np.int64) == y)) / s.size


def ranking(scores):
    """Indices by descending score; ties keep the original index order."""
    s = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(s.size), -s))


def average_precision(scores, labels):
    """Non-interpolated AP: mean of precision@k taken at each positive's rank."""
    s, y = _scores_labels(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("average precision needs at least one positive")
    ranked = y[ranking(s)]
    hits = np.cumsum(ranked)
    k = np.arange(1, ranked.size + 1)
    return float(np.sum((hits / k)[ranked == 1]) / n_pos)
