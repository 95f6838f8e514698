"""Exact average holdout error of k-NN over every train/holdout split.

For ``N = r + n`` labelled points, the holdout Gibbs classifier is the
uniform mixture of the ``C(N, n)`` k-NN classifiers trained on the points
outside each size-``n`` holdout set ``H``. Its average holdout error equals
the mean, over points ``q``, of the probability that ``q`` is misclassified
by a split drawn uniformly among those with ``q`` in ``H``.

That per-point probability is computed by a forward DP over ``q``'s
neighbours in distance order. Mass is absorbed the moment the ``k``-th
neighbour outside ``H`` is placed, because the ``k`` votes are then fixed.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._validation import DomainError, check_nonnegative_int, check_positive_int

__all__ = [
    "LabeledDataset",
    "SplitDPState",
    "neighbor_ordering",
    "split_membership_probability",
    "split_dp_trace",
    "per_example_misclassification_probability",
    "gibbs_average_holdout_error",
    "brute_force_average_holdout_error",
    "nearest_neighbor_disagreement_bound",
    "HoldoutGibbsKNN",
    "load_dataset",
]


@dataclass(frozen=True)
class LabeledDataset:
    """Points, their binary labels and the holdout size ``n`` used by every split."""

    X: np.ndarray
    y: np.ndarray
    n: int

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        y = np.asarray(self.y)
        if X.ndim != 2 or X.shape[1] < 1:
            raise DomainError("points must be a 2-D array with at least one feature")
        if len(X) != len(y):
            raise DomainError(f"{len(X)} points but {len(y)} labels")
        if len(X) < 2:
            raise DomainError("need at least 2 points")
        n = check_positive_int(self.n, "n")
        if n > len(X) - 1:
            raise DomainError(f"holdout size n={n} must leave at least one training point")
        if len(np.unique(y)) > 2:
            raise DomainError("only binary labels are supported")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "n", n)

    @property
    def r(self):
        return len(self.X) - self.n

    def __len__(self):
        return len(self.X)


def neighbor_ordering(data: LabeledDataset, q: int) -> np.ndarray:
    """Indices of every other point by ascending Euclidean distance to point ``q``.

    Equal distances are ordered by ascending index.
    """
    q = check_nonnegative_int(q, "q")
    if q >= len(data):
        raise DomainError(f"point index {q} out of range")
    sq = ((data.X - data.X[q]) ** 2).sum(axis=1)
    others = np.delete(np.arange(len(data)), q)
    return others[np.lexsort((others, sq[others]))]


def split_membership_probability(r: int, n: int, i: int, h: int) -> float:
    """P(the i-th neighbour of q is in H | h of the first i-1 are, and q is)."""
    if not 1 <= i <= r + n - 1:
        raise DomainError(f"neighbour rank i={i} outside [1, {r + n - 1}]")
    if not 0 <= h < i:
        raise DomainError(f"h={h} must satisfy 0 <= h < i={i}")
    return max((n - h - 1) / (r + n - i), 0.0)


@dataclass
class SplitDPState:
    """Distribution over (h neighbours in H, v wrong votes outside H) after ``i`` neighbours."""

    i: int
    table: np.ndarray
    absorbed_error: float
    absorbed_correct: float

    @property
    def total_mass(self):
        return float(self.table.sum()) + self.absorbed_error + self.absorbed_correct


def _vote_trace(wrong, pool, slots, k):
    """Forward DP over neighbours ``wrong[0], wrong[1], ...`` of a query.

    ``pool`` neighbours exist, ``slots`` of them are drawn uniformly into the
    holdout set. ``wrong[i]`` says whether neighbour ``i + 1`` votes against
    the query's label.
    """
    threshold = (k + 1) // 2
    table = np.zeros((slots + 1, k))
    table[0, 0] = 1.0
    err = ok = 0.0
    state = SplitDPState(0, table, err, ok)
    yield state
    hs = np.arange(slots + 1)
    for i in range(1, pool + 1):
        if not table.any():
            break
        p = np.maximum((slots - hs) / (pool - i + 1), 0.0)
        into_h = table * p[:, None]
        out_h = table * (1.0 - p)[:, None]
        new = np.zeros_like(table)
        new[1:] += into_h[:-1]
        w = int(wrong[i - 1])
        # rows with i - 1 - h == k - 1 place their k-th outside vote now
        h_full = i - k
        if 0 <= h_full <= slots:
            done = out_h[h_full].copy()
            out_h[h_full] = 0.0
            votes = np.arange(k) + w
            err += float(done[votes >= threshold].sum())
            ok += float(done[votes < threshold].sum())
        if w:
            new[:, 1:] += out_h[:, :-1]
        else:
            new += out_h
        table = new
        yield SplitDPState(i, table, err, ok)


def _check_k(k, r):
    k = check_positive_int(k, "k")
    if k % 2 == 0:
        raise DomainError(f"k must be odd, got {k}")
    if k > r:
        raise DomainError(f"k={k} exceeds the training size r={r}")
    return k


def _wrong_flags(data, q):
    order = neighbor_ordering(data, q)
    return data.y[order] != data.y[q]


def split_dp_trace(data: LabeledDataset, q: int, k: int) -> Iterator[SplitDPState]:
    """Every intermediate DP state for query ``q``; exposed for inspection and tests."""
    k = _check_k(k, data.r)
    return _vote_trace(_wrong_flags(data, q), len(data) - 1, data.n - 1, k)


def per_example_misclassification_probability(data: LabeledDataset, q: int, k: int) -> float:
    """P(k-NN trained outside H misclassifies q), over uniform H of size n containing q."""
    state = None
    for state in split_dp_trace(data, q, k):
        pass
    return state.absorbed_error


def gibbs_average_holdout_error(data: LabeledDataset, k: int) -> float:
    """Average holdout error over all ``C(r + n, n)`` splits, computed in polynomial time."""
    k = _check_k(k, data.r)
    probs = [per_example_misclassification_probability(data, q, k) for q in range(len(data))]
    return math.fsum(probs) / len(data)


def brute_force_average_holdout_error(data: LabeledDataset, k: int, cap: int = 10**6) -> float:
    """Enumerate every holdout set, train k-NN on the rest and average its holdout error."""
    k = _check_k(k, data.r)
    total = len(data)
    n_splits = math.comb(total, data.n)
    if n_splits > cap:
        raise DomainError(f"{n_splits} splits exceed the enumeration cap of {cap}")
    points = [tuple(float(v) for v in row) for row in data.X]
    labels = list(data.y)

    def sqdist(a, b):
        return sum((u - v) ** 2 for u, v in zip(points[a], points[b]))

    split_errors = []
    for holdout in itertools.combinations(range(total), data.n):
        held = set(holdout)
        train = [i for i in range(total) if i not in held]
        mistakes = 0
        for q in holdout:
            nearest = sorted(train, key=lambda i: (sqdist(q, i), i))[:k]
            wrong_votes = sum(labels[i] != labels[q] for i in nearest)
            mistakes += wrong_votes > k // 2
        split_errors.append(mistakes / data.n)
    return math.fsum(split_errors) / n_splits


def nearest_neighbor_disagreement_bound(n_total: int, n_holdout: int, k: int = 1) -> float:
    """Bound on how often the holdout Gibbs k-NN and the full-data k-NN disagree.

    They can only disagree when one of the full classifier's ``k`` nearest
    neighbours sits in the holdout set, which happens with probability
    ``1 - C(N - k, n) / C(N, n)``. For 1-NN this is ``n / N``.
    """
    n_total = check_positive_int(n_total, "n_total")
    n_holdout = check_positive_int(n_holdout, "n_holdout")
    k = check_positive_int(k, "k")
    if n_holdout >= n_total or k > n_total - n_holdout:
        raise DomainError("need k <= N - n training points")
    keep = Fraction(math.comb(n_total - k, n_holdout), math.comb(n_total, n_holdout))
    return float(1 - keep)


def load_dataset(path, n_holdout, header=False, delimiter=","):
    """Read a delimiter-separated file of feature columns followed by a label column."""
    import csv

    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh, delimiter=delimiter) if row and any(row)]
    if header:
        rows = rows[1:]
    if not rows:
        raise DomainError(f"{path} contains no data rows")
    try:
        X = np.array([[float(v) for v in row[:-1]] for row in rows])
    except ValueError as exc:
        raise DomainError(f"non-numeric feature in {path}: {exc}") from None
    y = np.array([row[-1].strip() for row in rows])
    return LabeledDataset(X, y, n_holdout)


class HoldoutGibbsKNN(ClassifierMixin, BaseEstimator):
    """Gibbs mixture of k-NN classifiers over every size-``n_holdout`` holdout split.

    ``fit`` computes the exact average holdout error (``holdout_error_``) and
    each training point's misclassification probability. ``predict_proba``
    gives, for a new point, the fraction of splits whose k-NN votes each class.

    Parameters
    ----------
    n_holdout : int
        Number of examples withheld in each split.
    n_neighbors : int, default=1
        Odd number of neighbours voting.
    """

    def __init__(self, n_holdout=1, n_neighbors=1):
        self.n_holdout = n_holdout
        self.n_neighbors = n_neighbors

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float)
        self.classes_ = np.unique(y)
        if len(self.classes_) > 2:
            raise ValueError("HoldoutGibbsKNN supports binary labels only")
        data = LabeledDataset(X, y, self.n_holdout)
        k = _check_k(self.n_neighbors, data.r)
        self.pointwise_error_ = np.array(
            [per_example_misclassification_probability(data, q, k) for q in range(len(data))]
        )
        self.holdout_error_ = math.fsum(self.pointwise_error_) / len(data)
        self.X_fit_ = X
        self.y_fit_ = y
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        pool = len(self.X_fit_)
        idx = np.arange(pool)
        positive = self.classes_[-1]
        proba = np.empty((len(X), len(self.classes_)))
        for row, x in enumerate(X):
            sq = ((self.X_fit_ - x) ** 2).sum(axis=1)
            order = np.lexsort((idx, sq))
            # "wrong" here means a vote for the last class
            votes = self.y_fit_[order] == positive
            state = None
            for state in _vote_trace(votes, pool, self.n_holdout, self.n_neighbors):
                pass
            proba[row, -1] = state.absorbed_error
            proba[row, 0] = state.absorbed_correct
        if len(self.classes_) == 1:
            proba = np.ones((len(X), 1))
        return proba

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]
