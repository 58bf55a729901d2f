"""High-probability bounds from sampled predictions.

Two kinds of evidence are supported. Vote counts give a Clopper-Pearson lower
bound on a class probability. Score samples give a DKW band on their CDF,
which bounds the mean from below and a second moment from above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InputError
from .numerics import beta_quantile


@dataclass(frozen=True, eq=False)
class VoteBatch:
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if np.any(counts < 0):
            raise InputError("vote counts must be nonnegative")
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_labels(cls, labels, n_classes: int) -> "VoteBatch":
        return cls(np.bincount(np.asarray(labels, dtype=np.int64), minlength=n_classes))


@dataclass(frozen=True, eq=False)
class ScoreBatch:
    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float).reshape(-1)
        if np.any(np.isnan(scores)) or np.any(scores < 0) or np.any(scores > 1):
            raise InputError("scores must lie in [0, 1]")
        object.__setattr__(self, "scores", scores)

    @property
    def n(self) -> int:
        return self.scores.size


@dataclass(frozen=True, eq=False)
class CdfBounds:
    thresholds: np.ndarray
    empirical: np.ndarray
    margin: float
    lower: np.ndarray
    upper: np.ndarray
    alpha: float


def candidate_label(evidence) -> int:
    """Index of the largest count or mean score; ties go to the smaller index.

    Accepts a :class:`VoteBatch`, a 1-d array of per-class means, or a 2-d
    array of per-sample class scores (averaged over rows).
    """
    if isinstance(evidence, VoteBatch):
        if evidence.n == 0:
            raise InputError("cannot pick a candidate from an empty batch")
        return int(np.argmax(evidence.counts))
    arr = np.asarray(evidence, dtype=float)
    if arr.size == 0:
        raise InputError("cannot pick a candidate from an empty batch")
    if arr.ndim == 2:
        arr = arr.mean(axis=0)
    return int(np.argmax(arr))


def clopper_pearson_lower(k: int, n: int, alpha: float) -> float:
    """One-sided lower confidence bound on a binomial success probability."""
    if not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n, got k={k}, n={n}")
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if k == 0:
        return 0.0
    return beta_quantile(k, n - k + 1, alpha)


def correction(alpha: float, n_tests: int, scheme: str, counts: Sequence[int] | None = None) -> np.ndarray:
    """Per-test significance levels controlling the family-wise error rate.

    ``holm`` gives the test with the ``k``-th largest count ``alpha / (n + 1 - k)``.
    Equal counts keep their original order.
    """
    if n_tests < 1:
        raise InputError("need at least one test")
    if scheme == "bonferroni":
        return np.full(n_tests, alpha / n_tests)
    if scheme != "holm":
        raise InputError(f"unknown correction scheme {scheme!r}")
    if counts is None or len(counts) != n_tests:
        raise InputError("holm correction needs one count per test")
    order = np.argsort(-np.asarray(counts, dtype=float), kind="stable")
    levels = np.empty(n_tests)
    for rank, test in enumerate(order, start=1):
        levels[test] = alpha / (n_tests + 1 - rank)
    return levels


def dkw_margin(n: int, alpha: float) -> float:
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 1:
        raise InputError("need at least one sample")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def default_thresholds(m: int = 51) -> np.ndarray:
    return np.linspace(0.0, 1.0, m)


def dkw_bounds(batch: ScoreBatch, thresholds, alpha: float) -> CdfBounds:
    """Simultaneous band on ``Pr[X <= tau]`` at every threshold."""
    taus = np.asarray(thresholds, dtype=float).reshape(-1)
    if taus.size == 0 or np.any(np.diff(taus) < 0):
        raise InputError("thresholds must be a nonempty ascending sequence")
    if taus[0] < 0 or taus[-1] > 1:
        raise InputError("thresholds must lie in [0, 1]")
    margin = dkw_margin(batch.n, alpha)
    ordered = np.sort(batch.scores)
    empirical = np.searchsorted(ordered, taus, side="right") / batch.n
    return CdfBounds(
        thresholds=taus,
        empirical=empirical,
        margin=margin,
        lower=np.clip(empirical - margin, 0.0, 1.0),
        upper=np.clip(empirical + margin, 0.0, 1.0),
        alpha=alpha,
    )


def mean_lower(bounds: CdfBounds) -> float:
    """Lower bound on ``E[X]`` for ``X`` in ``[0, 1]``.

    Integrates the survival function over the threshold grid, using on each
    interval its value at the right endpoint under the upper CDF envelope.
    """
    taus = bounds.thresholds
    upper = bounds.upper
    value = taus[-1] - taus[0] * upper[0] - float(np.sum(np.diff(taus) * upper[1:]))
    return float(np.clip(value, 0.0, 1.0))


def _bin_maxima(taus: np.ndarray, nu: float) -> np.ndarray:
    """Maximum of ``(k - nu)^2`` on each of the ``M + 1`` bins cut by the thresholds."""
    edges = np.concatenate([[0.0], taus, [1.0]])
    left, right = edges[:-1], edges[1:]
    return np.maximum((left - nu) ** 2, (right - nu) ** 2)


def second_moment_upper(bounds: CdfBounds, nu: float) -> float:
    """Upper bound on ``E[(X - nu)^2]`` for ``X`` in ``[0, 1]``.

    Bounds the squared deviation by its maximum on each bin and picks,
    per threshold, whichever envelope makes the telescoped sum largest.
    """
    xi = _bin_maxima(bounds.thresholds, nu)
    coeff = xi[:-1] - xi[1:]
    cdf = np.where(coeff >= 0, bounds.upper, bounds.lower)
    return float(xi[-1] + np.sum(coeff * cdf))


def abstain(value: float) -> bool:
    return not value > 0.5
