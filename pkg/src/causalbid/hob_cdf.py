"""Estimation of the highest-other-bid CDF from one-sided payment feedback.

The CDF on the grid is estimated by interval splitting: G(b^j) is a sum of
per-bucket probabilities, where bucket j is the half-open interval
(b^{j-1}, b^j] (bucket 1 is the atom at 0).  A round bid at grid level
j_t observes bucket membership for every bucket j <= j_t: a loss at
b^{j_t} >= b^j puts the HOB above b^j, and a win reveals the HOB exactly
through the payment.  Lower buckets therefore accumulate observations
faster, which is what makes the split estimator tighter than a direct
empirical CDF at high bids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import AuctionFeedback, BidGrid

__all__ = [
    "HobStats",
    "InsufficientDataError",
    "bucket_index",
    "cdf_all",
    "cdf_estimate",
    "cdf_width",
    "init_estimate",
    "integral_all",
    "integral_estimate",
    "width_all",
]


class InsufficientDataError(RuntimeError):
    """A queried grid index has no observations yet."""


def bucket_index(grid: BidGrid, m) -> np.ndarray | int:
    """Bucket of an observed HOB: smallest j with m <= b^j (m = 0 maps to 0)."""
    idx = np.searchsorted(grid.points, m, side="left")
    return int(idx) if np.isscalar(m) else idx


@dataclass
class HobStats:
    """Per-grid-index observation counts backing the split CDF estimator.

    n[j]  -- rounds whose chosen bid was at least b^j (bucket j observable)
    c[j]  -- among those, rounds whose HOB was inferred to lie in bucket j
    p0[j] -- initial bucket probability estimates from held-out samples,
             used only inside the confidence width
    """

    grid: BidGrid
    n: np.ndarray = field(default=None)
    c: np.ndarray = field(default=None)
    p0: np.ndarray = field(default=None)

    def __post_init__(self):
        J = self.grid.J
        if self.n is None:
            self.n = np.zeros(J, dtype=np.int64)
        if self.c is None:
            self.c = np.zeros(J, dtype=np.int64)
        if self.p0 is None:
            self.p0 = np.zeros(J, dtype=float)

    def ingest(self, bid_index: int, feedback: AuctionFeedback) -> None:
        """Absorb one round bid at grid level `bid_index`.

        Every bucket up to the chosen level gains an observation; the
        winning payment places the HOB in exactly one of them, a loss in
        none of them.
        """
        if not 0 <= bid_index < self.grid.J:
            raise ValueError(f"bid index {bid_index} outside grid")
        if feedback.won and feedback.payment is None:
            raise ValueError("winning feedback must carry the payment")
        self.n[: bid_index + 1] += 1
        if feedback.won:
            k = bucket_index(self.grid, feedback.payment)
            # a win at b^{j_t} implies m <= b^{j_t}, so k <= bid_index always
            if k <= bid_index:
                self.c[k] += 1

    def seed_block(self, samples) -> None:
        """Absorb a block of fully observed HOBs from rounds bid at 1."""
        samples = np.asarray(samples, dtype=float)
        self.n += len(samples)
        buckets = bucket_index(self.grid, samples)
        np.add.at(self.c, buckets, 1)

    @classmethod
    def from_log(cls, grid: BidGrid, bid_indices, won, payments, p0=None) -> "HobStats":
        """Rebuild stats from a full round log; must match incremental ingest."""
        bid_indices = np.asarray(bid_indices, dtype=np.int64)
        won = np.asarray(won, dtype=bool)
        payments = np.asarray(payments, dtype=float)
        J = grid.J
        n = np.zeros(J, dtype=np.int64)
        hist = np.bincount(bid_indices, minlength=J)
        n[:] = hist[::-1].cumsum()[::-1]
        c = np.zeros(J, dtype=np.int64)
        if won.any():
            buckets = bucket_index(grid, payments[won])
            ok = buckets <= bid_indices[won]
            np.add.at(c, buckets[ok], 1)
        stats = cls(grid=grid, n=n, c=c)
        if p0 is not None:
            stats.p0 = np.asarray(p0, dtype=float)
        return stats


def init_estimate(samples, grid: BidGrid) -> np.ndarray:
    """Bucket probabilities from held-out HOB samples (all observed).

    Returns the per-bucket empirical frequencies; they sum to 1 because
    every sample in [0, 1] lands in exactly one bucket.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size == 0:
        raise ValueError("need at least one held-out HOB sample")
    counts = np.bincount(bucket_index(grid, samples), minlength=grid.J)
    return counts / samples.size


def _check_counts(stats: HobStats, upto: int) -> None:
    if (stats.n[: upto + 1] == 0).any():
        raise InsufficientDataError(
            f"no observations at some grid index <= {upto}; run initialization first"
        )


def cdf_all(stats: HobStats) -> np.ndarray:
    """Split CDF estimate at every grid point, capped at 1."""
    _check_counts(stats, stats.grid.J - 1)
    ratios = stats.c / stats.n
    return np.minimum(1.0, np.cumsum(ratios))


def cdf_estimate(stats: HobStats, j: int) -> float:
    """CDF estimate at grid index j: capped sum of per-bucket ratios."""
    _check_counts(stats, j)
    return float(min(1.0, (stats.c[: j + 1] / stats.n[: j + 1]).sum()))


def integral_all(stats: HobStats) -> np.ndarray:
    """Right-endpoint Riemann sums of the estimated CDF up to each grid point."""
    return stats.grid.spacing * np.cumsum(cdf_all(stats))


def integral_estimate(stats: HobStats, j: int) -> float:
    """Approximate integral of the CDF from 0 to b^j (expected-payment piece)."""
    _check_counts(stats, j)
    return float(integral_all(stats)[j])


def width_all(stats: HobStats, cap: bool = True, scale: float = 1.0) -> np.ndarray:
    """Bernstein-style confidence width of the split CDF at every grid point.

    The Bernstein term sums, over the buckets below the queried bid, a
    log-T/count rate weighted by the initial bucket probability plus a
    padding that covers the initial estimates' own error; a second-order
    log-T/count tail is added on top.  Everything estimated lives in
    [0, 1] so the width is capped at 1.  `scale` rescales the constants
    for desk-size experiments; 1.0 keeps them as analyzed.
    """
    grid = stats.grid
    _check_counts(stats, grid.J - 1)
    log_t = math.log(grid.horizon)
    inv_n = 1.0 / stats.n
    pad = 12.0 * log_t / math.sqrt(grid.horizon)
    inner = np.cumsum(2.0 * log_t * inv_n * (stats.p0 + pad))
    u = scale * (8.0 * np.sqrt(inner) + 8.0 * log_t * inv_n)
    return np.minimum(1.0, u) if cap else u


def cdf_width(stats: HobStats, j: int, cap: bool = True, scale: float = 1.0) -> float:
    """Confidence width at grid index j; see `width_all`."""
    _check_counts(stats, j)
    return float(width_all(stats, cap=cap, scale=scale)[j])
