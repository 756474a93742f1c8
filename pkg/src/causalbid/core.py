"""Core types and mechanics of repeated second-price auctions.

Each round the bidder sees a feature vector, submits a bid, and nature
draws the highest other bid (HOB) m together with a winning outcome v1
and a baseline outcome v0.  Winning (bid >= m, ties win) costs the HOB
and reveals it through the payment; losing costs nothing and reveals
only the loss.  Exactly one of v1, v0 is observed each round, so the
marginal value v1 - v0 of winning is never observed directly.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AuctionFeedback",
    "BidGrid",
    "Context",
    "HobParams",
    "Policy",
    "make_bid_grid",
    "realized_payoff",
    "run_auction",
]


def _ceil_sqrt(n: int) -> int:
    s = math.isqrt(n)
    return s if s * s == n else s + 1


@dataclass(frozen=True)
class BidGrid:
    """Evenly spaced bid levels spanning [0, 1], first point 0 and last point 1.

    The number of points grows with the horizon so that the spacing is at
    most 1/sqrt(T); a bid restricted to the grid therefore loses at most
    one spacing worth of payoff against the continuum optimum.
    """

    horizon: int
    points: np.ndarray

    @property
    def J(self) -> int:
        return len(self.points)

    @property
    def spacing(self) -> float:
        return 1.0 / (self.J - 1)

    def index_of(self, bid: float) -> int:
        """Exact grid index of `bid`; raises if the bid is off the grid."""
        j = int(round(bid * (self.J - 1)))
        if j < 0 or j >= self.J or abs(self.points[j] - bid) > 1e-12:
            raise ValueError(f"bid {bid!r} is not a grid point")
        return j


def make_bid_grid(T: int) -> BidGrid:
    """Build the bid grid for a horizon of T rounds.

    ceil(sqrt(T)) + 1 points, so the uniform spacing 1/ceil(sqrt(T)) never
    exceeds 1/sqrt(T).  Horizons below 4 produce a degenerate grid and are
    rejected.
    """
    if int(T) != T or T < 4:
        raise ValueError(f"horizon must be an integer >= 4, got {T!r}")
    T = int(T)
    J = _ceil_sqrt(T) + 1
    points = np.linspace(0.0, 1.0, J)
    points.setflags(write=False)
    return BidGrid(horizon=T, points=points)


@dataclass(frozen=True)
class Context:
    """Feature vector with Euclidean norm at most 1.

    Vectors with larger norm are normalized at construction rather than
    rejected, matching how synthetic contexts are generated.
    """

    x: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)  # own copy: frozen below
        norm = float(np.linalg.norm(x))
        if norm > 1.0 + 1e-12:
            x /= norm
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def d(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class AuctionFeedback:
    """What one auction round reveals to the bidder.

    `payment` is present exactly when the auction was won, in which case
    it equals the HOB.  `observed_outcome` is the winning outcome v1 on a
    win and the baseline outcome v0 on a loss.
    """

    won: bool
    payment: float | None
    observed_outcome: float

    def __post_init__(self):
        if self.won != (self.payment is not None):
            raise ValueError("payment must be present iff the auction was won")
        if self.payment is not None and not 0.0 <= self.payment <= 1.0:
            raise ValueError(f"payment outside [0, 1]: {self.payment}")
        if not 0.0 <= self.observed_outcome <= 1.0:
            raise ValueError(f"outcome outside [0, 1]: {self.observed_outcome}")


@dataclass(frozen=True)
class HobParams:
    """Local boundedness constants (omega, lam) declared for the HOB CDF G.

    Any two bids within omega of each other must have CDF values within
    lam; bounded densities and point masses both fit this description.
    """

    omega: float
    lam: float

    def __post_init__(self):
        if not 0.0 < self.omega < 1.0:
            raise ValueError(f"omega must lie in (0, 1), got {self.omega}")
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lam must lie in (0, 1), got {self.lam}")


class Policy(ABC):
    """One bidder playing one simulation run.

    `choose` is called once per round with the revealed context and must
    return a bid in [0, 1]; `update` is called exactly once afterwards
    with the auction feedback.  Instances own mutable state and must not
    be shared across runs.
    """

    #: tag of the most recent decision branch, for trajectory logs
    last_branch: str = "-"

    @abstractmethod
    def choose(self, t: int, context: Context) -> float:
        ...

    @abstractmethod
    def update(self, t: int, bid: float, feedback: AuctionFeedback) -> None:
        ...


def run_auction(hob_draw: float, outcomes: tuple[float, float], bid: float) -> AuctionFeedback:
    """Resolve one second-price auction round.

    `outcomes` is the hidden pair (v1, v0).  Ties go to the bidder: a bid
    equal to the HOB wins and pays it.
    """
    m = float(hob_draw)
    v1, v0 = float(outcomes[0]), float(outcomes[1])
    for name, val in (("hob", m), ("v1", v1), ("v0", v0), ("bid", bid)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name} outside [0, 1]: {val}")
    if bid >= m:
        return AuctionFeedback(won=True, payment=m, observed_outcome=v1)
    return AuctionFeedback(won=False, payment=None, observed_outcome=v0)


def realized_payoff(feedback: AuctionFeedback) -> float:
    """Realized payoff of a resolved round: outcome minus payment if won."""
    if feedback.won:
        return feedback.observed_outcome - feedback.payment
    return feedback.observed_outcome
