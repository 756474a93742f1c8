"""Deployable bidders without the level hierarchy.

TesPolicy keeps one global HOB book and one global ridge accumulator,
reuses all history (no conditional-independence machinery by design), and
bids an upper confidence bound with a tunable learning rate; its widths
drop the reward-width prefactor and additive floor of the leveled
bidder.  LinUcbPolicy is the industry baseline that regresses only on
winning outcomes and therefore mistakes the baseline outcome for ad
value whenever losing still pays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .core import AuctionFeedback, Context, HobParams, Policy, make_bid_grid
from .hob_cdf import HobStats, init_estimate
from .ucb_engine import CALIBRATIONS, Calibration, THEORY, book_snapshot, select_interval
from .value_est import RidgeState, clip_propensity, ipw, variance_proxy

__all__ = ["LinUcbPolicy", "TesPolicy"]


@dataclass(frozen=True)
class _Pending:
    t: int
    bid_index: int
    x: np.ndarray
    g_clipped: float
    u: float
    explore: bool


class TesPolicy(Policy):
    """Single-book causal UCB bidder with learning rate eta.

    The first ceil(sqrt(T) log T) rounds bid 1 so every HOB is observed;
    those samples seed both the initial bucket probabilities and the HOB
    counts.  Afterwards every round is absorbed into the global books,
    exploration rounds (endpoint coin flips while the uncertainty budget
    exceeds the threshold) with the constant-propensity weighting.
    """

    def __init__(
        self,
        T: int,
        d: int,
        params: HobParams,
        rng: np.random.Generator,
        eta: float = 1.0,
        calibration: Calibration | str = THEORY,
    ):
        if eta < 0:
            raise ValueError(f"learning rate must be non-negative, got {eta}")
        self.T = int(T)
        self.d = int(d)
        self.params = params
        self.rng = rng
        self.eta = float(eta)
        self.cal = CALIBRATIONS[calibration] if isinstance(calibration, str) else calibration
        self.grid = make_bid_grid(T)
        self.T0 = math.ceil(math.sqrt(self.T) * math.log(self.T))
        self._init_samples: list[float] | None = []
        self.hob = HobStats(grid=self.grid)
        self.ridge = RidgeState(d=self.d)
        self._snap = None
        self._pending: _Pending | None = None
        self.explore_count = 0
        self.last_branch = "-"
        self._thresh = self.cal.threshold(params)

    def in_init_phase(self, t: int) -> bool:
        return t <= self.T0

    def _finalize_init(self) -> None:
        self.hob.p0 = init_estimate(self._init_samples, self.grid)
        self.hob.seed_block(self._init_samples)
        self._init_samples = None
        self._snap = None

    def _snapshot(self):
        if self._snap is None:
            self._snap = book_snapshot(self.hob, self.cal)
        return self._snap

    def choose(self, t: int, context: Context) -> float:
        if self._pending is not None:
            raise RuntimeError("update was not called for the previous round")
        if self.in_init_phase(t):
            self.last_branch = "init"
            self._pending = _Pending(
                t=t, bid_index=self.grid.J - 1, x=context.x,
                g_clipped=0.5, u=1.0, explore=False,
            )
            return 1.0
        if self._init_samples is not None:
            self._finalize_init()

        xv = context.x
        cdf, integral, width = self._snapshot()
        theta = self.ridge.theta_hat()
        tdx = float(theta @ xv)
        gamma_norm = self.ridge.gamma(self.T, self.cal.gamma) * math.sqrt(
            self.ridge.quad_inv(xv)
        )
        lo, hi, q = select_interval(cdf, integral, tdx, self.params, self.grid)

        if gamma_norm + 4.0 * width[-1] > self._thresh:
            j = self.grid.J - 1 if self.rng.integers(2) else 0
            branch, explore = "explore", True
        else:
            sl = slice(lo, hi + 1)
            g = cdf[sl]
            u = width[sl]
            wq = ((1.0 - g) if q else g) * gamma_norm + 4.0 * u
            r0 = g * (tdx - self.grid.points[sl]) + integral[sl]
            rq = (r0 - tdx) if q else r0
            j = lo + int(np.argmax(rq + self.eta * wq))
            branch, explore = "exploit", False

        self._pending = _Pending(
            t=t, bid_index=j, x=xv,
            g_clipped=clip_propensity(float(cdf[j]), self.T),
            u=float(width[j]), explore=explore,
        )
        self.last_branch = branch
        return float(self.grid.points[j])

    def update(self, t: int, bid: float, feedback: AuctionFeedback) -> None:
        rec = self._pending
        if rec is None or rec.t != t:
            raise ValueError("update does not match the pending decision")
        self._pending = None
        if self._init_samples is not None:
            if not feedback.won:
                raise ValueError("initialization bids at 1 always win")
            self._init_samples.append(feedback.payment)
            return
        self.hob.ingest(rec.bid_index, feedback)
        e = ipw(feedback, rec.g_clipped, rec.explore)
        s = variance_proxy(rec.g_clipped, rec.explore)
        self.ridge.absorb(rec.x, e, s, rec.u)
        self._snap = None
        if rec.explore:
            self.explore_count += 1


class LinUcbPolicy(Policy):
    """Ridge-on-winning-outcomes baseline with an optimism bonus.

    Only won rounds update the regression, so the fitted value converges
    to the winning outcome's mean, not the marginal gain of winning; with
    a non-zero baseline outcome this overbids persistently.
    """

    def __init__(self, d: int, alpha: float = 1.0):
        self.d = int(d)
        self.alpha = float(alpha)
        self.A = np.eye(self.d)
        self.z = np.zeros(self.d)
        self._x: np.ndarray | None = None
        self.last_branch = "-"

    def choose(self, t: int, context: Context) -> float:
        x = context.x
        chol = cho_factor(self.A)
        theta = cho_solve(chol, self.z)
        bonus = self.alpha * math.sqrt(float(x @ cho_solve(chol, x)))
        self._x = x
        return float(min(max(float(theta @ x) + bonus, 0.0), 1.0))

    def update(self, t: int, bid: float, feedback: AuctionFeedback) -> None:
        if self._x is None:
            raise ValueError("update called before choose")
        x, self._x = self._x, None
        if feedback.won:
            self.A += np.outer(x, x)
            self.z += feedback.observed_outcome * x
