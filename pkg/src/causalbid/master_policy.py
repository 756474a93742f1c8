"""The leveled rate-optimal bidder.

History is partitioned into geometric-accuracy levels so that each
level's estimators only ever see observations whose bids were chosen
without looking at that level's realized outcomes; this keeps the rounds
inside one level conditionally independent, which is what the CDF and
value concentration arguments need.  Each round walks the levels: explore
uniformly at the endpoints while any width is above the exploration
threshold, absorb the round into the first level whose target accuracy
is not yet met, exploit without recording once every width is resolved,
and otherwise eliminate bids that are provably suboptimal at the current
accuracy before descending a level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import AuctionFeedback, BidGrid, Context, HobParams, Policy, make_bid_grid
from .hob_cdf import HobStats, init_estimate
from .ucb_engine import (
    CALIBRATIONS,
    Calibration,
    THEORY,
    book_snapshot,
    compute_table,
    select_interval,
)
from .value_est import RidgeState, clip_propensity, ipw, variance_proxy

__all__ = ["DecisionRecord", "MasterPolicy"]


@dataclass
class _LevelBooks:
    """One level's observation books plus cached grid snapshots."""

    hob: HobStats
    ridge: RidgeState
    _snap: tuple | None = None

    def snapshot(self, cal: Calibration):
        if self._snap is None:
            self._snap = book_snapshot(self.hob, cal)
        return self._snap

    def invalidate(self):
        self._snap = None


@dataclass(frozen=True)
class DecisionRecord:
    """What `choose` committed to, consumed once by the matching `update`."""

    t: int
    level: int
    branch: str
    bid_index: int
    x: np.ndarray
    g_clipped: float
    u: float


class MasterPolicy(Policy):
    """Leveled bidder with per-level independent histories.

    The first (L + 1) blocks of ceil(sqrt(T) log T) rounds bid 1 so every
    HOB is observed: block 0 feeds the shared initial bucket
    probabilities, and each remaining block seeds one level's HOB counts.
    """

    def __init__(
        self,
        T: int,
        d: int,
        params: HobParams,
        rng: np.random.Generator,
        calibration: Calibration | str = THEORY,
        audit: bool = False,
    ):
        self.T = int(T)
        self.d = int(d)
        self.params = params
        self.rng = rng
        self.cal = CALIBRATIONS[calibration] if isinstance(calibration, str) else calibration
        self.grid: BidGrid = make_bid_grid(T)
        self.L = max(1, math.ceil(0.5 * math.log2(self.T)))
        self.T0 = math.ceil(math.sqrt(self.T) * math.log(self.T))
        self.init_len = (self.L + 1) * self.T0
        self._init_blocks: list[list[float]] = [[] for _ in range(self.L + 1)]
        self.books: list[_LevelBooks] | None = None
        self.explore_log: list[tuple[int, int]] = []
        self.level_counts = np.zeros(self.L, dtype=np.int64)
        self.exploit_count = 0
        self.init_count = 0
        self._pending: DecisionRecord | None = None
        self.audit = audit
        self.audit_log: list[dict] = []
        self.last_branch = "-"
        self._thresh = self.cal.threshold(params)

    # -- phases ---------------------------------------------------------

    def in_init_phase(self, t: int) -> bool:
        return t <= self.init_len

    def _finalize_init(self) -> None:
        p0 = init_estimate(self._init_blocks[0], self.grid)
        books = []
        for level in range(1, self.L + 1):
            stats = HobStats(grid=self.grid, p0=p0.copy())
            stats.seed_block(self._init_blocks[level])
            books.append(_LevelBooks(hob=stats, ridge=RidgeState(d=self.d)))
        self.books = books
        self._init_blocks = None

    # -- policy interface -------------------------------------------------

    def choose(self, t: int, context: Context) -> float:
        if self._pending is not None:
            raise RuntimeError("update was not called for the previous round")
        if self.in_init_phase(t):
            self.last_branch = "init"
            self._pending = DecisionRecord(
                t=t, level=-1, branch="init", bid_index=self.grid.J - 1,
                x=context.x, g_clipped=0.5, u=1.0,
            )
            return 1.0
        if self.books is None:
            self._finalize_init()
        return self._learning_choose(t, context)

    def _learning_choose(self, t: int, context: Context) -> float:
        xv = context.x
        grid = self.grid
        subset = np.arange(grid.J)
        levels_read = []
        subsets_seen = []
        rec = None
        for lev in range(self.L):
            levels_read.append(lev)
            if self.audit:
                subsets_seen.append((lev, subset.copy()))
            bk = self.books[lev]
            cdf, integral, width = bk.snapshot(self.cal)
            theta = bk.ridge.theta_hat()
            tdx = float(theta @ xv)
            gamma_norm = bk.ridge.gamma(self.T, self.cal.gamma) * math.sqrt(
                bk.ridge.quad_inv(xv)
            )
            table = compute_table(
                tdx, gamma_norm, cdf, integral, width, subset, grid, self.params, self.cal
            )
            lo, hi, q = select_interval(cdf, integral, tdx, self.params, grid)
            wq = table.width(q)
            rq = table.reward(q)

            if max(table.w0.max(), table.w1.max()) > self._thresh:
                j = grid.J - 1 if self.rng.integers(2) else 0
                rec = self._record(t, lev, "explore", j, xv, cdf, width)
                break

            gate = 2.0 ** -(lev + 1)
            over = wq > gate
            if over.any():
                j = int(table.indices[over][np.argmax(wq[over])])
                rec = self._record(t, lev, "assign", j, xv, cdf, width)
                break

            if lev == self.L - 1 or (wq <= 1.0 / math.sqrt(self.T)).all():
                j = int(table.indices[np.argmax(rq)])
                rec = self._record(t, lev, "exploit", j, xv, cdf, width)
                break

            keep = rq >= rq.max() - 2.0 * gate
            inside = (table.indices >= lo) & (table.indices <= hi)
            nxt = table.indices[keep & inside]
            if nxt.size == 0:
                nxt = table.indices[[int(np.argmax(rq))]]
            subset = nxt

        self._pending = rec
        self.last_branch = rec.branch
        if self.audit:
            self.audit_log.append(
                {"t": t, "levels_read": tuple(levels_read), "level": rec.level,
                 "branch": rec.branch, "book_counts": tuple(int(c) for c in self.level_counts),
                 "subsets": subsets_seen}
            )
        return float(grid.points[rec.bid_index])

    def _record(self, t, lev, branch, j, xv, cdf, width) -> DecisionRecord:
        return DecisionRecord(
            t=t, level=lev, branch=branch, bid_index=j, x=xv,
            g_clipped=clip_propensity(float(cdf[j]), self.T), u=float(width[j]),
        )

    def update(self, t: int, bid: float, feedback: AuctionFeedback) -> None:
        rec = self._pending
        if rec is None or rec.t != t:
            raise ValueError("update does not match the pending decision")
        if abs(self.grid.points[rec.bid_index] - bid) > 1e-12:
            raise ValueError("update bid does not match the chosen bid")
        self._pending = None
        if rec.branch == "init":
            if not feedback.won:
                raise ValueError("initialization bids at 1 always win")
            self._init_blocks[(t - 1) // self.T0].append(feedback.payment)
            self.init_count += 1
            return
        if rec.branch == "exploit":
            self.exploit_count += 1
            return
        explore = rec.branch == "explore"
        bk = self.books[rec.level]
        bk.hob.ingest(rec.bid_index, feedback)
        e = ipw(feedback, rec.g_clipped, explore)
        s = variance_proxy(rec.g_clipped, explore)
        bk.ridge.absorb(rec.x, e, s, rec.u)
        bk.invalidate()
        self.level_counts[rec.level] += 1
        if explore:
            self.explore_log.append((t, rec.level))

    # -- diagnostics ------------------------------------------------------

    def rounds_accounted(self) -> int:
        """Init + per-level + exploit rounds; equals t after round t."""
        return self.init_count + int(self.level_counts.sum()) + self.exploit_count
