"""Per-round UCB computation: two reward centerings, their confidence
widths, and the data-driven choice between them.

The expected payoff can be centered at the baseline outcome (paying only
when the win probability is high does little harm if the value estimate
is bad) or at the winning outcome (symmetrically for low win
probability).  The two centerings carry value-estimation error with
weights G(b) and 1 - G(b) respectively, so picking the right one makes
the per-round width small exactly where the value estimate is weak.  The
pick is made from the estimated CDF alone: prune the grid to bids whose
estimated win probability is near that of two perturbed-value optimizers,
then choose the centering by whether the interval sits near 0 or near 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BidGrid, HobParams
from .hob_cdf import HobStats, cdf_all, width_all

__all__ = [
    "Calibration",
    "CALIBRATIONS",
    "THEORY",
    "UcbTable",
    "book_snapshot",
    "compute_table",
    "perturbed_optimizer",
    "select_interval",
    "ucb_constant",
]


@dataclass(frozen=True)
class Calibration:
    """Scale factors on the analysis constants inside the width machinery.

    The defaults keep every constant exactly as analyzed.  Those constants
    are calibrated for asymptotics: at simulation horizons the CDF width
    saturates its cap and the exploration test can never pass, so desk
    presets shrink them to informative magnitudes.  Property suites that
    check the concentration guarantees always use the defaults.

    cdf_width          multiplies the HOB CDF width u (before its cap at 1)
    gamma              multiplies the (14 log T + 4 sqrt(sum u^2)) block
    reward_width       multiplies the 8/(1-lam) reward-width prefactor
    width_floor        multiplies the additive 2/sqrt(T) reward-width floor
    explore_threshold  overrides ucb_constant(params) as the explore trigger
    """

    cdf_width: float = 1.0
    gamma: float = 1.0
    reward_width: float = 1.0
    width_floor: float = 1.0
    explore_threshold: float | None = None

    def threshold(self, params: HobParams) -> float:
        if self.explore_threshold is not None:
            return self.explore_threshold
        return ucb_constant(params)


THEORY = Calibration()

# Desk presets: frozen from the tuning sweeps driven by the harness
# ratio/rarity checks (see README).  The leveled bidder needs a shorter
# bootstrap than the single-book variant, hence two presets.
DESK_MASTER = Calibration(
    cdf_width=1.0 / 150.0,
    gamma=0.002,
    reward_width=1.0 / 8.0,
    width_floor=0.0,
    explore_threshold=0.7,
)
DESK_TES = Calibration(
    cdf_width=1.0 / 256.0,
    gamma=0.005,
    explore_threshold=0.35,
)

CALIBRATIONS: dict[str, Calibration] = {
    "theory": THEORY,
    "desk_master": DESK_MASTER,
    "desk_tes": DESK_TES,
}


def ucb_constant(params: HobParams) -> float:
    """Exploration threshold constant omega * (1 - lam) / 64."""
    return params.omega * (1.0 - params.lam) / 64.0


@dataclass
class UcbTable:
    """Reward estimates and widths of both centerings on a bid subset."""

    indices: np.ndarray
    r0: np.ndarray
    r1: np.ndarray
    w0: np.ndarray
    w1: np.ndarray

    def reward(self, q: int) -> np.ndarray:
        return self.r1 if q else self.r0

    def width(self, q: int) -> np.ndarray:
        return self.w1 if q else self.w0


def compute_table(
    theta_dot_x: float,
    gamma_norm: float,
    cdf: np.ndarray,
    integral: np.ndarray,
    width: np.ndarray,
    subset: np.ndarray,
    grid: BidGrid,
    params: HobParams,
    cal: Calibration = THEORY,
) -> UcbTable:
    """Evaluate both reward centerings and widths on `subset`.

    All per-index inputs (`cdf`, `integral`, `width`) cover the full grid;
    `gamma_norm` is the value confidence width gamma * ||x|| in the A^-1
    norm at the current context.
    """
    subset = np.asarray(subset, dtype=np.int64)
    g = cdf[subset]
    u = width[subset]
    b = grid.points[subset]
    r0 = g * (theta_dot_x - b) + integral[subset]
    r1 = r0 - theta_dot_x
    pre = cal.reward_width * 8.0 / (1.0 - params.lam)
    floor = cal.width_floor * 2.0 / math.sqrt(grid.horizon)
    w0 = pre * (g * gamma_norm + 4.0 * u + floor)
    w1 = pre * ((1.0 - g) * gamma_norm + 4.0 * u + floor)
    return UcbTable(indices=subset, r0=r0, r1=r1, w0=w0, w1=w1)


def perturbed_optimizer(
    cdf: np.ndarray,
    integral: np.ndarray,
    v_hat: float,
    c: float,
    grid: BidGrid,
) -> int:
    """Grid index maximizing the estimated payoff at the perturbed value.

    The objective is the estimated expected payoff of bidding b when the
    item is worth v_hat + c: win probability times (value minus bid) plus
    the estimated CDF integral (the payment rebate of a second-price
    rule).  Exact ties go to the bid closest to the perturbed value; pass
    a negative `c` for the downward perturbation.
    """
    target = v_hat + c
    obj = cdf * (target - grid.points) + integral
    best = obj.max()
    # the objective is exactly flat wherever the CDF estimate is flat, but
    # the float evaluation wobbles at rounding scale; treat those as ties
    # so the closest-to-target rule actually sees the whole plateau
    ties = np.flatnonzero(obj >= best - 1e-12 * (1.0 + abs(best)))
    return int(ties[np.argmin(np.abs(grid.points[ties] - target))])


def select_interval(
    cdf: np.ndarray,
    integral: np.ndarray,
    v_hat: float,
    params: HobParams,
    grid: BidGrid,
) -> tuple[int, int, int]:
    """Prune the grid around the two perturbed optimizers and pick a centering.

    Returns grid indices (lo, hi) and the centering index q: bids whose
    estimated CDF lies within the perturbation c of the two optimizers'
    CDF values form the kept set (the optimizers themselves are always
    kept, so the interval is never empty); q = 1 when even the lowest
    kept bid already wins with non-trivial probability.
    """
    c = params.omega / 4.0
    eps = (1.0 - params.lam) / 8.0
    j_plus = perturbed_optimizer(cdf, integral, v_hat, +c, grid)
    j_minus = perturbed_optimizer(cdf, integral, v_hat, -c, grid)
    mask = (cdf >= cdf[j_minus] - c) & (cdf <= cdf[j_plus] + c)
    mask[j_plus] = True
    mask[j_minus] = True
    kept = np.flatnonzero(mask)
    lo, hi = int(kept.min()), int(kept.max())
    q = int(cdf[lo] >= eps)
    return lo, hi, q


def book_snapshot(
    stats: HobStats, cal: Calibration = THEORY
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full-grid (cdf, integral, width) arrays from one observation book."""
    cdf = cdf_all(stats)
    integral = stats.grid.spacing * np.cumsum(cdf)
    width = np.minimum(1.0, cal.cdf_width * width_all(stats, cap=False))
    return cdf, integral, width
