"""Online causal bidding in repeated second-price auctions.

A bidder repeatedly faces a second-price auction where the item's value
is the marginal gain of winning (the treatment effect of showing the ad)
rather than the raw winning outcome.  The package provides the auction
mechanics, the interval-splitting HOB CDF estimator with its confidence
widths, inverse-propensity value estimation with a weighted ridge model,
the leveled rate-optimal bidder and its deployable single-book variant, a
winning-outcome-only baseline, synthetic environments with exact payoff
oracles, and a seeded experiment harness with verification suites.
"""

from .core import (
    AuctionFeedback,
    BidGrid,
    Context,
    HobParams,
    Policy,
    make_bid_grid,
    realized_payoff,
    run_auction,
)
from .envs import (
    AtomMixHob,
    BetaHob,
    HobModel,
    LowerBoundEnv,
    PeriodicEnv,
    SimpleEnv,
    UniformHob,
    atom_mix_cdf,
    beta_cdf,
    expected_reward,
    lower_bound_instance,
    oracle_best,
    separation_check,
)
from .harness import ExperimentConfig, aggregate, emit, load_config, run_experiment
from .hob_cdf import (
    HobStats,
    InsufficientDataError,
    cdf_estimate,
    cdf_width,
    init_estimate,
    integral_estimate,
)
from .master_policy import MasterPolicy
from .practical import LinUcbPolicy, TesPolicy
from .ucb_engine import (
    Calibration,
    UcbTable,
    compute_table,
    perturbed_optimizer,
    select_interval,
    ucb_constant,
)
from .value_est import RidgeState, clip_propensity, ipw, variance_proxy

__version__ = "0.1.0"
