"""Synthetic auction environments and exact expected-payoff oracles.

HOB models expose the CDF, its running integral, and honest local
boundedness constants; environments couple an HOB model with a context
process and outcome mechanism whose marginal value is linear in the
context.  Exact per-family payoff formulas keep per-round expected-regret
tracking cheap, with a grid-sweep oracle as the generic fallback.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import betainc, betaln

from .core import Context, HobParams

__all__ = [
    "AtomMixHob",
    "BetaHob",
    "Environment",
    "HobModel",
    "LowerBoundEnv",
    "OracleBest",
    "PeriodicEnv",
    "SimpleEnv",
    "UniformHob",
    "atom_mix_cdf",
    "beta_cdf",
    "expected_reward",
    "lower_bound_instance",
    "make_hob",
    "oracle_best",
    "separation_check",
    "sigmoid",
]


def sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


def beta_cdf(a: float, b: float, x) -> float | np.ndarray:
    """Regularized incomplete beta function I_x(a, b) on [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValueError(f"beta shape parameters must be positive, got {a}, {b}")
    xs = np.asarray(x, dtype=float)
    if (xs < 0).any() or (xs > 1).any():
        raise ValueError("beta_cdf argument outside [0, 1]")
    out = betainc(a, b, xs)
    return float(out) if np.isscalar(x) else out


def atom_mix_cdf(delta: float, b) -> float | np.ndarray:
    """CDF of the half-uniform, half point-mass mixture with atom at 1/4 + delta."""
    if not 0.0 < delta < 0.75:
        raise ValueError(f"delta must lie in (0, 3/4), got {delta}")
    bs = np.asarray(b, dtype=float)
    out = bs / 2.0 + 0.5 * (bs >= 0.25 + delta)
    return float(out) if np.isscalar(b) else out


class HobModel(ABC):
    """An i.i.d. highest-other-bid distribution on [0, 1]."""

    @abstractmethod
    def sample(self, rng: np.random.Generator, size=None):
        ...

    @abstractmethod
    def cdf(self, b):
        ...

    @abstractmethod
    def local_params(self) -> HobParams:
        """Honest (omega, lam) local-boundedness constants for this CDF."""

    def atoms(self) -> tuple[float, ...]:
        return ()

    def integral_cdf(self, b) -> float | np.ndarray:
        """Integral of the CDF from 0 to b, exact or quadrature to 1e-8.

        Atoms contribute only through the CDF's value on continuity
        intervals, so the quadrature is split at them.
        """

        def one(upper: float) -> float:
            cuts = sorted(a for a in self.atoms() if 0.0 < a < upper)
            total, prev = 0.0, 0.0
            for cut in cuts + [upper]:
                val, _ = quad(self.cdf, prev, cut, epsabs=1e-10, limit=200)
                total += val
                prev = cut
            return total

        if np.isscalar(b):
            return one(float(b))
        return np.array([one(float(x)) for x in np.asarray(b, dtype=float)])

    def exact_best(self, v: float) -> "OracleBest | None":
        """Closed-form optimal bid for value v, when the family has one."""
        return None


@dataclass(frozen=True)
class OracleBest:
    bid: float
    reward: float


def expected_reward(hob: HobModel, v: float, b: float) -> float:
    """Baseline-centered expected payoff of bidding b when the item is worth v.

    Win probability times (value minus bid), plus the second-price rebate
    written as the integral of the CDF below the bid.
    """
    if not 0.0 <= b <= 1.0:
        raise ValueError(f"bid outside [0, 1]: {b}")
    return float(hob.cdf(b)) * (v - b) + float(hob.integral_cdf(b))


def _reward_curve(hob: HobModel, v: float, bids: np.ndarray) -> np.ndarray:
    return hob.cdf(bids) * (v - bids) + hob.integral_cdf(bids)


def oracle_best(hob: HobModel, v: float, coarse: float = 1e-4, fine: float = 1e-6) -> OracleBest:
    """Best bid by sweep: coarse grid plus atoms, refined locally.

    For a strictly increasing CDF and v in [0, 1] the result lands within
    the refinement step of v (truthful bidding); atoms are always added
    as candidates because the payoff can jump there.
    """
    if not -1.0 <= v <= 1.0:
        raise ValueError(f"value outside [-1, 1]: {v}")
    bids = np.arange(0.0, 1.0 + coarse / 2, coarse)
    bids = np.unique(np.clip(np.concatenate([bids, np.asarray(hob.atoms())]), 0.0, 1.0))
    rewards = _reward_curve(hob, v, bids)
    center = bids[int(np.argmax(rewards))]
    local = np.arange(max(0.0, center - coarse), min(1.0, center + coarse) + fine / 2, fine)
    local = np.unique(np.clip(np.concatenate([local, np.asarray(hob.atoms())]), 0.0, 1.0))
    rloc = _reward_curve(hob, v, local)
    k = int(np.argmax(rloc))
    return OracleBest(bid=float(local[k]), reward=float(rloc[k]))


class UniformHob(HobModel):
    """Uniform[0, 1] competition; density bound 1 gives lam = omega."""

    def __init__(self, omega: float = 0.2):
        self._params = HobParams(omega=omega, lam=min(0.99, omega))

    def sample(self, rng, size=None):
        return rng.random() if size is None else rng.random(size)

    def cdf(self, b):
        return np.clip(b, 0.0, 1.0)

    def integral_cdf(self, b):
        bc = np.clip(b, 0.0, 1.0)
        return bc * bc / 2.0

    def local_params(self):
        return self._params

    def exact_best(self, v):
        b = min(max(v, 0.0), 1.0)
        return OracleBest(bid=b, reward=expected_reward(self, v, b))


class BetaHob(HobModel):
    """Beta(a, b) competition with a bounded density."""

    def __init__(self, a: float = 5.0, b: float = 7.0, omega: float = 0.1):
        if a <= 1 or b <= 1:
            raise ValueError("density unbounded unless both shape parameters exceed 1")
        self.a = float(a)
        self.b = float(b)
        mode = (self.a - 1.0) / (self.a + self.b - 2.0)
        self._density_max = math.exp(
            (self.a - 1.0) * math.log(mode)
            + (self.b - 1.0) * math.log1p(-mode)
            - betaln(self.a, self.b)
        )
        lam = self._density_max * omega
        if lam >= 1.0:
            raise ValueError(f"omega too large for an honest lam: {lam:.3f} >= 1")
        self._params = HobParams(omega=omega, lam=lam)

    def sample(self, rng, size=None):
        return rng.beta(self.a, self.b) if size is None else rng.beta(self.a, self.b, size)

    def cdf(self, b):
        return betainc(self.a, self.b, np.clip(b, 0.0, 1.0))

    def integral_cdf(self, b):
        # int_0^b G = b G(b) - E[M 1(M <= b)], the mean term in closed form
        bc = np.clip(b, 0.0, 1.0)
        mean = self.a / (self.a + self.b)
        return bc * betainc(self.a, self.b, bc) - mean * betainc(self.a + 1.0, self.b, bc)

    def local_params(self):
        return self._params

    def exact_best(self, v):
        b = min(max(v, 0.0), 1.0)
        return OracleBest(bid=b, reward=expected_reward(self, v, b))


class AtomMixHob(HobModel):
    """Half Uniform[0, 1], half a point mass at 1/4 + delta."""

    def __init__(self, delta: float, omega: float = 0.2):
        if not 0.0 < delta < 0.75:
            raise ValueError(f"delta must lie in (0, 3/4), got {delta}")
        self.delta = float(delta)
        self.atom = 0.25 + self.delta
        # any omega-window catching the atom gains 1/2 on top of the uniform part
        self._params = HobParams(omega=omega, lam=min(0.999, 0.5 + omega / 2.0))

    def sample(self, rng, size=None):
        if size is None:
            return rng.random() if rng.random() < 0.5 else self.atom
        u = rng.random(size)
        return np.where(rng.random(size) < 0.5, u, self.atom)

    def cdf(self, b):
        return atom_mix_cdf(self.delta, b)

    def atoms(self):
        return (self.atom,)

    def integral_cdf(self, b):
        bs = np.asarray(b, dtype=float)
        out = bs * bs / 4.0 + 0.5 * np.maximum(0.0, bs - self.atom)
        return float(out) if np.isscalar(b) else out

    def local_params(self):
        return self._params

    def exact_best(self, v):
        # payoff is concave on each side of the atom; the jump at the atom
        # is the only other candidate
        candidates = [min(max(v, 0.0), 1.0)]
        if self.atom <= 1.0:
            candidates.append(self.atom)
        rewards = [expected_reward(self, v, b) for b in candidates]
        k = int(np.argmax(rewards))
        return OracleBest(bid=candidates[k], reward=rewards[k])


def make_hob(family: str, **kwargs) -> HobModel:
    """HOB model registry for configs: uniform | beta | atom_mix."""
    if family == "uniform":
        return UniformHob(**kwargs)
    if family == "beta":
        return BetaHob(**kwargs)
    if family == "atom_mix":
        return AtomMixHob(**kwargs)
    raise ValueError(f"unknown HOB family {family!r}")


class Environment(ABC):
    """A context process plus hidden per-round draws (m, v1, v0).

    Contexts are oblivious to the bidder's realized history, and the
    marginal value satisfies E[v1 - v0 | x] = theta @ x up to the clipping
    guards reported by `clip_stats`.
    """

    d: int
    theta: np.ndarray
    hob: HobModel

    @abstractmethod
    def step(self, t: int, rng: np.random.Generator) -> tuple[Context, float, float, float]:
        """Draws for round t: (context, hob, v1, v0)."""

    def true_value(self, context: Context) -> float:
        return float(self.theta @ context.x)

    def oracle_reward(self, v: float) -> float:
        best = self.hob.exact_best(v)
        if best is None:
            best = oracle_best(self.hob, v)
        return best.reward

    def clip_stats(self) -> dict:
        return {}


class PeriodicEnv(Environment):
    """Synthetic search market with a periodic non-zero baseline outcome.

    Contexts are normalized Gaussian vectors with an intercept; the
    baseline outcome follows a sigmoid of a time sinusoid plus a fixed
    context direction, the winning outcome adds a Bernoulli bump with a
    linear-in-context mean, and competition is Beta(5, 7).  The Bernoulli
    mean and the winning outcome are clipped into their valid ranges; the
    clip rates are tracked because the bump construction overshoots 1
    whenever it fires.
    """

    def __init__(self, rng: np.random.Generator, d: int = 11, freq: float = math.pi / 125.0):
        self.d = d
        self.freq = freq
        theta = np.concatenate(([0.6], rng.standard_normal(d - 1)))
        self.theta = theta / np.linalg.norm(theta)
        beta = rng.standard_normal(d)
        self.beta = beta / np.linalg.norm(beta)
        self.hob = BetaHob(5.0, 7.0)
        self._rounds = 0
        self._mean_clips = 0
        self._v1_clips = 0

    def step(self, t, rng):
        raw = np.concatenate(([1.0], rng.standard_normal(self.d - 1)))
        x = raw / np.linalg.norm(raw)
        v0 = sigmoid(2.0 + math.sin(self.freq * t) + math.cos(float(self.beta @ x)))
        p_raw = float(self.theta @ x)
        p = min(max(p_raw, 0.0), 1.0)
        bump = 1.0 if rng.random() < p else 0.0
        v1 = v0 + bump
        self._rounds += 1
        if p != p_raw:
            self._mean_clips += 1
        if v1 > 1.0:
            v1 = 1.0
            self._v1_clips += 1
        m = float(self.hob.sample(rng))
        return Context(x), m, v1, v0

    def clip_stats(self):
        r = max(1, self._rounds)
        return {
            "rounds": self._rounds,
            "bernoulli_mean_clip_rate": self._mean_clips / r,
            "v1_clip_rate": self._v1_clips / r,
        }


class SimpleEnv(Environment):
    """Bounded-outcome market with a two-level periodic baseline.

    The marginal value is exactly linear in the context with no clipping:
    contexts are non-negative unit vectors with an intercept, the value
    parameter has norm 0.58, and the outcome noise is small enough that
    v1 always stays inside [0, 1].  The HOB family is configurable.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        d: int = 3,
        hob: HobModel | None = None,
        baseline: tuple[float, float] = (0.10, 0.25),
        period: int = 250,
        noise: float = 0.10,
    ):
        if d < 2:
            raise ValueError("need an intercept plus at least one feature")
        self.d = d
        self.baseline = baseline
        self.period = period
        self.noise = noise
        base = np.full(d, 0.3)
        base[0] = 0.4
        self.theta = base * (0.58 / np.linalg.norm(base))
        # nonneg unit contexts put theta @ x between min(theta) and 0.58,
        # so these bounds keep v1 inside [0, 1] without any clipping
        if min(baseline) + float(self.theta.min()) - noise < 0.0:
            raise ValueError("baseline/noise allow a negative winning outcome")
        if max(baseline) + 0.58 + noise > 1.0:
            raise ValueError("baseline/noise allow a winning outcome above 1")
        self.hob = hob if hob is not None else UniformHob()

    def step(self, t, rng):
        raw = np.concatenate(([1.0], np.abs(rng.standard_normal(self.d - 1))))
        x = raw / np.linalg.norm(raw)
        lo, hi = self.baseline
        v0 = lo if (t % self.period) < self.period // 2 else hi
        dv = float(self.theta @ x) + rng.uniform(-self.noise, self.noise)
        v1 = v0 + dv
        m = float(self.hob.sample(rng))
        return Context(x), m, v1, v0


class LowerBoundEnv(Environment):
    """Hard instance family: near-indistinguishable values around an atom.

    The horizon splits into d - 1 equal sub-horizons, each a two-point
    value problem at gap scale 1/sqrt(sub-horizon length) against a
    half-uniform, half-atom HOB whose atom sits between the two candidate
    values.  Baseline outcomes are identically zero.
    """

    def __init__(self, T: int, d: int, rng: np.random.Generator):
        if d < 1:
            raise ValueError("dimension must be positive")
        if d >= 2 and T < d * d:
            raise ValueError(f"need T >= d^2 for a valid instance, got T={T}, d={d}")
        if T < 4:
            raise ValueError("horizon too short")
        self.T = int(T)
        self.d = d
        if d == 1:
            delta = 0.25 / math.sqrt(T)
            self.theta = np.array([0.25 + (2.0 * delta if rng.random() < 0.5 else 0.0)])
            self.delta = delta
        else:
            delta = 0.25 * math.sqrt((d - 1) / T)
            tail = np.where(rng.random(d - 1) < 0.5, 0.0, 4.0 * delta)
            self.theta = np.concatenate(([0.5], tail))
            self.delta = delta
        self.hob = AtomMixHob(delta=self.delta)

    def _sub_horizon(self, t: int) -> int:
        if self.d == 1:
            return 0
        return min((t - 1) * (self.d - 1) // self.T, self.d - 2)

    def context(self, t: int) -> Context:
        if self.d == 1:
            return Context(np.array([1.0]))
        x = np.zeros(self.d)
        x[0] = 0.5
        x[self._sub_horizon(t) + 1] = 0.5
        return Context(x)

    def step(self, t, rng):
        ctx = self.context(t)
        p = float(self.theta @ ctx.x)
        v1 = 1.0 if rng.random() < p else 0.0
        m = float(self.hob.sample(rng))
        return ctx, m, v1, 0.0


def lower_bound_instance(d: int, T: int, rng: np.random.Generator) -> LowerBoundEnv:
    """Draw one hard instance (values chosen uniformly from the two-point set)."""
    return LowerBoundEnv(T=T, d=d, rng=rng)


def separation_check(T: int, grid_points: int = 100_001) -> float:
    """Minimum combined suboptimality of any single bid on the two-point pair.

    For the two hard values mu1 = 1/4 and mu2 = 1/4 + 2*delta sharing the
    atom-mix HOB, no bid between them can be good for both: the sum of the
    two suboptimalities is at least delta / 2.  Returns the minimum of
    that sum over a dense bid grid on [mu1, mu2] (closed-form payoffs, so
    the only error is the fp evaluation itself).
    """
    if T < 16:
        raise ValueError("separation instance needs T >= 16")
    delta = 0.25 / math.sqrt(T)
    mu1, mu2 = 0.25, 0.25 + 2.0 * delta
    hob = AtomMixHob(delta=delta)
    bids = np.linspace(mu1, mu2, grid_points)
    atom = hob.atom
    bids = np.unique(np.concatenate([bids, [atom, np.nextafter(atom, 0.0), mu1, mu2]]))
    r1 = _reward_curve(hob, mu1, bids)
    r2 = _reward_curve(hob, mu2, bids)
    best1 = expected_reward(hob, mu1, mu1)
    best2 = expected_reward(hob, mu2, mu2)
    return float(np.min((best1 - r1) + (best2 - r2)))
