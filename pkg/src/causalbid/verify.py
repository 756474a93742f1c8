"""Monte-Carlo and property suites checking the estimation guarantees and
the headline experiment shapes.

Each suite returns a dict with a top-level "pass" flag and a list of
named checks; the CLI prints one machine-readable line per check.  The
concentration suites (CDF coverage, IPW proxies, regression coverage, UCB
selection) exercise the width formulas with their constants exactly as
analyzed; the experiment suites (elimination, figure2) run the bidders
with the desk calibration presets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, betaln

from .core import HobParams, make_bid_grid
from .envs import AtomMixHob, BetaHob, UniformHob, separation_check
from .harness import ExperimentConfig, run_experiment
from .hob_cdf import HobStats, cdf_all, init_estimate, width_all
from .ucb_engine import THEORY, compute_table, perturbed_optimizer, select_interval
from .value_est import RidgeState

__all__ = ["SUITES", "run_suite"]


def _check(name: str, value: float, bound: float, ok: bool) -> dict:
    return {"name": name, "value": float(value), "bound": float(bound), "pass": bool(ok)}


# ---------------------------------------------------------------------------
# CDF coverage: both width inequalities hold at every grid point


def _coverage_one_family(hob, T: int, trials: int, rng) -> float:
    grid = make_bid_grid(T)
    J = grid.J
    points = grid.points
    T0 = math.ceil(math.sqrt(T) * math.log(T))
    # fixed bid schedule, independent of observations: an all-in block at
    # the top bid then a descending staircase so counts thin out upward
    stair_levels = np.linspace(J - 1, 0, 41).astype(int)
    schedule = np.concatenate([np.full(T0, J - 1, dtype=int), np.repeat(stair_levels, 25)])
    g_true = np.asarray(hob.cdf(points), dtype=float)

    hits = 0
    for _ in range(trials):
        held = np.asarray(hob.sample(rng, size=T0), dtype=float)
        draws = np.asarray(hob.sample(rng, size=len(schedule)), dtype=float)
        won = draws <= points[schedule]
        stats = HobStats.from_log(
            grid, schedule, won, np.where(won, draws, np.nan),
            p0=init_estimate(held, grid),
        )
        g_hat = cdf_all(stats)
        u = width_all(stats)
        point_ok = (np.abs(g_true - g_hat) <= u).all()
        run_err = grid.spacing * np.abs(np.cumsum(g_true - g_hat))
        hits += point_ok and (run_err <= u).all()
    return hits / trials


def suite_cdf_coverage(seed: int = 0, trials: int = 500) -> dict:
    T = 10_000
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    families = {
        "uniform": UniformHob(),
        "beta": BetaHob(5.0, 7.0),
        "atom_mix": AtomMixHob(delta=0.25 / math.sqrt(T)),
    }
    checks = []
    for name, hob in families.items():
        cov = _coverage_one_family(hob, T, trials, rng)
        checks.append(_check(f"coverage/{name}", cov, 0.99, cov >= 0.99))
    return {"suite": "cdf_coverage", "pass": all(c["pass"] for c in checks), "checks": checks}


# ---------------------------------------------------------------------------
# IPW bias and variance proxies


def suite_ipw_bias(seed: int = 0, n: int = 1_000_000) -> dict:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    g_grid = (0.1, 0.3, 0.5, 0.7, 0.9)
    u_grid = (0.0, 0.02, 0.04, 0.06, 0.08)
    checks = []
    worst_bias_margin = math.inf
    worst_var_margin = math.inf
    for g in g_grid:
        for u in u_grid:
            g_hat = g - u  # worst direction: smaller denominator on wins
            sigma = 1.0 / (g_hat * (1.0 - g_hat))
            won = rng.random(n) < g
            v1 = rng.uniform(0.2, 0.8, n)
            v0 = rng.uniform(0.1, 0.7, n)
            e = np.where(won, v1 / g_hat, -v0 / (1.0 - g_hat))
            delta = 0.5 - 0.4
            bias = abs(e.mean() - delta)
            se_mean = e.std(ddof=1) / math.sqrt(n)
            bias_bound = 4.0 * u * sigma + 3.0 * se_mean
            var = e.var(ddof=1)
            centered_sq = (e - e.mean()) ** 2
            se_var = centered_sq.std(ddof=1) / math.sqrt(n)
            var_bound = 4.0 * sigma**2 + 3.0 * se_var
            worst_bias_margin = min(worst_bias_margin, bias_bound - bias)
            worst_var_margin = min(worst_var_margin, var_bound - var)
    checks.append(_check("bias_margin_min", worst_bias_margin, 0.0, worst_bias_margin >= 0.0))
    checks.append(_check("variance_margin_min", worst_var_margin, 0.0, worst_var_margin >= 0.0))
    return {"suite": "ipw_bias", "pass": all(c["pass"] for c in checks), "checks": checks}


# ---------------------------------------------------------------------------
# Weighted-ridge confidence coverage


def suite_wls_coverage(seed: int = 0, trials: int = 500) -> dict:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    d, N, T = 5, 400, 10_000
    covered = 0
    max_ratio = 0.0
    for _ in range(trials):
        theta = rng.standard_normal(d)
        theta *= 0.35 / np.linalg.norm(theta)
        x = rng.standard_normal((N, d))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        g = rng.uniform(0.1, 0.9, N)
        u = rng.uniform(0.0, 0.08, N)
        g_hat = g + u * rng.uniform(-1.0, 1.0, N)
        won = rng.random(N) < g
        v0 = rng.uniform(0.45, 0.55, N)
        v1 = v0 + x @ theta + rng.uniform(-0.05, 0.05, N)
        e = np.where(won, v1 / g_hat, -v0 / (1.0 - g_hat))
        sigma = 1.0 / (g_hat * (1.0 - g_hat))
        state = RidgeState(d=d)
        for i in range(N):
            state.absorb(x[i], float(e[i]), float(sigma[i]), float(u[i]))
        xq = rng.standard_normal(d)
        xq /= np.linalg.norm(xq)
        err = abs(float(state.theta_hat() @ xq) - float(theta @ xq))
        bound = state.conf_width(xq, T)
        covered += err <= bound
        max_ratio = max(max_ratio, err / bound)
    cov = covered / trials
    checks = [_check("coverage", cov, 0.99, cov >= 0.99)]
    return {
        "suite": "wls_coverage",
        "pass": all(c["pass"] for c in checks),
        "checks": checks,
        "detail": {"max_error_to_bound_ratio": max_ratio},
    }


# ---------------------------------------------------------------------------
# UCB selection properties on randomized locally bounded CDFs


@dataclass
class _MixtureCdf:
    """Uniform + Beta + atoms mixture with closed-form CDF and integral."""

    w_uniform: float
    w_beta: float
    a: float
    b: float
    atoms: tuple[tuple[float, float], ...]  # (location, weight)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = self.w_uniform * np.clip(x, 0.0, 1.0)
        out = out + self.w_beta * betainc(self.a, self.b, np.clip(x, 0.0, 1.0))
        for loc, w in self.atoms:
            out = out + w * (x >= loc)
        return out

    def integral(self, x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, 0.0, 1.0)
        out = self.w_uniform * xc * xc / 2.0
        mean = self.a / (self.a + self.b)
        out = out + self.w_beta * (
            xc * betainc(self.a, self.b, xc) - mean * betainc(self.a + 1.0, self.b, xc)
        )
        for loc, w in self.atoms:
            out = out + w * np.maximum(0.0, xc - loc)
        return out


def _draw_mixture(rng) -> tuple[_MixtureCdf, float, float]:
    """Random mixture plus honest (omega, lam) via a window scan."""
    for _ in range(100):
        wu = rng.uniform(0.3, 0.5)
        wb = rng.uniform(0.2, 0.4)
        rest = 1.0 - wu - wb
        n_atoms = int(rng.integers(1, 3))
        splits = rng.dirichlet(np.ones(n_atoms)) * rest
        locs = rng.uniform(0.05, 0.95, n_atoms)
        a, b = rng.uniform(1.5, 6.0, 2)
        mix = _MixtureCdf(wu, wb, a, b, tuple(zip(locs.tolist(), splits.tolist())))
        omega = rng.uniform(0.08, 0.2)
        mesh = np.linspace(0.0, 1.0 - omega, 4001)
        dens_bound = wu + wb * math.exp(
            (a - 1) * math.log(max((a - 1) / (a + b - 2), 1e-9))
            + (b - 1) * math.log1p(-min((a - 1) / (a + b - 2), 1 - 1e-9))
            - betaln(a, b)
        )
        lam = float(np.max(mix.cdf(mesh + omega) - mix.cdf(mesh))) + dens_bound * 3e-4 + 1e-9
        if lam < 0.9:
            return mix, omega, lam
    raise RuntimeError("could not draw a usable mixture")


def _monotone_noise(g: np.ndarray, amp: float, rng) -> np.ndarray:
    noisy = g + rng.uniform(-amp, amp, len(g))
    return np.clip(np.maximum.accumulate(noisy), 0.0, 1.0)


def suite_ucb_selection(seed: int = 0, cases: int = 1000) -> dict:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    gap_ok = contain_ok = smaller_ok = valid_ok = 0
    for _ in range(cases):
        mix, omega, lam = _draw_mixture(rng)
        params = HobParams(omega=omega, lam=lam)
        eps = (1.0 - lam) / 8.0
        c = omega / 4.0
        grid = make_bid_grid(int(math.ceil((8.0 / omega) ** 2)))
        points = grid.points
        g_true = mix.cdf(points)
        int_true = mix.integral(points)

        # optimizer gap under value perturbation
        acc = 0.9 * (1.0 - eps - lam) / 2.0
        g_hat = _monotone_noise(g_true, acc, rng)
        int_hat = grid.spacing * np.cumsum(g_hat)
        v1 = rng.uniform(0.0, 1.0)
        v2 = v1 + rng.uniform(0.0, omega / 2.0)
        j1 = perturbed_optimizer(g_hat, int_hat, v1, 0.0, grid)
        j2 = perturbed_optimizer(g_hat, int_hat, v2, 0.0, grid)
        gap_ok += abs(g_hat[j2] - g_hat[j1]) <= 1.0 - eps + 1e-12

        # containment and interval spread under the accuracy budget
        budget = min(c * eps / 2.0, (1.0 - 4.0 * eps - lam) / 2.0)
        v = rng.uniform(0.0, 1.0)
        v_hat = v + rng.uniform(-1.0, 1.0) * budget / 3.0
        g_est = _monotone_noise(g_true, 0.9 * budget / 3.0, rng)
        int_est = int_true + rng.uniform(-1.0, 1.0, grid.J) * budget / 3.0
        r_true = g_true * (v - points) + int_true
        j_star = int(np.argmax(r_true))
        lo, hi, q = select_interval(g_est, int_est, v_hat, params, grid)
        inside = lo <= j_star <= hi
        spread = g_est[hi] - g_est[lo] <= 1.0 - eps + 1e-12
        contain_ok += inside and spread

        # chosen centering has (epsilon-scaled) the smaller width on the interval
        gamma_norm = rng.uniform(0.05, 2.0)
        u_arr = rng.uniform(0.0, 0.3, grid.J)
        table = compute_table(v_hat, gamma_norm, g_est, int_est, u_arr,
                              np.arange(lo, hi + 1), grid, params, THEORY)
        wq = table.width(q)
        smaller_ok += bool(
            (eps * wq <= np.minimum(table.w0, table.w1) + 1e-12).all()
        ) and inside and spread

        # width validity: honest u and gamma_norm dominate the reward error
        int_est2 = grid.spacing * np.cumsum(g_est)
        u_honest = np.maximum(
            np.abs(g_true - g_est),
            grid.spacing * np.abs(np.cumsum(g_true - g_est)),
        )
        gnorm2 = abs(v - v_hat) + 1e-12
        full = np.arange(grid.J)
        table2 = compute_table(v_hat, gnorm2, g_est, int_est2, u_honest,
                               full, grid, params, THEORY)
        r0_true = g_true * (v - points) + int_true
        r1_true = r0_true - v
        scale = (1.0 - lam) / 8.0
        ok0 = np.abs(r0_true - table2.r0) <= scale * table2.w0 + 1e-12
        ok1 = np.abs(r1_true - table2.r1) <= scale * table2.w1 + 1e-12
        valid_ok += bool(ok0.all() and ok1.all())

    checks = [
        _check("optimizer_gap", gap_ok / cases, 1.0, gap_ok == cases),
        _check("optimal_bid_containment", contain_ok / cases, 1.0, contain_ok == cases),
        _check("smaller_width_selection", smaller_ok / cases, 1.0, smaller_ok == cases),
        _check("width_validity", valid_ok / cases, 1.0, valid_ok == cases),
    ]
    return {"suite": "ucb_selection", "pass": all(c["pass"] for c in checks), "checks": checks}


# ---------------------------------------------------------------------------
# Two-point separation


def suite_separation(seed: int = 0) -> dict:
    checks = []
    for T in (100, 10_000, 1_000_000):
        val = separation_check(T)
        bound = 1.0 / (8.0 * math.sqrt(T))
        checks.append(_check(f"separation/T={T}", val, bound, val >= bound - 1e-9))
    return {"suite": "separation", "pass": all(c["pass"] for c in checks), "checks": checks}


# ---------------------------------------------------------------------------
# Leveled bidder: sublinear growth and exploration rarity


def _master_runs(T: int, seed: int, runs: int) -> tuple[float, float]:
    config = ExperimentConfig(
        policies=("master",), env="custom", T=T, d=3, runs=runs, seed=seed,
    )
    results = run_experiment(config)["master"]
    finals = np.array([r.final_regret for r in results])
    explores = np.array([r.diagnostics["explore_rounds"] for r in results], dtype=float)
    return float(finals.mean()), float(explores.mean())


def suite_elimination(seed: int = 0, runs: int = 10) -> dict:
    base_T = 10_000
    r1, e1 = _master_runs(base_T, seed, runs)
    r4, e4 = _master_runs(4 * base_T, seed, runs)
    ratio = r4 / r1
    explore_bound = 1.25 * e1 + 50.0
    checks = [
        _check("regret_ratio_4T_over_T", ratio, 2.8, ratio <= 2.8),
        _check("explore_rounds_at_4T", e4, explore_bound, e4 <= explore_bound),
    ]
    return {
        "suite": "elimination",
        "pass": all(c["pass"] for c in checks),
        "checks": checks,
        "detail": {"mean_final_T": r1, "mean_final_4T": r4,
                   "mean_explores_T": e1, "mean_explores_4T": e4},
    }


# ---------------------------------------------------------------------------
# Headline comparison: causal UCB bidder vs winning-outcome baseline


def _increments(results, T: int) -> tuple[float, float]:
    cum = np.stack([r.cum_regret for r in results])
    d2 = cum[:, T // 5 - 1] - cum[:, T // 10 - 1]
    last = cum[:, T - 1] - cum[:, 9 * T // 10 - 1]
    return float(d2.mean()), float(last.mean())


def suite_figure2(seed: int = 0, T: int = 50_000, runs: int = 10) -> dict:
    config = ExperimentConfig(
        policies=("linucb", "linucb_tes"), env="periodic", T=T, d=11,
        runs=runs, seed=seed,
    )
    results = run_experiment(config)
    lin_final = float(np.mean([r.final_regret for r in results["linucb"]]))
    tes_final = float(np.mean([r.final_regret for r in results["linucb_tes"]]))
    lin_d2, lin_last = _increments(results["linucb"], T)
    tes_d2, tes_last = _increments(results["linucb_tes"], T)
    paired_wins = sum(
        a.final_regret > b.final_regret
        for a, b in zip(results["linucb"], results["linucb_tes"])
    )
    checks = [
        _check("final_regret_ratio", lin_final / tes_final, 3.0, lin_final >= 3.0 * tes_final),
        _check("linucb_linear_growth", lin_last / lin_d2, 0.75, lin_last >= 0.75 * lin_d2),
        _check("tes_concavity", tes_last / tes_d2, 0.25, tes_last <= 0.25 * tes_d2),
        _check("paired_dominance", paired_wins, 9, paired_wins >= 9),
    ]
    return {
        "suite": "figure2",
        "pass": all(c["pass"] for c in checks),
        "checks": checks,
        "detail": {"linucb_final": lin_final, "tes_final": tes_final,
                   "linucb_decile2": lin_d2, "linucb_last": lin_last,
                   "tes_decile2": tes_d2, "tes_last": tes_last},
    }


SUITES = {
    "cdf_coverage": suite_cdf_coverage,
    "ipw_bias": suite_ipw_bias,
    "wls_coverage": suite_wls_coverage,
    "ucb_selection": suite_ucb_selection,
    "separation": suite_separation,
    "elimination": suite_elimination,
    "figure2": suite_figure2,
}


def run_suite(name: str, seed: int = 0, verbose: bool = True) -> dict:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    report = SUITES[name](seed=seed)
    if verbose:
        for chk in report["checks"]:
            status = "PASS" if chk["pass"] else "FAIL"
            print(f"{report['suite']}/{chk['name']} value={chk['value']:.6g} "
                  f"bound={chk['bound']:.6g} {status}")
        print(f"{report['suite']} overall: {'PASS' if report['pass'] else 'FAIL'}")
    return report
