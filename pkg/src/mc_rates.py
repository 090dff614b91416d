"""
mc_rates.py

Exact per-realization information rates of the GSVD-precoded NOMA downlink and
their Monte-Carlo averages. These are the ground truth for every asymptotic
result in `freeprob` and `closed_form`.

User 1 performs SIC; on a coupled subchannel with GSV ratio μ it sees
SINR κ1 α1 μ/(1+μ), where α_i = P ρ_i / (t σ0²). User 2 treats user 1's
layer as interference. Private (interference-free) subchannels carry a full
log(1 + α_i).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from errors import ContractViolation, DecompositionError, MonteCarloError, OracleError
from gsvd import gsvd, power_factor_exact
from misc_tools import standard_error, to_unit
from model import RateOptions, expected_gain, sample_realization

logger = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.01

TRIAL_COLUMNS = ["trial", "seed", "regime", "I1", "I2", "t"]


@dataclass(frozen=True, eq=False)
class RateReport:
    I1: float
    I2: float
    unit: str
    regime: str
    S: int
    t: float
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_trials: int = 1
    seed: int = None
    stderr_I1: float = 0.0
    stderr_I2: float = 0.0
    failures: int = 0
    records: tuple = ()

    @property
    def sum_rate(self):
        return self.I1 + self.I2


def _check_consistent(factors, cfg, t):
    if factors.regime != cfg.regime:
        raise ContractViolation(f"decomposition regime {factors.regime!r} but config regime {cfg.regime!r}")
    if factors.S != cfg.S:
        raise ContractViolation(f"decomposition has {factors.S} coupled pairs, config expects {cfg.S}")
    if not t > 0:
        raise ContractViolation(f"power normalization factor must be > 0, got {t}")


def _private_terms(factors, alpha1, alpha2):
    p1, p2 = factors.private_streams
    return p1 * np.log1p(alpha1), p2 * np.log1p(alpha2)


def rates_one_shot(factors, cfg, t, options=None):
    """Rates of one channel realization from its GSV ratios μ."""
    options = options or RateOptions()
    _check_consistent(factors, cfg, t)
    alpha1 = cfg.P * cfg.rho1 / (t * cfg.sigma0_sq)
    alpha2 = cfg.P * cfg.rho2 / (t * cfg.sigma0_sq)
    mu = factors.mu

    I1 = np.sum(np.log1p(mu / (1.0 + mu) * cfg.kappa1 * alpha1))
    if options.i2_formula == "power":
        I2 = np.sum(np.log1p(cfg.kappa2 * cfg.P / (cfg.kappa1 + (1.0 + mu) * t * cfg.sigma0_sq)))
    else:
        I2 = np.sum(np.log1p(cfg.kappa2 * alpha2 / (1.0 + mu + cfg.kappa1 * alpha2)))

    extra1, extra2 = _private_terms(factors, alpha1, alpha2)
    return RateReport(
        I1=float(to_unit(I1 + extra1, options.unit)),
        I2=float(to_unit(I2 + extra2, options.unit)),
        unit=options.unit,
        regime=factors.regime,
        S=factors.S,
        t=float(t),
        mu=mu,
    )


def rates_from_sigma(factors, cfg, t):
    """Rates (nats) from the per-subchannel SINRs implied by the Σ_i entries."""
    _check_consistent(factors, cfg, t)
    alpha1 = cfg.P * cfg.rho1 / (t * cfg.sigma0_sq)
    alpha2 = cfg.P * cfg.rho2 / (t * cfg.sigma0_sq)
    s1, s2 = factors.coupled_gains
    sinr1 = cfg.kappa1 * alpha1 * s1
    sinr2 = cfg.kappa2 * alpha2 * s2 / (cfg.kappa1 * alpha2 * s2 + 1.0)
    extra1, extra2 = _private_terms(factors, alpha1, alpha2)
    return float(np.sum(np.log1p(sinr1)) + extra1), float(np.sum(np.log1p(sinr2)) + extra2)


def check_sic_order(stats, theta, cfg):
    """True when user 1 has the larger average received power ρ1 E||H1||² > ρ2 E||H2||²."""
    return cfg.rho1 * expected_gain(stats, theta, 1) > cfg.rho2 * expected_gain(stats, theta, 2)


def trial_seeds(seed, n_trials):
    """Per-trial seeds derived from one scenario seed."""
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n_trials)]


def _one_trial(stats, theta, cfg, options, trial_seed):
    realization = sample_realization(stats, theta, trial_seed)
    t = power_factor_exact(realization.H1, realization.H2)
    factors = gsvd(realization.H1, realization.H2)
    return rates_one_shot(factors, cfg, t, options)


def mc_average(stats, theta, cfg, n_trials, seed, options=None, n_threads=1):
    """Average `rates_one_shot` over seeded realizations, each with its exact t.

    Trials run on a thread pool; aggregation follows trial order so the result
    does not depend on `n_threads`.
    """
    if n_trials < 1:
        raise ContractViolation(f"n_trials must be >= 1, got {n_trials}")
    options = options or RateOptions()
    stats.check_config(cfg)
    seeds = trial_seeds(seed, n_trials)

    def run(trial_seed):
        try:
            return _one_trial(stats, theta, cfg, options, trial_seed)
        except (DecompositionError, OracleError) as exc:
            return exc

    with ThreadPoolExecutor(max_workers=max(1, n_threads)) as pool:
        outcomes = list(pool.map(run, seeds))

    failures = [(idx, str(out)) for idx, out in enumerate(outcomes) if isinstance(out, Exception)]
    for idx, message in failures:
        logger.warning("monte carlo trial failed trial=%d seed=%d error=%s", idx, seeds[idx], message)
    if len(failures) > MAX_FAILURE_FRACTION * n_trials:
        raise MonteCarloError(f"{len(failures)} of {n_trials} trials failed", failures)

    reports = [(idx, out) for idx, out in enumerate(outcomes) if not isinstance(out, Exception)]
    I1 = np.array([r.I1 for _, r in reports])
    I2 = np.array([r.I2 for _, r in reports])
    t = np.array([r.t for _, r in reports])
    records = tuple((idx, seeds[idx], r.regime, r.I1, r.I2, r.t) for idx, r in reports)
    mu = np.mean(np.stack([r.mu for _, r in reports]), axis=0) if reports[0][1].mu.size else np.zeros(0)

    logger.debug("monte carlo done trials=%d failures=%d", n_trials, len(failures))
    return RateReport(
        I1=float(np.mean(I1)),
        I2=float(np.mean(I2)),
        unit=options.unit,
        regime=cfg.regime,
        S=cfg.S,
        t=float(np.mean(t)),
        mu=mu,
        n_trials=n_trials,
        seed=seed,
        stderr_I1=standard_error(I1),
        stderr_I2=standard_error(I2),
        failures=len(failures),
        records=records,
    )
