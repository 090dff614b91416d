"""
pgam.py

Projected gradient ascent of the closed-form sum rate over the STAR-RIS
coefficients (θ_1, θ_2), under statistical CSI.

Each iteration takes a step along δ_i = 2 ∂(I1 + I2)/∂θ_i^*, projects every
element back onto |θ_1(l)|² + |θ_2(l)|² = 1 and refreshes the power
normalization factor t. The step size comes from Armijo backtracking with a
Barzilai-Borwein first guess.
"""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from closed_form import PotentialCache, closed_rates_at, require_deterministic_bs_ris
from errors import ContractViolation, DegenerateScenarioError
from freeprob import private_rates_nats, solve_prop2
from linearization import SolverOptions, potential_gradient
from misc_tools import to_unit
from model import RateOptions, ThetaState
from settings import config

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ["iteration", "sum_rate", "step_size", "gradient_norm", "projection_residual", "t"]


@dataclass(frozen=True)
class PgamOptions:
    eps: float = field(default_factory=lambda: config("PGAM_EPS"))
    max_iters: int = 50
    shrink: float = 0.5
    sufficient_increase: float = 1e-4
    min_step: float = 1e-12
    initial_step: float = 1.0
    max_step: float = 1e3


@dataclass(eq=False)
class PgamTrace:
    sum_rates: list
    step_sizes: list
    projection_residuals: list
    gradient_norms: list
    t_values: list
    theta: ThetaState
    converged: bool = False
    status: str = "running"

    @property
    def iterations(self):
        return len(self.sum_rates) - 1

    def frame(self):
        n = len(self.sum_rates)
        return pd.DataFrame(
            {
                "iteration": np.arange(n),
                "sum_rate": self.sum_rates,
                "step_size": [np.nan] + list(self.step_sizes),
                "gradient_norm": self.gradient_norms,
                "projection_residual": [np.nan] + list(self.projection_residuals),
                "t": self.t_values,
            },
            columns=TRACE_COLUMNS,
        )


def gradient_phi(sol):
    """∂φ/∂θ^* at a converged simplified solution, stacked as [user 1 | user 2]."""
    grads = potential_gradient(sol.fp)
    return np.concatenate([grads[1], grads[2]])


def project(theta_raw, panel_sizes):
    """Scale each element pair so that |θ_1(l)|² + |θ_2(l)|² = 1, keeping phases.

    >>> th = project((np.array([3 * np.exp(1j * np.pi / 3)]), np.array([4.0 + 0j])), (1,))
    >>> np.round(np.abs(th.theta1), 12), np.round(np.abs(th.theta2), 12)
    (array([0.6]), array([0.8]))
    >>> bool(np.isclose(np.angle(th.theta1[0]), np.pi / 3))
    True
    """
    theta1, theta2 = (np.asarray(v, dtype=complex).ravel() for v in theta_raw)
    norm = np.sqrt(np.abs(theta1) ** 2 + np.abs(theta2) ** 2)
    zero = np.flatnonzero(norm == 0)
    if zero.size:
        raise DegenerateScenarioError(f"STAR-RIS elements {zero.tolist()} have both coefficients zero")
    return ThetaState(theta1 / norm, theta2 / norm, panel_sizes)


class SumRateObjective:
    """Closed-form sum rate (in `options.unit`) and its gradient at fixed t."""

    def __init__(self, stats, cfg, options=None, opts=None):
        require_deterministic_bs_ris(stats)
        self.stats = stats
        self.cfg = cfg
        self.options = options or RateOptions()
        self.opts = opts or SolverOptions()
        self.evaluations = 0

    def power_factor(self, theta):
        return solve_prop2(self.stats, theta, self.cfg, self.opts).t

    def evaluate(self, theta, t, with_gradient=True):
        """Return (sum_rate, (δ_1, δ_2) or None)."""
        cfg, options = self.cfg, self.options
        self.evaluations += 1
        total = 0.0
        a1, a2 = options.coupled_arguments(cfg, t)
        cache = None
        if cfg.S > 0:
            cache = PotentialCache(self.stats, theta, cfg, self.opts)
            total += sum(closed_rates_at(cache, a1, a2))
        total += sum(private_rates_nats(cfg, t, options))
        value = float(to_unit(total, options.unit))
        if not with_gradient:
            return value, None
        L = self.stats.L
        delta = np.zeros(2 * L, dtype=complex)
        if cache is not None:
            z1, z0, z2, z3 = cache.points(a1, a2)
            for z, sign in ((z1, 1.0), (z0, -1.0), (z2, 1.0), (z3, -1.0)):
                delta += sign * gradient_phi(cache(z))
        delta = to_unit(2.0 * delta, options.unit)
        return value, (delta[:L], delta[L:])


def gradient_sum_rate(stats, theta, cfg, options=None, opts=None, t=None):
    """(δ_1, δ_2) = 2 ∂(I1 + I2)/∂θ_i^* with t held fixed."""
    objective = SumRateObjective(stats, cfg, options, opts)
    if t is None:
        t = objective.power_factor(theta)
    return objective.evaluate(theta, t)[1]


def _stack(theta):
    return np.concatenate([theta.theta1, theta.theta2])


def optimize(stats, cfg, theta0, eps=None, max_iters=None, options=None, opts=None, pgam=None):
    """Projected gradient ascent from `theta0` until the sum rate changes by less than `eps`.

    The returned trace is monotone: a step is accepted only when the sum rate
    with the refreshed t does not decrease.
    """
    pgam = pgam or PgamOptions()
    eps = pgam.eps if eps is None else eps
    max_iters = pgam.max_iters if max_iters is None else max_iters
    if not eps > 0:
        raise ContractViolation(f"eps must be > 0, got {eps}")
    objective = SumRateObjective(stats, cfg, options, opts)
    panel_sizes = stats.panel_sizes
    L = stats.L

    theta = theta0
    t = objective.power_factor(theta)
    value, (d1, d2) = objective.evaluate(theta, t)
    grad = np.concatenate([d1, d2])
    trace = PgamTrace(
        sum_rates=[value], step_sizes=[], projection_residuals=[],
        gradient_norms=[float(np.linalg.norm(grad))], t_values=[t], theta=theta,
    )
    step = pgam.initial_step

    for iteration in range(1, max_iters + 1):
        x = _stack(theta)
        accepted = None
        s = step
        while s >= pgam.min_step:
            raw = x + s * grad
            candidate = project((raw[:L], raw[L:]), panel_sizes)
            move = _stack(candidate) - x
            trial, _ = objective.evaluate(candidate, t, with_gradient=False)
            if trial >= value + pgam.sufficient_increase * np.real(np.vdot(grad, move)):
                t_new = objective.power_factor(candidate)
                new_value, (n1, n2) = objective.evaluate(candidate, t_new)
                if new_value >= value - 1e-12:
                    accepted = (candidate, s, raw, t_new, new_value, np.concatenate([n1, n2]))
                    break
            s *= pgam.shrink
        if accepted is None:
            trace.status = "stalled"
            logger.warning("pgam stalled iteration=%d sum_rate=%.8g last_step=%.3e", iteration, value, s / pgam.shrink)
            break

        candidate, s, raw, t_new, new_value, new_grad = accepted
        change = new_value - value
        trace.sum_rates.append(new_value)
        trace.step_sizes.append(s)
        trace.projection_residuals.append(float(np.linalg.norm(_stack(candidate) - raw)))
        trace.gradient_norms.append(float(np.linalg.norm(new_grad)))
        trace.t_values.append(t_new)
        logger.info("pgam iteration=%d sum_rate=%.8g step=%.3e change=%.3e", iteration, new_value, s, change)

        # Barzilai-Borwein guess for the next step (ascent form)
        ds = _stack(candidate) - x
        dg = grad - new_grad
        curvature = abs(np.real(np.vdot(ds, dg)))
        step = np.real(np.vdot(ds, ds)) / curvature if curvature > 0 else pgam.initial_step
        step = float(np.clip(step, pgam.min_step, pgam.max_step))

        theta, t, value, grad = candidate, t_new, new_value, new_grad
        trace.theta = theta
        if abs(change) < eps:
            trace.converged = True
            trace.status = "converged"
            break
    else:
        trace.status = "max_iters"

    return trace


def initial_theta(panel_sizes, seed):
    """β = 0.5 on both sides with random phases."""
    return ThetaState.uniform_split(panel_sizes, np.random.default_rng(seed))


def random_baseline(stats, cfg, seeds, options=None, opts=None):
    """Closed-form sum rates of random feasible θ, one per seed, each with its own t."""
    objective = SumRateObjective(stats, cfg, options, opts)
    values = []
    for seed in seeds:
        theta = ThetaState.random(stats.panel_sizes, np.random.default_rng(seed))
        t = objective.power_factor(theta)
        values.append(objective.evaluate(theta, t, with_gradient=False)[0])
    return np.array(values)
