"""
closed_form.py

Closed-form asymptotic rates when every BS->panel channel is deterministic.

Without fluctuation in F_k the cross blocks between the two users' F-groups
drop out of the Cauchy system, and the rates follow from the potential φ(z)
evaluated at four real points:

    I1 = φ(−1/(1+a1)) − φ(−1) + (R1 − n_inf) log(1+a1)
    I2 = φ(−1−a2) − φ(−1−κ1 a2) − n_zero log((1+a2)/(1+κ1 a2))

with n_zero = max(R1−T, 0) zero eigenvalues of B and n_inf = max(T−R2, 0)
augmented directions. φ'(z) = Tr G_1(z), so only differences of φ matter.
"""

import logging
from dataclasses import dataclass

import numpy as np

from errors import ConfigurationError
from freeprob import FAMILY, cauchy_problem, private_rates_nats, solve_prop2
from linearization import SolverOptions, potential, solve_fixed_point
from mc_rates import RateReport
from misc_tools import to_unit
from model import RateOptions

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ClosedFormSolution:
    """Simplified Cauchy system at z. `phi` is None off the real axis."""

    problem: object
    fp: object
    phi: float = None

    @property
    def z(self):
        return self.fp.z

    def family(self, j):
        row, col = FAMILY[j]
        if row != col:
            sizes = self.problem.lin.layout.sizes
            return np.zeros((sizes[row], sizes[col]), dtype=complex)
        return self.fp.block(row, col)


def require_deterministic_bs_ris(stats):
    if not stats.bs_ris_deterministic:
        raise ConfigurationError("closed-form rates need deterministic BS->STAR-RIS channels (zero variance profiles)")


def simplified_problem(stats, theta, cfg, opts=None):
    require_deterministic_bs_ris(stats)
    return cauchy_problem(stats, theta, cfg, opts, couple=False, first=1)


def solve_simplified(stats, theta, cfg, z, opts=None, problem=None, init=None):
    opts = opts or SolverOptions()
    problem = problem or simplified_problem(stats, theta, cfg, opts)
    fp = solve_fixed_point(problem.lin, complex(z), opts, init=init)
    value = potential(fp) if np.imag(z) == 0 else None
    return ClosedFormSolution(problem=problem, fp=fp, phi=value)


def phi(sol):
    if sol.phi is None:
        return potential(sol.fp)
    return sol.phi


class PotentialCache:
    """Simplified solves keyed by their real evaluation point."""

    def __init__(self, stats, theta, cfg, opts=None):
        self.opts = opts or SolverOptions()
        self.cfg = cfg
        self.problem = simplified_problem(stats, theta, cfg, self.opts)
        self.solutions = {}

    def __call__(self, z):
        z = float(z)
        if z not in self.solutions:
            self.solutions[z] = solve_simplified(None, None, self.cfg, z, self.opts, problem=self.problem)
        return self.solutions[z]

    def points(self, a1, a2):
        """The four evaluation points (user-1 upper, shared −1, user-2 pair)."""
        k1 = self.cfg.kappa1
        return -1.0 / (1.0 + a1), -1.0, -1.0 - a2, -1.0 - k1 * a2


def closed_rates_at(cache, alpha1, alpha2):
    """Coupled-subchannel rates (nats) at the SNR arguments (alpha1, alpha2)."""
    z1, z0, z2, z3 = cache.points(alpha1, alpha2)
    k1 = cache.cfg.kappa1
    pr = cache.problem
    I1 = phi(cache(z1)) - phi(cache(z0)) + (pr.R_a - pr.n_inf) * np.log1p(alpha1)
    I2 = phi(cache(z2)) - phi(cache(z3)) - pr.n_zero * (np.log1p(alpha2) - np.log1p(k1 * alpha2))
    return float(I1), float(I2)


def rates_closed(stats, theta, cfg, options=None, opts=None, t=None, cache=None):
    """(I1, I2) of the coupled subchannels in `options.unit`."""
    options = options or RateOptions()
    opts = opts or SolverOptions()
    if t is None:
        t = solve_prop2(stats, theta, cfg, opts).t
    cache = cache or PotentialCache(stats, theta, cfg, opts)
    a1, a2 = options.coupled_arguments(cfg, t)
    I1, I2 = closed_rates_at(cache, a1, a2)
    return float(to_unit(I1, options.unit)), float(to_unit(I2, options.unit))


def closed_form_rates(stats, theta, cfg, options=None, opts=None, t=None):
    """RateReport of the closed form including the private streams."""
    options = options or RateOptions()
    opts = opts or SolverOptions()
    if t is None:
        t = solve_prop2(stats, theta, cfg, opts).t
    I1 = I2 = 0.0
    if cfg.S > 0:
        cache = PotentialCache(stats, theta, cfg, opts)
        I1, I2 = closed_rates_at(cache, *options.coupled_arguments(cfg, t))
    else:
        require_deterministic_bs_ris(stats)
    extra1, extra2 = private_rates_nats(cfg, t, options)
    logger.debug("closed form rates I1=%.6g I2=%.6g nats t=%.6g", I1 + extra1, I2 + extra2, t)
    return RateReport(
        I1=float(to_unit(I1 + extra1, options.unit)),
        I2=float(to_unit(I2 + extra2, options.unit)),
        unit=options.unit,
        regime=cfg.regime,
        S=cfg.S,
        t=float(t),
    )
