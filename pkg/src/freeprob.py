"""
freeprob.py

Deterministic equivalents of the GSVD-NOMA rates:

* `solve_prop1` solves the subordination system whose corner block is the
  resolvent of B = H_a (H_b^H H_b)^{-1} H_a^H, giving G_B = Tr(G_1)/R_a;
* `cauchy_mu` maps G_B to the Cauchy transform of the GSV ratios μ;
* `integrate_rates` integrates G_μ into the two users' rates;
* `solve_prop2` gives the asymptotic power normalization factor
  t = Tr((H_1^H H_1 + H_2^H H_2)^{-1});
* `asymptotic_rates` chains them, adding the interference-free streams.

User a is the one with more receive antennas (user 1 at equality). When that
is user 2 the transform of ν = 1/μ is computed and mapped back through
G_μ(z) = 1/z − G_ν(1/z)/z².
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.integrate

from errors import (
    ConvergenceError,
    ContractViolation,
    DegenerateScenarioError,
    PoleError,
    QuadratureError,
)
from linearization import (
    SolverOptions,
    cauchy_linearization,
    power_linearization,
    solve_fixed_point,
)
from mc_rates import RateReport
from misc_tools import to_unit
from model import RateOptions, augment_user_stats

logger = logging.getLogger(__name__)

# labelled matrix family of the Cauchy system, by block group
FAMILY = {
    1: ("out", "out"),
    2: ("f_a", "f_a"),
    3: ("tx", "tx"),
    4: ("g_b", "g_b"),
    5: ("rx_b", "rx_b"),
    6: ("f_b", "f_b"),
    7: ("g_a", "g_a"),
    8: ("f_a", "f_b"),
    9: ("f_b", "f_a"),
}

POWER_FAMILY = {1: "tx", 2: "s", 3: "y", 4: "w"}


def user_roles(cfg):
    """(a, b): a is the user whose spectrum is computed, b the inverted one."""
    return (1, 2) if cfg.R1 >= cfg.R2 else (2, 1)


@dataclass(frozen=True, eq=False)
class CauchyProblem:
    """Linearization of B together with its eigenvalue bookkeeping.

    B has `n_zero` zero eigenvalues (R_a > T), `n_inf` eigenvalues of order
    1/Δ² from the augmented rows of user b, and S coupled ones.
    """

    lin: object
    a: int
    b: int
    R_a: int
    n_zero: int
    n_inf: int
    S: int


def cauchy_problem(stats, theta, cfg, opts=None, couple=True, first=None):
    opts = opts or SolverOptions()
    stats.check_config(cfg)
    a, b = user_roles(cfg) if first is None else (first, 3 - first)
    if cfg.S == 0:
        raise DegenerateScenarioError(f"T={cfg.T} >= R1+R2={cfg.R1 + cfg.R2}: no coupled subchannels")
    R_a, R_b = cfg.receive_dims(a), cfg.receive_dims(b)
    if R_b < cfg.T:
        stats = augment_user_stats(stats, b, opts.delta)
        logger.debug("augmented user %d with %d rows delta=%.1e", b, cfg.T - R_b, opts.delta)
    lin = cauchy_linearization(stats, theta, first=a, couple=couple)
    return CauchyProblem(
        lin=lin,
        a=a,
        b=b,
        R_a=R_a,
        n_zero=max(R_a - cfg.T, 0),
        n_inf=max(cfg.T - R_b, 0),
        S=cfg.S,
    )


@dataclass(frozen=True, eq=False)
class FixedPointSolution:
    """Converged Cauchy system at z with its matrix family G_1..G_9."""

    problem: CauchyProblem
    fp: object

    @property
    def z(self):
        return self.fp.z

    @property
    def iterations(self):
        return self.fp.sweeps

    @property
    def residual(self):
        return self.fp.residual

    def family(self, j):
        if j not in FAMILY:
            raise KeyError(f"matrix family index must be 1..9, got {j}")
        row, col = FAMILY[j]
        if row != col and not self.problem.lin.layout.is_coupled(row, col):
            n_row = self.problem.lin.layout.sizes[row]
            n_col = self.problem.lin.layout.sizes[col]
            return np.zeros((n_row, n_col), dtype=complex)
        return self.fp.block(row, col)

    def covariance_block(self, j):
        """Block of R(G) in the slot of G_j."""
        row, col = FAMILY[j]
        return self.fp.r_block(row, col)


def solve_prop1(stats, theta, cfg, z, opts=None, init=None, problem=None):
    """Fixed point of the Cauchy system at z (upper half-plane or real outside the spectrum)."""
    opts = opts or SolverOptions()
    if np.imag(z) < 0:
        raise ContractViolation(f"spectral point must have Im(z) >= 0, got {z}")
    problem = problem or cauchy_problem(stats, theta, cfg, opts)
    fp = solve_fixed_point(problem.lin, complex(z), opts, init=init)
    return FixedPointSolution(problem=problem, fp=fp)


def cauchy_B(sol):
    return sol.fp.trace("out") / sol.problem.R_a


def cauchy_mu(G_B, z, cfg):
    """Normalized Cauchy transform of the S coupled eigenvalues of B.

    Zero eigenvalues (R_a > T) are removed; for R1 >= R2 this is the
    transform of μ, otherwise of 1/μ.

    >>> from model import SystemConfig
    >>> cauchy_mu(1 / 2.0, 2.0, SystemConfig(T=2, R1=4, R2=2))
    0.5
    """
    a, _ = user_roles(cfg)
    R_a = cfg.receive_dims(a)
    n_zero = max(R_a - cfg.T, 0)
    if cfg.S == 0:
        raise DegenerateScenarioError("no coupled subchannels")
    if n_zero and z == 0:
        raise PoleError("G_mu has a pole at z = 0 when zero eigenvalues are removed")
    correction = n_zero / z if n_zero else 0.0
    return (R_a * G_B - correction) / cfg.S


class MuTransform:
    """Callable z -> G_μ(z) backed by Cauchy-system solves, warm-started along a path."""

    def __init__(self, stats, theta, cfg, opts=None):
        self.cfg = cfg
        self.opts = opts or SolverOptions()
        self.problem = cauchy_problem(stats, theta, cfg, self.opts)
        self.swapped = self.problem.a == 2
        self.solves = 0
        self._last = None

    def ratio_transform(self, z, warm=True):
        """Transform of the computed ratio (μ, or ν = 1/μ when swapped) at Im z >= 0."""
        init = self._last.G if (warm and self.opts.warm_start and self._last is not None) else None
        sol = solve_prop1(None, None, self.cfg, z, self.opts, init=init, problem=self.problem)
        self.solves += 1
        if warm:
            self._last = sol.fp
        return cauchy_mu(cauchy_B(sol), z, self.cfg)

    def __call__(self, z, warm=True):
        z = complex(z)
        if not self.swapped:
            return self.ratio_transform(z, warm)
        w = 1.0 / z
        if w.imag < 0:
            g_nu = np.conj(self.ratio_transform(np.conj(w), warm))
        else:
            g_nu = self.ratio_transform(w, warm)
        return 1.0 / z - g_nu / z**2


def _quad(integrand, upper, opts, label):
    if upper <= 0:
        return 0.0
    result = scipy.integrate.quad(integrand, 0.0, upper, epsrel=opts.quad_epsrel, limit=opts.quad_limit, full_output=1)
    if len(result) > 3:
        info = result[2]
        last = int(info.get("last", 0))
        intervals = list(zip(info["alist"][:last], info["blist"][:last]))
        raise QuadratureError(f"{label} integral did not converge: {result[3].strip()}", intervals=intervals)
    return float(result[0])


def coupled_rates_nats(cfg, t, g_mu, options=None, opts=None):
    """Coupled-subchannel rates (nats) from G_μ, before private streams."""
    options = options or RateOptions()
    opts = opts or SolverOptions()
    a1, a2 = options.coupled_arguments(cfg, t)
    eps, S, k1 = opts.spectral_eps, cfg.S, cfg.kappa1

    def user1(x):
        return 1.0 / (1.0 + x) + np.real(g_mu(-1.0 / (1.0 + x) + 1j * eps)) / (1.0 + x) ** 2

    def user2(x):
        return -np.real(g_mu(-(1.0 + x) + 1j * eps)) + k1 * np.real(g_mu(-(1.0 + k1 * x) + 1j * eps))

    return S * _quad(user1, a1, opts, "user-1"), S * _quad(user2, a2, opts, "user-2")


def integrate_rates(cfg, t, g_mu, options=None, opts=None):
    """(I1, I2) of the coupled subchannels in `options.unit`."""
    options = options or RateOptions()
    I1, I2 = coupled_rates_nats(cfg, t, g_mu, options, opts)
    return float(to_unit(I1, options.unit)), float(to_unit(I2, options.unit))


@dataclass(frozen=True, eq=False)
class PowerFixedPoint:
    """Power-normalization system at z = −ε and z = −ε/2 with the extrapolated t."""

    points: tuple
    t_points: tuple
    t: float

    @property
    def iterations(self):
        return sum(fp.sweeps for fp in self.points)

    @property
    def residual(self):
        return max(fp.residual for fp in self.points)

    def family(self, j, i=None):
        group = POWER_FAMILY[j]
        name = group if j == 1 else f"{group}_{i}"
        return self.points[-1].block(name)


def solve_prop2(stats, theta, cfg, opts=None):
    """Asymptotic t from −Tr of the tx block, extrapolated from z = −ε to z = 0."""
    opts = opts or SolverOptions()
    stats.check_config(cfg)
    lin = power_linearization(stats, theta)
    eps = opts.power_eps
    first = solve_fixed_point(lin, complex(-eps), opts)
    second = solve_fixed_point(lin, complex(-eps / 2.0), opts, init=first.G)
    t_full = -np.real(first.trace("tx"))
    t_half = -np.real(second.trace("tx"))
    t = 2.0 * t_half - t_full
    if not t > 0:
        raise ConvergenceError(f"non-positive power normalization factor t={t:.3e}", residuals=second.history)
    logger.debug("power factor t=%.8g (eps=%.1e: %.8g, eps/2: %.8g)", t, eps, t_full, t_half)
    return PowerFixedPoint(points=(first, second), t_points=(t_full, t_half), t=float(t))


def private_rates_nats(cfg, t, options=None):
    """Rates (nats) of the interference-free streams of both users."""
    options = options or RateOptions()
    alpha1, alpha2 = options.snr_arguments(cfg, t)
    p1, p2 = cfg.private_streams
    return p1 * np.log1p(alpha1), p2 * np.log1p(alpha2)


def asymptotic_rates(stats, theta, cfg, options=None, opts=None, t=None):
    """Deterministic-equivalent rates: asymptotic t, integrated G_μ and private streams."""
    options = options or RateOptions()
    opts = opts or SolverOptions()
    if t is None:
        t = solve_prop2(stats, theta, cfg, opts).t
    I1 = I2 = 0.0
    if cfg.S > 0:
        g_mu = MuTransform(stats, theta, cfg, opts)
        I1, I2 = coupled_rates_nats(cfg, t, g_mu, options, opts)
        logger.debug("rate integrals done solves=%d", g_mu.solves)
    extra1, extra2 = private_rates_nats(cfg, t, options)
    return RateReport(
        I1=float(to_unit(I1 + extra1, options.unit)),
        I2=float(to_unit(I2 + extra2, options.unit)),
        unit=options.unit,
        regime=cfg.regime,
        S=cfg.S,
        t=float(t),
    )


def spectral_density(g_mu, grid, eps=None, n_threads=1):
    """−Im G_μ(x + iε)/π on `grid`; points are solved independently."""
    eps = g_mu.opts.spectral_eps if eps is None else eps
    points = [complex(x, eps) for x in np.asarray(grid, dtype=float)]
    with ThreadPoolExecutor(max_workers=max(1, n_threads)) as pool:
        values = list(pool.map(lambda z: g_mu(z, warm=False), points))
    return -np.imag(np.array(values)) / np.pi


def spectral_cdf(grid, density):
    """Cumulative mass of `density` over `grid` (trapezoidal)."""
    return scipy.integrate.cumulative_trapezoid(density, grid, initial=0.0)
