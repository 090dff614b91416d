"""
model.py

Configuration and channel-statistics types for the dual-user STAR-RIS downlink,
channel sampling, and the one-sided correlation operators used by the
asymptotic solvers.

Every channel link follows the Rician/Weichselberger form

    X = Xbar + A (P ⊙ Z) B^H,   Z_ij ~ CN(0, 1/scale)

with deterministic LoS part `Xbar`, unitary eigenbases `A`, `B` and a
nonnegative variance profile `P`. Users are indexed 1 and 2; panel index
k = 0 denotes the direct BS->user link.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from errors import ConfigurationError, DegenerateScenarioError
from misc_tools import (
    complex_normal,
    nearly_square_factors,
    random_unitary,
    require_hermitian,
    unitary_defect,
)
from settings import config

logger = logging.getLogger(__name__)

UNITARY_TOL = 1e-12
THETA_TOL = 1e-12


# -------------------------
# System configuration
# -------------------------
@dataclass(frozen=True)
class SystemConfig:
    """Antenna counts, STAR-RIS panel sizes, powers, NOMA splits and noise."""

    T: int
    R1: int
    R2: int
    panel_sizes: tuple = ()
    P: float = 1.0
    sigma0_sq: float = 1.0
    kappa1: float = 0.1
    kappa2: float = 0.9
    rho1: float = 5.0
    rho2: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "panel_sizes", tuple(int(n) for n in self.panel_sizes))
        for name in ("T", "R1", "R2"):
            if int(getattr(self, name)) < 1:
                raise ConfigurationError(f"{name} must be >= 1, got {getattr(self, name)}")
        if any(n < 1 for n in self.panel_sizes):
            raise ConfigurationError(f"every panel needs >= 1 element, got {self.panel_sizes}")
        if not (0.0 <= self.kappa1 <= 1.0 and 0.0 <= self.kappa2 <= 1.0):
            raise ConfigurationError("power fractions must lie in [0, 1]")
        if abs(self.kappa1 + self.kappa2 - 1.0) > 1e-12:
            raise ConfigurationError(f"kappa1 + kappa2 must be 1, got {self.kappa1 + self.kappa2}")
        for name in ("P", "sigma0_sq", "rho1", "rho2"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be > 0, got {getattr(self, name)}")

    @classmethod
    def from_snr_db(cls, snr_db, **kwargs):
        """Build a config with sigma0^2 = 10^(-snr_db/10), i.e. SNR = 1/sigma0^2."""
        return cls(sigma0_sq=10.0 ** (-snr_db / 10.0), **kwargs)

    def with_snr_db(self, snr_db):
        return replace(self, sigma0_sq=10.0 ** (-snr_db / 10.0))

    @property
    def snr_db(self):
        return -10.0 * np.log10(self.sigma0_sq)

    @property
    def K(self):
        return len(self.panel_sizes)

    @property
    def L(self):
        return int(sum(self.panel_sizes))

    @property
    def S(self):
        """Number of coupled generalized singular value pairs."""
        T, R1, R2 = self.T, self.R1, self.R2
        return min(R1, T) + min(R2, T) - min(R1 + R2, T)

    @property
    def regime(self):
        """'coupled' for T <= min(R1,R2), 'partial' below R1+R2, 'private' otherwise."""
        if self.T <= min(self.R1, self.R2):
            return "coupled"
        if self.T < self.R1 + self.R2:
            return "partial"
        return "private"

    @property
    def private_streams(self):
        """Interference-free stream counts (user 1, user 2)."""
        return max(self.T - self.R2, 0), max(self.T - self.R1, 0)

    def receive_dims(self, i):
        return self.R1 if i == 1 else self.R2


@dataclass(frozen=True)
class RateOptions:
    """Rate conventions shared by the Monte-Carlo and asymptotic pipelines.

    unit : 'bits' or 'nats'.
    fold_power : multiply rho_i by P in the asymptotic SNR arguments.
    i2_formula : 'power' writes user 2's subchannel rate as kappa2 P over kappa1 plus
        the scaled noise,
        'sinr' uses the SINR of the superposition model.
    user1_power_fraction : include kappa1 in user 1's coupled-subchannel SNR of
        the asymptotic integrals and closed forms, so they agree with the
        per-realization rate.
    """

    unit: str = field(default_factory=lambda: config("RATE_UNIT"))
    fold_power: bool = False
    i2_formula: str = "power"
    user1_power_fraction: bool = True

    def __post_init__(self):
        if self.unit not in ("bits", "nats"):
            raise ConfigurationError(f"unit must be 'bits' or 'nats', got {self.unit!r}")
        if self.i2_formula not in ("power", "sinr"):
            raise ConfigurationError(f"i2_formula must be 'power' or 'sinr', got {self.i2_formula!r}")

    def snr_arguments(self, cfg, t):
        """Return (alpha1, alpha2) = rho_i (x P if folded) / (t sigma0^2)."""
        if not t > 0:
            raise ConfigurationError(f"power normalization factor must be > 0, got {t}")
        power = cfg.P if self.fold_power else 1.0
        return power * cfg.rho1 / (t * cfg.sigma0_sq), power * cfg.rho2 / (t * cfg.sigma0_sq)

    def coupled_arguments(self, cfg, t):
        """SNR arguments entering the coupled-subchannel integrals and closed forms."""
        a1, a2 = self.snr_arguments(cfg, t)
        if self.user1_power_fraction:
            a1 = cfg.kappa1 * a1
        return a1, a2


# -------------------------
# Channel statistics
# -------------------------
@dataclass(frozen=True, eq=False)
class LinkStats:
    """One Rician link X = los + left (profile ⊙ Z) right^H with Var(Z_ij) = 1/scale."""

    los: np.ndarray
    left: np.ndarray
    right: np.ndarray
    profile: np.ndarray
    scale: float

    def __post_init__(self):
        los = np.asarray(self.los, dtype=complex)
        profile = np.asarray(self.profile, dtype=float)
        object.__setattr__(self, "los", los)
        object.__setattr__(self, "left", np.asarray(self.left, dtype=complex))
        object.__setattr__(self, "right", np.asarray(self.right, dtype=complex))
        object.__setattr__(self, "profile", profile)
        rows, cols = los.shape
        if self.left.shape != (rows, rows) or self.right.shape != (cols, cols) or profile.shape != (rows, cols):
            raise ConfigurationError(
                f"link dimensions inconsistent: los {los.shape}, left {self.left.shape}, "
                f"right {self.right.shape}, profile {profile.shape}"
            )
        if np.any(profile < 0):
            raise ConfigurationError("variance profile entries must be nonnegative")
        if not self.scale > 0:
            raise ConfigurationError(f"variance scale must be > 0, got {self.scale}")
        for name in ("left", "right"):
            defect = unitary_defect(getattr(self, name))
            if defect > UNITARY_TOL * max(1, rows + cols):
                raise ConfigurationError(f"{name} eigenbasis is not unitary (defect {defect:.2e})")

    @property
    def shape(self):
        return self.los.shape

    @property
    def is_deterministic(self):
        return not np.any(self.profile)

    def sample(self, rng):
        Z = complex_normal(self.shape, 1.0 / self.scale, rng)
        return self.los + self.left @ (self.profile * Z) @ self.right.conj().T

    def right_expectation(self, C):
        """E[X~^H C X~] for an arbitrary (rows x rows) matrix C."""
        power = self.profile**2
        inner = np.einsum("ji,jk,ki->i", self.left.conj(), C, self.left)
        weights = power.T @ inner / self.scale
        return (self.right * weights) @ self.right.conj().T

    def left_expectation(self, C):
        """E[X~ C X~^H] for an arbitrary (cols x cols) matrix C."""
        power = self.profile**2
        inner = np.einsum("ji,jk,ki->i", self.right.conj(), C, self.right)
        weights = power @ inner / self.scale
        return (self.left * weights) @ self.left.conj().T

    def fluctuation_gain(self):
        """E||X~||_F^2."""
        return float(np.sum(self.profile**2) / self.scale)

    def scaled(self, amplitude):
        return replace(self, los=amplitude * self.los, profile=amplitude * self.profile)

    def without_fluctuation(self):
        return replace(self, profile=np.zeros_like(self.profile))

    def padded_rows(self, n_extra, extra_los=None):
        """Append `n_extra` deterministic rows (zero unless `extra_los` is given)."""
        rows, cols = self.shape
        extra = np.zeros((n_extra, cols), dtype=complex) if extra_los is None else extra_los
        left = np.zeros((rows + n_extra, rows + n_extra), dtype=complex)
        left[:rows, :rows] = self.left
        left[rows:, rows:] = np.eye(n_extra)
        return LinkStats(
            los=np.vstack([self.los, extra]),
            left=left,
            right=self.right,
            profile=np.vstack([self.profile, np.zeros((n_extra, cols))]),
            scale=self.scale,
        )


@dataclass(frozen=True, eq=False)
class ChannelStats:
    """Statistics of all links.

    bs_ris[k-1] is the BS->panel-k link F_k (L_k x T); user_links[i-1][k] is the
    link into user i from panel k (R_i x L_k), with k = 0 the direct link (R_i x T).
    """

    bs_ris: tuple
    user_links: tuple

    def __post_init__(self):
        object.__setattr__(self, "bs_ris", tuple(self.bs_ris))
        object.__setattr__(self, "user_links", tuple(tuple(links) for links in self.user_links))
        if len(self.user_links) != 2:
            raise ConfigurationError("exactly two users are supported")
        K = len(self.bs_ris)
        T = self.user_links[0][0].shape[1]
        for i, links in enumerate(self.user_links, start=1):
            if len(links) != K + 1:
                raise ConfigurationError(f"user {i} needs {K + 1} links, got {len(links)}")
            R_i = links[0].shape[0]
            if links[0].shape[1] != T:
                raise ConfigurationError(f"direct link of user {i} must have {T} columns")
            for k in range(1, K + 1):
                if links[k].shape != (R_i, self.bs_ris[k - 1].shape[0]):
                    raise ConfigurationError(
                        f"link ({k},{i}) has shape {links[k].shape}, "
                        f"expected {(R_i, self.bs_ris[k - 1].shape[0])}"
                    )
        for k, F in enumerate(self.bs_ris, start=1):
            if F.shape[1] != T:
                raise ConfigurationError(f"BS->panel {k} link must have {T} columns")

    @property
    def T(self):
        return self.user_links[0][0].shape[1]

    @property
    def R(self):
        return tuple(links[0].shape[0] for links in self.user_links)

    @property
    def K(self):
        return len(self.bs_ris)

    @property
    def panel_sizes(self):
        return tuple(F.shape[0] for F in self.bs_ris)

    @property
    def L(self):
        return int(sum(self.panel_sizes))

    @property
    def bs_ris_deterministic(self):
        return all(F.is_deterministic for F in self.bs_ris)

    def link(self, k, i):
        return self.user_links[i - 1][k]

    def panel(self, k):
        return self.bs_ris[k - 1]

    def check_config(self, cfg):
        if (self.T, self.R[0], self.R[1], self.panel_sizes) != (cfg.T, cfg.R1, cfg.R2, cfg.panel_sizes):
            raise ConfigurationError(
                f"statistics dims (T={self.T}, R={self.R}, panels={self.panel_sizes}) do not match "
                f"config (T={cfg.T}, R=({cfg.R1}, {cfg.R2}), panels={cfg.panel_sizes})"
            )

    def subset_panels(self, K):
        """Keep the first K panels."""
        if not 0 <= K <= self.K:
            raise ConfigurationError(f"cannot keep {K} of {self.K} panels")
        return ChannelStats(self.bs_ris[:K], tuple(links[: K + 1] for links in self.user_links))

    def with_user_links(self, i, links):
        user_links = list(self.user_links)
        user_links[i - 1] = tuple(links)
        return ChannelStats(self.bs_ris, tuple(user_links))

    def swapped(self):
        """Exchange the roles of the two users."""
        return ChannelStats(self.bs_ris, (self.user_links[1], self.user_links[0]))

    def without_bs_ris_fluctuation(self):
        return ChannelStats(tuple(F.without_fluctuation() for F in self.bs_ris), self.user_links)


# -------------------------
# STAR-RIS configuration
# -------------------------
@dataclass(frozen=True, eq=False)
class ThetaState:
    """Complex STAR-RIS coefficients θ_i(l) = sqrt(β_i(l)) e^{jϑ_i(l)} stacked over panels."""

    theta1: np.ndarray
    theta2: np.ndarray
    panel_sizes: tuple

    def __post_init__(self):
        theta1 = np.asarray(self.theta1, dtype=complex).ravel()
        theta2 = np.asarray(self.theta2, dtype=complex).ravel()
        object.__setattr__(self, "theta1", theta1)
        object.__setattr__(self, "theta2", theta2)
        object.__setattr__(self, "panel_sizes", tuple(int(n) for n in self.panel_sizes))
        L = sum(self.panel_sizes)
        if theta1.shape != (L,) or theta2.shape != (L,):
            raise ConfigurationError(f"θ vectors must have length {L}")
        excess = np.abs(np.abs(theta1) ** 2 + np.abs(theta2) ** 2 - 1.0)
        if excess.size and excess.max() > THETA_TOL:
            raise ConfigurationError(f"STAR-RIS energy split violated by {excess.max():.2e}")

    @classmethod
    def from_phases(cls, phase1, phase2, beta1, panel_sizes):
        beta1 = np.asarray(beta1, dtype=float)
        return cls(
            np.sqrt(beta1) * np.exp(1j * np.asarray(phase1)),
            np.sqrt(1.0 - beta1) * np.exp(1j * np.asarray(phase2)),
            panel_sizes,
        )

    @classmethod
    def uniform_split(cls, panel_sizes, rng):
        """β = 0.5 on both sides with uniformly random phases."""
        L = int(sum(panel_sizes))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(2, L))
        return cls.from_phases(phases[0], phases[1], np.full(L, 0.5), panel_sizes)

    @classmethod
    def random(cls, panel_sizes, rng):
        L = int(sum(panel_sizes))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=(2, L))
        return cls.from_phases(phases[0], phases[1], rng.uniform(0.0, 1.0, size=L), panel_sizes)

    @classmethod
    def from_directive(cls, directive, panel_sizes, seed):
        """Build θ from a scenario entry: 'uniform-split', 'random' or a table of arrays."""
        rng = np.random.default_rng(seed)
        if directive == "uniform-split":
            return cls.uniform_split(panel_sizes, rng)
        if directive == "random":
            return cls.random(panel_sizes, rng)
        if isinstance(directive, dict):
            return cls.from_phases(directive["phase1"], directive["phase2"], directive["beta1"], panel_sizes)
        raise ConfigurationError(f"unknown θ directive {directive!r}")

    @property
    def beta1(self):
        return np.abs(self.theta1) ** 2

    @property
    def beta2(self):
        return np.abs(self.theta2) ** 2

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.panel_sizes)]).astype(int)

    def vector(self, i):
        return self.theta1 if i == 1 else self.theta2

    def panel(self, k, i):
        """Diagonal entries of Θ_{k,i} (k = 1..K)."""
        start, stop = self.offsets[k - 1], self.offsets[k]
        return self.vector(i)[start:stop]

    def subset_panels(self, K):
        stop = self.offsets[K]
        return ThetaState(self.theta1[:stop], self.theta2[:stop], self.panel_sizes[:K])

    def swapped(self):
        return ThetaState(self.theta2, self.theta1, self.panel_sizes)


# -------------------------
# Realizations
# -------------------------
def compose_user_channel(direct, reflected, F, thetas):
    """H = R_0 + Σ_k R_k Θ_k F_k."""
    H = np.array(direct, dtype=complex, copy=True)
    for R_k, F_k, theta_k in zip(reflected, F, thetas):
        H += (R_k * theta_k) @ F_k
    return H


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    """Sampled link matrices and the composite user channels."""

    F: tuple
    R: tuple
    H1: np.ndarray
    H2: np.ndarray

    def recomposed(self, theta):
        return tuple(
            compose_user_channel(
                self.R[i - 1][0],
                self.R[i - 1][1:],
                self.F,
                [theta.panel(k, i) for k in range(1, len(self.F) + 1)],
            )
            for i in (1, 2)
        )

    def assembly_residual(self, theta):
        H1, H2 = self.recomposed(theta)
        return max(float(np.linalg.norm(H1 - self.H1)), float(np.linalg.norm(H2 - self.H2)))


def sample_realization(stats, theta, rng_seed):
    """Draw one channel realization; deterministic given `rng_seed`."""
    if tuple(theta.panel_sizes) != stats.panel_sizes:
        raise ConfigurationError(
            f"θ panels {theta.panel_sizes} do not match statistics panels {stats.panel_sizes}"
        )
    rng = np.random.default_rng(rng_seed)
    F = tuple(link.sample(rng) for link in stats.bs_ris)
    R = tuple(tuple(link.sample(rng) for link in links) for links in stats.user_links)
    H = [
        compose_user_channel(R[i - 1][0], R[i - 1][1:], F, [theta.panel(k, i) for k in range(1, stats.K + 1)])
        for i in (1, 2)
    ]
    return ChannelRealization(F=F, R=R, H1=H[0], H2=H[1])


# -------------------------
# One-sided correlation operators
# -------------------------
def eta(stats, k, i, Ctilde, hermitian=True):
    """E[R~_{k,i}^H C~ R~_{k,i}] for an R_i x R_i argument."""
    link = stats.link(k, i)
    Ctilde = np.asarray(Ctilde)
    if hermitian:
        require_hermitian(Ctilde, f"eta argument ({k},{i})")
    if Ctilde.shape != (link.shape[0],) * 2:
        raise ConfigurationError(f"eta({k},{i}) expects {link.shape[0]}x{link.shape[0]}, got {Ctilde.shape}")
    return link.right_expectation(Ctilde)


def eta_tilde(stats, k, i, C, hermitian=True):
    """E[R~_{k,i} C R~_{k,i}^H] for an L̂ x L̂ argument."""
    link = stats.link(k, i)
    C = np.asarray(C)
    if hermitian:
        require_hermitian(C, f"eta_tilde argument ({k},{i})")
    if C.shape != (link.shape[1],) * 2:
        raise ConfigurationError(f"eta_tilde({k},{i}) expects {link.shape[1]}x{link.shape[1]}, got {C.shape}")
    return link.left_expectation(C)


def zeta(stats, k, D, hermitian=True):
    """E[F~_k^H D F~_k] for an L_k x L_k argument."""
    link = stats.panel(k)
    D = np.asarray(D)
    if hermitian:
        require_hermitian(D, f"zeta argument ({k})")
    if D.shape != (link.shape[0],) * 2:
        raise ConfigurationError(f"zeta({k}) expects {link.shape[0]}x{link.shape[0]}, got {D.shape}")
    return link.right_expectation(D)


def zeta_tilde(stats, k, Dtilde, hermitian=True):
    """E[F~_k D~ F~_k^H] for a T x T argument."""
    link = stats.panel(k)
    Dtilde = np.asarray(Dtilde)
    if hermitian:
        require_hermitian(Dtilde, f"zeta_tilde argument ({k})")
    if Dtilde.shape != (link.shape[1],) * 2:
        raise ConfigurationError(f"zeta_tilde({k}) expects {link.shape[1]}x{link.shape[1]}, got {Dtilde.shape}")
    return link.left_expectation(Dtilde)


# -------------------------
# Gains
# -------------------------
def reflected_gain(stats, theta, k, i):
    """E||R_{k,i} Θ_{k,i} F_k||_F^2."""
    R, F = stats.link(k, i), stats.panel(k)
    th = theta.panel(k, i)
    gram_R = R.los.conj().T @ R.los + R.right_expectation(np.eye(R.shape[0]))
    gram_F = F.los @ F.los.conj().T + F.left_expectation(np.eye(F.shape[1]))
    return float(np.real(np.trace(gram_R @ (th[:, None] * gram_F * th.conj()[None, :]))))


def direct_gain(stats, i):
    link = stats.link(0, i)
    return float(np.linalg.norm(link.los) ** 2 + link.fluctuation_gain())


def expected_gain(stats, theta, i):
    """E||H_i||_F^2 computed from the statistics."""
    mean = compose_user_channel(
        stats.link(0, i).los,
        [stats.link(k, i).los for k in range(1, stats.K + 1)],
        [stats.panel(k).los for k in range(1, stats.K + 1)],
        [theta.panel(k, i) for k in range(1, stats.K + 1)],
    )
    gain = np.linalg.norm(mean) ** 2 + stats.link(0, i).fluctuation_gain()
    for k in range(1, stats.K + 1):
        R, F = stats.link(k, i), stats.panel(k)
        mean_k = (R.los * theta.panel(k, i)) @ F.los
        gain += reflected_gain(stats, theta, k, i) - np.linalg.norm(mean_k) ** 2
    return float(gain)


def normalize_direct_gain(stats, theta):
    """Rescale each direct link so its expected gain equals the mean per-panel reflected gain."""
    if stats.K == 0:
        raise DegenerateScenarioError("no STAR-RIS panel: reflected gain is zero")
    for i in (1, 2):
        target = float(np.mean([reflected_gain(stats, theta, k, i) for k in range(1, stats.K + 1)]))
        current = direct_gain(stats, i)
        if target <= 0 or current <= 0:
            raise DegenerateScenarioError(f"user {i}: reflected gain {target:.3e}, direct gain {current:.3e}")
        amplitude = np.sqrt(target / current)
        logger.debug("direct link normalized user=%d amplitude=%.6g", i, amplitude)
        links = list(stats.user_links[i - 1])
        links[0] = links[0].scaled(amplitude)
        stats = stats.with_user_links(i, links)
    return stats


def augment_user_stats(stats, i, delta):
    """Statistics of the user-i channel stacked with delta*[I 0] rows up to T rows.

    The appended rows are deterministic and enter through the direct link; the
    variance scale of every link keeps its original value.
    """
    T, R_i = stats.T, stats.R[i - 1]
    n_extra = T - R_i
    if n_extra <= 0:
        raise ConfigurationError(f"user {i} already has {R_i} >= T={T} receive antennas")
    extra = np.zeros((n_extra, T), dtype=complex)
    extra[:, :n_extra] = delta * np.eye(n_extra)
    links = [stats.link(0, i).padded_rows(n_extra, extra)]
    links += [stats.link(k, i).padded_rows(n_extra) for k in range(1, stats.K + 1)]
    return stats.with_user_links(i, links)


# -------------------------
# Scenario statistics generation
# -------------------------
@dataclass(frozen=True)
class LosGeometry:
    """Angle ranges (radians) for UPA steering vectors and the LoS gain factor."""

    azimuth: tuple = (-np.pi / 2, np.pi / 2)
    elevation: tuple = (0.0, np.pi / 2)
    los_gain: float = 1.0


def upa_response(n, azimuth, elevation):
    """Unit-modulus response of an n-element half-wavelength uniform planar array."""
    rows, cols = nearly_square_factors(n)
    m, q = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    phase = np.pi * np.sin(elevation) * (m * np.cos(azimuth) + q * np.sin(azimuth))
    return np.exp(1j * phase).ravel()


def _los(rows, cols, scale, geometry, rng):
    angles = rng.uniform(
        low=[geometry.azimuth[0], geometry.elevation[0]] * 2,
        high=[geometry.azimuth[1], geometry.elevation[1]] * 2,
    )
    a_rx = upa_response(rows, angles[0], angles[1])
    a_tx = upa_response(cols, angles[2], angles[3])
    return np.sqrt(geometry.los_gain / scale) * np.outer(a_rx, a_tx.conj())


def _random_link(rows, cols, scale, geometry, rng, fluctuating=True):
    los = _los(rows, cols, scale, geometry, rng)
    left = random_unitary(rows, rng)
    right = random_unitary(cols, rng)
    profile = rng.uniform(0.0, 1.0, size=(rows, cols))
    if not fluctuating:
        profile = np.zeros_like(profile)
    return LinkStats(los=los, left=left, right=right, profile=profile, scale=scale)


def generate_stats(cfg, seed, geometry=None, rayleigh_bs_ris=True):
    """Random but frozen statistics for `cfg`: UPA LoS parts, Haar eigenbases, uniform profiles.

    Panels are drawn in order, so the statistics of a K-panel scenario are the
    first K panels of any larger draw with the same seed.
    """
    geometry = geometry or LosGeometry()
    root = np.random.SeedSequence(seed)
    direct_seq, *panel_seqs = root.spawn(1 + max(cfg.K, 0))
    rng = np.random.default_rng(direct_seq)
    direct = [_random_link(cfg.receive_dims(i), cfg.T, cfg.receive_dims(i), geometry, rng) for i in (1, 2)]
    bs_ris, reflected = [], ([], [])
    for L_k, seq in zip(cfg.panel_sizes, panel_seqs):
        rng = np.random.default_rng(seq)
        bs_ris.append(_random_link(L_k, cfg.T, cfg.T, geometry, rng, fluctuating=rayleigh_bs_ris))
        for i in (1, 2):
            reflected[i - 1].append(_random_link(cfg.receive_dims(i), L_k, L_k, geometry, rng))
    return ChannelStats(
        bs_ris=tuple(bs_ris),
        user_links=tuple((direct[i],) + tuple(reflected[i]) for i in (0, 1)),
    )
