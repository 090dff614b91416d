import numpy as np
import pytest

from misc_tools import complex_normal, random_unitary
from model import ChannelStats, LinkStats, SystemConfig, ThetaState


def make_link(rows, cols, rng, los_scale=1.0, fluctuating=True, scale=None, identity_bases=False):
    """Link with Gaussian LoS, Haar bases and a uniform variance profile."""
    scale = float(cols if scale is None else scale)
    los = los_scale * complex_normal((rows, cols), 1.0 / scale, rng)
    left = np.eye(rows, dtype=complex) if identity_bases else random_unitary(rows, rng)
    right = np.eye(cols, dtype=complex) if identity_bases else random_unitary(cols, rng)
    profile = rng.uniform(0.2, 1.0, size=(rows, cols)) if fluctuating else np.zeros((rows, cols))
    return LinkStats(los=los, left=left, right=right, profile=profile, scale=scale)


def make_stats(cfg, seed, bs_ris_fluctuating=True, user_fluctuating=True, identity_bases=False):
    """Small full-rank statistics for `cfg` (test scale, not the scenario generator)."""
    rng = np.random.default_rng(seed)
    bs_ris = [
        make_link(L_k, cfg.T, rng, fluctuating=bs_ris_fluctuating, identity_bases=identity_bases)
        for L_k in cfg.panel_sizes
    ]
    user_links = []
    for i in (1, 2):
        R_i = cfg.receive_dims(i)
        links = [make_link(R_i, cfg.T, rng, fluctuating=user_fluctuating, identity_bases=identity_bases)]
        links += [
            make_link(R_i, L_k, rng, fluctuating=user_fluctuating, identity_bases=identity_bases)
            for L_k in cfg.panel_sizes
        ]
        user_links.append(tuple(links))
    return ChannelStats(bs_ris=tuple(bs_ris), user_links=tuple(user_links))


def mean_channels(stats, theta):
    """H̄_1, H̄_2 built from the LoS parts."""
    out = []
    for i in (1, 2):
        H = stats.link(0, i).los.copy()
        for k in range(1, stats.K + 1):
            H = H + (stats.link(k, i).los * theta.panel(k, i)) @ stats.panel(k).los
        out.append(H)
    return out


class FreeTheta:
    """STAR-RIS coefficients without the energy-split constraint, for finite differences."""

    def __init__(self, theta1, theta2, panel_sizes):
        self.theta1 = np.asarray(theta1, dtype=complex)
        self.theta2 = np.asarray(theta2, dtype=complex)
        self.panel_sizes = tuple(panel_sizes)
        self.offsets = np.concatenate([[0], np.cumsum(self.panel_sizes)]).astype(int)

    def vector(self, i):
        return self.theta1 if i == 1 else self.theta2

    def panel(self, k, i):
        return self.vector(i)[self.offsets[k - 1] : self.offsets[k]]

    def perturbed(self, i, m, h):
        theta1, theta2 = self.theta1.copy(), self.theta2.copy()
        (theta1 if i == 1 else theta2)[m] += h
        return FreeTheta(theta1, theta2, self.panel_sizes)


@pytest.fixture(scope="module")
def small_cfg():
    return SystemConfig(T=3, R1=4, R2=4, panel_sizes=(2, 2), sigma0_sq=0.1)


@pytest.fixture(scope="module")
def small_theta(small_cfg):
    return ThetaState.uniform_split(small_cfg.panel_sizes, np.random.default_rng(5))
