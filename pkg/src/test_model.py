import numpy as np
import pytest

from conftest import make_link, make_stats
from errors import ConfigurationError, ContractViolation, DegenerateScenarioError
from model import (
    LinkStats,
    SystemConfig,
    ThetaState,
    augment_user_stats,
    direct_gain,
    eta,
    eta_tilde,
    expected_gain,
    generate_stats,
    normalize_direct_gain,
    reflected_gain,
    sample_realization,
    zeta,
    zeta_tilde,
)


@pytest.fixture(scope="module")
def case1_cfg():
    return SystemConfig(T=10, R1=16, R2=16, panel_sizes=(30, 30))


def test_derived_counts():
    assert SystemConfig(T=10, R1=16, R2=16).S == 10
    assert SystemConfig(T=16, R1=10, R2=10).S == 4
    assert SystemConfig(T=20, R1=10, R2=10).S == 0
    assert SystemConfig(T=16, R1=10, R2=10).private_streams == (6, 6)
    assert SystemConfig(T=12, R1=16, R2=10).regime == "partial"
    assert SystemConfig(T=10, R1=16, R2=16).regime == "coupled"


@pytest.mark.parametrize(
    "kwargs",
    [
        {"T": 0, "R1": 2, "R2": 2},
        {"T": 2, "R1": 2, "R2": 2, "kappa1": 0.5, "kappa2": 0.4},
        {"T": 2, "R1": 2, "R2": 2, "sigma0_sq": 0.0},
        {"T": 2, "R1": 2, "R2": 2, "panel_sizes": (3, 0)},
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(ConfigurationError):
        SystemConfig(**kwargs)


def test_snr_convention():
    cfg = SystemConfig.from_snr_db(20.0, T=2, R1=2, R2=2)
    assert np.isclose(cfg.sigma0_sq, 0.01)
    assert np.isclose(cfg.with_snr_db(0.0).sigma0_sq, 1.0)


def test_theta_energy_split():
    theta = ThetaState.uniform_split((3, 2), np.random.default_rng(0))
    assert np.allclose(theta.beta1 + theta.beta2, 1.0, atol=1e-12)
    assert theta.panel(2, 1).shape == (2,)
    with pytest.raises(ConfigurationError):
        ThetaState(np.ones(2), np.ones(2), (2,))


def test_link_requires_unitary_bases():
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigurationError):
        LinkStats(los=np.zeros((2, 2)), left=2 * np.eye(2), right=np.eye(2), profile=np.ones((2, 2)), scale=2)
    with pytest.raises(ConfigurationError):
        LinkStats(los=np.zeros((2, 2)), left=np.eye(2), right=np.eye(2), profile=-np.ones((2, 2)), scale=2)
    assert make_link(2, 3, rng).shape == (2, 3)


def test_eta_identity_profile():
    rng = np.random.default_rng(1)
    link = LinkStats(
        los=np.zeros((3, 4)), left=np.eye(3), right=np.eye(4), profile=np.ones((3, 4)), scale=4.0
    )
    cfg = SystemConfig(T=2, R1=3, R2=3, panel_sizes=(4,))
    stats = make_stats(cfg, 0)
    stats = stats.with_user_links(1, [stats.link(0, 1), link])
    assert np.allclose(eta(stats, 1, 1, np.eye(3)), (3 / 4) * np.eye(4))
    assert np.allclose(eta(stats, 1, 1, np.zeros((3, 3))), 0.0)
    with pytest.raises(ContractViolation):
        eta(stats, 1, 1, rng.standard_normal((3, 3)))


def test_operators_adjoint_pairing():
    rng = np.random.default_rng(2)
    cfg = SystemConfig(T=4, R1=3, R2=3, panel_sizes=(5,))
    stats = make_stats(cfg, 3)

    def hermitian(n):
        A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        return A + A.conj().T

    C, Ct = hermitian(5), hermitian(3)
    lhs = np.trace(eta_tilde(stats, 1, 1, C) @ Ct)
    rhs = np.trace(C @ eta(stats, 1, 1, Ct))
    assert np.isclose(lhs, rhs, atol=1e-10)

    D, Dt = hermitian(5), hermitian(4)
    assert np.isclose(np.trace(zeta_tilde(stats, 1, Dt) @ D), np.trace(Dt @ zeta(stats, 1, D)), atol=1e-10)


def test_eta_matches_sample_average():
    rng = np.random.default_rng(4)
    link = make_link(3, 4, rng)
    A = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    C = A @ A.conj().T
    n = 20000
    acc = np.zeros((4, 4), dtype=complex)
    for _ in range(n):
        X = link.sample(rng) - link.los
        acc += X.conj().T @ C @ X
    expected = link.right_expectation(C)
    error = np.linalg.norm(acc / n - expected) / np.linalg.norm(expected)
    assert error < 0.05, f"sample average deviates by {error:.3f}"


def test_operators_preserve_positivity():
    rng = np.random.default_rng(5)
    link = make_link(4, 3, rng)
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    out = link.right_expectation(A @ A.conj().T)
    assert np.allclose(out, out.conj().T, atol=1e-12)
    assert np.linalg.eigvalsh(out).min() > -1e-12


def test_sample_realization_reproducible(small_cfg, small_theta):
    stats = make_stats(small_cfg, 7)
    first = sample_realization(stats, small_theta, 42)
    second = sample_realization(stats, small_theta, 42)
    assert np.array_equal(first.H1, second.H1)
    assert np.array_equal(first.H2, second.H2)
    assert first.assembly_residual(small_theta) < 1e-12


def test_deterministic_links_give_los(small_cfg, small_theta):
    stats = make_stats(small_cfg, 7, bs_ris_fluctuating=False, user_fluctuating=False)
    realization = sample_realization(stats, small_theta, 1)
    for k in range(1, stats.K + 1):
        assert np.array_equal(realization.F[k - 1], stats.panel(k).los)


def test_no_panel_gives_direct_link():
    cfg = SystemConfig(T=2, R1=3, R2=3)
    stats = make_stats(cfg, 0)
    theta = ThetaState(np.zeros(0), np.zeros(0), ())
    realization = sample_realization(stats, theta, 3)
    assert np.array_equal(realization.H1, realization.R[0][0])


def test_expected_gain_matches_sampling(small_cfg, small_theta):
    stats = make_stats(small_cfg, 8)
    n = 20000
    gains = [np.linalg.norm(sample_realization(stats, small_theta, s).H1) ** 2 for s in range(n)]
    expected = expected_gain(stats, small_theta, 1)
    assert abs(np.mean(gains) - expected) / expected < 0.02


def test_normalize_direct_gain(small_cfg, small_theta):
    stats = normalize_direct_gain(make_stats(small_cfg, 9), small_theta)
    for i in (1, 2):
        target = np.mean([reflected_gain(stats, small_theta, k, i) for k in (1, 2)])
        assert np.isclose(direct_gain(stats, i), target, rtol=1e-10)
    again = normalize_direct_gain(stats, small_theta)
    assert np.allclose(again.link(0, 1).los, stats.link(0, 1).los)


def test_normalize_without_panels():
    cfg = SystemConfig(T=2, R1=2, R2=2)
    stats = make_stats(cfg, 0)
    with pytest.raises(DegenerateScenarioError):
        normalize_direct_gain(stats, ThetaState(np.zeros(0), np.zeros(0), ()))


def test_augment_user_stats():
    cfg = SystemConfig(T=5, R1=4, R2=3, panel_sizes=(2,))
    stats = augment_user_stats(make_stats(cfg, 0), 2, 1e-4)
    assert stats.R == (4, 5)
    assert np.allclose(stats.link(0, 2).los[3:, :2], 1e-4 * np.eye(2))
    assert not np.any(stats.link(0, 2).profile[3:])
    with pytest.raises(ConfigurationError):
        augment_user_stats(stats, 2, 1e-4)


def test_generate_stats_nested_panels():
    big = generate_stats(SystemConfig(T=3, R1=4, R2=4, panel_sizes=(5, 6, 7)), seed=11)
    small = generate_stats(SystemConfig(T=3, R1=4, R2=4, panel_sizes=(5, 6)), seed=11)
    nested = big.subset_panels(2)
    assert np.array_equal(nested.panel(2).los, small.panel(2).los)
    assert np.array_equal(nested.link(0, 1).los, small.link(0, 1).los)
    assert np.array_equal(nested.link(2, 2).profile, small.link(2, 2).profile)


def test_generate_stats_los_modulus(case1_cfg):
    stats = generate_stats(case1_cfg, seed=3, rayleigh_bs_ris=False)
    assert stats.bs_ris_deterministic
    assert np.allclose(np.abs(stats.panel(1).los), np.sqrt(1.0 / case1_cfg.T))
    assert np.allclose(np.abs(stats.link(1, 1).los), np.sqrt(1.0 / 30))
