import numpy as np
import pytest

from conftest import make_stats, mean_channels
from errors import ContractViolation, DegenerateScenarioError, PoleError
from freeprob import (
    MuTransform,
    asymptotic_rates,
    cauchy_B,
    cauchy_mu,
    cauchy_problem,
    integrate_rates,
    private_rates_nats,
    solve_prop1,
    solve_prop2,
    spectral_cdf,
    spectral_density,
    user_roles,
)
from gsvd import b_matrix, gsvd, power_factor_exact
from linearization import SolverOptions
from mc_rates import mc_average, trial_seeds
from model import ChannelStats, RateOptions, SystemConfig, ThetaState, generate_stats, sample_realization

NATS = RateOptions(unit="nats", i2_formula="sinr")
OPTS = SolverOptions(tol=1e-10, max_iters=5000, spectral_eps=1e-9, quad_epsrel=1e-8)


def deterministic(cfg, seed):
    return make_stats(cfg, seed, bs_ris_fluctuating=False, user_fluctuating=False)


def theta_for(cfg, seed=0):
    return ThetaState.uniform_split(cfg.panel_sizes, np.random.default_rng(seed))


def point_mass(c):
    return lambda z: 1.0 / (z - c)


def test_user_roles():
    assert user_roles(SystemConfig(T=2, R1=4, R2=4)) == (1, 2)
    assert user_roles(SystemConfig(T=2, R1=3, R2=4)) == (2, 1)


def test_cauchy_mu_without_zero_eigenvalues():
    cfg = SystemConfig(T=4, R1=4, R2=4)
    assert cauchy_mu(0.3 - 0.2j, 1.0 + 1.0j, cfg) == 0.3 - 0.2j


def test_cauchy_mu_pole():
    with pytest.raises(PoleError):
        cauchy_mu(1.0, 0.0, SystemConfig(T=2, R1=4, R2=2))
    with pytest.raises(DegenerateScenarioError):
        cauchy_mu(1.0, 1.0j, SystemConfig(T=8, R1=4, R2=4))


def test_integrals_of_point_mass():
    cfg = SystemConfig(T=3, R1=4, R2=4, sigma0_sq=0.2)
    c, t = 1.7, 0.8
    opts = SolverOptions(spectral_eps=0.0, quad_epsrel=1e-10)
    I1, I2 = integrate_rates(cfg, t, point_mass(c), NATS, opts)
    alpha1, alpha2 = NATS.snr_arguments(cfg, t)
    expected1 = cfg.S * np.log1p(c / (1 + c) * cfg.kappa1 * alpha1)
    expected2 = cfg.S * np.log1p(cfg.kappa2 * alpha2 / (1 + c + cfg.kappa1 * alpha2))
    assert np.isclose(I1, expected1, rtol=1e-8)
    assert np.isclose(I2, expected2, rtol=1e-8)

    uncoupled = RateOptions(unit="nats", i2_formula="sinr", user1_power_fraction=False)
    I1_full, _ = integrate_rates(cfg, t, point_mass(c), uncoupled, opts)
    assert np.isclose(I1_full, cfg.S * np.log1p(c / (1 + c) * alpha1), rtol=1e-8)


def test_integrals_in_bits():
    cfg = SystemConfig(T=3, R1=4, R2=4)
    opts = SolverOptions(spectral_eps=0.0)
    nats = integrate_rates(cfg, 1.0, point_mass(0.5), NATS, opts)
    bits = integrate_rates(cfg, 1.0, point_mass(0.5), RateOptions(unit="bits", i2_formula="sinr"), opts)
    assert np.allclose(np.array(bits) * np.log(2.0), nats)


@pytest.mark.parametrize("R1,R2", [(4, 4), (3, 4)])
def test_mu_transform_deterministic(R1, R2):
    cfg = SystemConfig(T=3, R1=R1, R2=R2, panel_sizes=(2, 2))
    stats, theta = deterministic(cfg, 31), theta_for(cfg)
    mu = gsvd(*mean_channels(stats, theta)).mu
    g_mu = MuTransform(stats, theta, cfg, OPTS)
    assert g_mu.swapped == (R1 < R2)
    for z in (0.5 + 1.0j, 2.0 + 0.3j, -0.7 + 0.1j):
        assert np.isclose(g_mu(z), np.mean(1.0 / (z - mu)), rtol=1e-8), f"z={z}"


def test_partial_regime_matches_augmented_oracle():
    cfg = SystemConfig(T=5, R1=4, R2=3, panel_sizes=(2, 2))
    stats, theta = deterministic(cfg, 32), theta_for(cfg)
    opts = SolverOptions(tol=1e-10, max_iters=5000, delta=1e-2)
    problem = cauchy_problem(stats, theta, cfg, opts)
    assert (problem.n_zero, problem.n_inf) == (0, 2)
    z = 0.5 + 1.0j
    sol = solve_prop1(stats, theta, cfg, z, opts, problem=problem)
    B = b_matrix(*mean_channels(stats, theta), regime="partial", delta=1e-2)
    expected = np.trace(np.linalg.inv(z * np.eye(4) - B)) / 4
    assert np.isclose(cauchy_B(sol), expected, rtol=1e-6)


def test_degenerate_and_contract_errors(small_cfg, small_theta):
    cfg = SystemConfig(T=8, R1=4, R2=4, panel_sizes=(2, 2))
    with pytest.raises(DegenerateScenarioError):
        cauchy_problem(make_stats(cfg, 0), small_theta, cfg)
    with pytest.raises(ContractViolation):
        solve_prop1(make_stats(small_cfg, 0), small_theta, small_cfg, 1.0 - 0.5j)


def test_family_shapes(small_cfg, small_theta):
    sol = solve_prop1(make_stats(small_cfg, 33), small_theta, small_cfg, 1.0 + 1.0j, OPTS)
    shapes = {j: sol.family(j).shape for j in range(1, 10)}
    assert shapes == {1: (4, 4), 2: (8, 8), 3: (3, 3), 4: (8, 8), 5: (4, 4), 6: (8, 8), 7: (8, 8), 8: (8, 8), 9: (8, 8)}
    assert np.any(sol.family(8)), "cross family vanishes although the BS-RIS links fluctuate"
    assert sol.covariance_block(3).shape == (3, 3)
    with pytest.raises(KeyError):
        sol.family(10)


def test_power_factor_deterministic(small_cfg, small_theta):
    stats = deterministic(small_cfg, 34)
    power = solve_prop2(stats, small_theta, small_cfg, OPTS)
    exact = power_factor_exact(*mean_channels(stats, small_theta))
    assert np.isclose(power.t, exact, rtol=1e-6)
    assert power.t_points[0] < power.t_points[1], "t(-ε) must grow towards z = 0"
    assert power.family(1).shape == (3, 3)
    assert power.family(2, 1).shape == (8, 8)


def test_power_factor_scaling(small_cfg, small_theta):
    stats = make_stats(small_cfg, 35)
    c = 2.0
    scaled = ChannelStats(
        bs_ris=tuple(link.scaled(c) for link in stats.bs_ris),
        user_links=tuple((links[0].scaled(c),) + tuple(links[1:]) for links in stats.user_links),
    )
    t = solve_prop2(stats, small_theta, small_cfg, OPTS).t
    assert np.isclose(solve_prop2(scaled, small_theta, small_cfg, OPTS).t, t / c**2, rtol=1e-5)


def test_private_only_rates(small_theta):
    cfg = SystemConfig(T=8, R1=4, R2=4, panel_sizes=(2, 2), sigma0_sq=0.5)
    report = asymptotic_rates(make_stats(cfg, 0), small_theta, cfg, NATS, t=0.5)
    alpha1, alpha2 = NATS.snr_arguments(cfg, 0.5)
    assert report.S == 0 and report.regime == "private"
    assert np.isclose(report.I1, 4 * np.log1p(alpha1))
    assert np.isclose(report.I2, 4 * np.log1p(alpha2))


def test_asymptotic_rates_deterministic(small_cfg, small_theta):
    stats = deterministic(small_cfg, 36)
    report = asymptotic_rates(stats, small_theta, small_cfg, NATS, OPTS)
    single = mc_average(stats, small_theta, small_cfg, 1, seed=0, options=NATS)
    assert np.isclose(report.t, single.t, rtol=1e-6)
    assert np.isclose(report.I1, single.I1, rtol=1e-5)
    assert np.isclose(report.I2, single.I2, rtol=1e-5)


def test_spectral_density_mass(small_cfg, small_theta):
    stats = deterministic(small_cfg, 37)
    mu = gsvd(*mean_channels(stats, small_theta)).mu
    g_mu = MuTransform(stats, small_theta, small_cfg, OPTS)
    grid = np.linspace(-1.0, mu.max() + 20.0, 3000)
    density = spectral_density(g_mu, grid, eps=0.2, n_threads=2)
    cdf = spectral_cdf(grid, density)
    assert np.all(density >= 0)
    assert np.all(np.diff(cdf) >= 0)
    assert 0.85 < cdf[-1] < 1.0 + 1e-6


@pytest.mark.slow
def test_asymptotic_rates_track_monte_carlo():
    cfg = SystemConfig.from_snr_db(10.0, T=8, R1=12, R2=12, panel_sizes=(8, 8))
    stats = generate_stats(cfg, seed=1)
    theta = theta_for(cfg, 2)
    mc = mc_average(stats, theta, cfg, 2000, seed=3, options=NATS, n_threads=4)
    asym = asymptotic_rates(stats, theta, cfg, NATS)
    assert np.isclose(asym.t, mc.t, rtol=0.02)
    assert np.isclose(asym.I1, mc.I1, rtol=0.03), f"I1 {asym.I1} vs {mc.I1}"
    assert np.isclose(asym.I2, mc.I2, rtol=0.03), f"I2 {asym.I2} vs {mc.I2}"


@pytest.mark.slow
def test_partial_regime_tracks_monte_carlo():
    cfg = SystemConfig.from_snr_db(10.0, T=16, R1=10, R2=10, panel_sizes=(8, 8))
    stats = generate_stats(cfg, seed=1)
    theta = theta_for(cfg, 2)
    mc = mc_average(stats, theta, cfg, 3000, seed=3, options=NATS, n_threads=4)
    asym = asymptotic_rates(stats, theta, cfg, NATS)
    assert np.isclose(asym.t, mc.t, rtol=0.02)

    # private streams of the sampled rates, each evaluated with its own t
    t_trials = np.array([record[-1] for record in mc.records])
    p1, p2 = cfg.private_streams
    alpha = np.array([NATS.snr_arguments(cfg, t) for t in t_trials])
    private1 = p1 * np.mean(np.log1p(alpha[:, 0]))
    private2 = p2 * np.mean(np.log1p(alpha[:, 1]))
    at_mean1, at_mean2 = private_rates_nats(cfg, np.mean(t_trials), NATS)
    assert private1 >= at_mean1 and private2 >= at_mean2

    asym1, asym2 = private_rates_nats(cfg, asym.t, NATS)
    assert np.isclose(asym1, at_mean1, rtol=0.02) and np.isclose(asym2, at_mean2, rtol=0.02)
    assert np.isclose(asym.I1 - asym1, mc.I1 - private1, rtol=0.10)
    assert np.isclose(asym.I2 - asym2, mc.I2 - private2, rtol=0.10)
    assert np.isclose(asym.I1, mc.I1, rtol=0.10)
    assert np.isclose(asym.I2, mc.I2, rtol=0.10)


@pytest.mark.slow
def test_mu_transform_matches_sampled_ratios():
    cfg = SystemConfig(T=4, R1=6, R2=5, panel_sizes=(6, 6))
    stats = generate_stats(cfg, seed=4)
    theta = theta_for(cfg, 5)
    g_mu = MuTransform(stats, theta, cfg)
    samples = []
    for seed in trial_seeds(6, 1000):
        realization = sample_realization(stats, theta, seed)
        samples.append(gsvd(realization.H1, realization.H2).mu)
    mu = np.concatenate(samples)
    for z in (-1.0, -4.0, 1.0 + 2.0j):
        empirical = np.mean(1.0 / (z - mu))
        assert abs(g_mu(z) - empirical) < 0.05 * abs(empirical), f"z={z}"


@pytest.mark.slow
def test_spectral_cdf_matches_sampled_ratios():
    cfg = SystemConfig(T=8, R1=8, R2=8, panel_sizes=(8, 8))
    stats = generate_stats(cfg, seed=8)
    theta = theta_for(cfg, 9)
    samples = []
    for seed in trial_seeds(10, 3000):
        realization = sample_realization(stats, theta, seed)
        samples.append(gsvd(realization.H1, realization.H2).mu)
    mu = np.sort(np.concatenate(samples))

    # uniform in mu/(1+mu) so the heavy upper tail is covered
    ratio = np.linspace(0.0, 0.999, 1500)
    grid = ratio / (1.0 - ratio)
    g_mu = MuTransform(stats, theta, cfg, SolverOptions(max_iters=20000))
    cdf = spectral_cdf(grid, spectral_density(g_mu, grid, eps=1e-4, n_threads=4))
    empirical = np.searchsorted(mu, grid, side="right") / mu.size
    ks = np.max(np.abs(cdf - empirical))
    assert ks < 0.03, f"KS distance {ks:.4f}"
