import math

import numpy as np
import pytest
from scipy import stats

from isac_lab.errors import ConfigError, NonConvergent
from isac_lab.quadrature import (
    QuadratureBudget,
    gamma_log_expectation,
    integrate_1d,
    mvn_expectation,
    mvn_region_probability,
    truncated_gaussian_integral,
)
from isac_lab.precoder import SsjbSplit
from isac_lab.scenario import ScenarioConfig
from isac_lab.stochastic import ssjb_eav_integral

N = 15
MEAN = np.array([0.0, 0.0, N])
VAR = np.array([N / 2, N / 2, N])


def test_semi_infinite_integrals():
    assert integrate_1d(lambda x: math.exp(-x), 0, math.inf).value == pytest.approx(1, abs=1e-10)
    dens = lambda x: math.exp(14 * math.log(x) - x - math.lgamma(15)) if x > 0 else 0.0  # noqa: E731
    assert integrate_1d(dens, 0, math.inf).value == pytest.approx(1, abs=1e-9)


def test_divergent_integral_is_reported():
    with pytest.raises(NonConvergent):
        integrate_1d(lambda x: 1 / x if x > 0 else 0.0, 0, 1)


def test_eavesdropper_integrand_against_sampling():
    split = SsjbSplit(0.5, math.sqrt(0.5))
    cfg = ScenarioConfig()
    value = ssjb_eav_integral(split, cfg, "exp1")
    rng = np.random.default_rng(8)
    x = rng.exponential(1.0, 1_000_000)
    y = rng.gamma(N - 2, 1.0, 1_000_000)
    mc = np.mean(np.log2(1 + 0.005 * x / (1 + 0.01 / 26 * y)))
    assert value > 0
    assert value == pytest.approx(mc, rel=0.02)


@pytest.mark.parametrize("m,want,tol", [
    (lambda S, K: np.ones(np.broadcast(S, K).shape), 1.0, 1e-4),
    (lambda S, K: K + 0 * S, N, 1e-3 * N),
    (lambda S, K: S + 0 * K, N, 1e-3 * N),
])
def test_truncated_gaussian_weight(m, want, tol):
    assert truncated_gaussian_integral(m, N).value == pytest.approx(want, abs=tol)


def test_truncated_integral_reports_divergence():
    got = truncated_gaussian_integral(lambda S, K: np.where(S > 0, np.inf, np.inf) + 0 * K, N)
    assert not math.isfinite(got.value)


def test_region_probabilities():
    b = QuadratureBudget()
    assert mvn_region_probability(MEAN, VAR, lambda x: np.ones(len(x), bool), b) == 1.0
    assert mvn_region_probability(MEAN, VAR, lambda x: x[:, 0] > 0, b) == pytest.approx(0.5, abs=0.002)


def test_sphere_probability_against_grid():
    r2 = N
    qmc = mvn_region_probability(MEAN, VAR, lambda x: np.sum((x - MEAN) ** 2, axis=1) <= r2)
    r = math.sqrt(r2)
    n = 200
    edges = np.linspace(-r, r, n + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])
    h = edges[1] - edges[0]
    pt = stats.norm(0, math.sqrt(VAR[0])).pdf(mid)
    pk = stats.norm(0, math.sqrt(VAR[2])).pdf(mid)
    X, Y = np.meshgrid(mid, mid, indexing="ij")
    total = 0.0
    for k, wk in zip(mid, pk):
        inside = X**2 + Y**2 + k * k <= r2
        total += wk * np.sum(np.outer(pt, pt)[inside])
    assert qmc == pytest.approx(total * h**3, abs=0.005)


def test_qmc_expectation_is_seeded():
    f = lambda x: x[:, 2]  # noqa: E731
    assert mvn_expectation(MEAN, VAR, f) == mvn_expectation(MEAN, VAR, f)
    assert mvn_expectation(MEAN, VAR, f) == pytest.approx(N, abs=0.01)


def test_budget_validation():
    with pytest.raises(ConfigError):
        QuadratureBudget(rel_tol=0.5)
    with pytest.raises(ConfigError):
        QuadratureBudget(qmc_points=16)
    with pytest.raises(ConfigError):
        mvn_expectation(MEAN, [1, 0, 1], lambda x: x[:, 0])


def test_gamma_log_expectation():
    rng = np.random.default_rng(2)
    mc = np.mean(np.log1p(0.005 * rng.gamma(N, 1.0, 400_000)))
    assert gamma_log_expectation(0.005, N) == pytest.approx(mc, rel=2e-3)
    assert gamma_log_expectation(0.0, N) == 0.0
