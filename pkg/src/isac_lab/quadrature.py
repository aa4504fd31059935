"""Numerical integration: 1-D adaptive quadrature, the truncated (S, K) double
integral used by the ergodic results, and trivariate-normal expectations by
scrambled Sobol sampling."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, stats
from scipy.stats import qmc

from .errors import ConfigError, NonConvergent


@dataclass(frozen=True)
class QuadratureBudget:
    rel_tol: float = 1e-8
    max_evals: int = 2_000_000
    qmc_points: int = 2**16
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.rel_tol <= 1e-2):
            raise ConfigError(f"rel_tol must lie in (0, 1e-2], got {self.rel_tol}")
        if self.max_evals <= 0 or self.qmc_points <= 0:
            raise ConfigError("evaluation caps must be positive")
        if self.qmc_points < 64:
            raise ConfigError(f"qmc_points={self.qmc_points} is too small for a region estimate (need >= 64)")


@dataclass(frozen=True)
class Integral:
    value: float
    error: float
    evals: int


def integrate_1d(f: Callable[[float], float], a: float, b: float, budget: QuadratureBudget | None = None) -> Integral:
    """Adaptive Gauss-Kronrod on ``[a, b]``; ``b`` may be ``inf``."""
    budget = budget or QuadratureBudget()
    limit = max(50, budget.max_evals // 21)
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            res = integrate.quad(f, a, b, epsabs=0.0, epsrel=budget.rel_tol, limit=limit, full_output=True)
        except integrate.IntegrationWarning as exc:
            raise NonConvergent(f"quadrature did not reach rel_tol={budget.rel_tol}: {exc}") from exc
    # with full_output a fourth element carries the failure message instead of a warning
    if len(res) > 3:
        raise NonConvergent(f"quadrature did not reach rel_tol={budget.rel_tol}: {res[3].splitlines()[0]}")
    val, err, info = res
    if not math.isfinite(val) or err > max(budget.rel_tol * abs(val), 1e-300) * 10:
        raise NonConvergent(f"error estimate {err:.3g} exceeds tolerance for value {val:.6g}")
    return Integral(float(val), float(err), int(info["neval"]))


def sk_box(N: int) -> tuple[float, float, float, float]:
    """Integration box ``S in [0, 10N]``, ``K in [0, N + 5 sqrt(N)]``."""
    return 0.0, 10.0 * N, 0.0, N + 5.0 * math.sqrt(N)


def sk_weight(S, K, N: int):
    """Product density of ``S ~ Exp(mean N)`` and ``K ~ Normal(N, N)``."""
    return np.exp(-S / N - (K - N) ** 2 / (2.0 * N)) / (N * math.sqrt(2.0 * math.pi * N))


def _gl_grid(n: int, lo: float, hi: float):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def truncated_gaussian_integral(m: Callable, N: int, budget: QuadratureBudget | None = None,
                                start: int = 32) -> Integral:
    """``I(m) = (1/(N sqrt(2 pi N))) int int m(S, K) exp(-S/N - (K-N)^2/(2N)) dK dS``.

    ``m`` must accept broadcastable arrays ``S`` (column) and ``K`` (row).
    Tensor Gauss-Legendre with the node count doubled until two successive
    values agree to ``rel_tol``.
    """
    budget = budget or QuadratureBudget()
    s0, s1, k0, k1 = sk_box(N)
    prev = None
    n = start
    evals = 0
    while n * n + evals <= budget.max_evals:
        s, ws = _gl_grid(n, s0, s1)
        k, wk = _gl_grid(n, k0, k1)
        S, K = s[:, None], k[None, :]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            vals = np.asarray(m(S, K), dtype=float) * sk_weight(S, K, N)
        val = float(ws @ np.broadcast_to(vals, (n, n)) @ wk)
        evals += n * n
        if not math.isfinite(val):
            return Integral(val, math.inf, evals)
        if prev is not None:
            err = abs(val - prev)
            if err <= budget.rel_tol * abs(val) or err == 0.0:
                return Integral(val, err, evals)
        prev = val
        n *= 2
    raise NonConvergent(f"(S, K) integral did not settle to rel_tol={budget.rel_tol} within {budget.max_evals} evaluations")


def mvn_points(mean, cov_diag, budget: QuadratureBudget) -> np.ndarray:
    """Scrambled Sobol points mapped to ``N(mean, diag(cov_diag))``; shape ``(n, d)``."""
    mean = np.asarray(mean, dtype=float)
    sd = np.sqrt(np.asarray(cov_diag, dtype=float))
    if np.any(sd <= 0):
        raise ConfigError("covariance diagonal must be positive")
    d = mean.shape[0]
    m = max(6, int(math.ceil(math.log2(budget.qmc_points))))
    eng = qmc.Sobol(d, scramble=True, seed=np.random.default_rng(budget.seed))
    u = eng.random_base2(m)[: budget.qmc_points]
    # keep away from 0 and 1 so the inverse CDF stays finite
    u = np.clip(u, 1e-16, 1 - 1e-16)
    return mean + sd * stats.norm.ppf(u)


def mvn_expectation(mean, cov_diag, fn: Callable[[np.ndarray], np.ndarray], budget: QuadratureBudget | None = None):
    """QMC estimate of ``E[fn(X)]`` for ``X ~ N(mean, diag(cov_diag))``.

    ``fn`` receives the ``(n, d)`` point array and may return shape ``(n,)`` or
    ``(n, k)``; the mean is taken over the first axis.
    """
    budget = budget or QuadratureBudget()
    pts = mvn_points(mean, cov_diag, budget)
    vals = np.asarray(fn(pts), dtype=float)
    return vals.mean(axis=0)


def mvn_region_probability(mean, cov_diag, indicator: Callable[[np.ndarray], np.ndarray],
                           budget: QuadratureBudget | None = None) -> float:
    return float(mvn_expectation(mean, cov_diag, lambda x: np.asarray(indicator(x), dtype=float), budget))


def gamma_log_expectation(a: float, shape: int, budget: QuadratureBudget | None = None) -> float:
    """``E[ln(1 + a X)]`` for ``X ~ Gamma(shape, 1)``, in nats."""
    if a <= 0:
        return 0.0
    dist = stats.gamma(shape)
    lg = math.lgamma(shape)

    def f(x):
        return math.log1p(a * x) * math.exp((shape - 1) * math.log(x) - x - lg) if x > 0 else 0.0

    hi = dist.isf(1e-16)
    return integrate_1d(f, 0.0, hi, budget).value
