"""Distribution-level results: CRB outage curves, ergodic CRBs, ergodic rates
and secrecy rates for both schemes.

Every CRB variant used here factors as ``V(R, T, K) / cos^2(angle)`` with the
angle uniform and independent of the channel. The angle is therefore
integrated out exactly, ``P(V / cos^2 > eps) = (2/pi) asin(min(1, sqrt(V/eps)))``,
and only the channel statistics are averaged. Under the large-N normal model
``(R, T, K) ~ N((0, 0, N), diag(N/2, N/2, N))`` that average is a
Sobol estimate; the ergodic results use the ``(S, K)`` double integral.

Rates are in bits per channel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import crb
from .errors import ConfigError
from .precoder import SlbSplit, SsjbSplit, slb_scalars
from .quadrature import (
    QuadratureBudget,
    gamma_log_expectation,
    integrate_1d,
    mvn_points,
    truncated_gaussian_integral,
)
from .scenario import ScenarioConfig, deriv_norm2

KINDS = ("exact", "lower", "upper", "approx", "empirical")
TARGETS = ("bs", "eav_strong", "eav_weak")
SCHEMES = ("ssjb", "slb")
CONVENTIONS = ("exp1", "chi2")

DEFAULT_SSJB = SsjbSplit(0.5, math.sqrt(0.5))
DEFAULT_SLB = SlbSplit(0.5, 0.2, 0.2)

# designated user-rate kind entering the secrecy rate
USER_RATE_KIND = {"ssjb": "upper_jensen", "slb": "approx"}


@dataclass(frozen=True)
class CcdfCurve:
    eps: np.ndarray
    p: np.ndarray
    kind: str
    target: str
    scheme: str
    stderr: np.ndarray | None = None
    n_inf: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown curve kind {self.kind!r}")


@dataclass
class ErgodicReport:
    scheme: str
    e_crb_bs: dict = field(default_factory=dict)
    e_crb_eav_strong: dict = field(default_factory=dict)
    e_crb_eav_weak: dict = field(default_factory=dict)
    r_user: dict = field(default_factory=dict)
    r_eav: dict = field(default_factory=dict)
    r_target: dict = field(default_factory=dict)
    esr_external: float = 0.0
    esr_target: float = 0.0

    def rows(self):
        """Flat ``(metric, kind, value)`` rows in a fixed order."""
        out = []
        for name in ("e_crb_bs", "e_crb_eav_strong", "e_crb_eav_weak", "r_user", "r_eav", "r_target"):
            for kind, v in getattr(self, name).items():
                out.append((name, kind, v))
        out.append(("esr_external", "approx", self.esr_external))
        out.append(("esr_target", "approx", self.esr_target))
        return out


def check_eps(eps) -> np.ndarray:
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    if eps.ndim != 1 or eps.size == 0:
        raise ConfigError("eps grid must be a nonempty 1-D sequence")
    if np.any(~np.isfinite(eps)) or np.any(eps <= 0):
        raise ConfigError("eps values must be positive and finite")
    if np.any(np.diff(eps) <= 0):
        raise ConfigError("eps grid must be strictly ascending")
    return eps


def angle_outage(v, eps):
    """``P(v / cos^2(u) > eps)`` for ``u ~ U(-pi/2, pi/2)``, broadcast over ``v`` x ``eps``."""
    v = np.asarray(v, dtype=float)[..., None]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(np.clip(v / eps, 0.0, 1.0))
    r = np.where(np.isnan(r) | (v == np.inf), 1.0, r)
    return (2.0 / math.pi) * np.arcsin(r)


def e_trunc_inv_cos2(delta: float) -> float:
    """``E[1/cos^2 u]`` for ``u`` uniform on ``[-pi/2 + delta, pi/2 - delta]``."""
    return 2.0 / math.tan(delta) / (math.pi - 2.0 * delta)


def clt_moments(N: int):
    return np.array([0.0, 0.0, float(N)]), np.array([N / 2.0, N / 2.0, float(N)])


def physical_sk(S, K, N: int):
    """Project normal-model samples onto the feasible set ``0 <= S <= N K``."""
    K = np.maximum(K, 0.0)
    return np.minimum(S, N * K), K


# --- per-realization "V" forms: the CRB at angle 0 --------------------------

def v_bs_ssjb_approx(S, K, split: SsjbSplit, config: ScenarioConfig):
    """SSJB CRB(theta)*cos^2 with ``|a'^H h|^2`` replaced by ``||a'||^2``.

    The factor ``1 - 1/(K - S/N)`` is clamped at zero: the exact term it
    stands for is nonnegative.
    """
    N, M, P = config.N, config.M, config.power
    g1 = P * split.tau
    g2 = (1.0 - split.tau) * P / (N - 2)
    perp = K - S / N
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(perp > 1.0, 1.0 - 1.0 / np.where(perp > 1.0, perp, 1.0), 0.0)
    den = g1 * deriv_norm2(M, 0.0) * N * split.alpha**2 + g2 * M * deriv_norm2(N, 0.0) * fac
    with np.errstate(divide="ignore"):
        return np.where(den > 0, crb.q_factor(config) / np.where(den > 0, den, 1.0), np.inf)


def v_bs_ssjb_exact(w, split: SsjbSplit, config: ScenarioConfig):
    """SSJB CRB(theta)*cos^2 in terms of ``w = |a'^H h_perp|^2 / (||a'||^2 ||h_perp||^2)``.

    ``h_perp`` (the user channel with its ``a`` component removed) is isotropic
    in the complement of ``a``, which contains ``a'``, so ``w ~ Beta(1, N-2)``.
    """
    N, M, P = config.N, config.M, config.power
    g1 = P * split.tau
    g2 = (1.0 - split.tau) * P / (N - 2)
    den = g1 * deriv_norm2(M, 0.0) * N * split.alpha**2 + g2 * M * deriv_norm2(N, 0.0) * (1.0 - np.asarray(w))
    with np.errstate(divide="ignore"):
        return np.where(den > 0, crb.q_factor(config) / np.where(den > 0, den, 1.0), np.inf)


def _beta_expectation(fn, b: int, budget: QuadratureBudget | None = None):
    """``E[fn(W)]`` for ``W ~ Beta(1, b)``; ``fn`` may return a vector."""
    # composite Gauss-Legendre: 64 panels x 16 nodes copes with kinks in fn
    x, wts = np.polynomial.legendre.leggauss(16)
    edges = np.linspace(0.0, 1.0, 65)
    half = 0.5 * np.diff(edges)
    w = (edges[:-1, None] + half[:, None] * (x + 1.0)).ravel()
    q = (half[:, None] * wts).ravel() * b * (1.0 - w) ** (b - 1)
    vals = np.asarray(fn(w), dtype=float)
    return np.tensordot(q, vals, axes=(0, 0))


def v_bs_slb(S, K, split: SlbSplit, config: ScenarioConfig) -> dict:
    return crb.crb_theta_slb_variants((S, K), 0.0, split, config)


def slb_illumination_sk(S, K, split: SlbSplit, config: ScenarioConfig):
    y, x = slb_scalars(split, config)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(K > 0, y * S / np.where(K > 0, K, 1.0) + x, 0.0)


def v_eav(d, strength: str, config: ScenarioConfig):
    if strength == "strong":
        return crb.crb_phi_strong_d(d, 0.0, config, strict=False)
    if strength == "weak":
        return crb.crb_phi_weak_d(d, 0.0, config, strict=False)
    raise ConfigError(f"unknown eavesdropper strength {strength!r}")


# --- CCDFs -------------------------------------------------------------------

def _normal_sk(config: ScenarioConfig, budget: QuadratureBudget):
    mean, cov = clt_moments(config.N)
    pts = mvn_points(mean, cov, budget)
    S = pts[:, 0] ** 2 + pts[:, 1] ** 2
    return physical_sk(S, pts[:, 2], config.N)


def ccdf_bs_ssjb_lower(eps, split: SsjbSplit, config: ScenarioConfig):
    eps = check_eps(eps)
    return angle_outage(crb.ssjb_lower_const(split, config), eps)


def ccdf_bs_ssjb_approx(eps, split: SsjbSplit, config: ScenarioConfig, budget: QuadratureBudget | None = None):
    eps = check_eps(eps)
    S, K = _normal_sk(config, budget or QuadratureBudget())
    return angle_outage(v_bs_ssjb_approx(S, K, split, config), eps).mean(axis=0)


def ccdf_bs_ssjb_exact(eps, split: SsjbSplit, config: ScenarioConfig):
    eps = check_eps(eps)
    return _beta_expectation(lambda w: angle_outage(v_bs_ssjb_exact(w, split, config), eps), config.N - 2)


def ccdf_bs_slb(eps, split: SlbSplit, config: ScenarioConfig, kind: str, budget: QuadratureBudget | None = None):
    if kind not in ("upper", "lower", "approx"):
        raise ConfigError(f"SLB outage kinds are upper, lower, approx; got {kind!r}")
    eps = check_eps(eps)
    S, K = _normal_sk(config, budget or QuadratureBudget())
    return angle_outage(v_bs_slb(S, K, split, config)[kind], eps).mean(axis=0)


def ccdf_eav(eps, scheme: str, strength: str, split, config: ScenarioConfig, budget: QuadratureBudget | None = None):
    eps = check_eps(eps)
    if scheme == "ssjb":
        d = crb.illumination("ssjb", split, config)
        return angle_outage(v_eav(d, strength, config), eps)
    if scheme == "slb":
        S, K = _normal_sk(config, budget or QuadratureBudget())
        d = slb_illumination_sk(S, K, split, config)
        return angle_outage(v_eav(d, strength, config), eps).mean(axis=0)
    raise ConfigError(f"unknown scheme {scheme!r}")


def available_kinds(scheme: str, target: str) -> tuple[str, ...]:
    if target == "bs":
        return ("exact", "lower", "approx") if scheme == "ssjb" else ("lower", "approx", "upper")
    return ("exact",) if scheme == "ssjb" else ("approx",)


def ccdf_curve(scheme: str, target: str, kind: str, eps, split, config: ScenarioConfig,
               budget: QuadratureBudget | None = None) -> CcdfCurve:
    if scheme not in SCHEMES:
        raise ConfigError(f"unknown scheme {scheme!r}")
    if target not in TARGETS:
        raise ConfigError(f"unknown target {target!r}")
    if kind not in available_kinds(scheme, target):
        raise ConfigError(f"kind {kind!r} is not available for {scheme}/{target}; "
                          f"choose from {', '.join(available_kinds(scheme, target))}")
    eps = check_eps(eps)
    if target == "bs":
        if scheme == "ssjb":
            if kind == "exact":
                p = ccdf_bs_ssjb_exact(eps, split, config)
            elif kind == "lower":
                p = ccdf_bs_ssjb_lower(eps, split, config)
            else:
                p = ccdf_bs_ssjb_approx(eps, split, config, budget)
        else:
            p = ccdf_bs_slb(eps, split, config, kind, budget)
    else:
        p = ccdf_eav(eps, scheme, target.split("_")[1], split, config, budget)
    return CcdfCurve(eps, np.asarray(p, dtype=float), kind, target, scheme)


# --- ergodic CRBs ------------------------------------------------------------

def sk_integral(fn, config: ScenarioConfig, budget: QuadratureBudget | None = None) -> float:
    """``I(fn)`` with ``S`` projected onto ``S <= N K`` before ``fn`` sees it."""
    N = config.N

    def m(S, K):
        S2, K2 = physical_sk(S, K, N)
        return fn(S2, K2)

    return truncated_gaussian_integral(m, N, budget or QuadratureBudget(rel_tol=1e-6)).value


def ergodic_crb(scheme: str, target: str, split, config: ScenarioConfig,
                budget: QuadratureBudget | None = None) -> dict:
    """Angle-truncated ergodic CRB, keyed by kind."""
    et = e_trunc_inv_cos2(config.delta)
    if target not in TARGETS:
        raise ConfigError(f"unknown target {target!r}")
    if scheme == "ssjb":
        if target == "bs":
            exact = float(_beta_expectation(lambda w: v_bs_ssjb_exact(w, split, config), config.N - 2))
            return {
                "lower": crb.ssjb_lower_const(split, config) * et,
                "approx": et * sk_integral(lambda S, K: v_bs_ssjb_approx(S, K, split, config), config, budget),
                "exact": et * exact,
            }
        d = crb.illumination("ssjb", split, config)
        return {"exact": float(v_eav(d, target.split("_")[1], config)) * et}
    if scheme == "slb":
        y, x = slb_scalars(split, config)
        if x <= 0 and (target != "bs" or split.tau4 <= 0):
            # without AN or radar along a the illumination is y*S/K, and
            # E[1/S] diverges because S has positive density at 0
            kinds = ("lower", "approx", "upper") if target == "bs" else ("approx",)
            return {k: math.inf for k in kinds}
        if target == "bs":
            return {
                k: et * sk_integral(lambda S, K, k=k: v_bs_slb(S, K, split, config)[k], config, budget)
                for k in ("lower", "approx", "upper")
            }
        strength = target.split("_")[1]
        return {"approx": et * sk_integral(
            lambda S, K: v_eav(slb_illumination_sk(S, K, split, config), strength, config), config, budget)}
    raise ConfigError(f"unknown scheme {scheme!r}")


# --- rates -------------------------------------------------------------------

def _log2_1p(x):
    return np.log1p(x) / math.log(2.0)


def rate_user(scheme: str, split, config: ScenarioConfig, budget: QuadratureBudget | None = None) -> dict:
    g1 = abs(config.c1) ** 2
    s2 = config.sigma2
    P, N = config.power, config.N
    if scheme == "ssjb":
        a = P * split.tau * g1 / s2
        jensen = float(_log2_1p(a * (split.alpha**2 + split.beta**2 * (N - 1))))
        # |h^H t1|^2 <= ||h||^2 ~ Gamma(N, 1)
        gamma = gamma_log_expectation(a, N, budget) / math.log(2.0)
        return {"upper_jensen": jensen, "upper_gamma": gamma}
    if scheme == "slb":
        t1, t3, t4 = split.tau1, split.tau3, split.tau4

        def m(K, S, radar2):
            return _log2_1p(P * g1 * t1 * K / (s2 + g1 * P * t3 * S / N + g1 * P * t4 * radar2))

        return {
            "lower": sk_integral(lambda S, K: m(K, S, K), config, budget),
            "approx": sk_integral(lambda S, K: m(K, S, 1.0), config, budget),
            "upper": sk_integral(lambda S, K: m(K, S, 0.0), config, budget),
        }
    raise ConfigError(f"unknown scheme {scheme!r}")


def ssjb_eav_integral(split: SsjbSplit, config: ScenarioConfig, convention: str = "exp1",
                      budget: QuadratureBudget | None = None) -> float:
    """``int_0^inf P(SINR_e > 2^t - 1) dt`` for the SSJB eavesdropper.

    ``exp1`` treats the data-beam gain ``|h_e^H t1|^2`` as Exp(mean 1), the
    CN(0, 1) projection; ``chi2`` uses the ``exp(-x/2)`` tail (mean 2).
    """
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown convention {convention!r}")
    N = config.N
    c2 = abs(config.c2) ** 2
    C1 = config.power * split.tau * c2 / config.sigma2
    C2 = c2 * config.power * (1 - split.tau) / (N - 2) / config.sigma2
    if C1 <= 0:
        return 0.0
    scale = 1.0 if convention == "exp1" else 2.0

    def f(t):
        T = math.expm1(t * math.log(2.0))
        return math.exp(-T / (scale * C1) - (N - 2) * math.log1p(T * C2 / C1))

    hi = 1.0
    while f(hi) >= 1e-12:
        hi *= 2.0
    return integrate_1d(f, 0.0, hi, budget or QuadratureBudget(rel_tol=1e-10)).value


def rate_eav(scheme: str, split, config: ScenarioConfig, convention: str = "exp1",
             budget: QuadratureBudget | None = None) -> dict:
    if scheme == "ssjb":
        return {"exact": ssjb_eav_integral(split, config, convention, budget)}
    if scheme == "slb":
        c2 = abs(config.c2) ** 2
        P = config.power
        return {"approx": float(_log2_1p(c2 * P * split.tau1 / (config.sigma2 + c2 * (P - P * split.tau1))))}
    raise ConfigError(f"unknown scheme {scheme!r}")


def rate_target(scheme: str, split, config: ScenarioConfig, budget: QuadratureBudget | None = None) -> dict:
    c5 = abs(config.c5) ** 2
    P, N, s2 = config.power, config.N, config.sigma2_t
    if scheme == "ssjb":
        return {"exact": float(_log2_1p(P * split.tau * c5 * split.alpha**2 * N / s2))}
    if scheme == "slb":
        def f(r):
            return _log2_1p(P * c5 * split.tau1 * r / (s2 + c5 * P * split.tau3 * N + P * c5 * split.tau2 / (N - 1) * (N - r)))

        def m(S, K):
            with np.errstate(divide="ignore", invalid="ignore"):
                return f(np.where(K > 0, S / np.where(K > 0, K, 1.0), 0.0))

        # |a^H h|^2 / (N ||h||^2) ~ Beta(1, N-1) exactly for isotropic h
        def beta_weighted(b):
            return float(f(N * b)) * (N - 1) * (1.0 - b) ** (N - 2)

        exact = integrate_1d(beta_weighted, 0.0, 1.0, budget or QuadratureBudget(rel_tol=1e-10)).value
        return {"exact": exact, "approx": sk_integral(m, config, budget)}
    raise ConfigError(f"unknown scheme {scheme!r}")


def esr_clamp(user: float, adversary: float) -> float:
    return max(0.0, user - adversary)


def esr(scheme: str, split, config: ScenarioConfig, adversary: str, budget: QuadratureBudget | None = None,
        convention: str = "exp1") -> float:
    user = rate_user(scheme, split, config, budget)[USER_RATE_KIND[scheme]]
    if adversary == "external":
        adv = next(iter(rate_eav(scheme, split, config, convention, budget).values()))
    elif adversary == "target":
        adv = next(iter(rate_target(scheme, split, config, budget).values()))
    else:
        raise ConfigError(f"unknown adversary {adversary!r}")
    return esr_clamp(user, adv)


def ergodic_report(scheme: str, split, config: ScenarioConfig, budget: QuadratureBudget | None = None,
                   convention: str = "exp1") -> ErgodicReport:
    rep = ErgodicReport(scheme)
    rep.e_crb_bs = ergodic_crb(scheme, "bs", split, config, budget)
    rep.e_crb_eav_strong = ergodic_crb(scheme, "eav_strong", split, config, budget)
    rep.e_crb_eav_weak = ergodic_crb(scheme, "eav_weak", split, config, budget)
    rep.r_user = rate_user(scheme, split, config, budget)
    rep.r_eav = rate_eav(scheme, split, config, convention, budget)
    rep.r_target = rate_target(scheme, split, config, budget)
    user = rep.r_user[USER_RATE_KIND[scheme]]
    rep.esr_external = esr_clamp(user, next(iter(rep.r_eav.values())))
    rep.esr_target = esr_clamp(user, next(iter(rep.r_target.values())))
    return rep
