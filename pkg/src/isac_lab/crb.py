"""Fisher information and Cramer-Rao bounds for the target angle.

Two families live here: a generic engine that works from a covariance matrix
(or from its three quadratic forms) and the closed forms written in terms of
the scalar channel statistics. Closed forms take ``strict``; with
``strict=True`` a degenerate scalar input raises, otherwise the value is
``inf`` so that array callers can count the event as an exceedance.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import ConfigError, DegenerateChannel, DegenerateSteering, SingularFim, ZeroIllumination
from .precoder import SlbSplit, SsjbSplit, slb_scalars
from .scenario import RtkStats, ScenarioConfig, deriv_norm2, steering

SINGULAR_TOL = 1e-14
ENDFIRE_TOL = 1e-9


def q_factor(config: ScenarioConfig) -> float:
    return config.sigma2_r / (2.0 * abs(config.c3) ** 2 * config.L)


def _herm(x):
    return np.swapaxes(x, -1, -2).conj()


def _qf(u, rx, v):
    """``u^H rx v`` over leading axes."""
    return np.einsum("...i,...ij,...j->...", u.conj(), rx, v)


def fim_bs(rx, theta, config: ScenarioConfig) -> np.ndarray:
    """3x3 FIM over (theta, Re c3, Im c3) for the monostatic echo ``c3 b a^H X``."""
    st = steering(config, theta)
    a, ad, b, bd = st.a, st.a_dot, st.b, st.b_dot
    A = b[:, None] * a.conj()[None, :]
    Ad = bd[:, None] * a.conj()[None, :] + b[:, None] * ad.conj()[None, :]
    rx = np.asarray(rx, dtype=complex)
    s = 2.0 * config.L / config.sigma2_r
    c3 = config.c3
    f_tt = s * abs(c3) ** 2 * np.trace(Ad @ rx @ _herm(Ad)).real
    w = np.conj(c3) * np.trace(A @ rx @ _herm(Ad))
    f_ta = s * np.array([w.real, (1j * w).real])
    f_aa = s * np.trace(A @ rx @ _herm(A)).real
    F = np.empty((3, 3))
    F[0, 0] = f_tt
    F[0, 1:] = F[1:, 0] = f_ta
    F[1:, 1:] = f_aa * np.eye(2)
    return F


def schur_angle(F: np.ndarray) -> float:
    """Angle information left after eliminating the two nuisance gain components."""
    f_aa = F[1:, 1:]
    if np.linalg.cond(f_aa) > 1e12:
        # rank-deficient gain block: project onto its range
        return float(F[0, 0] - F[0, 1:] @ np.linalg.pinv(f_aa) @ F[1:, 0])
    return float(F[0, 0] - F[0, 1:] @ np.linalg.solve(f_aa, F[1:, 0]))


def crb_theta_generic(rx, theta, config: ScenarioConfig) -> float:
    """CRB(theta) as the inverse Schur complement of :func:`fim_bs`."""
    F = fim_bs(rx, theta, config)
    if F[1, 1] <= SINGULAR_TOL:
        raise SingularFim("no transmit energy toward a(theta); gain block of the FIM is zero")
    info = schur_angle(F)
    if info <= SINGULAR_TOL * max(1.0, abs(F[0, 0])):
        raise SingularFim(f"angle information vanishes (Schur complement {info:.3g})")
    return 1.0 / info


def quad_forms(rx, a, a_dot):
    """``(a^H R a, a'^H R a', a^H R a')``."""
    rx = np.asarray(rx, dtype=complex)
    return _qf(a, rx, a).real, _qf(a_dot, rx, a_dot).real, _qf(a, rx, a_dot)


def crb_theta_forms(ara, drd, ard, theta, config: ScenarioConfig, strict: bool = True):
    """Trace-form CRB from the three quadratic forms; vectorized."""
    ara = np.asarray(ara, dtype=float)
    bd2 = deriv_norm2(config.M, theta)
    M = config.M
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = bd2 * ara + M * drd - M * np.abs(ard) ** 2 / ara
    bad = ~(ara > SINGULAR_TOL) | ~(denom > SINGULAR_TOL)
    if strict and np.any(bad):
        raise SingularFim("CRB denominator is not positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, np.inf, q_factor(config) / np.where(bad, 1.0, denom))
    return out if out.ndim else float(out)


def crb_theta_trace(rx, theta, config: ScenarioConfig, strict: bool = True):
    st = steering(config, theta)
    return crb_theta_forms(*quad_forms(rx, st.a, st.a_dot), theta, config, strict=strict)


def _check_cos(angle, strict):
    c = np.cos(np.asarray(angle, dtype=float))
    bad = np.abs(c) < ENDFIRE_TOL
    if strict and np.any(bad):
        raise DegenerateSteering("angle is at end-fire, derivative steering vector vanishes")
    return bad


def crb_theta_ssjb(stats: RtkStats, theta, split: SsjbSplit, config: ScenarioConfig, strict: bool = True):
    """Closed-form SSJB CRB(theta) from the channel statistics."""
    N, M, P = config.N, config.M, config.power
    g1 = P * split.tau
    g2 = (1.0 - split.tau) * P / (N - 2)
    perp = np.asarray(stats.K - stats.S / N, dtype=float)
    deg = perp <= 1e-12
    if strict and np.any(deg):
        raise DegenerateChannel("user channel is parallel to a(theta)")
    end = _check_cos(theta, strict)
    ad2 = deriv_norm2(N, theta)
    bd2 = deriv_norm2(M, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = g1 * bd2 * N * split.alpha**2 + g2 * M * (ad2 - stats.G / np.where(deg, 1.0, perp))
    bad = deg | end | ~(denom > SINGULAR_TOL)
    if strict and np.any(bad):
        raise SingularFim("SSJB CRB denominator is not positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, np.inf, q_factor(config) / np.where(bad, 1.0, denom))
    return out if np.ndim(out) else float(out)


def lcrb_ssjb(theta, split: SsjbSplit, config: ScenarioConfig):
    """Per-angle lower bound on SSJB CRB(theta) (the channel-dependent term dropped)."""
    return ssjb_lower_const(split, config) / np.cos(theta) ** 2


def ssjb_lower_const(split: SsjbSplit, config: ScenarioConfig) -> float:
    N, M = config.N, config.M
    den = (
        M * N * math.pi**2 * config.L * config.power * abs(config.c3) ** 2
        * (split.alpha**2 * split.tau * (M * M - 1) + (N * N - 1) * (1 - split.tau) / (N - 2))
    )
    return math.inf if den <= 0 else 6.0 * config.sigma2_r / den


def _slb_base(stats: RtkStats, theta, split: SlbSplit, config: ScenarioConfig):
    N, M, P = config.N, config.M, config.power
    y, x = slb_scalars(split, config)
    K = np.asarray(stats.K, dtype=float)
    S = stats.S
    ad2 = deriv_norm2(N, theta)
    bd2 = deriv_norm2(M, theta)
    illum = y * S + x * K  # K * a^H R a
    base = bd2 * illum + M * (ad2 * P * split.tau2 * K / (N - 1) + P * K * split.tau4 * ad2)
    return y, x, K, S, ad2, illum, base


def _finish(num, denom, strict, extra_bad=None):
    bad = ~(denom > SINGULAR_TOL)
    if extra_bad is not None:
        bad = bad | extra_bad
    if strict and np.any(bad):
        raise SingularFim("SLB CRB denominator is not positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, np.inf, num / np.where(bad, 1.0, denom))
    return out if np.ndim(out) else float(out)


def crb_theta_slb(stats: RtkStats, theta, split: SlbSplit, config: ScenarioConfig, strict: bool = True):
    """Closed-form SLB CRB(theta)."""
    y, x, K, S, ad2, illum, base = _slb_base(stats, theta, split, config)
    deg = K <= 0
    if strict and np.any(deg):
        raise DegenerateChannel("zero user channel")
    end = _check_cos(theta, strict)
    with np.errstate(divide="ignore", invalid="ignore"):
        g_term = config.M * x * y * K * stats.G / illum
    return _finish(q_factor(config) * K, base + g_term, strict, deg | end | ~(illum > SINGULAR_TOL))


def crb_theta_slb_variants(stats_or_sk, theta, split: SlbSplit, config: ScenarioConfig):
    """Per-realization SLB bound candidates: ``{"upper", "lower", "approx"}``.

    The channel-dependent ``|a'^H h|^2`` term is dropped in one candidate and
    replaced by its Cauchy-Schwarz cap ``K ||a'||^2`` in the other. Their
    order depends on the sign of ``y``, so the labels come from an elementwise
    max/min. ``approx`` replaces the term by its mean ``||a'||^2``.
    Accepts either an :class:`RtkStats` or an ``(S, K)`` pair.
    """
    if isinstance(stats_or_sk, RtkStats):
        S, K = stats_or_sk.S, stats_or_sk.K
    else:
        S, K = stats_or_sk
    N, M, P = config.N, config.M, config.power
    y, x = slb_scalars(split, config)
    K = np.asarray(K, dtype=float)
    S = np.asarray(S, dtype=float)
    ad2 = deriv_norm2(N, theta)
    bd2 = deriv_norm2(M, theta)
    illum = y * S + x * K
    base = bd2 * illum + M * ad2 * K * (P * split.tau2 / (N - 1) + P * split.tau4)
    with np.errstate(divide="ignore", invalid="ignore"):
        unit = M * x * y * K * ad2 / illum
    num = q_factor(config) * K
    bad = ~(illum > SINGULAR_TOL)
    drop = _finish(num, base, False, bad)
    cap = _finish(num, base + unit * K, False, bad)
    approx = _finish(num, base + unit, False, bad)
    return {"upper": np.maximum(drop, cap), "lower": np.minimum(drop, cap), "approx": approx}


def illumination(scheme: str, split, config: ScenarioConfig, stats: RtkStats | None = None):
    """``a^H R_x a``: the transmit power that reaches the target direction."""
    if scheme == "ssjb":
        return config.power * split.tau * split.alpha**2 * config.N
    if scheme == "slb":
        if stats is None:
            raise ConfigError("SLB illumination needs channel statistics")
        y, x = slb_scalars(split, config)
        K = np.asarray(stats.K, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(K > 0, y * stats.S / np.where(K > 0, K, 1.0) + x, x)
    raise ConfigError(f"unknown scheme {scheme!r}")


def crb_phi_strong_d(d, phi, config: ScenarioConfig, strict: bool = True):
    """Strong-eavesdropper CRB(phi) for illumination ``d = a^H R_x a``."""
    d = np.asarray(d, dtype=float)
    end = _check_cos(phi, strict)
    zero = ~(d > SINGULAR_TOL)
    if strict and np.any(zero):
        raise ZeroIllumination("no transmit power toward the target")
    cd2 = deriv_norm2(config.Ne, phi)
    den = 2.0 * abs(config.c4) ** 2 * config.L * cd2 * d
    bad = zero | end | ~(den > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, np.inf, config.sigma2_r / np.where(bad, 1.0, den))
    return out if np.ndim(out) else float(out)


def crb_phi_weak_d(d, phi, config: ScenarioConfig, strict: bool = True, frame_len: int | None = None):
    """Weak-eavesdropper CRB(phi): the waveform is unknown, only its covariance helps.

    ``frame_len`` overrides ``config.L`` (the direct FIM check runs at tiny L).
    """
    d = np.asarray(d, dtype=float)
    end = _check_cos(phi, strict)
    zero = ~(d > SINGULAR_TOL)
    if strict and np.any(zero):
        raise ZeroIllumination("no transmit power toward the target")
    s2, Ne = config.sigma2_r, config.Ne
    L = config.L if frame_len is None else frame_len
    g2 = abs(config.c4) ** 2
    num = 6.0 * s2 * (s2 + g2 * L * d * Ne)
    den = g2**2 * L**3 * d**2 * math.pi**2 * np.cos(phi) ** 2 * Ne**2 * (Ne**2 - 1)
    bad = zero | end | ~(den > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(bad, np.inf, num / np.where(bad, 1.0, den))
    return out if np.ndim(out) else float(out)


def crb_phi_strong(scheme: str, split, phi, config: ScenarioConfig, stats: RtkStats | None = None, strict=True):
    return crb_phi_strong_d(illumination(scheme, split, config, stats), phi, config, strict)


def crb_phi_weak(scheme: str, split, phi, config: ScenarioConfig, stats: RtkStats | None = None, strict=True):
    return crb_phi_weak_d(illumination(scheme, split, config, stats), phi, config, strict)


def fim_phi_generic(rx, a, phi, config: ScenarioConfig) -> np.ndarray:
    """3x3 FIM over (phi, Re c4, Im c4) for the eavesdropper echo ``c4 c a^H X``."""
    from .scenario import ula

    c, cd = ula(config.Ne, phi)
    B = c[:, None] * a.conj()[None, :]
    Bd = cd[:, None] * a.conj()[None, :]
    rx = np.asarray(rx, dtype=complex)
    s = 2.0 * config.L / config.sigma2_r
    c4 = config.c4
    w = np.conj(c4) * np.trace(B @ rx @ _herm(Bd))
    F = np.empty((3, 3))
    F[0, 0] = s * abs(c4) ** 2 * np.trace(Bd @ rx @ _herm(Bd)).real
    F[0, 1:] = F[1:, 0] = s * np.array([w.real, (1j * w).real])
    F[1:, 1:] = s * np.trace(B @ rx @ _herm(B)).real * np.eye(2)
    return F


def crb_phi_generic(rx, a, phi, config: ScenarioConfig) -> float:
    F = fim_phi_generic(rx, a, phi, config)
    if F[1, 1] <= SINGULAR_TOL:
        raise ZeroIllumination("no transmit power toward the target")
    info = schur_angle(F)
    if info <= SINGULAR_TOL:
        raise SingularFim("angle information vanishes")
    return 1.0 / info


def weak_covariance(d: float, phi: float, config: ScenarioConfig, small_L: int):
    """Received-sample covariance of the weak eavesdropper and its derivatives."""
    from .scenario import ula

    Ne = config.Ne
    c, cd = ula(Ne, phi)
    g2 = abs(config.c4) ** 2
    lam = g2 * small_L
    eye_l = np.eye(small_L)
    cc = np.outer(c, c.conj())
    dcc = np.outer(cd, c.conj()) + np.outer(c, cd.conj())
    C = lam * d * np.kron(eye_l, cc) + config.sigma2_r * np.eye(Ne * small_L)
    dphi = lam * d * np.kron(eye_l, dcc)
    # C depends on c4 only through |c4|^2
    re, im = config.c4.real, config.c4.imag
    base = small_L * d * np.kron(eye_l, cc)
    return C, [dphi, 2 * re * base, 2 * im * base]


def fim_weak_direct(d: float, phi: float, config: ScenarioConfig, small_L: int) -> np.ndarray:
    """Brute-force FIM ``Tr(C^-1 dC_i C^-1 dC_j)`` of the zero-mean Gaussian model.

    The frame length used inside the covariance is ``small_L`` so that the
    ``(Ne*L) x (Ne*L)`` matrices stay small.
    """
    n = config.Ne * small_L
    if n > 64:
        raise ConfigError(f"Ne*L = {n} exceeds 64; use a smaller frame for the direct FIM")
    C, dC = weak_covariance(d, phi, config, small_L)
    if np.linalg.cond(C) > 1e12:
        raise SingularFim("eavesdropper covariance is ill-conditioned")
    Ci = np.linalg.inv(C)
    terms = [Ci @ D for D in dC]
    F = np.empty((3, 3))
    for i in range(3):
        for j in range(i, 3):
            F[i, j] = F[j, i] = np.trace(terms[i] @ terms[j]).real
    return F


def woodbury_inverse(d: float, phi: float, config: ScenarioConfig, small_L: int):
    """Closed-form inverse of the weak-eavesdropper covariance."""
    from .scenario import ula

    c, _ = ula(config.Ne, phi)
    s2 = config.sigma2_r
    lam = abs(config.c4) ** 2 * small_L * d
    k = lam / (s2 * (s2 + lam * config.Ne))
    blk = np.eye(config.Ne) / s2 - k * np.outer(c, c.conj())
    return np.kron(np.eye(small_L), blk)
