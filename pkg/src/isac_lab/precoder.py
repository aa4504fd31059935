"""Transmit covariance construction for the two secure beamforming schemes.

Every function broadcasts over leading axes, so a stack of channels (shape
``(n, N)``) yields a stack of covariances (shape ``(n, N, N)``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateChannel, DegenerateSteering
from .scenario import ScenarioConfig, SteeringSet

PARALLEL_TOL = 1e-9
ENDFIRE_TOL = 1e-9


@dataclass(frozen=True)
class SsjbSplit:
    tau: float
    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.tau <= 1.0):
            raise ConfigError(f"tau must lie in [0, 1], got {self.tau}")
        if not (0.0 <= self.alpha <= 1.0):
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def beta(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.alpha**2))


@dataclass(frozen=True)
class SlbSplit:
    tau1: float
    tau2: float
    tau3: float

    def __post_init__(self):
        for name in ("tau1", "tau2", "tau3"):
            v = getattr(self, name)
            if not (v >= 0.0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be nonnegative, got {v}")
        if self.tau1 + self.tau2 + self.tau3 > 1.0 + 1e-12:
            raise ConfigError(
                f"infeasible SLB split: tau1+tau2+tau3 = {self.tau1 + self.tau2 + self.tau3:.6g} > 1"
            )

    @property
    def tau4(self) -> float:
        return max(0.0, 1.0 - self.tau1 - self.tau2 - self.tau3)


def slb_scalars(split: SlbSplit, config: ScenarioConfig) -> tuple[float, float]:
    """The two scalars ``(y, x)`` with ``a^H R_x a = y*|a^H h|^2/||h||^2 + x``."""
    P, N = config.power, config.N
    y = P * split.tau1 - P * split.tau2 / (N - 1)
    x = N * P * split.tau3 + N * P * split.tau2 / (N - 1)
    return y, x


@dataclass(frozen=True)
class SsjbBasis:
    a_tilde: np.ndarray  # (..., N)
    h_tilde: np.ndarray  # (..., N)
    G: np.ndarray  # (..., N, N-2)


def _outer(u, v=None):
    v = u if v is None else v
    return u[..., :, None] * v[..., None, :].conj()


def _norm(x):
    return np.sqrt(np.sum(np.abs(x) ** 2, axis=-1))


def ssjb_basis(h, a) -> SsjbBasis:
    """Orthonormal basis ``[a~, h~, G]`` of C^N built from target and user directions."""
    h = np.asarray(h, dtype=complex)
    a = np.asarray(a, dtype=complex)
    a_t = a / _norm(a)[..., None]
    proj = np.sum(a_t.conj() * h, axis=-1)
    h_perp = h - proj[..., None] * a_t
    nrm = _norm(h_perp)
    if np.any(nrm < PARALLEL_TOL * _norm(h)):
        raise DegenerateChannel("user channel is numerically parallel to a(theta)")
    h_t = h_perp / nrm[..., None]
    pair = np.stack([a_t, h_t], axis=-1)
    u, _, _ = np.linalg.svd(pair, full_matrices=True)
    return SsjbBasis(a_t, h_t, u[..., :, 2:])


def ssjb_beam(basis: SsjbBasis, split: SsjbSplit):
    return split.alpha * basis.a_tilde + split.beta * basis.h_tilde


def ssjb_covariance(basis: SsjbBasis, split: SsjbSplit, config: ScenarioConfig):
    P, N = config.power, config.N
    t1 = ssjb_beam(basis, split)
    gamma2 = (1.0 - split.tau) * P / (N - 2)
    return P * split.tau * _outer(t1) + gamma2 * (basis.G @ np.swapaxes(basis.G, -1, -2).conj())


def ssjb_parts(basis: SsjbBasis, split: SsjbSplit, config: ScenarioConfig):
    """(data covariance, artificial-noise covariance) of the SSJB signal."""
    P, N = config.power, config.N
    t1 = ssjb_beam(basis, split)
    gamma2 = (1.0 - split.tau) * P / (N - 2)
    return P * split.tau * _outer(t1), gamma2 * (basis.G @ np.swapaxes(basis.G, -1, -2).conj())


def slb_parts(h, steering: SteeringSet, split: SlbSplit, config: ScenarioConfig):
    """Per-stream covariances (data, AN, radar along a, radar along a')."""
    h = np.asarray(h, dtype=complex)
    P, N = config.power, config.N
    K = np.sum(np.abs(h) ** 2, axis=-1)
    if np.any(K <= 0):
        raise DegenerateChannel("zero user channel")
    a, ad = steering.a, steering.a_dot
    ad2 = np.sum(np.abs(ad) ** 2, axis=-1)
    if split.tau4 > 0 and np.any(ad2 < (ENDFIRE_TOL * N) ** 2):
        raise DegenerateSteering("a'(theta) vanishes at |theta| = pi/2")
    hh = _outer(h) / K[..., None, None]
    eye = np.eye(N)
    data = P * split.tau1 * hh
    an = P * split.tau2 / (N - 1) * (eye - hh)
    r1 = P * split.tau3 / N * _outer(a)
    r2 = P * split.tau4 * _outer(ad) / np.where(ad2 > 0, ad2, 1.0)[..., None, None]
    r1 = np.broadcast_to(r1, data.shape)
    r2 = np.broadcast_to(r2, data.shape)
    return data, an, r1, r2


def slb_covariance(h, steering: SteeringSet, split: SlbSplit, config: ScenarioConfig):
    data, an, r1, r2 = slb_parts(h, steering, split, config)
    return data + an + r1 + r2


def secure_sensing_subspace(steering: SteeringSet):
    """Orthonormal ``[a/||a||, a'/||a'||]`` spanning the optimal secure-sensing covariance."""
    a, ad = steering.a, steering.a_dot
    n = a.shape[-1]
    na, nd = _norm(a), _norm(ad)
    if np.any(nd < ENDFIRE_TOL * n):
        raise DegenerateSteering("a'(theta) vanishes at |theta| = pi/2")
    return np.stack([a / na[..., None], ad / nd[..., None]], axis=-1)


def project(rx, U):
    """``P_U R P_U`` for orthonormal ``U``."""
    Pu = U @ np.swapaxes(U, -1, -2).conj()
    return Pu @ rx @ Pu


def synthesize_waveform(rx, L: int, seed: int):
    """N x L waveform ``X`` whose sample covariance ``X X^H / L`` equals ``rx``.

    Rows of the unit-power base signal are exactly orthogonal, so the identity
    holds for every finite ``L >= N`` rather than only in expectation.
    """
    rx = np.asarray(rx, dtype=complex)
    n = rx.shape[-1]
    if L < n:
        raise ConfigError(f"frame length {L} must be at least N={n}")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((L, n)) + 1j * rng.standard_normal((L, n))
    q, _ = np.linalg.qr(z)
    s = math.sqrt(L) * q.conj().T
    w, v = np.linalg.eigh(0.5 * (rx + rx.conj().T))
    # rounding-level eigenvalues would otherwise add spurious rank through the square root
    w = np.where(w > 1e-12 * max(float(np.max(w)), 0.0), w, 0.0)
    root = (v * np.sqrt(w)) @ v.conj().T
    return root @ s


def check_covariance(rx, power: float, tol: float = 1e-8) -> None:
    """Raise AssertionError unless ``rx`` is Hermitian, PSD and has trace ``power``."""
    rx = np.asarray(rx)
    herm = np.max(np.abs(rx - np.swapaxes(rx, -1, -2).conj()))
    assert herm <= 1e-10 * max(1.0, power), f"not Hermitian ({herm:.3g})"
    w = np.linalg.eigvalsh(0.5 * (rx + np.swapaxes(rx, -1, -2).conj()))
    assert np.min(w) >= -1e-10 * max(1.0, power), f"not PSD (min eig {np.min(w):.3g})"
    tr = np.trace(rx, axis1=-2, axis2=-1).real
    assert np.all(np.abs(tr - power) <= tol * power), "trace differs from power"


def covariance_to_csv(rx, path: str | Path) -> None:
    """Write ``rx`` row-major, each cell as a ``re,im`` pair of columns."""
    rx = np.asarray(rx, dtype=complex)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in rx:
            cells = []
            for v in row:
                cells += [repr(float(v.real)), repr(float(v.imag))]
            w.writerow(cells)


def covariance_from_csv(path: str | Path):
    with open(path, newline="") as fh:
        rows = [list(map(float, r)) for r in csv.reader(fh) if r]
    arr = np.asarray(rows)
    return arr[:, 0::2] + 1j * arr[:, 1::2]
