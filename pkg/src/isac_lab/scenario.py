"""Scenario configuration, channel sampling and steering vectors.

All random draws are addressed by ``(seed, index)``: realization ``i`` lives in
block ``i // BLOCK`` whose generator is derived from ``SeedSequence(seed,
spawn_key=(block,))``. Any subset of realizations can therefore be produced in
any order, by any number of workers, with identical results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ConfigError

BLOCK = 1024

_GAIN_KEYS = ("c1", "c2", "c3", "c4", "c5")


@dataclass(frozen=True)
class ScenarioConfig:
    n_tx: int = 15
    m_rx: int = 17
    ne: int = 15
    power: float = 10.0
    frame_len: int = 30
    sigma2: float = 1.0
    sigma2_r: float = 1.0
    c1: complex = complex(math.sqrt(0.001))
    c2: complex = complex(math.sqrt(0.001))
    c3: complex = 0.001 + 0j
    c4: complex = 0.001 + 0j
    c5: complex = complex(math.sqrt(0.001))
    delta: float = 0.1
    seed: int = 0

    def __post_init__(self):
        for name in _GAIN_KEYS:
            object.__setattr__(self, name, complex(getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        problems = []
        for name in ("n_tx", "m_rx", "ne", "frame_len", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                problems.append(f"{name} must be an integer, got {v!r}")
        if problems:
            raise ConfigError("; ".join(problems))
        if self.n_tx < 4:
            problems.append(f"n_tx must be >= 4, got {self.n_tx}")
        if self.m_rx < 2:
            problems.append(f"m_rx must be >= 2, got {self.m_rx}")
        if self.ne < 2:
            problems.append(f"ne must be >= 2, got {self.ne}")
        if self.frame_len <= self.n_tx:
            problems.append(f"frame_len must exceed n_tx ({self.n_tx}), got {self.frame_len}")
        for name in ("power", "sigma2", "sigma2_r"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                problems.append(f"{name} must be positive and finite, got {v!r}")
        if not (0.0 < self.delta < math.pi / 2):
            problems.append(f"delta must lie in (0, pi/2), got {self.delta!r}")
        for name in _GAIN_KEYS:
            v = getattr(self, name)
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                problems.append(f"{name} must be finite, got {v!r}")
        if self.seed < 0:
            problems.append(f"seed must be nonnegative, got {self.seed}")
        if problems:
            raise ConfigError("; ".join(problems))

    # short aliases used throughout the formulas
    @property
    def N(self) -> int:
        return self.n_tx

    @property
    def M(self) -> int:
        return self.m_rx

    @property
    def Ne(self) -> int:
        return self.ne

    @property
    def L(self) -> int:
        return self.frame_len

    @property
    def sigma2_t(self) -> float:
        # target receiver noise is not listed separately; it shares sigma2
        return self.sigma2

    def replace(self, **changes) -> "ScenarioConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return ScenarioConfig(**values)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = [v.real, v.imag] if isinstance(v, complex) else v
        return out


_JSON_KEYS = {f.name for f in fields(ScenarioConfig)}


def _parse_gain(name: str, value: Any) -> complex:
    if isinstance(value, (list, tuple)) and len(value) == 2:
        re, im = value
        if all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in (re, im)):
            return complex(float(re), float(im))
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(float(value))
    raise ConfigError(f"{name} must be a [re, im] pair, got {value!r}")


def config_from_dict(doc: dict[str, Any]) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = sorted(set(doc) - _JSON_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs: dict[str, Any] = {}
    for key, value in doc.items():
        if key in _GAIN_KEYS:
            kwargs[key] = _parse_gain(key, value)
        else:
            kwargs[key] = value
    return ScenarioConfig(**kwargs)


def load_config(path: str | Path | None) -> ScenarioConfig:
    """Read a JSON config; missing keys take the default scenario values."""
    if path is None:
        return ScenarioConfig()
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(doc)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class ChannelRealization:
    h: np.ndarray
    h_e: np.ndarray
    theta: float
    phi: float


@dataclass(frozen=True)
class RealizationBatch:
    """Stacked realizations; ``index`` holds the global sample indices."""

    h: np.ndarray  # (n, N)
    h_e: np.ndarray  # (n, N)
    theta: np.ndarray  # (n,)
    phi: np.ndarray  # (n,)
    index: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.theta.shape[0]

    def __getitem__(self, i: int) -> ChannelRealization:
        return ChannelRealization(self.h[i].copy(), self.h_e[i].copy(), float(self.theta[i]), float(self.phi[i]))


def _block(config: ScenarioConfig, seed: int, block: int) -> RealizationBatch:
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(block),)))
    n = config.N
    g = rng.standard_normal((BLOCK, 2, 2, n)) / math.sqrt(2.0)
    h = g[:, 0, 0] + 1j * g[:, 0, 1]
    h_e = g[:, 1, 0] + 1j * g[:, 1, 1]
    angles = rng.uniform(-math.pi / 2, math.pi / 2, size=(BLOCK, 2))
    idx = np.arange(block * BLOCK, (block + 1) * BLOCK, dtype=np.int64)
    return RealizationBatch(h, h_e, angles[:, 0].copy(), angles[:, 1].copy(), idx)


def sample_batch(config: ScenarioConfig, seed: int, start: int, count: int) -> RealizationBatch:
    """Realizations ``start .. start+count-1`` of stream ``seed``."""
    if start < 0 or count < 0:
        raise ValueError("start and count must be nonnegative")
    stop = start + count
    parts = []
    for b in range(start // BLOCK, (stop - 1) // BLOCK + 1 if count else start // BLOCK):
        blk = _block(config, seed, b)
        lo = max(start, b * BLOCK) - b * BLOCK
        hi = min(stop, (b + 1) * BLOCK) - b * BLOCK
        parts.append((blk.h[lo:hi], blk.h_e[lo:hi], blk.theta[lo:hi], blk.phi[lo:hi], blk.index[lo:hi]))
    if not parts:
        n = config.N
        return RealizationBatch(np.empty((0, n), complex), np.empty((0, n), complex), np.empty(0), np.empty(0))
    cols = list(zip(*parts))
    return RealizationBatch(*(np.concatenate(c) for c in cols))


def sample_realization(config: ScenarioConfig, seed: int, index: int) -> ChannelRealization:
    return sample_batch(config, seed, index, 1)[0]


@dataclass(frozen=True)
class SteeringSet:
    a: np.ndarray
    a_dot: np.ndarray
    b: np.ndarray
    b_dot: np.ndarray
    c: np.ndarray
    c_dot: np.ndarray


def ula(n: int, angle) -> tuple[np.ndarray, np.ndarray]:
    """Centered half-wavelength ULA response and its angle derivative.

    Element ``i`` (1-based) is ``exp(-1j*f_i)`` with
    ``f_i = pi*sin(angle)*(n-(2i-1))/2``. Broadcasts over ``angle``.
    """
    angle = np.asarray(angle, dtype=float)
    k = (n - (2 * np.arange(1, n + 1) - 1)) / 2.0
    f = np.pi * np.sin(angle)[..., None] * k
    fp = np.pi * np.cos(angle)[..., None] * k
    v = np.exp(-1j * f)
    return v, -1j * fp * v


def steering(config: ScenarioConfig, theta, phi=0.0) -> SteeringSet:
    a, a_dot = ula(config.N, theta)
    b, b_dot = ula(config.M, theta)
    c, c_dot = ula(config.Ne, phi)
    return SteeringSet(a, a_dot, b, b_dot, c, c_dot)


def deriv_norm2(n: int, angle):
    """Closed-form squared norm of the ULA derivative."""
    return np.pi**2 * np.cos(angle) ** 2 * n * (n * n - 1) / 12.0


@dataclass(frozen=True)
class RtkStats:
    """Projections of the user channel onto the target steering geometry.

    ``R + 1j*T == a(theta)^H h``; ``K == ||h||^2``;
    ``g_re + 1j*g_im == 1j * h^H a'(theta)`` so that
    ``g_re**2 + g_im**2 == |a'^H h|^2``.
    """

    R: Any
    T: Any
    K: Any
    g_re: Any
    g_im: Any

    @property
    def S(self):
        return self.R**2 + self.T**2

    @property
    def G(self):
        return self.g_re**2 + self.g_im**2


def rtk(h, theta) -> RtkStats:
    h = np.asarray(h, dtype=complex)
    n = h.shape[-1]
    k = (n - (2 * np.arange(1, n + 1) - 1)) / 2.0
    theta = np.asarray(theta, dtype=float)
    f = np.pi * np.sin(theta)[..., None] * k
    fp = np.pi * np.cos(theta)[..., None] * k
    z = np.exp(1j * f) * h
    r, t = z.real, z.imag
    R = r.sum(-1)
    T = t.sum(-1)
    K = (np.abs(h) ** 2).sum(-1)
    g_re = (fp * r).sum(-1)
    g_im = (-fp * t).sum(-1)
    return RtkStats(R, T, K, g_re, g_im)
