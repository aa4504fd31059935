"""Monte Carlo oracle.

Per-realization metrics are computed from first principles: the transmit
covariance is expressed as a sum of rank-one streams plus an artificial-noise
projector, quadratic forms ``u^H R_x v`` are evaluated from those streams, and
the CRB comes from the generic trace formula rather than from any closed form.

Sampling runs block by block (see :mod:`isac_lab.scenario`); blocks may be
spread over threads, and results are concatenated in index order before any
reduction, so outputs do not depend on the thread count.
"""

from __future__ import annotations

import contextlib
import contextvars
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from . import crb
from .errors import ConfigError
from .precoder import SlbSplit, SsjbSplit
from .scenario import BLOCK, ChannelRealization, RealizationBatch, ScenarioConfig, sample_batch, steering
from .stochastic import CcdfCurve, check_eps

RECEIVERS = ("user", "eav", "target")

_THREADS: contextvars.ContextVar[int | None] = contextvars.ContextVar("isac_lab_threads", default=None)


@contextlib.contextmanager
def thread_limit(threads: int | None):
    """Cap worker threads for Monte Carlo calls made inside the block."""
    token = _THREADS.set(None if threads is None else max(1, int(threads)))
    try:
        yield
    finally:
        _THREADS.reset(token)


def thread_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    if _THREADS.get() is not None:
        return _THREADS.get()
    env = os.environ.get("ISAC_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"ISAC_LAB_THREADS must be an integer, got {env!r}") from exc
    return min(8, os.cpu_count() or 1)


def truncate_angles(batch: RealizationBatch, delta: float) -> RealizationBatch:
    """Map uniform angles on (-pi/2, pi/2) to uniform on (-pi/2+delta, pi/2-delta)."""
    s = (math.pi - 2.0 * delta) / math.pi
    return RealizationBatch(batch.h, batch.h_e, batch.theta * s, batch.phi * s, batch.index)


def map_realizations(fn: Callable[[RealizationBatch], np.ndarray], config: ScenarioConfig, n: int, seed: int,
                     truncate: bool = False, threads: int | None = None) -> np.ndarray:
    """Evaluate a vectorized metric on realizations ``0..n-1`` of stream ``seed``."""
    if n < 1:
        raise ConfigError("sample count must be positive")
    starts = list(range(0, n, BLOCK))

    def run(start):
        batch = sample_batch(config, seed, start, min(BLOCK, n - start))
        if truncate:
            batch = truncate_angles(batch, config.delta)
        return np.asarray(fn(batch))

    workers = thread_count(threads)
    if workers == 1 or len(starts) == 1:
        parts = [run(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    return np.concatenate(parts)


# --- transmit structure as streams ---------------------------------------------

@dataclass
class Streams:
    """``R_x = sum_k p_k v_k v_k^H + an * (I - sum_j e_j e_j^H)``.

    ``vecs`` have shape ``(n, N)``; ``excl`` are orthonormal vectors removed
    from the artificial-noise subspace. Stream 0 carries the user data.
    """

    powers: list
    vecs: list
    an: float
    excl: list

    def bilinear(self, u, v, data_only: bool = False):
        out = 0.0
        terms = zip(self.powers[:1], self.vecs[:1]) if data_only else zip(self.powers, self.vecs)
        for p, w in terms:
            out = out + p * _dot(u, w) * _dot(w, v)
        if not data_only and self.an:
            proj = _dot(u, v)
            for e in self.excl:
                proj = proj - _dot(u, e) * _dot(e, v)
            out = out + self.an * proj
        return out

    def quad(self, u, data_only: bool = False):
        return np.real(self.bilinear(u, u, data_only))


def _dot(u, v):
    return np.sum(u.conj() * v, axis=-1)


def _unit(v):
    return v / np.sqrt(np.sum(np.abs(v) ** 2, axis=-1))[..., None]


def ssjb_streams(h, a, split: SsjbSplit, config: ScenarioConfig) -> Streams:
    a_t = _unit(a)
    h_perp = h - _dot(a_t, h)[..., None] * a_t
    h_t = _unit(h_perp)
    t1 = split.alpha * a_t + split.beta * h_t
    P, N = config.power, config.N
    return Streams([P * split.tau], [t1], (1.0 - split.tau) * P / (N - 2), [a_t, h_t])


def slb_streams(h, a, a_dot, split: SlbSplit, config: ScenarioConfig) -> Streams:
    P, N = config.power, config.N
    h_u = _unit(h)
    return Streams(
        [P * split.tau1, P * split.tau3, P * split.tau4],
        [h_u, _unit(a), _unit(a_dot)],
        P * split.tau2 / (N - 1),
        [h_u],
    )


def streams_for(batch, scheme: str, split, config: ScenarioConfig):
    st = steering(config, batch.theta, batch.phi)
    if scheme == "ssjb":
        return ssjb_streams(batch.h, st.a, split, config), st
    if scheme == "slb":
        return slb_streams(batch.h, st.a, st.a_dot, split, config), st
    raise ConfigError(f"unknown scheme {scheme!r}")


def _as_batch(r):
    if isinstance(r, ChannelRealization):
        return RealizationBatch(r.h[None], r.h_e[None], np.array([r.theta]), np.array([r.phi]), np.array([0])), True
    return r, False


def crb_bs(batch, scheme: str, split, config: ScenarioConfig):
    """CRB(theta) per realization from the generic trace form; ``inf`` if singular."""
    batch, single = _as_batch(batch)
    s, st = streams_for(batch, scheme, split, config)
    out = crb.crb_theta_forms(s.quad(st.a), s.quad(st.a_dot), s.bilinear(st.a, st.a_dot), batch.theta, config,
                              strict=False)
    return float(out[0]) if single else out


def crb_eav(batch, scheme: str, split, config: ScenarioConfig, strength: str):
    batch, single = _as_batch(batch)
    s, st = streams_for(batch, scheme, split, config)
    d = s.quad(st.a)
    if strength == "strong":
        out = crb.crb_phi_strong_d(d, batch.phi, config, strict=False)
    elif strength == "weak":
        out = crb.crb_phi_weak_d(d, batch.phi, config, strict=False)
    else:
        raise ConfigError(f"unknown eavesdropper strength {strength!r}")
    return float(out[0]) if single else out


def mc_sinr(realization, scheme: str, split, config: ScenarioConfig, receiver: str):
    """SINR at the user, the external eavesdropper or the target, per realization.

    Everything that is not the user-data stream is interference.
    """
    batch, single = _as_batch(realization)
    s, st = streams_for(batch, scheme, split, config)
    if receiver == "user":
        g, gain, noise = batch.h, config.c1, config.sigma2
    elif receiver == "eav":
        g, gain, noise = batch.h_e, config.c2, config.sigma2
    elif receiver == "target":
        g, gain, noise = st.a, config.c5, config.sigma2_t
    else:
        raise ConfigError(f"unknown receiver {receiver!r}")
    g2 = abs(gain) ** 2
    sig = g2 * s.quad(g, data_only=True)
    tot = g2 * s.quad(g)
    out = sig / (noise + np.maximum(tot - sig, 0.0))
    return float(out[0]) if single else out


def mc_rate(scheme: str, split, config: ScenarioConfig, receiver: str):
    """Vectorized metric ``log2(1 + SINR)`` suitable for :func:`mc_expectation`."""
    return lambda b: np.log2(1.0 + mc_sinr(b, scheme, split, config, receiver))


# --- estimators ------------------------------------------------------------------

@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    seed: int


def mc_expectation(metric, config: ScenarioConfig, n: int, seed: int, truncate: bool = False,
                   threads: int | None = None) -> McEstimate:
    vals = map_realizations(metric, config, n, seed, truncate, threads).astype(float)
    mean = float(np.mean(vals))
    if n > 1 and np.all(np.isfinite(vals)):
        se = float(np.std(vals, ddof=1) / math.sqrt(n))
    else:
        se = 0.0 if n == 1 else math.inf
    if np.ptp(vals) == 0:
        se = 0.0
    return McEstimate(mean, se, n, seed)


def mc_ccdf(metric, config: ScenarioConfig, eps_grid, n: int, seed: int, scheme: str = "ssjb",
            target: str = "bs", truncate: bool = False, threads: int | None = None) -> CcdfCurve:
    """Empirical ``P(metric > eps)``; infinite values exceed every threshold."""
    if n < 100:
        raise ConfigError(f"empirical outage needs n >= 100, got {n}")
    eps = check_eps(eps_grid)
    vals = map_realizations(metric, config, n, seed, truncate, threads).astype(float)
    return empirical_curve(vals, eps, scheme, target)


def empirical_curve(vals, eps, scheme: str = "ssjb", target: str = "bs") -> CcdfCurve:
    vals = np.asarray(vals, dtype=float)
    vals = np.where(np.isnan(vals), np.inf, vals)
    n = vals.size
    srt = np.sort(vals)
    p = 1.0 - np.searchsorted(srt, eps, side="right") / n
    se = np.sqrt(p * (1.0 - p) / n)
    return CcdfCurve(np.asarray(eps), p, "empirical", target, scheme, se, int(np.isinf(vals).sum()))


# --- comparison records -----------------------------------------------------------

@dataclass
class ValidationRecord:
    check: str
    scheme: str
    target: str
    relation: str
    analytic: Any
    empirical: Any
    stderr: Any
    tolerance: float
    passed: bool
    margin: float
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        doc = asdict(self)
        doc["pass"] = doc.pop("passed")
        extra = doc.pop("extra")
        doc.update(extra)
        return json.dumps(_clean(doc), sort_keys=True)


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_clean(v) for v in np.asarray(x).tolist()] if isinstance(x, np.ndarray) else [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return float(f"{x:.12g}")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


RELATIONS = ("lower_bound", "upper_bound", "bracket", "agree_abs", "agree_rel", "agree_se")


def compare(check: str, scheme: str, target: str, relation: str, analytic, empirical, stderr=0.0,
            tolerance: float = 0.0, k: float = 3.0, **extra) -> ValidationRecord:
    """Score an analytic value or curve against an empirical one.

    Relations:
      ``lower_bound``  analytic <= empirical + k*se + tolerance
      ``upper_bound``  analytic >= empirical - k*se - tolerance
      ``bracket``      analytic=(lo, hi) with lo <= emp + k*se and hi >= emp - k*se
      ``agree_abs``    |analytic - empirical| <= tolerance
      ``agree_rel``    |analytic - empirical| <= tolerance * |empirical|
      ``agree_se``     |analytic - empirical| <= k*se + tolerance
    ``margin`` is the worst signed slack; negative means failure.
    """
    if relation not in RELATIONS:
        raise ConfigError(f"unknown relation {relation!r}")
    emp = np.asarray(empirical, dtype=float)
    se = np.broadcast_to(np.asarray(stderr, dtype=float), emp.shape)
    if relation == "bracket":
        lo, hi = (np.asarray(v, dtype=float) for v in analytic)
        slack = np.minimum(emp + k * se + tolerance - lo, hi - (emp - k * se - tolerance))
    else:
        an = np.asarray(analytic, dtype=float)
        if relation == "lower_bound":
            slack = emp + k * se + tolerance - an
        elif relation == "upper_bound":
            slack = an - (emp - k * se - tolerance)
        elif relation == "agree_abs":
            slack = tolerance - np.abs(an - emp)
        elif relation == "agree_rel":
            slack = tolerance * np.abs(emp) - np.abs(an - emp)
        else:
            slack = k * se + tolerance - np.abs(an - emp)
    slack = np.atleast_1d(slack)
    i = int(np.argmin(slack))
    margin = float(slack[i])

    def pick(v):
        v = np.asarray(v, dtype=float)
        return float(np.atleast_1d(v)[i]) if v.size > 1 else float(v)

    if relation == "bracket":
        an_out = [pick(analytic[0]), pick(analytic[1])]
    else:
        an_out = pick(analytic)
    if emp.size > 1:
        extra.setdefault("points", int(emp.size))
        extra.setdefault("worst_index", i)
    return ValidationRecord(check, scheme, target, relation, an_out, pick(emp), pick(se), tolerance,
                            bool(margin >= 0), margin, extra)


def arbitrate_convention(split: SsjbSplit, config: ScenarioConfig, n: int, seed: int, tol: float = 0.02,
                         threads: int | None = None) -> ValidationRecord:
    """Decide which tail convention of the SSJB eavesdropper integral matches simulation.

    Both variants of the integral are compared with the Monte Carlo rate at
    relative tolerance ``tol``; the record passes when exactly one agrees.
    """
    from .stochastic import CONVENTIONS, ssjb_eav_integral

    mc = mc_expectation(mc_rate("ssjb", split, config, "eav"), config, n, seed, threads=threads)
    values = {c: ssjb_eav_integral(split, config, c) for c in CONVENTIONS}
    matching = [c for c, v in values.items() if abs(v - mc.mean) <= tol * abs(mc.mean)]
    selected = matching[0] if len(matching) == 1 else None
    gain = map_realizations(lambda b: _data_gain_eav(b, split, config), config, n, seed, threads=threads)
    best = min(values, key=lambda c: abs(values[c] - mc.mean))
    rec = compare("eav_convention_arbitration", "ssjb", "eav", "agree_rel", values[best], mc.mean, mc.stderr, tol,
                  selected=selected, exp1=values["exp1"], chi2=values["chi2"],
                  eav_gain_mean=float(np.mean(gain)))
    rec.passed = selected is not None
    return rec


def _data_gain_eav(batch, split, config):
    s, _ = streams_for(batch, "ssjb", split, config)
    return np.abs(_dot(batch.h_e, s.vecs[0])) ** 2
