import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs
from scipy import stats

from isac_lab.errors import ConfigError
from isac_lab.scenario import (
    BLOCK,
    ScenarioConfig,
    config_from_dict,
    deriv_norm2,
    load_config,
    rtk,
    sample_batch,
    sample_realization,
    steering,
    ula,
)

angles = hs.floats(-1.5, 1.5, allow_nan=False)


def test_same_seed_and_index_give_same_realization(cfg):
    a = sample_realization(cfg, 7, 0)
    b = sample_realization(cfg, 7, 0)
    assert np.array_equal(a.h, b.h) and np.array_equal(a.h_e, b.h_e)
    assert a.theta == b.theta and a.phi == b.phi


def test_batches_are_addressable_across_block_edges(cfg):
    whole = sample_batch(cfg, 3, 0, 3 * BLOCK)
    part = sample_batch(cfg, 3, BLOCK - 5, 10)
    assert np.array_equal(part.h, whole.h[BLOCK - 5:BLOCK + 5])
    assert np.array_equal(part.index, np.arange(BLOCK - 5, BLOCK + 5))
    assert len(sample_batch(cfg, 3, 10, 0)) == 0


def test_channel_power_and_angle_distribution(cfg):
    b = sample_batch(cfg, 11, 0, 100_000)
    assert abs(np.mean(np.abs(b.h) ** 2) - 1.0) < 0.01
    ks = stats.kstest(b.theta, stats.uniform(-math.pi / 2, math.pi).cdf).statistic
    assert ks < 0.01


def test_broadside_steering_is_all_ones():
    a, _ = ula(4, 0.0)
    assert np.allclose(a, np.ones(4), atol=1e-15)


def test_derivative_norm_at_broadside():
    assert deriv_norm2(15, 0.0) == pytest.approx(math.pi**2 * 15 * 224 / 12, abs=1e-9)
    assert deriv_norm2(15, 0.0) == pytest.approx(2763.4892323, abs=1e-6)


@given(angles, hs.integers(2, 40))
def test_steering_and_derivative_are_orthogonal(theta, n):
    a, ad = ula(n, theta)
    assert abs(np.vdot(a, ad)) < 1e-12 * max(1.0, n * n)
    assert np.sum(np.abs(ad) ** 2) == pytest.approx(deriv_norm2(n, theta), rel=1e-12, abs=1e-9)


@given(angles)
def test_derivative_matches_finite_difference(theta):
    h = 1e-6
    _, ad = ula(9, theta)
    fd = (ula(9, theta + h)[0] - ula(9, theta - h)[0]) / (2 * h)
    assert np.allclose(ad, fd, atol=1e-6)


def test_rtk_on_steering_vector_and_zero(cfg):
    a = steering(cfg, 0.3).a
    s = rtk(a, 0.3)
    assert (s.R, s.T, s.K) == pytest.approx((15, 0, 15), abs=1e-12)
    z = rtk(np.zeros(15), 0.3)
    assert (z.R, z.T, z.K, z.S, z.G) == (0, 0, 0, 0, 0)


@settings(max_examples=30)
@given(angles, hs.integers(0, 10_000))
def test_rtk_matches_inner_products(theta, seed):
    rng = np.random.default_rng(seed)
    h = rng.standard_normal(15) + 1j * rng.standard_normal(15)
    a, ad = ula(15, theta)
    s = rtk(h, theta)
    assert complex(s.R, s.T) == pytest.approx(np.vdot(a, h), abs=1e-10)
    assert s.K == pytest.approx(np.vdot(h, h).real)
    assert s.G == pytest.approx(abs(np.vdot(ad, h)) ** 2, rel=1e-10)


def test_rtk_moments(cfg):
    b = sample_batch(cfg, 5, 0, 100_000)
    s = rtk(b.h, b.theta)
    x = np.stack([s.R, s.T, s.K], axis=1)
    se = x.std(axis=0, ddof=1) / math.sqrt(len(x))
    assert np.all(np.abs(x.mean(axis=0) - [0, 0, 15]) <= 3 * se)
    c = np.cov(x, rowvar=False)
    assert np.allclose(np.diag(c), [7.5, 7.5, 15], rtol=0.05)


@pytest.mark.parametrize("bad", [
    {"n_tx": 3}, {"frame_len": 15}, {"power": 0.0}, {"delta": 2.0}, {"n_tx": 15.0}, {"sigma2_r": float("nan")},
])
def test_invalid_configs_are_rejected(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig(**bad)


def test_config_json_roundtrip_and_partial(tmp_path):
    cfg = ScenarioConfig(n_tx=8, c3=complex(0.002, 0.001))
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_config(p) == cfg
    p.write_text('{"power": 20}')
    assert load_config(p) == ScenarioConfig(power=20.0)
    assert load_config(None) == ScenarioConfig()


def test_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="unknown config keys"):
        config_from_dict({"antennas": 4})
    with pytest.raises(ConfigError, match="c3"):
        config_from_dict({"c3": "big"})
    p = tmp_path / "bad.json"
    p.write_text("{")
    with pytest.raises(ConfigError, match="line 1"):
        load_config(p)
