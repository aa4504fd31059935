"""Full analytic-versus-simulation report.

Each check yields one :class:`~isac_lab.oracle.ValidationRecord`. Records
with ``gate=False`` are informational: they are reported but do not affect
the overall verdict.
"""

from __future__ import annotations

import math

import numpy as np

from . import crb, oracle, stochastic as st
from .precoder import SlbSplit, SsjbSplit, slb_covariance, ssjb_basis, ssjb_covariance
from .quadrature import QuadratureBudget
from .scenario import ScenarioConfig, rtk, sample_batch, steering

CORRUPT_C3 = 0.5


def eps_grid(lo: float, hi: float, steps: int = 20) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), steps)


def random_splits(seed: int, count: int = 3):
    """Feasible SLB splits drawn uniformly from the simplex (fixed seed)."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x51,)))
    return [SlbSplit(*map(float, rng.dirichlet(np.ones(4))[:3])) for _ in range(count)]


def check_closed_forms(config, acfg, n, seed):
    b = sample_batch(config, seed, 0, n)
    stats = rtk(b.h, b.theta)
    out = []
    for scheme, split in (("ssjb", st.DEFAULT_SSJB), ("slb", st.DEFAULT_SLB)):
        generic = np.empty(n)
        for i in range(n):
            a = steering(config, b.theta[i])
            if scheme == "ssjb":
                rx = ssjb_covariance(ssjb_basis(b.h[i], a.a), split, config)
            else:
                rx = slb_covariance(b.h[i], a, split, config)
            generic[i] = crb.crb_theta_generic(rx, b.theta[i], config)
        fn = crb.crb_theta_ssjb if scheme == "ssjb" else crb.crb_theta_slb
        closed = fn(stats, b.theta, split, acfg, strict=False)
        rel = np.abs(closed / generic - 1.0)
        out.append(oracle.compare("crb_closed_form_vs_generic", scheme, "bs", "agree_abs", float(np.max(rel)), 0.0,
                                  0.0, 1e-8, realizations=n))
    return out


def check_weak_fim(config, acfg, count, seed):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x77,)))
    small = config.replace(ne=3)
    asmall = acfg.replace(ne=3)
    worst_rel, worst_cross = 0.0, 0.0
    for _ in range(count):
        d = float(rng.uniform(0.1, 200.0))
        phi = float(rng.uniform(-1.4, 1.4))
        F = crb.fim_weak_direct(d, phi, small, 4)
        closed = crb.crb_phi_weak_d(d, phi, asmall, frame_len=4)
        worst_rel = max(worst_rel, abs(closed * F[0, 0] - 1.0))
        worst_cross = max(worst_cross, float(np.max(np.abs(F[0, 1:]))))
    return [
        oracle.compare("weak_eav_fim_direct", "any", "eav_weak", "agree_abs", worst_rel, 0.0, 0.0, 1e-6,
                       draws=count, ne=3, frame_len=4),
        oracle.compare("weak_eav_cross_fim_zero", "any", "eav_weak", "agree_abs", worst_cross, 0.0, 0.0, 1e-10,
                       draws=count),
    ]


def check_outage(config, acfg, n, seed, budget):
    out = []
    s, l = st.DEFAULT_SSJB, st.DEFAULT_SLB
    C = crb.crb_phi_strong("ssjb", s, 0.0, acfg)
    eps = eps_grid(0.5 * C, 200 * C)
    emp = oracle.mc_ccdf(lambda b: oracle.crb_eav(b, "ssjb", s, config, "strong"), config, eps, n, seed)
    an = st.ccdf_eav(eps, "ssjb", "strong", s, acfg)
    tol = 0.01 if n >= 100_000 else 0.005
    out.append(oracle.compare("outage_exact_vs_mc", "ssjb", "eav_strong", "agree_se", an, emp.p, emp.stderr, tol,
                              k=3.0 if n < 100_000 else 0.0))
    half = float(st.ccdf_eav([2 * C], "ssjb", "strong", s, acfg)[0])
    out.append(oracle.compare("outage_checkpoint_half", "ssjb", "eav_strong", "agree_abs", half, 0.5, 0.0, 1e-12,
                              crb_phi_0=C))
    for strength in ("strong", "weak"):
        Cs = float(st.v_eav(crb.illumination("ssjb", s, acfg), strength, acfg))
        eps = eps_grid(0.5 * Cs, 200 * Cs)
        emp = oracle.mc_ccdf(lambda b, k=strength: oracle.crb_eav(b, "slb", l, config, k), config, eps, n, seed)
        an = st.ccdf_eav(eps, "slb", strength, l, acfg, budget)
        out.append(oracle.compare("outage_approx_vs_mc", "slb", f"eav_{strength}", "agree_abs", an, emp.p,
                                  emp.stderr, 0.02))
    # base station: lower bound and approximation (SSJB), labeled bracket (SLB)
    L0 = crb.ssjb_lower_const(s, acfg)
    eps = eps_grid(0.5 * L0, 200 * L0)
    vals = oracle.map_realizations(lambda b: oracle.crb_bs(b, "ssjb", s, config), config, n, seed)
    emp = oracle.empirical_curve(vals, eps, "ssjb", "bs")
    out.append(oracle.compare("outage_lower_bound", "ssjb", "bs", "lower_bound",
                              st.ccdf_bs_ssjb_lower(eps, s, acfg), emp.p, emp.stderr, 0.0, infinite=emp.n_inf))
    out.append(oracle.compare("outage_approx_vs_mc", "ssjb", "bs", "agree_abs",
                              st.ccdf_bs_ssjb_approx(eps, s, acfg, budget), emp.p, emp.stderr, 0.02))
    for idx, split in enumerate([l] + random_splits(seed)):
        vals = oracle.map_realizations(lambda b, sp=split: oracle.crb_bs(b, "slb", sp, config), config, n, seed)
        eps = eps_grid(np.percentile(vals, 1), np.percentile(vals, 99.5))
        emp = oracle.empirical_curve(vals, eps, "slb", "bs")
        lo = st.ccdf_bs_slb(eps, split, acfg, "lower", budget)
        hi = st.ccdf_bs_slb(eps, split, acfg, "upper", budget)
        out.append(oracle.compare("outage_bracket", "slb", "bs", "bracket", (lo, hi), emp.p, emp.stderr, 0.0,
                                  split=[split.tau1, split.tau2, split.tau3], split_index=idx))
    return out


def check_clt(config, n, seed):
    b = sample_batch(config, seed, 0, n)
    s = rtk(b.h, b.theta)
    x = np.stack([s.R, s.T, s.K], axis=1)
    mean, cov = st.clt_moments(config.N)
    m = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / math.sqrt(n)
    c = np.cov(x, rowvar=False)
    off = float(np.max(np.abs(c - np.diag(np.diag(c))))) / config.N
    return [
        oracle.compare("clt_mean", "any", "stats", "agree_se", m, mean, se, 0.0),
        oracle.compare("clt_variance", "any", "stats", "agree_rel", np.diag(c), cov, 0.0, 0.05),
        oracle.compare("clt_offdiagonal", "any", "stats", "agree_abs", off, 0.0, 0.0, 0.05),
    ]


def check_truncation(config, n, seed):
    exact = st.e_trunc_inv_cos2(config.delta)
    mc = oracle.mc_expectation(lambda b: 1.0 / np.cos(b.theta) ** 2, config, n, seed, truncate=True)
    return [oracle.compare("truncated_inv_cos2", "any", "angle", "agree_se", exact, mc.mean, mc.stderr,
                           0.01 * exact, k=3.0 if n < 1_000_000 else 0.0)]


def check_ergodic(config, acfg, n, seed, budget):
    out = []
    s, l = st.DEFAULT_SSJB, st.DEFAULT_SLB
    vals = {}
    for scheme, split in (("ssjb", s), ("slb", l)):
        e = st.ergodic_crb(scheme, "bs", split, acfg, budget)
        mc = oracle.mc_expectation(lambda b, sc=scheme, sp=split: oracle.crb_bs(b, sc, sp, config), config, n, seed,
                                   truncate=True)
        out.append(oracle.compare("ergodic_crb_approx_vs_mc", scheme, "bs", "agree_rel", e["approx"], mc.mean,
                                  mc.stderr, 0.05))
        vals[scheme] = e
    out.append(oracle.compare("ergodic_lcrb_checkpoint", "ssjb", "bs", "agree_abs", vals["ssjb"]["lower"], 0.668,
                              0.0, 1e-3))
    bs = vals["ssjb"]["approx"]
    strong = st.ergodic_crb("ssjb", "eav_strong", s, acfg, budget)["exact"]
    weak = st.ergodic_crb("ssjb", "eav_weak", s, acfg, budget)["exact"]
    # smallest gap in the chain bs < strong < weak must be positive
    rec = oracle.compare("ergodic_ordering_bs_strong_weak", "ssjb", "all", "upper_bound",
                         min(strong - bs, weak - strong), 0.0, 0.0, 0.0, bs=bs, strong=strong, weak=weak,
                         weak_strong_ratio=weak / strong)
    rec.passed = rec.passed and rec.margin > 0
    out.append(rec)
    return out


def check_rates(config, acfg, n, seed, n_big, budget):
    out = []
    s, l = st.DEFAULT_SSJB, st.DEFAULT_SLB
    user = st.rate_user("ssjb", s, acfg, budget)
    mc_user = oracle.mc_expectation(oracle.mc_rate("ssjb", s, config, "user"), config, n, seed)
    out.append(oracle.compare("rate_user_jensen_checkpoint", "ssjb", "user", "agree_abs", user["upper_jensen"],
                              0.0531, 0.0, 5e-5))
    out.append(oracle.compare("rate_user_jensen_bound", "ssjb", "user", "upper_bound", user["upper_jensen"],
                              mc_user.mean, mc_user.stderr, 0.0))
    out.append(oracle.compare("rate_user_gamma_bound", "ssjb", "user", "upper_bound", user["upper_gamma"],
                              mc_user.mean, mc_user.stderr, 0.0))
    tgt = st.rate_target("ssjb", s, acfg)["exact"]
    mc_t = oracle.mc_expectation(oracle.mc_rate("ssjb", s, config, "target"), config, n, seed)
    out.append(oracle.compare("rate_target_exact", "ssjb", "target", "agree_abs", tgt, mc_t.mean, mc_t.stderr, 1e-12))
    out.append(oracle.compare("rate_target_deterministic", "ssjb", "target", "agree_abs", mc_t.stderr, 0.0, 0.0,
                              1e-12))
    out.append(oracle.compare("rate_target_checkpoint", "ssjb", "target", "agree_abs", tgt, 0.0531, 0.0, 5e-5))
    eav = st.rate_eav("slb", l, acfg)["approx"]
    mc_e = oracle.mc_expectation(oracle.mc_rate("slb", l, config, "eav"), config, n_big, seed)
    out.append(oracle.compare("rate_eav_approx_checkpoint", "slb", "eav", "agree_abs", eav, 0.00716, 0.0, 5e-6))
    out.append(oracle.compare("rate_eav_approx_vs_mc", "slb", "eav", "agree_rel", eav, mc_e.mean, mc_e.stderr, 0.10))
    out.append(oracle.arbitrate_convention(s, config, n_big, seed))
    su = st.rate_user("slb", l, acfg, budget)
    mc_su = oracle.mc_expectation(oracle.mc_rate("slb", l, config, "user"), config, n, seed)
    out.append(oracle.compare("rate_user_bracket", "slb", "user", "bracket", (su["lower"], su["upper"]),
                              mc_su.mean, mc_su.stderr, 0.0, approx=su["approx"]))
    st_t = st.rate_target("slb", l, acfg, budget)
    mc_st = oracle.mc_expectation(oracle.mc_rate("slb", l, config, "target"), config, n, seed)
    out.append(oracle.compare("rate_target_exact_vs_mc", "slb", "target", "agree_se", st_t["exact"], mc_st.mean,
                              mc_st.stderr, 0.0))
    # the normal-model integral is reported but not gated: its bias is known
    rec = oracle.compare("rate_target_normal_model_vs_mc", "slb", "target", "agree_se", st_t["approx"], mc_st.mean,
                         mc_st.stderr, 0.0)
    rec.extra["gate"] = False
    out.append(rec)
    return out


def check_trends(config, acfg, budget):
    from .cli import pareto_flags, region_points

    out = []
    t1 = np.round(np.linspace(0.0, 0.86, 12), 10)
    for adv in ("external", "target"):
        vals = [st.esr("slb", SlbSplit(float(t), 0.07, 0.07), acfg, adv, budget) for t in t1]
        diffs = np.diff(vals)
        # smallest step along the grid must not be negative
        out.append(oracle.compare("trend_slb_esr_vs_tau1", "slb", adv, "upper_bound", float(np.min(diffs)), 0.0, 0.0,
                                  1e-12, first=vals[0], last=vals[-1]))
    alphas = np.linspace(0.0, 1.0, 11)
    for adv in ("external", "target"):
        vals = np.array([st.esr("ssjb", SsjbSplit(0.5, float(a)), acfg, adv, budget) for a in alphas])
        rec = oracle.compare("trend_ssjb_esr_vs_alpha", "ssjb", adv, "lower_bound", float(np.max(np.diff(vals))), 0.0,
                             0.0, 1e-12, first=vals[0], last=vals[-1])
        rec.passed = rec.passed and bool(vals[0] > vals[-1])
        out.append(rec)
    sp = SsjbSplit(1.0, 0.0)
    esr_t = st.esr("ssjb", sp, acfg, "target", budget)
    user = st.rate_user("ssjb", sp, acfg, budget)[st.USER_RATE_KIND["ssjb"]]
    out.append(oracle.compare("esr_target_equals_user_rate", "ssjb", "target", "agree_abs", esr_t, user, 0.0, 1e-12))
    for scheme in ("ssjb", "slb"):
        pts = region_points(scheme, 6, "target", "bs", acfg, budget)
        flags = pareto_flags([p["e_crb"] for p in pts], [p["esr"] for p in pts])
        front = sorted((p["e_crb"], p["esr"]) for p, f in zip(pts, flags) if f)
        ys = [y for _, y in front]
        ok = len(front) >= 2 and all(b >= a for a, b in zip(ys, ys[1:])) and ys[-1] > ys[0]
        rec = oracle.compare("region_frontier_monotone", scheme, "bs", "agree_abs", float(ok), 1.0, 0.0, 0.0,
                             frontier_points=len(front), note="analytic is 1 when the frontier is monotone")
        out.append(rec)
    return out


def run_validation(config: ScenarioConfig, n: int = 10_000, seed: int = 0, negative_control: bool = False,
                   threads: int | None = None, big_n: int | None = None) -> list:
    """Run every check; the analytic side uses a corrupted ``c3`` when ``negative_control``."""
    acfg = config.replace(c3=config.c3 * CORRUPT_C3) if negative_control else config
    budget = QuadratureBudget(rel_tol=1e-6, seed=seed)
    big = big_n or max(n, 100_000)
    records = []
    with oracle.thread_limit(threads):
        records += check_closed_forms(config, acfg, min(n, 1000), seed)
        records += check_weak_fim(config, acfg, 200, seed)
        records += check_outage(config, acfg, n, seed, budget)
        records += check_clt(config, n, seed)
        records += check_truncation(config, n, seed)
        records += check_ergodic(config, acfg, n, seed, budget)
        records += check_rates(config, acfg, n, seed, big, budget)
        records += check_trends(config, acfg, budget)
    return records


def gate_passed(records) -> bool:
    return all(r.passed for r in records if r.extra.get("gate", True))
