import numpy as np
import pytest
from hypothesis import given, strategies as st

from twoway_relay.af import (af_approx_rate, af_approx_terms, af_exact_rate, af_exact_terms,
                             af_low_snr_limit, af_rho_squared, estimation_error_subterms,
                             self_interference_subterms, swap_roles)
from twoway_relay.model import FadingProfile, PowerProfile, estimation_stats
from twoway_relay.montecarlo import simulate_af_sum_se

from helpers import make_system


def test_equal_fading_gives_equal_directions():
    cfg, fading, stats = make_system(M=32, N=3)
    r = af_exact_rate(cfg, stats, fading, PowerProfile.uniform(3, 1.0, 6.0, 1.0))
    np.testing.assert_allclose(r.R_A, r.R_B, rtol=1e-12)
    np.testing.assert_allclose(r.R_A, r.R_A[0], rtol=1e-12)


def test_swapping_hops_swaps_directions(asym_system, asym_powers):
    cfg, fading, stats = asym_system
    r = af_exact_rate(cfg, stats, fading, asym_powers)
    s = af_exact_rate(cfg, *swap_roles(stats, fading, asym_powers))
    np.testing.assert_allclose(r.R_A, s.R_B, rtol=1e-12)
    np.testing.assert_allclose(r.R_B, s.R_A, rtol=1e-12)
    a = af_approx_rate(cfg, stats, fading, asym_powers)
    b = af_approx_rate(cfg, *swap_roles(stats, fading, asym_powers))
    np.testing.assert_allclose(a.sinr_A, b.sinr_B, rtol=1e-12)


def test_sum_se_applies_overhead(asym_system, asym_powers):
    cfg, fading, stats = asym_system
    r = af_exact_rate(cfg, stats, fading, asym_powers)
    expected = cfg.overhead * np.sum(0.5 * np.log2(1 + r.sinr_A) + 0.5 * np.log2(1 + r.sinr_B))
    assert r.sum_se == pytest.approx(expected, rel=1e-12)


def test_zero_relay_power_gives_zero_rate(asym_system, asym_powers):
    cfg, fading, stats = asym_system
    pw = PowerProfile(asym_powers.p_A, asym_powers.p_B, 0.0, asym_powers.p_p)
    assert af_exact_rate(cfg, stats, fading, pw).sum_se == 0.0
    assert af_approx_rate(cfg, stats, fading, pw).sum_se == 0.0
    assert af_rho_squared(cfg, stats, fading, pw) == 0.0


def test_derived_terms_match_monte_carlo_with_unequal_fading():
    # independent check of the closed forms: sample the SINR directly
    cfg, fading, stats = make_system(M=16, N=2, p_p=2.0, beta_AR=[1.0, 0.4],
                                     beta_RB=[0.3, 0.8], seed=5)
    pw = PowerProfile(np.array([1.0, 0.5]), np.array([0.7, 1.2]), 4.0, 2.0)
    mc = simulate_af_sum_se(cfg, fading, pw, trials=20_000)
    ex = af_exact_rate(cfg, stats, fading, pw)
    z = 3.29 / 1.96     # widen the 95% half-width to 99.9%
    for est, val in zip(mc.sinr_A + mc.sinr_B, np.concatenate([ex.sinr_A, ex.sinr_B])):
        assert abs(est.mean - val) <= z * est.half_width_95


def test_printed_and_derived_forms_differ_only_with_imperfect_estimates():
    cfg, fading, stats = make_system(M=8, N=2)
    pw = PowerProfile.uniform(2, 1.0, 4.0, 1.0)
    d = af_exact_terms(cfg, stats, fading, pw, form="derived")
    p = af_exact_terms(cfg, stats, fading, pw, form="printed")
    np.testing.assert_allclose(d.A, p.A)
    np.testing.assert_allclose(d.D, p.D)
    assert not np.allclose(d.B, p.B)


@pytest.mark.parametrize("form", ["derived", "printed"])
def test_subterm_counts(form):
    cfg, fading, stats = make_system(M=8, N=2)
    pw = PowerProfile.uniform(2, 1.0, 4.0, 1.0)
    n = len(estimation_error_subterms(8.0, stats, fading, pw, form))
    assert n == (4 if form == "derived" else 10)
    assert len(self_interference_subterms(8.0, stats, fading, pw, form)) == 2


def test_unknown_form_rejected():
    cfg, fading, stats = make_system(M=8, N=2)
    with pytest.raises(ValueError):
        af_exact_rate(cfg, stats, fading, PowerProfile.uniform(2, 1, 1, 1), form="other")


def test_exact_sinr_approaches_large_m_form(asym_system, asym_powers):
    cfg, fading, stats = asym_system
    gaps = []
    for M in (100, 1000, 10_000, 100_000):
        c = cfg.with_M(M)
        e = af_exact_rate(c, stats, fading, asym_powers).sinr_A
        a = af_approx_rate(c, stats, fading, asym_powers).sinr_A
        gaps.append(np.max(np.abs(e - a) / e))
    assert all(b < a for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-3


def test_approx_matches_term_by_term_definition():
    cfg, fading, stats = make_system(M=50, N=1, p_p=1.0, beta_AR=[0.5], beta_RB=[0.25])
    pw = PowerProfile(np.array([2.0]), np.array([3.0]), 5.0, 1.0)
    t = af_approx_terms(cfg, stats, fading, pw)
    sA, sB = stats.sigma2_AR[0], stats.sigma2_RB[0]
    # single pair: no inter-user term, relay noise from this pair only
    assert t.Dtilde[0] == 0.0
    assert t.Btilde[0] == pytest.approx(3.0 * (0.25 / sB + 0.5 / sA))
    assert t.Ctilde[0] == pytest.approx(4 * 2.0 * 0.5 / sB)
    relay = sA * sB * (2.0 * sA + 3.0 * sB) / 5.0
    assert t.Etilde[0] == pytest.approx(1 / sB + relay / (sA**2 * sB**2))
    assert t.numerator[0] == pytest.approx(150.0)


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_approx_increases_with_relay_power(pr, factor):
    cfg, fading, stats = make_system(M=64, N=3)
    lo = af_approx_rate(cfg, stats, fading, PowerProfile.uniform(3, 1.0, pr, 1.0)).sum_se
    hi = af_approx_rate(cfg, stats, fading, PowerProfile.uniform(3, 1.0, pr * (1 + factor), 1.0)).sum_se
    assert hi > lo


@given(st.integers(2, 2000))
def test_approx_increases_with_antennas(M):
    cfg, fading, stats = make_system(M=M, N=2)
    pw = PowerProfile.uniform(2, 1.0, 4.0, 1.0)
    assert af_approx_rate(cfg.with_M(M + 1), stats, fading, pw).sum_se > \
        af_approx_rate(cfg, stats, fading, pw).sum_se


def test_low_snr_limit_is_approached(asym_system):
    cfg, fading, stats = asym_system
    ratios = []
    for p in (1e-2, 1e-4, 1e-6):
        pw = PowerProfile.uniform(4, p, 5.0, 2.0)
        r = af_approx_rate(cfg, stats, fading, pw)
        lim_A, _ = af_low_snr_limit(cfg, stats, pw)
        ratios.append(np.max(np.abs(r.R_A / lim_A - 1)))
    assert ratios[0] > ratios[1] > ratios[2] and ratios[2] < 1e-3


@given(st.lists(st.floats(0.05, 3), min_size=2, max_size=2))
def test_rho_squared_meets_relay_budget_scale(p):
    cfg, fading, stats = make_system(M=16, N=2)
    pw = PowerProfile(np.array(p), np.array(p[::-1]), 3.0, 1.0)
    r1 = af_rho_squared(cfg, stats, fading, pw)
    r2 = af_rho_squared(cfg, stats, fading, PowerProfile(pw.p_A, pw.p_B, 6.0, 1.0))
    assert r2 == pytest.approx(2 * r1)
