import numpy as np
import pytest

from twoway_relay.af import af_approx_rate
from twoway_relay.allocation import (FLOOR, allocate_af, allocate_df, allocate_symmetric,
                                     build_af_gp_coeffs, af_table_sinr, build_df_gp_coeffs,
                                     df_table_sum_se, improvement_report, symmetric_objective,
                                     uniform_powers)
from twoway_relay.df import df_approx_rates
from twoway_relay.model import FadingProfile, PowerProfile, SystemConfig, estimation_stats

from helpers import make_system


def _system(M, beta_AR, beta_RB, p_p=1.0):
    fading = FadingProfile(np.asarray(beta_AR, float), np.asarray(beta_RB, float))
    N = fading.beta_AR.size
    cfg = SystemConfig(M=M, N=N, tau_c=196, tau_p=2 * N)
    return cfg, fading, estimation_stats(cfg, fading, p_p)


ASYM2 = ([1.0, 0.3], [0.4, 0.8])


def test_user_noise_coefficient():
    cfg = SystemConfig(M=100, N=1, tau_c=196, tau_p=2)
    fading = FadingProfile.uniform(1, 1.0)
    stats = estimation_stats(cfg, fading, 0.5)  # tau_p p_p = 1 gives sigma^2 = 0.5
    assert stats.sigma2_RB[0] == pytest.approx(0.5)
    tab_A, _ = build_af_gp_coeffs(cfg, stats, fading)
    assert tab_A.e[0] == pytest.approx(0.02)


def test_tables_mirror_under_symmetric_fading():
    cfg, fading, stats = _system(64, [1.0, 0.5, 0.2], [1.0, 0.5, 0.2])
    tab_A, tab_B = build_af_gp_coeffs(cfg, stats, fading)
    for name in "abcde":
        np.testing.assert_allclose(getattr(tab_A, name), getattr(tab_B, name))


def test_table_sinr_matches_approximation():
    cfg, fading, stats = _system(64, [1.0, 0.5, 0.2], [0.3, 0.9, 0.6])
    pw = PowerProfile(np.array([0.5, 1.0, 2.0]), np.array([1.5, 0.2, 0.7]), 3.0, 1.0)
    tab_A, tab_B = build_af_gp_coeffs(cfg, stats, fading)
    rates = af_approx_rate(cfg, stats, fading, pw)
    np.testing.assert_allclose(af_table_sinr(tab_A, pw.p_A, pw.p_B, pw.p_r), rates.sinr_A,
                               rtol=1e-12)
    np.testing.assert_allclose(af_table_sinr(tab_B, pw.p_B, pw.p_A, pw.p_r), rates.sinr_B,
                               rtol=1e-12)


def test_df_table_matches_approximation():
    cfg, fading, stats = _system(64, [1.0, 0.5, 0.2], [0.3, 0.9, 0.6])
    pw = PowerProfile(np.array([0.5, 1.0, 2.0]), np.array([1.5, 0.2, 0.7]), 3.0, 1.0)
    co = build_df_gp_coeffs(cfg, stats, fading)
    expect = df_approx_rates(cfg, stats, fading, pw).sum_se
    assert df_table_sum_se(cfg, co, pw.p_A, pw.p_B, pw.p_r) == pytest.approx(expect, rel=1e-12)


@pytest.mark.parametrize("N", [1, 5])
def test_af_equal_fading_gives_half_split(N):
    cfg, fading, stats = make_system(M=100, N=N, p_p=1.0, beta_AR=[0.5] * N, beta_RB=[0.5] * N)
    P = 10.0
    res = allocate_af(cfg, stats, fading, P, p_p=1.0)
    np.testing.assert_allclose(res.p_A, P / (4 * N), rtol=1e-3)
    np.testing.assert_allclose(res.p_B, P / (4 * N), rtol=1e-3)
    assert res.p_r == pytest.approx(P / 2, rel=1e-3)


def test_af_from_perturbed_start_returns_to_half_split():
    N, P = 2, 10.0
    cfg, fading, stats = make_system(M=100, N=N, p_p=1.0, beta_AR=[1.0] * N, beta_RB=[1.0] * N)
    start = PowerProfile(np.array([0.8, 1.5]), np.array([1.2, 1.0]), 5.0, 1.0)
    res = allocate_af(cfg, stats, fading, P, p_p=1.0, initial=start)
    np.testing.assert_allclose(res.p_A, P / (4 * N), rtol=1e-2)
    assert res.p_r == pytest.approx(P / 2, rel=1e-2)


def _symmetrised_grid(se, P, n=121):
    """Best sum SE over p_A,i = p_B,i = q_i and p_r = P - 2(q_1 + q_2) on a log grid."""
    q = np.geomspace(1e-4 * P, P / 4, n)
    best = -np.inf
    for q1 in q:
        for q2 in q:
            pr = P - 2 * (q1 + q2)
            if pr <= 0:
                continue
            p = np.array([q1, q2])
            best = max(best, se(p, p, pr))
    return best


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_two_pairs_against_grid(protocol):
    cfg, fading, stats = _system(100, *ASYM2)
    P = 10.0
    if protocol == "AF":
        res = allocate_af(cfg, stats, fading, P, p_p=1.0)
        se = lambda a, b, r: af_approx_rate(cfg, stats, fading, PowerProfile(a, b, r, 1.0)).sum_se
    else:
        res = allocate_df(cfg, stats, fading, P, p_p=1.0)
        co = build_df_gp_coeffs(cfg, stats, fading)
        se = lambda a, b, r: df_table_sum_se(cfg, co, a, b, r)
    grid = _symmetrised_grid(se, P)
    assert res.sum_se >= grid * (1 - 1e-2)
    assert res.sum_se == pytest.approx(se(res.p_A, res.p_B, res.p_r), rel=1e-9)


@pytest.mark.parametrize("allocate", [allocate_af, allocate_df])
def test_trace_monotone_and_budget_respected(allocate):
    cfg, fading, stats = _system(64, [1.0, 0.2, 0.05], [0.1, 0.7, 0.4])
    P = 20.0
    res = allocate(cfg, stats, fading, P, p_p=1.0)
    assert np.all(np.diff(res.objective_trace) >= -1e-12)
    assert res.total_power <= P * (1 + 1e-6)
    assert np.all(res.p_A >= FLOOR * P * (1 - 1e-6)) and np.all(res.p_B > 0) and res.p_r > 0
    assert res.sum_se >= res.objective_trace[0]


def test_df_symmetric_config_gives_symmetric_allocation():
    cfg, fading, stats = make_system(M=100, N=3, p_p=1.0, beta_AR=[0.6] * 3, beta_RB=[0.6] * 3)
    res = allocate_df(cfg, stats, fading, 10.0, p_p=1.0)
    allp = np.concatenate([res.p_A, res.p_B])
    np.testing.assert_allclose(allp, allp.mean(), rtol=1e-3)


def test_bad_inputs():
    cfg, fading, stats = make_system(M=16, N=2)
    with pytest.raises(ValueError):
        allocate_af(cfg, stats, fading, 0.0)
    with pytest.raises(ValueError):
        allocate_df(cfg, stats, fading, 1.0, initial=uniform_powers(2, 2.0, 1.0))
    with pytest.raises(ValueError):
        allocate_df(cfg, stats, fading, 1.0, pairing="other")


@pytest.mark.parametrize("N, P, p_u, p_r", [(5, 10.0, 0.5, 5.0), (1, 8.0, 2.0, 4.0)])
def test_symmetric_af_closed_form(N, P, p_u, p_r):
    cfg, fading, stats = make_system(M=100, N=N, beta_AR=[1.0] * N, beta_RB=[1.0] * N)
    out = allocate_symmetric("AF", cfg, stats, fading, P, p_p=1.0)
    assert out.p_u == pytest.approx(p_u)
    assert out.p_r == pytest.approx(p_r)


def test_symmetric_af_golden_section_agrees_with_closed_form():
    # nudging one gain off equality switches to the numeric search
    cfg, _, stats = make_system(M=100, N=2, beta_AR=[1.0, 1.0], beta_RB=[1.0, 1.0])
    fading = FadingProfile(np.array([1.0, 1.0 + 1e-12]), np.array([1.0, 1.0]))
    out = allocate_symmetric("AF", cfg, stats, fading, 10.0, p_p=1.0)
    assert out.p_u == pytest.approx(10.0 / 8, rel=1e-4)


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_symmetric_against_dense_grid(protocol):
    cfg, fading, stats = _system(128, [1.0, 0.3, 0.05], [0.2, 0.6, 0.9])
    P = 10.0
    out = allocate_symmetric(protocol, cfg, stats, fading, P, p_p=1.0)
    f = symmetric_objective(protocol, cfg, stats, fading, P, p_p=1.0)
    hi = P / (2 * cfg.N)
    grid = np.linspace(hi / 1e4, hi * (1 - 1e-9), 10_000)
    vals = np.array([f(x) for x in grid])
    k = int(np.argmax(vals))
    assert out.sum_se >= vals[k] - 1e-9
    assert abs(out.p_u - grid[k]) <= 2 * (grid[1] - grid[0])


@pytest.mark.parametrize("protocol", ["AF", "DF"])
def test_symmetric_objective_is_concave(protocol):
    cfg, fading, stats = _system(128, [1.0, 0.3, 0.05], [0.2, 0.6, 0.9])
    P = 10.0
    f = symmetric_objective(protocol, cfg, stats, fading, P, p_p=1.0)
    x = np.linspace(1e-3, P / (2 * cfg.N) - 1e-3, 400)
    v = np.array([f(t) for t in x])
    d2 = v[2:] - 2 * v[1:-1] + v[:-2]
    # DF is a pointwise min of concave pieces, so kinks only push d2 further negative
    assert np.all(d2 <= 1e-10 * np.abs(v[1:-1]).max())


def test_equal_fading_af_uplift_is_negligible():
    cfg, fading, stats = make_system(M=100, N=3, p_p=1.0, beta_AR=[0.5] * 3, beta_RB=[0.5] * 3)
    rep = improvement_report(cfg, stats, fading, 10.0, p_p=1.0)
    assert abs(rep["AF"].uplift_percent) <= 0.5
    assert rep["DF"].uplift_percent >= -1e-9
