"""Acceptance checks; each test prints one PASS/FAIL line for its criterion."""
import io
import time

import numpy as np
import pytest

from twoway_relay.af import af_approx_rate, af_exact_rate, af_rho_squared
from twoway_relay.allocation import allocate_af, allocate_df, improvement_report
from twoway_relay.df import df_approx_rates, low_snr_comparison
from twoway_relay.experiments import (UPLIFT_BETA_AR, UPLIFT_BETA_RB, ExperimentConfig,
                                      render_csv, run_experiment)
from twoway_relay.gp import GpProblem, Monomial, Posynomial, gp_solve
from twoway_relay.model import (FadingProfile, PowerProfile, ScalingSpec, SystemConfig,
                                estimation_stats)
from twoway_relay.montecarlo import (lemma1_diagnostics, rho_af_empirical, simulate_af_sum_se,
                                     simulate_df_sum_se)
from twoway_relay.scaling import LimitKind, asymptotic_limit, scaled_rate, tradeoff_equivalence

from helpers import report
from oracles import lattice_minimum

pytestmark = pytest.mark.acceptance


def system(M, N, beta_AR=1.0, beta_RB=1.0, p_p=1.0, seed=0):
    fading = FadingProfile(np.broadcast_to(np.asarray(beta_AR, float), (N,)).copy(),
                           np.broadcast_to(np.asarray(beta_RB, float), (N,)).copy())
    cfg = SystemConfig(M=M, N=N, tau_c=196, tau_p=2 * N, seed=seed)
    return cfg, fading, estimation_stats(cfg, fading, p_p)


def random_fading(rng, N):
    return rng.uniform(0.1, 1.0, N), rng.uniform(0.1, 1.0, N)


def test_exact_af_inside_monte_carlo_interval():
    # equal fading and powers: every user shares one exact SINR, estimated by
    # pooling the exchangeable receivers; per-user coverage is reported too
    ok, parts, covered, total, slowest = True, [], 0, 0, 0.0
    for M, N in [(8, 2), (32, 2), (128, 5)]:
        t0 = time.perf_counter()
        cfg, fading, stats = system(M, N)
        pw = PowerProfile.uniform(N, 1.0, 2.0 * N, 1.0)
        exact = af_exact_rate(cfg, stats, fading, pw).sinr_A[0]
        mc = simulate_af_sum_se(cfg, fading, pw, trials=10_000)
        slowest = max(slowest, time.perf_counter() - t0)
        inside = mc.sinr_pooled.contains(exact)
        ok &= inside
        per_user = [e.contains(exact) for e in mc.sinr_A + mc.sinr_B]
        covered, total = covered + sum(per_user), total + len(per_user)
        parts.append(f"({M},{N}) {exact:.4f} in {mc.sinr_pooled.mean:.4f}"
                     f"+-{mc.sinr_pooled.half_width_95:.4f}")
    ok &= slowest <= 120
    report(1, ok, "; ".join(parts) + f"; per-user intervals covering {covered}/{total}"
           f"; slowest point {slowest:.1f}s")
    assert ok


def test_approximation_converges_in_M():
    rng = np.random.default_rng(2)
    bA, bB = random_fading(rng, 5)
    pw = PowerProfile.uniform(5, 1.0, 10.0, 1.0)
    errs = []
    for M in (64, 128, 256, 512, 1024):
        cfg, fading, stats = system(M, 5, bA, bB)
        exact = af_exact_rate(cfg, stats, fading, pw).sum_se
        errs.append(abs(exact - af_approx_rate(cfg, stats, fading, pw).sum_se) / exact)
    ok = errs[-1] <= 0.01 and all(b <= a for a, b in zip(errs, errs[1:]))
    report(2, ok, "relative gaps " + ", ".join(f"{e:.2%}" for e in errs))
    assert ok


def test_df_approximation_matches_monte_carlo():
    t0 = time.perf_counter()
    cfg, fading, stats = system(512, 5)
    pw = PowerProfile.uniform(5, 1.0, 10.0, 1.0)
    mc = simulate_df_sum_se(cfg, fading, pw, trials=10_000).sum_se
    approx = df_approx_rates(cfg, stats, fading, pw).sum_se
    rel = abs(approx - mc.mean) / mc.mean
    elapsed = time.perf_counter() - t0
    ok = rel <= 0.03 and elapsed <= 300
    report(3, ok, f"approx {approx:.4f} vs MC {mc.mean:.4f}, {rel:.2%} apart, {elapsed:.1f}s")
    assert ok


def test_af_beats_df_at_low_user_power():
    rng = np.random.default_rng(4)
    pw = PowerProfile.uniform(5, 1e-3, 10.0, 1.0)
    losing, margin = [], np.inf
    for _ in range(100):
        cfg, fading, stats = system(128, 5, *random_fading(rng, 5))
        c = low_snr_comparison(cfg, stats, fading, pw)
        margin = min(margin, float(np.min(c.af_sum - c.df_sum)))
        losing += [(fading.beta_AR[i], fading.beta_RB[i]) for i in np.flatnonzero(~c.af_exceeds)]
    ok = not losing
    detail = f"{len(losing)} of 500 pairs with DF >= AF, worst AF-DF {margin:.2e}"
    if losing:
        detail += "; e.g. beta " + ", ".join(f"({a:.3f},{b:.3f})" for a, b in losing[:3])
    report(4, ok, detail)
    assert ok


def test_scenario_A_regimes():
    rng = np.random.default_rng(5)
    cfg, fading, _ = system(100, 5, *random_fading(rng, 5))
    spec = lambda g: ScalingSpec("A", 0, 0, g, E_u=10.0, E_r=100.0, E_p=10.0)
    grid = np.logspace(2, 5, 13).round().astype(int)
    ok, parts = True, []
    for proto in ("AF", "DF"):
        lim = asymptotic_limit(proto, spec(1), cfg, fading)
        gap = abs(scaled_rate(proto, spec(1), cfg, fading, 10**5) - lim.limit_value) / lim.limit_value
        drop = (scaled_rate(proto, spec(2), cfg, fading, 10**4)
                / scaled_rate(proto, spec(2), cfg, fading, 10**2))
        rising = np.diff([scaled_rate(proto, spec(0.8), cfg, fading, int(M)) for M in grid])
        good = (lim.kind is LimitKind.FINITE and gap <= 0.02 and drop < 0.1
                and bool(np.all(rising > 0)))
        ok &= good
        parts.append(f"{proto}: gap {gap:.2%}, ratio {drop:.3f}, increasing {np.all(rising > 0)}")
    report(5, ok, "; ".join(parts))
    assert ok


def test_scenario_C_tradeoff():
    rng = np.random.default_rng(6)
    cfg, fading, _ = system(100, 5, *random_fading(rng, 5))
    kw = dict(E_u=10.0, E_r=10**1.5, E_p=1.0)
    specs = [ScalingSpec("C", 1.3, 1.1, 0.5, **kw), ScalingSpec("C", 0.8, 0.6, 1.0, **kw)]
    ok, parts = True, []
    for proto in ("AF", "DF"):
        rep = tradeoff_equivalence(proto, specs, cfg, fading, M_grid=(100, 1000, 10**4, 10**5))
        ok &= rep.equivalent and rep.gaps_shrinking
        parts.append(f"{proto}: both {rep.regimes[0].kind.value}, gaps "
                     + " ".join(f"{g:.3g}" for g in rep.gaps))
    report(6, ok, "; ".join(parts))
    assert ok


def random_gp(rng):
    n = int(rng.integers(1, 6))
    names = [f"x{i}" for i in range(n)]

    def mono(c):
        return Monomial(c, dict(zip(names, rng.uniform(-2, 2, n))))
    obj = Posynomial([mono(rng.uniform(0.5, 2)) for _ in range(rng.integers(1, 5))])
    cons = []
    for _ in range(rng.integers(0, 3)):
        # scaled so x = 1 is strictly feasible
        terms = [mono(1.0) for _ in range(rng.integers(1, 4))]
        w = rng.dirichlet(np.ones(len(terms))) * rng.uniform(0.3, 0.9)
        cons.append(Posynomial([Monomial(wi, t.exponents) for wi, t in zip(w, terms)]))
    return GpProblem(obj, cons, {k: (np.exp(-2), np.exp(2)) for k in names})


def test_gp_solver_against_lattice_search():
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        prob = random_gp(rng)
        sol = gp_solve(prob)
        ref, _ = lattice_minimum(prob, points=21)
        worst = max(worst, abs(sol.objective - ref) / ref)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3 and elapsed <= 120
    report(7, ok, f"50 problems, worst relative gap {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_af_allocation_equal_fading_closed_form():
    P, worst = 10.0, 0.0
    for N in (1, 5, 20):
        cfg, fading, stats = system(100, N)
        res = allocate_af(cfg, stats, fading, P, p_p=1.0)
        users = np.concatenate([res.p_A, res.p_B])
        worst = max(worst, float(np.max(np.abs(users / (P / (4 * N)) - 1))),
                    abs(res.p_r / (P / 2) - 1))
    ok = worst <= 1e-3
    report(8, ok, f"N in (1, 5, 20), worst relative deviation {worst:.1e}")
    assert ok


def test_uplift_on_shadowed_profile():
    t0 = time.perf_counter()
    cfg, fading, stats = system(300, 5, UPLIFT_BETA_AR, UPLIFT_BETA_RB, p_p=10.0)
    rep = improvement_report(cfg, stats, fading, 10.0, p_p=10.0)
    af, df = rep["AF"].uplift_percent, rep["DF"].uplift_percent
    elapsed = time.perf_counter() - t0
    ok_af, ok_df = abs(af - 34.8) <= 5, abs(df - 89.2) <= 5
    ok = ok_af and ok_df and elapsed <= 300
    report(9, ok, f"AF {af:.1f}% ({'in' if ok_af else 'outside'} band), "
           f"DF {df:.1f}% ({'in' if ok_df else 'outside'} band), {elapsed:.0f}s")
    assert ok


def test_relay_gain_normalisation():
    cfg, fading, stats = system(8, 2, [1.0, 0.5], [0.7, 0.3])
    pw = PowerProfile(np.array([1.0, 2.0]), np.array([0.5, 1.5]), 4.0, 1.0)
    emp = rho_af_empirical(cfg, fading, pw, trials=10_000)
    rho2 = af_rho_squared(cfg, stats, fading, pw)
    ok = emp.contains(rho2)
    report(10, ok, f"analytic {rho2:.6f} vs empirical {emp.mean:.6f}+-{emp.half_width_95:.6f}")
    assert ok


def test_property_suites():
    rng = np.random.default_rng(11)
    checks = {}

    ident = []
    for _ in range(200):
        N = int(rng.integers(1, 8))
        bA, bB = rng.uniform(1e-4, 3, N), rng.uniform(1e-4, 3, N)
        _, fading, st = system(64, N, bA, bB, p_p=float(rng.uniform(1e-3, 100)))
        ident.append(np.max(np.abs(st.sigma2_AR + st.sigma2tilde_AR - bA) / bA))
        ident.append(np.max(np.abs(st.sigma2_RB + st.sigma2tilde_RB - bB) / bB))
    checks["estimate split"] = max(ident) <= 1e-12

    checks["large-array averages"] = all(
        lemma1_diagnostics(10_000, sx, sy, trials=100, seed=s).within(3.0, sx, sy)
        for s, (sx, sy) in enumerate([(1.0, 1.0), (0.5, 2.0), (2.0, 0.25)]))

    cfg, fading, stats = system(64, 3, [1.0, 0.2, 0.05], [0.1, 0.7, 0.4])
    runs = [allocate_af(cfg, stats, fading, 20.0, p_p=1.0),
            allocate_df(cfg, stats, fading, 20.0, p_p=1.0)]
    checks["allocations"] = all(
        r.total_power <= 20.0 * (1 + 1e-6) and min(r.p_A.min(), r.p_B.min(), r.p_r) > 0
        and bool(np.all(np.diff(r.objective_trace) >= -1e-12)) for r in runs)

    exp = ExperimentConfig("mc", "p_u_db", (-5.0, 5.0), M=16, N=2, trials=500, seed=3)
    checks["csv determinism"] = render_csv(run_experiment(exp)) == render_csv(run_experiment(exp))

    ok = all(checks.values())
    report(11, ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))
    assert ok
