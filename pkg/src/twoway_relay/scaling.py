"""Power-scaling laws: scaled-power rates, their asymptotic forms and limits.

Each asymptotic expression is written once against an ``mpow(e)`` hook that
returns M**e at a finite M, or the limit of M**e (0, 1 or inf) as M grows.
The same code therefore yields both the finite-M asymptotic rate and the
limiting sum SE.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .af import af_approx_rate, half_log2
from .df import df_approx_rates
from .model import (FadingProfile, Scenario, ScalingSpec, SystemConfig,
                    estimation_stats)

BOUNDARY_TOL = 1e-12
PROTOCOLS = ("AF", "DF")


class LimitKind(str, enum.Enum):
    ZERO = "ZeroLimit"
    FINITE = "FiniteLimit"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class RegimeClass:
    kind: LimitKind
    limit_value: float | None = None

    def __post_init__(self):
        if (self.kind is LimitKind.FINITE) != (self.limit_value is not None):
            raise ValueError("limit_value must be given exactly for a finite limit")


def _check_protocol(protocol: str) -> str:
    p = protocol.upper()
    if p not in PROTOCOLS:
        raise ValueError(f"protocol must be one of {PROTOCOLS}")
    return p


def compare_to_one(x) -> int:
    """Sign of x - 1, exact for Fractions/ints, with a small band for floats."""
    if isinstance(x, (int, Fraction)):
        return (x > 1) - (x < 1)
    d = float(x) - 1.0
    if abs(d) <= BOUNDARY_TOL:
        return 0
    return 1 if d > 0 else -1


def _sign_exponent(e) -> int:
    """Sign of an exponent of M with the same boundary convention."""
    return compare_to_one(e + 1)


def finite_mpow(M: float) -> Callable:
    return lambda e: float(M) ** float(e)


def limit_mpow(e) -> float:
    s = _sign_exponent(e)
    return 1.0 if s == 0 else (np.inf if s > 0 else 0.0)


# ---------------------------------------------------------------------------
# scaled rates


def scaled_rate(protocol: str, spec: ScalingSpec, cfg: SystemConfig, fading: FadingProfile,
                M_eval: int) -> float:
    """Sum SE of the large-M approximation with the scaled powers at M = M_eval."""
    protocol = _check_protocol(protocol)
    cfg_M = cfg.with_M(M_eval)
    powers = spec.powers_at(M_eval, cfg.N)
    stats = estimation_stats(cfg_M, fading, powers.p_p)
    if protocol == "AF":
        return af_approx_rate(cfg_M, stats, fading, powers).sum_se
    return df_approx_rates(cfg_M, stats, fading, powers).sum_se


# ---------------------------------------------------------------------------
# AF asymptotic expressions (A-side; B-side by swapping the hops)


def _relay_noise_sum(qA, qB):
    """sum_n q_AR q_RB (q_AR + q_RB) for squared link gains q (sigma^2 or beta^2)."""
    return np.sum(qA * qB * (qA + qB))


def _squared_gains(spec, cfg, fading):
    """Per-user link gains entering the asymptotic forms, and their prefactor.

    Scenario B keeps the estimate variances sigma^2; with a vanishing pilot
    power sigma^2 ~ tau_p p_p beta^2, so the other scenarios use beta^2 and
    carry the tau_p E_p factor separately.
    """
    if spec.scenario is Scenario.B:
        st = estimation_stats(cfg, fading, spec.E_p)
        return st.sigma2_AR, st.sigma2_RB, 1.0
    return fading.beta_AR**2, fading.beta_RB**2, cfg.tau_p * spec.E_p


def _af_scenario_A_sinr(spec, cfg, bA, bB, mpow):
    N = bA.size
    off = ~np.eye(N, dtype=bool)
    B_hat = 1 / bB + 1 / bA
    C_hat = 4 * bA / bB**2
    inter = ((bA + bB)[None, :] / bB[:, None] ** 2
             + (bA**4 * bB**2 + bA**2 * bB**4)[None, :] / (bA**3 * bB**4)[:, None])
    D_hat = np.sum(np.where(off, inter, 0.0), axis=1)
    E_hat = (1 / (spec.E_u * bB**2)
             + _relay_noise_sum(bA**2, bB**2) / (spec.E_r * bA**4 * bB**4))
    return cfg.tau_p * spec.E_p * mpow(1 - spec.gamma) / (B_hat + C_hat + D_hat + E_hat)


def _af_noise_limited_sinr(spec, qA, qB, k, mpow):
    """Scenarios B and C: only the user-noise and relay-noise parts remain."""
    g = 0 if spec.scenario is Scenario.B else spec.gamma
    user_part = mpow(spec.alpha + g - 1) / (k * spec.E_u * qB)
    relay_part = (mpow(spec.beta_exp + g - 1) * _relay_noise_sum(qA, qB)
                  / (k * spec.E_r * qA**2 * qB**2))
    with np.errstate(divide="ignore"):
        return 1.0 / (user_part + relay_part)


def _af_asymptotic(spec, cfg, fading, mpow):
    if spec.scenario is Scenario.A:
        a, b = fading.beta_AR, fading.beta_RB
        sinr_A = _af_scenario_A_sinr(spec, cfg, a, b, mpow)
        sinr_B = _af_scenario_A_sinr(spec, cfg, b, a, mpow)
    else:
        qA, qB, k = _squared_gains(spec, cfg, fading)
        sinr_A = _af_noise_limited_sinr(spec, qA, qB, k, mpow)
        sinr_B = _af_noise_limited_sinr(spec, qB, qA, k, mpow)
    return cfg.overhead * float(np.sum(half_log2(sinr_A) + half_log2(sinr_B)))


# ---------------------------------------------------------------------------
# DF asymptotic expressions


def _df_link_snrs(spec, cfg, fading, mpow):
    """Per-pair (first-phase, AR, BR, RA, RB) SINRs of the scaled DF forms."""
    qA, qB, k = _squared_gains(spec, cfg, fading)
    up_den = qA + qB
    total = np.sum(qA + qB)
    relay_A = relay_B = 1.0
    if spec.scenario is Scenario.A:
        k = k * mpow(1 - spec.gamma)
        up, down = k * spec.E_u, k * spec.E_r
        up_den = up_den * (spec.E_u * np.sum(fading.beta_AR + fading.beta_RB) + 1.0)
        relay_A = spec.E_r * fading.beta_AR + 1.0
        relay_B = spec.E_r * fading.beta_RB + 1.0
    else:
        g = 0 if spec.scenario is Scenario.B else spec.gamma
        up = k * spec.E_u * mpow(1 - spec.alpha - g)
        down = k * spec.E_r * mpow(1 - spec.beta_exp - g)
    return (up * (qA**2 + qB**2) / up_den,
            up * qA**2 / up_den,
            up * qB**2 / up_den,
            down * qA**2 / (relay_A * total),
            down * qB**2 / (relay_B * total))


def _df_asymptotic(spec, cfg, fading, mpow):
    s1, sAR, sBR, sRA, sRB = _df_link_snrs(spec, cfg, fading, mpow)
    R1 = half_log2(s1)
    R2 = np.minimum(half_log2(sAR), half_log2(sRB)) + np.minimum(half_log2(sBR), half_log2(sRA))
    return cfg.overhead * float(np.sum(np.minimum(R1, R2)))


def asymptotic_rate(protocol: str, spec: ScalingSpec, cfg: SystemConfig,
                    fading: FadingProfile, M: float) -> float:
    """Sum SE of the scenario's asymptotic expression at a finite M."""
    protocol = _check_protocol(protocol)
    cfg_M = cfg.with_M(int(M))
    fn = _af_asymptotic if protocol == "AF" else _df_asymptotic
    return fn(spec, cfg_M, fading, finite_mpow(M))


def af_noise_parts(spec: ScalingSpec, cfg: SystemConfig, fading: FadingProfile, M: float):
    """(user-noise part, relay-noise part) of the A-side denominator in scenarios B and C."""
    if spec.scenario is Scenario.A:
        raise ValueError("scenario A has no noise-only decomposition")
    qA, qB, k = _squared_gains(spec, cfg, fading)
    g = 0 if spec.scenario is Scenario.B else float(spec.gamma)
    user = float(M) ** (float(spec.alpha) + g - 1) / (k * spec.E_u * qB)
    relay = (float(M) ** (float(spec.beta_exp) + g - 1) * _relay_noise_sum(qA, qB)
             / (k * spec.E_r * qA**2 * qB**2))
    return user, relay


# ---------------------------------------------------------------------------
# classification and limits


def classify(spec: ScalingSpec) -> LimitKind:
    """Regime of the sum SE as M grows, from the scaling exponents alone."""
    if spec.scenario is Scenario.A:
        s = compare_to_one(spec.gamma)
    elif spec.scenario is Scenario.B:
        s = max(compare_to_one(spec.alpha), compare_to_one(spec.beta_exp))
    else:
        s = max(compare_to_one(spec.alpha + spec.gamma),
                compare_to_one(spec.beta_exp + spec.gamma))
    return {1: LimitKind.ZERO, 0: LimitKind.FINITE, -1: LimitKind.UNBOUNDED}[s]


def asymptotic_limit(protocol: str, spec: ScalingSpec, cfg: SystemConfig,
                     fading: FadingProfile) -> RegimeClass:
    """Regime class and, when finite, the limiting sum SE."""
    protocol = _check_protocol(protocol)
    kind = classify(spec)
    if kind is not LimitKind.FINITE:
        return RegimeClass(kind)
    fn = _af_asymptotic if protocol == "AF" else _df_asymptotic
    return RegimeClass(kind, fn(spec, cfg, fading, limit_mpow))


def af_equal_fading_limit(cfg: SystemConfig, E_u: float, E_r: float, p_p: float) -> float:
    """Sum-SE limit with p_u = E_u/M, p_r = E_r/M and unit fading on every link."""
    x = cfg.tau_p * p_p
    s2 = x / (x + 1.0)
    return cfg.overhead * cfg.N * float(np.log2(1 + s2 * E_u * E_r / (E_r + 2 * cfg.N * E_u)))


def af_user_limited(cfg, fading, spec: ScalingSpec) -> np.ndarray:
    """Per-user A-side limit when only the user-noise part survives."""
    _, qB, k = _squared_gains(spec, cfg, fading)
    return half_log2(k * spec.E_u * qB)


def af_relay_limited(cfg, fading, spec: ScalingSpec) -> np.ndarray:
    """Per-user A-side limit when only the relay-noise part survives."""
    qA, qB, k = _squared_gains(spec, cfg, fading)
    return half_log2(k * spec.E_r * qA**2 * qB**2 / _relay_noise_sum(qA, qB))


# ---------------------------------------------------------------------------
# tradeoff between pilot and data power reductions


@dataclass(frozen=True)
class TradeoffReport:
    regimes: list[RegimeClass]
    M_grid: np.ndarray
    rates: np.ndarray          # (n_specs, n_M)
    gaps: np.ndarray           # max pairwise gap per M
    equivalent: bool

    @property
    def gaps_shrinking(self) -> bool:
        return bool(np.all(np.diff(self.gaps) <= 0))


def _limits_match(a: RegimeClass, b: RegimeClass, rtol=1e-9) -> bool:
    if a.kind is not b.kind:
        return False
    if a.kind is not LimitKind.FINITE:
        return True
    return bool(np.isclose(a.limit_value, b.limit_value, rtol=rtol, atol=0))


def tradeoff_equivalence(protocol: str, specs: Sequence[ScalingSpec], cfg: SystemConfig,
                         fading: FadingProfile,
                         M_grid: Sequence[int] = (100, 1000, 10_000, 100_000)) -> TradeoffReport:
    """Compare specs sharing the user+pilot and relay+pilot exponent sums."""
    if not specs:
        raise ValueError("need at least one spec")
    ref = specs[0]
    for s in specs[1:]:
        for x, y in ((s.alpha + s.gamma, ref.alpha + ref.gamma),
                     (s.beta_exp + s.gamma, ref.beta_exp + ref.gamma)):
            if abs(float(x) - float(y)) > BOUNDARY_TOL:
                raise ValueError("specs do not share their exponent sums")
    regimes = [asymptotic_limit(protocol, s, cfg, fading) for s in specs]
    grid = np.asarray(M_grid, dtype=int)
    rates = np.array([[scaled_rate(protocol, s, cfg, fading, int(M)) for M in grid]
                      for s in specs])
    gaps = rates.max(axis=0) - rates.min(axis=0)
    equivalent = all(_limits_match(regimes[0], r) for r in regimes[1:])
    return TradeoffReport(regimes, grid, rates, gaps, equivalent)
