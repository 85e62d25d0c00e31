"""Decode-and-forward spectral efficiency in the large-array regime.

The first-phase (multiple access) rates use the deterministic equivalents
of the relay's combined signal; the second-phase broadcast rates are exact.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .af import af_approx_rate, af_low_snr_limit, half_log2, swap_roles
from .model import EstimationStats, FadingProfile, PowerProfile, SystemConfig


@dataclass(frozen=True)
class DfPairRates:
    R1: np.ndarray
    R_AR: np.ndarray
    R_RB: np.ndarray
    R_BR: np.ndarray
    R_RA: np.ndarray
    R2: np.ndarray
    R: np.ndarray
    first_phase_binding: np.ndarray
    sum_se: float


def _first_phase_den(stats, fading, powers) -> np.ndarray:
    pA, pB = powers.p_A, powers.p_B
    load = pA * fading.beta_AR + pB * fading.beta_RB
    others = load.sum() - load
    return (stats.sigma2_AR + stats.sigma2_RB) * (
        pA * stats.sigma2tilde_AR + pB * stats.sigma2tilde_RB + others + 1.0)


def first_phase_sinr(stats: EstimationStats, fading: FadingProfile, powers: PowerProfile,
                     M: int):
    """(sum-rate SINR, A-uplink SINR, B-uplink SINR) per pair."""
    sA, sB = stats.sigma2_AR, stats.sigma2_RB
    ss = sA * sB
    sigA = powers.p_A * (M * sA**2 + ss)
    sigB = powers.p_B * (M * sB**2 + ss)
    den = _first_phase_den(stats, fading, powers)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = [np.where(x > 0, x / den, 0.0) for x in (sigA + sigB, sigA, sigB)]
    return tuple(out)


def _downlink_sinr_A(stats, fading, p_r, M) -> np.ndarray:
    """Relay-to-T_A SINR for every pair."""
    total = np.sum(stats.sigma2_AR + stats.sigma2_RB)
    num = p_r * M * stats.sigma2_AR**2
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(num > 0, num / ((p_r * fading.beta_AR + 1.0) * total), 0.0)


def df_rho_squared(cfg: SystemConfig, stats: EstimationStats, p_r: float) -> float:
    total = cfg.M * float(np.sum(stats.sigma2_AR + stats.sigma2_RB))
    return p_r / total if total > 0 else 0.0


def df_second_phase_sinr(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                         powers: PowerProfile, pair: int | None = None, side: str = "A"):
    """Exact relay-to-user SINR, from the signal and variance terms directly.

    Desired |E{g^T ghat*}|^2 = M^2 sigma^4; the estimation-error and residual
    self-interference variances are M beta sigma^2 for the matching and the
    opposite hop; the other pairs add M beta (sigma_AR,j^2 + sigma_RB,j^2).
    """
    if side == "B":
        stats, fading, powers = swap_roles(stats, fading, powers)
    elif side != "A":
        raise ValueError("side must be 'A' or 'B'")
    M = cfg.M
    s_own, s_other = stats.sigma2_AR, stats.sigma2_RB
    beta = fading.beta_AR
    rho2 = df_rho_squared(cfg, stats, powers.p_r)
    if rho2 == 0:
        return np.zeros_like(s_own) if pair is None else 0.0
    both = s_own + s_other
    interf = M * beta * (both.sum() - both)
    variance = M * beta * s_own + M * beta * s_other
    desired = (M * s_own) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(desired > 0, desired / (variance + interf + 1.0 / rho2), 0.0)
    sinr = np.where(np.isfinite(sinr), sinr, 0.0)
    return sinr if pair is None else float(sinr[pair])


def combine_pair_rates(R1, R_AR, R_RB, R_BR, R_RA, overhead: float,
                       pairing: str = "theorem") -> DfPairRates:
    """Min-combine link rates into pair rates.

    ``pairing="theorem"`` routes A's data over (A->R, R->B) and B's over
    (B->R, R->A).  ``"printed"`` pairs each user's uplink with its own
    downlink, which is how the optimisation program is typeset.
    """
    if pairing == "theorem":
        R2 = np.minimum(R_AR, R_RB) + np.minimum(R_BR, R_RA)
    elif pairing == "printed":
        R2 = np.minimum(R_AR, R_RA) + np.minimum(R_BR, R_RB)
    else:
        raise ValueError("pairing must be 'theorem' or 'printed'")
    R = np.minimum(R1, R2)
    return DfPairRates(R1, R_AR, R_RB, R_BR, R_RA, R2, R, R1 <= R2,
                       overhead * float(np.sum(R)))


def df_approx_rates(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                    powers: PowerProfile, pairing: str = "theorem") -> DfPairRates:
    s1, sAR, sBR = first_phase_sinr(stats, fading, powers, cfg.M)
    sRA = _downlink_sinr_A(stats, fading, powers.p_r, cfg.M)
    sw_stats, sw_fading, _ = swap_roles(stats, fading, powers)
    sRB = _downlink_sinr_A(sw_stats, sw_fading, powers.p_r, cfg.M)
    return combine_pair_rates(half_log2(s1), half_log2(sAR), half_log2(sRB),
                              half_log2(sBR), half_log2(sRA), cfg.overhead, pairing)


def df_low_power_limit(cfg: SystemConfig, stats: EstimationStats, powers: PowerProfile):
    """Pair rate as both user powers vanish (first phase binds)."""
    sA, sB = stats.sigma2_AR, stats.sigma2_RB
    M = cfg.M
    num = powers.p_A * sA * (M * sA + sB) + powers.p_B * sB * (sA + M * sB)
    with np.errstate(divide="ignore", invalid="ignore"):
        arg = np.where(num > 0, num / (sA + sB), 0.0)
    return half_log2(arg)


@dataclass(frozen=True)
class LowSnrComparison:
    af_sum: np.ndarray
    df_sum: np.ndarray
    af_limit: np.ndarray
    df_limit: np.ndarray
    product_bound: np.ndarray
    af_exceeds: np.ndarray


def low_snr_comparison(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                       powers: PowerProfile) -> LowSnrComparison:
    """Per-pair AF (both directions) against DF at small user powers."""
    af = af_approx_rate(cfg, stats, fading, powers)
    df = df_approx_rates(cfg, stats, fading, powers)
    lim_A, lim_B = af_low_snr_limit(cfg, stats, powers)
    xA = powers.p_A * cfg.M * stats.sigma2_AR
    xB = powers.p_B * cfg.M * stats.sigma2_RB
    af_sum = af.R_A + af.R_B
    return LowSnrComparison(
        af_sum=af_sum,
        df_sum=df.R,
        af_limit=lim_A + lim_B,
        df_limit=df_low_power_limit(cfg, stats, powers),
        product_bound=0.5 * np.log2((1 + xA) * (1 + xB)),
        af_exceeds=af_sum > df.R,
    )
