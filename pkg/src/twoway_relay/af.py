"""Amplify-and-forward spectral efficiency: exact finite-M terms and large-M form.

Everything is written for the A-side user of each pair (T_A,i receiving
from T_B,i).  The B-side follows from a role swap of the two hops and the
two user powers, see :func:`swap_roles`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EstimationStats, FadingProfile, PowerProfile, SystemConfig

INTERFERER_POWER_MODES = ("literal", "transmitter")
TERM_FORMS = ("derived", "printed")


def swap_roles(stats: EstimationStats, fading: FadingProfile, powers: PowerProfile):
    """Exchange the AR and RB hops together with p_A and p_B."""
    return stats.swapped(), fading.swapped(), powers.swapped()


@dataclass(frozen=True)
class AfExactTerms:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    E: np.ndarray

    @property
    def sinr(self) -> np.ndarray:
        return _ratio(self.A, self.B + self.C + self.D + self.E)


@dataclass(frozen=True)
class AfApproxTerms:
    Btilde: np.ndarray
    Ctilde: np.ndarray
    Dtilde: np.ndarray
    Etilde: np.ndarray
    numerator: np.ndarray

    @property
    def sinr(self) -> np.ndarray:
        return _ratio(self.numerator, self.Btilde + self.Ctilde + self.Dtilde + self.Etilde)


@dataclass(frozen=True)
class AfRates:
    R_A: np.ndarray
    R_B: np.ndarray
    sinr_A: np.ndarray
    sinr_B: np.ndarray
    sum_se: float


def _ratio(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(num > 0, num / den, 0.0)
    return np.where(np.isfinite(out), out, 0.0)


def half_log2(sinr) -> np.ndarray:
    return 0.5 * np.log2(1.0 + np.asarray(sinr, dtype=float))


# ---------------------------------------------------------------------------
# relay normalisation


def rho_denominator_parts(M: int, stats: EstimationStats, fading: FadingProfile,
                          powers: PowerProfile):
    """Per-user forwarded signal power (a, b) and the forwarded relay noise."""
    sA, tA = stats.sigma2_AR, stats.sigma2tilde_AR
    sB, tB = stats.sigma2_RB, stats.sigma2tilde_RB
    pA, pB = powers.p_A, powers.p_B
    M1, M3 = M + 1.0, M + 3.0
    ss = sA * sB
    others = ss.sum() - ss
    a = M * ss * (M1 * M3 * (sA * pA + sB * pB) + 2 * M1 * (tA * pA + tB * pB))
    b = 2 * M * M1 * (fading.beta_AR * pA + fading.beta_RB * pB) * others
    noise = 2 * M * M1 * ss.sum()
    return a, b, noise


def af_rho_squared(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                   powers: PowerProfile) -> float:
    """Squared AF amplification factor meeting the average relay power budget."""
    if powers.p_r == 0:
        return 0.0
    a, b, noise = rho_denominator_parts(cfg.M, stats, fading, powers)
    den = float(np.sum(a + b) + noise)
    if den <= 0:
        # no usable channel estimates; nothing is forwarded
        return float("inf")
    return powers.p_r / den


def _inv_rho2(cfg, stats, fading, powers) -> float:
    rho2 = af_rho_squared(cfg, stats, fading, powers)
    if rho2 == 0:
        return float("inf")
    return 1.0 / rho2


# ---------------------------------------------------------------------------
# exact finite-M terms (A-side)


def desired_term(M, stats, powers):
    return powers.p_B * M**2 * (M + 1.0) ** 2 * stats.sigma2_AR**2 * stats.sigma2_RB**2


def estimation_error_subterms(M, stats, fading, powers, form="derived") -> list[np.ndarray]:
    """Summands of p_B Var(g_AR^T F g_RB).

    ``form="printed"`` returns the ten summands exactly as typeset.
    ``form="derived"`` returns the four-term result of computing the fourth
    moments directly; it agrees with simulation at small M and reduces to
    the large-M estimation-error term for any pair of hop qualities.
    """
    sA, tA = stats.sigma2_AR, stats.sigma2tilde_AR
    sB, tB = stats.sigma2_RB, stats.sigma2tilde_RB
    bA, bB = fading.beta_AR, fading.beta_RB
    pB = powers.p_B
    M1 = M + 1.0
    S = np.sum(sA * sB)
    if form == "derived":
        return [
            pB * 2 * M * M1 * bA * bB * S,
            pB * 2 * M * M1**2 * sA**2 * sB**2,
            pB * M * M1**2 * tA * sA * sB**2,
            pB * M * M1**2 * tB * sA**2 * sB,
        ]
    _check_form(form)
    return [
        pB * 2 * M * M1 * bA * bB * S,
        pB * M * M1 * sA * sB * (bA * sB + bB * sA),
        pB * M**2 * sA * sB * tA * tB,
        pB * 2 * M * M1**2 * sA**2 * sB**2,
        pB * 2 * M * M1 * sA**2 * tA * sB,
        pB * 2 * M * M1 * sA * tA * sB**2,
        pB * 2 * M * sA * tA * sB * tB,
        pB * M**2 * M1 * sA**2 * tA * sB,
        pB * M**2 * M1 * sA * tA * sB**2,
        pB * M**2 * sA * tA * sB * tB,
    ]


def self_interference_subterms(M, stats, fading, powers, form="derived") -> list[np.ndarray]:
    """Summands of p_A E|g_AR^T F g_AR|^2 (the mean of g^T F g is zero)."""
    sA, tA = stats.sigma2_AR, stats.sigma2tilde_AR
    sB = stats.sigma2_RB
    pA = powers.p_A
    M1 = M + 1.0
    S = np.sum(sA * sB)
    if form == "derived":
        return [
            4 * pA * M * M1 * fading.beta_AR**2 * S,
            4 * pA * M * M1**2 * sA**2 * sB * fading.beta_AR,
        ]
    _check_form(form)
    return [
        4 * pA * M * M1 * fading.beta_AR**2 * S,
        4 * pA * sA * sB * M * M1 * ((M + 2.0) * sA**2 + (M + 5.0) * sA * tA + tA**2),
    ]


def _check_form(form):
    if form not in TERM_FORMS:
        raise ValueError(f"form must be one of {TERM_FORMS}")


def _interferer_weights(powers: PowerProfile, mode: str):
    """(N, N) matrices w[i, j] of the power attached to interferer j at user i."""
    N = powers.p_A.size
    if mode == "literal":
        wA = np.repeat(powers.p_A[:, None], N, axis=1)
        wB = np.repeat(powers.p_B[:, None], N, axis=1)
    elif mode == "transmitter":
        wA = np.repeat(powers.p_A[None, :], N, axis=0)
        wB = np.repeat(powers.p_B[None, :], N, axis=0)
    else:
        raise ValueError(f"interferer_power must be one of {INTERFERER_POWER_MODES}")
    return wA, wB


def inter_user_subterms(M, stats, fading, powers, interferer_power="transmitter") -> list[np.ndarray]:
    """Three j != i sums of the inter-user interference, each as an N-vector."""
    sA, tA = stats.sigma2_AR, stats.sigma2tilde_AR
    sB, tB = stats.sigma2_RB, stats.sigma2tilde_RB
    bA, bB = fading.beta_AR, fading.beta_RB
    M1, M3 = M + 1.0, M + 3.0
    ss = sA * sB
    N = ss.size
    wA, wB = _interferer_weights(powers, interferer_power)
    off = ~np.eye(N, dtype=bool)

    # sum over n not in {i, j}
    rest = ss.sum() - ss[:, None] - ss[None, :]
    mix_beta = wA * bA[None, :] + wB * bB[None, :]
    d1 = 2 * M * M1 * bA[:, None] * mix_beta * rest
    d2 = M * ss[:, None] * mix_beta * (M1 * M3 * sA[:, None] + 2 * M1 * tA[:, None])
    d3 = M * bA[:, None] * ss[None, :] * (
        M1 * M3 * (wA * sA[None, :] + wB * sB[None, :])
        + 2 * M1 * (wA * tA[None, :] + wB * tB[None, :])
    )
    return [np.sum(np.where(off, d, 0.0), axis=1) for d in (d1, d2, d3)]


def noise_subterms(M, stats, fading, inv_rho2: float) -> list[np.ndarray]:
    sA, tA = stats.sigma2_AR, stats.sigma2tilde_AR
    sB = stats.sigma2_RB
    M1, M3 = M + 1.0, M + 3.0
    ss = sA * sB
    return [
        2 * M * M1 * fading.beta_AR * (ss.sum() - ss),
        M * ss * (M1 * M3 * sA + 2 * M1 * tA),
        np.full_like(ss, inv_rho2),
    ]


def _one_side_exact(cfg, stats, fading, powers, interferer_power, form) -> AfExactTerms:
    M = float(cfg.M)
    inv_rho2 = _inv_rho2(cfg, stats, fading, powers)
    return AfExactTerms(
        A=desired_term(M, stats, powers),
        B=np.sum(estimation_error_subterms(M, stats, fading, powers, form), axis=0),
        C=np.sum(self_interference_subterms(M, stats, fading, powers, form), axis=0),
        D=np.sum(inter_user_subterms(M, stats, fading, powers, interferer_power), axis=0),
        E=np.sum(noise_subterms(M, stats, fading, inv_rho2), axis=0),
    )


def af_exact_terms(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                   powers: PowerProfile, side: str = "A",
                   interferer_power: str = "transmitter",
                   form: str = "derived") -> AfExactTerms:
    """Exact finite-M SINR components for every user on one side.

    ``interferer_power="transmitter"`` weights the j != i interference sums
    with the interfering users' powers; ``"literal"`` uses the receiving
    pair's own powers, as typeset.  ``form`` selects the derived or the
    printed estimation-error and self-interference terms.
    """
    if side == "A":
        return _one_side_exact(cfg, stats, fading, powers, interferer_power, form)
    if side == "B":
        return _one_side_exact(cfg, *swap_roles(stats, fading, powers), interferer_power, form)
    raise ValueError("side must be 'A' or 'B'")


def af_exact_rate(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                  powers: PowerProfile, interferer_power: str = "transmitter",
                  form: str = "derived") -> AfRates:
    tA = af_exact_terms(cfg, stats, fading, powers, "A", interferer_power, form)
    tB = af_exact_terms(cfg, stats, fading, powers, "B", interferer_power, form)
    sA, sB = tA.sinr, tB.sinr
    R_A, R_B = half_log2(sA), half_log2(sB)
    return AfRates(R_A, R_B, sA, sB, cfg.overhead * float(np.sum(R_A + R_B)))


# ---------------------------------------------------------------------------
# large-M approximation


def _one_side_approx(M, stats, fading, powers) -> AfApproxTerms:
    sA, sB = stats.sigma2_AR, stats.sigma2_RB
    bA, bB = fading.beta_AR, fading.beta_RB
    pA, pB, pr = powers.p_A, powers.p_B, powers.p_r
    N = sA.size
    off = ~np.eye(N, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        Bt = pB * (bB / sB + bA / sA)
        Ct = 4 * pA * bA / sB
        q = (sA**2 * sB**2)[:, None]
        termA = pA[None, :] * (bA[None, :] / sB[:, None]
                               + (sA**2 * sB)[None, :] * bA[:, None] / q)
        termB = pB[None, :] * (bB[None, :] / sB[:, None]
                               + (sA * sB**2)[None, :] * bA[:, None] / q)
        Dt = np.sum(np.where(off, termA + termB, 0.0), axis=1)
        relay = np.sum(sA * sB * (pA * sA + pB * sB))
        Et = 1.0 / sB + (relay / pr if pr > 0 else np.inf) / (sA**2 * sB**2)
    return AfApproxTerms(Bt, Ct, Dt, Et, pB * M)


def af_approx_terms(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                    powers: PowerProfile, side: str = "A") -> AfApproxTerms:
    if side == "A":
        return _one_side_approx(float(cfg.M), stats, fading, powers)
    if side == "B":
        return _one_side_approx(float(cfg.M), *swap_roles(stats, fading, powers))
    raise ValueError("side must be 'A' or 'B'")


def af_approx_rate(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                   powers: PowerProfile) -> AfRates:
    sA = af_approx_terms(cfg, stats, fading, powers, "A").sinr
    sB = af_approx_terms(cfg, stats, fading, powers, "B").sinr
    R_A, R_B = half_log2(sA), half_log2(sB)
    return AfRates(R_A, R_B, sA, sB, cfg.overhead * float(np.sum(R_A + R_B)))


def af_low_snr_limit(cfg: SystemConfig, stats: EstimationStats, powers: PowerProfile):
    """Per-user (R_A, R_B) as the user powers vanish with the relay power fixed."""
    M = cfg.M
    return (half_log2(powers.p_B * M * stats.sigma2_RB),
            half_log2(powers.p_A * M * stats.sigma2_AR))
