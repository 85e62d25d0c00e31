"""Monte Carlo signal-chain simulation with maximum-ratio relay processing.

Each trial draws from its own counter-based stream keyed by (seed, trial),
so any subset of trials can be regenerated or run in parallel and the
reduction order is fixed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .af import af_rho_squared, half_log2
from .df import combine_pair_rates, df_rho_squared, df_second_phase_sinr
from .model import EstimationStats, FadingProfile, PowerProfile, SystemConfig, estimation_stats

Z95 = 1.96
DEFAULT_TRIALS = 10_000
_BATCH = 256


@dataclass(frozen=True)
class ChannelDraw:
    G_AR: np.ndarray
    G_RB: np.ndarray
    Ghat_AR: np.ndarray
    Ghat_RB: np.ndarray
    E_AR: np.ndarray
    E_RB: np.ndarray


@dataclass(frozen=True)
class McEstimate:
    mean: float
    half_width_95: float
    trials: int

    @classmethod
    def from_samples(cls, x) -> "McEstimate":
        x = np.asarray(x, dtype=float)
        T = x.size
        sd = float(np.std(x, ddof=1)) if T > 1 else 0.0
        return cls(float(np.mean(x)), Z95 * sd / np.sqrt(T), T)

    @property
    def low(self) -> float:
        return self.mean - self.half_width_95

    @property
    def high(self) -> float:
        return self.mean + self.half_width_95

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent generator for one trial."""
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) | int(trial)))


def complex_normal(rng: np.random.Generator, shape, var) -> np.ndarray:
    """CN(0, var) entries; ``var`` broadcasts against ``shape``."""
    scale = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)


def pilot_matrix(tau_p: int, n_cols: int) -> np.ndarray:
    """Orthonormal pilot columns taken from the unitary DFT of size tau_p."""
    k = np.arange(tau_p)
    F = np.exp(-2j * np.pi * np.outer(k, k) / tau_p) / np.sqrt(tau_p)
    return F[:, :n_cols]


def sample_channels(cfg: SystemConfig, fading: FadingProfile, stats: EstimationStats,
                    rng: np.random.Generator, mode: str = "direct",
                    p_p: float | None = None) -> ChannelDraw:
    """One realisation of true channels, MMSE estimates and errors.

    ``mode="direct"`` samples estimate and error from their marginal laws.
    ``mode="pilot"`` simulates the training phase and applies the MMSE
    estimator; it needs the pilot power ``p_p``.
    """
    M, N = cfg.M, cfg.N
    if mode == "direct":
        Gh_AR = complex_normal(rng, (M, N), stats.sigma2_AR)
        Gh_RB = complex_normal(rng, (M, N), stats.sigma2_RB)
        E_AR = complex_normal(rng, (M, N), stats.sigma2tilde_AR)
        E_RB = complex_normal(rng, (M, N), stats.sigma2tilde_RB)
        return ChannelDraw(Gh_AR + E_AR, Gh_RB + E_RB, Gh_AR, Gh_RB, E_AR, E_RB)
    if mode != "pilot":
        raise ValueError("mode must be 'direct' or 'pilot'")
    if cfg.tau_p < 2 * N:
        raise ValueError("pilot mode needs tau_p >= 2N")
    if p_p is None:
        raise ValueError("pilot mode needs the pilot power p_p")
    G_AR = complex_normal(rng, (M, N), fading.beta_AR)
    G_RB = complex_normal(rng, (M, N), fading.beta_RB)
    Phi = pilot_matrix(cfg.tau_p, 2 * N)
    Phi_A, Phi_B = Phi[:, :N], Phi[:, N:]
    x = cfg.tau_p * p_p
    noise = complex_normal(rng, (M, cfg.tau_p), 1.0)
    Y = np.sqrt(x) * (G_AR @ Phi_A.T + G_RB @ Phi_B.T) + noise

    def estimate(Phi_X, beta):
        gain = np.sqrt(x) * beta / (1.0 + x * beta)
        return (Y @ Phi_X.conj()) * gain[None, :]

    Gh_AR, Gh_RB = estimate(Phi_A, fading.beta_AR), estimate(Phi_B, fading.beta_RB)
    return ChannelDraw(G_AR, G_RB, Gh_AR, Gh_RB, G_AR - Gh_AR, G_RB - Gh_RB)


def _stack_draws(cfg, fading, stats, trials_idx, mode, p_p):
    draws = [sample_channels(cfg, fading, stats, trial_rng(cfg.seed, t), mode, p_p)
             for t in trials_idx]
    return {name: np.stack([getattr(d, name) for d in draws])
            for name in ("G_AR", "G_RB", "Ghat_AR", "Ghat_RB")}


def _batches(trials: int):
    for start in range(0, trials, _BATCH):
        yield range(start, min(start + _BATCH, trials))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("non-finite value in Monte Carlo intermediate")


# ---------------------------------------------------------------------------
# AF chain


@dataclass(frozen=True)
class AfMcResult:
    sinr_A: list[McEstimate]
    sinr_B: list[McEstimate]
    rate_A: list[McEstimate]
    rate_B: list[McEstimate]
    sum_se: McEstimate
    self_interference_mean: np.ndarray  # per user, complex sample mean of g^T F g
    rho2_empirical: McEstimate
    sinr_pooled: McEstimate | None = None  # only when all receivers are exchangeable


def _af_batch_quantities(b, p_A, p_B):
    """Per-draw bilinear forms g_k^T F g_l, row norms of g^T F and relay power."""
    A = np.concatenate([b["Ghat_AR"], b["Ghat_RB"]], axis=2)
    B = np.concatenate([b["Ghat_RB"], b["Ghat_AR"]], axis=2)
    G = np.concatenate([b["G_AR"], b["G_RB"]], axis=2)
    P = np.conj(np.swapaxes(A, 1, 2)) @ G           # A^H g_l
    Q = np.swapaxes(G, 1, 2) @ np.conj(B)           # g_k^T B*
    W = Q @ P                                       # g_k^T F g_l
    KA = np.conj(np.swapaxes(A, 1, 2)) @ A
    KBc = np.conj(np.conj(np.swapaxes(B, 1, 2)) @ B)
    row_norm = np.real(np.einsum("bkl,blm,bkm->bk", Q, KA, np.conj(Q)))
    col_norm = np.real(np.einsum("blk,blm,bmk->bk", np.conj(P), KBc, P))
    frob = np.real(np.einsum("blm,bml->b", KA, KBc))
    w = np.concatenate([p_A, p_B])
    relay_power = col_norm @ w + frob
    return W, row_norm, relay_power


def simulate_af_sum_se(cfg: SystemConfig, fading: FadingProfile, powers: PowerProfile,
                       trials: int = DEFAULT_TRIALS, mode: str = "direct",
                       interferer_power: str = "transmitter",
                       empirical_mean: bool = False) -> AfMcResult:
    """Empirical AF SINR components, rates and sum SE.

    The desired-signal mean defaults to its analytic value M(M+1)sigma^2 sigma^2;
    ``empirical_mean=True`` uses the sample mean instead.  The relay gain
    uses the analytic normalisation.  ``interferer_power`` chooses whether
    the j != i interference is weighted by the interferers' powers
    ("transmitter") or by the receiving pair's powers ("literal").
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    stats = estimation_stats(cfg, fading, powers.p_p)
    M, N = cfg.M, cfg.N
    pA, pB = powers.p_A, powers.p_B
    rho2 = af_rho_squared(cfg, stats, fading, powers)
    inv_rho2 = 1.0 / rho2 if rho2 > 0 else np.inf

    idx = np.arange(N)
    own = np.concatenate([idx, idx + N])        # receiving user k
    partner = np.concatenate([idx + N, idx])    # its desired transmitter
    p_self = np.concatenate([pA, pB])
    p_desired = np.concatenate([pB, pA])
    p_all = np.concatenate([pA, pB])
    pair_of = np.concatenate([idx, idx])

    # interference weight matrix over transmitters l for receiver k
    if interferer_power == "transmitter":
        Wt = np.repeat(p_all[None, :], 2 * N, axis=0)
    elif interferer_power == "literal":
        # T_A,i: p_A,i on A_j, p_B,i on B_j; the B side mirrors it
        Wt = np.empty((2 * N, 2 * N))
        Wt[:N, :N] = pA[:, None]
        Wt[:N, N:] = pB[:, None]
        Wt[N:, :N] = pA[:, None]
        Wt[N:, N:] = pB[:, None]
    else:
        raise ValueError("interferer_power must be 'literal' or 'transmitter'")
    same_pair = pair_of[:, None] == pair_of[None, :]
    Wt = np.where(same_pair, 0.0, Wt)

    des, den_samples, self_mean, relay = [], [], [], []
    for batch in _batches(trials):
        b = _stack_draws(cfg, fading, stats, batch, mode, powers.p_p)
        W, row_norm, relay_power = _af_batch_quantities(b, pA, pB)
        _check_finite(W, row_norm, relay_power)
        s_des = W[:, own, partner]
        s_self = W[:, own, own]
        interf = np.einsum("bkl,kl->bk", np.abs(W) ** 2, Wt)
        des.append(s_des)
        self_mean.append(s_self)
        den_samples.append(p_desired * np.abs(s_des) ** 2 + p_self * np.abs(s_self) ** 2
                           + interf + row_norm)
        relay.append(relay_power)
    s_des = np.concatenate(des)
    s_self = np.concatenate(self_mean)
    X = np.concatenate(den_samples)
    relay = np.concatenate(relay)

    s2 = np.concatenate([stats.sigma2_AR * stats.sigma2_RB] * 2)
    if empirical_mean:
        m = np.abs(s_des.mean(axis=0))
        self_correction = p_self * np.abs(s_self.mean(axis=0)) ** 2
    else:
        m = M * (M + 1.0) * s2
        self_correction = 0.0
    signal = p_desired * m**2
    Xbar = X.mean(axis=0)
    Xhw = Z95 * X.std(axis=0, ddof=1) / np.sqrt(trials) if trials > 1 else np.zeros(2 * N)
    den = Xbar - signal - self_correction + inv_rho2
    with np.errstate(divide="ignore", invalid="ignore"):
        sinr = np.where(signal > 0, signal / den, 0.0)
        sinr_hw = np.where(signal > 0, sinr * Xhw / den, 0.0)
    sinr_est = [McEstimate(float(s), float(h), trials) for s, h in zip(sinr, sinr_hw)]
    rate = half_log2(sinr)
    rate_hw = 0.5 * (half_log2(sinr + sinr_hw) - half_log2(np.maximum(sinr - sinr_hw, 0)))
    rate_est = [McEstimate(float(r), float(h), trials) for r, h in zip(rate, rate_hw)]
    total = McEstimate(cfg.overhead * float(rate.sum()),
                       cfg.overhead * float(rate_hw.sum()), trials)

    rho_mc = McEstimate.from_samples(relay)
    rho2_emp = (McEstimate(powers.p_r / rho_mc.mean,
                           powers.p_r * rho_mc.half_width_95 / rho_mc.mean**2, trials)
                if rho_mc.mean > 0 else McEstimate(0.0, 0.0, trials))
    exchangeable = (fading.is_equal() and not empirical_mean
                    and np.ptp(np.concatenate([pA, pB])) == 0)
    pooled = _pooled_sinr(X, signal, inv_rho2, trials) if exchangeable else None
    return AfMcResult(sinr_est[:N], sinr_est[N:], rate_est[:N], rate_est[N:], total,
                      s_self.mean(axis=0), rho2_emp, pooled)


def _pooled_sinr(X, signal, inv_rho2, trials) -> McEstimate | None:
    """Common SINR estimate under equal fading and equal user powers.

    All receivers are then exchangeable, so the per-draw average of their
    denominator samples estimates the same mean with a tighter interval.
    """
    if signal[0] <= 0:
        return None
    x = X.mean(axis=1)
    den = x.mean() - signal[0] + inv_rho2
    hw = Z95 * x.std(ddof=1) / np.sqrt(trials) if trials > 1 else 0.0
    sinr = signal[0] / den
    return McEstimate(float(sinr), float(sinr * hw / den), trials)


def rho_af_empirical(cfg: SystemConfig, fading: FadingProfile, powers: PowerProfile,
                     trials: int = DEFAULT_TRIALS, mode: str = "direct") -> McEstimate:
    """p_r over the sample mean of ||F y_r||^2 (interval by the delta method)."""
    if powers.p_r == 0:
        return McEstimate(0.0, 0.0, trials)
    stats = estimation_stats(cfg, fading, powers.p_p)
    relay = []
    for batch in _batches(trials):
        b = _stack_draws(cfg, fading, stats, batch, mode, powers.p_p)
        relay.append(_af_batch_quantities(b, powers.p_A, powers.p_B)[2])
    est = McEstimate.from_samples(np.concatenate(relay))
    return McEstimate(powers.p_r / est.mean,
                      powers.p_r * est.half_width_95 / est.mean**2, trials)


# ---------------------------------------------------------------------------
# DF chain


def df_conditional_interference(draw: ChannelDraw, stats: EstimationStats,
                                powers: PowerProfile) -> np.ndarray:
    """E{C + D + E | estimates} per pair for the first-phase combiner."""
    ghA, ghB = draw.Ghat_AR, draw.Ghat_RB
    return _df_conditional_den(ghA[None], ghB[None], stats, powers)[0]


def _df_conditional_den(ghA, ghB, stats, powers):
    pA, pB = powers.p_A, powers.p_B
    nA = np.sum(np.abs(ghA) ** 2, axis=1)    # (b, N)
    nB = np.sum(np.abs(ghB) ** 2, axis=1)
    norms = nA + nB
    HA = np.conj(np.swapaxes(ghA, 1, 2))
    HB = np.conj(np.swapaxes(ghB, 1, 2))
    AA = np.abs(HA @ ghA) ** 2               # |ghat_AR,i^H ghat_AR,j|^2
    BA = np.abs(HB @ ghA) ** 2
    AB = np.abs(HA @ ghB) ** 2
    BB = np.abs(HB @ ghB) ** 2
    N = pA.size
    off = ~np.eye(N, dtype=bool)
    est_err = (pA * stats.sigma2tilde_AR + pB * stats.sigma2tilde_RB) * norms
    inter = (pA[None, None, :] * (AA + BA + norms[:, :, None] * stats.sigma2tilde_AR[None, None, :])
             + pB[None, None, :] * (AB + BB + norms[:, :, None] * stats.sigma2tilde_RB[None, None, :]))
    inter = np.sum(np.where(off[None], inter, 0.0), axis=2)
    return est_err + inter + norms


def df_conditional_interference_nested(draw: ChannelDraw, stats: EstimationStats,
                                       powers: PowerProfile, inner: int,
                                       rng: np.random.Generator) -> np.ndarray:
    """Same conditional expectation, by resampling errors and other channels."""
    M, N = draw.Ghat_AR.shape
    ghA, ghB = draw.Ghat_AR, draw.Ghat_RB
    acc = np.zeros(N)
    for _ in range(inner):
        eA = complex_normal(rng, (M, N), stats.sigma2tilde_AR)
        eB = complex_normal(rng, (M, N), stats.sigma2tilde_RB)
        gA, gB = ghA + eA, ghB + eB
        HA, HB = ghA.conj().T, ghB.conj().T
        C = (powers.p_A * (np.abs(np.sum(ghA.conj() * eA, 0)) ** 2
                           + np.abs(np.sum(ghB.conj() * eA, 0)) ** 2)
             + powers.p_B * (np.abs(np.sum(ghA.conj() * eB, 0)) ** 2
                             + np.abs(np.sum(ghB.conj() * eB, 0)) ** 2))
        full = (powers.p_A[None, :] * (np.abs(HA @ gA) ** 2 + np.abs(HB @ gA) ** 2)
                + powers.p_B[None, :] * (np.abs(HA @ gB) ** 2 + np.abs(HB @ gB) ** 2))
        D = np.sum(np.where(~np.eye(N, dtype=bool), full, 0.0), axis=1)
        acc += C + D
    E = np.sum(np.abs(ghA) ** 2, 0) + np.sum(np.abs(ghB) ** 2, 0)
    return acc / inner + E


@dataclass(frozen=True)
class DfMcResult:
    R1: list[McEstimate]
    R_AR: list[McEstimate]
    R_BR: list[McEstimate]
    R_RA: np.ndarray
    R_RB: np.ndarray
    pair: list[McEstimate]
    sum_se: McEstimate


def simulate_df_sum_se(cfg: SystemConfig, fading: FadingProfile, powers: PowerProfile,
                       trials: int = DEFAULT_TRIALS, mode: str = "direct",
                       pairing: str = "theorem") -> DfMcResult:
    """Empirical DF pair rates: first phase averaged over draws, second phase exact."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    stats = estimation_stats(cfg, fading, powers.p_p)
    pA, pB = powers.p_A, powers.p_B
    r1, rA, rB = [], [], []
    for batch in _batches(trials):
        b = _stack_draws(cfg, fading, stats, batch, mode, powers.p_p)
        ghA, ghB = b["Ghat_AR"], b["Ghat_RB"]
        nA = np.sum(np.abs(ghA) ** 2, axis=1)
        nB = np.sum(np.abs(ghB) ** 2, axis=1)
        cross = np.abs(np.sum(np.conj(ghB) * ghA, axis=1)) ** 2   # |ghat_RB^H ghat_AR|^2
        sigA = pA * (nA**2 + cross)
        sigB = pB * (cross + nB**2)
        den = _df_conditional_den(ghA, ghB, stats, powers)
        _check_finite(sigA, sigB, den)
        with np.errstate(divide="ignore", invalid="ignore"):
            r1.append(half_log2(np.where(sigA + sigB > 0, (sigA + sigB) / den, 0.0)))
            rA.append(half_log2(np.where(sigA > 0, sigA / den, 0.0)))
            rB.append(half_log2(np.where(sigB > 0, sigB / den, 0.0)))
    r1, rA, rB = (np.concatenate(x) for x in (r1, rA, rB))
    e1 = [McEstimate.from_samples(r1[:, i]) for i in range(cfg.N)]
    eA = [McEstimate.from_samples(rA[:, i]) for i in range(cfg.N)]
    eB = [McEstimate.from_samples(rB[:, i]) for i in range(cfg.N)]
    R_RA = half_log2(df_second_phase_sinr(cfg, stats, fading, powers, side="A"))
    R_RB = half_log2(df_second_phase_sinr(cfg, stats, fading, powers, side="B"))
    m = lambda es: np.array([e.mean for e in es])
    h = lambda es: np.array([e.half_width_95 for e in es])
    rates = combine_pair_rates(m(e1), m(eA), R_RB, m(eB), R_RA, cfg.overhead, pairing)
    # interval of whichever branch binds; link rates from the exact phase add none
    if pairing == "theorem":
        hw2 = np.where(m(eA) <= R_RB, h(eA), 0) + np.where(m(eB) <= R_RA, h(eB), 0)
    else:
        hw2 = np.where(m(eA) <= R_RA, h(eA), 0) + np.where(m(eB) <= R_RB, h(eB), 0)
    hw = np.where(rates.first_phase_binding, h(e1), hw2)
    pair = [McEstimate(float(r), float(w), trials) for r, w in zip(rates.R, hw)]
    total = McEstimate(rates.sum_se, cfg.overhead * float(hw.sum()), trials)
    return DfMcResult(e1, eA, eB, R_RA, R_RB, pair, total)


def simulate_df_second_phase_sinr(cfg: SystemConfig, fading: FadingProfile,
                                  powers: PowerProfile, trials: int = DEFAULT_TRIALS,
                                  side: str = "A", mode: str = "direct") -> np.ndarray:
    """Relay-to-user SINR from sample means and variances of the received terms."""
    stats = estimation_stats(cfg, fading, powers.p_p)
    N = cfg.N
    own_key, other_key = ("G_AR", "Ghat_AR") if side == "A" else ("G_RB", "Ghat_RB")
    off = ~np.eye(N, dtype=bool)
    des, slf, inter = [], [], []
    for batch in _batches(trials):
        b = _stack_draws(cfg, fading, stats, batch, mode, powers.p_p)
        g = b[own_key]
        # g_X,i^T ghat_*,j^*  for all (i, j)
        with_AR = np.swapaxes(g, 1, 2) @ np.conj(b["Ghat_AR"])
        with_RB = np.swapaxes(g, 1, 2) @ np.conj(b["Ghat_RB"])
        mine = with_AR if other_key == "Ghat_AR" else with_RB
        cross = with_RB if other_key == "Ghat_AR" else with_AR
        des.append(np.diagonal(mine, axis1=1, axis2=2))
        slf.append(np.diagonal(cross, axis1=1, axis2=2))
        inter.append(np.sum(np.where(off[None], np.abs(with_AR) ** 2 + np.abs(with_RB) ** 2, 0),
                            axis=2))
    des, slf, inter = np.concatenate(des), np.concatenate(slf), np.concatenate(inter)
    rho2 = df_rho_squared(cfg, stats, powers.p_r)
    mean = des.mean(axis=0)
    var_des = np.mean(np.abs(des - mean) ** 2, axis=0)
    var_self = np.mean(np.abs(slf - slf.mean(axis=0)) ** 2, axis=0)
    return np.abs(mean) ** 2 / (var_des + var_self + inter.mean(axis=0) + 1.0 / rho2)


# ---------------------------------------------------------------------------
# sanity diagnostics for the large-M lemma


@dataclass(frozen=True)
class Lemma1Report:
    M: int
    trials: int
    norm_dev: float          # |mean (1/M) x^H x - sigma_x^2|
    inner_dev: float         # |mean (1/M) x^H y|
    sq_inner_dev: float      # |mean (1/M^2)|x^H y|^2 - sigma_x^2 sigma_y^2 / M|
    clt_scale: float         # 1/sqrt(M * trials)
    M_scale: float           # 1/sqrt(M)

    def within(self, k: float = 3.0, sigma_x2: float = 1.0, sigma_y2: float = 1.0) -> bool:
        b = k * self.clt_scale
        return (self.norm_dev <= b * sigma_x2
                and self.inner_dev <= b * np.sqrt(sigma_x2 * sigma_y2)
                and self.sq_inner_dev <= b * sigma_x2 * sigma_y2)


def lemma1_diagnostics(M: int, sigma_x2: float, sigma_y2: float, trials: int = 100,
                       seed: int = 0) -> Lemma1Report:
    if M < 1:
        raise ValueError("M must be >= 1")
    nx, ni, nq = [], [], []
    for t in range(trials):
        rng = trial_rng(seed, t)
        x = complex_normal(rng, M, sigma_x2)
        y = complex_normal(rng, M, sigma_y2)
        xy = np.vdot(x, y)
        nx.append(np.vdot(x, x).real / M)
        ni.append(xy / M)
        nq.append(abs(xy) ** 2 / M**2)
    return Lemma1Report(
        M=M, trials=trials,
        norm_dev=abs(float(np.mean(nx)) - sigma_x2),
        inner_dev=float(abs(np.mean(ni))),
        sq_inner_dev=abs(float(np.mean(nq)) - sigma_x2 * sigma_y2 / M),
        clt_scale=1.0 / np.sqrt(M * trials),
        M_scale=1.0 / np.sqrt(M),
    )
