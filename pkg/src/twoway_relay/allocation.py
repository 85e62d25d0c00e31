"""Sum-SE power allocation under a total power budget.

The AF and DF programs are solved by successive geometric programming: at
each step the non-posynomial parts are replaced by monomials that match
them at the current point and bound them from below, and the resulting GP
is solved inside a multiplicative trust region.  Because the anchor is
reset to the SINRs realised by the current powers, each GP optimum is at
least as good as the current point, so the sum SE never decreases.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .af import af_approx_rate
from .df import df_approx_rates
from .gp import GpError, GpProblem, Monomial, Posynomial, am_gm_lower_bound, gp_solve, xy_fit
from .model import EstimationStats, FadingProfile, PowerProfile, SystemConfig

FLOOR = 1e-9
MAX_ITER = 100
JSUM_MODES = ("interferer", "printed")


@dataclass
class AllocationResult:
    p_A: np.ndarray
    p_B: np.ndarray
    p_r: float
    sum_se: float
    iterations: int
    objective_trace: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def total_power(self) -> float:
        return float(self.p_A.sum() + self.p_B.sum() + self.p_r)

    def powers(self, p_p: float) -> PowerProfile:
        return PowerProfile(self.p_A, self.p_B, self.p_r, p_p)


def uniform_powers(N: int, P: float, p_p: float) -> PowerProfile:
    """The baseline split: half the budget to the relay, the rest shared by 2N users."""
    return PowerProfile.uniform(N, P / (4 * N), P / 2, p_p)


def _starting_point(N, P, p_p, initial):
    if initial is None:
        return uniform_powers(N, P, p_p)
    if initial.total > P * (1 + 1e-9):
        raise ValueError("initial powers exceed the budget")
    if np.any(initial.p_A <= 0) or np.any(initial.p_B <= 0) or initial.p_r <= 0:
        raise ValueError("initial powers must be positive")
    return initial


# ---------------------------------------------------------------------------
# AF


@dataclass(frozen=True)
class AfCoeffs:
    """SINR_i = p_partner,i / (a p_own + b p_partner + (c p_own + d p_partner)/p_r + e).

    ``a``..``d`` are (N, N) with rows indexed by the receiving user; ``own``
    and ``partner`` refer to the receiver's side and its peer's side.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray


def _af_side_coeffs(M, stats, fading) -> AfCoeffs:
    sA, sB = stats.sigma2_AR, stats.sigma2_RB
    bA, bB = fading.beta_AR, fading.beta_RB
    q = (sA**2 * sB**2)[:, None]
    diag = np.eye(sA.size, dtype=bool)
    a = np.where(diag, (4 * bA / sB)[:, None],
                 bA[None, :] / sB[:, None] + (sA**2 * sB)[None, :] * bA[:, None] / q)
    b = np.where(diag, (bB / sB + bA / sA)[:, None],
                 bB[None, :] / sB[:, None] + (sA * sB**2)[None, :] * bA[:, None] / q)
    c = (sA**2 * sB)[None, :] / q
    d = (sA * sB**2)[None, :] / q
    return AfCoeffs(a / M, b / M, c / M, d / M, 1.0 / (M * sB))


def build_af_gp_coeffs(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile):
    """Coefficient tables for the A-side SINRs and their B-side mirrors."""
    return (_af_side_coeffs(cfg.M, stats, fading),
            _af_side_coeffs(cfg.M, stats.swapped(), fading.swapped()))


def af_table_sinr(coeffs: AfCoeffs, p_own, p_partner, p_r) -> np.ndarray:
    den = (coeffs.a @ p_own + coeffs.b @ p_partner
           + (coeffs.c @ p_own + coeffs.d @ p_partner) / p_r + coeffs.e)
    return p_partner / den


def _var(name, i=None):
    return Monomial(1.0, {name if i is None else f"{name}{i}": 1.0})


def _budget(N, P):
    terms = [_var("pA", j) / P for j in range(N)] + [_var("pB", j) / P for j in range(N)]
    return Posynomial(terms + [_var("pr") / P])


def _power_bounds(N, P, lo=None, hi=None):
    bounds = {}
    for j in range(N):
        for side in ("pA", "pB"):
            key = f"{side}{j}"
            bounds[key] = (FLOOR * P, P) if lo is None else (lo[key], hi[key])
    bounds["pr"] = (FLOOR * P, P)
    return bounds


def _af_sinr_constraint(coeffs, i, N, gamma, own, partner):
    """gamma * p_partner,i^-1 * (denominator) <= 1 as a posynomial."""
    lead = _var(gamma, i) * _var(partner, i) ** -1
    terms = []
    for j in range(N):
        terms.append(coeffs.a[i, j] * _var(own, j))
        terms.append(coeffs.b[i, j] * _var(partner, j))
        terms.append(coeffs.c[i, j] * _var(own, j) * _var("pr") ** -1)
        terms.append(coeffs.d[i, j] * _var(partner, j) * _var("pr") ** -1)
    terms.append(Monomial(coeffs.e[i]))
    return lead * Posynomial(terms)


def _af_se(cfg, stats, fading, p_A, p_B, p_r, p_p):
    return af_approx_rate(cfg, stats, fading, PowerProfile(p_A, p_B, p_r, p_p)).sum_se


def allocate_af(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile, P: float,
                theta: float = 1.1, eps: float = 1e-3, max_iter: int = MAX_ITER,
                p_p: float = 0.0, initial: PowerProfile | None = None) -> AllocationResult:
    """Successive GP for the AF sum SE, by default starting from the uniform split."""
    if P <= 0:
        raise ValueError("power budget must be positive")
    N = cfg.N
    tab_A, tab_B = build_af_gp_coeffs(cfg, stats, fading)
    base = _starting_point(N, P, p_p, initial)
    p_A, p_B, p_r = base.p_A.copy(), base.p_B.copy(), base.p_r
    se = _af_se(cfg, stats, fading, p_A, p_B, p_r, p_p)
    trace = [se]
    constraints = ([_af_sinr_constraint(tab_A, i, N, "gA", "pA", "pB") for i in range(N)]
                   + [_af_sinr_constraint(tab_B, i, N, "gB", "pB", "pA") for i in range(N)]
                   + [_budget(N, P)])
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        gA = af_table_sinr(tab_A, p_A, p_B, p_r)
        gB = af_table_sinr(tab_B, p_B, p_A, p_r)
        mu = np.concatenate([gA / (1 + gA), gB / (1 + gB)])
        names = [f"gA{i}" for i in range(N)] + [f"gB{i}" for i in range(N)]
        g_hat = np.concatenate([gA, gB])
        objective = Monomial(1.0, {n: -m for n, m in zip(names, mu)})
        bounds = _power_bounds(N, P)
        bounds.update({n: (g / theta, g * theta) for n, g in zip(names, g_hat)})
        sol = gp_solve(GpProblem(objective, constraints, bounds))
        new_A = np.array([sol.x[f"pA{j}"] for j in range(N)])
        new_B = np.array([sol.x[f"pB{j}"] for j in range(N)])
        new_r = sol.x["pr"]
        delta = max(abs(sol.x[n] - g) for n, g in zip(names, g_hat))
        new_se = _af_se(cfg, stats, fading, new_A, new_B, new_r, p_p)
        if new_se >= se:
            p_A, p_B, p_r, se = new_A, new_B, new_r, new_se
        trace.append(se)
        if delta < eps:
            converged = True
            break
    return AllocationResult(p_A, p_B, p_r, se, k, trace, converged)


# ---------------------------------------------------------------------------
# DF


@dataclass(frozen=True)
class DfCoeffs:
    """First phase: (a p_A + b p_B) / (sum_j c p_A + d p_B + 1); downlink p_r/(e p_r + f)."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e_A: np.ndarray
    f_A: np.ndarray
    e_B: np.ndarray
    f_B: np.ndarray


def build_df_gp_coeffs(cfg: SystemConfig, stats: EstimationStats,
                       fading: FadingProfile) -> DfCoeffs:
    M = cfg.M
    sA, sB = stats.sigma2_AR, stats.sigma2_RB
    ss = sA * sB
    diag = np.eye(sA.size, dtype=bool)
    c = np.where(diag, stats.sigma2tilde_AR[:, None], fading.beta_AR[None, :])
    d = np.where(diag, stats.sigma2tilde_RB[:, None], fading.beta_RB[None, :])
    total = np.sum(sA + sB)
    with np.errstate(divide="ignore"):
        f_A = total / (M * sA**2)
        f_B = total / (M * sB**2)
    return DfCoeffs(a=(M * sA**2 + ss) / (sA + sB), b=(M * sB**2 + ss) / (sA + sB),
                    c=c, d=d, e_A=fading.beta_AR * f_A, f_A=f_A,
                    e_B=fading.beta_RB * f_B, f_B=f_B)


def _jsum_weights(N, jsum):
    """(N, N) selector of which power multiplies c[i, j]: the j-th user's or the i-th."""
    if jsum == "interferer":
        return lambda i, j: j
    if jsum == "printed":
        return lambda i, j: i
    raise ValueError(f"jsum must be one of {JSUM_MODES}")


def df_table_sinrs(co: DfCoeffs, p_A, p_B, p_r, jsum="interferer"):
    """(first phase, uplink A, uplink B, downlink to A, downlink to B) SINRs."""
    N = p_A.size
    if jsum == "interferer":
        den = co.c @ p_A + co.d @ p_B + 1.0
    else:
        den = co.c.sum(axis=1) * p_A + co.d.sum(axis=1) * p_B + 1.0
    up_A = co.a * p_A / den
    up_B = co.b * p_B / den
    down_A = p_r / (co.e_A * p_r + co.f_A)
    down_B = p_r / (co.e_B * p_r + co.f_B)
    return up_A + up_B, up_A, up_B, down_A, down_B


def _df_link_gammas(sinrs, pairing):
    first, up_A, up_B, down_A, down_B = sinrs
    if pairing == "theorem":
        gA, gB = np.minimum(up_A, down_B), np.minimum(up_B, down_A)
    elif pairing == "printed":
        gA, gB = np.minimum(up_A, down_A), np.minimum(up_B, down_B)
    else:
        raise ValueError("pairing must be 'theorem' or 'printed'")
    g = np.minimum(first, gA + gB + gA * gB)
    return g, gA, gB


def df_table_sum_se(cfg, co, p_A, p_B, p_r, pairing="theorem", jsum="interferer") -> float:
    g, _, _ = _df_link_gammas(df_table_sinrs(co, p_A, p_B, p_r, jsum), pairing)
    return cfg.overhead * float(np.sum(0.5 * np.log2(1 + g)))


def _interference_posy(co, i, N, pick):
    terms = [Monomial(1.0)]
    for j in range(N):
        k = pick(i, j)
        terms.append(co.c[i, j] * _var("pA", k))
        terms.append(co.d[i, j] * _var("pB", k))
    return Posynomial(terms)


def _downlink_posy(e, f, i):
    return Posynomial([Monomial(e[i]), f[i] * _var("pr") ** -1])


def allocate_df(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile, P: float,
                theta: float = 1.1, eps: float = 1e-3, max_iter: int = MAX_ITER,
                pairing: str = "theorem", jsum: str = "interferer",
                p_p: float = 0.0, initial: PowerProfile | None = None) -> AllocationResult:
    """Successive GP for the DF sum SE, by default starting from the uniform split."""
    if P <= 0:
        raise ValueError("power budget must be positive")
    N = cfg.N
    co = build_df_gp_coeffs(cfg, stats, fading)
    pick = _jsum_weights(N, jsum)
    base = _starting_point(N, P, p_p, initial)
    p_A, p_B, p_r = base.p_A.copy(), base.p_B.copy(), base.p_r
    se = df_table_sum_se(cfg, co, p_A, p_B, p_r, pairing, jsum)
    trace = [se]
    converged = False
    k = 0
    down_for = {"theorem": (("e_B", "f_B"), ("e_A", "f_A")),
                "printed": (("e_A", "f_A"), ("e_B", "f_B"))}[pairing]
    for k in range(1, max_iter + 1):
        g, gA, gB = _df_link_gammas(df_table_sinrs(co, p_A, p_B, p_r, jsum), pairing)
        mu = g / (1 + g)
        objective = Monomial(1.0, {f"g{i}": -mu[i] for i in range(N)})
        anchor = {f"pA{i}": p_A[i] for i in range(N)} | {f"pB{i}": p_B[i] for i in range(N)}
        cons = [_budget(N, P)]
        for i in range(N):
            interf = _interference_posy(co, i, N, pick)
            signal = am_gm_lower_bound([co.a[i] * _var("pA", i), co.b[i] * _var("pB", i)], anchor)
            cons.append(_var("g", i) * signal ** -1 * interf)
            l1, l2, eta = xy_fit(gA[i], gB[i])
            cons.append(Posynomial([_var("g", i) / eta * _var("gA", i) ** -l1
                                    * _var("gB", i) ** -l2]))
            cons.append(_var("gA", i) * (co.a[i] * _var("pA", i)) ** -1 * interf)
            cons.append(_var("gB", i) * (co.b[i] * _var("pB", i)) ** -1 * interf)
            (eA, fA), (eB, fB) = down_for
            cons.append(_var("gA", i) * _downlink_posy(getattr(co, eA), getattr(co, fA), i))
            cons.append(_var("gB", i) * _downlink_posy(getattr(co, eB), getattr(co, fB), i))
        hat = {f"g{i}": g[i] for i in range(N)} | {f"gA{i}": gA[i] for i in range(N)}
        hat |= {f"gB{i}": gB[i] for i in range(N)} | anchor
        bounds = {"pr": (FLOOR * P, P)}
        for n, v in hat.items():
            lo, hi = v / theta, v * theta
            if n.startswith("p"):
                lo, hi = max(lo, FLOOR * P), min(hi, P)
            bounds[n] = (lo, hi)
        sol = gp_solve(GpProblem(objective, cons, bounds))
        delta = max(abs(sol.x[n] - v) for n, v in hat.items())
        new_A = np.array([sol.x[f"pA{j}"] for j in range(N)])
        new_B = np.array([sol.x[f"pB{j}"] for j in range(N)])
        new_r = sol.x["pr"]
        new_se = df_table_sum_se(cfg, co, new_A, new_B, new_r, pairing, jsum)
        if new_se >= se:
            p_A, p_B, p_r, se = new_A, new_B, new_r, new_se
        trace.append(se)
        if delta < eps:
            converged = True
            break
    return AllocationResult(p_A, p_B, p_r, se, k, trace, converged)


# ---------------------------------------------------------------------------
# common user power


@dataclass(frozen=True)
class SymmetricAllocation:
    p_u: float
    p_r: float
    sum_se: float


def symmetric_objective(protocol: str, cfg, stats, fading, P: float, p_p: float = 0.0):
    """Sum SE as a function of the common user power with p_r = P - 2N p_u."""
    protocol = protocol.upper()

    def f(p_u: float) -> float:
        powers = PowerProfile.uniform(cfg.N, p_u, P - 2 * cfg.N * p_u, p_p)
        if protocol == "AF":
            return af_approx_rate(cfg, stats, fading, powers).sum_se
        if protocol == "DF":
            return df_approx_rates(cfg, stats, fading, powers).sum_se
        raise ValueError("protocol must be AF or DF")
    return f


def _golden_max(f, lo, hi, tol):
    r = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - r * (b - a), a + r * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - r * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + r * (b - a)
            fd = f(d)
    return (a + b) / 2


def allocate_symmetric(protocol: str, cfg: SystemConfig, stats: EstimationStats,
                       fading: FadingProfile, P: float, p_p: float = 0.0,
                       tol: float = 1e-10) -> SymmetricAllocation:
    """Best common user power; AF with equal fading uses the exact half/half split."""
    protocol = protocol.upper()
    N = cfg.N
    f = symmetric_objective(protocol, cfg, stats, fading, P, p_p)
    if protocol == "AF" and fading.is_equal():
        p_u = P / (4 * N)
    else:
        hi = P / (2 * N)
        p_u = _golden_max(f, FLOOR * hi, hi * (1 - FLOOR), tol * hi)
    return SymmetricAllocation(p_u, P - 2 * N * p_u, f(p_u))


# ---------------------------------------------------------------------------
# reporting


@dataclass(frozen=True)
class Improvement:
    uniform_se: float
    optimized_se: float
    result: AllocationResult

    @property
    def uplift_percent(self) -> float:
        return 100.0 * (self.optimized_se - self.uniform_se) / self.uniform_se


def improvement_report(cfg: SystemConfig, stats: EstimationStats, fading: FadingProfile,
                       P: float, p_p: float = 0.0, theta: float = 1.1, eps: float = 1e-3,
                       pairing: str = "theorem", jsum: str = "interferer") -> dict:
    """Uniform-split versus optimised sum SE for both protocols."""
    af = allocate_af(cfg, stats, fading, P, theta, eps, p_p=p_p)
    df = allocate_df(cfg, stats, fading, P, theta, eps, pairing=pairing, jsum=jsum, p_p=p_p)
    return {"AF": Improvement(af.objective_trace[0], af.sum_se, af),
            "DF": Improvement(df.objective_trace[0], df.sum_se, df)}


__all__ = [
    "AllocationResult", "AfCoeffs", "DfCoeffs", "GpError", "Improvement", "SymmetricAllocation",
    "allocate_af", "allocate_df", "allocate_symmetric", "build_af_gp_coeffs",
    "af_table_sinr", "build_df_gp_coeffs", "df_table_sinrs", "df_table_sum_se", "improvement_report",
    "symmetric_objective", "uniform_powers",
]
