"""Shared domain types and MMSE estimation statistics.

All powers are linear-scale SNRs with the noise variance fixed to 1.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Union

import numpy as np

Exponent = Union[float, int, Fraction]


def _vec(x) -> np.ndarray:
    arr = np.array(x, dtype=float, ndmin=1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SystemConfig:
    M: int
    N: int
    tau_c: int
    tau_p: int
    seed: int = 0

    @property
    def overhead(self) -> float:
        """Fraction of the coherence interval left for data."""
        return (self.tau_c - self.tau_p) / self.tau_c

    def with_M(self, M: int) -> "SystemConfig":
        return replace(self, M=int(M))


@dataclass(frozen=True)
class FadingProfile:
    beta_AR: np.ndarray
    beta_RB: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "beta_AR", _vec(self.beta_AR))
        object.__setattr__(self, "beta_RB", _vec(self.beta_RB))

    @classmethod
    def uniform(cls, N: int, beta: float = 1.0) -> "FadingProfile":
        return cls(np.full(N, beta), np.full(N, beta))

    def swapped(self) -> "FadingProfile":
        return FadingProfile(self.beta_RB, self.beta_AR)

    def is_equal(self) -> bool:
        b = np.concatenate([self.beta_AR, self.beta_RB])
        return bool(np.all(b == b[0]))


@dataclass(frozen=True)
class PowerProfile:
    p_A: np.ndarray
    p_B: np.ndarray
    p_r: float
    p_p: float

    def __post_init__(self):
        object.__setattr__(self, "p_A", _vec(self.p_A))
        object.__setattr__(self, "p_B", _vec(self.p_B))
        object.__setattr__(self, "p_r", float(self.p_r))
        object.__setattr__(self, "p_p", float(self.p_p))

    @classmethod
    def uniform(cls, N: int, p_u: float, p_r: float, p_p: float) -> "PowerProfile":
        return cls(np.full(N, p_u), np.full(N, p_u), p_r, p_p)

    def swapped(self) -> "PowerProfile":
        return PowerProfile(self.p_B, self.p_A, self.p_r, self.p_p)

    def scaled(self, c: float) -> "PowerProfile":
        """Scale user and relay powers (not the pilot power) by ``c``."""
        return PowerProfile(self.p_A * c, self.p_B * c, self.p_r * c, self.p_p)

    @property
    def total(self) -> float:
        return float(self.p_A.sum() + self.p_B.sum() + self.p_r)


@dataclass(frozen=True)
class EstimationStats:
    sigma2_AR: np.ndarray
    sigma2tilde_AR: np.ndarray
    sigma2_RB: np.ndarray
    sigma2tilde_RB: np.ndarray

    def __post_init__(self):
        for name in ("sigma2_AR", "sigma2tilde_AR", "sigma2_RB", "sigma2tilde_RB"):
            object.__setattr__(self, name, _vec(getattr(self, name)))

    def swapped(self) -> "EstimationStats":
        return EstimationStats(self.sigma2_RB, self.sigma2tilde_RB,
                               self.sigma2_AR, self.sigma2tilde_AR)


class Scenario(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"


@dataclass(frozen=True)
class ScalingSpec:
    """Power-scaling law p_u = E_u/M^alpha, p_r = E_r/M^beta_exp, p_p = E_p/M^gamma.

    Exponents may be given as ``Fraction`` for exact boundary classification.
    """

    scenario: Scenario
    alpha: Exponent = 0
    beta_exp: Exponent = 0
    gamma: Exponent = 0
    E_u: float = 1.0
    E_r: float = 1.0
    E_p: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        a, b, g = float(self.alpha), float(self.beta_exp), float(self.gamma)
        if min(a, b, g) < 0:
            out.append("scaling exponents must be nonnegative")
        if min(self.E_u, self.E_r, self.E_p) <= 0:
            out.append("scaling constants must be positive")
        if self.scenario is Scenario.A and (a != 0 or b != 0 or g <= 0):
            out.append("scenario A requires alpha = beta = 0 and gamma > 0")
        if self.scenario is Scenario.B and g != 0:
            out.append("scenario B requires gamma = 0")
        if self.scenario is Scenario.C and g <= 0:
            out.append("scenario C requires gamma > 0")
        return out

    def powers_at(self, M: float, N: int) -> PowerProfile:
        p_u = self.E_u / M ** float(self.alpha)
        p_r = self.E_r / M ** float(self.beta_exp)
        p_p = self.E_p / M ** float(self.gamma)
        return PowerProfile.uniform(N, p_u, p_r, p_p)


def estimation_stats(cfg: SystemConfig, fading: FadingProfile, p_p: float) -> EstimationStats:
    """MMSE estimate / error variances per user for both hops."""
    if p_p < 0:
        raise ValueError("pilot power must be nonnegative")
    x = cfg.tau_p * p_p

    def split(beta):
        return x * beta**2 / (1.0 + x * beta), beta / (1.0 + x * beta)

    s_ar, t_ar = split(fading.beta_AR)
    s_rb, t_rb = split(fading.beta_RB)
    return EstimationStats(s_ar, t_ar, s_rb, t_rb)


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def validate_config(cfg: SystemConfig, fading: FadingProfile | None = None,
                    powers: PowerProfile | None = None) -> list[str]:
    """Return every violated invariant; an empty list means the inputs are usable."""
    out: list[str] = []
    if cfg.M < 1:
        out.append("M < 1")
    if cfg.N < 1:
        out.append("N < 1")
    if cfg.tau_p < 2 * cfg.N:
        out.append("tau_p < 2N")
    if cfg.tau_p >= cfg.tau_c:
        out.append("tau_p >= tau_c")
    if not 0 <= cfg.seed < 2**64:
        out.append("seed outside 64-bit unsigned range")
    if fading is not None:
        for name in ("beta_AR", "beta_RB"):
            b = getattr(fading, name)
            if b.shape != (cfg.N,):
                out.append(f"{name} length {b.size} != N")
            if not np.all(np.isfinite(b)):
                out.append(f"non-finite fading in {name}")
            elif np.any(b <= 0):
                out.append(f"nonpositive fading in {name}")
    if powers is not None:
        for name in ("p_A", "p_B"):
            p = getattr(powers, name)
            if p.shape != (cfg.N,):
                out.append(f"{name} length {p.size} != N")
            if not np.all(np.isfinite(p)):
                out.append(f"non-finite power in {name}")
            elif np.any(p < 0):
                out.append(f"negative power in {name}")
        for name in ("p_r", "p_p"):
            v = getattr(powers, name)
            if not math.isfinite(v):
                out.append(f"non-finite power {name}")
            elif v < 0:
                out.append(f"negative power {name}")
    return out
