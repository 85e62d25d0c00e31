"""Parameter sweeps, figure presets and CSV output."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import allocation, scaling
from .af import af_approx_rate, af_exact_rate
from .df import df_approx_rates
from .gp import GpError
from .model import (FadingProfile, PowerProfile, ScalingSpec, Scenario, SystemConfig,
                    db_to_linear, estimation_stats, validate_config)
from .montecarlo import simulate_af_sum_se, simulate_df_sum_se

TAU_C = 196

OUTPUTS = {
    "stats": ("sigma2_AR", "sigma2tilde_AR", "sigma2_RB", "sigma2tilde_RB"),
    "mc": ("mc_af", "mc_af_ci", "mc_df", "mc_df_ci"),
    "exact-af": ("exact_af", "approx_af"),
    "approx": ("approx_af", "approx_df"),
    "scaling": ("scaled_af", "asym_af", "limit_af", "scaled_df", "asym_df", "limit_df"),
    "allocate": ("uniform_af", "opt_af", "uplift_af", "uniform_df", "opt_df", "uplift_df",
                 "sym_pu_af", "sym_pu_df"),
}
SWEEPS = {
    "stats": ("p_p_db", "M", "N"),
    "mc": ("p_u_db", "p_r_db", "p_p_db", "M", "N"),
    "exact-af": ("p_u_db", "p_r_db", "p_p_db", "M", "N"),
    "approx": ("p_u_db", "p_r_db", "p_p_db", "M", "N"),
    "scaling": ("M",),
    "allocate": ("P_db", "M"),
}
RELAY_RULES = ("fixed", "per-user")      # per-user: p_r = 2N p_u
PILOT_RULES = ("fixed", "user")          # user: p_p = p_u


class ConfigError(ValueError):
    """Invalid experiment description; ``where`` names the offending field."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: what to compute, at which base point, along which axis."""

    kind: str
    sweep: str
    grid: tuple[float, ...]
    M: int = 128
    N: int = 5
    tau_c: int = TAU_C
    tau_p: int | None = None
    beta_AR: tuple[float, ...] = (1.0,)
    beta_RB: tuple[float, ...] = (1.0,)
    p_u_db: float = 0.0
    p_r_db: float = 10.0
    p_p_db: float = 0.0
    relay_rule: str = "fixed"
    pilot_rule: str = "fixed"
    P_db: float = 10.0
    scaling: ScalingSpec | None = None
    outputs: tuple[str, ...] = ()
    trials: int = 10_000
    seed: int = 0
    af_form: str = "derived"
    pairing: str = "theorem"

    def validate(self) -> None:
        if self.kind not in OUTPUTS:
            raise ConfigError("kind", f"unknown kind {self.kind!r}")
        if self.sweep not in SWEEPS[self.kind]:
            raise ConfigError("sweep", f"{self.sweep!r} is not a sweep axis for {self.kind}; "
                              f"choose from {', '.join(SWEEPS[self.kind])}")
        if len(self.grid) == 0:
            raise ConfigError("grid", "empty grid")
        if any(not math.isfinite(g) for g in self.grid):
            raise ConfigError("grid", "grid values must be finite")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ConfigError("grid", "grid must be strictly increasing")
        if self.sweep in ("M", "N") and any(g != int(g) or g < 1 for g in self.grid):
            raise ConfigError("grid", f"{self.sweep} values must be positive integers")
        bad = [o for o in self.outputs if o not in OUTPUTS[self.kind]]
        if bad:
            raise ConfigError("outputs", f"unknown outputs for {self.kind}: {', '.join(bad)}")
        if self.relay_rule not in RELAY_RULES:
            raise ConfigError("relay_rule", f"must be one of {RELAY_RULES}")
        if self.pilot_rule not in PILOT_RULES:
            raise ConfigError("pilot_rule", f"must be one of {PILOT_RULES}")
        if self.kind == "scaling" and self.scaling is None:
            raise ConfigError("scaling", "scaling runs need a scaling spec")
        if self.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed", "must be nonnegative")
        for N in (self.grid if self.sweep == "N" else (self.N,)):
            for name in ("beta_AR", "beta_RB"):
                b = getattr(self, name)
                if len(b) not in (1, int(N)):
                    raise ConfigError(name, f"needs 1 or N={int(N)} entries, got {len(b)}")
            cfg, fading = self.system(M=self.M, N=int(N))
            problems = validate_config(cfg, fading)
            if problems:
                raise ConfigError("system", "; ".join(problems))

    @property
    def columns(self) -> tuple[str, ...]:
        return self.outputs or OUTPUTS[self.kind]

    def system(self, M: int, N: int) -> tuple[SystemConfig, FadingProfile]:
        tau_p = self.tau_p if self.tau_p is not None else 2 * N

        def vec(b):
            return np.full(N, b[0]) if len(b) == 1 else np.asarray(b, dtype=float)
        cfg = SystemConfig(M=int(M), N=int(N), tau_c=self.tau_c, tau_p=tau_p, seed=self.seed)
        return cfg, FadingProfile(vec(self.beta_AR), vec(self.beta_RB))

    def point(self, value: float) -> "ExperimentConfig":
        """The base point with the sweep variable set to ``value``."""
        if self.sweep in ("M", "N"):
            value = int(value)
        return replace(self, **{self.sweep: value})

    def powers(self, N: int) -> PowerProfile:
        p_u = db_to_linear(self.p_u_db)
        p_r = 2 * N * p_u if self.relay_rule == "per-user" else db_to_linear(self.p_r_db)
        p_p = p_u if self.pilot_rule == "user" else db_to_linear(self.p_p_db)
        return PowerProfile.uniform(N, p_u, p_r, p_p)


@dataclass
class Table:
    columns: list[str]
    rows: list[list[float]]
    name: str = "table"
    metadata: dict[str, str] = field(default_factory=dict)
    failures: int = 0

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)


# ---------------------------------------------------------------------------
# per-kind evaluators; each returns {column: value}


def _eval_stats(x: ExperimentConfig):
    cfg, fading = x.system(x.M, x.N)
    st = estimation_stats(cfg, fading, x.powers(x.N).p_p)
    return {k: float(np.mean(getattr(st, k))) for k in OUTPUTS["stats"]}


def _eval_mc(x: ExperimentConfig):
    cfg, fading = x.system(x.M, x.N)
    pw = x.powers(x.N)
    out = {}
    if {"mc_af", "mc_af_ci"} & set(x.columns):
        af = simulate_af_sum_se(cfg, fading, pw, trials=x.trials).sum_se
        out.update(mc_af=af.mean, mc_af_ci=af.half_width_95)
    if {"mc_df", "mc_df_ci"} & set(x.columns):
        df = simulate_df_sum_se(cfg, fading, pw, trials=x.trials, pairing=x.pairing).sum_se
        out.update(mc_df=df.mean, mc_df_ci=df.half_width_95)
    return out


def _eval_exact(x: ExperimentConfig):
    cfg, fading = x.system(x.M, x.N)
    pw = x.powers(x.N)
    st = estimation_stats(cfg, fading, pw.p_p)
    return {"exact_af": af_exact_rate(cfg, st, fading, pw, form=x.af_form).sum_se,
            "approx_af": af_approx_rate(cfg, st, fading, pw).sum_se}


def _eval_approx(x: ExperimentConfig):
    cfg, fading = x.system(x.M, x.N)
    pw = x.powers(x.N)
    st = estimation_stats(cfg, fading, pw.p_p)
    return {"approx_af": af_approx_rate(cfg, st, fading, pw).sum_se,
            "approx_df": df_approx_rates(cfg, st, fading, pw, x.pairing).sum_se}


def _limit_value(reg: scaling.RegimeClass) -> float:
    if reg.kind is scaling.LimitKind.ZERO:
        return 0.0
    if reg.kind is scaling.LimitKind.UNBOUNDED:
        return math.inf
    return float(reg.limit_value)


def _eval_scaling(x: ExperimentConfig):
    cfg, fading = x.system(x.M, x.N)
    out = {}
    for proto in ("AF", "DF"):
        p = proto.lower()
        out[f"scaled_{p}"] = scaling.scaled_rate(proto, x.scaling, cfg, fading, x.M)
        out[f"asym_{p}"] = scaling.asymptotic_rate(proto, x.scaling, cfg, fading, x.M)
        out[f"limit_{p}"] = _limit_value(scaling.asymptotic_limit(proto, x.scaling, cfg, fading))
    return out


def _eval_allocate(x: ExperimentConfig):
    cfg, fading = x.system(x.M, x.N)
    P = db_to_linear(x.P_db)
    p_p = db_to_linear(x.p_p_db)
    st = estimation_stats(cfg, fading, p_p)
    out = {}
    rep = allocation.improvement_report(cfg, st, fading, P, p_p=p_p, pairing=x.pairing)
    for proto, imp in rep.items():
        p = proto.lower()
        out.update({f"uniform_{p}": imp.uniform_se, f"opt_{p}": imp.optimized_se,
                    f"uplift_{p}": imp.uplift_percent})
        out[f"sym_pu_{p}"] = allocation.allocate_symmetric(proto, cfg, st, fading, P, p_p).p_u
    return out


EVALUATORS: dict[str, Callable] = {
    "stats": _eval_stats, "mc": _eval_mc, "exact-af": _eval_exact,
    "approx": _eval_approx, "scaling": _eval_scaling, "allocate": _eval_allocate,
}


def run_experiment(config: ExperimentConfig, name: str = "table") -> Table:
    """Evaluate every grid point in order; solver failures become NaN rows."""
    config.validate()
    cols = list(config.columns)
    table = Table([config.sweep] + cols, [], name)
    for value in config.grid:
        try:
            vals = EVALUATORS[config.kind](config.point(value))
        except GpError:
            vals = {}
            table.failures += 1
        table.rows.append([float(value)] + [float(vals.get(c, math.nan)) for c in cols])
    return table


# ---------------------------------------------------------------------------
# CSV


def format_value(v: float) -> str:
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".12g")


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    for k, v in table.metadata.items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def emit_csv(table: Table, path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(render_csv(table), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


# ---------------------------------------------------------------------------
# figure presets


def _db_grid(lo, hi, step):
    return tuple(float(v) for v in np.arange(lo, hi + step / 2, step))


def _log_grid(lo_exp, hi_exp, per_decade):
    n = int(round((hi_exp - lo_exp) * per_decade)) + 1
    return tuple(float(round(v)) for v in np.logspace(lo_exp, hi_exp, n))


UPLIFT_BETA_AR = (0.2688, 0.0368, 0.00025, 0.1398, 0.0047)
UPLIFT_BETA_RB = (0.0003, 0.00025, 0.0050, 0.0794, 0.0001)


def _rate_families(base: ExperimentConfig, families: Sequence[tuple[int, int]], tag: str):
    return [(f"{tag}_M{M}_N{N}", replace(base, M=M, N=N)) for M, N in families]


def _scaling_family(tag, spec, N=5, grid=None):
    grid = grid or _log_grid(1, 5, 4)
    return (tag, ExperimentConfig("scaling", "M", grid, N=N, scaling=spec))


def _preset_configs(name: str, trials: int, seed: int):
    db = db_to_linear
    if name == "fig-rate-snr":
        base = ExperimentConfig("mc", "p_u_db", _db_grid(-10, 20, 5), relay_rule="per-user",
                                pilot_rule="user", trials=trials, seed=seed)
        out = []
        for M in (64, 128, 256, 512):
            out.append((f"rate_snr_M{M}_mc", replace(base, M=M)))
            out.append((f"rate_snr_M{M}_approx", replace(base, kind="approx", M=M)))
        return out
    if name == "fig-rate-pu":
        base = ExperimentConfig("approx", "p_u_db", _db_grid(-20, 20, 2), p_r_db=-10, p_p_db=10)
        return _rate_families(base, [(100, 5), (300, 5), (300, 30)], "rate_pu")
    if name == "fig-rate-pr":
        base = ExperimentConfig("approx", "p_r_db", _db_grid(-20, 20, 2), p_u_db=10, p_p_db=10)
        return _rate_families(base, [(100, 5), (300, 5), (100, 30), (300, 30)], "rate_pr")
    if name == "fig-rate-pp":
        base = ExperimentConfig("approx", "p_p_db", _db_grid(-20, 20, 2), p_u_db=0, p_r_db=0)
        return _rate_families(base, [(100, 5), (300, 5), (300, 50)], "rate_pp")
    if name == "fig-pairs":
        grid = (1, 2, 3, 5, 8, 10, 15, 20, 30, 40, 50, 60)
        out = []
        for M in (100, 300):
            base = ExperimentConfig("approx", "N", grid, M=M, p_u_db=0, p_p_db=0, p_r_db=0)
            out.append((f"pairs_fixed_pr_M{M}", base))
            out.append((f"pairs_per_user_pr_M{M}", replace(base, relay_rule="per-user")))
        return out
    if name == "fig-scaling-A":
        return [_scaling_family(f"scaling_A_gamma{g}", ScalingSpec(
            Scenario.A, gamma=g, E_u=db(10), E_r=db(20), E_p=db(10))) for g in (0.8, 1, 2)]
    if name == "fig-scaling-B":
        cases = [("case1", 1, 1, 20), ("case2", 1, 0.2, 20), ("case3", 0.4, 1, 20),
                 ("case3_Er23", 0.4, 1, 23), ("zero_user", 1.2, 0.5, 20),
                 ("zero_relay", 0.5, 1.2, 20), ("zero_both", 1.2, 1.2, 20),
                 ("unbounded", 0.5, 0.5, 20)]
        return [_scaling_family(f"scaling_B_{tag}", ScalingSpec(
            Scenario.B, alpha=a, beta_exp=b, E_u=db(10), E_r=db(er), E_p=db(10)))
            for tag, a, b, er in cases]
    if name == "fig-scaling-C":
        specs = [("zero_gamma0.5", 1.3, 1.1, 0.5), ("zero_gamma1", 0.8, 0.6, 1.0),
                 ("unbounded_gamma0.3", 0.4, 0.3, 0.3), ("unbounded_gamma0.5", 0.2, 0.1, 0.5)]
        return [_scaling_family(f"scaling_C_{tag}", ScalingSpec(
            Scenario.C, alpha=a, beta_exp=b, gamma=g, E_u=db(10), E_r=db(15), E_p=db(0)))
            for tag, a, b, g in specs]
    if name == "fig-alloc-uplift":
        return [("alloc_uplift", ExperimentConfig(
            "allocate", "M", (100, 300, 500), N=5, beta_AR=UPLIFT_BETA_AR,
            beta_RB=UPLIFT_BETA_RB, P_db=10, p_p_db=10))]
    raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")


PRESETS = ("fig-rate-snr", "fig-rate-pu", "fig-rate-pr", "fig-rate-pp", "fig-pairs",
           "fig-scaling-A", "fig-scaling-B", "fig-scaling-C", "fig-alloc-uplift",
           "fig-symmetric-alloc")


@dataclass(frozen=True)
class _SymmetricFamily:
    M: int
    N: int
    p_p_db: float
    P_db: float = 10.0


def _symmetric_families():
    return [("N3", _SymmetricFamily(50, 3, 0)), ("N5", _SymmetricFamily(50, 5, 0)),
            ("N10", _SymmetricFamily(50, 10, 0)), ("M100_N5", _SymmetricFamily(100, 5, 0)),
            ("pp-20_N5", _SymmetricFamily(50, 5, -20))]


def _symmetric_table(tag: str, fam: _SymmetricFamily) -> Table:
    """Sum SE against the common user power, p_r taking the rest of the budget."""
    P = db_to_linear(fam.P_db)
    cfg = SystemConfig(M=fam.M, N=fam.N, tau_c=TAU_C, tau_p=2 * fam.N)
    fading = FadingProfile.uniform(fam.N)
    p_p = db_to_linear(fam.p_p_db)
    st = estimation_stats(cfg, fading, p_p)
    hi = P / (2 * fam.N)
    grid = hi * np.logspace(-3, 0, 31)[:-1]
    f_af = allocation.symmetric_objective("AF", cfg, st, fading, P, p_p)
    f_df = allocation.symmetric_objective("DF", cfg, st, fading, P, p_p)
    rows = [[10 * math.log10(p), f_af(p), f_df(p)] for p in grid]
    table = Table(["p_u_db", "af", "df"], rows, f"symmetric_{tag}")
    for proto in ("AF", "DF"):
        opt = allocation.allocate_symmetric(proto, cfg, st, fading, P, p_p)
        table.metadata[f"opt_p_u_{proto.lower()}"] = format_value(opt.p_u)
        table.metadata[f"opt_se_{proto.lower()}"] = format_value(opt.sum_se)
    table.metadata.update(M=str(fam.M), N=str(fam.N), p_p_db=format_value(fam.p_p_db),
                          P_db=format_value(fam.P_db))
    return table


def _describe(cfg: ExperimentConfig) -> dict[str, str]:
    meta = {"kind": cfg.kind, "sweep": cfg.sweep,
            "grid": " ".join(format_value(g) for g in cfg.grid)}
    if cfg.sweep != "M":
        meta["M"] = str(cfg.M)
    if cfg.sweep != "N":
        meta["N"] = str(cfg.N)
    if cfg.kind == "scaling":
        s = cfg.scaling
        meta.update(scenario=s.scenario.value, alpha=str(s.alpha), beta_exp=str(s.beta_exp),
                    gamma=str(s.gamma), E_u=format_value(s.E_u), E_r=format_value(s.E_r),
                    E_p=format_value(s.E_p))
    elif cfg.kind == "allocate":
        meta.update(P_db=format_value(cfg.P_db), p_p_db=format_value(cfg.p_p_db),
                    beta_AR=" ".join(map(format_value, cfg.beta_AR)),
                    beta_RB=" ".join(map(format_value, cfg.beta_RB)))
    else:
        meta.update(p_u_db=format_value(cfg.p_u_db), relay_rule=cfg.relay_rule,
                    p_r_db=format_value(cfg.p_r_db), pilot_rule=cfg.pilot_rule,
                    p_p_db=format_value(cfg.p_p_db))
        if cfg.kind == "mc":
            meta.update(trials=str(cfg.trials), seed=str(cfg.seed))
    return meta


def reproduce_preset(name: str, trials: int = 10_000, seed: int = 0) -> list[Table]:
    """Run a figure preset; one table per curve family, grids recorded as metadata."""
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    if name == "fig-symmetric-alloc":
        tables = [_symmetric_table(tag, fam) for tag, fam in _symmetric_families()]
    else:
        tables = []
        for tag, cfg in _preset_configs(name, trials, seed):
            t = run_experiment(cfg, tag)
            t.metadata = {"preset": name, **_describe(cfg)}
            tables.append(t)
    for t in tables:
        t.metadata = {"preset": name, **t.metadata}
    return tables


__all__ = [
    "ConfigError", "ExperimentConfig", "OUTPUTS", "PRESETS", "SWEEPS", "Table", "emit_csv",
    "format_value", "render_csv", "reproduce_preset", "run_experiment",
]
