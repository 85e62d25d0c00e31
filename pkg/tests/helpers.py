import numpy as np

from twoway_relay.model import FadingProfile, SystemConfig, estimation_stats


def make_system(M=64, N=3, p_p=1.0, beta_AR=None, beta_RB=None, seed=0):
    cfg = SystemConfig(M=M, N=N, tau_c=196, tau_p=2 * N, seed=seed)
    fading = FadingProfile(np.ones(N) if beta_AR is None else np.asarray(beta_AR, float),
                           np.ones(N) if beta_RB is None else np.asarray(beta_RB, float))
    return cfg, fading, estimation_stats(cfg, fading, p_p)


# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE = []


def report(criterion: int, passed: bool, detail: str) -> None:
    line = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append((criterion, line))
    print(line)
