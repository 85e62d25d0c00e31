"""Geometric programs: posynomial algebra, local monomial fits and a barrier solver.

A GP is solved in log variables u = log x, where every posynomial becomes a
log-sum-exp of affine functions and the program is convex.  The solver is a
standard barrier method with damped Newton centering and a phase-I search
for a strictly feasible start.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


U_LIMIT = 300.0


class GpError(RuntimeError):
    pass


class Infeasible(GpError):
    pass


class Unbounded(GpError):
    pass


class MaxIterations(GpError):
    pass


# ---------------------------------------------------------------------------
# algebra


@dataclass(frozen=True)
class Monomial:
    coeff: float
    exponents: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.coeff > 0 and math.isfinite(self.coeff)):
            raise ValueError(f"monomial coefficient must be positive, got {self.coeff}")
        exps = {k: float(v) for k, v in self.exponents.items() if v != 0}
        object.__setattr__(self, "exponents", exps)

    def __call__(self, point: Mapping[str, float]) -> float:
        _check_point(point, self.exponents)
        return self.coeff * math.prod(point[k] ** e for k, e in self.exponents.items())

    def __mul__(self, other):
        if isinstance(other, Monomial):
            exps = dict(self.exponents)
            for k, e in other.exponents.items():
                exps[k] = exps.get(k, 0.0) + e
            return Monomial(self.coeff * other.coeff, exps)
        if isinstance(other, Posynomial):
            return Posynomial([self * t for t in other.terms])
        return Monomial(self.coeff * float(other), self.exponents)

    __rmul__ = __mul__

    def __pow__(self, k: float) -> "Monomial":
        return Monomial(self.coeff ** k, {v: e * k for v, e in self.exponents.items()})

    def __truediv__(self, other):
        if isinstance(other, Monomial):
            return self * other ** -1
        return Monomial(self.coeff / float(other), self.exponents)

    def __add__(self, other):
        return Posynomial([self]) + other

    @property
    def variables(self) -> set[str]:
        return set(self.exponents)


@dataclass(frozen=True)
class Posynomial:
    terms: tuple[Monomial, ...]

    def __init__(self, terms: Iterable[Monomial]):
        terms = tuple(terms)
        if not terms:
            raise ValueError("a posynomial needs at least one term")
        object.__setattr__(self, "terms", terms)

    def __call__(self, point: Mapping[str, float]) -> float:
        return eval_posynomial(self, point)

    def __add__(self, other):
        if isinstance(other, Monomial):
            return Posynomial(self.terms + (other,))
        if isinstance(other, Posynomial):
            return Posynomial(self.terms + other.terms)
        return Posynomial(self.terms + (Monomial(float(other)),))

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, Posynomial):
            return Posynomial([a * b for a in self.terms for b in other.terms])
        return Posynomial([t * other for t in self.terms])

    __rmul__ = __mul__

    def __truediv__(self, m):
        if isinstance(m, Posynomial):
            raise TypeError("division by a posynomial does not give a posynomial")
        return Posynomial([t / m for t in self.terms])

    @property
    def variables(self) -> set[str]:
        return set().union(*(t.variables for t in self.terms))


def as_posynomial(p) -> Posynomial:
    if isinstance(p, Posynomial):
        return p
    if isinstance(p, Monomial):
        return Posynomial([p])
    raise TypeError(f"expected Monomial or Posynomial, got {type(p).__name__}")


def _check_point(point, names):
    for k in names:
        v = point[k]
        if not v > 0:
            raise ValueError(f"variable {k} must be positive, got {v}")


def eval_posynomial(p, point: Mapping[str, float], log_domain: bool = False) -> float:
    """Sum of coeff * prod x^e; ``log_domain`` evaluates exp(logsumexp(...)) instead."""
    p = as_posynomial(p)
    _check_point(point, p.variables)
    if not log_domain:
        return float(sum(t(point) for t in p.terms))
    z = np.array([math.log(t.coeff) + sum(e * math.log(point[k]) for k, e in t.exponents.items())
                  for t in p.terms])
    return float(math.exp(_lse(z)))


def _lse(z: np.ndarray) -> float:
    m = float(np.max(z))
    return m + math.log(float(np.sum(np.exp(z - m))))


# ---------------------------------------------------------------------------
# local approximations


def monomial_approx(p, anchor: Mapping[str, float]) -> Monomial:
    """Monomial matching the value and log-gradient of ``p`` at ``anchor``.

    For 1 + g this gives exponent g/(1+g) and coefficient (1+g) g^(-g/(1+g));
    for x + y + xy it gives the usual lambda_1, lambda_2, eta fit.
    """
    return am_gm_lower_bound(as_posynomial(p).terms, anchor)


def am_gm_lower_bound(terms: Iterable[Monomial], anchor: Mapping[str, float]) -> Monomial:
    """prod (term_k / nu_k)^nu_k with nu_k the share of term k at the anchor.

    Equal to the sum at the anchor and a lower bound on it everywhere.
    """
    terms = list(terms)
    vals = np.array([t(anchor) for t in terms])
    nu = vals / vals.sum()
    log_c = 0.0
    exps: dict[str, float] = {}
    for t, w in zip(terms, nu):
        if w == 0:
            continue
        log_c += w * (math.log(t.coeff) - math.log(w))
        for k, e in t.exponents.items():
            exps[k] = exps.get(k, 0.0) + w * e
    return Monomial(math.exp(log_c), exps)


def one_plus_fit(g_hat: float) -> tuple[float, float]:
    """(mu, omega) with 1 + g ~ omega g^mu near g_hat."""
    mu = g_hat / (1.0 + g_hat)
    return mu, (1.0 + g_hat) * g_hat ** (-mu)


def xy_fit(x_hat: float, y_hat: float) -> tuple[float, float, float]:
    """(lambda_1, lambda_2, eta) with x + y + xy ~ eta x^lambda_1 y^lambda_2."""
    f = x_hat + y_hat + x_hat * y_hat
    l1 = x_hat * (1 + y_hat) / f
    l2 = y_hat * (1 + x_hat) / f
    return l1, l2, f / (x_hat**l1 * y_hat**l2)


# ---------------------------------------------------------------------------
# problems


@dataclass
class GpProblem:
    """minimize objective s.t. every constraint <= 1 and lo <= x <= hi."""

    objective: Posynomial
    constraints: list[Posynomial] = field(default_factory=list)
    bounds: dict[str, tuple[float, float]] = field(default_factory=dict)
    variables: list[str] | None = None

    def __post_init__(self):
        self.objective = as_posynomial(self.objective)
        self.constraints = [as_posynomial(c) for c in self.constraints]
        used = self.objective.variables.union(*(c.variables for c in self.constraints))
        if self.variables is None:
            self.variables = sorted(used | set(self.bounds))
        undeclared = (used | set(self.bounds)) - set(self.variables)
        if undeclared:
            raise ValueError(f"undeclared variables: {sorted(undeclared)}")
        for k, (lo, hi) in self.bounds.items():
            if not (0 < lo <= hi < math.inf or (0 < lo and hi == math.inf)):
                raise ValueError(f"bad bounds for {k}: {lo}, {hi}")


@dataclass(frozen=True)
class GpSolution:
    x: dict[str, float]
    objective: float
    kkt_residual: float
    max_constraint: float
    newton_steps: int
    outer_iterations: int


class _LogSumExp:
    """log of a posynomial as a function of u = log x."""

    def __init__(self, p: Posynomial, index: dict[str, int]):
        self.A = np.zeros((len(p.terms), len(index)))
        self.b = np.empty(len(p.terms))
        for r, t in enumerate(p.terms):
            self.b[r] = math.log(t.coeff)
            for k, e in t.exponents.items():
                self.A[r, index[k]] = e

    def value(self, u):
        return _lse(self.A @ u + self.b)

    def derivs(self, u):
        z = self.A @ u + self.b
        m = z.max()
        w = np.exp(z - m)
        s = w.sum()
        w /= s
        g = self.A.T @ w
        H = (self.A.T * w) @ self.A - np.outer(g, g)
        return m + math.log(s), g, H


class _Affine:
    """a.u + c, used for box bounds in log space."""

    def __init__(self, a, c):
        self.a = a
        self.c = c

    def value(self, u):
        return float(self.a @ u + self.c)

    def derivs(self, u):
        return self.value(u), self.a, np.zeros((self.a.size, self.a.size))


def _newton_direction(H, g):
    n = g.size
    try:
        return np.linalg.solve(H + 1e-12 * np.eye(n), -g)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(H, -g, rcond=None)[0]


class _Barrier:
    """t f0(u) - sum log(-f_i(u)) with Newton centering.

    Affine rows (box bounds) are stacked into one matrix; only the
    log-sum-exp rows are evaluated one by one.
    """

    ALPHA, BETA = 0.3, 0.5
    PURE_NEWTON = 0.2

    def __init__(self, f0, fs, newton_tol, max_newton):
        self.f0 = f0
        self.fs = [f for f in fs if not isinstance(f, _Affine)]
        aff = [f for f in fs if isinstance(f, _Affine)]
        self.A = np.array([f.a for f in aff]) if aff else None
        self.c = np.array([f.c for f in aff]) if aff else None
        self.newton_tol = newton_tol
        self.max_newton = max_newton
        self.steps = 0

    def phi(self, u, t):
        vals = [f.value(u) for f in self.fs]
        if self.A is not None:
            vals.extend(self.A @ u + self.c)
        if any(v >= 0 for v in vals):
            return math.inf
        return t * self.f0.value(u) - sum(math.log(-v) for v in vals)

    def grad_hess(self, u, t):
        v0, g0, H0 = self.f0.derivs(u)
        g, H = t * g0, t * H0
        for f in self.fs:
            v, gi, Hi = f.derivs(u)
            g = g + gi / (-v)
            H = H + Hi / (-v) + np.outer(gi, gi) / v**2
        if self.A is not None:
            v = self.A @ u + self.c
            g = g + self.A.T @ (1.0 / -v)
            H = H + (self.A.T / v**2) @ self.A
        return g, H

    def center(self, u, t, stop=None):
        prev = math.inf
        for _ in range(self.max_newton):
            g, H = self.grad_hess(u, t)
            d = _newton_direction(H, g)
            lam = math.sqrt(max(float(-g @ d), 0.0))
            if lam <= self.newton_tol:
                return u, True
            if lam < self.PURE_NEWTON and math.isfinite(self.phi(u + d, t)):
                # quadratic phase: at large t rounding in phi swamps the decrease,
                # so take full steps and stop once lambda no longer shrinks
                if lam >= prev:
                    return u, True
                prev, s = lam, 1.0
            else:
                prev, s, phi_u = math.inf, 1.0, self.phi(u, t)
                while self.phi(u + s * d, t) > phi_u + self.ALPHA * s * float(g @ d):
                    s *= self.BETA
                    if s < 1e-20:
                        return u, True
            u = u + s * d
            self.steps += 1
            if stop is not None and stop(u):
                return u, True
        return u, False


class _SlackShift:
    """f(u) - s where s is the last coordinate of the extended variable."""

    def __init__(self, f, n):
        self.f, self.n = f, n

    def value(self, v):
        return self.f.value(v[:self.n]) - v[self.n]

    def derivs(self, v):
        val, g, H = self.f.derivs(v[:self.n])
        G = np.append(g, -1.0)
        HH = np.zeros((self.n + 1, self.n + 1))
        HH[:self.n, :self.n] = H
        return val - v[self.n], G, HH


def kkt_residual(f0, fs, u, t) -> float:
    """Log-domain KKT residual with the barrier duals lambda_i = 1/(-t f_i(u))."""
    _, stat, _ = f0.derivs(u)
    stat = stat.copy()
    comp = []
    for f in fs:
        v, gi, _ = f.derivs(u)
        lam = 1.0 / (-t * v)
        stat += lam * gi
        comp.append(lam * v)
    return float(np.sqrt(stat @ stat + np.sum(np.square(comp))))


def _barrier_solve(f0, fs, u0, tol, max_outer, max_newton, stop=None):
    solver = _Barrier(f0, fs, tol / 10, max_newton)
    u, t = u0, 1.0
    for outer in range(1, max_outer + 1):
        u, ok = solver.center(u, t, stop)
        # the residual includes complementarity, so it bounds the gap by sqrt(m) tol;
        # rounding can stall Newton at large t once the point is already optimal
        done = kkt_residual(f0, fs, u, t) <= tol
        if not ok and not done:
            raise MaxIterations("Newton centering did not converge")
        if done or (stop is not None and stop(u)):
            return u, t, outer, solver.steps
        t *= 10.0
    raise MaxIterations("barrier method did not converge")


def _compile(problem: GpProblem):
    index = {k: i for i, k in enumerate(problem.variables)}
    n = len(index)
    f0 = _LogSumExp(problem.objective, index)
    fs = [_LogSumExp(c, index) for c in problem.constraints]
    # implicit box |log x| <= U_LIMIT keeps every barrier subproblem bounded
    for i in range(n):
        a = np.zeros(n)
        a[i] = 1.0
        fs += [_Affine(a, -U_LIMIT), _Affine(-a, -U_LIMIT)]
    for k, (lo, hi) in problem.bounds.items():
        a = np.zeros(n)
        a[index[k]] = 1.0
        fs.append(_Affine(-a, math.log(lo)))
        if hi < math.inf:
            fs.append(_Affine(a, -math.log(hi)))
    return index, f0, fs


def _start_point(problem, index):
    u = np.zeros(len(index))
    for k, (lo, hi) in problem.bounds.items():
        u[index[k]] = math.log(lo) + (math.log(hi / lo) / 2 if hi < math.inf else 1.0)
    return u


def _phase_one(fs, u0, tol, max_outer, max_newton):
    """Find u with every f_i(u) < 0, or raise Infeasible."""
    n = u0.size
    worst = max(f.value(u0) for f in fs)
    if worst < 0:
        return u0
    v0 = np.append(u0, worst + 1.0)
    shifted = [_SlackShift(f, n) for f in fs]
    # floor on the slack keeps the auxiliary problem bounded
    floor = np.zeros(n + 1)
    floor[n] = -1.0
    shifted.append(_Affine(floor, -1.0))
    obj = _Affine(np.eye(n + 1)[n], 0.0)
    margin = -1e-6

    def done(v):
        return v[n] < margin and max(f.value(v[:n]) for f in fs) < 0

    try:
        v, _, _, _ = _barrier_solve(obj, shifted, v0, tol, max_outer, max_newton, done)
    except MaxIterations:
        raise Infeasible("phase I did not find a strictly feasible point") from None
    if not max(f.value(v[:n]) for f in fs) < 0:
        raise Infeasible(f"phase I optimum {v[n]:.3g} is not negative")
    return v[:n]


def _certify_ray(problem, index, d) -> bool:
    """True if every objective term decreases and no constraint term grows along d."""
    def slopes(p):
        return np.array([sum(e * d[index[k]] for k, e in t.exponents.items()) for t in p.terms])

    if not np.all(slopes(problem.objective) < -1e-9):
        return False
    for c in problem.constraints:
        if np.any(slopes(c) > 1e-9):
            return False
    for k, (lo, hi) in problem.bounds.items():
        if d[index[k]] < -1e-9 or (hi < math.inf and d[index[k]] > 1e-9):
            return False
    return True


def gp_solve(problem: GpProblem, tol: float = 1e-6, max_outer: int = 60,
             max_newton: int = 200) -> GpSolution:
    """Solve a GP; the returned point satisfies every constraint to 1 + 10 tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    index, f0, fs = _compile(problem)
    u0 = _start_point(problem, index)
    u0 = _phase_one(fs, u0, tol, max_outer, max_newton)

    def escaped(u):
        return float(np.max(np.abs(u))) > U_LIMIT - 1.0

    u, t, outer, steps = _barrier_solve(f0, fs, u0, tol, max_outer, max_newton, escaped)
    if escaped(u):
        d = (u - u0) / np.linalg.norm(u - u0)
        if _certify_ray(problem, index, d):
            raise Unbounded("objective decreases without bound along a feasible ray")
        raise MaxIterations("iterates reached the variable range limit")

    kkt = kkt_residual(f0, fs, u, t)
    x = {k: float(math.exp(u[i])) for k, i in index.items()}
    cons = [eval_posynomial(c, x) for c in problem.constraints]
    return GpSolution(x, eval_posynomial(problem.objective, x), kkt,
                      max(cons, default=0.0), steps, outer)


# ---------------------------------------------------------------------------
# plain-text exchange format


def _format_monomial(m: Monomial) -> str:
    parts = [repr(float(m.coeff))] + [f"{k}:{e!r}" for k, e in sorted(m.exponents.items())]
    return " ".join(parts)


def export_text(problem: GpProblem) -> str:
    """One monomial per line under ``objective`` / ``constraint`` / ``bounds`` headers."""
    lines = ["variables " + " ".join(problem.variables), "objective"]
    lines += [_format_monomial(t) for t in problem.objective.terms]
    for c in problem.constraints:
        lines.append("constraint")
        lines += [_format_monomial(t) for t in c.terms]
    if problem.bounds:
        lines.append("bounds")
        lines += [f"{k} {float(lo)!r} {float(hi)!r}" for k, (lo, hi) in sorted(problem.bounds.items())]
    return "\n".join(lines) + "\n"


def import_text(text: str) -> GpProblem:
    objective: list[Monomial] = []
    constraints: list[list[Monomial]] = []
    bounds: dict[str, tuple[float, float]] = {}
    variables = None
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        try:
            if head == "variables":
                variables = rest
            elif head == "objective" and not rest:
                section = "objective"
            elif head == "constraint" and not rest:
                section = "constraint"
                constraints.append([])
            elif head == "bounds" and not rest:
                section = "bounds"
            elif section == "bounds":
                lo, hi = float(rest[0]), float(rest[1])
                bounds[head] = (lo, hi)
            elif section in ("objective", "constraint"):
                exps = {}
                for item in rest:
                    k, e = item.rsplit(":", 1)
                    exps[k] = exps.get(k, 0.0) + float(e)
                m = Monomial(float(head), exps)
                (objective if section == "objective" else constraints[-1]).append(m)
            else:
                raise ValueError("content before any section header")
        except (ValueError, IndexError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    if not objective:
        raise ValueError("no objective terms")
    return GpProblem(Posynomial(objective), [Posynomial(c) for c in constraints], bounds,
                     variables)
