"""Outer drivers computing the extremal passivity parameter.

The driver starts just inside the upper bracket end, looks for a frequency
where gamma is negative (cheap probes and a grid first, the certifying
pencil afterwards), runs the expansion-contraction solver from there, steps
the estimate just below the returned pseudoroot, and repeats until the
pencil certifies that no negative region remains.  The most recent
pseudoroot frequency is injected into every recheck so that near-tangential
zeros lost to rounding cannot stall the loop.

Discrete-time models additionally need a pointwise positivity check each
pass (gamma can be negative on the whole circle, leaving the pencil with no
unimodular eigenvalues); after the first pseudoroot that probe happens a
quarter turn away from it, since the pseudoroot frequency itself sits on a
zero and its sign is pure rounding noise.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ximargin.evaluation import (
    EvalCache,
    build_cache,
    gamma,
    gamma_derivs_omega,
    gamma_derivs_xi,
)
from ximargin.hec import ConvergenceError, PseudoRoot, RootProblem, RootSense, hec_solve
from ximargin.pencils import (
    NegativeInterval,
    SolveCounters,
    _wrap_angle,
    gamma_zeros,
    negative_intervals,
)
from ximargin.systems import (
    InvalidParameterError,
    StateSpaceSystem,
    Tolerances,
    XiBracket,
    xi_bracket,
)

INTERVAL_RULES = ("most-negative", "widest", "leftmost")

_MAX_RESTARTS = 50


class Certificate(enum.Enum):
    """How the final estimate was certified."""

    NO_NEGATIVE_REGION = "no-negative-region"
    BRACKET_DEGENERATE = "bracket-degenerate"
    ABSOLUTE_MODE = "absolute-mode"


@dataclass(frozen=True)
class EigCounts:
    """Eigenvalue-problem tally for one solver run."""

    pencil_order: int
    pencil_solves: int
    small_solves: int


@dataclass(frozen=True)
class XiResult:
    """Final estimate with certification and work diagnostics.

    ``pseudoroots`` holds the solver's converged pseudoroots (empty for the
    non-pseudoroot algorithms); ``iterates`` records the per-step (xi,
    omega) pairs of whichever algorithm produced the result.
    """

    xi: float
    bracket: XiBracket
    pseudoroots: tuple[PseudoRoot, ...]
    restarts: int
    eig_counts: EigCounts
    elapsed: float
    certificate: Certificate
    algorithm: str
    tolerance: float
    iterates: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    @property
    def hec_avg_inner_iters(self) -> float | None:
        if not self.pseudoroots:
            return None
        return float(np.mean([p.iterations for p in self.pseudoroots]))


def select_interval(intervals: list[NegativeInterval], rule: str) -> NegativeInterval:
    """Pick the negative interval whose midpoint seeds the next solver run."""
    if rule == "most-negative":
        return min(intervals, key=lambda iv: iv.gamma_mid)
    if rule == "widest":
        return max(intervals, key=lambda iv: iv.width)
    if rule == "leftmost":
        return min(intervals, key=lambda iv: iv.omega_lo)
    raise InvalidParameterError(f"unknown interval rule {rule!r}; choose from {INTERVAL_RULES}")


def _omega_projector(cache: EvalCache, half_width: float):
    """Projection keeping frequencies inside the compact search domain.

    Real-data models search only nonnegative frequencies (gamma is even),
    implemented as reflection; discrete models wrap around the circle.
    """
    if cache.is_continuous:
        if cache.is_real:
            return lambda w: min(abs(w), half_width)
        return lambda w: min(max(w, -half_width), half_width)
    if cache.is_real:
        return lambda w: abs(_wrap_angle(w))
    return _wrap_angle


def probe_near_zeros(cache: EvalCache, zs, xi: float,
                     counters: SolveCounters | None = None) -> float | None:
    """Look for a negative point immediately beside confirmed zeros.

    Midpoint probing between zeros fails when one endpoint of a negative
    interval was rejected (zeros almost on top of a resolvent pole defeat
    the confirmation test near the stability limit).  A single surviving
    zero still brackets the region, so small one-sided offsets around each
    zero recover a usable starting point.
    """
    for w in zs.omegas:
        for rel in (1e-9, 1e-7, 1e-5, 1e-3):
            h = rel * (1.0 + abs(w))
            for cand in (w + h, w - h):
                if counters is not None:
                    counters.small_solves += 1
                if gamma(cache, xi, float(cand)).gamma < 0.0:
                    return float(cand)
    return None


def _counted_gamma(cache: EvalCache, counters: SolveCounters):
    def value(xi, w):
        counters.small_solves += 1
        return gamma(cache, xi, w).gamma

    def d_eps(xi, w):
        counters.small_solves += 1
        return gamma_derivs_xi(cache, xi, w)

    def d_x(xi, w):
        counters.small_solves += 1
        return gamma_derivs_omega(cache, xi, w)

    return value, d_eps, d_x


def initial_negative_search(cache: EvalCache, xi0: float, omega0: float,
                            budget: int = 128,
                            counters: SolveCounters | None = None) -> float | None:
    """Cheap hunt for a frequency with gamma < 0 before paying for a pencil.

    Probes the user's frequency, then a grid (log-spaced symmetric for
    continuous models, uniform on the circle for discrete ones), then runs
    short monotone descents from the best few grid points, returning as
    soon as any evaluation goes negative.  Returns None when the budget is
    spent without success.
    """
    counters = counters if counters is not None else SolveCounters()

    def val(w: float) -> float:
        counters.small_solves += 1
        return gamma(cache, xi0, float(w)).gamma

    project = _omega_projector(cache, half_width=math.inf)
    omega0 = project(omega0)
    if val(omega0) < 0.0:
        return float(omega0)
    if cache.is_continuous:
        w_max = 10.0 * (cache.a_norm + 1.0)
        base = np.geomspace(max(1e-3, 1e-4 * w_max), w_max, max(budget // 2, 8))
        if cache.is_real:
            grid = np.concatenate([[0.0], base])
        else:
            grid = np.concatenate([-base[::-1], [0.0], base])
    else:
        if cache.is_real:
            grid = np.linspace(0.0, np.pi, max(budget, 8))
        else:
            grid = np.linspace(-np.pi, np.pi, max(budget, 8), endpoint=False) + np.pi / budget
    values = np.array([val(w) for w in grid])
    order = np.argsort(values)
    for idx in order[:5]:
        w_cur, g_cur = float(grid[idx]), float(values[idx])
        if g_cur < 0.0:
            return w_cur
        for _ in range(15):
            d = gamma_derivs_omega(cache, xi0, w_cur)
            counters.small_solves += 1
            if d.gamma < 0.0:
                return w_cur
            if abs(d.d1) <= 1e-14 * (1.0 + abs(d.gamma)):
                break
            if d.d2_reliable and d.d2 > 0.0:
                step = -d.d1 / d.d2
            else:
                step = -math.copysign(0.25 * (1.0 + abs(w_cur)), d.d1)
            accepted = False
            for _ in range(20):
                w_new = project(w_cur + step)
                if w_new == w_cur:
                    break
                g_new = val(w_new)
                if g_new < 0.0:
                    return float(w_new)
                if g_new <= g_cur:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            w_cur, g_cur = float(w_new), float(g_new)
    return None


def _drive(system: StateSpaceSystem, omega0: float, tol: Tolerances,
           interval_rule: str, algorithm: str) -> XiResult:
    t0 = time.perf_counter()
    br = xi_bracket(system)
    counters = SolveCounters()
    tau = tol.tau
    lb, ub = br.xi_lb, br.xi_ub
    pseudoroots: list[PseudoRoot] = []
    iterates: list[tuple[float, float]] = []

    def result(xi_final: float, cert: Certificate) -> XiResult:
        return XiResult(
            xi=float(xi_final), bracket=br, pseudoroots=tuple(pseudoroots),
            restarts=len(pseudoroots),
            eig_counts=EigCounts(2 * system.n + system.m,
                                 counters.pencil_solves, counters.small_solves),
            elapsed=time.perf_counter() - t0, certificate=cert,
            algorithm=algorithm, tolerance=tau, iterates=tuple(iterates),
        )

    xi = ub - tau * abs(ub)
    if xi <= lb:
        return result(lb, Certificate.BRACKET_DEGENERATE)

    cache = build_cache(system)
    value, d_eps, d_x = _counted_gamma(cache, counters)
    d_norm = float(np.linalg.norm(system.D, 2))
    absolute = False
    last_omega: float | None = None

    w_half = 1e3 * (cache.a_norm + abs(ub) + 1.0)
    project = _omega_projector(cache, w_half)
    omega0 = project(float(omega0))

    find_negative = value(xi, omega0) >= 0.0
    omega_start = omega0

    for _ in range(_MAX_RESTARTS):
        if find_negative:
            omega_neg = None
            if not cache.is_continuous:
                # pointwise positivity probe; quarter-turn shift after a pseudoroot
                probe = 0.0 if last_omega is None else project(last_omega + 0.5 * math.pi)
                if value(xi, probe) < 0.0:
                    omega_neg = probe
            if omega_neg is None and last_omega is None:
                omega_neg = initial_negative_search(cache, xi, omega0,
                                                    counters=counters)
            if omega_neg is None:
                zs = gamma_zeros(cache, system, xi, tol, injected=last_omega,
                                 counters=counters)
                negs = negative_intervals(cache, zs, xi, counters=counters)
                if negs:
                    chosen = select_interval(negs, interval_rule)
                    omega_neg = chosen.omega_mid
                elif len(zs):
                    omega_neg = probe_near_zeros(cache, zs, xi, counters=counters)
                if omega_neg is None:
                    cert = Certificate.ABSOLUTE_MODE if absolute else Certificate.NO_NEGATIVE_REGION
                    return result(xi, cert)
                if len(zs):
                    w_half = max(w_half, 2.0 * float(np.abs(zs.omegas).max()) + 1.0)
                    project = _omega_projector(cache, w_half)
                omega_neg = project(omega_neg)
            omega_start = omega_neg
        x_lo = 0.0 if cache.is_real else -w_half
        x_domain = (x_lo, w_half) if cache.is_continuous else (-math.pi, math.pi)
        problem = RootProblem(
            value=value, eps_lb=lb, eps_domain=(lb, xi), x_domain=x_domain,
            sense=RootSense.ROOT_MIN, derivs_eps=d_eps, derivs_x=d_x,
            project_x=project,
        )
        pr = hec_solve(problem, eps0=xi, x0=omega_start, tol=tol)
        pseudoroots.append(pr)
        iterates.append((pr.eps, pr.x))
        last_omega = pr.x
        if abs(pr.eps) < 1e-10 * (1.0 + d_norm):
            absolute = True
        xi = pr.eps - (tau if absolute else tau * abs(pr.eps))
        if xi <= lb:
            return result(lb, Certificate.BRACKET_DEGENERATE)
        find_negative = True
    raise ConvergenceError(
        f"estimate still moving after {_MAX_RESTARTS} solver restarts",
        tuple(iterates),
    )


def compute_xi_cont(system: StateSpaceSystem, omega0: float = 0.0,
                    tol: Tolerances | None = None,
                    interval_rule: str = "most-negative") -> XiResult:
    """Extremal shift parameter of a continuous-time model.

    Follows the restart loop described in the module docstring; the result
    satisfies |xi - estimate| <= tau * |xi| (absolute tau when the margin is
    essentially zero, flagged by the ABSOLUTE_MODE certificate).
    """
    if not system.is_continuous:
        raise InvalidParameterError("compute_xi_cont needs a continuous-time model")
    return _drive(system, omega0, tol or Tolerances(), interval_rule, "hec")


def compute_xi_disc(system: StateSpaceSystem, omega0: float = 0.0,
                    tol: Tolerances | None = None,
                    interval_rule: str = "most-negative") -> XiResult:
    """Extremal shift parameter of a discrete-time model.

    Adds the per-pass pointwise positivity probe and the wrap-around zero
    interval to the continuous-time loop; the frequency domain is the
    circle.
    """
    if system.is_continuous:
        raise InvalidParameterError("compute_xi_disc needs a discrete-time model")
    return _drive(system, omega0, tol or Tolerances(), interval_rule, "hec")
