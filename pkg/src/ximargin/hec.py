"""Generic alternating root-finding / optimization solver for root-min problems.

The problem: find a parameter value where the inner optimum of a bivariate
function crosses zero,

    f(eps) := min_x g(eps, x) = 0   (root-min; root-max mirrors by negation).

Each outer iteration alternates a *contraction* (scalar root-finding on
``g`` with ``x`` frozen, bracketed between a known-nonnegative lower end and
the current iterate) and an *expansion* (monotone descent on ``g`` with
``eps`` frozen, driven to a stationary point).  The parameter iterates are
monotone and converge one-sidedly to a pseudoroot: a pair with g = 0 whose
x is stationary for the frozen-parameter slice.  Near a smooth pseudoroot
the parameter sequence converges quadratically.

Contraction uses Halley steps (first and second derivatives) safeguarded by
bracketing and bisection; rounding can put the computed root's residual on
the wrong side, in which case the root is nudged along the step direction
until the residual sign is restored.  Expansion is a safeguarded Newton
iteration on the slice derivative with step halving to enforce monotone
descent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ximargin.systems import Tolerances

_EPS = float(np.finfo(float).eps)


class RootSense(enum.Enum):
    ROOT_MAX = "root-max"
    ROOT_MIN = "root-min"


class BracketError(ArithmeticError):
    """The supplied interval does not bracket a root."""


class ContractViolationError(ValueError):
    """Initial data violates the sign convention of the solver."""


class ConvergenceError(RuntimeError):
    """Iteration budget exhausted; carries the trace gathered so far."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class TraceStep:
    """One phase of one outer iteration."""

    iteration: int
    phase: str
    eps: float
    x: float
    g: float


@dataclass(frozen=True)
class RootProblem:
    """A bivariate root-min / root-max problem instance.

    ``value(eps, x)`` returns g.  The optional derivative callables return
    ``(g, d1, d2)`` or ``(g, d1, d2, d2_reliable)`` (an object with those
    attributes also works); when absent the solver falls back to bisection
    (contraction) or finite differences (expansion).  ``x_domain`` must be a
    compact interval; ``project_x`` may replace plain clipping, e.g. with
    angle wrapping for circular domains.
    """

    value: Callable[[float, float], float]
    eps_lb: float
    eps_domain: tuple[float, float]
    x_domain: tuple[float, float]
    sense: RootSense = RootSense.ROOT_MIN
    derivs_eps: Optional[Callable] = None
    derivs_x: Optional[Callable] = None
    project_x: Optional[Callable[[float], float]] = None


@dataclass(frozen=True)
class PseudoRoot:
    """Converged output: g(eps, x) = 0 with x stationary for the slice at eps.

    ``x_second_derivative`` lets callers classify the stationary point
    (positive curvature means a local minimizer for root-min problems).
    ``stationary`` is False only when the expansion stalled before reaching
    the stationarity tolerance.
    """

    eps: float
    x: float
    g_value: float
    x_derivative: float
    x_second_derivative: float
    iterations: int
    sign_corrections: int
    stationary: bool
    trace: tuple[TraceStep, ...] = field(default_factory=tuple)

    def contraction_eps_sequence(self) -> list[float]:
        return [s.eps for s in self.trace if s.phase == "contract"]


def _as_derivs(ret):
    if hasattr(ret, "gamma") and hasattr(ret, "d1"):
        return float(ret.gamma), float(ret.d1), float(ret.d2), bool(ret.d2_reliable)
    if len(ret) == 3:
        g, d1, d2 = ret
        return float(g), float(d1), float(d2), True
    g, d1, d2, ok = ret
    return float(g), float(d1), float(d2), bool(ok)


class _Canonical:
    """Root-min, decreasing-parameter view of a RootProblem.

    Negates g for root-max instances and mirrors the parameter axis when the
    known-sign end lies above the start, so the engine below always sees
    eps_lb < eps with g(eps0, x0) <= 0 <= g(eps_lb, x).
    """

    def __init__(self, problem: RootProblem, mirror_eps: bool = False):
        self.problem = problem
        self.g_sign = -1.0 if problem.sense is RootSense.ROOT_MAX else 1.0
        self.eps_sign = -1.0 if mirror_eps else 1.0
        lo, hi = problem.x_domain
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise ContractViolationError("x_domain must be a finite interval")
        self._x_lo, self._x_hi = float(lo), float(hi)

    def to_user(self, eps: float) -> float:
        return self.eps_sign * eps

    def to_internal(self, eps: float) -> float:
        return self.eps_sign * eps

    def project(self, x: float) -> float:
        if self.problem.project_x is not None:
            return float(self.problem.project_x(x))
        return float(min(max(x, self._x_lo), self._x_hi))

    def value(self, eps: float, x: float) -> float:
        return self.g_sign * float(self.problem.value(self.to_user(eps), x))

    def derivs_eps(self, eps: float, x: float):
        if self.problem.derivs_eps is None:
            return self.value(eps, x), None, None, False
        g, d1, d2, ok = _as_derivs(self.problem.derivs_eps(self.to_user(eps), x))
        return self.g_sign * g, self.g_sign * self.eps_sign * d1, self.g_sign * d2, ok

    def derivs_x(self, eps: float, x: float):
        if self.problem.derivs_x is None:
            h = 1e-6 * (1.0 + abs(x))
            gp = self.value(eps, self.project(x + h))
            gm = self.value(eps, self.project(x - h))
            g0 = self.value(eps, x)
            return g0, (gp - gm) / (2 * h), (gp - 2 * g0 + gm) / (h * h), True
        g, d1, d2, ok = _as_derivs(self.problem.derivs_x(self.to_user(eps), x))
        return self.g_sign * g, self.g_sign * d1, self.g_sign * d2, ok


@dataclass
class _ContractResult:
    root: float
    g: float
    evals: int
    sign_corrections: int


def _contract_root_min(f, lo: float, hi: float, g_lo: float,
                       max_iter: int = 60) -> _ContractResult:
    """Root of a scalar function on [lo, hi] with g(lo) >= 0 >= g(hi).

    ``f(eps) -> (g, d1, d2, d2_ok)`` where the derivatives may be None.
    Takes Halley steps when they stay inside the bracket (Newton as second
    choice), bisection otherwise.  The returned root's residual is forced
    onto the nonpositive side, nudging along the last step if rounding put
    it on the wrong side.
    """
    g_hi, d1, d2, ok = f(hi)
    evals = 1
    floor = 1e-9 * (1.0 + abs(g_hi) + abs(g_lo))
    if g_lo < -floor or g_hi > floor:
        raise BracketError(
            f"no sign change on [{lo}, {hi}]: g(lo)={g_lo:.3e}, g(hi)={g_hi:.3e}"
        )
    if g_hi >= 0.0:
        # already a root at the top end (within rounding)
        return _ContractResult(hi, g_hi, evals, 0)
    x, gx = hi, g_hi
    neg_end = hi
    last_step = hi - lo
    for _ in range(max_iter):
        if hi - lo <= 2.0 * _EPS * (1.0 + abs(x)):
            break
        step = None
        if d1 is not None and np.isfinite(d1) and d1 != 0.0:
            if d2 is not None and ok and np.isfinite(d2):
                denom = 2.0 * d1 * d1 - gx * d2
                if denom != 0.0:
                    h = -2.0 * gx * d1 / denom
                    if np.isfinite(h) and lo < x + h < hi:
                        step = h
            if step is None:
                h = -gx / d1
                if np.isfinite(h) and lo < x + h < hi:
                    step = h
        if step is None:
            cand = 0.5 * (lo + hi)
            step = cand - x
        else:
            cand = x + step
        g_new, d1, d2, ok = f(cand)
        evals += 1
        if g_new > 0.0:
            lo = cand
        else:
            hi = cand
            neg_end = cand
        moved = abs(cand - x)
        x, gx = cand, g_new
        last_step = step
        if g_new == 0.0 or moved <= 2.0 * _EPS * (1.0 + abs(cand)):
            break
    corrections = 0
    if gx > 0.0:
        # Rounding left the residual on the wrong side; walk toward the
        # known-nonpositive end in growing multiples of the last step.
        corrections = 1
        h = max(abs(last_step), _EPS * (1.0 + abs(x)))
        direction = math.copysign(1.0, neg_end - x) if neg_end != x else 1.0
        fixed = False
        for _ in range(64):
            cand = x + direction * h
            if (direction > 0 and cand >= neg_end) or (direction < 0 and cand <= neg_end):
                break
            g_new, _, _, _ = f(cand)
            evals += 1
            if g_new <= 0.0:
                x, gx = cand, g_new
                fixed = True
                break
            h *= 2.0
        if not fixed:
            x = neg_end
            g_new, _, _, _ = f(x)
            evals += 1
            gx = min(g_new, 0.0)
    return _ContractResult(float(x), float(gx), evals, corrections)


@dataclass
class _ExpandResult:
    x: float
    g: float
    d1: float
    d2: float
    evals: int
    stationary: bool


def _expand_min(fder, x0: float, project, stat_tol: float,
                max_iter: int = 60) -> _ExpandResult:
    """Monotone descent to a stationary point of a scalar slice.

    Newton steps on the derivative when the curvature is positive and
    trustworthy, sign-guided probes otherwise; every accepted step must not
    increase the slice value.
    """
    x = project(x0)
    g, d1, d2, ok = fder(x)
    evals = 1
    fallback = 0.25 * (1.0 + abs(x))
    stationary = abs(d1) <= stat_tol * (1.0 + abs(g))
    for _ in range(max_iter):
        if abs(d1) <= stat_tol * (1.0 + abs(g)):
            stationary = True
            break
        if ok and d2 is not None and np.isfinite(d2) and d2 > _EPS * (1.0 + abs(g)):
            step = -d1 / d2
        else:
            step = -math.copysign(fallback, d1)
        accepted = False
        for _ in range(50):
            cand = project(x + step)
            if cand == x:
                break
            g_new, d1_new, d2_new, ok_new = fder(cand)
            evals += 1
            if g_new <= g:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        moved = abs(cand - x)
        x, g, d1, d2, ok = cand, g_new, d1_new, d2_new, ok_new
        fallback = max(2.0 * moved, 64.0 * _EPS * (1.0 + abs(x)))
        if moved <= 2.0 * _EPS * (1.0 + abs(x)):
            stationary = abs(d1) <= stat_tol * (1.0 + abs(g))
            break
    return _ExpandResult(float(x), float(g), float(d1),
                         float(d2) if d2 is not None else float("nan"),
                         evals, stationary)


def contract(problem: RootProblem, x_fixed: float,
             bracket: tuple[float, float], max_iter: int = 60) -> float:
    """Root of the frozen-x slice within a bracket.

    Accepts either orientation of the sign change.  The residual of the
    returned root lies on the nonpositive side for root-min problems (the
    nonnegative side for root-max).
    """
    can = _Canonical(problem)
    lo, hi = sorted(float(b) for b in bracket)

    def f(e):
        g, d1, d2, ok = can.derivs_eps(e, x_fixed)
        return g, d1, d2, ok

    g_lo = f(lo)[0]
    g_hi = f(hi)[0]
    if g_lo >= 0.0 >= g_hi:
        res = _contract_root_min(f, lo, hi, g_lo, max_iter=max_iter)
        return res.root
    if g_hi >= 0.0 >= g_lo:
        # mirror the axis so the engine sees its canonical orientation
        def fm(e):
            g, d1, d2, ok = f(-e)
            return g, (-d1 if d1 is not None else None), d2, ok

        res = _contract_root_min(fm, -hi, -lo, g_hi, max_iter=max_iter)
        return -res.root
    raise BracketError(f"no sign change on [{lo}, {hi}]")


def expand(problem: RootProblem, eps_fixed: float, x0: float,
           max_iter: int = 60, tol: Tolerances | None = None) -> float:
    """Stationary point of the frozen-parameter slice, improving monotonically.

    Root-min problems descend, root-max problems ascend; an already
    stationary start is returned unchanged.
    """
    tol = tol or Tolerances()
    can = _Canonical(problem)
    e_int = can.to_internal(eps_fixed)
    res = _expand_min(lambda x: can.derivs_x(e_int, x), x0, can.project,
                      tol.stationarity_tol, max_iter=max_iter)
    return res.x


def hec_solve(problem: RootProblem, eps0: float, x0: float,
              tol: Tolerances | None = None, *, max_outer: int = 100,
              max_inner: int = 60) -> PseudoRoot:
    """Alternate contraction and expansion until a pseudoroot is reached.

    Initial data must satisfy the sign convention (root-min: g(eps0, x0)
    nonpositive while every slice value at eps_lb is nonnegative).  The
    parameter iterates move monotonically from eps0 toward eps_lb and the
    iteration stops when either the current x is stationary for the current
    slice or both coordinates stop changing at 100x machine precision,
    checked after each phase.
    """
    tol = tol or Tolerances()
    if problem.eps_lb == eps0:
        raise ContractViolationError("eps_lb and eps0 must differ")
    can = _Canonical(problem, mirror_eps=problem.eps_lb > eps0)
    e_k = can.to_internal(eps0)
    e_lb = can.to_internal(problem.eps_lb)
    x_k = can.project(x0)
    g_k = can.value(e_k, x_k)
    if g_k > 1e-12 * (1.0 + abs(g_k)):
        raise ContractViolationError(
            f"initial value must be nonpositive for root-min (got {g_k:.3e})"
        )
    trace = [TraceStep(0, "init", can.to_user(e_k), x_k, g_k)]
    sign_fixes = 0
    x_change = math.inf

    def small(delta, ref):
        return abs(delta) <= 100.0 * _EPS * (1.0 + abs(ref))

    def finish(eps, x, g, d1, d2, k, stationary):
        return PseudoRoot(
            eps=can.to_user(eps), x=x, g_value=g, x_derivative=d1,
            x_second_derivative=d2, iterations=k + 1,
            sign_corrections=sign_fixes, stationary=stationary,
            trace=tuple(trace),
        )

    for k in range(max_outer):
        g_lb = can.value(e_lb, x_k)
        res = _contract_root_min(
            lambda e: can.derivs_eps(e, x_k), e_lb, e_k, g_lb, max_iter=max_inner
        )
        sign_fixes += res.sign_corrections
        e_hat = res.root
        trace.append(TraceStep(k, "contract", can.to_user(e_hat), x_k, res.g))
        eps_change = e_k - e_hat
        g_s, d1x, d2x, _ = can.derivs_x(e_hat, x_k)
        if abs(d1x) <= tol.stationarity_tol * (1.0 + abs(g_s)):
            return finish(e_hat, x_k, res.g, d1x, d2x, k, True)
        if small(eps_change, e_hat) and small(x_change, x_k):
            return finish(e_hat, x_k, res.g, d1x, d2x, k, False)
        exp = _expand_min(
            lambda x: can.derivs_x(e_hat, x), x_k, can.project,
            tol.stationarity_tol, max_iter=max_inner,
        )
        trace.append(TraceStep(k, "expand", can.to_user(e_hat), exp.x, exp.g))
        x_change = exp.x - x_k
        if small(x_change, exp.x) and small(eps_change, e_hat):
            return finish(e_hat, exp.x, exp.g, exp.d1, exp.d2, k, exp.stationary)
        e_k, x_k, g_k = e_hat, exp.x, exp.g
    raise ConvergenceError(
        f"no pseudoroot within {max_outer} outer iterations", tuple(trace)
    )
