"""Zero certification for the boundary eigenvalue function.

For a fixed shift parameter, the frequencies where the boundary Hermitian
part becomes singular are exactly the real (continuous) or unimodular
(discrete) eigenvalues of a structured matrix pencil of order 2n+m.  The
reduced Hamiltonian / symplectic forms of order 2n are available when the
trailing feedthrough block is invertible and serve as cross-validation.

Candidate frequencies coming out of the dense solver carry rounding noise,
so each one is confirmed by evaluating gamma; candidates whose eigenvalues
drift too far from the boundary are discarded, and the most recent
pseudoroot frequency can be injected unconditionally to guard against
near-multiple eigenvalues being missed entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ximargin.evaluation import EvalCache, PoleError, phi_eval
from ximargin.systems import InvalidParameterError, StateSpaceSystem, Tolerances

_CLUSTER_RTOL = 1e-10


class SingularBlockError(ArithmeticError):
    """The trailing feedthrough block is numerically singular.

    The reduced Hamiltonian/symplectic form does not exist here; the full
    pencil form is preferred numerically.
    """


@dataclass
class SolveCounters:
    """Tally of eigenvalue problems solved, split by problem size.

    ``pencil_solves`` counts order-(2n+m) generalized problems;
    ``small_solves`` counts order-m Hermitian problems (one per gamma or
    derivative evaluation).
    """

    pencil_solves: int = 0
    small_solves: int = 0


@dataclass(frozen=True)
class ZeroSet:
    """Confirmed zero frequencies of gamma at a fixed shift, sorted ascending.

    ``injected`` flags entries that were added from outside the pencil
    computation (the missed-zero fix) rather than confirmed candidates.
    """

    omegas: np.ndarray
    injected: np.ndarray

    def __len__(self) -> int:
        return len(self.omegas)


@dataclass(frozen=True)
class NegativeInterval:
    """Open frequency interval on which gamma is negative, with its probe."""

    omega_lo: float
    omega_hi: float
    omega_mid: float
    gamma_mid: float

    @property
    def width(self) -> float:
        return self.omega_hi - self.omega_lo


def _d_tilde(system: StateSpaceSystem, xi: float) -> np.ndarray:
    return system.D.conj().T + system.D - 2.0 * xi * np.eye(system.m)


def build_pencil_cont(system: StateSpaceSystem, xi: float):
    """Order-(2n+m) Hermitian pencil whose real eigenvalues mark gamma zeros."""
    if not system.is_continuous:
        raise InvalidParameterError("continuous pencil needs a continuous model")
    n, m = system.n, system.m
    A_xi = system.A + (xi / 2.0) * np.eye(n)
    D_xi = system.D - (xi / 2.0) * np.eye(m)
    Z = np.zeros((n, n), dtype=complex)
    Mx = np.block([
        [Z, A_xi, system.B],
        [A_xi.conj().T, Z, system.C.conj().T],
        [system.B.conj().T, system.C, D_xi.conj().T + D_xi],
    ])
    N = np.zeros((2 * n + m, 2 * n + m), dtype=complex)
    N[:n, n:2 * n] = 1j * np.eye(n)
    N[n:2 * n, :n] = -1j * np.eye(n)
    return Mx, N


def build_hamiltonian_cont(system: StateSpaceSystem, xi: float) -> np.ndarray:
    """Reduced 2n x 2n form; its imaginary eigenvalues mark gamma zeros.

    Requires the shifted feedthrough Hermitian part to be invertible;
    otherwise raises SingularBlockError (use the full pencil instead).
    """
    if not system.is_continuous:
        raise InvalidParameterError("continuous reduced form needs a continuous model")
    n, m = system.n, system.m
    D_xi = system.D - (xi / 2.0) * np.eye(m)
    R = D_xi.conj().T + D_xi
    lam = np.linalg.eigvalsh(0.5 * (R + R.conj().T))
    if np.abs(lam).min() <= 1e-12 * max(1.0, np.abs(lam).max()):
        raise SingularBlockError(
            "feedthrough Hermitian part is singular; the pencil form is preferred numerically"
        )
    A_xi = system.A + (xi / 2.0) * np.eye(n)
    top = np.block([[A_xi, np.zeros((n, n))], [np.zeros((n, n)), -A_xi.conj().T]])
    left = np.vstack([system.B, system.C.conj().T])
    right = np.hstack([system.C, -system.B.conj().T])
    return top - left @ np.linalg.solve(R, right)


def build_pencil_disc(system: StateSpaceSystem, xi: float):
    """Order-(2n+m) pencil whose unimodular eigenvalues mark gamma zeros."""
    if system.is_continuous:
        raise InvalidParameterError("discrete pencil needs a discrete model")
    if xi >= 1.0:
        raise InvalidParameterError(f"discrete pencil needs xi < 1, got {xi}")
    n, m = system.n, system.m
    Zn = np.zeros((n, n), dtype=complex)
    Mx = np.block([
        [Zn, system.A, system.B],
        [(xi - 1.0) * np.eye(n), Zn, np.zeros((n, m))],
        [system.B.conj().T, system.C, _d_tilde(system, xi)],
    ])
    Nx = np.zeros((2 * n + m, 2 * n + m), dtype=complex)
    Nx[:n, n:2 * n] = (1.0 - xi) * np.eye(n)
    Nx[n:2 * n, :n] = -system.A.conj().T
    Nx[n:2 * n, 2 * n:] = -system.C.conj().T
    return Mx, Nx


def build_symplectic_disc(system: StateSpaceSystem, xi: float):
    """Reduced 2n x 2n symplectic pencil (S, T); needs invertible D-tilde."""
    if system.is_continuous:
        raise InvalidParameterError("symplectic pencil needs a discrete model")
    n = system.n
    Dt = _d_tilde(system, xi)
    lam = np.linalg.eigvalsh(0.5 * (Dt + Dt.conj().T))
    if np.abs(lam).min() <= 1e-12 * max(1.0, np.abs(lam).max()):
        raise SingularBlockError(
            "shifted feedthrough block is singular; the pencil form is preferred numerically"
        )
    B, C, A = system.B, system.C, system.A
    Dt_inv_Bh = np.linalg.solve(Dt, B.conj().T)
    Dt_inv_C = np.linalg.solve(Dt, C)
    S = np.block([
        [(xi - 1.0) * np.eye(n), np.zeros((n, n))],
        [-B @ Dt_inv_Bh, A - B @ Dt_inv_C],
    ])
    T = np.block([
        [(B @ Dt_inv_C - A).conj().T, C.conj().T @ Dt_inv_C],
        [np.zeros((n, n)), (1.0 - xi) * np.eye(n)],
    ])
    return S, T


def _finite_eigenvalues(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Finite generalized eigenvalues of (a, b) via dense QZ."""
    w = sla.eig(a, b, right=False, homogeneous_eigvals=True)
    alpha, beta = w[0], w[1]
    scale = np.abs(alpha) + np.abs(beta)
    finite = np.abs(beta) > 1e-12 * np.where(scale > 0, scale, 1.0)
    return alpha[finite] / beta[finite]


def _cluster(values: np.ndarray) -> np.ndarray:
    """Merge near-duplicate reals; representatives are cluster means."""
    if len(values) == 0:
        return values
    vals = np.sort(values)
    merged = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > _CLUSTER_RTOL * (1.0 + abs(vals[i])):
            merged.append(vals[start:i].mean())
            start = i
    return np.array(merged)


def _wrap_angle(omega: float) -> float:
    """Map an angle into (-pi, pi]."""
    w = float(np.remainder(omega + np.pi, 2.0 * np.pi) - np.pi)
    if w == -np.pi:
        w = np.pi
    return w


def _symmetrize_even(omegas: np.ndarray, circular: bool) -> np.ndarray:
    """Mirror a zero set of an even function to enforce +/- symmetry."""
    mags = _cluster(np.abs(omegas))
    out: list[float] = []
    for w in mags:
        if w <= _CLUSTER_RTOL:
            out.append(0.0)
        elif circular and abs(w - np.pi) <= _CLUSTER_RTOL * (1.0 + np.pi):
            out.append(np.pi)
        else:
            out.extend([-float(w), float(w)])
    return np.array(sorted(out))


def _cap_count(omegas: np.ndarray, cap: int) -> np.ndarray:
    """Merge the closest pair repeatedly until at most ``cap`` entries remain."""
    vals = np.sort(omegas)
    while len(vals) > cap:
        gaps = np.diff(vals)
        i = int(np.argmin(gaps))
        merged = 0.5 * (vals[i] + vals[i + 1])
        vals = np.concatenate([vals[:i], [merged], vals[i + 2:]])
    return vals


def _confirmed_gamma(cache: EvalCache, xi: float, omega: float,
                     tol: Tolerances, counters: SolveCounters | None) -> bool:
    try:
        phi = phi_eval(cache, xi, omega)
    except PoleError:
        return False
    lam = np.linalg.eigvalsh(phi)
    if counters is not None:
        counters.small_solves += 1
    scale = max(1.0, float(np.abs(lam).max()))
    return abs(float(lam[0])) <= tol.zero_confirm_tol * scale


def gamma_zeros(cache: EvalCache, system: StateSpaceSystem, xi: float,
                tol: Tolerances | None = None, injected: float | None = None,
                counters: SolveCounters | None = None) -> ZeroSet:
    """Confirmed zero frequencies of gamma at the given shift.

    Pencil eigenvalues close enough to the boundary become candidates
    (continuous: imaginary part small relative to the eigenvalue magnitude;
    discrete: modulus near one); each candidate must then pass the gamma
    confirmation test.  ``injected`` is appended unconditionally and flagged;
    near-tangential zeros are otherwise easily lost to rounding.
    """
    tol = tol or Tolerances()
    if cache.is_continuous:
        Mx, Nx = build_pencil_cont(system, xi)
    else:
        Mx, Nx = build_pencil_disc(system, xi)
    if counters is not None:
        counters.pencil_solves += 1
    eigs = _finite_eigenvalues(Mx, Nx)
    if cache.is_continuous:
        keep = np.abs(eigs.imag) <= tol.eig_realness_tol * np.maximum(1.0, np.abs(eigs))
        candidates = eigs[keep].real
    else:
        keep = np.abs(np.abs(eigs) - 1.0) <= tol.eig_realness_tol
        candidates = np.angle(eigs[keep])
        candidates = np.array([_wrap_angle(w) for w in candidates])
    candidates = _cluster(candidates)
    confirmed = np.array(
        [w for w in candidates if _confirmed_gamma(cache, xi, float(w), tol, counters)]
    )
    if cache.is_real and len(confirmed):
        confirmed = _symmetrize_even(confirmed, circular=not cache.is_continuous)
    if len(confirmed) > 2 * cache.n:
        confirmed = _cap_count(confirmed, 2 * cache.n)
    omegas = [float(w) for w in confirmed]
    flags = [False] * len(omegas)
    if injected is not None:
        w_inj = _wrap_angle(float(injected)) if not cache.is_continuous else float(injected)
        near = [abs(w_inj - w) <= _CLUSTER_RTOL * (1.0 + abs(w_inj)) for w in omegas]
        if not any(near):
            omegas.append(w_inj)
            flags.append(True)
    order = np.argsort(omegas)
    return ZeroSet(
        omegas=np.array(omegas, dtype=float)[order],
        injected=np.array(flags, dtype=bool)[order],
    )


def negative_intervals(cache: EvalCache, zeros: ZeroSet, xi: float,
                       counters: SolveCounters | None = None) -> list[NegativeInterval]:
    """Open intervals between consecutive zeros where gamma is negative.

    Midpoints of consecutive zero pairs are probed; discrete zero lists are
    augmented with the smallest zero shifted by one full turn so the
    wrap-around interval is covered.  Continuous tails beyond the extreme
    zeros are theoretically nonnegative but probed one unit out as a safety
    check.
    """
    from ximargin.evaluation import gamma as _gamma

    def probe(omega: float) -> float:
        if counters is not None:
            counters.small_solves += 1
        return _gamma(cache, xi, float(omega)).gamma

    ws = list(map(float, zeros.omegas))
    intervals: list[NegativeInterval] = []
    if not ws:
        return intervals
    if not cache.is_continuous and len(ws) >= 1:
        ws = ws + [min(ws) + 2.0 * np.pi]
    for w1, w2 in zip(ws[:-1], ws[1:]):
        if w2 - w1 <= _CLUSTER_RTOL * (1.0 + abs(w1)):
            continue
        mid = 0.5 * (w1 + w2)
        g_mid = probe(mid)
        if g_mid < 0.0:
            intervals.append(NegativeInterval(w1, w2, mid, g_mid))
    if cache.is_continuous:
        for w_edge, direction in ((ws[0], -1.0), (ws[-1], +1.0)):
            probe_pt = w_edge + direction
            g_tail = probe(probe_pt)
            if g_tail < 0.0:
                lo, hi = sorted((w_edge, w_edge + 2.0 * direction))
                intervals.append(NegativeInterval(lo, hi, probe_pt, g_tail))
    return intervals


def xi_roots_at_omega(cache: EvalCache, system: StateSpaceSystem, omega: float,
                      tol: Tolerances | None = None,
                      counters: SolveCounters | None = None) -> np.ndarray:
    """All real shift values where gamma vanishes at a fixed frequency.

    The frozen-frequency pencil is linear in the shift, so its real
    generalized eigenvalues enumerate the candidates; each is confirmed
    against gamma before being returned (sorted ascending).
    """
    tol = tol or Tolerances()
    n, m = system.n, system.m
    if cache.is_continuous:
        M0, N0 = build_pencil_cont(system, 0.0)
        K0 = M0 - omega * N0
        G = np.zeros((2 * n + m, 2 * n + m), dtype=complex)
        G[:n, n:2 * n] = 0.5 * np.eye(n)
        G[n:2 * n, :n] = 0.5 * np.eye(n)
        G[2 * n:, 2 * n:] = -np.eye(m)
    else:
        z = np.exp(1j * omega)
        K0 = np.block([
            [np.zeros((n, n)), system.A - z * np.eye(n), system.B],
            [z * system.A.conj().T - np.eye(n), np.zeros((n, n)), z * system.C.conj().T],
            [system.B.conj().T, system.C, system.D.conj().T + system.D],
        ])
        G = np.zeros((2 * n + m, 2 * n + m), dtype=complex)
        G[:n, n:2 * n] = z * np.eye(n)
        G[n:2 * n, :n] = np.eye(n)
        G[2 * n:, 2 * n:] = -2.0 * np.eye(m)
    if counters is not None:
        counters.pencil_solves += 1
    eigs = _finite_eigenvalues(K0, -G)
    keep = np.abs(eigs.imag) <= tol.eig_realness_tol * np.maximum(1.0, np.abs(eigs))
    candidates = _cluster(eigs[keep].real)
    if not cache.is_continuous:
        candidates = candidates[candidates < 1.0 - 1e-14]
    confirmed = [float(x) for x in candidates
                 if _confirmed_gamma(cache, float(x), omega, tol, counters)]
    return np.array(sorted(confirmed), dtype=float)
