"""Pointwise evaluation of the boundary Hermitian part and its derivatives.

The central scalar is ``gamma(xi, omega)``: the smallest eigenvalue of the
Hermitian part of the shifted transfer function on the stability boundary
(imaginary axis for continuous models, unit circle for discrete ones).  A
one-time Hessenberg reduction of the state matrix makes every subsequent
resolvent application cost O(n^2), so a full evaluation with first and
second derivatives costs O(m n^2 + m^2 n + m^3).

Derivative formulas use the standard perturbation expansion of a simple
eigenvalue of a Hermitian matrix: with unit eigenvector v for the smallest
eigenvalue and remaining eigenpairs (lam_j, u_j),

    d1 = v^H P' v,
    d2 = v^H P'' v + 2 sum_j |u_j^H P' v|^2 / (lam_min - lam_j),

where P', P'' are the matrix derivatives of the boundary Hermitian part in
the chosen direction.  The needed resolvent moments Z_k are accumulated by
repeated Hessenberg solves.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ximargin.systems import InvalidParameterError, StateSpaceSystem, TimeDomain


class PoleError(ArithmeticError):
    """Evaluation point collides with a pole of the shifted resolvent."""

    def __init__(self, shift: complex):
        super().__init__(f"resolvent is singular at shift {shift}")
        self.shift = shift


@dataclass(frozen=True)
class EvalCache:
    """Hessenberg pre-reduction A = U H U^H with pre-rotated port matrices.

    H is upper Hessenberg (exact zeros below the first subdiagonal), U is
    unitary, CU = C @ U and UB = U^H @ B.  The cache is immutable and safe
    to share across threads.
    """

    H: np.ndarray
    U: np.ndarray
    CU: np.ndarray
    UB: np.ndarray
    D: np.ndarray
    domain: TimeDomain
    is_real: bool
    a_norm: float

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def is_continuous(self) -> bool:
        return self.domain is TimeDomain.CONTINUOUS


@dataclass(frozen=True)
class GammaValue:
    """Smallest eigenvalue of the boundary Hermitian part at one point.

    ``multiplicity_gap`` is the distance to the next eigenvalue (inf for
    single-port models); derivative formulas are only trustworthy when the
    gap is comfortably nonzero.
    """

    gamma: float
    eigvec: np.ndarray
    multiplicity_gap: float


@dataclass(frozen=True)
class GammaDerivatives:
    """gamma with first/second directional derivatives at a point.

    ``d2_reliable`` is False when the smallest eigenvalue is numerically
    multiple; d1 still comes from the eigenvector formula but callers should
    fall back to derivative-free steps instead of trusting d2.
    """

    gamma: float
    d1: float
    d2: float
    d2_reliable: bool


def build_cache(system: StateSpaceSystem) -> EvalCache:
    """Reduce the state matrix to Hessenberg form once; O(n^3)."""
    A = system.A
    n = system.n
    if n == 1:
        H, U = A.copy(), np.eye(1, dtype=complex)
    else:
        H, U = sla.hessenberg(np.array(A), calc_q=True)
        H = np.asarray(H, dtype=complex)
        U = np.asarray(U, dtype=complex)
        H[np.tril_indices(n, -2)] = 0.0
    if not (np.all(np.isfinite(H)) and np.all(np.isfinite(U))):
        raise ArithmeticError("Hessenberg reduction produced non-finite entries")
    a_norm = float(np.linalg.norm(A, 2))
    residual = np.linalg.norm(U @ H @ U.conj().T - A, 2)
    if residual > 1e-12 * max(a_norm, 1e-300):
        raise ArithmeticError(
            f"Hessenberg reduction residual {residual:.3e} exceeds 1e-12 * ||A||"
        )
    parts = {
        "H": H,
        "U": U,
        "CU": system.C @ U,
        "UB": U.conj().T @ system.B,
        "D": np.array(system.D),
    }
    for arr in parts.values():
        arr.setflags(write=False)
    return EvalCache(
        domain=system.domain,
        is_real=system.is_real,
        a_norm=a_norm,
        **parts,
    )


class _HessenbergSolver:
    """Givens factorization of (shift*I - H) for an upper-Hessenberg H.

    Factoring costs O(n^2); each subsequent solve costs O(n^2) per
    right-hand-side column.  Raises PoleError when the shifted matrix is
    numerically singular.
    """

    def __init__(self, H: np.ndarray, shift: complex):
        n = H.shape[0]
        R = shift * np.eye(n, dtype=complex) - H
        rotations = []
        for j in range(n - 1):
            f, g = R[j, j], R[j + 1, j]
            if g == 0.0:
                rotations.append((1.0, 0.0j))
                continue
            if f == 0.0:
                c, s = 0.0, g.conjugate() / abs(g)
            else:
                d = np.hypot(abs(f), abs(g))
                c = abs(f) / d
                s = (f / abs(f)) * g.conjugate() / d
            rotations.append((c, s))
            rj = R[j, j:].copy()
            rj1 = R[j + 1, j:].copy()
            R[j, j:] = c * rj + s * rj1
            R[j + 1, j:] = -s.conjugate() * rj + c * rj1
            R[j + 1, j] = 0.0
        diag = np.abs(np.diagonal(R))
        scale = max(np.abs(R).max(), 1.0)
        if (not np.all(np.isfinite(R))) or diag.min() <= 1e-300 * scale:
            raise PoleError(shift)
        self._R = R
        self._rotations = rotations
        self.shift = shift

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        b = np.array(rhs, dtype=complex)
        if b.ndim == 1:
            b = b[:, None]
        for j, (c, s) in enumerate(self._rotations):
            bj = b[j].copy()
            bj1 = b[j + 1].copy()
            b[j] = c * bj + s * bj1
            b[j + 1] = -np.conjugate(s) * bj + c * bj1
        return sla.solve_triangular(self._R, b)


def _boundary_shift(cache: EvalCache, xi: float, omega: float) -> complex:
    """Resolvent shift w so that Z_k = CU (w I - H)^{-k} UB."""
    if cache.is_continuous:
        return 1j * omega - xi / 2.0
    if xi >= 1.0:
        raise InvalidParameterError(f"discrete evaluation needs xi < 1, got {xi}")
    return (1.0 - xi) * cmath.exp(1j * omega)


def _transfer_chain(cache: EvalCache, xi: float, omega: float, depth: int):
    """Return (T, [Z_1..Z_depth]) at the boundary point; depth >= 1."""
    w = _boundary_shift(cache, xi, omega)
    solver = _HessenbergSolver(cache.H, w)
    m = cache.m
    Z = []
    X = cache.UB
    for _ in range(depth):
        X = solver.solve(X)
        Z.append(cache.CU @ X)
    if cache.is_continuous:
        T = Z[0] + cache.D - (xi / 2.0) * np.eye(m)
    else:
        T = (Z[0] + cache.D - xi * np.eye(m)) / (1.0 - xi)
    if not all(np.all(np.isfinite(Zk)) for Zk in Z):
        raise PoleError(w)
    return T, Z


def phi_eval(cache: EvalCache, xi: float, omega: float) -> np.ndarray:
    """Hermitian part of the shifted transfer function at one boundary point.

    Always returns an exactly Hermitian m x m matrix (symmetrized after
    assembly).  Raises PoleError if the evaluation point hits a pole.
    """
    T, _ = _transfer_chain(cache, xi, omega, depth=1)
    phi = T.conj().T + T
    return 0.5 * (phi + phi.conj().T)


def gamma(cache: EvalCache, xi: float, omega: float) -> GammaValue:
    """Smallest eigenvalue of the boundary Hermitian part, with eigenvector."""
    phi = phi_eval(cache, xi, omega)
    lam, V = np.linalg.eigh(phi)
    gap = float(lam[1] - lam[0]) if cache.m > 1 else np.inf
    return GammaValue(gamma=float(lam[0]), eigvec=V[:, 0], multiplicity_gap=gap)


def _eig_dir_derivatives(phi, d_phi, dd_phi, phi_norm_floor=1.0):
    """First/second derivative of the smallest eigenvalue from matrix derivatives."""
    lam, V = np.linalg.eigh(phi)
    v = V[:, 0]
    d1 = float(np.real(v.conj() @ d_phi @ v))
    d2 = float(np.real(v.conj() @ dd_phi @ v))
    m = phi.shape[0]
    if m > 1:
        coup = V[:, 1:].conj().T @ d_phi @ v
        denom = lam[0] - lam[1:]
        keep = denom != 0.0
        d2 += float(2.0 * np.sum(np.abs(coup[keep]) ** 2 / denom[keep]))
        gap = float(lam[1] - lam[0])
    else:
        gap = np.inf
    phi_norm = max(abs(float(lam[0])), abs(float(lam[-1])), phi_norm_floor)
    reliable = gap > 1e-8 * phi_norm
    return float(lam[0]), d1, d2, reliable


def gamma_derivs_omega(cache: EvalCache, xi: float, omega: float) -> GammaDerivatives:
    """gamma and its first/second partial derivatives in the frequency."""
    T, Z = _transfer_chain(cache, xi, omega, depth=3)
    Z2, Z3 = Z[1], Z[2]
    phi = T.conj().T + T
    phi = 0.5 * (phi + phi.conj().T)
    if cache.is_continuous:
        dT = -1j * Z2
        ddT = -2.0 * Z3
    else:
        eiw = cmath.exp(1j * omega)
        dT = -1j * eiw * Z2
        ddT = eiw * Z2 - 2.0 * (1.0 - xi) * eiw * eiw * Z3
    d_phi = dT.conj().T + dT
    dd_phi = ddT.conj().T + ddT
    g, d1, d2, ok = _eig_dir_derivatives(phi, d_phi, dd_phi)
    return GammaDerivatives(g, d1, d2, ok)


def gamma_derivs_xi(cache: EvalCache, xi: float, omega: float) -> GammaDerivatives:
    """gamma and its first/second partial derivatives in the shift parameter."""
    T, Z = _transfer_chain(cache, xi, omega, depth=3)
    Z2, Z3 = Z[1], Z[2]
    phi = T.conj().T + T
    phi = 0.5 * (phi + phi.conj().T)
    m = cache.m
    if cache.is_continuous:
        dT = 0.5 * (Z2 - np.eye(m))
        ddT = 0.5 * Z3
    else:
        eiw = cmath.exp(1j * omega)
        dT = (T + eiw * Z2 - np.eye(m)) / (1.0 - xi)
        ddT = (2.0 / (1.0 - xi)) * (eiw * eiw * Z3 + dT)
    d_phi = dT.conj().T + dT
    dd_phi = ddT.conj().T + ddT
    g, d1, d2, ok = _eig_dir_derivatives(phi, d_phi, dd_phi)
    return GammaDerivatives(g, d1, d2, ok)


def gamma_at_infinity(cache: EvalCache, xi: float) -> float:
    """Limit of gamma as the frequency grows without bound (continuous only)."""
    if not cache.is_continuous:
        raise InvalidParameterError("the infinite-frequency limit only exists in continuous time")
    d_part = cache.D.conj().T + cache.D
    return float(np.linalg.eigvalsh(0.5 * (d_part + d_part.conj().T))[0]) - xi
