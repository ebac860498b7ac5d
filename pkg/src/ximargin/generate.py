"""Deterministic generation of strictly passive test systems.

The construction places the state matrix safely inside its stability region
(spectral abscissa forced to -margin, or spectral radius to 1 - margin),
makes the feedthrough Hermitian part definite by at least the margin, and
verifies strict passivity at a zero shift through the certifying pencil,
retrying with a derived seed offset (and, for discrete models, gentler port
matrices) when verification fails.  Everything is a pure function of the
seed, so generated suites are reproducible byte for byte.
"""

from __future__ import annotations

import numpy as np

from ximargin.evaluation import build_cache, gamma
from ximargin.pencils import gamma_zeros, negative_intervals
from ximargin.systems import (
    StateSpaceSystem,
    TimeDomain,
    Tolerances,
    check_minimality,
)

_SEED_STRIDE = 1000003


class GenerationError(RuntimeError):
    """Verification failed on every retry; the drawn family is unusable."""


def _draw(rng, rows, cols, complex_data):
    M = rng.standard_normal((rows, cols))
    if complex_data:
        M = (M + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)
    return M


def _strictly_passive_at_zero(system: StateSpaceSystem) -> bool:
    cache = build_cache(system)
    if gamma(cache, 0.0, 0.0).gamma <= 0.0:
        return False
    zs = gamma_zeros(cache, system, 0.0, Tolerances())
    if len(zs) == 0:
        return True
    return not negative_intervals(cache, zs, 0.0)


def random_system(n: int, m: int, domain: TimeDomain, seed: int,
                  margin: float = 0.1, complex_data: bool = True,
                  max_attempts: int = 10, d_floor: float | None = None) -> StateSpaceSystem:
    """Strictly passive random model, deterministic in the seed.

    ``d_floor`` sets the definiteness floor of the feedthrough Hermitian
    part (defaults to ``margin``).  Raises GenerationError when
    ``max_attempts`` consecutive draws fail the passivity or minimality
    verification.
    """
    if not (0.0 < margin < 1.0):
        raise ValueError("margin must lie in (0, 1)")
    floor = margin if d_floor is None else float(d_floor)
    domain = TimeDomain(domain)
    for attempt in range(max_attempts):
        rng = np.random.default_rng(int(seed) + _SEED_STRIDE * attempt)
        A = _draw(rng, n, n, complex_data)
        B = _draw(rng, n, m, complex_data)
        if domain is TimeDomain.CONTINUOUS:
            alpha = np.linalg.eigvals(A).real.max()
            A = A - (alpha + margin) * np.eye(n)
            C = B.conj().T.copy()
        else:
            rho = np.abs(np.linalg.eigvals(A)).max()
            A = A * ((1.0 - margin) / rho)
            C = _draw(rng, m, n, complex_data)
            # shrink the ports until the feedthrough definitely dominates;
            # later attempts shrink further
            shrink = 0.6 ** attempt * max(margin, floor)
            B = B * (np.sqrt(shrink) / max(np.linalg.norm(B, 2), 1e-12))
            C = C * (np.sqrt(shrink) / max(np.linalg.norm(C, 2), 1e-12))
        D = _draw(rng, m, m, complex_data)
        herm = D.conj().T + D
        lift = floor - float(np.linalg.eigvalsh(0.5 * (herm + herm.conj().T))[0])
        if lift > 0.0:
            D = D + 0.5 * lift * np.eye(m)
        system = StateSpaceSystem(A, B, C, D, domain)
        controllable, observable = check_minimality(system)
        if not (controllable and observable):
            continue
        if _strictly_passive_at_zero(system):
            return system
    raise GenerationError(
        f"no strictly passive draw in {max_attempts} attempts "
        f"(n={n}, m={m}, domain={domain.value}, seed={seed})"
    )


def loses_passivity_inside_bracket(system: StateSpaceSystem,
                                   rel_backoff: float = 2e-4) -> bool:
    """True when strict passivity is already lost just below the bracket top.

    Such systems have their extremal parameter strictly inside the bracket,
    which every algorithm (including the midpoint baseline with its larger
    first-step safety perturbation) can then resolve to full accuracy.
    """
    from ximargin.drivers import probe_near_zeros
    from ximargin.systems import xi_bracket

    br = xi_bracket(system)
    xi_test = br.xi_ub - rel_backoff * max(abs(br.xi_ub), 1.0)
    if xi_test <= br.xi_lb:
        return False
    cache = build_cache(system)
    if gamma(cache, xi_test, 0.0).gamma < 0.0:
        return True
    zs = gamma_zeros(cache, system, xi_test, Tolerances())
    if negative_intervals(cache, zs, xi_test):
        return True
    return len(zs) > 0 and probe_near_zeros(cache, zs, xi_test) is not None


def oracle_suite() -> list[tuple[str, StateSpaceSystem]]:
    """Fixed deterministic suite used for cross-validation and acceptance.

    24 strictly passive systems: both domains, n in {2, 4, 6}, m in {1, 2},
    one complex and one real draw per shape.  Draws whose extremal
    parameter coincides with a bracket end are skipped (deterministically)
    in favour of later seeds: interior instances exercise the actual
    iteration of every algorithm rather than the immediate-return path.
    """
    suite = []
    for domain in (TimeDomain.CONTINUOUS, TimeDomain.DISCRETE):
        for n in (2, 4, 6):
            for m in (1, 2):
                for variant, complex_data in ((0, True), (1, False)):
                    margin = 0.35 if variant == 0 else 0.2
                    name = (f"{domain.value[:4]}-n{n}-m{m}-"
                            f"{'cplx' if complex_data else 'real'}")
                    base = 7000 + 101 * n + 17 * m + variant
                    for k in range(60):
                        try:
                            system = random_system(
                                n, m, domain, seed=base + 977 * k, margin=margin,
                                complex_data=complex_data, d_floor=margin + 1.0,
                            )
                        except GenerationError:
                            continue
                        if loses_passivity_inside_bracket(system):
                            break
                    else:
                        raise GenerationError(f"no interior-margin draw for {name}")
                    suite.append((name, system))
    return suite
