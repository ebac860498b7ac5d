import numpy as np
import pytest

from ximargin.drivers import (
    Certificate,
    compute_xi_cont,
    compute_xi_disc,
    initial_negative_search,
    select_interval,
)
from ximargin.evaluation import build_cache, gamma
from ximargin.pencils import NegativeInterval, SolveCounters
from ximargin.systems import (
    InvalidParameterError,
    TimeDomain,
    Tolerances,
    shifted_system,
    spectral_bounds,
)

from test_systems import CONT_SCALAR, CONT_GAIN2, DISC_SCALAR, cont


DAMPED_OSC = cont([[0.0, 1.0], [-1.0, -0.2]], [[0.0], [1.0]], [[1.0, 0.0]], [[0.5]])


class TestClosedFormAnchors:
    def test_cont_scalar_degenerate_bracket(self):
        res = compute_xi_cont(CONT_SCALAR)
        assert res.xi == 2.0
        assert res.certificate is Certificate.BRACKET_DEGENERATE
        assert res.restarts == 0
        assert res.bracket.xi_ub == pytest.approx(2.0, abs=1e-14)
        assert res.bracket.xi_lb == pytest.approx(2.0, abs=1e-12)

    def test_cont_gain2_stability_limited(self):
        tau = 1e-14
        res = compute_xi_cont(CONT_GAIN2, tol=Tolerances(tau=tau))
        assert res.xi == pytest.approx(2.0 * (1.0 - tau), abs=1e-15)
        assert res.certificate is Certificate.NO_NEGATIVE_REGION

    def test_disc_scalar_zero_margin(self):
        tau = 1e-10
        res = compute_xi_disc(DISC_SCALAR, tol=Tolerances(tau=tau))
        assert abs(res.xi) <= tau * (1.0 + 1e-6)
        assert res.certificate is Certificate.ABSOLUTE_MODE
        assert len(res.pseudoroots) == 1
        assert abs(res.pseudoroots[0].x) == pytest.approx(np.pi, abs=1e-8)

    def test_damped_oscillator_matches_oracle(self):
        from ximargin.baselines import oracle_xi
        res = compute_xi_cont(DAMPED_OSC)
        ref = oracle_xi(DAMPED_OSC, grid_size=50_000, tol=1e-12)
        assert res.xi == pytest.approx(ref, rel=1e-10)
        assert res.xi < 0  # feedthrough below the passivity threshold

    def test_domain_mismatch_rejected(self):
        with pytest.raises(InvalidParameterError):
            compute_xi_cont(DISC_SCALAR)
        with pytest.raises(InvalidParameterError):
            compute_xi_disc(CONT_SCALAR)


class TestInitialNegativeSearch:
    def test_immediate_hit(self):
        # gain2 shifted just below its margin: gamma negative at user omega
        cache = build_cache(DAMPED_OSC)
        xi0 = -0.3  # above the margin of about -0.36, so negativity exists
        w = initial_negative_search(cache, xi0, omega0=1.05)
        assert w is not None
        assert gamma(cache, xi0, w).gamma < 0

    def test_grid_finds_negative_region_discrete(self):
        cache = build_cache(DISC_SCALAR)
        xi0 = 0.5 * (1.0 - 1e-10)
        w = initial_negative_search(cache, xi0, omega0=0.0)
        assert w is not None
        assert gamma(cache, xi0, w).gamma < 0
        assert abs(w) > 2.0  # negativity sits around the far end of the circle

    def test_absent_when_positive_everywhere(self):
        cache = build_cache(CONT_SCALAR)
        assert initial_negative_search(cache, 0.0, omega0=0.0) is None

    def test_counts_evaluations(self):
        counters = SolveCounters()
        cache = build_cache(CONT_SCALAR)
        initial_negative_search(cache, 0.0, omega0=0.0, counters=counters)
        assert counters.small_solves > 60  # probe + grid + descents


class TestIntervalRule:
    IVS = [
        NegativeInterval(0.0, 1.0, 0.5, -0.2),
        NegativeInterval(2.0, 5.0, 3.5, -0.1),
        NegativeInterval(-4.0, -3.5, -3.75, -0.9),
    ]

    def test_most_negative(self):
        assert select_interval(self.IVS, "most-negative").omega_mid == -3.75

    def test_widest(self):
        assert select_interval(self.IVS, "widest").omega_mid == 3.5

    def test_leftmost(self):
        assert select_interval(self.IVS, "leftmost").omega_mid == -3.75

    def test_unknown_rule(self):
        with pytest.raises(InvalidParameterError):
            select_interval(self.IVS, "nope")


class TestSuiteInvariants:
    def test_monotone_outer_estimates(self, suite_results):
        for row in suite_results["rows"]:
            xis = [pr.eps for pr in row.hec.pseudoroots]
            assert all(b < a for a, b in zip(xis, xis[1:]))

    def test_one_sided_pseudoroots(self, suite_results):
        for row in suite_results["rows"]:
            for pr in row.hec.pseudoroots:
                assert pr.eps >= row.oracle - 1e-8 * (1.0 + abs(row.oracle))

    def test_restart_budget(self, suite_results):
        for row in suite_results["rows"]:
            assert row.hec.restarts <= 5
            assert row.hec.restarts == len(row.hec.pseudoroots)

    def test_certificate_validity_small_systems(self, suite_results):
        # independent dense scan finds nothing negative at the certified shift
        for row in suite_results["rows"]:
            if row.system.n > 2:
                continue
            assert row.hec.certificate in (Certificate.NO_NEGATIVE_REGION,
                                           Certificate.ABSOLUTE_MODE)
            cache = build_cache(row.system)
            if row.system.domain is TimeDomain.CONTINUOUS:
                ws = np.linspace(-50.0, 50.0, 4001)
            else:
                ws = np.linspace(-np.pi, np.pi, 4001)
            vals = np.array([gamma(cache, row.hec.xi, w).gamma for w in ws])
            scale = max(1.0, np.abs(vals).max())
            assert vals.min() >= -1e-8 * scale

    def test_strict_passivity_spot_check(self, suite_results):
        # conditions at xi - tau*|xi|: stability plus positivity at random points
        rng = np.random.default_rng(99)
        for row in suite_results["rows"][::3]:
            xi = row.hec.xi - row.hec.tolerance * abs(row.hec.xi)
            shifted = shifted_system(row.system, xi)
            alpha, rho = spectral_bounds(shifted)
            if row.system.domain is TimeDomain.CONTINUOUS:
                assert alpha < 0
                ws = rng.uniform(-30, 30, size=10)
            else:
                assert rho < 1
                ws = rng.uniform(-np.pi, np.pi, size=10)
            cache = build_cache(row.system)
            for w in ws:
                assert gamma(cache, xi, float(w)).gamma > 0

    def test_eig_counts_recorded(self, suite_results):
        for row in suite_results["rows"]:
            ec = row.hec.eig_counts
            assert ec.pencil_order == 2 * row.system.n + row.system.m
            assert ec.pencil_solves >= 1
            assert ec.small_solves > ec.pencil_solves
