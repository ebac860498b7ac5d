import numpy as np
import pytest

from ximargin.evaluation import build_cache, gamma
from ximargin.generate import oracle_suite, random_system
from ximargin.pencils import gamma_zeros, negative_intervals
from ximargin.systems import (
    TimeDomain,
    Tolerances,
    check_minimality,
    spectral_bounds,
    xi_bracket,
)


class TestRandomSystem:
    def test_deterministic(self):
        a = random_system(4, 2, TimeDomain.CONTINUOUS, seed=11)
        b = random_system(4, 2, TimeDomain.CONTINUOUS, seed=11)
        for name in "ABCD":
            np.testing.assert_array_equal(getattr(a, name), getattr(b, name))

    def test_seed_changes_output(self):
        a = random_system(3, 1, TimeDomain.DISCRETE, seed=1)
        b = random_system(3, 1, TimeDomain.DISCRETE, seed=2)
        assert not np.array_equal(a.A, b.A)

    @pytest.mark.parametrize("domain", [TimeDomain.CONTINUOUS, TimeDomain.DISCRETE])
    def test_minimal_and_strictly_passive(self, domain):
        for seed in (0, 5, 9):
            sys_ = random_system(4, 2, domain, seed=seed, margin=0.25)
            assert check_minimality(sys_) == (True, True)
            cache = build_cache(sys_)
            assert gamma(cache, 0.0, 0.0).gamma > 0
            zs = gamma_zeros(cache, sys_, 0.0, Tolerances())
            assert not negative_intervals(cache, zs, 0.0)

    def test_discrete_spectral_radius_pinned(self):
        sys_ = random_system(6, 2, TimeDomain.DISCRETE, seed=3, margin=0.1)
        _, rho = spectral_bounds(sys_)
        assert rho == pytest.approx(0.9, abs=1e-10)

    def test_continuous_abscissa_pinned(self):
        sys_ = random_system(5, 1, TimeDomain.CONTINUOUS, seed=3, margin=0.3)
        alpha, _ = spectral_bounds(sys_)
        assert alpha == pytest.approx(-0.3, abs=1e-10)

    def test_real_flag(self):
        sys_ = random_system(3, 1, TimeDomain.CONTINUOUS, seed=4, complex_data=False)
        assert sys_.is_real

    def test_bad_margin_rejected(self):
        with pytest.raises(ValueError):
            random_system(2, 1, TimeDomain.CONTINUOUS, seed=0, margin=1.5)


class TestOracleSuite:
    def test_shape_and_determinism(self):
        suite = oracle_suite()
        assert len(suite) == 24
        names = [name for name, _ in suite]
        assert len(set(names)) == 24
        again = oracle_suite()
        for (n1, s1), (n2, s2) in zip(suite, again):
            assert n1 == n2
            np.testing.assert_array_equal(s1.A, s2.A)

    def test_margins_interior(self):
        # every suite system loses passivity strictly inside its bracket
        from ximargin.generate import loses_passivity_inside_bracket
        for name, sys_ in oracle_suite():
            br = xi_bracket(sys_)
            assert br.xi_ub - br.xi_lb > 1e-6, name
            assert loses_passivity_inside_bracket(sys_), name
