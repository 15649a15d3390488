import numpy as np
import pytest
from numpy.polynomial import Polynomial
from numpy.testing import assert_allclose

from crossdiff.equilibria import interior_equilibrium
from crossdiff.models import DimensionlessParams
from crossdiff.stability import (
    TuringClass,
    cubic_roots,
    diffusion_matrix,
    dispersion_scan,
    invariants3,
    jacobian_at,
    max_real_eigenvalue,
    routh_hurwitz,
    sign_ledger,
    stability_report,
    turing_sweep,
)


def rescaled(**overrides) -> DimensionlessParams:
    values = dict(b=0.5, n=0.5, q=1.0, s=1.0, d=0.1, e=1.0, c=1.0,
                  D1=1.0, D2_1=1.0, D2_2=0.5, D3_1=1.0, D3_2=0.5)
    values.update(overrides)
    return DimensionlessParams(**values)


# oscillatory window near k^2 = 0.3: fast prey, slow predators, a22 > s
OSCILLATORY = dict(b=1.0, c=0.01, n=1.0, e=0.5, d=0.2, q=1.0, s=0.05,
                   D1=100.0, D2_1=0.02, D2_2=0.01, D3_1=0.02, D3_2=0.01)


def exact_jacobian(p: DimensionlessParams, estar) -> np.ndarray:
    u, v, _ = estar
    big = p.b + u + p.c * v
    return np.array([
        [1.0 - 2.0 * u - v * (p.b + p.c * v) / big ** 2, -u / big, p.c * u * v / big ** 2],
        [p.q * v * (p.b + p.c * v) / big ** 2, p.q * p.e * v * v / (p.n + v) ** 2,
         -p.c * p.q * u * v / big ** 2 - p.e * p.q * v / (p.n + v)],
        [0.0, p.s, -p.s],
    ])


def companion_max_real(T: float, I2: float, h: float) -> float:
    return float(np.max(np.roots([1.0, -T, I2, -h]).real))


class TestInvariants:
    def test_diagonal(self):
        """diag(1, 2, 3) has invariants (6, 11, 6)"""
        assert invariants3(np.diag([1.0, 2.0, 3.0])) == pytest.approx((6.0, 11.0, 6.0))

    def test_against_numpy(self):
        """Trace and determinant agree with numpy on a random matrix"""
        m = np.random.default_rng(1).normal(size=(3, 3))
        T, I2, h = invariants3(m)
        assert T == pytest.approx(np.trace(m))
        assert h == pytest.approx(np.linalg.det(m))
        assert I2 == pytest.approx(0.5 * (np.trace(m) ** 2 - np.trace(m @ m)))

    def test_routh_hurwitz(self):
        """Stable iff all three sign conditions hold"""
        assert routh_hurwitz(invariants3(np.diag([-1.0, -2.0, -3.0])))
        assert not routh_hurwitz(invariants3(np.diag([1.0, -2.0, -3.0])))
        assert not routh_hurwitz((0.0, 1.0, 0.0))


class TestCubic:
    @pytest.mark.parametrize("inv, expected", [
        ((-6.0, 11.0, -6.0), -1.0),
        ((3.0, 3.0, 1.0), 1.0),
        ((0.0, 1.0, 0.0), 0.0),
        ((-1.0, 0.0, 0.0), 0.0),
    ])
    def test_known_spectra(self, inv, expected):
        """Distinct, triple, imaginary and zero roots"""
        assert max_real_eigenvalue(inv) == pytest.approx(expected, abs=1e-8)

    def test_roots_satisfy_the_cubic(self):
        """Back-substitution of every root"""
        z = cubic_roots(-6.0, 11.0, -6.0)
        assert_allclose(np.sort(z.real), [-3.0, -2.0, -1.0], atol=1e-12)
        assert np.max(np.abs(z.imag)) < 1e-12

    def test_companion_oracle(self):
        """Random invariant triples in [-10, 10]^3"""
        rng = np.random.default_rng(8)
        triples = rng.uniform(-10.0, 10.0, (1000, 3))
        closed = np.max(cubic_roots(triples[:, 0], triples[:, 1], triples[:, 2]).real, axis=-1)
        brute = np.array([companion_max_real(*t) for t in triples])
        assert np.max(np.abs(closed - brute)) < 1e-8


class TestJacobian:
    def test_matches_differentiated_entries(self):
        """Finite differences against hand-differentiated a_ij"""
        p = rescaled()
        estar = interior_equilibrium(p)
        assert_allclose(jacobian_at(p, estar), exact_jacobian(p, estar), rtol=1e-7, atol=1e-9)

    def test_displayed_jacobian_differs_only_in_a23(self):
        """The displayed a23 drops a square in its first term"""
        p = rescaled()
        report = stability_report(p, interior_equilibrium(p))
        assert report.mismatched_entries == [(1, 2)]

    def test_meso_self_coupling_is_positive(self):
        """a22 = q e v^2 / (n + v)^2 at E*"""
        p = rescaled()
        assert jacobian_at(p, interior_equilibrium(p))[1, 1] > 0.0

    def test_diffusion_matrix_structure(self):
        """Equal meso diffusivities remove the cross terms of row 2"""
        p = rescaled(D2_2=1.0)
        dm = diffusion_matrix(p, interior_equilibrium(p))
        assert dm[1, 0] == 0.0
        assert dm[1, 2] == 0.0
        assert dm[1, 1] == pytest.approx(1.0)
        assert dm[0, 1] == dm[0, 2] == dm[2, 0] == 0.0


class TestDispersion:
    def test_zero_wavenumber_is_the_reaction_jacobian(self):
        """k^2 = 0 reproduces the diffusion-free invariants"""
        p = rescaled()
        estar = interior_equilibrium(p)
        curve = dispersion_scan(p, estar, k2max=100.0)
        assert curve.k2[0] == 0.0
        inv0 = invariants3(jacobian_at(p, estar))
        assert_allclose((curve.Tk[0], curve.I2k[0], curve.hk[0]), inv0, rtol=1e-14)

    def test_grid_is_increasing(self):
        """Candidates are merged into a sorted grid"""
        p = rescaled()
        curve = dispersion_scan(p, interior_equilibrium(p), samples=64)
        assert np.all(np.diff(curve.k2) > 0.0)
        assert curve.k2[-1] == curve.k2max

    def test_determinant_is_cubic_in_k2(self):
        """h(k^2) is reproduced by a cubic fit"""
        p = rescaled()
        curve = dispersion_scan(p, interior_equilibrium(p), k2max=50.0, samples=128)
        fit = Polynomial.fit(curve.k2, curve.hk, 3)
        assert np.max(np.abs(fit(curve.k2) - curve.hk)) <= 1e-9 * np.max(np.abs(curve.hk))

    def test_equal_diffusivities_never_destabilise(self):
        """D = D1 I shifts every eigenvalue left"""
        p = rescaled(D2_2=1.0, D3_2=1.0)
        estar = interior_equilibrium(p)
        curve = dispersion_scan(p, estar)
        expected = TuringClass.NO_TURING if stability_report(p, estar).rh_stable else TuringClass.BASE_UNSTABLE
        assert curve.classification is expected
        if expected is TuringClass.NO_TURING:
            assert curve.violations == 0
            assert np.all(curve.max_re_lambda[1:] < 0.0)

    def test_oscillatory_window_is_found(self):
        """Large prey diffusion with a22 > s opens a narrow unstable band"""
        p = DimensionlessParams(**OSCILLATORY)
        estar = interior_equilibrium(p)
        assert stability_report(p, estar).rh_stable
        curve = dispersion_scan(p, estar)
        assert curve.classification is TuringClass.TURING
        assert curve.violations > 0
        worst = int(np.argmax(curve.max_re_lambda))
        assert 0.01 < curve.k2[worst] < 1.0
        assert companion_max_real(curve.Tk[worst], curve.I2k[worst], curve.hk[worst]) > 0.0

    def test_rejects_bad_arguments(self):
        """k2max must be positive and the grid not too coarse"""
        p = rescaled()
        estar = interior_equilibrium(p)
        with pytest.raises(ValueError):
            dispersion_scan(p, estar, k2max=-1.0)
        with pytest.raises(ValueError):
            dispersion_scan(p, estar, samples=4)


class TestSignLedger:
    def test_all_items_hold_for_ordered_diffusivities(self):
        """Handling predators slower than searching ones"""
        p = rescaled()
        ledger = sign_ledger(p, interior_equilibrium(p))
        assert len(ledger) == 5
        assert all(item.passed for item in ledger)

    def test_equal_meso_diffusivities_hold_weakly(self):
        """l21 = 0 turns the grouped inequalities into equalities"""
        p = rescaled(D2_2=1.0)
        ledger = sign_ledger(p, interior_equilibrium(p))
        assert all(item.passed for item in ledger)
        assert ledger[2].value == 0.0
        assert ledger[4].value == 0.0


class TestTuringSweep:
    def test_random_admitted_sets(self):
        """Turing labels are rare, always backed by a positive eigenvalue; the ledger always holds"""
        sweep = turing_sweep(np.random.default_rng(42), count=200)
        assert len(sweep.samples) == 200
        turing = [s for s in sweep.samples if s.curve.classification is TuringClass.TURING]
        assert len(turing) <= 5
        for s in sweep.samples:
            assert s.curve.classification is not TuringClass.BASE_UNSTABLE
            assert all(item.passed for item in s.ledger)
            if s.curve.classification is TuringClass.NO_TURING:
                assert s.curve.violations == 0
        for s in turing:
            assert np.max(s.curve.max_re_lambda) > -1e-9
        counts = sweep.counts()
        assert counts["NoTuring"] + counts["Turing"] == 200
