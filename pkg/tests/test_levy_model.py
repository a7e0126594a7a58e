import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levycodec import levy_model as lm
from levycodec.errors import InvalidModelError, QuadratureError, ZeroTailMassError
from levycodec.levy_model import (
    CompoundPoisson,
    Exponential,
    GammaStandard,
    GaussianOnly,
    LevyTriplet,
    NormalLaw,
    Stable,
    Tabulated,
    TwoPoint,
)

from .conftest import FAMILIES

SYM_STABLE_1 = LevyTriplet(Stable(1.0, 0.5, 0.5))
CP_PM1 = LevyTriplet(CompoundPoisson(1.0, TwoPoint(-1.0, 0.5, 1.0)))


def mp_stable(alpha, c_minus, c_plus, f, lo, hi=mpmath.inf):
    """High-precision ``int f nu`` over ``lo < |x| <= hi`` for a stable density."""
    with mpmath.workdps(30):
        dens = lambda u: u ** (-alpha - 1)
        pos = mpmath.quad(lambda u: f(u) * dens(u), [lo, 1, hi] if lo < 1 < hi else [lo, hi])
        neg = mpmath.quad(lambda u: f(-u) * dens(u), [lo, 1, hi] if lo < 1 < hi else [lo, hi])
        return float(c_plus * pos + c_minus * neg)


class TestTailMass:
    def test_stable_example(self):
        assert lm.tail_mass(SYM_STABLE_1, 0.5) == pytest.approx(2.0, rel=1e-14)
        assert lm.tail_mass(SYM_STABLE_1, 0.5, method="quad") == pytest.approx(2.0, rel=1e-9)
        assert mp_stable(1, 0.5, 0.5, lambda x: 1, 0.5) == pytest.approx(2.0, rel=1e-12)

    def test_gaussian_has_no_jumps(self):
        assert lm.tail_mass(LevyTriplet(GaussianOnly(), sigma2=1.0), 0.1) == 0.0

    def test_compound_poisson_all_outside(self):
        assert lm.tail_mass(CP_PM1, 0.5) == 1.0

    def test_gamma_against_mpmath(self):
        g = LevyTriplet(GammaStandard())
        for eps in (1e-4, 0.1, 1.0, 3.0):
            ref = float(mpmath.quad(lambda x: mpmath.exp(-x) / x, [eps, eps + 1, mpmath.inf]))
            assert lm.tail_mass(g, eps) == pytest.approx(ref, rel=1e-12)

    def test_nonpositive_eps_rejected(self):
        with pytest.raises(ValueError):
            lm.tail_mass(SYM_STABLE_1, 0.0)


class TestF1F2:
    def test_gaussian_f1(self):
        assert lm.f1(LevyTriplet(GaussianOnly(), sigma2=1.0), 0.1) == pytest.approx(100.0, rel=1e-14)

    def test_stable_f1_example(self):
        assert lm.f1(SYM_STABLE_1, 0.25) == pytest.approx(8.0, rel=1e-14)
        assert lm.f1(SYM_STABLE_1, 0.25, method="quad") == pytest.approx(8.0, rel=1e-9)
        inner = mp_stable(1, 0.5, 0.5, lambda x: min(x * x, 0.0625), 0, 0.25) + \
            0.0625 * mp_stable(1, 0.5, 0.5, lambda x: 1, 0.25)
        assert inner / 0.0625 == pytest.approx(8.0, rel=1e-12)

    def test_compound_poisson_f1(self):
        assert lm.f1(CP_PM1, 0.5) == pytest.approx(1.0, rel=1e-14)

    def test_f2_examples(self):
        assert lm.f2(LevyTriplet(GaussianOnly(), sigma2=2.0), 0.3) == 0.0
        assert lm.f2(SYM_STABLE_1, 0.25) == pytest.approx(4.0, rel=1e-14)
        assert lm.f2(SYM_STABLE_1, 0.25, method="quad") == pytest.approx(4.0, rel=1e-9)
        e = math.e
        cp = LevyTriplet(CompoundPoisson(1.0, TwoPoint(-e, 0.5, e)))
        assert lm.f2(cp, 1.0) == pytest.approx(1.0, rel=1e-14)
        assert lm.f2_bits(cp, 1.0) == pytest.approx(1.0 / math.log(2.0), rel=1e-14)

    def test_f_total_examples(self):
        assert lm.f_total(SYM_STABLE_1, 0.25) == pytest.approx(12.0, rel=1e-14)
        assert lm.f_total(LevyTriplet(GaussianOnly(), sigma2=1.0), 0.1) == pytest.approx(100.0)
        zero = LevyTriplet(GaussianOnly(), allow_degenerate=True)
        assert lm.f_total(zero, 1.0) == 0.0

    def test_f_total_is_the_sum(self, family):
        _, tr = family
        for eps in (0.01, 0.3, 2.0):
            assert lm.f_total(tr, eps) == lm.f1(tr, eps) + lm.f2(tr, eps)

    @pytest.mark.parametrize("alpha", [0.3, 0.8, 1.0, 1.5, 1.9])
    def test_stable_scaling(self, alpha):
        tr = LevyTriplet(Stable(alpha, 0.2, 1.1))
        for eps in (1e-3, 0.05, 0.4):
            assert lm.f1(tr, eps) == pytest.approx(2**alpha * lm.f1(tr, 2 * eps), rel=1e-9)
            assert lm.f2(tr, eps) == pytest.approx(2**alpha * lm.f2(tr, 2 * eps), rel=1e-9)

    @pytest.mark.parametrize("alpha", [0.5, 0.8, 1.2, 1.5, 1.9])
    def test_closed_form_matches_quadrature(self, alpha):
        tr = LevyTriplet(Stable(alpha, 0.7, 0.3), sigma2=0.0, b=0.1)
        for eps in np.geomspace(1e-3, 1.0, 7):
            for fn in (lm.tail_mass, lm.f1, lm.f2, lm.drift_compensation):
                assert fn(tr, eps) == pytest.approx(fn(tr, eps, method="quad"), rel=1e-6)

    def test_gamma_and_exponential_closed_forms(self):
        cases = [LevyTriplet(GammaStandard(), b=0.3),
                 LevyTriplet(CompoundPoisson(2.5, Exponential(0.7, -1)), sigma2=0.2)]
        for tr in cases:
            for eps in (1e-3, 0.2, 1.0, 4.0):
                for fn in (lm.tail_mass, lm.f1, lm.f2, lm.drift_compensation):
                    assert fn(tr, eps) == pytest.approx(fn(tr, eps, method="quad"), rel=1e-8)

    def test_monotone_in_eps(self, family):
        _, tr = family
        grid = np.geomspace(1e-3, 3.0, 25)
        f1v = [lm.f1(tr, e) for e in grid]
        f2v = [lm.f2(tr, e) for e in grid]
        tails = [lm.tail_mass(tr, e) for e in grid]
        for seq in (f1v, f2v, tails):
            assert all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(seq, seq[1:]))


class TestDriftCompensation:
    @pytest.mark.parametrize("eps", [1e-3, 0.1, 0.5, 1.0, 2.0, 10.0])
    def test_symmetric_measures_keep_b(self, eps):
        for tr in (LevyTriplet(Stable(1.3, 0.4, 0.4), b=0.7), LevyTriplet(Stable(1.0, 1, 1), b=-1.0),
                   LevyTriplet(CompoundPoisson(2.0, NormalLaw(0.0, 0.8)), b=0.25), CP_PM1):
            assert lm.drift_compensation(tr, eps) == pytest.approx(tr.b, abs=1e-12)

    def test_atom_inside_unit_interval(self):
        tr = LevyTriplet(CompoundPoisson(1.0, Tabulated([(0.8, 1.0)])), b=0.8)
        assert lm.drift_compensation(tr, 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_atom_beyond_one(self):
        tr = LevyTriplet(CompoundPoisson(1.0, Tabulated([(1.5, 1.0)])), b=0.0)
        assert lm.drift_compensation(tr, 2.0) == pytest.approx(1.5)

    def test_stable_near_alpha_one(self):
        # the closed form switches to the log branch at alpha = 1; both sides must agree
        a = lm.drift_compensation(LevyTriplet(Stable(1.0, 0.2, 0.9)), 0.01)
        b = lm.drift_compensation(LevyTriplet(Stable(1.0 + 1e-9, 0.2, 0.9)), 0.01)
        assert a == pytest.approx(b, rel=1e-6)


class TestDiagnostics:
    def test_moment_examples(self):
        assert lm.moment_diag(LevyTriplet(GaussianOnly(), sigma2=1.0), 2.0) == 0.0
        st15 = LevyTriplet(Stable(1.5, 0.5, 0.5))
        assert lm.moment_diag(st15, 1.0) == pytest.approx(2.0, rel=1e-14)
        assert lm.moment_diag(st15, 1.0, method="quad") == pytest.approx(2.0, rel=1e-8)
        assert lm.moment_diag(st15, 2.0) == math.inf
        assert lm.moment_diag(st15, 2.0, method="quad") == math.inf

    def test_condition_b_examples(self):
        assert lm.condition_b_ratio(SYM_STABLE_1, 0.5, 0.3) == pytest.approx(2.0, rel=1e-14)
        assert lm.condition_b_ratio(SYM_STABLE_1, 0.5, 0.3, method="quad") == pytest.approx(2.0, rel=1e-8)
        atom = LevyTriplet(CompoundPoisson(1.0, Tabulated([(1.0, 1.0)])))
        assert lm.condition_b_ratio(atom, 0.5, 0.5) == pytest.approx(math.sqrt(2.0))

    def test_condition_b_small_mu_limit(self, family):
        _, tr = family
        if lm.tail_mass(tr, 0.5) == 0:
            with pytest.raises(ZeroTailMassError):
                lm.condition_b_ratio(tr, 0.5, 0.5)
        else:
            assert lm.condition_b_ratio(tr, 1e-9, 0.5) == pytest.approx(1.0, rel=1e-6)

    def test_divergent_integral_reported_as_inf(self):
        st = Stable(1.0, 0.5, 0.5)
        assert lm.integrate_measure(st, lambda x: abs(x), 1.0, math.inf) == math.inf

    def test_quadrature_failure_carries_estimate(self):
        with pytest.raises(QuadratureError) as info:
            lm._quad(lambda x: math.sin(1.0 / x) / x**1.5, 1e-9, 1.0)
        assert info.value.error_estimate > 0


class TestModelValidation:
    @pytest.mark.parametrize("make", [
        lambda: Stable(2.0, 0.5, 0.5),
        lambda: Stable(1.0, 0.0, 0.0),
        lambda: Stable(1.0, -0.1, 1.0),
        lambda: CompoundPoisson(0.0, TwoPoint(1.0, 1.0, 2.0)),
        lambda: CompoundPoisson(math.inf, TwoPoint(1.0, 1.0, 2.0)),
        lambda: TwoPoint(0.0, 0.5, 1.0),
        lambda: TwoPoint(1.0, 1.5, 2.0),
        lambda: Tabulated([(1.0, 0.5), (2.0, 0.4)]),
        lambda: Tabulated([(0.0, 1.0)]),
        lambda: Exponential(-1.0),
        lambda: NormalLaw(0.0, 0.0),
        lambda: LevyTriplet(GaussianOnly()),
        lambda: LevyTriplet(Stable(1.0, 1, 1), sigma2=-1.0),
    ])
    def test_invalid(self, make):
        with pytest.raises(InvalidModelError):
            make()

    def test_degenerate_zero_process_allowed_on_request(self):
        assert LevyTriplet(GaussianOnly(), allow_degenerate=True).sigma2 == 0.0

    def test_tabulated_tolerance(self):
        Tabulated([(1.0, 0.5), (-1.0, 0.5 + 5e-13)])


finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)
positive = st.floats(1e-3, 50, allow_nan=False)
laws = st.one_of(
    st.builds(TwoPoint, st.floats(0.1, 5), st.floats(0, 1), st.floats(-5, -0.1)),
    st.builds(Exponential, positive, st.sampled_from([1, -1])),
    st.builds(NormalLaw, finite, positive),
    st.just(Tabulated([(0.25, 0.125), (-3.0, 0.875)])),
)
measures = st.one_of(
    st.builds(Stable, st.floats(0.01, 1.99), st.floats(0.1, 3), st.floats(0, 3)),
    st.just(GammaStandard()),
    st.builds(CompoundPoisson, positive, laws),
)


@given(measures, st.floats(0, 10), finite)
@settings(max_examples=200, deadline=None)
def test_json_round_trip(measure, sigma2, b):
    tr = LevyTriplet(measure, sigma2, b)
    again = lm.loads(lm.dumps(tr))
    assert again == tr
    assert json.loads(lm.dumps(again)) == lm.triplet_to_dict(tr)


def test_json_schema_field_names():
    d = lm.triplet_to_dict(LevyTriplet(CompoundPoisson(2.0, Exponential(0.5, -1)), 0.5, 1.0))
    assert d == {"measure": {"kind": "compound_poisson", "intensity": 2.0,
                             "jump_law": {"kind": "exponential", "mean": 0.5, "sign": -1}},
                 "sigma2": 0.5, "b": 1.0}
    zero = LevyTriplet(GaussianOnly(), allow_degenerate=True)
    assert lm.loads(lm.dumps(zero)).allow_degenerate


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_families_are_finite(name):
    tr = FAMILIES[name]
    for eps in (0.01, 0.1, 1.0):
        assert math.isfinite(lm.f_total(tr, eps))
