from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from conftest import make_panel
from vatscm.panel import MonthKey
from vatscm.passthrough import (TaxChange, full_passthrough_series, passthrough_rate, passthrough_series,
                                treatment_effect)
from vatscm.scm import fit_weights

VAT = TaxChange(0.07, 0.19)
pos = st.floats(1e-3, 1e4, allow_nan=False)
taxes = st.tuples(st.floats(0, 0.95), st.floats(0, 0.95)).filter(lambda t: abs(t[0] - t[1]) > 1e-3)


def fit_with(short_design, treated_post, donor_post):
    # pre window matches exactly, so synthetic == donor path
    pre = [100.0, 101.0, 102.0]
    p = make_panel(pre + treated_post, {"A": pre + donor_post, "B": [90, 91, 92, 93, 94]}, short_design)
    return fit_weights(p)


class TestTaxChange:
    def test_full_factor(self):
        assert VAT.full_factor == pytest.approx(1.19 / 1.07, rel=1e-15)

    @pytest.mark.parametrize("old,new", [(0.19, 0.19), (-0.1, 0.1), (0.07, 1.0)])
    def test_rejected(self, old, new):
        with pytest.raises(ValueError):
            TaxChange(old, new)


class TestFullPassthrough:
    def test_values(self, short_design):
        fit = fit_with(short_design, [107.0, 100.0], [107.0, 100.0])
        s = full_passthrough_series(fit, VAT, short_design)
        assert list(s.observations) == [MonthKey(2023, 4), MonthKey(2023, 5)]
        # 107 * 119/107 is exactly 119 in rational arithmetic
        assert Fraction(107) * Fraction(119, 100) / Fraction(107, 100) == 119
        assert s[MonthKey(2023, 4)] == pytest.approx(119.0, abs=1e-12)
        assert round(s[MonthKey(2023, 5)], 3) == 111.215

    def test_undefined_before_treatment(self, short_design):
        fit = fit_with(short_design, [107.0, 100.0], [107.0, 100.0])
        s = full_passthrough_series(fit, VAT, short_design)
        assert MonthKey(2023, 3) not in s


class TestRate:
    def test_examples(self):
        assert passthrough_rate(100.0, 100.0, VAT) == 0.0
        assert passthrough_rate(100.0 * 1.19 / 1.07, 100.0, VAT) == pytest.approx(1.0, rel=1e-12)
        expected = 5.6 / (100 * 1.19 / 1.07 - 100)
        assert passthrough_rate(105.6, 100.0, VAT) == pytest.approx(expected, rel=1e-12)
        assert round(passthrough_rate(105.6, 100.0, VAT), 5) == 0.49933

    @pytest.mark.parametrize("synth", [0.0, -1.0])
    def test_nonpositive_synthetic(self, synth):
        with pytest.raises(ValueError):
            passthrough_rate(100.0, synth, VAT)

    def test_tax_decrease(self):
        cut = TaxChange(0.19, 0.07)
        assert cut.full_factor < 1
        assert passthrough_rate(100.0 * cut.full_factor, 100.0, cut) == pytest.approx(1.0, rel=1e-12)
        # a price rise after a cut is negative pass-through
        assert passthrough_rate(101.0, 100.0, cut) < 0

    def test_series(self, short_design):
        fit = fit_with(short_design, [105.6, 100.0], [100.0, 100.0])
        rates = passthrough_series(fit, VAT, short_design)
        assert list(rates) == [MonthKey(2023, 4), MonthKey(2023, 5)]
        assert rates[MonthKey(2023, 4)] == pytest.approx(0.49933, abs=5e-6)
        assert rates[MonthKey(2023, 5)] == pytest.approx(0.0, abs=1e-12)

    @given(pos, pos, st.floats(1e-3, 1e3), taxes)
    def test_scale_invariance(self, a, s, c, t):
        tax = TaxChange(*t)
        assert passthrough_rate(c * a, c * s, tax) == pytest.approx(passthrough_rate(a, s, tax), rel=1e-12, abs=1e-12)

    @given(pos, pos, taxes)
    def test_consistency_identity(self, a, s, t):
        tax = TaxChange(*t)
        lhs = passthrough_rate(a, s, tax) * (s * tax.full_factor - s)
        assert lhs == pytest.approx(a - s, rel=1e-12, abs=1e-12 * max(a, s))

    @given(pos, pos, st.floats(1e-3, 1e3), taxes)
    def test_monotone_in_actual(self, a, s, d, t):
        tax = TaxChange(*t)
        lo, hi = passthrough_rate(a, s, tax), passthrough_rate(a + d, s, tax)
        assert hi > lo if tax.full_factor > 1 else hi < lo


class TestTreatmentEffect:
    def test_examples(self, short_design):
        fit = fit_with(short_design, [110.0, 100.0], [100.0, 100.0])
        assert treatment_effect(fit, MonthKey(2023, 4), short_design) == pytest.approx((10.0, 0.10), abs=1e-12)
        assert treatment_effect(fit, MonthKey(2023, 5)) == pytest.approx((0.0, 0.0), abs=1e-12)

    def test_before_treatment(self, short_design):
        fit = fit_with(short_design, [110.0, 100.0], [100.0, 100.0])
        with pytest.raises(ValueError):
            treatment_effect(fit, MonthKey(2023, 3), short_design)
