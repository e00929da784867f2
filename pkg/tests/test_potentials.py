import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracphase.potentials import (
    AuxRelation,
    CompletedSquare,
    QuarticPotential,
    aux_advance,
    aux_init,
    complete_quartic,
    double_well,
    pattern_well,
    sh_constants,
    shallow_well,
)


class TestCompleteQuartic:
    def test_double_well(self):
        sq = complete_quartic(QuarticPotential(1.0, 0.0, -1.0, 0.0, 0.25))
        assert (sq.q1, sq.q2, sq.q3, sq.q4, sq.q5) == pytest.approx(
            (0.5, 0.0, -0.5, 0.0, 0.0), abs=1e-15)

    def test_pattern_well_matches_constants(self):
        g, delta = 1.0, 0.2
        sq = complete_quartic(QuarticPotential(1.0, -g, delta, 0.0, 0.0))
        consts = sh_constants(g, delta)
        assert sq.q1 == pytest.approx(0.5)
        assert sq.q2 == pytest.approx(-g / 3.0)
        assert sq.q3 == pytest.approx(consts.c1, rel=1e-12)
        assert sq.q4 == pytest.approx(consts.c2, rel=1e-12)
        assert sq.q5 == pytest.approx(consts.c3, rel=1e-10)

    def test_shifted_quadratic_family(self):
        a1, s = 2.3, 0.7
        sq = complete_quartic(QuarticPotential(a1, 0.0, 2.0 * a1 * s, 0.0,
                                               0.0))
        root = np.sqrt(a1)
        assert (sq.q1, sq.q2, sq.q4) == pytest.approx((root / 2, 0.0, 0.0),
                                                      abs=1e-14)
        assert sq.q3 == pytest.approx(s * root, rel=1e-13)
        assert sq.q5 == pytest.approx(-a1 * s**2, rel=1e-13)

    def test_rejects_nonpositive_leading(self):
        with pytest.raises(ValueError):
            QuarticPotential(0.0)
        with pytest.raises(ValueError):
            QuarticPotential(-1.0)

    @given(a1=st.floats(0.1, 10.0), a2=st.floats(-5.0, 5.0),
           a3=st.floats(-5.0, 5.0), a4=st.floats(-5.0, 5.0),
           a5=st.floats(-5.0, 5.0))
    @settings(max_examples=1000, deadline=None)
    def test_roundtrip(self, a1, a2, a3, a4, a5):
        p = QuarticPotential(a1, a2, a3, a4, a5)
        sq = complete_quartic(p)  # raises if expansion mismatches
        back = sq.expand()
        scale = max(abs(a1), abs(a2), abs(a3), abs(a4), abs(a5), 1.0)
        for got, want in zip(
                (back.a1, back.a2, back.a3, back.a4, back.a5),
                (a1, a2, a3, a4, a5)):
            assert abs(got - want) <= 1e-12 * scale

    def test_pointwise_agreement(self):
        p = QuarticPotential(1.7, -0.9, 0.4, 0.2, -1.1)
        sq = complete_quartic(p)
        phi = np.linspace(-3.0, 3.0, 13)
        assert np.allclose(sq(phi), p(phi), rtol=1e-12, atol=1e-12)


class TestPatternConstants:
    def test_reference_values(self):
        c = sh_constants(1.0, 0.2)
        assert c.c1 == pytest.approx(0.1 - 1.0 / 9.0, rel=1e-14)
        assert c.c2 == pytest.approx(0.2 / 3.0 - 2.0 / 27.0, rel=1e-13)
        assert c.c3 == pytest.approx(-(0.1 - 1.0 / 9.0) ** 2, rel=1e-13)

    def test_symmetric_case(self):
        c = sh_constants(0.0, 1.0)
        assert (c.c1, c.c2, c.c3) == (0.5, 0.0, -0.25)

    def test_negative_delta_case(self):
        c = sh_constants(0.5, -0.25)
        assert c.c1 == pytest.approx(-0.1527777777777778, rel=1e-13)
        assert c.c2 == pytest.approx(-0.050925925925925923, rel=1e-13)
        assert c.c3 == pytest.approx(-0.02334104938271605, rel=1e-13)

    def test_expansion_identity(self):
        for g, delta in [(1.0, 0.2), (0.5, -0.25), (0.0, 1.0), (2.0, 3.0)]:
            c = sh_constants(g, delta)
            phi = np.linspace(-2.0, 2.0, 9)
            lhs = (0.5 * phi**2 - g / 3.0 * phi + c.c1) ** 2 \
                + c.c2 * phi + c.c3
            assert np.allclose(lhs, pattern_well(c, phi), atol=1e-14)


class TestDensities:
    def test_double_well_at_zero(self):
        assert double_well(0.0) == 0.25

    def test_shallow_well_at_half(self):
        assert shallow_well(0.5) == pytest.approx(1.0 / 64.0)

    def test_pattern_well_zero_by_construction(self):
        for g, delta in [(1.0, 0.2), (0.5, -0.25)]:
            c = sh_constants(g, delta)
            sq_form = (0.5 * 0.0 - g / 3.0 * 0.0 + c.c1) ** 2 + c.c3
            assert sq_form == pytest.approx(0.0, abs=1e-16)
            assert pattern_well(c, 0.0) == 0.0


class TestAuxRelation:
    def test_init_values(self):
        zero = np.zeros((4, 4))
        rel = AuxRelation.conserved_well(2.0)
        r_half, r_mhalf = aux_init(zero, rel)
        assert np.array_equal(r_half, np.full((4, 4), -3.0))
        assert np.array_equal(r_mhalf, r_half)

        rel = AuxRelation.shallow_well(2.0)
        ones = np.ones((4, 4))
        r_half, _ = aux_init(ones, rel)
        assert np.array_equal(r_half, np.full((4, 4), -2.0))

        c = sh_constants(1.0, 0.2)
        rel = AuxRelation.pattern_well(2.0, c)
        r_half, _ = aux_init(zero, rel)
        assert np.allclose(r_half, c.c1 - 2.0)

    def test_advance_fixed_point(self):
        rel = AuxRelation.conserved_well(2.0)
        phi = np.full((3, 3), 0.25)
        r = rel.closure(phi)
        assert np.array_equal(aux_advance(r, phi, rel), r)

    def test_advance_stays_at_init_for_constant_phase(self):
        rel = AuxRelation.shallow_well(1.5)
        phi = np.full((3, 3), 0.8)
        r_half, r_mhalf = aux_init(phi, rel)
        r = r_mhalf
        for _ in range(10):
            r = aux_advance(r, phi, rel)
            assert np.allclose(r, rel.closure(phi), atol=1e-14)

    def test_advance_arithmetic_example(self):
        rel = AuxRelation.conserved_well(2.0)
        phi = np.full((2, 2), 0.5)
        r_prev = np.full((2, 2), -3.0)
        got = aux_advance(r_prev, phi, rel)
        assert np.allclose(got, -2.5)

    def test_midpoint_relation_exact(self):
        rng = np.random.default_rng(2)
        rel = AuxRelation.generic(
            2.0, CompletedSquare(0.7, -0.3, 0.1, 0.0, 0.0))
        phi = rng.normal(size=(8, 8))
        r_prev = rng.normal(size=(8, 8))
        r_next = aux_advance(r_prev, phi, rel)
        resid = 0.5 * (r_next + r_prev) - rel.closure(phi)
        assert np.max(np.abs(resid)) < 1e-14

    def test_shape_mismatch(self):
        rel = AuxRelation.conserved_well(2.0)
        with pytest.raises(ValueError):
            aux_advance(np.zeros((2, 2)), np.zeros((3, 3)), rel)
