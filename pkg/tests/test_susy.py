"""Tests for susy.py."""
import numpy as np
import pytest
import sympy

from complex_charts.almost_complex import nijenhuis_components
from complex_charts.chart import gradient
from complex_charts.errors import InconsistentRelations, SquareRelationMissing
from complex_charts.grassmann import (
    ETA_TILDE,
    ETA_TILDE1,
    ETA_TILDE2,
    THETA,
    FormalSymbol,
    GrassmannExpr,
    n1_superfield,
    psi_symbol,
    substitute,
    time_derivative,
)
from complex_charts.susy import (
    CommutatorReport,
    FormalStructure,
    _dz_rules,
    _solve_linear,
    anticommuting_basis_exact,
    cal_d_commutator,
    cal_d_intermediate,
    cal_d_nijenhuis_form,
    commutator,
    delta_tilde_commute_check,
    eq_intr_remainder,
    eq_intr_to_nijenhuis,
    flat_matrix,
    nijenhuis_evaluator,
    nijenhuis_pattern,
    square_remainder,
    tilde_delta,
)

I = sympy.I  # noqa: E741
BOTH = frozenset({"square", "integrability"})
SQUARE = frozenset({"square"})


def _all_zero(named):
    return all(e.is_zero() for e in named.values())


def _differences(left, right):
    return {k: left[k] - right[k] for k in left}


def _closure_target(M):
    """-2 i etat1 etat2 Xdot^M."""
    etas = GrassmannExpr.atom(ETA_TILDE1) * GrassmannExpr.atom(ETA_TILDE2)
    return -2 * I * etas * time_derivative(n1_superfield(M))


@pytest.fixture(scope="module")
def generic_commutator_2d():
    """Commutator for a generic structure on two real dimensions."""
    return commutator(FormalStructure(2))


class TestFormalStructure(object):
    """Tests for FormalStructure and the flat frame."""

    def test_formal_structure_defence(self):
        """Test dimension and relation checks."""
        with pytest.raises(ValueError, match="`dim` expected an even value"):
            FormalStructure(3)
        with pytest.raises(ValueError, match="`dim` expected"):
            FormalStructure(0)
        with pytest.raises(ValueError, match="'relations' expected one of"):
            FormalStructure(2, frozenset({"bogus"}))
        with pytest.raises(SquareRelationMissing, match="square relation"):
            FormalStructure(2, frozenset({"integrability"}))

    def test_flat_matrix(self):
        """Test the flat matrix squares to -1 and has the chosen sign."""
        F = flat_matrix(4)
        assert F * F == -sympy.eye(4)
        assert F[0, 1] == 1 and F[1, 0] == -1
        assert F[2, 3] == 1 and F[0, 3] == 0

    @pytest.mark.parametrize("dim", [2, 4, 6])
    def test_anticommuting_basis_exact(self, dim):
        """Test every basis matrix anticommutes with the flat matrix."""
        F = flat_matrix(dim)
        basis = anticommuting_basis_exact(dim)
        assert len(basis) == dim * dim // 2
        for B in basis:
            assert F * B + B * F == sympy.zeros(dim, dim)

    def test_entries(self):
        """Test formal and constant entries."""
        fs = FormalStructure(2)
        assert fs.entry(1, 2).even_symbols() == {fs.symbol(1, 2)}
        flat = FormalStructure.flat(2)
        assert flat.entry(1, 2) == 1
        assert flat.entry(1, 2, (1,)).is_zero()
        assert flat.reduce(fs.entry(1, 1)) == fs.entry(1, 1)

    def test_reduce_square(self):
        """Test the adapted frame satisfies I^2 = -1 and its derivatives."""
        fs = FormalStructure(4, SQUARE)
        for N in fs.indices:
            for M in fs.indices:
                square = GrassmannExpr()
                d_square = GrassmannExpr()
                for L in fs.indices:
                    square = square + fs.entry(N, L) * fs.entry(L, M)
                    d_square = d_square + fs.entry(N, L, (3,)) * fs.entry(
                        L, M
                    ) + fs.entry(N, L) * fs.entry(L, M, (3,))
                assert fs.reduce(square) == (-1 if N == M else 0)
                assert fs.reduce(d_square).is_zero()

    def test_tilde_delta_flat(self):
        """Test the lowest component of the flat second supersymmetry."""
        fs = FormalStructure.flat(2)
        var = tilde_delta(1, ETA_TILDE, fs)
        lowest_part = GrassmannExpr(
            {k: c for k, c in var.terms.items() if THETA not in k}
        )
        assert lowest_part == -I * GrassmannExpr.atom(
            ETA_TILDE
        ) * GrassmannExpr.atom(psi_symbol(2))
        with pytest.raises(ValueError, match="`M` expected"):
            tilde_delta(3, ETA_TILDE, fs)


class TestCommutator(object):
    """Tests for the commutator of two tilde transformations."""

    @pytest.mark.parametrize("dim", [2, 4])
    def test_flat_closes(self, dim):
        """Test a constant structure closes onto time translations."""
        report = commutator(FormalStructure.flat(dim))
        assert isinstance(report, CommutatorReport)
        assert report.closes
        assert report.residual_is_zero
        assert _all_zero(report.dxdx_part)
        for M in range(1, dim + 1):
            assert report.xdot_part[M] == _closure_target(M)

    def test_generic_decomposition(self, generic_commutator_2d):
        """Test full = xdot part + dxdx part for any structure."""
        assert generic_commutator_2d.residual_is_zero
        assert not generic_commutator_2d.closes

    def test_generic_lowest_component(self, generic_commutator_2d):
        """Test second derivatives of I stay out of the lowest component."""
        assert generic_commutator_2d.second_derivative_symbols() == set()
        text = generic_commutator_2d.to_text()
        assert text.startswith("D = 2, relations = []")
        assert "obstruction[2] = " in text

    def test_swapped_parameters(self, generic_commutator_2d):
        """Test exchanging the two parameters flips the sign."""
        swap = {ETA_TILDE1: ETA_TILDE2, ETA_TILDE2: ETA_TILDE1}
        for M, e in generic_commutator_2d.full.items():
            assert not e.is_zero()
            assert substitute(e, swap) == -e
            assert substitute(
                generic_commutator_2d.dxdx_part[M], swap
            ) == -generic_commutator_2d.dxdx_part[M]

    def test_square_lowest_closes_2d(self):
        """Test the lowest component closes once I^2 = -1 in D = 2."""
        report = commutator(FormalStructure(2, SQUARE))
        assert report.residual_is_zero
        for e in report.obstruction.values():
            lowest_part = GrassmannExpr(
                {k: c for k, c in e.terms.items() if THETA not in k}
            )
            assert lowest_part.is_zero()

    def test_integrable_closes_2d(self):
        """Test the algebra closes with both relations in D = 2."""
        report = commutator(FormalStructure(2, BOTH))
        assert report.closes
        assert report.relations == BOTH

    @pytest.mark.runexpensive
    def test_square_only_obstruction_4d(self):
        """Test the obstruction is the derivative term when only I^2 = -1."""
        report = commutator(FormalStructure(4, SQUARE))
        assert report.residual_is_zero
        assert not report.closes
        for M in range(1, 5):
            assert report.obstruction[M] == report.dxdx_part[M]

    @pytest.mark.runexpensive
    def test_integrable_closes_4d(self):
        """Test the algebra closes with both relations in D = 4."""
        report = commutator(FormalStructure(4, BOTH))
        assert report.residual_is_zero
        assert report.closes


class TestIntegrabilityRewrite(object):
    """Tests for the rewriting of the closure condition."""

    def test_remainder_identity(self):
        """Test the remainder is built from I^2 + 1 alone."""
        fs = FormalStructure(2)
        diff = _differences(eq_intr_remainder(fs), square_remainder(fs))
        assert len(diff) == 8
        assert _all_zero(diff)

    def test_eq_intr_to_nijenhuis(self):
        """Test the bracket equals -I N once I^2 = -1."""
        assert _all_zero(eq_intr_to_nijenhuis(FormalStructure(2, SQUARE)))
        assert _all_zero(eq_intr_to_nijenhuis(FormalStructure.flat(4)))
        with pytest.raises(SquareRelationMissing, match="I\\^2 = -1"):
            eq_intr_to_nijenhuis(FormalStructure(2))

    @pytest.mark.runexpensive
    def test_eq_intr_to_nijenhuis_4d(self):
        """Test the rewrite in D = 4."""
        assert _all_zero(eq_intr_to_nijenhuis(FormalStructure(4, SQUARE)))

    def test_nijenhuis_pattern_integrable(self):
        """Test the imposed relations kill the Nijenhuis tensor."""
        assert _all_zero(nijenhuis_pattern(FormalStructure(2, SQUARE)))
        assert _all_zero(nijenhuis_pattern(FormalStructure(4, BOTH)))
        generic = nijenhuis_pattern(FormalStructure(4, SQUARE))
        assert not _all_zero(generic)

    def test_nijenhuis_evaluator(self, twisted_2d):
        """Test the symbolic pattern against the spectral evaluation."""
        comps = twisted_2d.components
        grad = gradient(comps, twisted_2d.chart)
        evaluated = nijenhuis_evaluator(4)(comps, grad)
        expected = nijenhuis_components(comps, twisted_2d.chart)
        assert evaluated.shape == expected.shape
        assert np.allclose(evaluated, expected, atol=1e-12)


class TestCalD(object):
    """Tests for the commutator of the operators D_M."""

    @pytest.mark.parametrize("dim", [2, 4])
    def test_cal_d_nijenhuis(self, dim):
        """Test [D_M, D_N] z = -i N_MN^K d_K z with I^2 = -1 and D z = 0."""
        fs = FormalStructure(dim, SQUARE)
        diff = _differences(cal_d_commutator(fs), cal_d_nijenhuis_form(fs))
        assert len(diff) == dim * (dim - 1) // 2
        assert _all_zero(diff)

    def test_solve_linear_complex(self):
        """Test linear solves keep complex relations between real symbols."""
        a, b = sympy.symbols("a b", real=True)
        assert _solve_linear([a - I * b, b + I * a], [b]) == {b: -I * a}
        assert _solve_linear([a - a], [a]) == {}
        with pytest.raises(InconsistentRelations, match="inconsistent"):
            _solve_linear([b - 1, b - 2], [b])

    @pytest.mark.parametrize("dim", [2, 4])
    def test_dz_rules(self, dim):
        """Test D z = 0 fixes each even derivative as +-i the odd one."""
        fs = FormalStructure(dim, SQUARE)
        rules = _dz_rules(fs)
        zs = [
            FormalSymbol("zn", partials=(Q,), dim=dim).symbol
            for Q in fs.indices
        ]
        assert set(rules) == set(zs[1::2])
        for odd, even in zip(zs[0::2], zs[1::2]):
            assert sympy.expand(rules[even] ** 2 + odd**2) == 0
            assert rules[even] != 0

    def test_cal_d_vanishes_integrable(self):
        """Test the commutator vanishes for an integrable frame."""
        assert _all_zero(cal_d_commutator(FormalStructure(4, BOTH)))

    def test_cal_d_intermediate(self):
        """Test the generic intermediate form."""
        fs = FormalStructure(2)
        diff = _differences(
            cal_d_commutator(fs, dz_rule=False), cal_d_intermediate(fs)
        )
        assert _all_zero(diff)
        with pytest.raises(SquareRelationMissing, match="D z = 0"):
            cal_d_commutator(fs, dz_rule=True)


class TestDeltaCommute(object):
    """Tests for the commutation of the two supersymmetries."""

    @pytest.mark.parametrize(
        "fs",
        [FormalStructure(2), FormalStructure.flat(4)],
        ids=["generic-2", "flat-4"],
    )
    def test_delta_tilde_commute(self, fs):
        """Test the first and second supersymmetries commute."""
        assert _all_zero(delta_tilde_commute_check(fs))
