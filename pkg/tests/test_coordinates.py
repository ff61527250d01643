"""Tests for coordinates.py."""
import re

import numpy as np
import pytest

from complex_charts.almost_complex import (
    canonical_matrix,
    constant_field,
    flat_metric,
    flat_structure,
    pullback_structure,
    validate,
)
from complex_charts.chart import ScalarField, TensorField
from complex_charts.coordinates import (
    ComplexCoordinateMap,
    HermitianMetricReport,
    complex_frame_residual,
    construct_coordinates,
    coordinate_residual,
    delta_rhs,
    exact_pullback_coordinates,
    flat_linear_part,
    hermitian_metric_report,
    linear_step,
    resolve_optional_metric,
    structure_in_coordinates,
    zbar_linear_part,
)
from complex_charts.errors import (
    AnticommutatorViolated,
    IntegrabilityObstruction,
    SingularJacobian,
    StepTooLarge,
)


@pytest.fixture(scope="module")
def flat_acs_1d(chart_1d):
    """Flat structure with Euclidean metric on the d = 1 chart."""
    return validate(flat_structure(chart_1d), flat_metric(chart_1d))


@pytest.fixture(scope="module")
def pullback_acs_1d(pullback_1d):
    """Validated `pullback_1d`."""
    return validate(pullback_1d.I, pullback_1d.g)


@pytest.fixture(scope="module")
def exact_1d(chart_1d, pullback_1d):
    """Exact coordinates of `pullback_1d`."""
    return exact_pullback_coordinates(chart_1d, pullback_1d.exact_delta)


def _sheared_2d(chart, amp):
    """Non-integrable I_0 + Delta, Delta_1^3 = -Delta_2^4 = amp sin(x4).

    Delta anticommutes with I_0 and squares to zero, so I^2 = -1 exactly.
    """
    bump = amp * np.sin(chart.coordinates()[3])
    A = np.broadcast_to(canonical_matrix(2), chart.shape + (4, 4)).copy()
    A[..., 0, 2] += bump
    A[..., 1, 3] -= bump
    return validate(TensorField.from_pointwise(chart, A, "lu"))


class TestComplexCoordinateMap(object):
    """Tests for the ComplexCoordinateMap class."""

    def test_linear_parts(self):
        """Test the flat linear maps."""
        L = flat_linear_part(2)
        assert L.shape == (2, 4)
        assert np.isclose(L[1, 2], 1 / np.sqrt(2))
        assert np.isclose(L[1, 3], 1j / np.sqrt(2))
        assert L[0, 2] == 0
        assert np.allclose(zbar_linear_part(2), np.conj(L))

    def test_flat_map(self, chart_1d, flat_acs_1d):
        """Test z_(0) solves the flat equations."""
        z = ComplexCoordinateMap.flat(chart_1d)
        assert np.allclose(z.values(1).values, chart_1d.z0(1))
        assert coordinate_residual(z, flat_acs_1d) < 1e-14
        assert complex_frame_residual(z, flat_acs_1d) < 1e-14
        assert z.jacobian().shape == chart_1d.shape + (1, 2)

    def test_map_defence(self, chart_1d, chart_2d):
        """Test shape and chart checks."""
        zero = ScalarField.zeros(chart_1d)
        with pytest.raises(ValueError, match="`linear` expected shape"):
            ComplexCoordinateMap(chart_1d, np.zeros((2, 2)), (zero,))
        with pytest.raises(ValueError, match="`delta` is of length 2"):
            ComplexCoordinateMap(chart_1d, flat_linear_part(1), (zero, zero))
        with pytest.raises(ValueError, match="different chart"):
            ComplexCoordinateMap(
                chart_2d,
                flat_linear_part(2),
                (ScalarField.zeros(chart_2d), zero),
            )
        with pytest.raises(ValueError, match="`n` expected"):
            ComplexCoordinateMap.flat(chart_1d).values(2)

    def test_reparametrize(self, exact_1d, pullback_acs_1d):
        """Test a holomorphic linear change keeps the equations."""
        w = exact_1d.reparametrize(np.array([[2.0 - 1.0j]]))
        assert np.allclose(w.linear, (2.0 - 1.0j) * exact_1d.linear)
        assert coordinate_residual(w, pullback_acs_1d) < 1e-10
        with pytest.raises(ValueError, match="`matrix` expected shape"):
            exact_1d.reparametrize(np.eye(2))

    def test_singular_map(self, chart_1d, flat_acs_1d):
        """Test degenerate maps raise on frame quantities."""
        z = ComplexCoordinateMap(
            chart_1d, np.zeros((1, 2)), (ScalarField.zeros(chart_1d),)
        )
        with pytest.raises(SingularJacobian, match="singular"):
            complex_frame_residual(z, flat_acs_1d)


class TestVerification(object):
    """Tests for residuals and the hermitian metric report."""

    def test_exact_pullback_coordinates(self, exact_1d, pullback_acs_1d):
        """Test the exact map solves the pulled back equations."""
        assert coordinate_residual(exact_1d, pullback_acs_1d) < 1e-10
        assert complex_frame_residual(exact_1d, pullback_acs_1d) < 1e-10
        A_u = structure_in_coordinates(exact_1d, pullback_acs_1d)
        assert np.allclose(A_u[0, 0], np.diag([-1j, 1j]), atol=1e-10)

    def test_flat_map_fails_curved(self, chart_1d, pullback_acs_1d):
        """Test z_(0) does not solve the pulled back equations."""
        z = ComplexCoordinateMap.flat(chart_1d)
        assert coordinate_residual(z, pullback_acs_1d) > 1e-3

    def test_coordinate_residual_charts(self, chart_2d, flat_acs_1d):
        """Test charts must agree."""
        with pytest.raises(ValueError, match="different charts"):
            coordinate_residual(
                ComplexCoordinateMap.flat(chart_2d), flat_acs_1d
            )

    def test_hermitian_metric_report(self, exact_1d, pullback_acs_1d):
        """Test the metric is hermitian in exact coordinates."""
        report = hermitian_metric_report(exact_1d, pullback_acs_1d.g)
        assert isinstance(report, HermitianMetricReport)
        assert report.h.shape == exact_1d.chart.shape + (1, 1)
        assert report.max_holomorphic < 1e-10
        assert report.max_antiholomorphic < 1e-10
        assert report.hermiticity_residual < 1e-10
        assert np.all(report.h.real > 0)
        with pytest.raises(ValueError, match="`g` expected signature 'll'"):
            hermitian_metric_report(exact_1d, pullback_acs_1d.I)

    def test_resolve_optional_metric(self, exact_1d, pullback_1d):
        """Test the report is only built when a metric is present."""
        bare = validate(pullback_1d.I)
        assert resolve_optional_metric(bare, exact_1d) is None
        acs = validate(pullback_1d.I, pullback_1d.g)
        report = resolve_optional_metric(acs, exact_1d)
        assert isinstance(report, HermitianMetricReport)


class TestLinearStep(object):
    """Tests for the linearized solve."""

    def test_delta_rhs(self, chart_1d):
        """Test the reduced right-hand sides and the anticommutator guard."""
        eps = 1e-3
        delta = constant_field(chart_1d, eps * np.diag([1.0, -1.0]))
        rhs = delta_rhs(delta)
        assert len(rhs) == 1 and len(rhs[0]) == 1
        assert np.allclose(rhs[0][0].values, 0.5j * eps)
        with pytest.raises(AnticommutatorViolated, match="Delta I_0"):
            delta_rhs(constant_field(chart_1d, np.eye(2)))

    def test_linear_step_second_order(self, chart_1d, displacement_1d):
        """Test the linearized map leaves a residual quadratic in the scale."""
        residuals = []
        for s in (0.01, 0.005):
            pulled = pullback_structure(chart_1d, displacement_1d, s)
            acs = validate(pulled.I, pulled.g)
            z = linear_step(acs)
            assert z.steps == 1
            assert z.step_residuals[0] == coordinate_residual(z, acs)
            flat = coordinate_residual(
                ComplexCoordinateMap.flat(chart_1d), acs
            )
            assert z.step_residuals[0] < 0.1 * flat
            residuals.append(z.step_residuals[0])
        assert 3.0 < residuals[0] / residuals[1] < 5.0

    @pytest.mark.parametrize("amp", [1e-3, 0.01, 0.04, 0.045, 0.049])
    def test_linear_step_obstruction(self, chart_2d, amp):
        """Test non-integrable structures are refused at every amplitude."""
        acs = _sheared_2d(chart_2d, amp)
        with pytest.raises(
            IntegrabilityObstruction, match=re.escape("max |N|")
        ) as err:
            linear_step(acs)
        assert "closedness residual" in str(err.value)

    def test_linear_step_too_large(self, chart_1d, displacement_1d):
        """Test large deformations are refused with a suggestion."""
        pulled = pullback_structure(chart_1d, displacement_1d, 0.2)
        acs = validate(pulled.I, pulled.g)
        with pytest.raises(StepTooLarge, match="exceeds step bound") as err:
            linear_step(acs)
        assert err.value.suggested_steps >= 2


class TestConstructCoordinates(object):
    """Tests for continuation from the flat structure."""

    def test_construct_flat(self, flat_acs_1d):
        """Test the flat structure keeps z_(0)."""
        z = construct_coordinates(flat_acs_1d, steps=2, progress=False)
        assert z.steps == 2
        assert len(z.step_residuals) == 2
        assert max(z.step_residuals) < 1e-14

    def test_construct_pullback(self, chart_1d, pullback_acs_1d):
        """Test continuation reduces the residual of z_(0)."""
        flat = coordinate_residual(
            ComplexCoordinateMap.flat(chart_1d), pullback_acs_1d
        )
        z = construct_coordinates(pullback_acs_1d, steps=8, progress=False)
        assert len(z.step_residuals) == 8
        final = coordinate_residual(z, pullback_acs_1d)
        assert final == z.step_residuals[-1]
        assert final < 0.2 * flat
        assert final < 1e-2
        assert complex_frame_residual(z, pullback_acs_1d) < 0.1
        metric = hermitian_metric_report(z, pullback_acs_1d.g)
        assert metric.hermiticity_residual < 1e-10

    def test_construct_obstruction(self, twisted_2d):
        """Test non-integrable structures are refused before solving."""
        with pytest.raises(
            IntegrabilityObstruction, match=re.escape("max |N|")
        ):
            construct_coordinates(validate(twisted_2d), progress=False)

    def test_construct_too_large(self, chart_1d, displacement_1d):
        """Test too few steps for a large deformation."""
        pulled = pullback_structure(chart_1d, displacement_1d, 0.2)
        acs = validate(pulled.I, pulled.g)
        with pytest.raises(StepTooLarge) as err:
            construct_coordinates(acs, steps=1, progress=False)
        assert err.value.suggested_steps >= 2

    @pytest.mark.runexpensive
    def test_construct_pullback_2d(self, chart_2d, pullback_acs_2d):
        """Test continuation in two complex dimensions."""
        flat = coordinate_residual(
            ComplexCoordinateMap.flat(chart_2d), pullback_acs_2d
        )
        z = construct_coordinates(pullback_acs_2d, steps=8, progress=False)
        assert coordinate_residual(z, pullback_acs_2d) < 0.2 * flat

    @pytest.mark.parametrize("steps", [2, 4, 8])
    def test_construct_more_steps_better(self, pullback_acs_1d, steps):
        """Test doubling the step count lowers the final residual."""
        coarse = construct_coordinates(
            pullback_acs_1d, steps=steps, step_bound=1.0, progress=False
        )
        fine = construct_coordinates(
            pullback_acs_1d, steps=2 * steps, step_bound=1.0, progress=False
        )
        assert fine.step_residuals[-1] < coarse.step_residuals[-1]


class TestBenchmarks(object):
    """Accuracy benchmarks on the 16^4 two complex dimensional grid."""

    @pytest.mark.runexpensive
    def test_linear_step_quadratic_accuracy(
        self, chart_2d_fine, displacement_2d_fine
    ):
        """Test one linear step leaves a residual scaling as s^2."""
        scales = np.array([1e-2, 1e-3, 1e-4])
        residuals = []
        for s in scales:
            pulled = pullback_structure(chart_2d_fine, displacement_2d_fine, s)
            acs = validate(pulled.I, pulled.g)
            residuals.append(coordinate_residual(linear_step(acs), acs))
        residuals = np.array(residuals)
        slope = np.polyfit(np.log(scales), np.log(residuals), 1)[0]
        assert abs(slope - 2.0) < 0.1
        assert np.all(residuals <= 10 * scales**2)

    @pytest.mark.runexpensive
    def test_continuation_accuracy(self, chart_2d_fine, displacement_2d_fine):
        """Test continuation at s = 0.1 and the holomorphic metric part."""
        pulled = pullback_structure(chart_2d_fine, displacement_2d_fine, 0.1)
        acs = validate(pulled.I, pulled.g)
        ten = construct_coordinates(acs, steps=10, progress=False)
        residual = coordinate_residual(ten, acs)
        assert residual <= 1e-3
        twenty = construct_coordinates(acs, steps=20, progress=False)
        assert coordinate_residual(twenty, acs) < residual
        metric = hermitian_metric_report(ten, pulled.g)
        assert metric.max_holomorphic <= 10 * residual
