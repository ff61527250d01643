"""Construction & verification of complex coordinates.

Coordinates are stored as z^n = sum_M L[n, M] x^M + delta^n with a constant
complex matrix L and periodic corrections delta^n, so that linearly growing
coordinates such as z_(0) can live on the torus chart. For the flat map
L[n, 2n-1] = 1/sqrt(2) and L[n, 2n] = i/sqrt(2).
"""
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from complex_charts.almost_complex import (
    AlmostComplexStructure,
    anticommutator_residual,
    anticommuting_part,
    canonical_matrix,
    nijenhuis,
    project_structure,
)
from complex_charts.chart import (
    SQRT2,
    GridChart,
    ScalarField,
    TensorField,
    gradient,
)
from complex_charts.dbar import AntiholomorphicForm, closedness_residual, solve
from complex_charts.errors import (
    AnticommutatorViolated,
    IntegrabilityObstruction,
    PathValidationFailed,
    SingularJacobian,
    StepTooLarge,
)
from complex_charts.utils.constants import DEFAULTS
from complex_charts.utils.defence import (
    _check_int_in_range,
    _check_iterable,
    _check_positive_real,
    _type_defence,
)


def flat_linear_part(d: int) -> np.ndarray:
    """d x 2d matrix of d z_(0)^n / d x^M."""
    _check_int_in_range(d, "d", 1)
    linear = np.zeros((d, 2 * d), dtype=complex)
    for n in range(d):
        linear[n, 2 * n] = 1 / SQRT2
        linear[n, 2 * n + 1] = 1j / SQRT2
    return linear


def zbar_linear_part(d: int) -> np.ndarray:
    """d x 2d matrix of d zbar_(0)^n / d x^M."""
    return np.conj(flat_linear_part(d))


@dataclass(frozen=True)
class ComplexCoordinateMap:
    """Candidate complex coordinates z^1 ... z^d on a chart.

    Attributes
    ----------
    chart : GridChart
        The chart.
    linear : np.ndarray
        Constant complex d x D matrix L.
    delta : tuple of ScalarField
        Periodic corrections delta^n.
    steps : int
        Number of linearized steps that produced the map.
    step_residuals : tuple of float
        Coordinate residual after each step.

    """

    chart: GridChart
    linear: np.ndarray = field(repr=False)
    delta: Tuple[ScalarField, ...] = field(repr=False)
    steps: int = 0
    step_residuals: Tuple[float, ...] = ()

    def __post_init__(self):
        _type_defence(self.chart, "chart", GridChart)
        linear = np.asarray(self.linear, dtype=complex)
        if linear.shape != (self.chart.d, self.chart.dim):
            raise ValueError(
                f"`linear` expected shape {(self.chart.d, self.chart.dim)}. "
                f"Got {linear.shape}"
            )
        delta = tuple(self.delta)
        _check_iterable(
            delta,
            "delta",
            tuple,
            exp_type=ScalarField,
            check_length=True,
            length=self.chart.d,
        )
        if any(c.chart != self.chart for c in delta):
            raise ValueError("`delta` lives on a different chart.")
        object.__setattr__(self, "linear", linear)
        object.__setattr__(self, "delta", delta)

    @classmethod
    def flat(cls, chart: GridChart) -> "ComplexCoordinateMap":
        """The map z = z_(0)."""
        return cls(
            chart=chart,
            linear=flat_linear_part(chart.d),
            delta=tuple(ScalarField.zeros(chart) for _ in range(chart.d)),
        )

    def values(self, n: int) -> ScalarField:
        """Samples of z^n (1-based) on the grid."""
        _check_int_in_range(n, "n", 1, self.chart.d)
        x = self.chart.coordinates()
        row = self.linear[n - 1]
        linear = sum(row[M] * x[M] for M in range(self.chart.dim))
        return ScalarField(self.chart, linear + self.delta[n - 1].values)

    def jacobian(self) -> np.ndarray:
        """d z^n / d x^M as an array of shape chart.shape + (d, D)."""
        stacked = np.stack([c.values for c in self.delta])
        # gradient()[M, n] = d_M delta^n
        grad = np.moveaxis(gradient(stacked, self.chart), (0, 1), (-1, -2))
        return self.linear + grad

    def reparametrize(self, matrix: np.ndarray) -> "ComplexCoordinateMap":
        """Compose with the holomorphic linear map w = C z."""
        C = np.asarray(matrix, dtype=complex)
        if C.shape != (self.chart.d, self.chart.d):
            raise ValueError(
                f"`matrix` expected shape {(self.chart.d, self.chart.d)}. "
                f"Got {C.shape}"
            )
        stacked = np.stack([c.values for c in self.delta])
        mixed = np.einsum("nm,m...->n...", C, stacked)
        return ComplexCoordinateMap(
            chart=self.chart,
            linear=C @ self.linear,
            delta=tuple(ScalarField(self.chart, v) for v in mixed),
            steps=self.steps,
            step_residuals=self.step_residuals,
        )

    def _shifted(
        self, d_linear: np.ndarray, d_delta: Sequence[ScalarField]
    ) -> "ComplexCoordinateMap":
        return ComplexCoordinateMap(
            chart=self.chart,
            linear=self.linear + d_linear,
            delta=tuple(a + b for a, b in zip(self.delta, d_delta)),
            steps=self.steps,
            step_residuals=self.step_residuals,
        )


@dataclass(frozen=True)
class HermitianMetricReport:
    """Metric in the complex frame of a coordinate map.

    Attributes
    ----------
    h : np.ndarray
        h_(m nbar) over the grid, shape chart.shape + (d, d).
    max_holomorphic : float
        max |g^(nm)|.
    max_antiholomorphic : float
        max |g^(nbar mbar)|.
    hermiticity_residual : float
        max |conj(h_(n mbar)) - h_(m nbar)|.

    """

    h: np.ndarray = field(repr=False)
    max_holomorphic: float
    max_antiholomorphic: float
    hermiticity_residual: float


def _delta_matrices(acs: AlmostComplexStructure) -> np.ndarray:
    return acs.matrices() - canonical_matrix(acs.chart.d)


def delta_rhs(
    delta: TensorField, tol: float = DEFAULTS.validation
) -> List[List[ScalarField]]:
    """Right-hand sides of d(delta z^n) / d zbar_(0)^m = omega[n][m].

    omega[n][m] = (i/2) (Delta_(2m-1)^(2n-1) + i Delta_(2m-1)^(2n)), with
    0-based list indices standing for 1-based n, m.

    Parameters
    ----------
    delta : TensorField
        Deformation Delta = I - I_0, signature "lu".
    tol : float, optional
        Tolerance on the anticommutator with I_0, by default 1e-8.

    Returns
    -------
    list of list of ScalarField
        The d x d right-hand sides.

    Raises
    ------
    AnticommutatorViolated
        Delta does not anticommute with I_0.

    """
    _type_defence(delta, "delta", TensorField)
    residual = anticommutator_residual(delta)
    if residual > tol:
        raise AnticommutatorViolated(
            f"max |Delta I_0 + I_0 Delta| = {residual:.3e} exceeds "
            f"tolerance {tol:.1e}"
        )
    chart = delta.chart
    comps = delta.components
    return [
        [
            ScalarField(
                chart,
                0.5j * (comps[2 * m, 2 * n] + 1j * comps[2 * m, 2 * n + 1]),
            )
            for m in range(chart.d)
        ]
        for n in range(chart.d)
    ]


def _solve_rows(
    chart: GridChart, rhs: Sequence[Sequence[ScalarField]]
) -> Tuple[np.ndarray, List[ScalarField]]:
    """Solve every row, moving zero modes into zbar_(0)-linear terms."""
    d_linear = np.zeros((chart.d, chart.dim), dtype=complex)
    zbar = zbar_linear_part(chart.d)
    corrections = []
    for n, row in enumerate(rhs):
        means = [comp.mean() for comp in row]
        d_linear[n] = sum(c * zbar[m] for m, c in enumerate(means))
        form = AntiholomorphicForm(
            tuple(comp - ScalarField(chart, np.full(chart.shape, c))
                  for comp, c in zip(row, means))
        )
        corrections.append(solve(form).f)
    return d_linear, corrections


def _step_bound_check(size: float, step_bound: float, steps: int = 1):
    if size / steps > step_bound:
        suggested = max(math.ceil(size / step_bound), steps + 1)
        raise StepTooLarge(
            f"deformation of size {size:.3e} over {steps} step(s) exceeds "
            f"step bound {step_bound:.1e}; try {suggested} steps",
            suggested_steps=suggested,
        )
    if size / steps > 0.5 * step_bound:
        warnings.warn(
            UserWarning(
                f"step size {size / steps:.3e} is close to the bound "
                f"{step_bound:.1e}; accuracy may suffer."
            )
        )


def linear_step(
    acs: AlmostComplexStructure,
    tol: float = DEFAULTS.integrability,
    step_bound: float = DEFAULTS.step_bound,
) -> ComplexCoordinateMap:
    """One linearized solve: z = z_(0) + delta z.

    Only the part of Delta = I - I_0 anticommuting with I_0 enters the
    reduced equations. Their rows are closed to first order exactly when the
    Nijenhuis tensor vanishes, so the structure is refused when max |N|
    exceeds `tol`. The quadratic remainder an integrable finite Delta
    leaves in the rows goes into the least-squares solve.

    Parameters
    ----------
    acs : AlmostComplexStructure
        Structure close to I_0.
    tol : float, optional
        Tolerance on max |N|, by default 1e-6.
    step_bound : float, optional
        Largest accepted max |Delta|, by default 0.05.

    Returns
    -------
    ComplexCoordinateMap
        Map with one recorded step.

    Raises
    ------
    StepTooLarge
        max |Delta| exceeds `step_bound`.
    IntegrabilityObstruction
        max |N| exceeds `tol`. Raised before any solve.

    """
    _type_defence(acs, "acs", AlmostComplexStructure)
    _check_positive_real(tol, "tol")
    _check_positive_real(step_bound, "step_bound")
    chart = acs.chart
    D = _delta_matrices(acs)
    delta = anticommuting_part(TensorField.from_pointwise(chart, D, "lu"))
    rhs = delta_rhs(delta)

    obstruction = nijenhuis(acs).max_abs
    if obstruction > tol:
        closedness = [
            closedness_residual(AntiholomorphicForm(tuple(row)))
            for row in rhs
        ]
        worst = int(np.argmax(closedness))
        raise IntegrabilityObstruction(
            f"max |N| = {obstruction:.3e} exceeds tolerance {tol:.1e}; row "
            f"{worst + 1} of the linearized system has closedness residual "
            f"{closedness[worst]:.3e}"
        )
    _step_bound_check(float(np.max(np.abs(D))), step_bound)

    d_linear, corrections = _solve_rows(chart, rhs)
    z = ComplexCoordinateMap.flat(chart)._shifted(d_linear, corrections)
    return ComplexCoordinateMap(
        chart=chart,
        linear=z.linear,
        delta=z.delta,
        steps=1,
        step_residuals=(coordinate_residual(z, acs),),
    )


def _operator_residual(z: ComplexCoordinateMap, A: np.ndarray) -> np.ndarray:
    """D_M z^n = d_M z^n - i A[M, N] d_N z^n, shape chart.shape + (d, D)."""
    P = z.jacobian()
    return P - 1j * P @ np.swapaxes(A, -1, -2)


def construct_coordinates(
    acs: AlmostComplexStructure,
    steps: int = DEFAULTS.steps,
    tol: float = DEFAULTS.integrability,
    step_bound: float = DEFAULTS.step_bound,
    progress: bool = True,
) -> ComplexCoordinateMap:
    """Complex coordinates by continuation from I_0 to I.

    For s = 1/steps, ..., 1 the intermediate structure I_0 + s (I - I_0) is
    projected back onto I^2 = -1, and the current coordinates are corrected
    by a linearized solve driven by their residual d_M z - i I_M^N d_N z.

    Parameters
    ----------
    acs : AlmostComplexStructure
        Target structure.
    steps : int, optional
        Number of continuation steps, by default 8.
    tol : float, optional
        Tolerance on max |N| and on intermediate validation, by default 1e-6.
    step_bound : float, optional
        Largest accepted deformation per step, by default 0.05.
    progress : bool, optional
        Show a tqdm progress bar, by default True.

    Returns
    -------
    ComplexCoordinateMap
        Coordinates with the residual after every step.

    Raises
    ------
    IntegrabilityObstruction
        The Nijenhuis tensor exceeds `tol`. Raised before any solve.
    StepTooLarge
        The per-step deformation exceeds `step_bound`.
    PathValidationFailed
        An intermediate structure cannot be projected onto I^2 = -1.

    """
    _type_defence(acs, "acs", AlmostComplexStructure)
    _check_int_in_range(steps, "steps", 1)
    _check_positive_real(tol, "tol")
    _type_defence(progress, "progress", bool)
    chart = acs.chart

    obstruction = nijenhuis(acs).max_abs
    if obstruction > tol:
        raise IntegrabilityObstruction(
            f"max |N| = {obstruction:.3e} exceeds tolerance {tol:.1e}; no "
            "complex coordinates exist."
        )

    base = canonical_matrix(chart.d)
    D = _delta_matrices(acs)
    _step_bound_check(float(np.max(np.abs(D))), step_bound, steps)

    z = ComplexCoordinateMap.flat(chart)
    residuals = []
    for j in tqdm(
        range(1, steps + 1), desc="continuation", disable=not progress
    ):
        if j == steps:
            A = acs.matrices()
        else:
            path = TensorField.from_pointwise(
                chart, base + (j / steps) * D, "lu"
            )
            A = project_structure(path).pointwise()
        square = float(np.max(np.abs(A @ A + np.eye(chart.dim))))
        if square > DEFAULTS.validation:
            raise PathValidationFailed(
                f"intermediate structure at s = {j}/{steps} has "
                f"max |I^2 + 1| = {square:.3e}"
            )
        R = _operator_residual(z, A)
        rhs = [
            [
                ScalarField(
                    chart,
                    -(R[..., n, 2 * m] + 1j * R[..., n, 2 * m + 1])
                    / (2 * SQRT2),
                )
                for m in range(chart.d)
            ]
            for n in range(chart.d)
        ]
        d_linear, corrections = _solve_rows(chart, rhs)
        z = z._shifted(d_linear, corrections)
        residuals.append(float(np.max(np.abs(_operator_residual(z, A)))))

    return ComplexCoordinateMap(
        chart=chart,
        linear=z.linear,
        delta=z.delta,
        steps=steps,
        step_residuals=tuple(residuals),
    )


def coordinate_residual(
    z: ComplexCoordinateMap, acs: AlmostComplexStructure
) -> float:
    """max over n, M and the grid of |d_M z^n - i I_M^N d_N z^n|."""
    _type_defence(z, "z", ComplexCoordinateMap)
    _type_defence(acs, "acs", AlmostComplexStructure)
    if z.chart != acs.chart:
        raise ValueError("`z` and `acs` live on different charts.")
    return float(np.max(np.abs(_operator_residual(z, acs.matrices()))))


def _complex_jacobian(z: ComplexCoordinateMap) -> np.ndarray:
    P = z.jacobian()
    Jc = np.concatenate([P, np.conj(P)], axis=-2)
    if np.min(np.abs(np.linalg.det(Jc))) <= DEFAULTS.degenerate:
        raise SingularJacobian(
            "Jacobian of (z, zbar) with respect to x is singular."
        )
    return Jc


def complex_frame_residual(
    z: ComplexCoordinateMap, acs: AlmostComplexStructure
) -> float:
    """Deviation of I in the (z, zbar) frame from diag(-i, ..., +i, ...).

    Raises
    ------
    SingularJacobian
        The map is degenerate somewhere.

    """
    _type_defence(z, "z", ComplexCoordinateMap)
    _type_defence(acs, "acs", AlmostComplexStructure)
    d = z.chart.d
    A_u = structure_in_coordinates(z, acs)
    target = np.diag(np.concatenate([-1j * np.ones(d), 1j * np.ones(d)]))
    return float(np.max(np.abs(A_u - target)))


def hermitian_metric_report(
    z: ComplexCoordinateMap, g: TensorField
) -> HermitianMetricReport:
    """Metric components in the complex frame of `z`.

    Raises
    ------
    SingularJacobian
        The map is degenerate somewhere.

    """
    _type_defence(z, "z", ComplexCoordinateMap)
    _type_defence(g, "g", TensorField)
    if g.signature != "ll":
        raise ValueError(f"`g` expected signature 'll'. Got '{g.signature}'")
    d = z.chart.d
    Jc = _complex_jacobian(z)
    Jc_t = np.swapaxes(Jc, -1, -2)
    G = g.pointwise()
    upper = Jc @ np.linalg.inv(G) @ Jc_t
    lower = np.linalg.inv(Jc_t) @ G @ np.linalg.inv(Jc)
    h = lower[..., :d, d:]
    return HermitianMetricReport(
        h=h,
        max_holomorphic=float(np.max(np.abs(upper[..., :d, :d]))),
        max_antiholomorphic=float(np.max(np.abs(upper[..., d:, d:]))),
        hermiticity_residual=float(
            np.max(np.abs(np.conj(h) - np.swapaxes(h, -1, -2)))
        ),
    )


def structure_in_coordinates(
    z: ComplexCoordinateMap, acs: AlmostComplexStructure
) -> np.ndarray:
    """I transformed to the (z, zbar) frame, chart.shape + (D, D)."""
    Jc_t = np.swapaxes(_complex_jacobian(z), -1, -2)
    return np.linalg.inv(Jc_t) @ acs.matrices() @ Jc_t


def exact_pullback_coordinates(
    chart: GridChart, exact_delta: Sequence[ScalarField]
) -> ComplexCoordinateMap:
    """Exact map z_(0)(x + s v(x)) from the corrections of a pullback."""
    return ComplexCoordinateMap(
        chart=chart,
        linear=flat_linear_part(chart.d),
        delta=tuple(exact_delta),
    )


def resolve_optional_metric(
    acs: AlmostComplexStructure, z: ComplexCoordinateMap
) -> Optional[HermitianMetricReport]:
    """Hermitian report when the structure carries a metric."""
    if acs.g is None:
        return None
    return hermitian_metric_report(z, acs.g)
