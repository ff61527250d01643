"""Minimal-norm spectral solver for d f / d zbar^n = omega_n on the torus.

A periodic (0,1)-form has a periodic primitive only when every component
has zero mean, so nonzero zero modes are rejected. Closed forms are solved
exactly; other forms receive the least-squares solution and keep a nonzero
equation residual measuring the obstruction.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from complex_charts.chart import (
    GridChart,
    ScalarField,
    from_fourier,
    to_fourier,
    wirtinger,
)
from complex_charts.errors import NonzeroMeanRHS
from complex_charts.utils.constants import DEFAULTS
from complex_charts.utils.defence import (
    _check_iterable,
    _check_positive_real,
    _type_defence,
)


@dataclass(frozen=True)
class AntiholomorphicForm:
    """The (0,1)-form omega = sum_n omega_n dzbar_(0)^n.

    Parameters
    ----------
    components : Sequence[ScalarField]
        omega_1 ... omega_d on a common chart.

    Raises
    ------
    ValueError
        Component count differs from the chart's complex dimension, or the
        components live on different charts.

    """

    components: Tuple[ScalarField, ...]

    def __post_init__(self):
        comps = tuple(self.components)
        _check_iterable(
            comps, "components", tuple, exp_type=ScalarField
        )
        if not comps:
            raise ValueError("`components` is empty.")
        chart = comps[0].chart
        if any(c.chart != chart for c in comps):
            raise ValueError("`components` live on different charts.")
        if len(comps) != chart.d:
            raise ValueError(
                f"`components` expected {chart.d} fields. Got {len(comps)}"
            )
        object.__setattr__(self, "components", comps)

    @property
    def chart(self) -> GridChart:
        """Common chart of the components."""
        return self.components[0].chart

    @classmethod
    def from_arrays(
        cls, chart: GridChart, arrays: Sequence[np.ndarray]
    ) -> "AntiholomorphicForm":
        """Wrap raw grid arrays as a form."""
        return cls(tuple(ScalarField(chart, a) for a in arrays))


@dataclass(frozen=True)
class DbarSolution:
    """Output of `solve`.

    Attributes
    ----------
    f : ScalarField
        Zero-mean minimal-norm solution.
    equation_residuals : tuple of float
        max |dbar_n f - omega_n| for each n.
    closedness_residual : float
        `closedness_residual` of the input form.
    zero_modes : tuple of complex
        Mean of each input component.

    """

    f: ScalarField
    equation_residuals: Tuple[float, ...]
    closedness_residual: float
    zero_modes: Tuple[complex, ...]

    @property
    def max_residual(self) -> float:
        """Largest equation residual."""
        return max(self.equation_residuals)


def closedness_residual(omega: AntiholomorphicForm) -> float:
    """max over n < m of |dbar_n omega_m - dbar_m omega_n|.

    Returns 0 for d = 1, where there is nothing to check.
    """
    _type_defence(omega, "omega", AntiholomorphicForm)
    d = omega.chart.d
    worst = 0.0
    for n in range(1, d + 1):
        for m in range(n + 1, d + 1):
            diff = wirtinger(omega.components[m - 1], n, True) - wirtinger(
                omega.components[n - 1], m, True
            )
            worst = max(worst, diff.max_abs())
    return worst


def solve(
    omega: AntiholomorphicForm, zero_mode_tol: float = DEFAULTS.zero_mode
) -> DbarSolution:
    """Minimal-norm solution of d f / d zbar^n = omega_n for all n.

    In Fourier space f(k) = sum_n conj(s_n(k)) omega_n(k) / sum_n |s_n(k)|^2
    where s_n is the symbol of d/dzbar^n, and f(k) = 0 wherever the
    denominator vanishes (in particular at k = 0).

    Parameters
    ----------
    omega : AntiholomorphicForm
        Right-hand side.
    zero_mode_tol : float, optional
        Largest tolerated |mean(omega_n)|, by default 1e-10.

    Returns
    -------
    DbarSolution
        Solution with residual diagnostics.

    Raises
    ------
    NonzeroMeanRHS
        Some component has a zero mode above `zero_mode_tol`.

    """
    _type_defence(omega, "omega", AntiholomorphicForm)
    _check_positive_real(zero_mode_tol, "zero_mode_tol")
    chart = omega.chart
    zero_modes = tuple(c.mean() for c in omega.components)
    for n, mode in enumerate(zero_modes, start=1):
        if abs(mode) > zero_mode_tol:
            raise NonzeroMeanRHS(
                f"component {n} has zero mode {mode:.3e}; no periodic "
                "primitive exists."
            )

    numerator = np.zeros(chart.shape, dtype=complex)
    denominator = np.zeros(chart.shape)
    for n, comp in enumerate(omega.components, start=1):
        sym = chart.dbar_symbol(n)
        numerator += np.conj(sym) * to_fourier(comp.values, chart)
        denominator += np.abs(sym) ** 2
    f_hat = np.zeros_like(numerator)
    nonzero = denominator > 0
    f_hat[nonzero] = numerator[nonzero] / denominator[nonzero]
    f = ScalarField(chart, from_fourier(f_hat, chart))

    residuals = tuple(
        (wirtinger(f, n, True) - comp).max_abs()
        for n, comp in enumerate(omega.components, start=1)
    )
    return DbarSolution(
        f=f,
        equation_residuals=residuals,
        closedness_residual=closedness_residual(omega),
        zero_modes=zero_modes,
    )
