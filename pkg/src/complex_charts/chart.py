"""Periodic grid charts, field storage & spectral differentiation.

A chart of real dimension D = 2d is discretized as the flat torus
[0, L)^D sampled on a uniform N^D grid. Real axes (2n-1, 2n) pair into the
complex axis n, so z_(0)^n = (x^(2n-1) + i x^(2n)) / sqrt(2).
"""
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import scipy.fft

from complex_charts.utils.constants import fft_workers
from complex_charts.utils.defence import (
    _check_finite,
    _check_int_in_range,
    _check_item_in_iter,
    _check_positive_real,
    _type_defence,
)

SQRT2 = np.sqrt(2.0)


@dataclass(frozen=True)
class GridChart:
    """Uniform periodic grid over [0, L)^(2d).

    Parameters
    ----------
    d : int
        Complex dimension, at least 1.
    n : int
        Samples per axis, a power of two no smaller than 4.
    length : float, optional
        Period of every axis, by default 2 pi.

    Raises
    ------
    TypeError
        `d` or `n` is not an integer, or `length` is not real.
    ValueError
        `d` < 1, `n` < 4, `n` is not a power of two or `length` <= 0.

    """

    d: int
    n: int
    length: float = 2 * np.pi

    def __post_init__(self):
        _check_int_in_range(self.d, "d", 1)
        _check_int_in_range(self.n, "n", 4)
        if self.n & (self.n - 1):
            raise ValueError(
                f"`n` must be a power of two for the spectral transform. "
                f"Got {self.n}"
            )
        _check_positive_real(self.length, "length")

    @property
    def dim(self) -> int:
        """Real dimension D = 2d."""
        return 2 * self.d

    @property
    def shape(self) -> Tuple[int, ...]:
        """Grid shape (N,) * D."""
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        """Number of grid points N^D."""
        return self.n**self.dim

    @property
    def spacing(self) -> float:
        """Grid step L / N."""
        return self.length / self.n

    def axis(self) -> np.ndarray:
        """Sample positions along any one axis."""
        return np.arange(self.n) * self.spacing

    def coordinates(self) -> Tuple[np.ndarray, ...]:
        """Coordinate arrays x^1 ... x^D, each of the grid shape."""
        return tuple(
            np.meshgrid(*([self.axis()] * self.dim), indexing="ij")
        )

    def wavenumbers(self, axis: int) -> np.ndarray:
        """Angular wavenumbers along a 1-based axis, broadcast over the grid.

        The Nyquist wavenumber is set to zero so odd derivatives of real data
        stay real.
        """
        _check_int_in_range(axis, "axis", 1, self.dim)
        k = scipy.fft.fftfreq(self.n, d=1.0 / self.n)
        k[self.n // 2] = 0.0
        k = k * (2 * np.pi / self.length)
        shape = [1] * self.dim
        shape[axis - 1] = self.n
        return k.reshape(shape)

    def dbar_symbol(self, n: int) -> np.ndarray:
        """Fourier symbol of d/d(zbar^n) on the grid."""
        _check_int_in_range(n, "n", 1, self.d)
        k1 = self.wavenumbers(2 * n - 1)
        k2 = self.wavenumbers(2 * n)
        return np.broadcast_to((1j * k1 - k2) / SQRT2, self.shape)

    def z0(self, n: int) -> np.ndarray:
        """Flat complex coordinate z_(0)^n sampled on the grid."""
        _check_int_in_range(n, "n", 1, self.d)
        x = self.coordinates()
        return (x[2 * n - 2] + 1j * x[2 * n - 1]) / SQRT2


def make_grid(d: int, n: int, length: float = 2 * np.pi) -> GridChart:
    """Build a uniform periodic chart of complex dimension `d`.

    Parameters
    ----------
    d : int
        Complex dimension.
    n : int
        Samples per axis (power of two, at least 4).
    length : float, optional
        Axis period, by default 2 pi.

    Returns
    -------
    GridChart
        The validated chart.

    Examples
    --------
    >>> make_grid(1, 8).size
    64

    """
    return GridChart(d=d, n=n, length=float(length))


@dataclass(frozen=True)
class ScalarField:
    """Complex samples of a scalar function on a chart."""

    chart: GridChart
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        _type_defence(self.chart, "chart", GridChart)
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.chart.shape:
            raise ValueError(
                f"`values` expected shape {self.chart.shape}. "
                f"Got {values.shape}"
            )
        _check_finite(values, "values")
        object.__setattr__(self, "values", values)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.chart, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.chart, self.values - other.values)

    def __mul__(self, scalar: complex) -> "ScalarField":
        return ScalarField(self.chart, self.values * scalar)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        """Max norm over the grid."""
        return float(np.max(np.abs(self.values)))

    def mean(self) -> complex:
        """Grid average, equal to the zero Fourier mode."""
        return complex(np.mean(self.values))

    @classmethod
    def zeros(cls, chart: GridChart) -> "ScalarField":
        """The zero field."""
        return cls(chart, np.zeros(chart.shape, dtype=complex))


@dataclass(frozen=True)
class TensorField:
    """Component arrays of a tensor field on a chart.

    Parameters
    ----------
    chart : GridChart
        The chart the field lives on.
    signature : str
        One letter per slot in written order: "l" for a lower (covariant)
        index, "u" for an upper one. I_M^N is "lu", g_MN is "ll" and
        N_MN^K is "llu".
    components : np.ndarray
        Array of shape (D,) * len(signature) + chart.shape, indexed by
        0-based component indices in written order.

    """

    chart: GridChart
    signature: str
    components: np.ndarray = field(repr=False)

    def __post_init__(self):
        _type_defence(self.chart, "chart", GridChart)
        _type_defence(self.signature, "signature", str)
        for slot in self.signature:
            _check_item_in_iter(slot, ["l", "u"], "signature")
        comps = np.asarray(self.components)
        expected = (self.chart.dim,) * len(self.signature) + self.chart.shape
        if comps.shape != expected:
            raise ValueError(
                f"`components` expected shape {expected}. Got {comps.shape}"
            )
        _check_finite(comps, "components")
        object.__setattr__(self, "components", comps)

    @property
    def upper(self) -> int:
        """Number of contravariant slots."""
        return self.signature.count("u")

    @property
    def lower(self) -> int:
        """Number of covariant slots."""
        return self.signature.count("l")

    def pointwise(self) -> np.ndarray:
        """Rank-2 components as a stack of D x D matrices over the grid.

        The returned array has shape chart.shape + (D, D); entry [.., M, N]
        is the component with slot indices (M, N).
        """
        if len(self.signature) != 2:
            raise ValueError(
                "pointwise matrices need a rank 2 field. "
                f"Got signature '{self.signature}'"
            )
        return np.moveaxis(self.components, (0, 1), (-2, -1))

    @classmethod
    def from_pointwise(
        cls, chart: GridChart, matrices: np.ndarray, signature: str
    ) -> "TensorField":
        """Build a rank 2 field from a grid-leading stack of matrices."""
        return cls(chart, signature, np.moveaxis(matrices, (-2, -1), (0, 1)))

    def max_abs(self) -> float:
        """Max norm over all components and grid points."""
        return float(np.max(np.abs(self.components)))

    def __add__(self, other: "TensorField") -> "TensorField":
        return TensorField(
            self.chart, self.signature, self.components + other.components
        )

    def __sub__(self, other: "TensorField") -> "TensorField":
        return TensorField(
            self.chart, self.signature, self.components - other.components
        )

    def __mul__(self, scalar: float) -> "TensorField":
        return TensorField(
            self.chart, self.signature, self.components * scalar
        )

    __rmul__ = __mul__


def _grid_axes(chart: GridChart) -> Tuple[int, ...]:
    return tuple(range(-chart.dim, 0))


def to_fourier(values: np.ndarray, chart: GridChart) -> np.ndarray:
    """Unitary FFT over the trailing grid axes."""
    return scipy.fft.fftn(
        values, axes=_grid_axes(chart), norm="ortho", workers=fft_workers()
    )


def from_fourier(values: np.ndarray, chart: GridChart) -> np.ndarray:
    """Inverse of `to_fourier`."""
    return scipy.fft.ifftn(
        values, axes=_grid_axes(chart), norm="ortho", workers=fft_workers()
    )


def spectral_derivative(
    values: np.ndarray, chart: GridChart, axis: int
) -> np.ndarray:
    """Derivative along a 1-based axis of an array with the grid trailing.

    Leading axes (tensor components) are carried along. Real input gives
    real output.
    """
    out = from_fourier(
        1j * chart.wavenumbers(axis) * to_fourier(values, chart), chart
    )
    if np.isrealobj(values):
        return out.real
    return out


def gradient(values: np.ndarray, chart: GridChart) -> np.ndarray:
    """All first derivatives, stacked on a new leading axis (0-based M)."""
    return np.stack(
        [
            spectral_derivative(values, chart, m)
            for m in range(1, chart.dim + 1)
        ]
    )


def partial(f: ScalarField, axis: int) -> ScalarField:
    """Spectral partial derivative d/dx^M of a scalar field.

    Parameters
    ----------
    f : ScalarField
        Field to differentiate.
    axis : int
        1-based real axis M.

    Returns
    -------
    ScalarField
        The derivative, exact for band-limited fields.

    Raises
    ------
    ValueError
        `axis` is outside 1..D.

    """
    _type_defence(f, "f", ScalarField)
    _check_int_in_range(axis, "axis", 1, f.chart.dim)
    return ScalarField(f.chart, spectral_derivative(f.values, f.chart, axis))


def wirtinger(f: ScalarField, n: int, conjugate: bool) -> ScalarField:
    """Wirtinger derivative with respect to z_(0)^n or its conjugate.

    Returns (d/dx^(2n-1) + i d/dx^(2n)) / sqrt(2) when `conjugate` is True
    and (d/dx^(2n-1) - i d/dx^(2n)) / sqrt(2) otherwise.

    Raises
    ------
    ValueError
        `n` is outside 1..d.

    """
    _type_defence(f, "f", ScalarField)
    _type_defence(conjugate, "conjugate", bool)
    _check_int_in_range(n, "n", 1, f.chart.d)
    sign = 1j if conjugate else -1j
    re_part = spectral_derivative(f.values, f.chart, 2 * n - 1)
    im_part = spectral_derivative(f.values, f.chart, 2 * n)
    return ScalarField(f.chart, (re_part + sign * im_part) / SQRT2)
