"""Almost complex structures: validation, frames & the Nijenhuis tensor.

Index conventions
-----------------
A rank (1,1) field I_M^N is stored with signature "lu" and its pointwise
matrix is A[M, N] = I_M^N. The flat structure I_0 is block diagonal with
blocks eps = [[0, -1], [1, 0]], so z_(0) = (x^1 + i x^2) / sqrt(2) solves
d_M z - i I_M^N d_N z = 0.

Antisymmetrization [MN] is the plain difference X_MN - X_NM.
"""
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np
from scipy.linalg import null_space

from complex_charts.chart import GridChart, ScalarField, TensorField, gradient
from complex_charts.errors import (
    AntisymmetryResidualExceeded,
    DegenerateInput,
    InvalidStructure,
    MetricNotSPD,
    PathValidationFailed,
    SingularJacobian,
    SquareResidualExceeded,
)
from complex_charts.utils.constants import DEFAULTS
from complex_charts.utils.defence import (
    _check_int_in_range,
    _check_iter_length,
    _check_positive_real,
    _type_defence,
)

EPS = np.array([[0.0, -1.0], [1.0, 0.0]])


def canonical_matrix(d: int) -> np.ndarray:
    """Block diagonal matrix diag(eps, ..., eps) of size 2d."""
    _check_int_in_range(d, "d", 1)
    return np.kron(np.eye(d), EPS)


def constant_field(
    chart: GridChart, matrix: np.ndarray, signature: str = "lu"
) -> TensorField:
    """Rank 2 field with the same matrix at every grid point."""
    matrix = np.asarray(matrix)
    _check_iter_length(matrix, "matrix", chart.dim)
    mats = np.broadcast_to(matrix, chart.shape + matrix.shape)
    return TensorField.from_pointwise(chart, np.array(mats), signature)


def flat_structure(chart: GridChart) -> TensorField:
    """The canonical structure I_0 = diag(eps, ..., eps) on `chart`."""
    _type_defence(chart, "chart", GridChart)
    return constant_field(chart, canonical_matrix(chart.d))


def flat_metric(chart: GridChart) -> TensorField:
    """Euclidean metric on `chart`."""
    _type_defence(chart, "chart", GridChart)
    return constant_field(chart, np.eye(chart.dim), "ll")


@dataclass(frozen=True)
class AlmostComplexStructure:
    """A validated almost complex structure.

    Attributes
    ----------
    I : TensorField
        The structure, signature "lu".
    g : TensorField or None
        Optional compatible metric, signature "ll".
    square_residual : float
        max |I^2 + 1| over the grid.
    antisymmetry_residual : float or None
        max |I_MN + I_NM| when a metric is present.

    """

    I: TensorField  # noqa: E741
    g: Optional[TensorField] = None
    square_residual: float = 0.0
    antisymmetry_residual: Optional[float] = None

    @property
    def chart(self) -> GridChart:
        """Chart shared by I and g."""
        return self.I.chart

    def matrices(self) -> np.ndarray:
        """Pointwise matrices A[.., M, N] = I_M^N."""
        return self.I.pointwise()


def _real_components(field: TensorField, param_nm: str, tol: float):
    comps = field.components
    if np.iscomplexobj(comps):
        if np.max(np.abs(comps.imag)) > tol:
            raise InvalidStructure(
                f"`{param_nm}` must be a real tensor field."
            )
        comps = comps.real
    return comps


def validate(
    I: TensorField,  # noqa: E741
    g: Optional[TensorField] = None,
    tol: float = DEFAULTS.validation,
) -> AlmostComplexStructure:
    """Check the defining conditions of an almost complex structure.

    Parameters
    ----------
    I : TensorField
        Candidate structure with signature "lu".
    g : TensorField, optional
        Metric with signature "ll". When given it must be symmetric positive
        definite and make I_MN = g_NP I_M^P antisymmetric.
    tol : float, optional
        Absolute tolerance on every residual, by default 1e-8.

    Returns
    -------
    AlmostComplexStructure
        The structure with its residual report.

    Raises
    ------
    InvalidStructure
        `I` or `g` has the wrong signature, they live on different charts,
        or `I` carries imaginary parts above `tol`.
    SquareResidualExceeded
        max |I^2 + 1| > tol.
    MetricNotSPD
        `g` is not symmetric or not positive definite somewhere.
    AntisymmetryResidualExceeded
        I_MN fails to be antisymmetric.

    """
    _type_defence(I, "I", TensorField)
    _check_positive_real(tol, "tol")
    if I.signature != "lu":
        raise InvalidStructure(
            f"`I` expected signature 'lu'. Got '{I.signature}'"
        )
    I = TensorField(I.chart, "lu", _real_components(I, "I", tol))  # noqa: E741
    A = I.pointwise()
    eye = np.eye(I.chart.dim)
    square = float(np.max(np.abs(A @ A + eye)))
    if square > tol:
        raise SquareResidualExceeded(
            f"max |I^2 + 1| = {square:.3e} exceeds tolerance {tol:.1e}"
        )

    antisym = None
    if g is not None:
        _type_defence(g, "g", TensorField)
        if g.signature != "ll":
            raise InvalidStructure(
                f"`g` expected signature 'll'. Got '{g.signature}'"
            )
        if g.chart != I.chart:
            raise InvalidStructure("`g` and `I` live on different charts.")
        g = TensorField(g.chart, "ll", _real_components(g, "g", tol))
        G = g.pointwise()
        asym = float(np.max(np.abs(G - np.swapaxes(G, -1, -2))))
        if asym > tol:
            raise MetricNotSPD(f"metric is not symmetric: residual {asym:.3e}")
        lowest = float(np.min(np.linalg.eigvalsh(G)))
        if lowest <= DEFAULTS.degenerate:
            raise MetricNotSPD(
                f"metric is not positive definite: smallest eigenvalue "
                f"{lowest:.3e}"
            )
        # I_MN = g_NP I_M^P
        lowered = A @ G
        antisym = float(
            np.max(np.abs(lowered + np.swapaxes(lowered, -1, -2)))
        )
        if antisym > tol:
            raise AntisymmetryResidualExceeded(
                f"max |I_MN + I_NM| = {antisym:.3e} exceeds tolerance "
                f"{tol:.1e}"
            )

    return AlmostComplexStructure(
        I=I, g=g, square_residual=square, antisymmetry_residual=antisym
    )


def canonical_frame(
    I_pt: np.ndarray,
    g_pt: np.ndarray,
    tol: float = DEFAULTS.validation,
) -> np.ndarray:
    """Orthonormal frame bringing I to diag(eps, ..., eps) at one point.

    Columns e_1, e_2, ... are built pairwise. e_(2k-1) is the first standard
    basis vector whose g-projection onto the orthogonal complement of the
    frame so far has norm above 1e-8, normalized. Its partner is
    e_(2k) = -A^T e_(2k-1), where A[M, N] = I_M^N.

    Parameters
    ----------
    I_pt : np.ndarray
        D x D matrix I_M^N.
    g_pt : np.ndarray
        D x D symmetric positive definite metric.
    tol : float, optional
        Tolerance on the input conditions and on the output frame.

    Returns
    -------
    np.ndarray
        Frame e with e^T g e = 1 and e^T A e^(-T) = diag(eps, ..., eps).

    Raises
    ------
    DegenerateInput
        `g_pt` is nearly singular, the input violates the structure
        conditions, or no complement vector can be found.

    """
    A = np.asarray(I_pt, dtype=float)
    G = np.asarray(g_pt, dtype=float)
    dim = A.shape[0]
    if A.shape != (dim, dim) or G.shape != (dim, dim) or dim % 2:
        raise ValueError(
            "`I_pt` and `g_pt` expected matching square matrices of even "
            f"size. Got {A.shape} and {G.shape}"
        )
    if np.min(np.linalg.eigvalsh((G + G.T) / 2)) <= DEFAULTS.degenerate:
        raise DegenerateInput("metric is nearly singular.")
    if np.max(np.abs(A @ A + np.eye(dim))) > tol:
        raise DegenerateInput("I^2 = -1 fails at this point.")
    if np.max(np.abs(A @ G + (A @ G).T)) > tol:
        raise DegenerateInput("I_MN is not antisymmetric at this point.")

    frame = np.zeros((dim, dim))
    basis = np.eye(dim)
    candidate = 0
    for pair in range(dim // 2):
        while True:
            if candidate >= dim:
                raise DegenerateInput(
                    "no basis vector leaves a nonzero complement."
                )
            v = basis[:, candidate]
            candidate += 1
            done = frame[:, : 2 * pair]
            v = v - done @ (done.T @ G @ v)
            norm = np.sqrt(max(float(v @ G @ v), 0.0))
            if norm >= 1e-8:
                break
        e1 = v / norm
        frame[:, 2 * pair] = e1
        frame[:, 2 * pair + 1] = -A.T @ e1

    ortho = np.max(np.abs(frame.T @ G @ frame - np.eye(dim)))
    projected = frame.T @ A @ np.linalg.inv(frame).T
    canon = np.max(np.abs(projected - canonical_matrix(dim // 2)))
    if ortho > tol or canon > tol:
        raise DegenerateInput(
            "complement is not I-invariant: frame residuals "
            f"{ortho:.3e} / {canon:.3e}"
        )
    return frame


@dataclass(frozen=True)
class Vielbein:
    """Pointwise canonical frames, shape chart.shape + (D, D)."""

    chart: GridChart
    frames: np.ndarray

    def orthonormality_residual(self, g: TensorField) -> float:
        """max |e^T g e - 1| over the grid."""
        e = self.frames
        gram = np.swapaxes(e, -1, -2) @ g.pointwise() @ e
        return float(np.max(np.abs(gram - np.eye(self.chart.dim))))


def vielbein(acs: AlmostComplexStructure) -> Vielbein:
    """Canonical frame at every grid point of a structure with a metric."""
    _type_defence(acs, "acs", AlmostComplexStructure)
    if acs.g is None:
        raise ValueError("`acs` needs a metric to build a vielbein.")
    A = acs.matrices()
    G = acs.g.pointwise()
    frames = np.empty_like(A)
    for idx in np.ndindex(acs.chart.shape):
        frames[idx] = canonical_frame(A[idx], G[idx])
    return Vielbein(chart=acs.chart, frames=frames)


@dataclass(frozen=True)
class NijenhuisField:
    """Nijenhuis tensor N_MN^K, antisymmetric in its lower pair."""

    tensor: TensorField

    @property
    def max_abs(self) -> float:
        """Max norm over components and grid."""
        return self.tensor.max_abs()


def _antisymmetrize(comps: np.ndarray) -> np.ndarray:
    return 0.5 * (comps - np.swapaxes(comps, 0, 1))


def _curl(d_field: np.ndarray) -> np.ndarray:
    """d_[M X_N]^K from derivatives stacked as d_field[P, N, K]."""
    return d_field - np.swapaxes(d_field, 0, 1)


def nijenhuis_components(comps: np.ndarray, chart: GridChart) -> np.ndarray:
    """Raw Nijenhuis components of I_N^K given as comps[N, K, *grid].

    No validation is applied, so this also evaluates structures that only
    approximately square to -1.
    """
    curl = _curl(gradient(comps, chart))
    out = curl - np.einsum("mp...,nq...,pqk...->mnk...", comps, comps, curl)
    return _antisymmetrize(out)


def nijenhuis(acs: AlmostComplexStructure) -> NijenhuisField:
    """Evaluate N_MN^K = d_[M I_N]^K - I_M^P I_N^Q d_[P I_Q]^K.

    Derivatives are spectral. The stored tensor is antisymmetrized in M, N.

    Parameters
    ----------
    acs : AlmostComplexStructure
        A validated structure.

    Returns
    -------
    NijenhuisField
        The tensor with signature "llu".

    """
    _type_defence(acs, "acs", AlmostComplexStructure)
    comps = nijenhuis_components(acs.I.components, acs.chart)
    return NijenhuisField(TensorField(acs.chart, "llu", comps))


def conventional_nijenhuis(
    nf: NijenhuisField, acs: AlmostComplexStructure
) -> NijenhuisField:
    """Contract with I into the common convention: I_M^P N_PN^K."""
    _type_defence(nf, "nf", NijenhuisField)
    _type_defence(acs, "acs", AlmostComplexStructure)
    comps = np.einsum(
        "mp...,pnk...->mnk...", acs.I.components, nf.tensor.components
    )
    return NijenhuisField(
        TensorField(acs.chart, "llu", _antisymmetrize(comps))
    )


def _as_matrix_field(delta: TensorField, param_nm: str) -> np.ndarray:
    _type_defence(delta, param_nm, TensorField)
    if delta.signature != "lu":
        raise ValueError(
            f"`{param_nm}` expected signature 'lu'. Got '{delta.signature}'"
        )
    return delta.pointwise()


def _base_matrix(chart: GridChart, I0: Optional[np.ndarray]) -> np.ndarray:
    if I0 is None:
        return canonical_matrix(chart.d)
    I0 = np.asarray(I0)
    if I0.shape != (chart.dim, chart.dim):
        raise ValueError(
            f"`I0` expected shape {(chart.dim, chart.dim)}. Got {I0.shape}"
        )
    return I0


def anticommutator_residual(
    delta: TensorField, I0: Optional[np.ndarray] = None
) -> float:
    """max |Delta I_0 + I_0 Delta| over the grid.

    `I0` defaults to the canonical structure of the chart.
    """
    D = _as_matrix_field(delta, "delta")
    base = _base_matrix(delta.chart, I0)
    return float(np.max(np.abs(D @ base + base @ D)))


def anticommuting_part(
    delta: TensorField, I0: Optional[np.ndarray] = None
) -> TensorField:
    """Part of a deformation anticommuting with I_0.

    Returns (Delta + I_0 Delta I_0) / 2.
    """
    D = _as_matrix_field(delta, "delta")
    base = _base_matrix(delta.chart, I0)
    return TensorField.from_pointwise(
        delta.chart, 0.5 * (D + base @ D @ base), "lu"
    )


def _linearized_components(
    d_delta: np.ndarray, base: np.ndarray
) -> np.ndarray:
    curl = _curl(d_delta)
    return curl - np.einsum("mp,nq,pqk...->mnk...", base, base, curl)


def linearized_nijenhuis_residual(
    delta: TensorField, I0: Optional[np.ndarray] = None
) -> float:
    """Max norm of the Nijenhuis tensor linearized around I_0 at Delta.

    Evaluates d_[M Delta_N]^K - I0_M^P I0_N^Q d_[P Delta_Q]^K.
    """
    _as_matrix_field(delta, "delta")
    base = _base_matrix(delta.chart, I0)
    comps = _linearized_components(
        gradient(delta.components, delta.chart), base
    )
    return float(np.max(np.abs(comps)))


def anticommuting_basis(d: int) -> np.ndarray:
    """Real basis of D x D matrices anticommuting with I_0.

    Returns an array of shape (2 d^2, D, D).
    """
    base = canonical_matrix(d)
    dim = 2 * d
    eye = np.eye(dim)
    # row-major vec: vec(X B) = (1 kron B^T) vec X, vec(B X) = (B kron 1) vec X
    op = np.kron(eye, base.T) + np.kron(base, eye)
    kernel = null_space(op)
    return kernel.T.reshape(-1, dim, dim)


def constraint_rank(
    d: int, mode: Optional[np.ndarray] = None, tol: float = 1e-9
) -> int:
    """Rank of the linearized Nijenhuis system on anticommuting deformations.

    Parameters
    ----------
    d : int
        Complex dimension.
    mode : np.ndarray, optional
        A wave vector k of length 2d. When None the rank is taken over the
        real first-jet space of Delta (every d_K Delta free), which gives
        d^2 (d - 1) real constraints. Otherwise Delta = X exp(i k.x) with X
        in the complex block mapping the +i eigenspace of I_0 to the -i one,
        that is the d^2 complex parameters Delta_nbar^m. A real field pairs
        this block with its conjugate at -k, so counting the block alone
        gives the independent complex constraints, d (d - 1) at k != 0.
    tol : float, optional
        Singular value cutoff, by default 1e-9.

    Returns
    -------
    int
        Number of independent constraints: real for jets, complex for a mode.

    Examples
    --------
    >>> constraint_rank(2)
    4
    >>> constraint_rank(2, [1, 2, -1, 3])
    2

    """
    _check_int_in_range(d, "d", 1)
    dim = 2 * d
    base = canonical_matrix(d)
    columns = []
    if mode is None:
        for X in anticommuting_basis(d):
            for k_axis in range(dim):
                d_delta = np.zeros((dim, dim, dim))
                d_delta[k_axis] = X
                columns.append(_linearized_components(d_delta, base).ravel())
    else:
        k = np.asarray(mode, dtype=float)
        _check_iter_length(k, "mode", dim)
        eye = np.eye(dim)
        plus = (eye - 1j * base) / 2
        minus = (eye + 1j * base) / 2
        for i in range(dim):
            for j in range(dim):
                X = np.outer(plus[:, i], minus[j, :])
                d_delta = 1j * k[:, None, None] * X[None, :, :]
                columns.append(_linearized_components(d_delta, base).ravel())
    return int(np.linalg.matrix_rank(np.stack(columns, axis=1), tol=tol))


def project_structure(
    I: TensorField,  # noqa: E741
    max_iter: int = 60,
    tol: float = 1e-14,
) -> TensorField:
    """Nearest structure squaring to -1: I (-I^2)^(-1/2), pointwise.

    The inverse square root comes from a coupled Newton-Schulz iteration,
    which converges when |1 + I^2| < 1 in Frobenius norm.

    Raises
    ------
    PathValidationFailed
        The iteration is not guaranteed to converge or did not converge.

    """
    A = _as_matrix_field(I, "I")
    if np.iscomplexobj(A):
        A = A.real
    eye = np.eye(I.chart.dim)
    M = -(A @ A)
    gap = float(np.max(np.linalg.norm(eye - M, axis=(-2, -1))))
    if gap >= 1.0:
        raise PathValidationFailed(
            f"structure too far from I^2 = -1 to project: |1 + I^2| = "
            f"{gap:.3e}"
        )
    Y = M.copy()
    Z = np.broadcast_to(eye, M.shape).copy()
    for _ in range(max_iter):
        T = 0.5 * (3.0 * eye - Z @ Y)
        Y = Y @ T
        Z = T @ Z
        if np.max(np.abs(Z @ Y - eye)) <= tol:
            break
    else:
        raise PathValidationFailed(
            f"projection did not converge in {max_iter} iterations."
        )
    return TensorField.from_pointwise(I.chart, A @ Z, "lu")


class Pullback(NamedTuple):
    """Flat structure pulled back by x -> x + s v(x).

    Attributes
    ----------
    I : TensorField
        Pulled back structure.
    g : TensorField
        Pulled back Euclidean metric.
    exact_delta : list of ScalarField
        Periodic parts of the exact coordinates z_(0)(x + s v(x)), i.e.
        s (v^(2n-1) + i v^(2n)) / sqrt(2).

    """

    I: TensorField  # noqa: E741
    g: TensorField
    exact_delta: list


def pullback_structure(
    chart: GridChart, displacement: np.ndarray, scale: float
) -> Pullback:
    """Pull back the flat structure and metric by a periodic diffeomorphism.

    With Jac[P, M] = d y^P / d x^M for y = x + s v(x), the pulled back fields
    are A = Jac^T I_0 Jac^(-T) and g = Jac^T Jac.

    Parameters
    ----------
    chart : GridChart
        Chart of the source coordinates x.
    displacement : np.ndarray
        Real periodic v^P sampled on the grid, shape (D,) + chart.shape.
    scale : float
        Amplitude s.

    Returns
    -------
    Pullback
        Structure, metric and the exact coordinate corrections.

    Raises
    ------
    SingularJacobian
        The map is not a local diffeomorphism at some grid point.

    """
    _type_defence(chart, "chart", GridChart)
    _type_defence(scale, "scale", (int, float))
    v = np.asarray(displacement, dtype=float)
    if v.shape != (chart.dim,) + chart.shape:
        raise ValueError(
            f"`displacement` expected shape {(chart.dim,) + chart.shape}. "
            f"Got {v.shape}"
        )
    # gradient()[M, P] = d_M v^P, so Jac[P, M] is its transpose
    jac = np.eye(chart.dim) + scale * np.moveaxis(
        gradient(v, chart), (0, 1), (-1, -2)
    )
    if np.min(np.abs(np.linalg.det(jac))) <= DEFAULTS.degenerate:
        raise SingularJacobian("diffeomorphism Jacobian is singular.")
    jac_t = np.swapaxes(jac, -1, -2)
    base = canonical_matrix(chart.d)
    A = jac_t @ base @ np.linalg.inv(jac_t)
    G = jac_t @ jac
    exact = [
        ScalarField(
            chart, scale * (v[2 * n] + 1j * v[2 * n + 1]) / np.sqrt(2.0)
        )
        for n in range(chart.d)
    ]
    return Pullback(
        I=TensorField.from_pointwise(chart, A, "lu"),
        g=TensorField.from_pointwise(chart, G, "ll"),
        exact_delta=exact,
    )


def frame_components(
    field: Union[TensorField, np.ndarray], frames: np.ndarray
) -> np.ndarray:
    """Components e^T A e^(-T) of a rank (1,1) field in pointwise frames."""
    A = field.pointwise() if isinstance(field, TensorField) else field
    e_t = np.swapaxes(frames, -1, -2)
    return e_t @ A @ np.linalg.inv(e_t)
