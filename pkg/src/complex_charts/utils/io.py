"""Helper functions to handle IO operations.

Fields are stored in the `.nnf` container: one fixed-size header record
followed by row-major little-endian complex128 samples.

Header layout (little-endian, packed, 36 bytes):

=========  ======  ==================================================
name       dtype   meaning
=========  ======  ==================================================
magic      S4      b"NNCF"
version    <u2     container version, currently 1
d          <u2     complex dimension of the chart
n          <u4     samples per axis
length     <f8     period of every axis
stack      <u2     0 for a single field, else number of stacked scalars
signature  S8      tensor slot letters ("l"/"u"), empty for scalars
pad        S6     zero padding
=========  ======  ==================================================

The payload holds D^rank * N^D values, or stack * N^D for stacked scalars.
"""

import pathlib
from typing import List, Sequence, Union

import numpy as np

from complex_charts.chart import GridChart, ScalarField, TensorField
from complex_charts.utils.constants import FIELD_MAGIC, FIELD_VERSION
from complex_charts.utils.defence import (
    _check_parent_dir_exists,
    _enforce_file_extension,
    _is_expected_filetype,
    _type_defence,
)

HEADER_DTYPE = np.dtype(
    [
        ("magic", "S4"),
        ("version", "<u2"),
        ("d", "<u2"),
        ("n", "<u4"),
        ("length", "<f8"),
        ("stack", "<u2"),
        ("signature", "S8"),
        ("pad", "S6"),
    ]
)
PAYLOAD_DTYPE = np.dtype("<c16")

FieldLike = Union[ScalarField, TensorField, Sequence[ScalarField]]


def _header(chart: GridChart, stack: int, signature: str) -> np.ndarray:
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header["magic"] = FIELD_MAGIC
    header["version"] = FIELD_VERSION
    header["d"] = chart.d
    header["n"] = chart.n
    header["length"] = chart.length
    header["stack"] = stack
    header["signature"] = signature.encode("ascii")
    return header


def write_field(
    field: FieldLike, path: Union[str, pathlib.Path]
) -> pathlib.Path:
    """Write a field to a `.nnf` container.

    Parameters
    ----------
    field : ScalarField, TensorField or sequence of ScalarField
        The field to store. A sequence is stored as a stack of scalars on a
        common chart, which is how coordinate maps are saved.
    path : Union[str, pathlib.Path]
        Destination. Missing parent directories are created. Any other
        extension is coerced to ".nnf" with a warning.

    Returns
    -------
    pathlib.Path
        The path written to.

    Raises
    ------
    TypeError
        `field` is not a supported field type.
    ValueError
        A stacked sequence is empty or mixes charts.

    """
    _check_parent_dir_exists(path, "path", create=True)
    path = _enforce_file_extension(
        path, exp_ext=".nnf", default_ext=".nnf", param_nm="path"
    )
    if isinstance(field, TensorField):
        if len(field.signature) > 8:
            raise ValueError(
                "`field` rank above 8 cannot be stored. "
                f"Got signature '{field.signature}'"
            )
        header = _header(field.chart, 0, field.signature)
        payload = field.components
    elif isinstance(field, ScalarField):
        header = _header(field.chart, 0, "")
        payload = field.values
    else:
        _type_defence(field, "field", (list, tuple))
        if len(field) == 0:
            raise ValueError("`field` sequence is empty.")
        for i, item in enumerate(field):
            _type_defence(item, f"field[{i}]", ScalarField)
            if item.chart != field[0].chart:
                raise ValueError("`field` sequence mixes charts.")
        header = _header(field[0].chart, len(field), "")
        payload = np.stack([item.values for item in field])

    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(payload, dtype=PAYLOAD_DTYPE).tobytes())
    return path


def read_field(
    path: Union[str, pathlib.Path]
) -> Union[ScalarField, TensorField, List[ScalarField]]:
    """Read a field from a `.nnf` container.

    Parameters
    ----------
    path : Union[str, pathlib.Path]
        Path of a saved container.

    Returns
    -------
    ScalarField, TensorField or list of ScalarField
        Whatever `write_field` stored. Tensor components come back real when
        their imaginary part is exactly zero.

    Raises
    ------
    FileNotFoundError
        `path` does not exist.
    ValueError
        `path` lacks the ".nnf" extension, the magic bytes or version do not
        match, or the payload size disagrees with the header.

    """
    _is_expected_filetype(path, "path", check_existing=True, exp_ext=".nnf")
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise ValueError(f"{path} is too short to hold a field header.")
    header = np.frombuffer(raw[: HEADER_DTYPE.itemsize], dtype=HEADER_DTYPE)[0]
    if header["magic"] != FIELD_MAGIC:
        raise ValueError(
            f"{path} is not a field container. Got magic {header['magic']}"
        )
    if header["version"] != FIELD_VERSION:
        raise ValueError(
            f"Unsupported container version {header['version']}. "
            f"Expected {FIELD_VERSION}"
        )

    chart = GridChart(
        d=int(header["d"]), n=int(header["n"]), length=float(header["length"])
    )
    signature = header["signature"].decode("ascii")
    stack = int(header["stack"])
    if stack:
        shape = (stack,) + chart.shape
    else:
        shape = (chart.dim,) * len(signature) + chart.shape
    payload = np.frombuffer(raw[HEADER_DTYPE.itemsize :], dtype=PAYLOAD_DTYPE)
    if payload.size != int(np.prod(shape)):
        raise ValueError(
            f"Payload holds {payload.size} values. "
            f"Header implies {int(np.prod(shape))}"
        )
    data = payload.reshape(shape).astype(complex)

    if stack:
        return [ScalarField(chart, values) for values in data]
    if not signature:
        return ScalarField(chart, data)
    if not np.any(data.imag):
        data = data.real
    return TensorField(chart, signature, data)
