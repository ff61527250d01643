"""Declarative field specifications.

A spec is a JSON document describing a chart and a structure source::

    {
        "d": 2, "n": 16, "length": 6.283185307179586,
        "structure": {
            "kind": "pullback",
            "scale": 0.1,
            "modes": {"1": [{"k": [0, 0, 1, 0], "cos": 0.0, "sin": 0.5}]}
        }
    }

Structure kinds:

* ``canonical``: the flat structure I_0 with the Euclidean metric.
* ``pullback``: I_0 and the Euclidean metric pulled back by
  x -> x + scale * v(x). ``modes`` maps 1-based components P of v to lists of
  Fourier modes.
* ``perturbation``: I_0 + Delta, with ``modes`` keyed ``"M,N"`` for
  Delta_M^N. ``projected`` (default true) projects the sum onto I^2 = -1.
* ``explicit``: a `.nnf` container at ``path`` (relative to the spec file),
  optionally with a metric at ``metric_path``.

A mode ``{"k": [k_1, ..., k_D], "cos": a, "sin": b}`` contributes
a cos(2 pi k.x / L) + b sin(2 pi k.x / L).
"""
import hashlib
import json
import os
import pathlib
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Union

import numpy as np

from complex_charts.almost_complex import (
    canonical_matrix,
    flat_metric,
    flat_structure,
    project_structure,
    pullback_structure,
)
from complex_charts.chart import GridChart, ScalarField, TensorField, make_grid
from complex_charts.errors import SpecParseError
from complex_charts.utils.defence import _handle_path_like
from complex_charts.utils.io import read_field

KINDS = ("canonical", "pullback", "perturbation", "explicit")


@dataclass(frozen=True)
class FieldSpec:
    """Parsed field specification.

    Attributes
    ----------
    d, n, length
        Chart parameters.
    kind : str
        One of "canonical", "pullback", "perturbation", "explicit".
    scale : float
        Pullback amplitude.
    modes : dict
        Fourier modes keyed by component ("P" or "M,N").
    projected : bool
        Whether a perturbation is projected onto I^2 = -1.
    path, metric_path : pathlib.Path or None
        Containers for the explicit kind.
    raw : dict
        The parsed document, used for the digest.

    """

    d: int
    n: int
    length: float
    kind: str
    scale: float = 0.0
    modes: Dict[str, list] = field(default_factory=dict)
    projected: bool = True
    path: Optional[pathlib.Path] = None
    metric_path: Optional[pathlib.Path] = None
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def chart(self) -> GridChart:
        """Chart described by the spec."""
        return make_grid(self.d, self.n, self.length)

    @property
    def digest(self) -> str:
        """sha256 of the canonical JSON form of the document."""
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf8")).hexdigest()


class BuiltStructure(NamedTuple):
    """Fields produced from a spec.

    `exact_delta` holds the known exact coordinate corrections of a pullback
    and is None otherwise.
    """

    I: TensorField  # noqa: E741
    g: Optional[TensorField]
    exact_delta: Optional[List[ScalarField]]


def _require(doc: dict, key: str, types, where: str):
    if key not in doc:
        raise SpecParseError(f"{where} is missing the `{key}` key.")
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, types):
        raise SpecParseError(
            f"`{key}` in {where} expected {types}. Got {type(value)}"
        )
    return value


def _check_modes(modes, dim: int, n: int, keyed_pairs: bool) -> dict:
    if not isinstance(modes, dict):
        raise SpecParseError(f"`modes` expected {dict}. Got {type(modes)}")
    for key, items in modes.items():
        parts = key.split(",")
        if len(parts) != (2 if keyed_pairs else 1):
            raise SpecParseError(f"mode key '{key}' has the wrong form.")
        try:
            indices = [int(p) for p in parts]
        except ValueError:
            raise SpecParseError(f"mode key '{key}' is not an index.")
        if any(i < 1 or i > dim for i in indices):
            raise SpecParseError(f"mode key '{key}' is outside 1..{dim}.")
        if not isinstance(items, list):
            raise SpecParseError(f"modes for '{key}' expected a list.")
        for item in items:
            if not isinstance(item, dict):
                raise SpecParseError(f"mode for '{key}' expected a mapping.")
            k = _require(item, "k", list, f"mode '{key}'")
            if len(k) != dim or not all(
                isinstance(i, int) and not isinstance(i, bool) for i in k
            ):
                raise SpecParseError(
                    f"wave vector {k} expected {dim} integers."
                )
            if max(abs(i) for i in k) >= n // 2:
                raise SpecParseError(
                    f"wave vector {k} reaches the Nyquist limit of n={n}."
                )
            if max(abs(i) for i in k) > n // 4:
                warnings.warn(
                    UserWarning(
                        f"wave vector {k} is poorly resolved at n={n}; "
                        "derivatives may lose accuracy."
                    )
                )
            for coeff in ("cos", "sin"):
                value = item.get(coeff, 0.0)
                if isinstance(value, bool) or not isinstance(
                    value, (int, float)
                ):
                    raise SpecParseError(
                        f"`{coeff}` of mode '{key}' expected a number."
                    )
    return modes


def parse_spec(
    doc: Union[str, dict],
    base_dir: Optional[Union[str, pathlib.Path]] = None,
) -> FieldSpec:
    """Parse a spec from JSON text or an already loaded mapping.

    Parameters
    ----------
    doc : str or dict
        The document.
    base_dir : str or pathlib.Path, optional
        Directory that relative container paths are resolved against. The
        current directory when None.

    Returns
    -------
    FieldSpec
        The validated spec.

    Raises
    ------
    SpecParseError
        The document is not valid JSON or violates the schema.

    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as err:
            raise SpecParseError(f"spec is not valid JSON: {err}")
    if not isinstance(doc, dict):
        raise SpecParseError(f"spec expected a JSON object. Got {type(doc)}")

    d = _require(doc, "d", int, "spec")
    n = _require(doc, "n", int, "spec")
    length = 2 * np.pi
    if "length" in doc:
        length = float(_require(doc, "length", (int, float), "spec"))
    try:
        chart = make_grid(d, n, length)
    except (TypeError, ValueError) as err:
        raise SpecParseError(f"invalid chart: {err}")

    structure = _require(doc, "structure", dict, "spec")
    kind = _require(structure, "kind", str, "structure")
    if kind not in KINDS:
        raise SpecParseError(
            f"structure kind expected one of {KINDS}. Got '{kind}'"
        )

    base = pathlib.Path(base_dir) if base_dir is not None else pathlib.Path()
    spec = dict(d=d, n=n, length=length, kind=kind, raw=doc)
    if kind == "pullback":
        spec["scale"] = float(
            _require(structure, "scale", (int, float), "structure")
        )
        spec["modes"] = _check_modes(
            _require(structure, "modes", dict, "structure"),
            chart.dim,
            n,
            keyed_pairs=False,
        )
    elif kind == "perturbation":
        spec["modes"] = _check_modes(
            _require(structure, "modes", dict, "structure"),
            chart.dim,
            n,
            keyed_pairs=True,
        )
        projected = structure.get("projected", True)
        if not isinstance(projected, bool):
            raise SpecParseError("`projected` expected a boolean.")
        spec["projected"] = projected
    elif kind == "explicit":
        spec["path"] = base / _require(structure, "path", str, "structure")
        if "metric_path" in structure:
            spec["metric_path"] = base / _require(
                structure, "metric_path", str, "structure"
            )
    return FieldSpec(**spec)


def load_spec(path: Union[str, pathlib.Path]) -> FieldSpec:
    """Read and parse a spec file.

    Raises
    ------
    SpecParseError
        The file is missing, unreadable or invalid.

    """
    path = _handle_path_like(path, "path")
    if not os.path.exists(path):
        raise SpecParseError(f"spec file {path} not found.")
    with open(path, "r", encoding="utf8") as f:
        text = f.read()
    return parse_spec(text, base_dir=path.parent)


def sample_modes(chart: GridChart, modes: list) -> np.ndarray:
    """Real field sum of a cos(2 pi k.x / L) + b sin(2 pi k.x / L)."""
    x = chart.coordinates()
    out = np.zeros(chart.shape)
    for mode in modes:
        phase = sum(k * xi for k, xi in zip(mode["k"], x))
        phase = phase * (2 * np.pi / chart.length)
        out += mode.get("cos", 0.0) * np.cos(phase)
        out += mode.get("sin", 0.0) * np.sin(phase)
    return out


def _explicit_field(path: pathlib.Path, signature: str) -> TensorField:
    try:
        loaded = read_field(path)
    except (FileNotFoundError, ValueError) as err:
        raise SpecParseError(f"cannot read {path}: {err}")
    if not isinstance(loaded, TensorField) or loaded.signature != signature:
        raise SpecParseError(
            f"{path} expected a tensor field with signature '{signature}'."
        )
    return loaded


def build_structure(spec: FieldSpec) -> BuiltStructure:
    """Build the structure (and metric, when known) a spec describes."""
    chart = spec.chart
    if spec.kind == "canonical":
        return BuiltStructure(flat_structure(chart), flat_metric(chart), None)

    if spec.kind == "pullback":
        v = np.zeros((chart.dim,) + chart.shape)
        for key, modes in spec.modes.items():
            v[int(key) - 1] = sample_modes(chart, modes)
        pulled = pullback_structure(chart, v, spec.scale)
        return BuiltStructure(pulled.I, pulled.g, pulled.exact_delta)

    if spec.kind == "perturbation":
        A = np.broadcast_to(
            canonical_matrix(chart.d), chart.shape + (chart.dim,) * 2
        ).copy()
        for key, modes in spec.modes.items():
            M, N = (int(p) for p in key.split(","))
            A[..., M - 1, N - 1] += sample_modes(chart, modes)
        I = TensorField.from_pointwise(chart, A, "lu")  # noqa: E741
        if spec.projected:
            I = project_structure(I)  # noqa: E741
        return BuiltStructure(I, None, None)

    I = _explicit_field(spec.path, "lu")  # noqa: E741
    if I.chart != chart:
        raise SpecParseError(f"{spec.path} does not match the spec chart.")
    g = None
    if spec.metric_path is not None:
        g = _explicit_field(spec.metric_path, "ll")
        if g.chart != chart:
            raise SpecParseError(
                f"{spec.metric_path} does not match the spec chart."
            )
    return BuiltStructure(I, g, None)
