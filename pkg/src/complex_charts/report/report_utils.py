"""Utils to assemble and render run reports."""
import json
import os
import pathlib
import time
from typing import Optional, Union

import numpy as np
import pandas as pd

from complex_charts.utils.defence import (
    _check_item_in_iter,
    _check_parent_dir_exists,
    _handle_path_like,
    _type_defence,
)

REPORT_FORMATS = ("text", "json-lines")
RESIDUAL_COLUMNS = ["name", "value", "tolerance", "passed"]
# validation failure
RESIDUAL_EXIT_CODE = 3


class RunReport:
    """Outcome of one command.

    Attributes
    ----------
    command : str
        Command name, e.g. "check".
    digest : str
        Digest of the inputs (spec sha256 or the symbolic run parameters).
    residuals : pd.DataFrame
        One row per residual with columns name, value, tolerance, passed.
    notes : dict
        Extra key/value information (verdicts, artifact paths, expressions).
    exit_code : int
        0 on success, otherwise the code of the failure.

    Methods
    -------
    add_residual(name, value, tolerance, exit_code)
        Record a residual against a tolerance, failing the run when it is
        exceeded.
    fail(exit_code, message)
        Mark the run as failed.
    to_text()
        Human readable rendering.
    to_json_lines()
        One JSON object per line, residuals first then a summary.

    """

    def __init__(self, command: str, digest: str = "") -> None:
        _type_defence(command, "command", str)
        _type_defence(digest, "digest", str)
        self.command = command
        self.digest = digest
        self.residuals = pd.DataFrame(columns=RESIDUAL_COLUMNS)
        self.notes = {}
        self.exit_code = 0
        self._start = time.perf_counter()
        self.elapsed = 0.0
        return None

    def add_residual(
        self,
        name: str,
        value: float,
        tolerance: Optional[float] = None,
        exit_code: int = RESIDUAL_EXIT_CODE,
    ) -> bool:
        """Record a residual; returns whether it is within `tolerance`.

        A residual without tolerance is informational and always passes. A
        residual above its tolerance fails the run with `exit_code`.
        """
        _type_defence(name, "name", str)
        _type_defence(value, "value", (int, float, np.floating))
        _type_defence(tolerance, "tolerance", (int, float, type(None)))
        _type_defence(exit_code, "exit_code", int)
        passed = tolerance is None or float(value) <= tolerance
        if not passed:
            self.fail(
                exit_code,
                f"{name} = {float(value):.3e} exceeds tolerance "
                f"{float(tolerance):.1e}",
            )
        row = pd.DataFrame(
            [[name, float(value), tolerance, bool(passed)]],
            columns=RESIDUAL_COLUMNS,
        )
        self.residuals = (
            row
            if self.residuals.empty
            else pd.concat([self.residuals, row], ignore_index=True)
        )
        return passed

    def note(self, key: str, value) -> None:
        """Attach extra information."""
        _type_defence(key, "key", str)
        self.notes[key] = value
        return None

    def fail(self, exit_code: int, message: str) -> None:
        """Mark the run failed with `exit_code` (first failure wins)."""
        _type_defence(exit_code, "exit_code", int)
        if self.exit_code == 0:
            self.exit_code = exit_code
        self.notes.setdefault("error", message)
        return None

    @property
    def passed(self) -> bool:
        """True when no failure was recorded and every residual passed."""
        return self.exit_code == 0 and bool(self.residuals["passed"].all())

    def finish(self) -> "RunReport":
        """Stop the clock."""
        self.elapsed = time.perf_counter() - self._start
        return self

    def summary(self) -> dict:
        """Stable key set describing the run."""
        return {
            "command": self.command,
            "digest": self.digest,
            "passed": self.passed,
            "exit_code": self.exit_code,
            "notes": {k: self.notes[k] for k in sorted(self.notes)},
            "elapsed": round(self.elapsed, 6),
        }

    def to_text(self) -> str:
        """Render as plain text."""
        lines = [
            f"command: {self.command}",
            f"digest: {self.digest}",
            f"verdict: {'PASS' if self.passed else 'FAIL'}",
        ]
        if not self.residuals.empty:
            lines.append(self.residuals.to_string(index=False))
        for key in sorted(self.notes):
            lines.append(f"{key}: {self.notes[key]}")
        lines.append(f"elapsed: {self.elapsed:.3f}s")
        return "\n".join(lines)

    def to_json_lines(self) -> str:
        """Render residual rows then the summary, one JSON object per line."""
        lines = [
            json.dumps(
                {
                    "name": row["name"],
                    "value": row["value"],
                    "tolerance": row["tolerance"],
                    "passed": bool(row["passed"]),
                },
                sort_keys=True,
            )
            for row in self.residuals.to_dict("records")
        ]
        lines.append(json.dumps(self.summary(), sort_keys=True, default=str))
        return "\n".join(lines)

    def render(self, fmt: str = "text") -> str:
        """Render in one of REPORT_FORMATS."""
        _check_item_in_iter(fmt, REPORT_FORMATS, "fmt")
        return self.to_text() if fmt == "text" else self.to_json_lines()


def write_report(
    report: RunReport,
    path: Union[str, pathlib.Path],
    fmt: str = "text",
    overwrite: bool = False,
) -> pathlib.Path:
    """Write a rendered report to `path`.

    Raises
    ------
    FileExistsError
        A report already exists at `path` and overwrite=False.

    """
    _type_defence(report, "report", RunReport)
    _type_defence(overwrite, "overwrite", bool)
    path = _handle_path_like(path, "path")
    _check_parent_dir_exists(path, "path", create=True)
    if os.path.exists(path) and not overwrite:
        raise FileExistsError(
            "Report already exists at path: "
            f"[{path}]."
            "Consider setting overwrite=True "
            "if you'd like to overwrite this."
        )
    with open(path, "w", encoding="utf8") as f:
        f.write(report.render(fmt) + "\n")
    return path
