"""Tests for cli.py."""
import json
import os
import pathlib
import time

import pytest

from complex_charts.almost_complex import flat_metric, flat_structure
from complex_charts.chart import TensorField, make_grid
from complex_charts.cli import cmd_check, cmd_construct, cmd_susy, main
from complex_charts.specs import parse_spec
from complex_charts.utils.io import read_field, write_field

CANONICAL = {"d": 1, "n": 8, "structure": {"kind": "canonical"}}


def _pullback(scale):
    return {
        "d": 1,
        "n": 8,
        "structure": {
            "kind": "pullback",
            "scale": scale,
            "modes": {
                "1": [{"k": [0, 1], "cos": 0.0, "sin": 1.0}],
                "2": [{"k": [1, 0], "cos": 0.5, "sin": 0.0}],
            },
        },
    }


@pytest.fixture
def spec_file(tmp_path):
    """Write a spec document to a temporary file and return its path."""

    def _write(doc, name="spec.json"):
        path = tmp_path / name
        path.write_text(json.dumps(doc), encoding="utf8")
        return str(path)

    return _write


def _check_json(path):
    return main(["--report", "json-lines", "check", "--spec", path])


def _summary(capsys):
    """Parse the final json-lines record printed by `main`."""
    lines = capsys.readouterr().out.strip().splitlines()
    return json.loads(lines[-1]), [json.loads(line) for line in lines[:-1]]


class TestCheck(object):
    """Tests for the check command."""

    def test_check_canonical(self, spec_file, capsys):
        """Test the flat structure is integrable."""
        code = _check_json(spec_file(CANONICAL))
        summary, rows = _summary(capsys)
        assert code == 0
        assert summary["passed"] is True
        assert summary["notes"]["verdict"] == "integrable"
        assert [r["name"] for r in rows] == [
            "square",
            "antisymmetry",
            "nijenhuis",
        ]

    def test_check_obstruction(self, spec_file, twisted_2d, tmp_path, capsys):
        """Test a non-integrable container exits with code 2."""
        write_field(twisted_2d, tmp_path / "twisted.nnf")
        doc = {
            "d": 2,
            "n": 8,
            "structure": {"kind": "explicit", "path": "twisted.nnf"},
        }
        code = _check_json(spec_file(doc))
        summary, _ = _summary(capsys)
        assert code == 2
        assert summary["notes"]["verdict"] == "non-integrable"
        assert "max |N|" in summary["notes"]["error"]

    def test_check_validation_failure(self, spec_file, capsys):
        """Test an unprojected perturbation exits with code 3."""
        doc = {
            "d": 1,
            "n": 8,
            "structure": {
                "kind": "perturbation",
                "projected": False,
                "modes": {"1,2": [{"k": [1, 0], "cos": 0.01}]},
            },
        }
        code = _check_json(spec_file(doc))
        summary, _ = _summary(capsys)
        assert code == 3
        assert summary["command"] == "check"
        assert summary["notes"]["error"].startswith("SquareResidualExceeded")

    def test_check_spec_errors(self, spec_file, tmp_path, capsys):
        """Test missing or malformed specs exit with code 4."""
        assert main(["check", "--spec", str(tmp_path / "absent.json")]) == 4
        bad = spec_file({"d": 1, "n": 6, "structure": {"kind": "canonical"}})
        assert main(["check", "--spec", bad]) == 4
        assert "verdict: FAIL" in capsys.readouterr().out

    def test_check_explicit_mismatch(self, spec_file, tmp_path, capsys):
        """Test chart mismatches and complex I map to their exit codes."""
        chart = make_grid(1, 8)
        write_field(flat_structure(chart), tmp_path / "I.nnf")
        write_field(flat_metric(make_grid(1, 16)), tmp_path / "g16.nnf")
        doc = {
            "d": 1,
            "n": 8,
            "structure": {
                "kind": "explicit",
                "path": "I.nnf",
                "metric_path": "g16.nnf",
            },
        }
        assert _check_json(spec_file(doc)) == 4
        summary, _ = _summary(capsys)
        assert "g16.nnf does not match the spec chart" in (
            summary["notes"]["error"]
        )

        rotated = flat_structure(chart).components * (1 + 1j) / 2**0.5
        write_field(TensorField(chart, "lu", rotated), tmp_path / "Ic.nnf")
        doc["structure"] = {"kind": "explicit", "path": "Ic.nnf"}
        assert _check_json(spec_file(doc, "complex.json")) == 3
        summary, _ = _summary(capsys)
        assert summary["notes"]["error"].startswith("InvalidStructure")

    def test_cmd_check_digest(self):
        """Test the report carries the spec digest."""
        spec = parse_spec(CANONICAL)
        report = cmd_check(spec)
        assert report.digest == spec.digest
        assert report.passed


class TestConstruct(object):
    """Tests for the construct command."""

    def test_construct_pullback(self, spec_file, tmp_path, capsys):
        """Test coordinates are built, reported and stored."""
        out = str(tmp_path / "out" / "z.nnf")
        code = main(
            [
                "--report",
                "json-lines",
                "construct",
                "--spec",
                spec_file(_pullback(0.05)),
                "--steps",
                "8",
                "--out",
                out,
            ]
        )
        summary, rows = _summary(capsys)
        assert code == 0
        names = [r["name"] for r in rows]
        assert names[:8] == [f"step_{j}" for j in range(1, 9)]
        assert "exact_coordinate_residual" in names
        assert "metric_hermiticity" in names
        assert summary["notes"]["artifact"] == out
        stored = read_field(out)
        assert isinstance(stored, list) and len(stored) == 1

    def test_construct_writes_artifact(self, spec_file, mocker, capsys):
        """Test the artifact is handed to the field writer."""
        patch_writer = mocker.patch(
            "complex_charts.cli.write_field",
            return_value=pathlib.Path("z.nnf"),
        )
        code = main(
            [
                "construct",
                "--spec",
                spec_file(CANONICAL),
                "--steps",
                "2",
                "--out",
                "z.nnf",
            ]
        )
        assert code == 0
        patch_writer.assert_called_once()
        fields, path = patch_writer.call_args.args
        assert path == "z.nnf"
        assert len(fields) == 1
        assert "artifact: z.nnf" in capsys.readouterr().out

    def test_cmd_construct_canonical(self):
        """Test the flat structure needs no correction and writes nothing."""
        spec = parse_spec(CANONICAL)
        report = cmd_construct(spec, steps=2)
        assert report.passed
        assert report.digest == spec.digest
        names = list(report.residuals["name"])
        assert names[:2] == ["step_1", "step_2"]
        assert "coordinate_residual" in names
        assert "artifact" not in report.notes

    def test_construct_step_too_large(self, spec_file, tmp_path, capsys):
        """Test a single step on a large deformation exits with code 3."""
        report_path = tmp_path / "report.jsonl"
        code = main(
            [
                "--report",
                "json-lines",
                "--report-path",
                str(report_path),
                "construct",
                "--spec",
                spec_file(_pullback(0.2)),
                "--steps",
                "1",
            ]
        )
        summary, _ = _summary(capsys)
        assert code == 3
        assert summary["notes"]["suggested_steps"] >= 2
        assert "StepTooLarge" in summary["notes"]["error"]
        assert os.path.exists(report_path)
        with open(report_path, "r") as f:
            written = json.loads(f.read().strip().splitlines()[-1])
        assert written["exit_code"] == 3


class TestSusy(object):
    """Tests for the susy command."""

    def test_susy_closes(self, capsys):
        """Test the integrable frame closes in D = 2."""
        code = main(
            [
                "--report",
                "json-lines",
                "susy",
                "--dim",
                "2",
                "--relations",
                "square,integrability",
            ]
        )
        summary, rows = _summary(capsys)
        assert code == 0
        assert summary["notes"]["relations"] == "integrability,square"
        assert [r["value"] for r in rows] == [0.0, 0.0]

    def test_susy_generic_fails(self, capsys):
        """Test a generic structure leaves a nonzero symbolic residual."""
        assert main(["susy", "--dim", "2"]) == 5
        out = capsys.readouterr().out
        assert "verdict: FAIL" in out
        assert "error: " in out

    @pytest.mark.parametrize(
        "target",
        ["eq-intr-equivalence", "calD", "delta-commute", "engine-identities"],
    )
    def test_susy_targets(self, target):
        """Test every identity target passes with the square relation."""
        report = cmd_susy(2, ["square"], target)
        assert report.passed
        assert report.notes["target"] == target

    def test_susy_relation_errors(self, capsys):
        """Test relation misuse maps to the symbolic and spec exit codes."""
        assert main(["susy", "--relations", "integrability"]) == 5
        assert "hint: add 'square' to --relations" in capsys.readouterr().out
        assert main(["susy", "--relations", "bogus"]) == 4
        assert "SpecParseError" in capsys.readouterr().out

    @pytest.mark.runexpensive
    @pytest.mark.parametrize(
        "relations, passed",
        [(["square"], False), (["square", "integrability"], True)],
    )
    def test_susy_d4_commutator_time(self, relations, passed):
        """Test the D = 4 commutator check finishes within ten seconds."""
        start = time.perf_counter()
        report = cmd_susy(4, relations, "commutator")
        assert time.perf_counter() - start < 10.0
        assert report.passed is passed

    def test_susy_digest(self):
        """Test the digest depends only on the run parameters."""
        first = cmd_susy(2, ["square", "square"], "delta-commute")
        second = cmd_susy(2, ["square"], "delta-commute")
        assert first.digest == second.digest
        assert cmd_susy(2, [], "delta-commute").digest != first.digest
