"""Command line front end: ``complex-charts {check,construct,susy}``.

Exit codes: 0 pass, 2 integrability obstruction, 3 validation failure,
4 spec error, 5 nonzero symbolic residual.
"""
import argparse
import hashlib
import json
import sys
from typing import Dict, Iterable, Optional, Sequence

from complex_charts import grassmann, susy
from complex_charts.almost_complex import nijenhuis, validate
from complex_charts.coordinates import (
    complex_frame_residual,
    construct_coordinates,
    coordinate_residual,
    exact_pullback_coordinates,
    resolve_optional_metric,
)
from complex_charts.errors import (
    ComplexChartsError,
    IntegrabilityObstruction,
    SpecParseError,
    SquareRelationMissing,
    StepTooLarge,
)
from complex_charts.report.report_utils import (
    REPORT_FORMATS,
    RunReport,
    write_report,
)
from complex_charts.specs import FieldSpec, build_structure, load_spec
from complex_charts.utils.constants import DEFAULTS
from complex_charts.utils.io import write_field

SYMBOLIC_EXIT = 5
TARGETS = (
    "commutator",
    "eq-intr-equivalence",
    "calD",
    "delta-commute",
    "engine-identities",
)
DIMENSIONS = (2, 4, 6)


def cmd_check(
    spec: FieldSpec, tol: float = DEFAULTS.integrability
) -> RunReport:
    """Validate the structure of `spec` and evaluate its Nijenhuis tensor."""
    report = RunReport("check", spec.digest)
    built = build_structure(spec)
    acs = validate(built.I, built.g)
    report.add_residual("square", acs.square_residual, DEFAULTS.validation)
    if acs.antisymmetry_residual is not None:
        report.add_residual(
            "antisymmetry", acs.antisymmetry_residual, DEFAULTS.validation
        )
    obstruction = nijenhuis(acs).max_abs
    if obstruction > tol:
        report.fail(
            IntegrabilityObstruction.exit_code,
            f"max |N| = {obstruction:.3e} exceeds tolerance {tol:.1e}",
        )
    integrable = report.add_residual(
        "nijenhuis", obstruction, tol, IntegrabilityObstruction.exit_code
    )
    report.note("verdict", "integrable" if integrable else "non-integrable")
    return report.finish()


def cmd_construct(
    spec: FieldSpec,
    steps: int = DEFAULTS.steps,
    tol: float = DEFAULTS.integrability,
    out: Optional[str] = None,
    progress: bool = False,
) -> RunReport:
    """Construct complex coordinates for `spec` and optionally save them.

    The artifact is a stack of the d coordinate fields z^n sampled on the
    grid, written only when the construction succeeds.
    """
    report = RunReport("construct", spec.digest)
    built = build_structure(spec)
    acs = validate(built.I, built.g)
    z = construct_coordinates(acs, steps=steps, tol=tol, progress=progress)
    for j, res in enumerate(z.step_residuals, start=1):
        report.add_residual(f"step_{j}", res)
    report.add_residual("coordinate_residual", coordinate_residual(z, acs))
    report.add_residual(
        "complex_frame_residual", complex_frame_residual(z, acs)
    )
    metric = resolve_optional_metric(acs, z)
    if metric is not None:
        report.add_residual("metric_holomorphic", metric.max_holomorphic)
        report.add_residual(
            "metric_antiholomorphic", metric.max_antiholomorphic
        )
        report.add_residual("metric_hermiticity", metric.hermiticity_residual)
    if built.exact_delta is not None:
        exact = exact_pullback_coordinates(acs.chart, built.exact_delta)
        report.add_residual(
            "exact_coordinate_residual", coordinate_residual(exact, acs)
        )
    if out is not None:
        fields = [z.values(n) for n in range(1, acs.chart.d + 1)]
        path = write_field(fields, out)
        report.note("artifact", str(path))
    return report.finish()


def _count_terms(exprs: Iterable[grassmann.GrassmannExpr]) -> int:
    return sum(len(e.terms) for e in exprs)


def _first_nonzero(named: Dict[object, grassmann.GrassmannExpr]) -> str:
    for key, e in named.items():
        if not e.is_zero():
            return f"{key}: {e.to_text()}"
    return ""


def _symbolic_residual(
    report: RunReport, name: str, named: Dict[object, grassmann.GrassmannExpr]
) -> None:
    terms = _count_terms(named.values())
    if terms:
        report.fail(SYMBOLIC_EXIT, _first_nonzero(named))
    report.add_residual(name, terms, 0, SYMBOLIC_EXIT)


def _difference(left: dict, right: dict) -> dict:
    return {k: left[k] - right[k] for k in left}


def cmd_susy(
    dim: int, relations: Sequence[str] = (), target: str = "commutator"
) -> RunReport:
    """Run one exact symbolic check.

    The check passes only when its residual is identically zero.
    """
    relations = sorted(set(relations))
    digest = hashlib.sha256(
        json.dumps(
            {"dim": dim, "relations": relations, "target": target},
            sort_keys=True,
        ).encode("utf8")
    ).hexdigest()
    report = RunReport("susy", digest)
    report.note("target", target)
    report.note("relations", ",".join(relations) or "none")
    if target == "engine-identities":
        _symbolic_residual(
            report, "engine_identities", grassmann.engine_identities()
        )
        return report.finish()

    fs = susy.FormalStructure(dim, frozenset(relations))
    if target == "commutator":
        result = susy.commutator(fs)
        _symbolic_residual(report, "decomposition", result.residual)
        _symbolic_residual(report, "closure", result.obstruction)
    elif target == "eq-intr-equivalence":
        _symbolic_residual(
            report, "eq_intr_to_nijenhuis", susy.eq_intr_to_nijenhuis(fs)
        )
    elif target == "calD":
        if "square" in fs.relations:
            named = _difference(
                susy.cal_d_commutator(fs), susy.cal_d_nijenhuis_form(fs)
            )
        else:
            named = _difference(
                susy.cal_d_commutator(fs, dz_rule=False),
                susy.cal_d_intermediate(fs),
            )
        _symbolic_residual(report, "cal_d", named)
    else:
        _symbolic_residual(
            report, "delta_commute", susy.delta_tilde_commute_check(fs)
        )
    return report.finish()


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="complex-charts",
        description=(
            "Check integrability of almost complex structures, construct "
            "complex coordinates and verify the supersymmetric criterion."
        ),
    )
    parser.add_argument(
        "--report",
        choices=REPORT_FORMATS,
        default="text",
        help="Output format.",
    )
    parser.add_argument(
        "--report-path", default=None, help="Also write the report here."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", help="Validate and evaluate Nijenhuis.")
    check.add_argument("--spec", required=True)
    check.add_argument("--tol", type=float, default=DEFAULTS.integrability)

    construct = sub.add_parser("construct", help="Build complex coordinates.")
    construct.add_argument("--spec", required=True)
    construct.add_argument("--steps", type=int, default=DEFAULTS.steps)
    construct.add_argument("--tol", type=float, default=DEFAULTS.integrability)
    construct.add_argument("--out", default=None)

    symbolic = sub.add_parser("susy", help="Exact superspace checks.")
    symbolic.add_argument("--dim", type=int, choices=DIMENSIONS, default=2)
    symbolic.add_argument(
        "--relations",
        default="",
        help="Comma separated subset of {square,integrability}.",
    )
    symbolic.add_argument("--target", choices=TARGETS, default="commutator")
    return parser


def _relations(text: str):
    relations = [r.strip() for r in text.split(",") if r.strip()]
    unknown = sorted(set(relations) - set(susy.RELATIONS))
    if unknown:
        raise SpecParseError(
            f"`--relations` expected a subset of {susy.RELATIONS}. "
            f"Got {unknown}"
        )
    return relations


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns the process exit code."""
    args = _parser().parse_args(argv)
    command = args.command
    try:
        if command == "susy":
            relations = _relations(args.relations)
            report = cmd_susy(args.dim, relations, args.target)
        else:
            spec = load_spec(args.spec)
            if command == "check":
                report = cmd_check(spec, args.tol)
            else:
                report = cmd_construct(spec, args.steps, args.tol, args.out)
    except ComplexChartsError as err:
        report = RunReport(command)
        if isinstance(err, StepTooLarge) and err.suggested_steps:
            report.note("suggested_steps", err.suggested_steps)
        if isinstance(err, SquareRelationMissing):
            report.note("hint", "add 'square' to --relations")
        report.fail(err.exit_code, f"{type(err).__name__}: {err}")
        report.finish()

    print(report.render(args.report))
    if args.report_path is not None:
        write_report(report, args.report_path, args.report, overwrite=True)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
