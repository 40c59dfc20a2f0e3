"""Command-line front end.

Subcommands::

    closed-form  --spec FILE
    simulate     --spec FILE [--replications R] [--n N] [--seed S]
    sensitivity  (--data CSV --roles ROLES | --spec FILE [--expose-u]) [--kinds ...]
    analyze      --data CSV --roles ROLES [--kinds ...]
    contour      --spec FILE [--step H] [--strength-range LO,HI] [--violation-range LO,HI]

Every subcommand accepts ``--config FILE`` (a JSON object whose keys are the
long flag names with dashes or underscores) and ``--out DIR``. Flags given on
the command line override the config file. Without ``--out`` the JSON report
goes to stdout.

Exit status: 0 success, 2 infeasible or degenerate input, 3 I/O, parse or
schema error, 4 numerical degeneracy in the sensitivity factors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from collections.abc import Sequence
from pathlib import Path

from . import montecarlo, plots, sensitivity
from .data import Dataset, Roles, atomic_write_text, ingest_csv
from .errors import (
    CausalTradeoffError,
    CollinearError,
    DataError,
    DegenerateDenominatorError,
    EmptyGridError,
    InfeasibleError,
    NotDerivedError,
    ResampleLimitError,
    WeakDenominatorError,
    ZeroVarianceError,
)
from .regression import WEAK_F, first_stage_f, standardize
from .scenarios import Kind, ScenarioSpec, closed_form, feasible_error_variances, generate, true_inconsistency_ratio

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_ANALYSIS_KINDS = (Kind.EXCLUSION, Kind.INDEPENDENCE, Kind.HETEROGENEITY)


class UsageError(CausalTradeoffError):
    """Bad or missing command-line options."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# JSON helpers


def _clean(obj):
    """Replace non-finite floats with None so the output is strict JSON."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def _read_json(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise DataError(f"{path}: expected a JSON object")
    return doc


# ---------------------------------------------------------------------------
# option handling


def _floats(text: str) -> list[float]:
    try:
        return [float(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill options left unset on the command line from ``--config``."""
    if not args.config:
        return args
    doc = _read_json(args.config)
    for raw_key, value in doc.items():
        key = raw_key.replace("-", "_")
        if not hasattr(args, key) or key in ("command", "config"):
            raise UsageError(f"{args.config}: unknown option {raw_key!r} for {args.command}")
        if getattr(args, key) in (None, False):
            if isinstance(value, list):
                value = ",".join(str(v) for v in value)
            setattr(args, key, value)
    return args


def _load_spec(args) -> tuple[ScenarioSpec, dict]:
    if not args.spec:
        raise UsageError("--spec is required")
    doc = _read_json(args.spec)
    return ScenarioSpec.from_dict(doc["spec"] if "spec" in doc else doc), doc


def _kinds(text: str | None, default: Sequence[Kind]) -> list[Kind]:
    if not text:
        return list(default)
    return [Kind.parse(k.strip()) for k in str(text).split(",") if k.strip()]


def _emit(args, report: dict, summary: str, plot_files: dict[str, str] | None = None) -> None:
    if args.out:
        out = Path(args.out)
        atomic_write_text(out / "report.json", dumps(report))
        atomic_write_text(out / "summary.txt", summary)
        for name, text in (plot_files or {}).items():
            atomic_write_text(out / "plots" / name, text)
        print(summary, end="")
    else:
        sys.stdout.write(dumps(report))


# ---------------------------------------------------------------------------
# commands


def cmd_closed_form(args) -> int:
    spec, _ = _load_spec(args)
    cf = closed_form(spec)
    try:
        ratio = true_inconsistency_ratio(spec)
    except (NotDerivedError, ZeroDivisionError):
        ratio = None
    report = {
        "scenario": spec.to_dict(),
        "error_variances": feasible_error_variances(spec),
        "closed_form": cf.to_dict(),
        "true_ir": ratio,
    }
    fmt = lambda v: "n/a" if v is None else f"{v:.4f}"  # noqa: E731
    summary = (
        f"{spec.kind.value} ({'with' if spec.with_covariates else 'without'} covariates)\n"
        f"lambda2 (OLS without Z) {fmt(cf.lambda2)}\n"
        f"lambda3 (OLS with Z)    {fmt(cf.lambda3)}\n"
        f"lambda4 (2SLS with Z)   {fmt(cf.lambda4)}\n"
        f"true IR                 {fmt(ratio if ratio is None or math.isfinite(ratio) else None)}\n"
    )
    _emit(args, report, summary)
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec, doc = _load_spec(args)
    plan_doc = dict(doc) if "spec" in doc else {"spec": doc}
    if args.replications is not None:
        plan_doc["replications"] = int(args.replications)
    if args.n is not None:
        plan_doc["n_per_rep"] = int(args.n)
    if args.seed is not None:
        plan_doc["seed"] = int(args.seed)
    plan = montecarlo.ExperimentPlan.from_dict(plan_doc)
    summary = montecarlo.run(plan, args.threads)
    text = montecarlo.format_table(summary) + f"runtime {summary.runtime_seconds:.2f} s\n"
    _emit(args, summary.to_dict(), text)
    return EXIT_OK


def _diagnostics(data: Dataset) -> dict:
    x = standardize(data.x)
    z = standardize(data.z)
    exog = [standardize(w) for w in data.covariates]
    f = first_stage_f(x, [z], exog)
    return {"n": data.n, "covariates": list(data.roles.covariates), "first_stage_f": f, "weak_instrument": f < WEAK_F}


def _dataset_from_args(args) -> tuple[Dataset, ScenarioSpec | None]:
    if args.data:
        if not args.roles:
            raise UsageError("--roles is required with --data")
        roles = Roles.parse(args.roles)
        if args.expose_u and roles.confounder is None:
            raise UsageError("--expose-u needs a u=COLUMN role")
        return ingest_csv(args.data, roles), None
    if not args.spec:
        raise UsageError("give --data with --roles, or --spec")
    spec, _ = _load_spec(args)
    n = args.n if args.n is not None else spec.n
    seed = args.seed if args.seed is not None else spec.seed
    if n is None or seed is None:
        raise UsageError("generated data needs n and seed (in the spec or via --n/--seed)")
    return generate(spec, int(n), int(seed)).to_dataset(expose_u=bool(args.expose_u)), spec


def _summary_lines(rep: sensitivity.SensitivityReport) -> list[str]:
    versus = "OLS without Z" if rep.kind is Kind.HETEROGENEITY else "OLS with Z"
    head = rep.kind.value + (f" [{rep.sign_case}]" if rep.sign_case else "")
    out = [f"{head}: IR = |2SLS inconsistency| / |{versus} inconsistency|"]
    out += [f"  {line}" for line in rep.legend]
    g = rep.gamma_implied
    out.append(
        f"  gamma benchmark {rep.decomposition.gamma_total:.3f}; gamma implied "
        + ("n/a" if g is None else f"{g:.3f}")
    )
    if rep.true_ir is not None and math.isfinite(rep.true_ir):
        out.append(f"  True IR = {rep.true_ir:.3f}")
    at_one = dict(zip(rep.multipliers, rep.ir_per_multiplier)).get(1.0)
    if at_one is not None:
        better = "2SLS with Z" if at_one < 1 else versus
        out.append(f"  at M = 1 the less inconsistent estimator is expected to be {better}")
    for note in rep.decomposition.notes:
        out.append(f"  note: {note}")
    return out


def cmd_sensitivity(args) -> int:
    data, spec = _dataset_from_args(args)
    if not data.roles.covariates and not args.expose_u:
        raise UsageError("benchmarking needs at least one covariate column (w=...)")
    kinds = _kinds(args.kinds, [spec.kind] if spec is not None and spec.kind in _ANALYSIS_KINDS else _ANALYSIS_KINDS)
    mults = _floats(args.multipliers) if args.multipliers else list(sensitivity.DEFAULT_MULTIPLIERS)
    true_ir = None
    if spec is not None:
        try:
            true_ir = true_inconsistency_ratio(spec)
        except CausalTradeoffError:
            true_ir = None
    reports, files, lines = [], {}, []
    for kind in kinds:
        ratio = true_ir if spec is not None and kind is spec.kind else None
        for rep in sensitivity.analyze(data, kind, mults, oracle=bool(args.expose_u), true_ir=ratio):
            stem = f"sensitivity_{kind.value}" + (f"_{rep.sign_case}" if rep.sign_case else "")
            files[stem + ".svg"] = plots.sensitivity_svg(rep)
            files[stem + ".json"] = dumps(plots.sensitivity_plot_data(rep))
            reports.append(rep.to_dict())
            lines += _summary_lines(rep)
    report = {
        "input": args.data if args.data else {"scenario": spec.to_dict()},
        "roles": data.roles.format(),
        "oracle": bool(args.expose_u),
        "diagnostics": _diagnostics(data),
        "reports": reports,
    }
    diag = report["diagnostics"]
    header = f"n = {diag['n']}; first-stage F = {diag['first_stage_f']:.3f}" + (
        " (weak instrument)" if diag["weak_instrument"] else ""
    )
    _emit(args, report, "\n".join([header, *lines]) + "\n", files)
    return EXIT_OK


def cmd_analyze(args) -> int:
    if not args.data:
        raise UsageError("analyze reads a CSV file: --data is required")
    return cmd_sensitivity(args)


def cmd_contour(args) -> int:
    spec, _ = _load_spec(args)
    step = float(args.step) if args.step is not None else 0.05
    s_range = _floats(args.strength_range) if args.strength_range else [0.0, 0.95]
    v_range = _floats(args.violation_range) if args.violation_range else [0.0, 0.95]
    for r in (s_range, v_range):
        if len(r) != 2 or r[1] < r[0]:
            raise UsageError("ranges are LO,HI with LO <= HI")
    axis = lambda r: [round(r[0] + step * k, 10) for k in range(int(round((r[1] - r[0]) / step)) + 1)]  # noqa: E731
    grid = plots.contour_grid(spec, axis(s_range), axis(v_range), step)
    data = plots.contour_plot_data(grid)
    counts = [int((grid.winner == k).sum()) for k in range(3)]
    lines = [f"{spec.kind.value}: {grid.strength_key} x {grid.violation_key}, {int(grid.feasible.sum())} feasible cells"]
    lines += [f"  {label}: {c} cells" for label, c in zip(plots.ESTIMATOR_LABELS, counts)]
    stem = f"contour_{spec.kind.value}"
    _emit(args, data, "\n".join(lines) + "\n", {stem + ".svg": plots.contour_svg(grid), stem + ".json": dumps(data)})
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="causal-tradeoff", description="Compare OLS and 2SLS inconsistency under IV violations.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON file of option values; command-line flags take precedence")
        p.add_argument("--out", help="output directory (report.json, summary.txt, plots/)")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("closed-form", help="probability limits and inconsistencies of the three estimators")
    common(p)
    p.add_argument("--spec", help="scenario JSON file")
    p.set_defaults(func=cmd_closed_form)

    p = sub.add_parser("simulate", help="Monte Carlo check of the closed forms")
    common(p)
    p.add_argument("--spec", help="scenario or experiment-plan JSON file")
    p.add_argument("--replications", type=int)
    p.add_argument("--n", type=int, help="observations per replication")
    p.add_argument("--threads", type=int, help="worker threads (default: CAUSAL_TRADEOFF_THREADS or CPU count)")
    p.set_defaults(func=cmd_simulate)

    for name, func, text in (
        ("sensitivity", cmd_sensitivity, "partial-R2 sensitivity analysis on a CSV or generated data"),
        ("analyze", cmd_analyze, "sensitivity analysis of a CSV file"),
    ):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--data", help="CSV file with a header row")
        p.add_argument("--roles", help="y=COL,x=COL,z=COL,w=COL1+COL2[,u=COL]")
        p.add_argument("--spec", help="scenario JSON to generate data from instead of --data")
        p.add_argument("--n", type=int, help="sample size for generated data")
        p.add_argument("--kinds", help="comma-separated subset of er,independence,heterogeneity")
        p.add_argument("--multipliers", help="comma-separated confounding multipliers (default 0.5,1,1.5)")
        p.add_argument("--expose-u", action="store_true", help="use the confounder column directly (test mode)")
        p.set_defaults(func=func)

    p = sub.add_parser("contour", help="winner surface over instrument strength and violation")
    common(p)
    p.add_argument("--spec", help="scenario JSON holding the fixed weights")
    p.add_argument("--step", type=float)
    p.add_argument("--strength-range", help="LO,HI (default 0,0.95)")
    p.add_argument("--violation-range", help="LO,HI (default 0,0.95)")
    p.set_defaults(func=cmd_contour)
    return parser


def _fail(code: int, message: str) -> int:
    print(f"causal-tradeoff: {message}", file=sys.stderr)
    return code


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(_merge_config(args))
    except DegenerateDenominatorError as exc:
        factor = f" (factor: {exc.factor})" if exc.factor else ""
        return _fail(EXIT_NUMERIC, f"degenerate denominator{factor}: {exc}")
    except (CollinearError, ResampleLimitError) as exc:
        return _fail(EXIT_NUMERIC, f"numerical failure: {exc}")
    except InfeasibleError as exc:
        constraint = f" [{exc.constraint}]" if exc.constraint else ""
        return _fail(EXIT_INPUT, f"infeasible scenario{constraint}: {exc}")
    except (ZeroVarianceError, WeakDenominatorError, EmptyGridError, NotDerivedError) as exc:
        return _fail(EXIT_INPUT, f"{type(exc).__name__}: {exc}")
    except (DataError, UsageError, OSError) as exc:
        return _fail(EXIT_IO, str(exc))
    except (ValueError, KeyError) as exc:
        return _fail(EXIT_IO, f"invalid input: {exc}")


if __name__ == "__main__":
    raise SystemExit(main())
