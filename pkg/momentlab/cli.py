import argparse
import csv
import io
import json
import logging
import re
import sys
from dataclasses import dataclass, field, fields

import mpmath
from mpmath import mp

from momentlab import closure, diffeq, hankel, measures, sequences
from momentlab.measures import FiniteAtomic, MeasureSpec
from momentlab.numerics import (
    MomentSequence,
    Polynomial,
    format_scalar,
    parse_scalar,
    scalar_to_json,
)
from momentlab.sequences import FamilySpec
from momentlab.utils import (
    COROLLARY_SAMPLES,
    COROLLARY_X_RANGE,
    MomentLabError,
    get_precision,
    precision_scope,
    setup_logging,
)

log = logging.getLogger(__name__)

CLOSURE_OPS = (
    "combine",
    "hausdorff",
    "average",
    "product",
    "subsample",
    "even-embed",
    "shift",
    "reflect",
    "hausdorff-mean",
    "binomial",
    "degenerate",
)

_REAL_STRING_RE = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")


@dataclass
class CommandPlan:
    subcommand: str
    precision: int
    format: str = "json"
    output: str = None
    digits: int = None
    expect_pm: bool = False
    threads: int = 1
    log_level: int = logging.INFO
    options: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)


@dataclass
class CommandOutput:
    payload: object
    csv_header: list
    csv_rows: list
    verdict: hankel.Verdict = None


def _common_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--precision", type=int, help="working precision in decimal digits")
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--output", help="write to this file instead of stdout")
    common.add_argument("--digits", type=int, help="round real numbers for display")
    common.add_argument(
        "--expect-pm", action="store_true", help="exit with 1 when the verdict is not-pm"
    )
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true")
    verbosity.add_argument("--quiet", action="store_true")
    return common


def _add_generator_arguments(parser, measure_only=False):
    if not measure_only:
        parser.add_argument("--family", choices=FamilySpec.variants())
    parser.add_argument("--measure", choices=MeasureSpec.variants())
    parser.add_argument("--spec", help='JSON descriptor {"variant": ..., "params": {...}}')
    parser.add_argument(
        "--param", action="append", default=[], metavar="KEY=VALUE", help="spec parameter"
    )


def _add_sequence_arguments(parser, generators=True):
    parser.add_argument("--input", help="sequence JSON file, '-' for stdin")
    parser.add_argument("--values", help="comma-separated values, e.g. 1,1/2,0.25")
    if generators:
        _add_generator_arguments(parser)
        parser.add_argument("--count", type=int, default=21)


def _build_parser():
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="momentlab", description="Positive moment sequences and difference equations."
    )
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    gen = subparsers.add_parser("gen", parents=[common], help="generate a sequence")
    _add_generator_arguments(gen)
    gen.add_argument("--count", type=int, default=10)

    for name, help_text in (
        ("hankel", "Hankel transform"),
        ("check-pm", "Hankel positivity verdict"),
    ):
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        _add_sequence_arguments(sub)
        sub.add_argument("--max-order", type=int)
        sub.add_argument("--tolerance", help="zero threshold for determinants")

    inequalities = subparsers.add_parser(
        "inequalities", parents=[common], help="elementary moment inequalities"
    )
    _add_sequence_arguments(inequalities)
    inequalities.add_argument("--nonneg-support", action="store_true")

    closure_parser = subparsers.add_parser(
        "closure", parents=[common], help="closure operations on sequences"
    )
    closure_parser.add_argument("op", choices=CLOSURE_OPS)
    _add_sequence_arguments(closure_parser, generators=False)
    closure_parser.add_argument("--with-input", help="second operand JSON file, '-' for stdin")
    closure_parser.add_argument("--with-values", help="second operand, comma-separated")
    closure_parser.add_argument("--alpha", default="1")
    closure_parser.add_argument("--beta", default="1")
    closure_parser.add_argument(
        "--chi", default="uniform01", help="Hausdorff measure name or JSON descriptor"
    )
    closure_parser.add_argument(
        "--param", action="append", default=[], metavar="KEY=VALUE", help="chi parameter"
    )
    closure_parser.add_argument("--k", type=int, default=2, help="subsampling step")
    closure_parser.add_argument("--mode", choices=closure.EMBED_MODES, default="zero-odd")
    closure_parser.add_argument("--s", type=int, default=2, help="shift (even)")
    closure_parser.add_argument("--normalize", action="store_true")
    closure_parser.add_argument("--tolerance", default="0")

    solve = subparsers.add_parser("solve", parents=[common], help="solve a difference equation")
    solve.add_argument("--equation", help="equation JSON text or file")
    solve.add_argument("--coeffs", help="d_0,...,d_m")
    solve.add_argument("--initial", help="r_0,...,r_(m-1)")
    solve.add_argument("--forcing-values", help="explicit forcing values")
    solve.add_argument("--forcing-family", choices=FamilySpec.variants())
    solve.add_argument("--forcing-measure", choices=MeasureSpec.variants())
    solve.add_argument(
        "--param", action="append", default=[], metavar="KEY=VALUE", help="forcing parameter"
    )
    solve.add_argument("--count", type=int, default=10)

    for name, help_text in (
        ("divided", "moments of dA/P by forward recurrence"),
        ("sweep", "initial-condition sensitivity sweep"),
    ):
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        _add_generator_arguments(sub, measure_only=True)
        sub.add_argument("--poly", required=True, help="ascending coefficients, '1,0,1' = x^2+1")
        sub.add_argument("--count", type=int, default=12)
        sub.add_argument("--max-order", type=int)
    subparsers.choices["sweep"].add_argument("--index", type=int, default=0)
    subparsers.choices["sweep"].add_argument("--delta", action="append", default=[])

    corollary = subparsers.add_parser(
        "corollary", parents=[common], help="nonnegativity of exponential partial sums"
    )
    _add_sequence_arguments(corollary)
    corollary.add_argument("--n", type=int, default=2)
    corollary.add_argument("--range", default=",".join(str(x) for x in COROLLARY_X_RANGE))
    corollary.add_argument("--samples", type=int, default=COROLLARY_SAMPLES)

    return parser


def _read_text(source):
    if source == "-":
        return sys.stdin.read()
    with open(source) as f:
        return f.read()


def _parse_values(text):
    return MomentSequence(tuple(parse_scalar(item) for item in text.split(",") if item.strip()))


def _load_sequence(source):
    data = json.loads(_read_text(source))
    if isinstance(data, dict) and "sequence" in data:
        data = data["sequence"]
    return MomentSequence.from_json(data)


def _parse_params(cls, items):
    types = {f.name: f.type for f in fields(cls)}
    params = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"Parameter '{item}' is not of the form key=value")
        if key not in types:
            raise ValueError(f"'{cls.variant}' has no parameter '{key}', expected {sorted(types)}")

        if key == "atoms":
            params[key] = FiniteAtomic.parse_atoms(value).atoms
        elif types[key] is str:
            params[key] = value
        elif types[key] is int:
            params[key] = int(value)
        else:
            params[key] = parse_scalar(value)
    return params


def _build_spec(root, name, params):
    cls = root.variant_class(name)
    return cls(**_parse_params(cls, params))


def _load_spec_json(text):
    data = json.loads(text)
    name = data.get("variant") if isinstance(data, dict) else None
    if name in FamilySpec.variants():
        return FamilySpec.from_json(data)
    return MeasureSpec.from_json(data)


def _generator_spec(args):
    chosen = [x for x in (getattr(args, "family", None), args.measure, args.spec) if x]
    if len(chosen) > 1:
        raise ValueError("Use only one of --family, --measure and --spec")
    if getattr(args, "family", None):
        return _build_spec(FamilySpec, args.family, args.param)
    if args.measure:
        return _build_spec(MeasureSpec, args.measure, args.param)
    if args.spec:
        return _load_spec_json(args.spec)
    return None


def _generate(spec, count):
    if isinstance(spec, FamilySpec):
        return sequences.family_sequence(spec, count)
    return measures.moment_sequence(spec, count)


def _sequence_input(args, generators=True):
    spec = _generator_spec(args) if generators else None
    chosen = [x for x in (args.input, args.values, spec) if x is not None]
    if len(chosen) != 1:
        raise ValueError("Give exactly one sequence input: --input, --values or a generator")
    if args.input:
        return _load_sequence(args.input)
    if args.values:
        return _parse_values(args.values)
    return _generate(spec, args.count)


def _parse_range(text):
    lo, _, hi = text.partition(",")
    return float(lo), float(hi)


def _plan_inputs(args):
    sub = args.subcommand
    inputs = {}

    if sub == "gen":
        inputs["spec"] = _generator_spec(args)
        if inputs["spec"] is None:
            raise ValueError("gen needs --family, --measure or --spec")
    elif sub in ("hankel", "check-pm", "inequalities", "corollary"):
        inputs["sequence"] = _sequence_input(args)
        if getattr(args, "tolerance", None) is not None:
            inputs["tolerance"] = parse_scalar(args.tolerance)
    elif sub == "closure":
        inputs["sequence"] = _sequence_input(args, generators=False)
        if args.with_input:
            inputs["other"] = _load_sequence(args.with_input)
        elif args.with_values:
            inputs["other"] = _parse_values(args.with_values)
        elif args.op in ("combine", "hausdorff", "average", "product"):
            raise ValueError(f"closure {args.op} needs --with-input or --with-values")
        if args.chi.lstrip().startswith("{"):
            inputs["chi"] = closure.ChiSpec.from_json(json.loads(args.chi))
        else:
            inputs["chi"] = _build_spec(closure.ChiSpec, args.chi, args.param)
        inputs["alpha"] = parse_scalar(args.alpha)
        inputs["beta"] = parse_scalar(args.beta)
        inputs["tolerance"] = parse_scalar(args.tolerance)
    elif sub == "solve":
        inputs["equation"] = _equation_input(args)
    elif sub in ("divided", "sweep"):
        inputs["spec"] = _generator_spec(args)
        if not isinstance(inputs["spec"], MeasureSpec):
            raise ValueError(f"{sub} needs a measure (--measure or --spec)")
        inputs["poly"] = Polynomial.parse(args.poly)
        if sub == "sweep":
            inputs["deltas"] = [parse_scalar(d) for d in args.delta] or [parse_scalar("0")]

    return inputs


def _equation_input(args):
    if args.equation:
        text = args.equation
        if not text.lstrip().startswith("{"):
            text = _read_text(text)
        return diffeq.DifferenceEquation.from_json(json.loads(text))

    if not args.coeffs:
        raise ValueError("solve needs --equation or --coeffs with --initial")
    coeffs = [parse_scalar(c) for c in args.coeffs.split(",")]
    initial = [parse_scalar(p) for p in args.initial.split(",")] if args.initial else []

    forcing_options = [args.forcing_values, args.forcing_family, args.forcing_measure]
    if sum(x is not None for x in forcing_options) > 1:
        raise ValueError("Use only one forcing option")
    if args.forcing_values:
        forcing = diffeq.Explicit(_parse_values(args.forcing_values))
    elif args.forcing_family:
        forcing = diffeq.Family(_build_spec(FamilySpec, args.forcing_family, args.param))
    elif args.forcing_measure:
        forcing = diffeq.Measure(_build_spec(MeasureSpec, args.forcing_measure, args.param))
    else:
        forcing = diffeq.Zero()

    return diffeq.DifferenceEquation(tuple(coeffs), forcing, tuple(initial))


def parse(argv=None):
    """Parse command-line arguments into a validated CommandPlan; usage errors exit with 2."""
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        precision = get_precision(args.precision)
    except ValueError as e:
        parser.error(f"--precision: {e}")
    if args.threads < 1:
        parser.error(f"--threads must be at least 1, got {args.threads}")
    if getattr(args, "count", 1) < 1:
        parser.error(f"--count must be at least 1, got {args.count}")
    if args.digits is not None and args.digits < 1:
        parser.error(f"--digits must be at least 1, got {args.digits}")

    try:
        with precision_scope(precision):
            inputs = _plan_inputs(args)
    except (ValueError, TypeError, OSError) as e:
        parser.error(str(e))

    options = {
        key: value
        for key, value in vars(args).items()
        if key not in ("subcommand", "precision", "format", "output", "digits", "expect_pm")
        and key not in ("threads", "verbose", "quiet")
    }
    if args.subcommand == "corollary":
        try:
            options["range"] = _parse_range(args.range)
        except ValueError:
            parser.error(f"--range must be 'lo,hi', got '{args.range}'")

    if args.verbose:
        log_level = logging.DEBUG
    elif args.quiet:
        log_level = logging.WARNING
    else:
        log_level = logging.INFO

    return CommandPlan(
        subcommand=args.subcommand,
        precision=precision,
        format=args.format,
        output=args.output,
        digits=args.digits,
        expect_pm=args.expect_pm,
        threads=args.threads,
        log_level=log_level,
        options=options,
        inputs=inputs,
    )


def _sequence_output(seq):
    rows = [[n, x] for n, x in enumerate(seq)]
    return CommandOutput(seq.to_json(), ["n", "value"], rows)


def _report_output(report):
    rows = [[n, d] for n, d in enumerate(report.dets)]
    return CommandOutput(report.to_json(), ["order", "det"], rows, report.verdict)


def _run_gen(plan):
    return _sequence_output(_generate(plan.inputs["spec"], plan.options["count"]))


def _run_hankel(plan):
    dets = hankel.hankel_transform(plan.inputs["sequence"], plan.options["max_order"])
    rows = [[n, d] for n, d in enumerate(dets)]
    return CommandOutput([scalar_to_json(d) for d in dets], ["order", "det"], rows)


def _run_check_pm(plan):
    report = hankel.check_pm(
        plan.inputs["sequence"], plan.options["max_order"], plan.inputs.get("tolerance")
    )
    return _report_output(report)


def _run_inequalities(plan):
    violations = hankel.moment_inequality_report(
        plan.inputs["sequence"], plan.options["nonneg_support"]
    )
    for violation in violations:
        log.warning(f"Violated: {violation}")
    rows = [[v.name, " ".join(map(str, v.indices)), v.lhs, v.rhs] for v in violations]
    return CommandOutput(
        [v.to_json() for v in violations], ["name", "indices", "lhs", "rhs"], rows
    )


def _run_closure(plan):
    op = plan.options["op"]
    a = plan.inputs["sequence"]
    b = plan.inputs.get("other")
    inputs, options = plan.inputs, plan.options

    if op == "degenerate":
        report = closure.degenerate_diagnose(a, inputs["tolerance"])
        deviation = "" if report.max_deviation is None else report.max_deviation
        rows = [[report.degenerate, deviation, report.message]]
        return CommandOutput(report.to_json(), ["degenerate", "max_deviation", "message"], rows)

    if op == "combine":
        result = closure.combine_linear(a, b, inputs["alpha"], inputs["beta"])
    elif op == "hausdorff":
        result = closure.hausdorff_convolve(a, b, inputs["alpha"], inputs["beta"], inputs["chi"])
    elif op == "average":
        result = closure.average_convolution(a, b)
    elif op == "product":
        result = closure.pointwise_product(a, b)
    elif op == "subsample":
        result = closure.subsample(a, options["k"])
    elif op == "even-embed":
        result = closure.even_embed(a, options["mode"])
    elif op == "shift":
        result = closure.shift(a, options["s"], options["normalize"])
    elif op == "reflect":
        result = closure.reflect(a)
    elif op == "hausdorff-mean":
        result = closure.hausdorff_mean(a, inputs["chi"])
    else:
        result = closure.binomial_transform(a)

    return _sequence_output(result)


def _run_solve(plan):
    return _sequence_output(diffeq.solve(plan.inputs["equation"], plan.options["count"]))


def _run_divided(plan):
    seq, report = diffeq.divided_measure_moments(
        plan.inputs["spec"],
        plan.inputs["poly"],
        plan.options["count"],
        plan.options["max_order"],
        dps=plan.precision,
    )
    rows = [[n, x] for n, x in enumerate(seq)]
    payload = {"sequence": seq.to_json(), "hankel": report.to_json()}
    return CommandOutput(payload, ["n", "value"], rows, report.verdict)


def _run_sweep(plan):
    rows = diffeq.sensitivity_sweep(
        plan.inputs["spec"],
        plan.inputs["poly"],
        plan.options["index"],
        plan.inputs["deltas"],
        plan.options["count"],
        plan.options["max_order"],
        dps=plan.precision,
        workers=plan.threads,
    )
    width = max(len(row.dets) for row in rows)
    header = ["delta", "first_negative_index"] + [f"det_{n}" for n in range(width)]
    csv_rows = [
        [row.delta, "" if row.first_negative_index is None else row.first_negative_index]
        + list(row.dets)
        for row in rows
    ]
    return CommandOutput([row.to_json() for row in rows], header, csv_rows)


def _run_corollary(plan):
    report = closure.exp_partial_sum_check(
        plan.inputs["sequence"],
        plan.options["n"],
        plan.options["range"],
        plan.options["samples"],
    )
    if not report.nonnegative:
        log.warning(f"Partial sum is negative at x = {report.argmin}")
    rows = [[report.nonnegative, report.minimum, report.argmin, report.degree]]
    return CommandOutput(report.to_json(), ["nonnegative", "minimum", "argmin", "degree"], rows)


_HANDLERS = {
    "gen": _run_gen,
    "hankel": _run_hankel,
    "check-pm": _run_check_pm,
    "inequalities": _run_inequalities,
    "closure": _run_closure,
    "solve": _run_solve,
    "divided": _run_divided,
    "sweep": _run_sweep,
    "corollary": _run_corollary,
}


def _round_real_string(text, digits):
    with mp.workdps(max(len(text), digits)):
        return mpmath.nstr(mp.mpf(text), digits)


def _round_json(obj, digits):
    if isinstance(obj, str) and ("." in obj or "e" in obj) and _REAL_STRING_RE.match(obj):
        return _round_real_string(obj, digits)
    if isinstance(obj, list):
        return [_round_json(item, digits) for item in obj]
    if isinstance(obj, dict):
        return {key: _round_json(val, digits) for key, val in obj.items()}
    return obj


def _csv_cell(value, digits):
    if isinstance(value, (bool, int, str, float)):
        return value
    return format_scalar(value, digits)


def _render(result, plan):
    if plan.format == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(result.csv_header)
        for row in result.csv_rows:
            writer.writerow([_csv_cell(value, plan.digits) for value in row])
        return buffer.getvalue()

    payload = result.payload
    if plan.digits is not None:
        payload = _round_json(payload, plan.digits)
    return json.dumps(payload, indent=2) + "\n"


def run(plan):
    """Execute a plan and write its output.

    Returns:
        int: 0 on success, 1 for a not-pm verdict under --expect-pm, 3 on a library error
    """
    setup_logging(plan.log_level)

    try:
        with precision_scope(plan.precision):
            result = _HANDLERS[plan.subcommand](plan)
            text = _render(result, plan)
        if plan.output:
            with open(plan.output, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
    except (MomentLabError, ValueError, ArithmeticError, OSError) as e:
        log.error(e)
        return 3

    if plan.expect_pm and result.verdict is hankel.Verdict.NOT_PM:
        log.warning("Sequence is not a positive moment sequence")
        return 1

    return 0


def main():
    sys.exit(run(parse(sys.argv[1:])))


if __name__ == "__main__":
    main()
