"""Command-line pipelines over the library: simulate, extract, estimate,
weights, evaluate.

Every command is deterministic given its flags, inputs and seed. File
formats: impressions and pair groups are JSONL; curves are CSV with a
``rank,propensity`` header and one row per rank; evaluation reports are
CSV. Flags take precedence over an optional JSON config file
(``--config``, one key per flag dest), which takes precedence over
defaults. Exit codes: 0 success (including a non-converged fit, which
warns), 1 usage error, 2 data error.
"""

import argparse
import json
import sys
from typing import IO

from .domain import (
    DEFAULT_RANK_MAX,
    CurveMethod,
    EstimationReport,
    KnotSpec,
    Platform,
    PropensityCurve,
)
from .em import PositionBasedModelEM
from .evaluate import DEFAULT_FIXED_RANKS, EvalReport, bootstrap_compare, read_scores_jsonl
from .ingest import (
    ExtractionConfig,
    LogParseError,
    SelectionMode,
    extract_pairs,
    parse_log,
    read_pairs_jsonl,
    write_impressions_jsonl,
    write_pairs_jsonl,
)
from .mle import LikelihoodEstimator
from .ratio import ratio_estimate, ratio_matrix
from .simulate import RelevanceModel, SimConfig, simulate_pairs

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    """Flag combinations argparse cannot catch on its own."""


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; this project reserves 2 for data."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# File formats owned by the CLI layer


def write_curve_csv(curve: PropensityCurve, stream: IO) -> None:
    """One row per rank 1..rank_max, propensity with 9 significant digits."""
    stream.write("rank,propensity\n")
    for rank, value in enumerate(curve.values, start=1):
        stream.write(f"{rank},{value:.9g}\n")


def read_curve_csv(stream: IO, method: CurveMethod = CurveMethod.DIRECT) -> PropensityCurve:
    header = stream.readline().strip()
    if header != "rank,propensity":
        raise ValueError(f"unexpected curve CSV header: {header!r}")
    values = []
    for line_number, line in enumerate(stream, start=2):
        line = line.strip()
        if not line:
            continue
        try:
            rank_text, value_text = line.split(",")
            rank = int(rank_text)
            value = float(value_text)
        except ValueError:
            raise ValueError(f"curve CSV line {line_number}: malformed row {line!r}") from None
        if rank != len(values) + 1:
            raise ValueError(
                f"curve CSV line {line_number}: expected rank {len(values) + 1}, got {rank}"
            )
        values.append(value)
    if not values:
        raise ValueError("curve CSV has no rows")
    return PropensityCurve(values, method)


def write_eval_csv(report: EvalReport, stream: IO) -> None:
    stream.write("rank,model_pair,mean_improvement,stddev,n_bootstrap\n")
    for row in report.rows:
        stream.write(
            f"{row.rank},{row.model_a}-vs-{row.model_b},"
            f"{row.mean_improvement:.9g},{row.stddev_improvement:.9g},"
            f"{report.n_bootstrap}\n"
        )


def write_report_json(report: EstimationReport, stream: IO) -> None:
    json.dump(report.to_dict(), stream, indent=2, sort_keys=True)
    stream.write("\n")


def _int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    try:
        return [int(part) for part in str(value).split(",") if part.strip()]
    except ValueError:
        raise UsageError(
            f"expected a comma-separated integer list, got {value!r}") from None


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args) -> int:
    try:
        cfg = SimConfig(
            rank_max=args.rank_max,
            n_pairs_target=args.pairs,
            rank_spread_divisor=args.rank_spread_divisor,
            relevance=RelevanceModel(
                base_ctr_scale=args.base_ctr_scale,
                base_ctr_exponent=args.base_ctr_exponent,
                noise_sigma=args.noise_sigma,
            ),
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    counters: dict = {}
    groups, curve = simulate_pairs(cfg, counters=counters)
    with open(args.output, "w") as f:
        write_pairs_jsonl(groups, f)
    with open(args.curve_output, "w") as f:
        write_curve_csv(curve, f)
    if args.impressions_output:
        # flatten each appearance into a constant-metadata impression so
        # simulated data can flow through the extraction path unchanged
        # (constant price keeps the price-stability filter satisfied)
        from decimal import Decimal

        from .domain import ImpressionRecord

        def impressions():
            for group in groups:
                for rank, clicked in group.appearances:
                    yield ImpressionRecord(
                        query_id=group.query_id, doc_id=group.doc_id,
                        rank=rank, clicked=clicked, day=0, price=Decimal("100"),
                        is_auction=False, platform=Platform.WEB,
                        sort_type="best_match",
                    )
        with open(args.impressions_output, "w") as f:
            write_impressions_jsonl(impressions(), f)
    print(
        f"retained {counters['retained']} pair groups "
        f"from {counters['attempts']} attempts",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_extract(args) -> int:
    cfg = ExtractionConfig(
        require_same_day=args.same_day,
        require_same_price=args.same_price,
        exclude_auctions=args.exclude_auctions,
        platform_filter=Platform(args.platform) if args.platform else None,
        sort_type_filter=args.sort_type,
        selection_mode=(
            SelectionMode.EXACTLY_TWO_RANKS_ONE_CLICK
            if args.selection == "strict"
            else SelectionMode.AT_LEAST_TWO_RANKS_ONE_PLUS_CLICKS
        ),
    )
    with open(args.input) as f:
        records = parse_log(f, rank_max=args.rank_max)
    selected, summary = extract_pairs(records, cfg)
    with open(args.output, "w") as f:
        write_pairs_jsonl(selected, f)
    for line in summary.lines():
        print(line, file=sys.stderr)
    return EXIT_OK


def _estimate_curve(args, pairs) -> EstimationReport:
    if args.max_iterations is not None and args.max_iterations < 1:
        raise UsageError("--max-iterations must be >= 1")
    if args.gradient_tolerance <= 0:
        raise UsageError("--gradient-tolerance must be > 0")
    if args.smoothing < 0:
        raise UsageError("--smoothing must be >= 0")
    if args.method == "em":
        estimator = PositionBasedModelEM(
            max_iterations=args.max_iterations or 200,
            ll_tolerance=args.ll_tolerance,
            smoothing=args.smoothing,
            rank_max=args.rank_max,
        )
    else:
        knots = None
        if args.knots:
            try:
                knots = KnotSpec(tuple(_int_list(args.knots)))
                knots.validate_for(args.rank_max)
            except ValueError as exc:
                raise UsageError(f"invalid --knots: {exc}") from None
        estimator = LikelihoodEstimator(
            parametrization="direct" if args.method == "direct" else "interpolated",
            knots=knots,
            rank_max=args.rank_max,
            max_iterations=args.max_iterations or 1000,
            gradient_tolerance=args.gradient_tolerance,
            min_rank_observations=args.min_rank_observations,
        )
    return estimator.fit(pairs).report_


def _check_estimate_flags(args) -> None:
    if args.method != "interp" and args.knots:
        raise UsageError("--knots applies to --method interp only")
    ratio_flags = (args.rank_i is not None or args.rank_j is not None
                   or args.matrix)
    if args.method != "ratio" and ratio_flags:
        raise UsageError(
            "--rank-i/--rank-j/--matrix apply to --method ratio only")
    if args.method == "ratio" and args.report:
        raise UsageError("--report applies to curve methods, not ratio")


def cmd_estimate(args) -> int:
    _check_estimate_flags(args)
    with open(args.input) as f:
        pairs = read_pairs_jsonl(f)

    if args.method == "ratio":
        has_pair = args.rank_i is not None and args.rank_j is not None
        if has_pair == bool(args.matrix):
            raise UsageError(
                "ratio method needs either --rank-i and --rank-j, or --matrix"
            )
        if has_pair:
            rows = [(args.rank_i, args.rank_j,
                     *_ratio_row(pairs, args.rank_i, args.rank_j))]
        else:
            rows = [
                (i, j, ratio, n)
                for i, j, ratio, n in ratio_matrix(pairs, _int_list(args.matrix))
            ]
        with open(args.output, "w") as f:
            f.write("rank_i,rank_j,ratio,n_pairs\n")
            for rank_i, rank_j, ratio, n_pairs in rows:
                f.write(f"{rank_i},{rank_j},{ratio:.9g},{n_pairs}\n")
        return EXIT_OK

    report = _estimate_curve(args, pairs)
    with open(args.output, "w") as f:
        write_curve_csv(report.curve, f)
    if args.report:
        with open(args.report, "w") as f:
            write_report_json(report, f)
    if not report.converged:
        print(
            f"warning: estimate did not converge within {report.iterations} "
            "iterations; curve written anyway (see report)",
            file=sys.stderr,
        )
    return EXIT_OK


def _ratio_row(pairs, rank_i, rank_j):
    est = ratio_estimate(pairs, rank_i, rank_j)
    return est.ratio, est.n_pairs


def cmd_weights(args) -> int:
    with open(args.curve) as f:
        curve = read_curve_csv(f)
    bad_lines = []
    out_lines = []
    with open(args.input) as f:
        for line_number, line in enumerate(f, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                obj = json.loads(stripped)
                rank = int(obj["rank"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise LogParseError(line_number, "invalid impression line") from None
            if not 1 <= rank <= curve.rank_max:
                bad_lines.append(line_number)
                continue
            obj["weight"] = 1.0 / curve.values[rank - 1]
            out_lines.append(json.dumps(obj))
    if bad_lines:
        shown = ", ".join(map(str, bad_lines[:20]))
        more = f" (+{len(bad_lines) - 20} more)" if len(bad_lines) > 20 else ""
        raise ValueError(
            f"{len(bad_lines)} impression(s) have ranks beyond the curve's "
            f"rank_max {curve.rank_max}: lines {shown}{more}"
        )
    with open(args.output, "w") as f:
        for out in out_lines:
            f.write(out + "\n")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.bootstrap < 1:
        raise UsageError("--bootstrap must be >= 1")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    with open(args.input) as f:
        impressions = read_scores_jsonl(f)
    report = bootstrap_compare(
        impressions,
        fixed_ranks=_int_list(args.ranks),
        model_a=args.model_a,
        model_b=args.model_b,
        n_bootstrap=args.bootstrap,
        seed=args.seed,
    )
    with open(args.output, "w") as f:
        write_eval_csv(report, f)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> tuple[_Parser, dict]:
    parser = _Parser(
        prog="clickprop",
        description="Position-bias click propensity estimation toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    def add(name, help_text):
        sub = subs.add_parser(name, help=help_text)
        sub.add_argument("--config", default=None,
                         help="JSON file of defaults, one key per flag")
        subparsers[name] = sub
        return sub

    sim = add("simulate", "generate synthetic pair groups with known truth")
    sim.add_argument("--pairs", type=int, default=40_000)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--rank-max", type=int, default=DEFAULT_RANK_MAX)
    sim.add_argument("--rank-spread-divisor", type=float, default=5.0)
    sim.add_argument("--base-ctr-scale", type=float, default=0.3)
    sim.add_argument("--base-ctr-exponent", type=float, default=0.4)
    sim.add_argument("--noise-sigma", type=float, default=0.3)
    sim.add_argument("--output", required=True, help="pair groups JSONL")
    sim.add_argument("--curve-output", required=True, help="true curve CSV")
    sim.add_argument("--impressions-output", default=None,
                     help="also write flat impressions JSONL")

    ext = add("extract", "filter and group an impression log into pairs")
    ext.add_argument("--input", required=True, help="impressions JSONL")
    ext.add_argument("--output", required=True, help="selected pairs JSONL")
    ext.add_argument("--rank-max", type=int, default=DEFAULT_RANK_MAX)
    ext.add_argument("--same-day", action=argparse.BooleanOptionalAction, default=True)
    ext.add_argument("--same-price", action=argparse.BooleanOptionalAction, default=True)
    ext.add_argument("--exclude-auctions", action=argparse.BooleanOptionalAction,
                     default=True)
    ext.add_argument("--platform", choices=[p.value for p in Platform], default=None)
    ext.add_argument("--sort-type", default=None)
    ext.add_argument("--selection", choices=["strict", "relaxed"], default="strict")

    est = add("estimate", "fit a propensity curve or rank-pair ratios")
    est.add_argument("--input", required=True, help="pair groups JSONL")
    est.add_argument("--method", required=True,
                     choices=["direct", "interp", "ratio", "em"])
    est.add_argument("--output", required=True, help="curve CSV (ratio: ratio CSV)")
    est.add_argument("--report", default=None, help="fit report JSON")
    est.add_argument("--rank-max", type=int, default=DEFAULT_RANK_MAX)
    est.add_argument("--knots", default=None,
                     help="comma-separated knot ranks for --method interp")
    est.add_argument("--max-iterations", type=int, default=None)
    est.add_argument("--gradient-tolerance", type=float, default=1e-8)
    est.add_argument("--min-rank-observations", type=int, default=1)
    est.add_argument("--ll-tolerance", type=float, default=1e-7)
    est.add_argument("--smoothing", type=float, default=1.0)
    est.add_argument("--rank-i", type=int, default=None)
    est.add_argument("--rank-j", type=int, default=None)
    est.add_argument("--matrix", default=None,
                     help="comma-separated ranks for the ratio matrix")

    wgt = add("weights", "attach inverse-propensity weights to impressions")
    wgt.add_argument("--input", required=True, help="impressions JSONL")
    wgt.add_argument("--curve", required=True, help="curve CSV")
    wgt.add_argument("--output", required=True, help="weighted impressions JSONL")

    ev = add("evaluate", "fixed-rank AUC comparison with bootstrap error bars")
    ev.add_argument("--input", required=True, help="scored impressions JSONL")
    ev.add_argument("--model-a", required=True)
    ev.add_argument("--model-b", required=True)
    ev.add_argument("--ranks", default=",".join(map(str, DEFAULT_FIXED_RANKS)))
    ev.add_argument("--bootstrap", type=int, default=1000)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--output", required=True, help="evaluation report CSV")

    return parser, subparsers


_COMMANDS = {
    "simulate": cmd_simulate,
    "extract": cmd_extract,
    "estimate": cmd_estimate,
    "weights": cmd_weights,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)

    if args.config:
        try:
            with open(args.config) as f:
                overrides = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"clickprop: error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_USAGE
        sub = subparsers[args.command]
        valid = {action.dest for action in sub._actions}
        unknown = set(overrides) - valid
        if unknown:
            print(
                f"clickprop: error: unknown config keys: {sorted(unknown)}",
                file=sys.stderr,
            )
            return EXIT_USAGE
        sub.set_defaults(**overrides)
        args = parser.parse_args(argv)

    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"clickprop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        # a path that does not exist is a command-line mistake, not bad data
        print(f"clickprop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (LogParseError, ValueError, OSError) as exc:
        print(f"clickprop: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
