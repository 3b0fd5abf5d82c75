"""Command-line interface.

Subcommands: simulate | estimate | calibrate | study | sweep | asymptotics |
coverage. Every command is deterministic given its flags and --seed, writes
only under its configured output location, and exits 0 on success, 2 on
input errors, 3 on numerical failures.

Times CSV format: header "n,T,h1,...,h{n-1}", one replicate per row; an
empty T column marks relative-axis times (only differences meaningful).
Newick files may hold one tree or several ';'-separated trees.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import calibration, confidence, harness, treeio
from .coalescent import CoalescenceTimes, sample_coalescence_times_block
from .errors import (
    BdGrowthError,
    DegenerateTimes,
    InsufficientReplicates,
    MismatchedN,
    MissingBranchLength,
    NonConvergence,
    NotBinary,
    NotUltrametric,
    ParseError,
    RelativeAxisError,
    SampleTooSmall,
)
from .estimators import estimate_lengths, estimate_mle, estimate_pairwise
from .rng import RngStream

_INPUT_ERRORS = (
    ParseError,
    MissingBranchLength,
    NotUltrametric,
    NotBinary,
    SampleTooSmall,
    MismatchedN,
    InsufficientReplicates,
    RelativeAxisError,
)
_NUMERICAL_ERRORS = (DegenerateTimes, NonConvergence, FloatingPointError)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3


def _g17(x: float) -> str:
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# Times CSV
# ---------------------------------------------------------------------------


def write_times_csv(matrix: np.ndarray, n: int, t: float | None, path: Path):
    header = "n,T," + ",".join(f"h{i}" for i in range(1, n))
    t_text = "" if t is None else _g17(t)
    lines = [header]
    for row in matrix:
        lines.append(f"{n},{t_text}," + ",".join(_g17(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_times_csv(path: Path) -> list[CoalescenceTimes]:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("n,T,"):
        raise ParseError(0, 'times CSV header "n,T,h1,..."')
    out = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        n = int(parts[0])
        t = float(parts[1]) if parts[1].strip() else None
        values = tuple(float(v) for v in parts[2:])
        out.append(CoalescenceTimes(n=n, times=values, t=t, relative=t is None))
    if not out:
        raise ParseError(0, "at least one data row")
    return out


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _add_regime_flags(p: argparse.ArgumentParser):
    p.add_argument("--regime", choices=confidence.REGIME_NAMES, default="exact")
    p.add_argument("--r", type=float, default=1.0, help="net growth rate")
    p.add_argument("--T", type=float, default=None, help="observation time / tree height")
    p.add_argument("--birth-rate", type=float, default=1.0,
                   help="birth rate of the exact regime (death rate is birth - r)")


def cmd_simulate(args) -> int:
    regime = confidence.make_regime(args.regime, args.r, args.T, args.birth_rate)
    matrix = sample_coalescence_times_block(
        args.n, regime, RngStream(args.seed), args.count
    )
    out = Path(args.out)
    write_times_csv(matrix, args.n, args.T, out)
    if args.trees:
        if args.T is None:
            raise RelativeAxisError("writing trees needs absolute times; pass --T")
        texts = []
        for row in matrix:
            times = CoalescenceTimes(args.n, tuple(float(v) for v in row), t=args.T)
            texts.append(treeio.serialize_newick(treeio.build_cpp_tree(times)))
        Path(args.trees).write_text("\n".join(texts) + "\n", encoding="utf-8")
    print(f"wrote {args.count} replicates to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def _load_inputs(path: Path) -> list[tuple[str, CoalescenceTimes | treeio.SampleTree]]:
    """Times CSV rows or Newick trees, each with an input identifier."""
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("n,T,"):
        rows = read_times_csv(path)
        return [(f"{path.name}#{i}", row) for i, row in enumerate(rows)]
    trees = treeio.parse_newick_trees(text)
    return [(f"{path.name}#{i}", tree) for i, tree in enumerate(trees)]


def _constants_for(n: int, table: dict[int, calibration.ConstantsRow],
                   replicates: int, seed: int) -> calibration.ConstantsRow:
    if n not in table:
        print(f"warning: no constants row for n={n}; "
              f"calibrating on the fly with {replicates} replicates", file=sys.stderr)
        table[n] = calibration.build_constants_row(n, replicates, seed)
    return table[n]


def _spec_for(n: int, table, args, spec_cache: dict) -> confidence.ConfidenceSpec:
    if n not in spec_cache:
        if args.level == 0.95:
            row = _constants_for(n, table, args.replicates, args.seed)
            spec_cache[n] = confidence.ConfidenceSpec.from_constants_row(row)
        else:
            # tabulated quantiles are 95%-specific; other levels recalibrate
            sample = calibration.sample_sn(n, args.replicates, RngStream(args.seed).child(n))
            spec_cache[n] = confidence.ConfidenceSpec.from_sample(sample, level=args.level)
    return spec_cache[n]


def _estimate_one(item, method: str, table, args, spec_cache: dict) -> dict:
    if isinstance(item, treeio.SampleTree):
        tree = item
        times = treeio.extract_coalescence_times(tree, tol=args.ultrametric_tol)
    else:
        tree = None
        times = item
    row = _constants_for(times.n, table, args.replicates, args.seed)
    spec = _spec_for(times.n, table, args, spec_cache)
    if method == "Lengths":
        est = estimate_lengths(tree if tree is not None else times)
        ci = None
    elif method == "MLE":
        est, _ = estimate_mle(times)
        ci = None
    else:
        c = {"MSE": row.c_mse, "Bias": row.c_bias, "Inv": row.c_inv,
             "RawUnitConstant": 1.0}[method]
        est = estimate_pairwise(times, c, method)
        ci = confidence.confidence_interval(times, spec)
    return {"n": times.n, "method": method, "estimate": est.point,
            "ci_low": None if ci is None else ci[0],
            "ci_high": None if ci is None else ci[1]}


def cmd_estimate(args) -> int:
    inputs = _load_inputs(Path(args.input))
    table = calibration.load_constants_table(args.constants) if args.constants else {}
    methods = [m.strip() for m in args.methods.split(",")]
    for m in methods:
        if m not in ("MSE", "Bias", "Inv", "Lengths", "MLE", "RawUnitConstant"):
            raise ValueError(f"unknown method {m!r}")

    records = []
    failures = 0
    numerical = 0
    spec_cache: dict = {}
    for name, item in inputs:
        for method in methods:
            try:
                record = _estimate_one(item, method, table, args, spec_cache)
                record["input"] = name
                record["error"] = ""
                records.append(record)
            except (BdGrowthError, ValueError) as exc:
                failures += 1
                if isinstance(exc, _NUMERICAL_ERRORS):
                    numerical += 1
                records.append({"input": name, "n": None, "method": method,
                                "estimate": None, "ci_low": None, "ci_high": None,
                                "error": f"{type(exc).__name__}: {exc}"})
    _write_estimates(records, args)
    if failures == len(records):
        return EXIT_NUMERICAL if numerical else EXIT_INPUT
    return EXIT_OK


def _write_estimates(records, args):
    if args.format == "json" or (args.out and str(args.out).endswith(".json")):
        payload = json.dumps(records, indent=2, sort_keys=True) + "\n"
    else:
        lines = ["input,n,method,estimate,ci_low,ci_high,error"]
        for rec in records:
            lines.append(
                ",".join([
                    rec["input"],
                    "" if rec["n"] is None else str(rec["n"]),
                    rec["method"],
                    "" if rec["estimate"] is None else _g17(rec["estimate"]),
                    "" if rec["ci_low"] is None else _g17(rec["ci_low"]),
                    "" if rec["ci_high"] is None else _g17(rec["ci_high"]),
                    '"' + rec["error"] + '"' if rec["error"] else "",
                ])
            )
        payload = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)


# ---------------------------------------------------------------------------
# calibrate / study / sweep / asymptotics / coverage
# ---------------------------------------------------------------------------


def parse_n_list(text: str) -> list[int]:
    """Comma-separated sizes with 'a-b' ranges and an optional ':step'."""
    out: list[int] = []
    for piece in text.split(","):
        piece = piece.strip()
        if "-" in piece:
            span, _, step = piece.partition(":")
            lo, hi = span.split("-")
            out.extend(range(int(lo), int(hi) + 1, int(step) if step else 1))
        elif piece:
            out.append(int(piece))
    if not out:
        raise ValueError(f"no sample sizes in {text!r}")
    return out


def cmd_calibrate(args) -> int:
    ns = parse_n_list(args.n)
    rows = calibration.build_constants_table(
        ns, args.replicates, args.seed, path=args.out, workers=args.workers
    )
    for row in rows:
        print(f"n={row.n}: c_inv={row.c_inv:.4f} c_mse={row.c_mse:.4f} "
              f"c_bias={row.c_bias:.4f} 1/q_lo={row.inv_q_lo:.4f} 1/q_hi={row.inv_q_hi:.4f}")
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_study(args) -> int:
    config = harness.StudyConfig(
        ns=tuple(parse_n_list(args.n)),
        rs=tuple(float(x) for x in args.r.split(",")),
        t=args.T,
        regime=args.regime,
        replicates=args.replicates,
        seed=args.seed,
        estimators=tuple(args.estimators.split(",")),
        birth_rate=args.birth_rate,
        calibration_replicates=args.calibration_replicates,
        workers=args.workers,
    )
    constants = calibration.load_constants_table(args.constants) if args.constants else None
    result = harness.run_study(config, constants)
    paths = harness.write_study_outputs(result, args.out)
    for key, path in paths.items():
        print(f"{key}: {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = np.arange(args.c_min, args.c_max + 0.5 * args.c_step, args.c_step)
    result = harness.constant_sweep(
        args.n, args.r, args.T, grid, args.replicates,
        RngStream(args.seed), regime=args.regime, birth_rate=args.birth_rate,
    )
    lines = ["c,mse,abs_bias"]
    lines += [f"{_g17(row.c)},{_g17(row.mse)},{_g17(row.abs_bias)}" for row in result.rows]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"argmin MSE at c={result.argmin_mse_c:.3f}; "
          f"argmin |bias| at c={result.argmin_bias_c:.3f}; wrote {args.out}")
    return EXIT_OK


def cmd_asymptotics(args) -> int:
    report = harness.asymptotics_check(args.n, args.r, args.replicates,
                                       RngStream(args.seed), t=args.T)
    payload = {
        "n": report.n,
        "r": report.r,
        "replicates": report.replicates,
        "var_scaled_inv": report.var_scaled_inv,
        "target_inv": report.target_inv,
        "var_scaled_lengths": report.var_scaled_lengths,
        "target_lengths": report.target_lengths,
        "ks_pvalue_inv": report.ks_pvalue_inv,
        "ks_pvalue_lengths": report.ks_pvalue_lengths,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_coverage(args) -> int:
    table = calibration.load_constants_table(args.constants) if args.constants else {}
    lines = ["n,r,T,coverage,replicates"]
    stream = RngStream(args.seed)
    for i, n in enumerate(parse_n_list(args.n)):
        spec = None
        if n in table:
            spec = confidence.ConfidenceSpec.from_constants_row(table[n])
        cov = confidence.coverage_study(
            n, args.r, args.T, args.replicates, args.regime, stream.child(i),
            spec=spec, calibration_replicates=args.calibration_replicates,
            birth_rate=args.birth_rate,
        )
        lines.append(f"{n},{_g17(args.r)},{_g17(args.T)},{_g17(cov)},{args.replicates}")
        print(f"n={n}: coverage {cov:.3f}")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bdgrowth",
        description="Simulate birth-death genealogies and estimate net growth rates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate coalescence times (and trees)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trees", default=None, help="also write Newick trees here")
    _add_regime_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate growth rates from times CSV or Newick")
    p.add_argument("input")
    p.add_argument("--constants", default=None, help="constants table path")
    p.add_argument("--methods", default="MSE,Bias,Inv,Lengths,MLE")
    p.add_argument("--replicates", type=int, default=calibration.DEFAULT_REPLICATES,
                   help="replicates for on-the-fly calibration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ultrametric-tol", type=float, default=treeio.DEFAULT_ULTRAMETRIC_TOL)
    p.add_argument("--level", type=float, default=0.95,
                   help="confidence level for the pairwise-method intervals")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("calibrate", help="build the constants table")
    p.add_argument("--n", default="5-20,30-100:10")
    p.add_argument("--replicates", type=int, default=calibration.DEFAULT_REPLICATES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("study", help="error/density/coverage study over a grid")
    p.add_argument("--n", default="5,10,20")
    p.add_argument("--r", default="0.5,1")
    p.add_argument("--T", type=float, default=40.0)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--regime", choices=confidence.REGIME_NAMES, default="exact")
    p.add_argument("--estimators", default=",".join(harness.ALL_ESTIMATORS))
    p.add_argument("--birth-rate", type=float, default=1.0)
    p.add_argument("--constants", default=None)
    p.add_argument("--calibration-replicates", type=int,
                   default=calibration.DEFAULT_REPLICATES)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("sweep", help="MSE and |bias| as functions of the constant")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--r", type=float, default=0.5)
    p.add_argument("--T", type=float, default=40.0)
    p.add_argument("--c-min", type=float, default=0.3)
    p.add_argument("--c-max", type=float, default=1.3)
    p.add_argument("--c-step", type=float, default=0.01)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--regime", choices=confidence.REGIME_NAMES, default="exact")
    p.add_argument("--birth-rate", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("asymptotics", help="large-sample variance check")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--T", type=float, default=None)
    p.add_argument("--replicates", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("coverage", help="confidence-interval coverage study")
    p.add_argument("--n", default="5,10,20")
    p.add_argument("--r", type=float, default=1.0)
    p.add_argument("--T", type=float, default=40.0)
    p.add_argument("--replicates", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--regime", choices=confidence.REGIME_NAMES, default="exact")
    p.add_argument("--birth-rate", type=float, default=1.0)
    p.add_argument("--constants", default=None)
    p.add_argument("--calibration-replicates", type=int, default=100_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_coverage)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
