"""Command-line interface: test on CSV curves, simulate, run table grids.

Exit codes: 0 on success (reject or not, the decision is data), 2 on input
errors (malformed CSV/config/flags, preprocessing guards), 3 on numerical
failures (singular fits, critical-value bracketing).

Every output is accompanied by a manifest (embedded in JSON reports,
sidecar file next to CSV outputs); --replay re-runs a manifest and
reproduces the output byte for byte, reusing the recorded timestamp.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from . import __version__
from .basis import (CurveCSVError, Grid, SingularFitError, bspline_basis,
                    fit_sample, read_curves_csv, write_curves_csv)
from .cusum import ApproximationFailureError, TestConfig, run_test
from .harness import (ExperimentGrid, cells_to_csv, format_table_panels,
                      grid_sidecar, run_grid)
from .simulate import Far1Simulator, SimSpec

REPORT_SCHEMA = "funcusum-report-1"
SIM_SCHEMA = "funcusum-simulate-1"
TABLES_SCHEMA = "funcusum-tables-1"


class DataError(ValueError):
    """Input data violates a preprocessing precondition."""


def _utc_stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _write_json(path: str, obj: dict) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_json(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _parse_keep(text: str) -> tuple[int, int]:
    parts = text.split("..")
    if len(parts) != 2:
        raise DataError(f"--keep expects 'i..j', got {text!r}")
    try:
        lo, hi = int(parts[0]), int(parts[1])
    except ValueError:
        raise DataError(f"--keep expects integers, got {text!r}") from None
    if lo < 1 or hi < lo:
        raise DataError(f"--keep needs 1 <= i <= j, got {text!r}")
    return lo, hi


def _parse_drop(text: str) -> tuple[int, ...]:
    try:
        idx = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise DataError(f"--drop-indices expects integers, got {text!r}") from None
    if any(i < 1 for i in idx):
        raise DataError("--drop-indices are 1-based, must be >= 1")
    return idx


def _parse_basis_smooth(text: str) -> tuple[int, int]:
    parts = text.split(":")
    if len(parts) != 2:
        raise DataError(f"--basis-smooth expects 'J:order', got {text!r}")
    try:
        size, order = int(parts[0]), int(parts[1])
    except ValueError:
        raise DataError(f"--basis-smooth expects integers, got {text!r}") from None
    return size, order


def preprocess(values: np.ndarray, *, drop: tuple[int, ...] = (),
               keep: tuple[int, int] | None = None,
               log_ratio: bool = False) -> np.ndarray:
    """Index selection and log-ratio transform, in that order.

    --drop-indices removes rows first (1-based, original file order); --keep
    then selects an inclusive 1-based range of the remaining rows.  The
    log-ratio transform maps each curve to log(X(t)/X(0)) and requires all
    values positive; violations report the original file row.
    """
    n = values.shape[0]
    rows = np.arange(n)
    if drop:
        bad = [i for i in drop if i > n]
        if bad:
            raise DataError(f"--drop-indices out of range (n={n}): {bad}")
        mask = np.ones(n, dtype=bool)
        mask[[i - 1 for i in drop]] = False
        rows = rows[mask]
    if keep is not None:
        lo, hi = keep
        if hi > rows.size:
            raise DataError(
                f"--keep {lo}..{hi} out of range, only {rows.size} curves "
                "remain after dropping")
        rows = rows[lo - 1:hi]
    out = values[rows]
    if log_ratio:
        nonpos = np.argwhere(out <= 0.0)
        if nonpos.size:
            i, j = nonpos[0]
            raise DataError(
                f"--log-ratio requires positive values; curve {rows[i] + 1} "
                f"(file row {rows[i] + 2}), column {j + 1} has "
                f"value {out[i, j]!r}")
        out = np.log(out / out[:, [0]])
    return out


def _test_manifest(args) -> dict:
    return {
        "schema": REPORT_SCHEMA,
        "version": __version__,
        "command": "test",
        "timestamp": _utc_stamp(),
        "input": args.input,
        "seed": args.seed,
        "preprocess": {
            "drop_indices": list(args.drop_indices),
            "keep": list(args.keep) if args.keep else None,
            "log_ratio": args.log_ratio,
            "basis_smooth": {"size": args.basis_smooth[0],
                             "order": args.basis_smooth[1]},
            "fourier": args.fourier,
        },
        "test_config": {
            "d": args.d,
            "h": args.h,
            "lag_kernel": args.lag_kernel,
            "alpha": args.alpha,
            "critical_method": args.critical,
        },
    }


def _args_from_test_manifest(manifest: dict, out: str | None) -> argparse.Namespace:
    prep = manifest["preprocess"]
    cfg = manifest["test_config"]
    return argparse.Namespace(
        input=manifest["input"],
        d=cfg["d"], h=cfg["h"], lag_kernel=cfg["lag_kernel"],
        alpha=cfg["alpha"], critical=cfg["critical_method"],
        basis_smooth=(prep["basis_smooth"]["size"],
                      prep["basis_smooth"]["order"]),
        fourier=prep["fourier"], log_ratio=prep["log_ratio"],
        keep=tuple(prep["keep"]) if prep["keep"] else None,
        drop_indices=tuple(prep["drop_indices"]),
        seed=manifest.get("seed"), out=out, replay=None)


def cmd_test(args) -> int:
    if args.replay:
        loaded = _load_json(args.replay)
        manifest = loaded.get("manifest", loaded)
        args = _args_from_test_manifest(manifest, args.out)
    else:
        manifest = _test_manifest(args)
    data = read_curves_csv(args.input)
    manifest["preprocess"]["rescaled_grid"] = data.rescaled
    values = preprocess(data.values, drop=args.drop_indices, keep=args.keep,
                        log_ratio=args.log_ratio)
    size, order = args.basis_smooth
    if len(data.grid) < size:
        raise DataError(
            f"curves have {len(data.grid)} samples, fewer than the "
            f"smoothing basis size {size}")
    sample = fit_sample(values, data.grid, bspline_basis(size, order))
    cfg = TestConfig(d=args.d, h=args.h, lag_kernel=args.lag_kernel,
                     alpha=args.alpha, critical_method=args.critical,
                     fourier_size=args.fourier)
    result = run_test(sample, cfg)
    print(f"n = {result.n}  d = {result.d}  h = {result.h:g}  "
          f"lag_kernel = {result.lag_kernel}")
    print(f"statistic T = {result.statistic:.6g}  "
          f"normalized = {result.normalized:.6g}")
    print(f"p_gumbel = {result.p_gumbel:.6g}  "
          f"p_vostrikova = {result.p_vostrikova:.6g}")
    print(f"critical ({result.critical_method}, alpha = {result.alpha:g}) "
          f"= {result.critical_value:.6g}  reject = {result.reject}")
    print(f"k_hat standardized = {result.k_hat_standardized}  "
          f"unstandardized = {result.k_hat_unstandardized}  "
          f"fully_functional = {result.k_hat_fully_functional}")
    if result.degenerate:
        print("warning: degenerate standardization (some lambda_r = 0)")
    if args.out:
        _write_json(args.out, {"schema": REPORT_SCHEMA, "manifest": manifest,
                               "result": result.to_json_dict()})
    return 0


def cmd_simulate(args) -> int:
    if args.replay:
        loaded = _load_json(args.replay)
        manifest = loaded.get("manifest", loaded)
        spec = SimSpec.from_config(manifest["simspec_config"])
    else:
        with open(args.config) as fh:
            text = fh.read()
        spec = SimSpec.from_config(text)
        if args.seed is not None:
            spec = dataclasses.replace(spec, seed=args.seed)
        manifest = {
            "schema": SIM_SCHEMA,
            "version": __version__,
            "command": "simulate",
            "timestamp": _utc_stamp(),
            "simspec_config": spec.to_config(),
        }
    sim = Far1Simulator(spec)
    sample = sim.generate()
    write_curves_csv(args.out, sample.evaluate(sim.grid), sim.grid)
    _write_json(args.out + ".manifest.json", manifest)
    print(f"wrote {spec.n} curves on {spec.grid_points} grid points "
          f"to {args.out}")
    return 0


def cmd_tables(args) -> int:
    if args.replay:
        loaded = _load_json(args.replay)
        raw = loaded.get("grid", loaded.get("manifest", {}).get("grid"))
        if raw is None:
            raise DataError(f"{args.replay} does not contain a grid record")
        kwargs = {k: tuple(v) if isinstance(v, list) else v
                  for k, v in raw.items()}
        grid = ExperimentGrid(**kwargs)
        timestamp = loaded.get("timestamp", _utc_stamp())
    else:
        with open(args.config) as fh:
            grid = ExperimentGrid.from_config(fh.read())
        if args.seed is not None:
            grid = dataclasses.replace(grid, seed=args.seed)
        timestamp = _utc_stamp()

    def progress(res):
        c = res.coords
        status = "failed" if res.error else f"reject_rate={res.reject_rate:.4f}"
        print(f"cell {c.index}: n={c.n} kernel={c.kernel} psi={c.psi:g} "
              f"h={c.h:g} d={c.d} alt={c.alternative} {status} "
              f"({res.seconds:.1f}s)", file=sys.stderr)

    results = run_grid(grid, progress=None if args.quiet else progress)
    cells_to_csv(results, args.out, timing=not args.no_timing)
    sidecar = grid_sidecar(grid, results)
    sidecar["timestamp"] = timestamp
    _write_json(args.out + ".manifest.json", sidecar)
    if args.panels:
        with open(args.panels, "w") as fh:
            fh.write(format_table_panels(results))
    failed = [r for r in results if r.error is not None]
    for r in failed:
        print(f"warning: cell {r.coords.index} failed: {r.error}",
              file=sys.stderr)
    print(f"wrote {len(results)} cells to {args.out} "
          f"({len(failed)} failed)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="funcusum",
        description="Change-point test for functional time series "
                    "(weighted CUSUM of long-run FPC scores)")
    parser.add_argument("--version", action="version",
                        version=f"funcusum {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser(
        "test", help="run the change-point test on a curve CSV")
    p_test.add_argument("input", nargs="?", help="curve CSV file")
    p_test.add_argument("--d", type=int, default=2,
                        help="projection dimension (default 2)")
    p_test.add_argument("--h", type=float, default=None,
                        help="lag-window bandwidth (default: rate rule "
                             "floor(n^(1/4)))")
    p_test.add_argument("--lag-kernel", default="plain",
                        choices=["plain", "bartlett", "parzen", "flattop"])
    p_test.add_argument("--alpha", type=float, default=0.10)
    p_test.add_argument("--critical", default="vostrikova",
                        choices=["vostrikova", "gumbel"])
    p_test.add_argument("--basis-smooth", type=_parse_basis_smooth,
                        default=(25, 4), metavar="J:ORDER",
                        help="B-spline smoothing basis (default 25:4)")
    p_test.add_argument("--fourier", type=int, default=25, metavar="J",
                        help="orthonormal working basis size (default 25)")
    p_test.add_argument("--log-ratio", action="store_true",
                        help="transform curves to log(X(t)/X(0)) "
                             "(requires positive values)")
    p_test.add_argument("--keep", type=_parse_keep, default=None,
                        metavar="I..J",
                        help="keep curves i..j (1-based, inclusive, applied "
                             "after --drop-indices)")
    p_test.add_argument("--drop-indices", type=_parse_drop, default=(),
                        metavar="I,J,...",
                        help="drop curves by 1-based index before --keep")
    p_test.add_argument("--seed", type=int, default=None)
    p_test.add_argument("--out", default=None, help="JSON report path")
    p_test.add_argument("--replay", default=None, metavar="REPORT.JSON",
                        help="re-run a previous report's manifest")
    p_test.set_defaults(func=cmd_test)

    p_sim = sub.add_parser(
        "simulate", help="generate a functional AR(1) sample as CSV")
    p_sim.add_argument("config", nargs="?", help="SimSpec config file")
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
    p_sim.add_argument("--out", required=True, help="output curve CSV")
    p_sim.add_argument("--replay", default=None, metavar="MANIFEST.JSON",
                       help="re-run a previous manifest")
    p_sim.set_defaults(func=cmd_simulate)

    p_tab = sub.add_parser(
        "tables", help="run a Monte Carlo grid and emit size/power tables")
    p_tab.add_argument("config", nargs="?", help="ExperimentGrid config file")
    p_tab.add_argument("--seed", type=int, default=None,
                       help="override the config master seed")
    p_tab.add_argument("--out", required=True, help="output CSV")
    p_tab.add_argument("--panels", default=None,
                       help="also write the pivoted table layout here")
    p_tab.add_argument("--no-timing", action="store_true",
                       help="write 0.0 in the seconds column so reruns are "
                            "byte-identical")
    p_tab.add_argument("--quiet", action="store_true",
                       help="suppress per-cell progress on stderr")
    p_tab.add_argument("--replay", default=None, metavar="MANIFEST.JSON",
                       help="re-run a previous manifest")
    p_tab.set_defaults(func=cmd_tables)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "test" and not args.input and not args.replay:
        parser.error("test needs an input CSV (or --replay)")
    if args.command == "simulate" and not args.config and not args.replay:
        parser.error("simulate needs a config file (or --replay)")
    if args.command == "tables" and not args.config and not args.replay:
        parser.error("tables needs a config file (or --replay)")
    try:
        return args.func(args)
    except (SingularFitError, ApproximationFailureError,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (CurveCSVError, DataError, ValueError, OSError,
            json.JSONDecodeError, KeyError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
