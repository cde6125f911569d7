"""Monte Carlo size/power experiments over grids of FAR(1) settings.

One cell = one (n, kernel, psi, h, d, alternative) coordinate; R
replications per cell, each replication an independent simulate -> test
run.  Per-replication RNG streams derive from (master seed, cell index,
replication index), so any cell can be reproduced in isolation and results
do not depend on scheduling.
"""

from __future__ import annotations

import csv
import itertools
import math
import statistics
import time
from dataclasses import dataclass, fields
from typing import Callable

from . import __version__
from .cusum import TestConfig, run_test
from .simulate import Far1Simulator, SimSpec, calibrate_kernel, make_change

_LIST_KEYS = {"n": int, "psi": float, "kernel": str, "h": float, "d": int,
              "alternative": None}
_SCALAR_KEYS = {"replications": int, "alpha": float, "seed": int,
                "theta": float, "change_shape": str,
                "change_amplitude": float, "lag_kernel": str,
                "critical_method": str, "burn_in": int, "grid_points": int,
                "basis_size": int, "basis_order": int, "fourier_size": int}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(f"cannot parse boolean from {text!r}")


@dataclass(frozen=True)
class ExperimentGrid:
    """Axes and shared settings of one Monte Carlo experiment."""

    n_values: tuple[int, ...] = (100,)
    psi_values: tuple[float, ...] = (0.2,)
    kernels: tuple[str, ...] = ("gaussian",)
    h_values: tuple[float, ...] = (2.0,)
    d_values: tuple[int, ...] = (2,)
    alternatives: tuple[bool, ...] = (False,)
    replications: int = 1000
    alpha: float = 0.10
    seed: int = 0
    theta: float = 0.5
    change_shape: str = "sin"
    change_amplitude: float = 1.0
    lag_kernel: str = "plain"
    critical_method: str = "vostrikova"
    burn_in: int = 100
    grid_points: int = 96
    basis_size: int = 25
    basis_order: int = 4
    fourier_size: int = 25

    def __post_init__(self) -> None:
        for name in ("n_values", "psi_values", "kernels", "h_values",
                     "d_values", "alternatives"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ValueError(f"{name} must be nonempty")
        if self.replications < 1:
            raise ValueError("need at least one replication")

    def cells(self) -> list["CellCoords"]:
        """All cells in the fixed product order that defines cell indices."""
        combos = itertools.product(self.n_values, self.kernels,
                                   self.psi_values, self.h_values,
                                   self.d_values, self.alternatives)
        return [CellCoords(i, n, kern, psi, h, d, alt)
                for i, (n, kern, psi, h, d, alt) in enumerate(combos)]

    def to_config(self) -> str:
        def join(values):
            return ", ".join(_config_cell(v) for v in values)
        lines = [
            f"n = {join(self.n_values)}",
            f"kernel = {join(self.kernels)}",
            f"psi = {join(self.psi_values)}",
            f"h = {join(self.h_values)}",
            f"d = {join(self.d_values)}",
            f"alternative = {join(self.alternatives)}",
        ]
        for key, _ in _SCALAR_KEYS.items():
            lines.append(f"{key} = {_config_cell(getattr(self, _FIELD_BY_KEY[key]))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_config(cls, text: str) -> "ExperimentGrid":
        raw: dict[str, str] = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            if key in raw:
                raise ValueError(f"line {lineno}: duplicate key {key!r}")
            raw[key] = value
        unknown = set(raw) - set(_LIST_KEYS) - set(_SCALAR_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs: dict = {}
        for key, conv in _LIST_KEYS.items():
            if key not in raw:
                continue
            parts = [p.strip() for p in raw[key].split(",") if p.strip()]
            if conv is None:
                kwargs[_FIELD_BY_KEY[key]] = tuple(_parse_bool(p) for p in parts)
            else:
                kwargs[_FIELD_BY_KEY[key]] = tuple(conv(p) for p in parts)
        for key, conv in _SCALAR_KEYS.items():
            if key not in raw:
                continue
            kwargs[_FIELD_BY_KEY[key]] = conv(raw[key])
        return cls(**kwargs)


def _config_cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


_FIELD_BY_KEY = {
    "n": "n_values", "psi": "psi_values", "kernel": "kernels",
    "h": "h_values", "d": "d_values", "alternative": "alternatives",
    "replications": "replications", "alpha": "alpha", "seed": "seed",
    "theta": "theta", "change_shape": "change_shape",
    "change_amplitude": "change_amplitude", "lag_kernel": "lag_kernel",
    "critical_method": "critical_method", "burn_in": "burn_in",
    "grid_points": "grid_points", "basis_size": "basis_size",
    "basis_order": "basis_order", "fourier_size": "fourier_size",
}


@dataclass(frozen=True)
class CellCoords:
    """One grid cell; `index` is its position in ExperimentGrid.cells()."""

    index: int
    n: int
    kernel: str
    psi: float
    h: float
    d: int
    alternative: bool


@dataclass(frozen=True)
class CellResult:
    """Aggregates of R simulate-then-test replications at one coordinate."""

    coords: CellCoords
    replications: int
    completed: int
    reject_rate: float
    se: float
    khat_mean: float
    khat_median: float
    seconds: float
    error: str | None = None


def run_cell(coords: CellCoords, replications: int, seed: int,
             settings: ExperimentGrid,
             timer: Callable[[], float] = time.perf_counter) -> CellResult:
    """Run R replications at one coordinate, deterministically seeded.

    Replication r uses the stream (seed, coords.index, r).  A failing
    replication aborts the cell; its stream tuple is recorded in `error`
    and the aggregate fields are NaN.
    """
    start = timer()
    change = None
    if coords.alternative:
        change = make_change(settings.change_shape, settings.theta,
                             settings.change_amplitude,
                             grid_points=settings.grid_points,
                             basis_size=settings.basis_size,
                             basis_order=settings.basis_order)
    spec = SimSpec(n=coords.n,
                   kernel=calibrate_kernel(coords.kernel, coords.psi),
                   change=change, burn_in=settings.burn_in,
                   grid_points=settings.grid_points,
                   basis_size=settings.basis_size,
                   basis_order=settings.basis_order)
    sim = Far1Simulator(spec)
    cfg = TestConfig(d=coords.d, h=float(coords.h),
                     lag_kernel=settings.lag_kernel, alpha=settings.alpha,
                     critical_method=settings.critical_method,
                     fourier_size=settings.fourier_size)
    rejects = 0
    khats: list[float] = []
    for rep in range(replications):
        stream = (seed, coords.index, rep)
        try:
            sample = sim.generate(stream)
            res = run_test(sample, cfg)
        except Exception as exc:
            return CellResult(
                coords=coords, replications=replications, completed=rep,
                reject_rate=math.nan, se=math.nan, khat_mean=math.nan,
                khat_median=math.nan, seconds=timer() - start,
                error=f"replication {rep} (stream {stream}) failed: {exc}")
        rejects += res.reject
        khats.append(res.k_hat_standardized / coords.n)
    p_hat = rejects / replications
    return CellResult(
        coords=coords, replications=replications, completed=replications,
        reject_rate=p_hat,
        se=math.sqrt(p_hat * (1.0 - p_hat) / replications),
        khat_mean=statistics.fmean(khats),
        khat_median=statistics.median(khats),
        seconds=timer() - start)


def run_grid(grid: ExperimentGrid,
             progress: Callable[[CellResult], None] | None = None,
             timer: Callable[[], float] = time.perf_counter,
             ) -> list[CellResult]:
    """Evaluate every cell; failed cells are reported, the run continues.

    Results appear in cell-index order regardless of execution schedule.
    """
    results = []
    for coords in grid.cells():
        res = run_cell(coords, grid.replications, grid.seed, grid, timer)
        results.append(res)
        if progress is not None:
            progress(res)
    return results


CSV_COLUMNS = ("n", "kernel", "psi", "h", "d", "alternative", "R",
               "reject_rate", "se", "khat_mean", "khat_median", "seconds")


def cells_to_csv(results: list[CellResult], path: str, *,
                 timing: bool = True) -> None:
    """Write the long-format results CSV.

    With timing=False the seconds column is written as 0.0 so that reruns
    of the same grid and seed produce byte-identical files (wall-clock
    timing is inherently not reproducible; it is also recorded in the
    sidecar JSON).
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for res in results:
            c = res.coords
            writer.writerow([
                c.n, c.kernel, repr(c.psi), repr(c.h), c.d,
                "true" if c.alternative else "false", res.replications,
                _num(res.reject_rate), _num(res.se), _num(res.khat_mean),
                _num(res.khat_median),
                f"{res.seconds:.3f}" if timing else "0.0",
            ])


def _num(v: float) -> str:
    return "nan" if math.isnan(v) else repr(v)


def grid_sidecar(grid: ExperimentGrid, results: list[CellResult]) -> dict:
    """Provenance record: the full grid, seed, audit counters, failures."""
    grid_dict = {}
    for f in fields(grid):
        value = getattr(grid, f.name)
        grid_dict[f.name] = list(value) if isinstance(value, tuple) else value
    return {
        "schema": "funcusum-tables-1",
        "version": __version__,
        "grid": grid_dict,
        "master_seed": grid.seed,
        "cells": len(results),
        "replications_per_cell": grid.replications,
        "total_replications": sum(r.completed for r in results),
        "expected_replications": len(results) * grid.replications,
        "failed_cells": [
            {"index": r.coords.index, "n": r.coords.n,
             "kernel": r.coords.kernel, "psi": r.coords.psi,
             "h": r.coords.h, "d": r.coords.d,
             "alternative": r.coords.alternative, "error": r.error}
            for r in results if r.error is not None],
        "timing_seconds": [round(r.seconds, 3) for r in results],
    }


def format_table_panels(results: list[CellResult]) -> str:
    """Pivot results into a panelled table layout.

    One block per (kernel, alternative, h): rows are (n, psi) pairs,
    columns are d values, entries are rejection percentages.
    """
    key_fn = lambda r: (r.coords.kernel, r.coords.alternative, r.coords.h)
    blocks = {}
    for r in results:
        blocks.setdefault(key_fn(r), {})[
            (r.coords.n, r.coords.psi, r.coords.d)] = r
    out = []
    for (kernel, alt, h) in sorted(blocks, key=lambda k: (k[0], k[1], k[2])):
        cellmap = blocks[(kernel, alt, h)]
        ds = sorted({d for (_, _, d) in cellmap})
        rows = sorted({(n, psi) for (n, psi, _) in cellmap})
        label = "power" if alt else "size"
        out.append(f"# kernel={kernel} {label} h={_config_cell(h)}")
        out.append("n,psi," + ",".join(f"d={d}" for d in ds))
        for (n, psi) in rows:
            entries = []
            for d in ds:
                r = cellmap.get((n, psi, d))
                if r is None or math.isnan(r.reject_rate):
                    entries.append("nan")
                else:
                    entries.append(f"{100.0 * r.reject_rate:.1f}")
            out.append(f"{n},{_config_cell(psi)}," + ",".join(entries))
        out.append("")
    return "\n".join(out)
