"""Experiment harness: random-instance sweeps and named-instance variant comparisons.

Every report row carries the raw cost, so every average in a summary can be
recomputed from the emitted CSV.
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import dataclass, fields, replace
from typing import Optional

from .baselines import (
    BRUTE_FORCE_MAX,
    HELD_KARP_MAX,
    exact_brute_force,
    exact_held_karp,
    nearest_neighbor,
    nearest_neighbor_best,
)
from .errors import DomainError, NbtspError, ValidationError
from .instances import gen_random_uniform
from .sim import SimConfig, Variant, run
from .tour import percent_error

CSV_HEADER = "instance,n,variant,seed,cost,exact_cost,percent_error,wall_clock_s,converged"
SUMMARY_HEADER = (
    "group,variant,runs,failures,mean_percent_error,min_percent_error,"
    "max_percent_error,stddev_percent_error,mean_wall_clock_s"
)

EXACT_TAG = "exact"
NN_TAG = "nn"
NN_BEST_TAG = "nn-best"
# the three method columns of the named-instance comparison
NAMED_VARIANTS = (Variant.SIMPLE, Variant.PRESSURE, Variant.BUBBLE)


@dataclass(frozen=True)
class RunReport:
    instance: str
    n: int
    variant: str
    seed: int
    cost: float
    exact_cost: Optional[float]
    percent_error: Optional[float]
    wall_clock_s: float
    converged: bool

    def __post_init__(self):
        if (self.exact_cost is None) != (self.percent_error is None):
            raise ValidationError("percent_error must be present exactly when exact_cost is")

    @property
    def failed(self):
        return math.isnan(self.cost)


@dataclass(frozen=True)
class SummaryRow:
    group: str
    variant: str
    runs: int
    failures: int
    mean_percent_error: float
    min_percent_error: float
    max_percent_error: float
    stddev_percent_error: float
    mean_wall_clock_s: float


def _report(inst_name, n, tag, seed, cost, exact, wall, converged=True):
    pe = None if exact is None else percent_error(cost, exact)
    return RunReport(inst_name, n, tag, seed, cost, exact, pe, wall, converged)


def _failed(inst_name, n, tag, seed, exact, wall):
    nan = math.nan
    return RunReport(inst_name, n, tag, seed, nan, exact, None if exact is None else nan,
                     wall, False)


def _timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


def _nbody_row(inst, cfg, seed, exact):
    tag = cfg.variant.value
    t0 = time.perf_counter()
    try:
        res = run(inst, cfg, seed)
    except NbtspError:
        return _failed(inst.name, inst.n, tag, seed, exact, time.perf_counter() - t0)
    return _report(inst.name, inst.n, tag, seed, res.tour.cost, exact, res.wall_clock_s,
                   res.converged)


def experiment_random(n_values, runs, base_seed=0, cfg: SimConfig = None, *,
                      brute_force=False, cross_check=False, nn_best=False):
    """Exact, N-body and nearest-neighbour rows for ``runs`` instances at each ``n``.

    Instance ``k`` of size ``n`` uses seed ``base_seed + k``. Held-Karp is the
    exact solver unless ``brute_force`` is set; ``cross_check`` additionally
    runs brute force and insists both costs agree. Returns the sorted reports
    and the per-n summary.
    """
    cfg = cfg or SimConfig()
    if runs < 1:
        raise DomainError(f"runs must be at least 1, got {runs}")
    n_values = list(n_values)
    limit = BRUTE_FORCE_MAX if (brute_force or cross_check) else HELD_KARP_MAX
    for n in n_values:
        if not 3 <= n <= limit:
            raise DomainError(f"n={n} outside the exact solver's range 3..{limit}")
    exact_solver = exact_brute_force if brute_force else exact_held_karp
    nn_tag = NN_BEST_TAG if nn_best else NN_TAG
    reports = []
    for n in n_values:
        for k in range(runs):
            seed = base_seed + k
            inst = gen_random_uniform(n, seed)
            opt, wall = _timed(exact_solver, inst)
            if cross_check:
                other = exact_held_karp(inst) if brute_force else exact_brute_force(inst)
                if other.cost != opt.cost:
                    raise ValidationError(
                        f"{inst.name}: exact solvers disagree ({opt.cost!r} vs {other.cost!r})"
                    )
            exact = opt.cost
            reports.append(_report(inst.name, n, EXACT_TAG, seed, exact, exact, wall))
            reports.append(_nbody_row(inst, cfg, seed, exact))
            nn, wall = _timed(nearest_neighbor_best if nn_best else nearest_neighbor, inst)
            reports.append(_report(inst.name, n, nn_tag, seed, nn.cost, exact, wall))
    reports.sort(key=lambda r: (r.n, r.seed, r.variant))
    return reports, summarize(reports, group_by="n")


def experiment_named(instances, variants=NAMED_VARIANTS, cfg: SimConfig = None, *,
                     runs=1, base_seed=0):
    """One row per (instance, variant, run), in the order given."""
    cfg = cfg or SimConfig()
    if runs < 1:
        raise DomainError(f"runs must be at least 1, got {runs}")
    instances = list(instances)
    for inst in instances:
        if inst.optimal_cost is None:
            raise ValidationError(f"instance {inst.name!r} has no reference optimal cost")
    reports = []
    for inst in instances:
        for v in variants:
            vcfg = replace(cfg, variant=Variant.parse(v))
            for k in range(runs):
                reports.append(_nbody_row(inst, vcfg, base_seed + k, inst.optimal_cost))
    return reports


def summarize(reports, group_by="instance", include_nonconverged=True):
    """Mean/min/max/population-stddev of percent error per (group, variant).

    Failed rows (no cost) never enter the statistics and are counted instead.
    Groups are ordered by first appearance, variants likewise within a group.
    """
    if not reports:
        raise DomainError("cannot summarize an empty report list")
    if group_by not in ("instance", "n"):
        raise DomainError(f"group_by must be 'instance' or 'n', got {group_by!r}")
    groups = {}
    for r in reports:
        key = (f"n={r.n}" if group_by == "n" else r.instance, r.variant)
        groups.setdefault(key, []).append(r)
    rows = []
    for (group, variant), rs in groups.items():
        ok = [r for r in rs if not r.failed and (include_nonconverged or r.converged)]
        errs = [r.percent_error for r in ok if r.percent_error is not None]
        nan = math.nan
        rows.append(SummaryRow(
            group=group,
            variant=variant,
            runs=len(rs),
            failures=sum(r.failed for r in rs),
            mean_percent_error=statistics.fmean(errs) if errs else nan,
            min_percent_error=min(errs) if errs else nan,
            max_percent_error=max(errs) if errs else nan,
            stddev_percent_error=statistics.pstdev(errs) if errs else nan,
            mean_wall_clock_s=statistics.fmean(r.wall_clock_s for r in rs),
        ))
    return rows


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_reports(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write(CSV_HEADER + "\n")
    for r in reports:
        w.writerow([_fmt(getattr(r, f.name)) for f in fields(RunReport)])
    return buf.getvalue()


def parse_reports(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or ",".join(rows[0]) != CSV_HEADER:
        raise ValidationError(f"report CSV must start with header {CSV_HEADER!r}")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != 9:
            raise ValidationError(f"report CSV line {i}: expected 9 fields, got {len(row)}")
        name, n, variant, seed, cost, exact, pe, wall, conv = row
        if conv not in ("true", "false"):
            raise ValidationError(f"report CSV line {i}: converged must be true or false")
        out.append(RunReport(
            name, int(n), variant, int(seed), float(cost),
            float(exact) if exact else None, float(pe) if pe else None,
            float(wall), conv == "true",
        ))
    return out


def emit_summary(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    buf.write(SUMMARY_HEADER + "\n")
    for r in rows:
        w.writerow([_fmt(getattr(r, f.name)) for f in fields(SummaryRow)])
    return buf.getvalue()


def format_table(rows) -> str:
    """Plain-text table with aligned columns; percentages to 3 decimals."""
    head = ["group", "variant", "runs", "fail", "mean %", "min %", "max %", "sd %", "time s"]
    body = [
        [r.group, r.variant, str(r.runs), str(r.failures),
         f"{r.mean_percent_error:.3f}", f"{r.min_percent_error:.3f}",
         f"{r.max_percent_error:.3f}", f"{r.stddev_percent_error:.3f}",
         f"{r.mean_wall_clock_s:.3f}"]
        for r in rows
    ]
    widths = [max(len(c[i]) for c in [head] + body) for i in range(len(head))]
    lines = []
    for k, cells in enumerate([head] + body):
        parts = [c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))]
        lines.append("  ".join(parts).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
