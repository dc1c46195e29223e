"""Point sampling, suite execution and report serialization."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, catalog
from .dsl import ChartSpec, parse_chart
from .errors import ContractError, DomainError, VerifierError
from .suites import Outcome, PointContext, identity_suite, select

MAX_REJECTION = 0.99


# ---------------------------------------------------------------------------
# sampling


def _box(chart: ChartSpec):
    """Per-coordinate sampler callables in coordinate order."""
    rules = {}
    for rule in chart.samples:
        lo, hi = chart.param_value(rule.low), chart.param_value(rule.high)
        if not hi > lo:
            raise DomainError(f"empty sampling range for {' '.join(rule.coords)}")
        for c in rule.coords:
            rules[c] = (rule, lo, hi)
    return rules


def sample_points(chart: ChartSpec, n: int, seed: int, margin: float = 1e-3) -> list[np.ndarray]:
    """Uniform points from the chart's sampling box, at least ``margin`` inside every constraint.

    Coordinates without a ``sample`` rule are drawn from ``(-1, 1)``.
    ``polar`` rules draw a radius uniformly in the range and a uniform phase.
    """
    if n < 1:
        raise ContractError("need at least one sample point")
    rules = _box(chart)
    rng = np.random.default_rng(seed)
    out, attempts = [], 0
    limit = max(100 * n, 1000)
    while len(out) < n:
        if attempts >= limit:
            raise DomainError(
                f"domain too thin: accepted {len(out)} of {attempts} draws (rejection above {MAX_REJECTION:.0%})")
        attempts += 1
        point = np.zeros(chart.dim)
        done = set()
        for i, name in enumerate(chart.coords):
            if name in done:
                continue
            rule = rules.get(name)
            if rule is None:
                point[i] = rng.uniform(-1.0, 1.0)
            elif rule[0].mode == "range":
                point[i] = rng.uniform(rule[1], rule[2])
            else:
                r = rng.uniform(rule[1], rule[2])
                phase = rng.uniform(0.0, 2 * math.pi)
                a, b = (chart.coords.index(c) for c in rule[0].coords)
                point[a], point[b] = r * math.cos(phase), r * math.sin(phase)
                done.update(rule[0].coords)
        try:
            vals = chart.domain_values(point)
        except (VerifierError, ArithmeticError, ValueError):
            continue
        if np.all(vals > margin):
            out.append(point)
    return out


# ---------------------------------------------------------------------------
# reports


@dataclass
class Entry:
    check_id: str
    point_index: int
    point: list
    residual: float
    tolerance: float
    expect: str
    passed: bool
    note: str = ""


@dataclass
class CheckReport:
    suite: str
    chart: str
    params: dict
    seed: int
    n_points: int
    order: int
    entries: list = field(default_factory=list)
    tool_version: str = __version__
    chart_file_hash: str = ""

    @property
    def summary(self) -> dict:
        n_pass = sum(e.passed for e in self.entries)
        finite = [e.residual for e in self.entries if e.expect == "below" and math.isfinite(e.residual)]
        return {"n_pass": n_pass, "n_fail": len(self.entries) - n_pass,
                "max_residual": max(finite, default=0.0)}

    @property
    def ok(self) -> bool:
        return self.summary["n_fail"] == 0

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "entries"}
        d["entries"] = [asdict(e) for e in self.entries]
        d["summary"] = self.summary
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CheckReport":
        d = dict(d)
        d.pop("summary", None)
        entries = [Entry(**{**e, "residual": _from_json_float(e["residual"])}) for e in d.pop("entries")]
        return cls(entries=entries, **d)

    def by_check(self) -> dict:
        out = {}
        for e in self.entries:
            out.setdefault(e.check_id, []).append(e)
        return out


def _from_json_float(x):
    if x is None:
        return float("nan")
    return float(x)


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _canonical_json(obj, indent=0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _fmt(obj)
    if isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_canonical_json(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_canonical_json(v) for v in obj) + "]"
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _canonical_json(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def report_text(report: CheckReport, fmt: str) -> str:
    if fmt == "json":
        return _canonical_json(report.to_dict()) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check_id", "point_index", "point", "residual", "tolerance", "expect", "pass", "note"])
        for e in report.entries:
            w.writerow([e.check_id, e.point_index, " ".join(_fmt(x) for x in e.point), _fmt(e.residual),
                        _fmt(e.tolerance), e.expect, "true" if e.passed else "false", e.note])
        return buf.getvalue()
    if fmt == "markdown":
        s = report.summary
        params = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(report.params.items())) or "none"
        lines = [
            f"# {report.chart}: suite `{report.suite}`", "",
            f"- parameters: {params}",
            f"- seed {report.seed}, {report.n_points} points, jet order {report.order}",
            f"- passed {s['n_pass']}, failed {s['n_fail']}, max residual {_fmt(s['max_residual'])}",
            f"- chart hash `{report.chart_file_hash}`, tool version {report.tool_version}", "",
            "| check | expect | tolerance | max residual | min residual | failures |",
            "|---|---|---|---|---|---|",
        ]
        for cid, entries in report.by_check().items():
            res = [e.residual for e in entries]
            finite = [r for r in res if math.isfinite(r)]
            mx = _fmt(max(finite)) if finite else "null"
            mn = _fmt(min(finite)) if finite else "null"
            fails = sum(not e.passed for e in entries)
            lines.append(f"| {cid} | {entries[0].expect} | {_fmt(entries[0].tolerance)} | {mx} | {mn} | {fails} |")
        return "\n".join(lines) + "\n"
    raise ContractError(f"unknown report format {fmt!r}")


def emit_report(report: CheckReport, fmt: str = "json", path=None) -> str:
    """Serialize ``report``; writes to ``path`` when given and returns the text."""
    text = report_text(report, fmt)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def load_report(path) -> CheckReport:
    with open(path, encoding="utf-8") as fh:
        return CheckReport.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# execution


def resolve_chart(chart_ref: str, params: dict | None = None) -> tuple[str, ChartSpec]:
    """A catalog name or a path to a chart file; returns ``(suite name, chart)``."""
    params = params or {}
    if os.path.isfile(chart_ref):
        with open(chart_ref, encoding="utf-8") as fh:
            chart = parse_chart(fh.read())
        if params:
            chart = chart.with_params(**params)
        return chart.name, chart
    return chart_ref, catalog.get_chart(chart_ref, **params)


def _point_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _evaluate_point(args):
    chart, suite_name, check_ids, index, point, order, seed, controls, tolerances = args
    checks = {c.check_id: c for c in identity_suite(suite_name, chart, controls=True)}
    out = []
    try:
        ctx = PointContext(chart, point, order, _point_seed(seed, index))
    except (VerifierError, ArithmeticError, ValueError) as exc:
        ctx, err = None, f"{type(exc).__name__}: {exc}"
    for cid in check_ids:
        check = checks[cid]
        tol = tolerances.get(cid, check.tolerance)
        note = ""
        if ctx is None:
            residual, note = float("nan"), err
        else:
            try:
                r = check.fn(ctx)
                if isinstance(r, Outcome):
                    residual, note = float(r.residual), r.note
                else:
                    residual = float(r)
            except (VerifierError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
                residual, note = float("nan"), f"{type(exc).__name__}: {exc}"
        out.append(Entry(cid, index, [float(x) for x in point], residual, float(tol), check.expect,
                         check.passed(residual, tol), note))
    return out


def run_suite(chart_ref, suite: str = "full", n_points: int = 20, seed: int = 0,
              tolerance_overrides: dict | None = None, order: int = 2, controls: bool = False,
              params: dict | None = None, workers: int = 1, margin: float = 1e-3) -> CheckReport:
    """Run ``suite`` on sampled points and collect a :class:`CheckReport`.

    ``chart_ref`` is a catalog name, a chart-file path or a :class:`ChartSpec`.
    """
    if order not in (2, 3):
        raise ContractError("jet order must be 2 or 3")
    if isinstance(chart_ref, ChartSpec):
        name, chart = chart_ref.name, chart_ref
    else:
        name, chart = resolve_chart(chart_ref, params)
    checks = select(identity_suite(name, chart, controls=True), suite, controls)
    tolerances = dict(tolerance_overrides or {})
    unknown = set(tolerances) - {c.check_id for c in checks}
    if unknown:
        raise ContractError(f"tolerance override for unknown check(s): {sorted(unknown)}")
    points = sample_points(chart, n_points, seed, margin)
    ids = [c.check_id for c in checks]
    jobs = [(chart, name, ids, i, p, order, seed, controls, tolerances) for i, p in enumerate(points)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_evaluate_point, jobs))
    else:
        results = [_evaluate_point(j) for j in jobs]
    entries = sorted((e for r in results for e in r), key=lambda e: (e.check_id, e.point_index))
    return CheckReport(suite, name, dict(sorted(chart.params.items())), seed, n_points, order, entries,
                       chart_file_hash=chart.file_hash)
