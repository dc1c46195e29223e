"""Numerical verification of closed-form claims about toric scalar-flat Kähler surfaces.

Layers, bottom up: :mod:`jets` (truncated Taylor arithmetic), :mod:`dsl`
(chart language), :mod:`tensors` (curvature and forms),
:mod:`complex_geometry` (Hermitian structures), :mod:`catalog` and
:mod:`suites` (built-in surfaces and their identity checks), and
:mod:`runner` / :mod:`cli` (sampling and reports).
"""

__version__ = "0.1.0"

from .dsl import ChartSpec, parse_chart, print_chart  # noqa: E402
from .catalog import get_chart  # noqa: E402
from .runner import CheckReport, emit_report, run_suite, sample_points  # noqa: E402

__all__ = ["ChartSpec", "parse_chart", "print_chart", "get_chart", "CheckReport", "emit_report",
           "run_suite", "sample_points", "__version__"]
