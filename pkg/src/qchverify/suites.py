"""Named identity suites: each catalog claim bound to a residual check.

A check is a function of a :class:`PointContext` returning a residual (or
an :class:`Outcome` with a note). Ordinary checks pass when the residual
is at most the tolerance. Negative controls (``expect="above"``) pass when
the residual exceeds it, i.e. when the detector fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from . import catalog, jets
from . import complex_geometry as cg
from . import tensors as T
from .errors import ContractError, UnknownChartError
from .tensors import FormValue, exterior_derivative, normalized, wedge

DEFAULT_TOL = 1e-8
KILLING_TOL = 1e-10
QCH_TOL = 1e-7
CONTROL_TOL = 1e-3
# a one-percent change of dJ leaves a normalized Nijenhuis residual near 1e-3, not above it
NIJENHUIS_CONTROL_TOL = 1e-4


@dataclass
class Outcome:
    residual: float
    note: str = ""


@dataclass(frozen=True)
class Check:
    check_id: str
    fn: Callable
    tolerance: float = DEFAULT_TOL
    tags: tuple = ()
    expect: str = "below"
    description: str = ""

    def passed(self, residual: float, tolerance: float | None = None) -> bool:
        tol = self.tolerance if tolerance is None else tolerance
        if not math.isfinite(residual):
            return False
        return residual <= tol if self.expect == "below" else residual > tol


class PointContext:
    """Lazily computed geometry at one sample point, shared by all checks."""

    def __init__(self, chart, point, order: int = 2, seed: int = 0):
        self.chart = chart
        self.point = np.asarray(point, dtype=float)
        self.order = order
        self.seed = seed
        self.ev = chart.at(self.point, order)

    @cached_property
    def pack(self):
        return T.curvature_pack(self.chart, self.point, self.order, self.ev)

    @cached_property
    def gjets(self):
        return T.metric_jets(self.chart, self.point, self.order, self.ev)

    @cached_property
    def ginv(self):
        return T.invert_jet_matrix(self.gjets)

    def form(self, name) -> FormValue:
        return FormValue.from_chart(self.ev, name)

    @cached_property
    def J(self) -> cg.Endo:
        return cg.endo_from_form(self.ginv, self.form("omega_J"))

    @cached_property
    def I(self) -> cg.Endo:
        return cg.endo_from_form(self.ginv, self.form("omega_I"))

    @cached_property
    def Jv(self):
        return self.J.value()

    @cached_property
    def Iv(self):
        return self.I.value()

    def vector_value(self, name):
        return np.array([float(np.real(c.value)) for c in self.ev.vector(name)])

    @cached_property
    def D(self) -> cg.Distribution2:
        if "D1" in self.chart.vector_fields:
            return cg.Distribution2.j_closure(self.vector_value("D1"), self.Jv)
        return cg.Distribution2.from_structures(self.Jv, self.Iv)

    @cached_property
    def D_perp(self) -> cg.Distribution2:
        if "D1perp" in self.chart.vector_fields:
            return cg.Distribution2.j_closure(self.vector_value("D1perp"), self.Jv)
        e = cg.adapted_frame(self.D, self.Jv, self.pack.g)
        return cg.Distribution2(e[:, 2], e[:, 3])

    @cached_property
    def I_opposite(self):
        return cg.opposite_structure(self.Jv, self.D, self.pack.g)

    @cached_property
    def ricci_report(self):
        return cg.ricci_form_checks(self.pack, self.Jv, self.Iv, self.form("omega_I").dense())

    def complex_point(self):
        x1, y1, x2, y2 = self.point
        return complex(x1, y1), complex(x2, y2)


# ---------------------------------------------------------------------------
# check bodies shared by all surface charts


def _scalar_flat(ctx):
    p = ctx.pack
    return abs(p.scalar) / (1 + p.riemann_norm())


def _ricci_flat(ctx):
    p = ctx.pack
    return p.ricci_norm() / (1 + p.riemann_norm())


def _kahler_closed(ctx):
    w = ctx.form("omega_J")
    return normalized(exterior_derivative(w).components(), w.components())


def _kahler_nijenhuis(ctx):
    return cg.nijenhuis_residual(ctx.J)


def _kahler_parallel(ctx):
    nabla = T.covariant_derivative_endomorphism(ctx.pack.gamma, ctx.J.jets)
    return normalized(nabla, ctx.Jv)


def _j_orthogonal(ctx):
    return max(cg.square_residual(ctx.Jv), cg.compatibility_residual(ctx.Jv, ctx.pack.g))


def _killing(name):
    def fn(ctx):
        return normalized(T.lie_derivative_metric(ctx.chart, name, ctx.point, ctx.order, ctx.ev), ctx.pack.g)
    return fn


def _potential(vec, mu):
    def fn(ctx):
        grad = ctx.pack.g_inv @ np.real(ctx.ev.scalar(mu).gradient())
        x = ctx.vector_value(vec)
        return normalized(x - ctx.Jv @ grad, x)
    return fn


def _opposite_structure(ctx):
    I, g = ctx.Iv, ctx.pack.g
    wi = cg.fundamental_form(I, g)
    wj = cg.fundamental_form(ctx.Jv, g)
    return max(cg.square_residual(I), cg.compatibility_residual(I, g), cg.orientation_residual(wi, wj))


def _opposite_matches(ctx):
    return normalized(ctx.I_opposite - ctx.Iv, ctx.Iv)


def _integrable_i(ctx):
    return cg.nijenhuis_residual(ctx.I)


def _lee_solvable(ctx):
    s = cg.lee_form_solve(ctx.form("omega_I"))
    theta = ", ".join(f"{c:.6g}" for c in s.coefficients)
    return Outcome(s.residual, f"theta=({theta})" + ("; rank deficient" if s.rank_deficient else ""))


def _qch(ctx):
    res = cg.qch_residual(ctx.pack, ctx.Jv, ctx.D, 50, ctx.seed)
    if res <= QCH_TOL:
        return Outcome(res, "D")
    alt = cg.qch_residual(ctx.pack, ctx.Jv, ctx.D_perp, 50, ctx.seed)
    if alt <= QCH_TOL:
        return Outcome(alt, "D-perp")
    return Outcome(min(res, alt), "neither")


def _gray2(ctx):
    return cg.gray2_residual(ctx.pack, ctx.Iv, 20, ctx.seed)


def _ricci_invariant(ctx):
    r = ctx.ricci_report
    return Outcome(r.inv_residual, "vacuous: Ricci-flat" if r.vacuous else "")


def _ricci_proportional(ctx):
    r = ctx.ricci_report
    return Outcome(r.prop_residual, "vacuous: Ricci-flat" if r.vacuous else f"lambda={r.lam:.12g}")


def _wminus_degenerate(ctx):
    res, vacuous = cg.asd_degeneracy(ctx.pack)
    return Outcome(res, "vacuous: W- = 0" if vacuous else "")


def _wplus_vanishes(ctx):
    p = ctx.pack
    return float(np.max(np.abs(p.sd_eigenvalues)) / (1 + p.riemann_norm()))


def _omega_i_eigenform(ctx):
    res, vacuous = cg.asd_degeneracy(ctx.pack)
    if vacuous:
        return Outcome(0.0, "vacuous: W- = 0")
    return cg.weyl_eigenform_residual(ctx.pack, ctx.form("omega_I").dense())


def _calabi(sign):
    def fn(ctx):
        s = cg.calabi_residual(ctx.form("omega_J"), ctx.form("omega_I"), sign)
        return Outcome(s.residual, "degenerate" if s.degenerate else "")
    return fn


def _calabi_phi(sign, scalar):
    """The claimed Calabi 1-form ``d(scalar)`` solves the Calabi equation."""
    def fn(ctx):
        phi = np.real(ctx.ev.scalar(scalar).gradient())
        res = cg.calabi_form_residual(ctx.form("omega_J"), ctx.form("omega_I"), sign, phi)
        s = cg.calabi_residual(ctx.form("omega_J"), ctx.form("omega_I"), sign)
        return Outcome(res, "phi unique modulo the annihilator of the form" if s.rank_deficient else "")
    return fn


def _display_endo(ctx):
    shown = T.values(ctx.ev.endo("I"))
    return normalized(shown - ctx.Iv, ctx.Iv)


def _display_square(ctx):
    shown = T.values(ctx.ev.endo("I"))
    return cg.square_residual(shown)


# ---------------------------------------------------------------------------
# chart-specific bodies


def _orthotoric_params(chart):
    p = chart.params
    return catalog.OrthotoricParams(p["A"], p["a"], p["b"], p["c"], p["d"], p["p3"])


def _hermitian_norms(ctx):
    g = ctx.pack.g
    x1, x2 = ctx.vector_value("X1"), ctx.vector_value("X2")
    got = np.array([x1 @ g @ x1, x1 @ g @ x2, x2 @ g @ x2])
    want = np.array([float(ctx.ev.scalar(n).value) for n in ("norm11", "norm12", "norm22")])
    return normalized(got - want, want)


def _orbit_area(ctx):
    g = ctx.pack.g
    x1, x2 = ctx.vector_value("X1"), ctx.vector_value("X2")
    gram = (x1 @ g @ x1) * (x2 @ g @ x2) - (x1 @ g @ x2) ** 2
    want = float(ctx.ev.scalar("area2").value)
    return abs(gram - want) / (1 + abs(want))


def _conformal(ctx, M_scale=1.0):
    return catalog.conformal_factor_residual(_orthotoric_params(ctx.chart), ctx.point[0], ctx.point[1], M_scale)


def _dictionary(ctx):
    p = _orthotoric_params(ctx.chart)
    return abs(catalog.parameter_dictionary(p.a, p.b, p.c, p.d).consistency + 1.0)


def _volumetric(ctx):
    v = catalog.volumetric_map(_orthotoric_params(ctx.chart), ctx.point[0], ctx.point[1])
    return max(v.radius_residual, v.fg_residual)


def _cauchy_riemann(ctx):
    return catalog.cauchy_riemann_residual(_orthotoric_params(ctx.chart), ctx.point[0], ctx.point[1])


def _cartesian(ctx):
    return catalog.cartesian_crosscheck_residual(ctx.chart, ctx.point)


def _lee_half_plane(ctx):
    s = cg.lee_form_solve(ctx.form("omega_I"))
    expected = np.real(ctx.ev.scalar("lnP").gradient())
    return normalized(s.coefficients - expected, expected)


def _d_omega_i_half_plane(ctx):
    w = ctx.form("omega_I")
    x = ctx.point[0]
    n = ctx.chart.dim
    one = FormValue.one_form([jets.constant(4 * x / (1 + x * x) if i == 0 else 0.0, n, 0) for i in range(n)])
    lhs = exterior_derivative(w).components()
    rhs = wedge(one, w.truncate(0)).components()
    return normalized(lhs - rhs, lhs, w.components())


def _burns_display(ctx):
    z, u = ctx.complex_point()
    return catalog.burns_display(ctx.chart.params["m"], z, u)


def _del_delbar_display(ctx):
    H = cg.del_delbar(ctx.ev, "Phi")
    omega, _, _ = _burns_display(ctx)
    return normalized(H - omega, omega)


def _top(H1, H2):
    return cg.top_coefficient(wedge(cg.hermitian_form(H1), cg.hermitian_form(H2)))


def _omega_squared(ctx):
    omega, _, _ = _burns_display(ctx)
    z, u = ctx.complex_point()
    m = ctx.chart.params["m"]
    want = 2 * (abs(z) ** 2 + m / (1 + abs(u) ** 2))
    return abs(_top(omega, omega) - want) / (1 + abs(want))


def _rho_wedge_rho(ctx):
    omega, rho, _ = _burns_display(ctx)
    z, u = ctx.complex_point()
    m = ctx.chart.params["m"]
    N = abs(z) ** 2 * (1 + abs(u) ** 2) + m
    vol = _top(omega, omega) / 2
    got = _top(rho, rho)
    want = -2 * (m / N ** 2) ** 2 * vol
    return abs(got - want) / (1 + abs(want))


def _omega_wedge_rho(ctx):
    omega, rho, _ = _burns_display(ctx)
    scale = np.linalg.norm(omega) * np.linalg.norm(rho)
    return abs(_top(omega, rho)) / (1 + scale)


def _rho_pipeline(ctx):
    """Curvature-computed Ricci form against the closed form.

    With the real forms stored as ``(i/2) H dz∧dzbar``, the pipeline's
    ``ric(J., .)`` equals ``-2`` times the stored closed-form ``rho``.
    """
    got = cg.ricci_form(ctx.pack, ctx.Jv)
    want = -2.0 * ctx.form("rho").dense()
    return normalized(got - want, want)


# ---------------------------------------------------------------------------
# negative controls


def _control_cubic(ctx):
    cubic = ctx.chart.with_params(p3=0.1)
    pack = T.curvature_pack(cubic, ctx.point, ctx.order)
    return abs(pack.scalar) / (1 + pack.riemann_norm())


def _control_conformal(ctx):
    return _conformal(ctx, 1.01)


def _control_skewed_qch(ctx):
    skew = np.zeros(ctx.chart.dim)
    skew[0] = skew[1] = 1.0
    D = cg.Distribution2.j_closure(skew, ctx.Jv)
    return cg.qch_residual(ctx.pack, ctx.Jv, D, 50, ctx.seed)


def rotated_opposite_structure(J, D, g):
    """An opposite-orientation compatible structure that differs from the opposite structure."""
    P = cg.adapted_frame(D, J, g)
    K0 = np.zeros((4, 4))
    K0[2, 0], K0[0, 2], K0[3, 1], K0[1, 3] = 1.0, -1.0, 1.0, -1.0
    return P @ K0 @ np.linalg.inv(P)


def _control_gray2(ctx):
    K = rotated_opposite_structure(ctx.Jv, ctx.D, ctx.pack.g)
    rn = ctx.pack.riemann_norm()
    if rn == 0:
        return 0.0
    # relative scale so that decaying curvature at large radius does not hide the violation
    return cg.gray2_residual(ctx.pack, K, 20, ctx.seed) * (1 + rn) / rn


def _control_nijenhuis(ctx):
    # centred at the sample point so J^2 = -1 still holds there; scaled with |dJ| so the
    # perturbation is not swamped by the normalization where J varies quickly
    n = ctx.chart.dim
    e = [row[:] for row in ctx.J.jets]
    bump = jets.seed_variable(0.0, 0, n, ctx.order) * (0.01 * (1 + np.linalg.norm(ctx.J.derivative())))
    e[0][1] = e[0][1] + bump
    return cg.nijenhuis_residual(cg.Endo(e))


def _control_killing(ctx):
    n = ctx.chart.dim
    X = [jets.seed_variable(ctx.point[0], 0, n, ctx.order) if i == 0 else jets.constant(0.0, n, ctx.order)
         for i in range(n)]
    return normalized(T.lie_derivative_metric(ctx.chart, X, ctx.point, ctx.order, ctx.ev), ctx.pack.g)


# ---------------------------------------------------------------------------
# suite assembly


def _common(chart) -> list[Check]:
    out = [
        Check("scalar_flat", _scalar_flat, DEFAULT_TOL, ("curvature",), description="normalized |scal|"),
        Check("kahler_closed", _kahler_closed, KILLING_TOL, ("kahler",), description="d omega_J = 0"),
        Check("kahler_nijenhuis", _kahler_nijenhuis, 1e-9, ("kahler",), description="N_J = 0"),
        Check("kahler_parallel", _kahler_parallel, 1e-9, ("kahler",), description="nabla J = 0"),
        Check("kahler_orthogonal", _j_orthogonal, KILLING_TOL, ("kahler",), description="J^2 = -1, g(J., J.) = g"),
    ]
    for vec, mu in (("X1", "mu1"), ("X2", "mu2")):
        if vec in chart.vector_fields:
            out.append(Check(f"killing_{vec}", _killing(vec), KILLING_TOL, ("killing",),
                             description=f"L_{vec} g = 0"))
            if mu in chart.scalars:
                out.append(Check(f"potential_{vec}", _potential(vec, mu), 1e-9, ("killing",),
                                 description=f"{vec} = J grad {mu}"))
    out += [
        Check("opposite_structure", _opposite_structure, KILLING_TOL, ("structure",),
              description="I^2 = -1, g-compatible, reversed orientation"),
        Check("opposite_matches_form", _opposite_matches, KILLING_TOL, ("structure",),
              description="I built from D and J equals the structure of omega_I"),
        Check("integrable_I", _integrable_i, 1e-9, ("structure",), description="N_I = 0"),
        Check("lee_solvable", _lee_solvable, DEFAULT_TOL, ("lee-calabi",),
              description="d omega_I = 2 theta ^ omega_I is solvable"),
        Check("qch", _qch, QCH_TOL, ("qch",), description="K(X) depends only on |X_D|"),
        Check("gray2", _gray2, QCH_TOL, ("qch",), description="second Gray identity for I"),
        Check("ricci_I_invariant", _ricci_invariant, DEFAULT_TOL, ("ricci",), description="rho(I., I.) = rho"),
        Check("ricci_proportional", _ricci_proportional, DEFAULT_TOL, ("ricci",),
              description="rho is proportional to omega_I"),
        Check("wminus_degenerate", _wminus_degenerate, 1e-6, ("weyl",),
              description="W- has a repeated eigenvalue"),
        Check("wplus_vanishes", _wplus_vanishes, DEFAULT_TOL, ("weyl",),
              description="W+ = 0 for a scalar-flat Kahler metric"),
        Check("omega_I_weyl_eigenform", _omega_i_eigenform, DEFAULT_TOL, ("weyl",),
              description="omega_I is an eigenform of W-"),
    ]
    return out


def _controls(chart, other_sign=None) -> list[Check]:
    c = ("control",)
    out = [
        Check("control_gray2_rotated", _control_gray2, CONTROL_TOL, c, "above",
              "G2 fails for a rotated opposite structure"),
        Check("control_nijenhuis_perturbed", _control_nijenhuis, NIJENHUIS_CONTROL_TOL, c, "above",
              "perturbed J is not integrable"),
        Check("control_killing_radial", _control_killing, CONTROL_TOL, c, "above",
              "x0 d/dx0 is not Killing"),
    ]
    if other_sign:
        out.append(Check(f"control_calabi_{other_sign}", _calabi(other_sign), CONTROL_TOL, c, "above",
                         "Calabi condition fails with the other sign"))
    return out


def identity_suite(chart_name: str, chart=None, controls: bool = False) -> list[Check]:
    """Ordered checks for a catalog chart (or a user chart reusing a catalog name)."""
    if chart_name not in catalog.SURFACE_CHARTS:
        raise UnknownChartError(chart_name)
    chart = chart if chart is not None else catalog.get_chart(chart_name)
    checks = _common(chart)
    ctl = []
    if chart_name == "orthotoric":
        checks += [
            Check("hermitian_norms", _hermitian_norms, KILLING_TOL, ("killing",),
                  description="g(X_i, X_j) closed forms"),
            Check("orbit_area", _orbit_area, KILLING_TOL, ("killing",),
                  description="|X1|^2 |X2|^2 - <X1, X2>^2 = -FG"),
        ]
        linear = chart.params.get("A", 0.0) == 0.0 and chart.params.get("p3", 0.0) == 0.0
        if linear:
            checks += [
                Check("conformal_factor", _conformal, KILLING_TOL, ("isometry",),
                      description="orthotoric and Taub-NUT orbit metrics agree"),
                Check("dictionary_consistency", _dictionary, 1e-11, ("isometry",),
                      description="2 alpha M (k e + gamma) = -1"),
                Check("volumetric_identities", _volumetric, 1e-12, ("isometry",),
                      description="radius and c^2 F - a^2 G identities"),
                Check("cauchy_riemann", _cauchy_riemann, DEFAULT_TOL, ("isometry",),
                      description="y + i x holomorphic in isothermal coordinates"),
            ]
        ctl = _controls(chart) + [
            Check("control_cubic_scalar_flat", _control_cubic, CONTROL_TOL, ("control",), "above",
                  "0.1 xi^3 added to F breaks scalar flatness"),
            Check("control_calabi_plus", _calabi("plus"), CONTROL_TOL, ("control",), "above",
                  "orthotoric charts are not of Calabi type"),
            Check("control_calabi_minus", _calabi("minus"), CONTROL_TOL, ("control",), "above",
                  "orthotoric charts are not of Calabi type"),
            Check("control_qch_skewed", _control_skewed_qch, CONTROL_TOL, ("control",), "above",
                  "a skewed plane is not the QCH distribution"),
        ]
        if linear:
            ctl.append(Check("control_conformal_perturbed_M", _control_conformal, CONTROL_TOL, ("control",),
                             "above", "M scaled by 1.01 breaks the isometry"))
    elif chart_name == "taubnut":
        checks.append(Check("cartesian_metric", _cartesian, KILLING_TOL, ("cartesian",),
                            description="Cartesian components match the polar chart"))
        if chart.params.get("k") == 0.0:
            checks.append(Check("ricci_flat", _ricci_flat, DEFAULT_TOL, ("curvature",),
                                description="k = 0 is hyperkahler"))
        ctl = _controls(chart)
    elif chart_name == "exceptional-taubnut":
        checks += [
            Check("I_display_matches", _display_endo, KILLING_TOL, ("structure",),
                  description="displayed I equals the structure of omega_I"),
            Check("I_display_square", _display_square, 1e-12, ("structure",), description="I^2 = -1"),
            Check("calabi_plus", _calabi("plus"), DEFAULT_TOL, ("lee-calabi",),
                  description="d(omega_J + omega_I) = phi ^ (omega_J + omega_I)"),
            Check("calabi_phi", _calabi_phi("plus", "lnP"), DEFAULT_TOL, ("lee-calabi",),
                  description="phi = d ln(1 + 2u^2)"),
        ]
        ctl = _controls(chart, "minus")
    elif chart_name == "half-plane":
        checks += [
            Check("I_display_matches", _display_endo, KILLING_TOL, ("structure",),
                  description="displayed I equals the structure of omega_I"),
            Check("I_display_square", _display_square, 1e-12, ("structure",), description="I^2 = -1"),
            Check("lee_form", _lee_half_plane, DEFAULT_TOL, ("lee-calabi",), description="theta = d ln(1 + x^2)"),
            Check("d_omega_I", _d_omega_i_half_plane, KILLING_TOL, ("lee-calabi",),
                  description="d omega_I = 4x/(1+x^2) dx ^ omega_I"),
            Check("calabi_minus", _calabi("minus"), DEFAULT_TOL, ("lee-calabi",),
                  description="d(omega_J - omega_I) = phi ^ (omega_J - omega_I)"),
            Check("calabi_phi", _calabi_phi("minus", "lnP"), DEFAULT_TOL, ("lee-calabi",),
                  description="phi = d ln(1 + x^2)"),
        ]
        ctl = _controls(chart, "plus")
    elif chart_name == "burns":
        cf = ("complex-forms",)
        checks += [
            Check("del_delbar_display", _del_delbar_display, 1e-10, cf,
                  description="mixed Hessian of the potential equals the omega display"),
            Check("omega_squared", _omega_squared, 1e-9, cf, description="omega^2 top coefficient"),
            Check("rho_wedge_rho", _rho_wedge_rho, 1e-9, cf, description="rho^2 = -2 (m/N^2)^2 vol"),
            Check("omega_wedge_rho", _omega_wedge_rho, 1e-10, cf, description="omega ^ rho = 0"),
            Check("rho_pipeline", _rho_pipeline, 1e-7, cf, description="curvature Ricci form equals closed form"),
            Check("calabi_minus", _calabi("minus"), DEFAULT_TOL, cf + ("lee-calabi",),
                  description="d(omega_J - omega_I) = phi ^ (omega_J - omega_I)"),
            Check("calabi_phi", _calabi_phi("minus", "lnN"), DEFAULT_TOL, cf + ("lee-calabi",),
                  description="phi = d ln(|z|^2 + m)"),
        ]
        ctl = _controls(chart, "plus")
    return checks + (ctl if controls else [])


SUITES = ("full", "curvature", "kahler", "killing", "isometry", "cartesian", "structure",
          "lee-calabi", "qch", "ricci", "weyl", "complex-forms", "controls")


def select(checks: list[Check], suite: str, controls: bool = False) -> list[Check]:
    """Checks of ``suite``: ``full`` keeps all, ``controls`` keeps only negative controls."""
    if suite not in SUITES:
        raise ContractError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES)}")
    if suite == "full":
        out = [c for c in checks if "control" not in c.tags]
    elif suite == "controls":
        out = []
    else:
        out = [c for c in checks if suite in c.tags]
    if controls or suite == "controls":
        out += [c for c in checks if "control" in c.tags and c not in out]
    return out
