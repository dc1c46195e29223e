"""Hermitian structures, Nijenhuis and Lee forms, QCH and Gray conditions, Wirtinger layer."""

import math

import numpy as np
import pytest

from qchverify import catalog, jets
from qchverify import complex_geometry as cg
from qchverify import tensors as T
from qchverify.dsl import parse_chart
from qchverify.errors import ContractError
from qchverify.runner import sample_points
from qchverify.suites import PointContext
from qchverify.tensors import FormValue

ALL_SURFACES = [(name, params) for name in catalog.SURFACE_CHARTS
             for params in catalog.default_parameter_sets(name)]

J0 = np.array([[0, -1, 0, 0], [1, 0, 0, 0], [0, 0, 0, -1], [0, 0, 1, 0.0]])


def _ctx(name, point=None, seed=0, check_domain=True, **params):
    ch = catalog.get_chart(name, **params)
    if point is None:
        point = sample_points(ch, 1, seed)[0]
    if not check_domain:
        ctx = PointContext.__new__(PointContext)
        ctx.chart, ctx.point, ctx.order, ctx.seed = ch, np.asarray(point, float), 2, 0
        ctx.ev = ch.at(ctx.point, 2, check_domain=False)
        return ctx
    return PointContext(ch, point, 2, 0)


# ---------------------------------------------------------------------------
# structures from forms


def test_flat_structure_is_standard():
    ctx = _ctx("flat", [0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(ctx.Jv, J0)
    np.testing.assert_array_equal(ctx.Jv @ ctx.Jv, -np.eye(4))


def test_half_plane_opposite_structure_on_theta1():
    for seed in range(5):
        ctx = _ctx("half-plane", seed=seed)
        x = ctx.point[0]
        col = ctx.Iv[:, 2]
        np.testing.assert_allclose(col, [-x / (1 + x * x), 0, 0, 0], atol=1e-15)


def test_exceptional_display_squares_to_minus_one():
    ctx = _ctx("exceptional-taubnut", seed=3)
    Idisp = T.values(ctx.ev.endo("I"))
    du = np.eye(4)[0]
    np.testing.assert_allclose(Idisp @ (Idisp @ du), -du, atol=1e-12)
    np.testing.assert_allclose(Idisp, ctx.Iv, atol=1e-12)


@pytest.mark.parametrize("name, params", ALL_SURFACES)
def test_structures_are_hermitian(name, params):
    ch = catalog.get_chart(name, **params)
    for p in sample_points(ch, 10, seed=21):
        ctx = PointContext(ch, p)
        g = ctx.pack.g
        for E in (ctx.Jv, ctx.Iv, ctx.I_opposite):
            assert cg.square_residual(E) < 1e-12
            assert cg.compatibility_residual(E, g) < 1e-12
        assert cg.orientation_residual(ctx.form("omega_I").dense(), ctx.form("omega_J").dense()) < 1e-10


# ---------------------------------------------------------------------------
# Nijenhuis tensor


def test_constant_structure_is_integrable():
    assert cg.nijenhuis_residual(cg.Endo.constant(J0)) == 0.0


def test_half_plane_opposite_structure_is_integrable():
    ch = catalog.get_chart("half-plane")
    for p in sample_points(ch, 20, seed=2):
        assert cg.nijenhuis_residual(cg.Endo(ch.at(p, 2).endo("I"))) < 1e-9


def test_perturbed_structure_is_not_integrable():
    p = np.array([0.4, -0.3, 0.2, 0.7])
    x0 = jets.seed_variable(p[0], 0, 4, 1)
    e = cg.Endo.constant(J0).jets
    e[2][3] = e[2][3] + x0 * 0.01  # add 0.01*x to one component
    assert cg.nijenhuis_residual(cg.Endo(e)) > 1e-4


def test_nijenhuis_of_kahler_structure_vanishes():
    ctx = _ctx("taubnut", seed=1, k=0.5, M=0.5)
    assert cg.nijenhuis_residual(ctx.J) < 1e-12


# ---------------------------------------------------------------------------
# Lee form and Calabi condition


def test_lee_form_of_closed_form_vanishes():
    ctx = _ctx("orthotoric", seed=4)
    sol = cg.lee_form_solve(ctx.form("omega_J"))
    assert np.abs(sol.coefficients).max() < 1e-10
    assert sol.residual < 1e-10


def test_half_plane_lee_form_at_x_equal_one():
    ctx = _ctx("half-plane", [1.0, 0.3, 0.2, 0.1])
    sol = cg.lee_form_solve(ctx.form("omega_I"))
    np.testing.assert_allclose(sol.coefficients, [1.0, 0, 0, 0], atol=1e-12)
    assert sol.residual < 1e-12


def test_exceptional_calabi_plus():
    ch = catalog.get_chart("exceptional-taubnut")
    for p in sample_points(ch, 10, seed=5):
        ctx = PointContext(ch, p)
        sol = cg.calabi_residual(ctx.form("omega_J"), ctx.form("omega_I"), "plus")
        u = p[0]
        assert sol.residual < 1e-8
        np.testing.assert_allclose(sol.coefficients, [4 * u / (1 + 2 * u * u), 0, 0, 0], atol=1e-8)


def test_exceptional_half_sum_coefficient():
    ctx = _ctx("exceptional-taubnut", [1.0, 1.0, 0.0, 0.0])
    phi = (ctx.form("omega_J") + ctx.form("omega_I")) * 0.5
    assert phi.coeffs[(1, 2)].value == pytest.approx(3 * math.sqrt(2), rel=1e-15)


def test_burns_calabi_minus_by_substitution():
    ch = catalog.get_chart("burns", m=1)
    for p in sample_points(ch, 10, seed=6):
        ctx = PointContext(ch, p)
        wj, wi = ctx.form("omega_J"), ctx.form("omega_I")
        assert cg.calabi_residual(wj, wi, "minus").residual < 1e-8
        phi = ctx.ev.scalar("lnN").gradient()
        assert cg.calabi_form_residual(wj, wi, "minus", phi) < 1e-8
        assert cg.calabi_form_residual(wj, wi, "minus", 1.1 * phi) > 1e-3


@pytest.mark.parametrize("sign", ["plus", "minus"])
def test_orthotoric_is_not_calabi(sign):
    ctx = _ctx("orthotoric", seed=7, a=2, b=0, c=1, d=1)
    assert cg.calabi_residual(ctx.form("omega_J"), ctx.form("omega_I"), sign).residual > 1e-3


def test_calabi_sign_is_checked():
    ctx = _ctx("flat", [0, 0, 0, 0])
    with pytest.raises(ContractError):
        cg.calabi_residual(ctx.form("omega_J"), ctx.form("omega_J"), "both")


# ---------------------------------------------------------------------------
# holomorphic sectional curvature and the QCH property


def test_flat_holomorphic_curvature():
    ctx = _ctx("flat", [0.2, 0.1, 0.0, 0.3])
    rng = np.random.default_rng(0)
    for _ in range(10):
        assert cg.holomorphic_sectional_curvature(ctx.pack, ctx.Jv, rng.normal(size=4)) == 0.0


def test_sphere_factor_holomorphic_curvature():
    ctx = _ctx("sphere-product", [1.0, 0.4, 1.2, 0.3], r1=1.0, r2=2.0)
    assert cg.holomorphic_sectional_curvature(ctx.pack, ctx.Jv, [1, 0, 0, 0]) == pytest.approx(1.0, rel=1e-12)
    assert cg.holomorphic_sectional_curvature(ctx.pack, ctx.Jv, [0, 0, 1, 0]) == pytest.approx(0.25, rel=1e-12)


def test_qch_flat():
    ctx = _ctx("flat", [0.2, 0.1, 0.0, 0.3])
    D = cg.Distribution2.j_closure([0.3, 0.5, -1.0, 0.2], ctx.Jv)
    assert cg.qch_residual(ctx.pack, ctx.Jv, D) == 0.0


def test_qch_orthotoric():
    ch = catalog.get_chart("orthotoric", a=1, b=0, c=1, d=1)
    for p in sample_points(ch, 10, seed=8):
        ctx = PointContext(ch, p)
        D = cg.Distribution2.j_closure([1.0, 0, 0, 0], ctx.Jv)
        assert cg.qch_residual(ctx.pack, ctx.Jv, D, 50, seed=1) < 1e-7
        # rescaling the spanning vectors does not change the plane
        base = cg.qch_residual(ctx.pack, ctx.Jv, D, 20, seed=2)
        assert abs(cg.qch_residual(ctx.pack, ctx.Jv, D.scaled(7.3, 7.3), 20, seed=2) - base) < 1e-12


def test_qch_rejects_non_invariant_plane():
    ctx = _ctx("orthotoric", seed=9)
    skew = cg.Distribution2(np.array([1.0, 0, 0, 0]), np.array([0, 0, 1.0, 0]))
    with pytest.raises(ContractError):
        cg.qch_residual(ctx.pack, ctx.Jv, skew)
    with pytest.raises(ContractError):
        cg.qch_residual(ctx.pack, ctx.Jv, cg.Distribution2(np.ones(4), 2 * np.ones(4)))


def test_qch_fails_on_the_wrong_plane():
    # a J-invariant plane that is neither D nor its complement
    ctx = _ctx("orthotoric", seed=10, a=2, b=0, c=1, d=1)
    D = cg.Distribution2.j_closure([1.0, 1.0, 0, 0], ctx.Jv)
    assert cg.qch_residual(ctx.pack, ctx.Jv, D) > 1e-3


def test_opposite_structure_flat_block_diagonal():
    ctx = _ctx("flat", [0.0, 0.0, 0.0, 0.0])
    D = cg.Distribution2(np.eye(4)[0], np.eye(4)[1])
    I = cg.opposite_structure(ctx.Jv, D, ctx.pack.g)
    expected = J0.copy()
    expected[2:, 2:] *= -1
    np.testing.assert_allclose(I, expected, atol=1e-15)


@pytest.mark.parametrize("name, params", ALL_SURFACES)
def test_opposite_structure_matches_catalog(name, params):
    ch = catalog.get_chart(name, **params)
    for p in sample_points(ch, 10, seed=12):
        ctx = PointContext(ch, p)
        assert np.abs(ctx.I_opposite @ ctx.I_opposite + np.eye(4)).max() < 1e-12
        assert np.abs(ctx.I_opposite - ctx.Iv).max() < 1e-9 * (1 + np.abs(ctx.Iv).max())


def test_gray2_flat_and_orthotoric():
    ctx = _ctx("flat", [0.0, 0.0, 0.0, 0.0])
    assert cg.gray2_residual(ctx.pack, ctx.Jv) == 0.0
    ch = catalog.get_chart("orthotoric", a=1, b=1, c=3, d=4)
    for p in sample_points(ch, 10, seed=13):
        ctx = PointContext(ch, p)
        assert cg.gray2_residual(ctx.pack, ctx.Iv) < 1e-7


# ---------------------------------------------------------------------------
# Ricci form and W-


def test_ricci_form_vacuous_cases():
    assert cg.ricci_form_checks(*_pack_structures(_ctx("taubnut", seed=1, k=0.0, M=0.5))).vacuous
    ctx = _ctx("flat", [0.1, 0.2, 0.3, 0.4])
    I = J0.copy()
    I[2:, 2:] *= -1
    assert cg.ricci_form_checks(ctx.pack, ctx.Jv, I, cg.fundamental_form(I, ctx.pack.g)).vacuous


def _pack_structures(ctx):
    return ctx.pack, ctx.Jv, ctx.Iv, ctx.form("omega_I").dense()


def test_burns_ricci_form_proportional():
    ctx = _ctx("burns", [1.0, 0.0, 0.0, 0.0], check_domain=False, m=1)
    rep = cg.ricci_form_checks(*_pack_structures(ctx))
    assert not rep.vacuous
    assert rep.prop_residual < 1e-8
    assert rep.inv_residual < 1e-8


@pytest.mark.parametrize("name, params", [("orthotoric", {"a": 2, "b": 0, "c": 1, "d": 1}),
                                          ("half-plane", {}), ("burns", {"m": 4})])
def test_asd_weyl_degenerate(name, params):
    ch = catalog.get_chart(name, **params)
    for p in sample_points(ch, 10, seed=14):
        pack = PointContext(ch, p).pack
        gap, vacuous = cg.asd_degeneracy(pack)
        assert not vacuous and gap < 1e-6
        assert np.abs(pack.sd_eigenvalues).max() < 1e-8 * (1 + pack.riemann_norm())


# ---------------------------------------------------------------------------
# Wirtinger layer

COMPLEX = """\
chart c2
coords x1 y1 x2 y2
params m=1
let Z = x1^2 + y1^2
let U = x2^2 + y2^2
metric
  g[0,0] = 1
  g[1,1] = 1
  g[2,2] = 1
  g[3,3] = 1
scalar zz = Z
scalar lu = ln(1 + U)
scalar mixed = x1*x2 + y1*y2
scalar Phi = Z*(1 + U) + m*ln(Z*(1 + U))
end
"""


def test_del_delbar_of_modulus_squared():
    ev = parse_chart(COMPLEX).at([0.3, -0.8, 1.1, 0.2])
    np.testing.assert_allclose(cg.del_delbar(ev, "zz"), [[1, 0], [0, 0]], atol=1e-15)


def test_del_delbar_fubini_study():
    p = [0.3, -0.8, 1.1, 0.2]
    U = p[2] ** 2 + p[3] ** 2
    H = cg.del_delbar(parse_chart(COMPLEX).at(p), "lu")
    np.testing.assert_allclose(H, [[0, 0], [0, 1 / (1 + U) ** 2]], atol=1e-15)


def test_del_delbar_is_hermitian():
    # Re(z conj(u)) has mixed terms conj of each other
    H = cg.del_delbar(parse_chart(COMPLEX).at([0.3, -0.8, 1.1, 0.2]), "mixed")
    np.testing.assert_allclose(H, [[0, 0.5], [0.5, 0]], atol=1e-15)
    H = cg.del_delbar(parse_chart(COMPLEX).at([0.3, -0.8, 1.1, 0.2]), "Phi")
    np.testing.assert_allclose(H, H.conj().T, atol=1e-14)


def test_del_delbar_matches_burns_display():
    H = cg.del_delbar(parse_chart(COMPLEX).at([1.0, 0.0, 1.0, 0.0]), "Phi")
    omega, _, _ = catalog.burns_display(1.0, 1 + 0j, 1 + 0j)
    np.testing.assert_allclose(H, omega, atol=1e-10)


def test_burns_top_coefficient():
    omega, _, _ = catalog.burns_display(1.0, 1 + 0j, 0j)
    w = cg.hermitian_form(omega)
    assert cg.top_coefficient(T.wedge(w, w)) == pytest.approx(4.0)


def test_real_two_form_of_flat_hermitian_matrix():
    w = cg.real_two_form(np.eye(2))
    # (i/2) dz ∧ dzbar = dx ∧ dy
    np.testing.assert_allclose(w, -J0, atol=1e-15)
