"""Curvature pipeline and exterior calculus against closed forms and finite differences."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qchverify import catalog, jets
from qchverify import tensors as T
from qchverify.complex_geometry import endo_from_form
from qchverify.dsl import parse_chart
from qchverify.errors import ContractError, DomainError, SingularEvaluationError
from qchverify.runner import sample_points
from qchverify.tensors import FormValue

from oracles import POLY, fd_christoffel as _fd_christoffel, fd_riemann as _fd_riemann, metric_fn as _metric_fn

ALL_CHARTS = [(name, params) for name in catalog.SURFACE_CHARTS + catalog.REFERENCE_CHARTS
              for params in catalog.default_parameter_sets(name)]


ORACLE_CHARTS = [
    ("polar-plane", {}, [2.0, 0.4]),
    ("sphere-product", {"r1": 1.0, "r2": 2.0}, [0.9, 0.3, 1.7, 2.0]),
    ("poly", {}, [0.3, -0.4, 0.5, 0.2]),
]


def _chart(name, params):
    return parse_chart(POLY) if name == "poly" else catalog.get_chart(name, **params)


@pytest.mark.parametrize("name, params, point", ORACLE_CHARTS)
def test_christoffel_against_finite_differences(name, params, point):
    ch = _chart(name, params)
    p = np.array(point)
    gam = T.christoffel(T.metric_jets(ch, p))
    ref = _fd_christoffel(_metric_fn(ch), p)
    assert np.abs(gam - ref).max() <= 1e-5 * (1 + np.abs(ref).max())


@pytest.mark.parametrize("name, params, point", ORACLE_CHARTS)
def test_riemann_against_finite_differences(name, params, point):
    ch = _chart(name, params)
    p = np.array(point)
    pack = T.curvature_pack(ch, p)
    ref = _fd_riemann(_metric_fn(ch), p)
    assert np.abs(pack.riemann_low - ref).max() <= 1e-5 * (1 + np.abs(ref).max())


# ---------------------------------------------------------------------------
# metric jets and inversion


def test_flat_metric_is_identity():
    ch = catalog.get_chart("flat")
    g = T.metric_jets(ch, [0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(T.values(g), np.eye(4))
    assert all(not np.any(x.coeffs[1:]) for row in g for x in row)


def test_orthotoric_tt_entry():
    ch = catalog.get_chart("orthotoric", a=1, b=0, c=1, d=1)
    g = T.values(T.metric_jets(ch, [1.0, -2.0, 0.0, 0.0]))
    assert g[2, 2] == pytest.approx(2 / 3, rel=1e-15)


def test_metric_outside_cone_is_domain_error():
    ch = catalog.get_chart("orthotoric", a=1, b=0, c=1, d=1)
    with pytest.raises(DomainError):
        T.metric_jets(ch, [-0.5, -2.0, 0.0, 0.0])


def _const_matrix(a, order=2):
    return [[jets.constant(float(x), 4, order) for x in row] for row in a]


def test_invert_identity_and_diagonal():
    inv = T.invert_jet_matrix(_const_matrix(np.eye(4)))
    np.testing.assert_array_equal(T.values(inv), np.eye(4))
    inv = T.invert_jet_matrix(_const_matrix(np.diag([2.0, 3.0, 4.0, 5.0])))
    np.testing.assert_allclose(T.values(inv), np.diag([1 / 2, 1 / 3, 1 / 4, 1 / 5]), rtol=1e-15)


def test_invert_singular():
    with pytest.raises(SingularEvaluationError):
        T.invert_jet_matrix(_const_matrix(np.ones((4, 4))))


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=30, deadline=None)
def test_invert_random_spd_jets(seed):
    rng = np.random.default_rng(seed)
    size = jets.layout(4, 2).size
    a = rng.normal(size=(4, 4))
    base = a @ a.T + 4 * np.eye(4)
    m = [[None] * 4 for _ in range(4)]
    for i in range(4):
        for j in range(i, 4):
            c = rng.normal(size=size) * 0.3
            c[0] = base[i, j]
            m[i][j] = m[j][i] = jets.Jet(c, 4, 2)
    prod = T.jet_matmul(m, T.invert_jet_matrix(m))
    ident = _const_matrix(np.eye(4))
    for i in range(4):
        for j in range(4):
            assert np.abs(prod[i][j].coeffs - ident[i][j].coeffs).max() < 1e-12


# ---------------------------------------------------------------------------
# Christoffel symbols and curvature packs


def test_flat_christoffel_vanishes():
    ch = catalog.get_chart("flat")
    assert not np.any(T.christoffel(T.metric_jets(ch, [0.3, 0.1, -0.2, 0.5])))


def test_polar_christoffel():
    ch = catalog.get_chart("polar-plane")
    gam = T.christoffel(T.metric_jets(ch, [2.0, 1.0]))
    assert gam[0, 1, 1] == pytest.approx(-2.0, rel=1e-14)
    assert gam[1, 0, 1] == pytest.approx(0.5, rel=1e-14)


def test_sphere_christoffel():
    ch = catalog.get_chart("sphere-product", r1=1.0, r2=2.0)
    gam = T.christoffel(T.metric_jets(ch, [math.pi / 3, 0.0, 1.0, 0.0]))
    assert gam[0, 1, 1] == pytest.approx(-math.sqrt(3) / 4, rel=1e-14)


def test_flat_curvature_vanishes():
    pack = T.curvature_pack(catalog.get_chart("flat"), [0.1, 0.2, 0.3, 0.4])
    for arr in (pack.riemann_low, pack.ricci, pack.weyl_low, pack.asd_operator):
        assert not np.any(arr)
    assert pack.scalar == 0.0


@pytest.mark.parametrize("r1, r2", [(1.0, 2.0), (0.7, 1.3), (2.5, 2.5)])
def test_sphere_product_scalar(r1, r2):
    ch = catalog.get_chart("sphere-product", r1=r1, r2=r2)
    for p in sample_points(ch, 10, seed=5):
        assert T.curvature_pack(ch, p).scalar == pytest.approx(2 / r1 ** 2 + 2 / r2 ** 2, abs=1e-8)


def test_sphere_curvature_sign():
    ch = catalog.get_chart("sphere-product", r1=1.0, r2=2.0)
    pack = T.curvature_pack(ch, [1.0, 0.0, 1.0, 0.0])
    e = np.eye(4)
    # sectional curvature of the first factor is +1
    K = pack.R(e[0], e[1], e[1], e[0]) / (pack.g[0, 0] * pack.g[1, 1])
    assert K == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("c, d, curved", [(1.0, 0.0, False), (3.0, 2.0, True)])
def test_quadratic_orthotoric_scalar_flat(c, d, curved):
    # F = xi^2 + xi throughout; G = eta^2 + eta makes F and G the same
    # polynomial, which turns out to be a flat metric
    ch = catalog.get_chart("orthotoric", A=1, a=1, b=0, c=c, d=d)
    for p in sample_points(ch, 20, seed=2):
        pack = T.curvature_pack(ch, p)
        assert abs(pack.scalar) < 1e-8
        assert (pack.riemann_norm() > 1e-3) == curved


def test_order_below_two_is_rejected():
    with pytest.raises(ContractError):
        T.curvature_pack(catalog.get_chart("flat"), [0, 0, 0, 0], order=1)


@pytest.mark.parametrize("name, params", ALL_CHARTS)
def test_curvature_symmetries(name, params):
    ch = catalog.get_chart(name, **params)
    for p in sample_points(ch, 100, seed=17):
        pack = T.curvature_pack(ch, p)
        R = pack.riemann_low
        scale = 1.0 + np.abs(R).max()
        assert np.abs(R + R.transpose(1, 0, 2, 3)).max() <= 1e-10 * scale
        assert np.abs(R + R.transpose(0, 1, 3, 2)).max() <= 1e-10 * scale
        assert np.abs(R - R.transpose(2, 3, 0, 1)).max() <= 1e-10 * scale
        bianchi = R + R.transpose(0, 2, 3, 1) + R.transpose(0, 3, 1, 2)
        assert np.abs(bianchi).max() <= 1e-10 * scale
        assert np.abs(pack.ricci - pack.ricci.T).max() <= 1e-10 * scale
        if ch.dim == 4:
            W = pack.weyl_low
            gi = pack.g_inv
            for trace in (np.einsum("il,ijkl->jk", gi, W), np.einsum("ik,ijkl->jl", gi, W),
                          np.einsum("jk,ijkl->il", gi, W)):
                assert np.abs(trace).max() <= 1e-10 * scale
            assert abs(pack.asd_eigenvalues.sum()) <= 1e-10 * scale
            assert abs(pack.sd_eigenvalues.sum()) <= 1e-10 * scale


# ---------------------------------------------------------------------------
# exterior calculus


def _x(i, value=0.5, n=4, order=2):
    return jets.seed_variable(value, i, n, order)


def test_d_of_constant_form():
    f = FormValue.from_dense(np.array([[0, 2.0], [-2.0, 0]]), 2, order=1)
    assert T.exterior_derivative(f).coeffs == {}
    f = FormValue.one_form([jets.constant(3.0, 2, 1), jets.constant(-1.0, 2, 1)])
    assert all(c.value == 0 for c in T.exterior_derivative(f).coeffs.values())


def test_d_of_x_dy():
    x = jets.seed_variable(0.7, 0, 2, 1)
    f = FormValue.one_form([jets.constant(0.0, 2, 1), x])
    df = T.exterior_derivative(f)
    assert df.coeffs[(0, 1)].value == 1.0
    assert df.coeffs[(0, 1)].order == 0


def test_d_needs_order_one():
    f = FormValue.one_form([jets.constant(1.0, 2, 0), jets.constant(1.0, 2, 0)])
    with pytest.raises(ContractError):
        T.exterior_derivative(f)


@given(st.integers(0, 2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_d_squared_vanishes(seed):
    rng = np.random.default_rng(seed)
    pt = rng.uniform(-1, 1, 4)
    xs = [jets.seed_variable(v, i, 4, 2) for i, v in enumerate(pt)]

    def poly():
        acc = jets.constant(rng.normal(), 4, 2)
        for i, j in itertools.combinations_with_replacement(range(4), 2):
            acc = acc + xs[i] * xs[j] * rng.normal() + xs[i] * rng.normal()
        return acc * xs[int(rng.integers(4))]

    one = FormValue.one_form([poly() for _ in range(4)])
    two = FormValue(2, 4, {k: poly() for k in itertools.combinations(range(4), 2)})
    for f in (one, two):
        ddf = T.exterior_derivative(T.exterior_derivative(f))
        assert all(abs(c.value) < 1e-12 for c in ddf.coeffs.values())


def test_taubnut_omega_j_closed():
    ch = catalog.get_chart("taubnut", k=0.5, M=0.5)
    for p in sample_points(ch, 20, seed=9):
        dw = T.exterior_derivative(FormValue.from_chart(ch.at(p, 2), "omega_J"))
        assert np.abs(dw.components()).max() < 1e-10


def _basis_one(i, n=4):
    return FormValue.one_form([jets.constant(1.0 if k == i else 0.0, n, 0) for k in range(n)])


def test_wedge_volume():
    dxdy = T.wedge(_basis_one(0), _basis_one(1))
    dzdw = T.wedge(_basis_one(2), _basis_one(3))
    assert T.wedge(dxdy, dzdw).coeffs[(0, 1, 2, 3)].value == 1.0
    assert T.wedge(_basis_one(1), _basis_one(0)).coeffs[(0, 1)].value == -1.0


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
@settings(max_examples=50, deadline=None)
def test_wedge_odd_square_vanishes(c):
    f = FormValue.one_form([jets.constant(v, 4, 0) for v in c])
    assert all(x.value == 0 for x in T.wedge(f, f).coeffs.values())


@given(st.lists(st.floats(-5, 5), min_size=10, max_size=10))
@settings(max_examples=50, deadline=None)
def test_wedge_graded_commutative(c):
    a = FormValue.one_form([jets.constant(v, 4, 0) for v in c[:4]])
    w = np.zeros((4, 4))
    w[np.triu_indices(4, 1)] = c[4:]
    b = FormValue.from_dense(w - w.T, 4)
    ab, ba = T.wedge(a, b).components(), T.wedge(b, a).components()
    np.testing.assert_allclose(ab, ba, atol=1e-12)


def test_wedge_degree_overflow():
    w = FormValue.from_dense(np.array([[0, 1, 0, 0], [-1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0.0]]), 4)
    with pytest.raises(ContractError):
        T.wedge(T.wedge(w, w), _basis_one(0))


def test_burns_omega_wedge_rho():
    ch = catalog.get_chart("burns", m=1)
    ev = ch.at([1.0, 0.0, 0.0, 0.0], 2, check_domain=False)  # u = 0 is excluded only for sampling
    top = T.wedge(FormValue.from_chart(ev, "omega_J"), FormValue.from_chart(ev, "rho"))
    assert abs(top.components()[0]) < 1e-10


# ---------------------------------------------------------------------------
# Lie and covariant derivatives


def test_killing_fields_orthotoric():
    ch = catalog.get_chart("orthotoric", a=1, b=0, c=1, d=1)
    for p in sample_points(ch, 20, seed=4):
        for X in ("X1", "X2"):
            assert np.abs(T.lie_derivative_metric(ch, X, p)).max() < 1e-12


def test_rotation_on_flat_is_killing():
    ch = catalog.get_chart("flat")
    p = np.array([0.3, -0.7, 0.2, 0.1])
    xs = [jets.seed_variable(v, i, 4, 2) for i, v in enumerate(p)]
    X = [-xs[1], xs[0], jets.constant(0.0, 4, 2), jets.constant(0.0, 4, 2)]
    assert not np.any(T.lie_derivative_metric(ch, X, p))


def test_radial_field_is_not_killing():
    ch = catalog.get_chart("orthotoric", a=1, b=0, c=1, d=1)
    p = sample_points(ch, 1, seed=8)[0]
    ev = ch.at(p, 2)
    zero = jets.constant(0.0, 4, 2)
    X = [ev.env["xi"], zero, zero, zero]
    assert np.abs(T.lie_derivative_metric(ch, X, p, evaluation=ev)).max() > 1e-3


def _structure(ch, p, form):
    ev = ch.at(p, 2)
    gj = T.metric_jets(ch, p, 2, ev)
    return T.christoffel(gj), endo_from_form(T.invert_jet_matrix(gj), FormValue.from_chart(ev, form))


def test_kahler_structure_is_parallel():
    ch = catalog.get_chart("orthotoric", a=1, b=0, c=1, d=1)
    for p in sample_points(ch, 10, seed=6):
        gam, J = _structure(ch, p, "omega_J")
        assert np.linalg.norm(T.covariant_derivative_endomorphism(gam, J.jets)) < 1e-9


def test_constant_structure_on_flat_is_parallel():
    ch = catalog.get_chart("flat")
    gam, J = _structure(ch, [0.1, 0.2, 0.3, 0.4], "omega_J")
    assert not np.any(T.covariant_derivative_endomorphism(gam, J.jets))


def test_opposite_structure_exceptional_not_parallel():
    ch = catalog.get_chart("exceptional-taubnut")
    for p in sample_points(ch, 5, seed=1):
        ev = ch.at(p, 2)
        gam = T.christoffel(T.metric_jets(ch, p, 2, ev))
        assert np.linalg.norm(T.covariant_derivative_endomorphism(gam, ev.endo("I"))) > 1e-3
