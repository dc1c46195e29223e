"""Almost complex and Hermitian structures at a point.

Sign convention: the fundamental form of a structure ``E`` is
``omega(X, Y) = g(EX, Y)``, hence ``E^i_j = -g^{ik} omega_kj``. Under this
convention the Ricci form is ``rho(X, Y) = ric(JX, Y)`` and the Lee form
``theta`` of a 4-dimensional structure satisfies ``d omega = 2 theta ∧ omega``.

Complex coordinates for the Wirtinger layer pair the real coordinates as
``z_a = x[2a] + i x[2a + 1]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import jets
from .errors import ContractError
from .tensors import (
    CurvaturePack,
    FormValue,
    exterior_derivative,
    normalized,
    pfaffian,
    values,
    wedge,
)

HYPERKAHLER_THRESHOLD = 1e-9


# ---------------------------------------------------------------------------
# endomorphisms


@dataclass
class Endo:
    """Endomorphism ``E^i_j`` as a matrix of jets (column ``j`` is ``E(d_j)``)."""

    jets: list

    @classmethod
    def constant(cls, arr, order: int = 1) -> "Endo":
        arr = np.asarray(arr, dtype=float)
        n = arr.shape[0]
        return cls([[jets.constant(arr[i, j], n, order) for j in range(n)] for i in range(n)])

    def value(self) -> np.ndarray:
        return values(self.jets)

    def derivative(self) -> np.ndarray:
        """``d[k, i, j] = d_k E^i_j``."""
        n = len(self.jets)
        d = np.zeros((n, n, n))
        for i in range(n):
            for j in range(n):
                d[:, i, j] = self.jets[i][j].gradient()
        return d


def endo_from_form(g_inv, omega: FormValue) -> Endo:
    """Structure associated with ``omega`` through ``omega(X, Y) = g(EX, Y)``."""
    n = omega.dim
    ref = g_inv[0][0]
    zero = jets.constant(0.0, ref.nvars, ref.order)
    w = [[zero] * n for _ in range(n)]
    for (i, j), c in omega.coeffs.items():
        c = c.truncate(ref.order) if c.order > ref.order else c
        w[i][j] = c
        w[j][i] = -c
    if ref.order > omega.order:
        g_inv = [[x.truncate(omega.order) for x in row] for row in g_inv]
    e = [[-sum((g_inv[i][k] * w[k][j] for k in range(1, n)), g_inv[i][0] * w[0][j]) for j in range(n)]
         for i in range(n)]
    return Endo(e)


def square_residual(e: np.ndarray) -> float:
    """Normalized ``|E^2 + Id|``."""
    return normalized(e @ e + np.eye(e.shape[0]), e)


def compatibility_residual(e: np.ndarray, g: np.ndarray) -> float:
    """Normalized ``|g(E., E.) - g|``."""
    return normalized(e.T @ g @ e - g, g)


def fundamental_form(e: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``omega_ij = g(E d_i, d_j)``."""
    return e.T @ g


def nijenhuis_tensor(endo: Endo) -> np.ndarray:
    """``N[k, i, j]``: components of ``N(d_i, d_j)``."""
    e = endo.value()
    d = endo.derivative()
    # [JX, JY] - J[JX, Y] - J[X, JY] on coordinate fields, whose own bracket vanishes
    t1 = np.einsum("li,lkj->kij", e, d) - np.einsum("lj,lki->kij", e, d)
    t2 = np.einsum("km,jmi->kij", e, d) - np.einsum("km,imj->kij", e, d)
    return t1 + t2


def nijenhuis_residual(endo: Endo) -> float:
    n = nijenhuis_tensor(endo)
    e = endo.value()
    d = endo.derivative()
    worst = max(np.linalg.norm(n[:, i, j]) for i in range(e.shape[0]) for j in range(e.shape[0]))
    return float(worst / (1.0 + np.linalg.norm(e) * np.linalg.norm(d)))


# ---------------------------------------------------------------------------
# Lee form and Calabi condition


@dataclass
class OneFormSolve:
    coefficients: np.ndarray
    residual: float
    rank_deficient: bool = False


def _solve_exterior(target: FormValue, base: FormValue, factor: float) -> OneFormSolve:
    """Least squares for ``target = factor * phi ∧ base`` over 1-forms ``phi``."""
    n = base.dim
    b = target.components()
    cols = []
    for a in range(n):
        unit = FormValue.one_form([jets.constant(1.0 if i == a else 0.0, n, 0) for i in range(n)])
        cols.append(factor * wedge(unit, base.truncate(0)).components())
    A = np.array(cols).T
    sol, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    res = normalized(A @ sol - b, b, base.components())
    return OneFormSolve(sol, res, rank < n)


def lee_form_solve(omega: FormValue) -> OneFormSolve:
    """Solve ``d omega = 2 theta ∧ omega`` for the Lee form ``theta``."""
    return _solve_exterior(exterior_derivative(omega), omega, 2.0)


@dataclass
class CalabiSolve(OneFormSolve):
    degenerate: bool = False


def calabi_residual(omega_j: FormValue, omega_i: FormValue, sign: str) -> CalabiSolve:
    """Solve ``d(omega_J ± omega_I) = phi ∧ (omega_J ± omega_I)``."""
    if sign not in ("plus", "minus"):
        raise ContractError("sign must be 'plus' or 'minus'")
    combo = omega_j + omega_i if sign == "plus" else omega_j - omega_i
    size = np.linalg.norm(combo.components())
    ref = np.linalg.norm(omega_j.components()) + np.linalg.norm(omega_i.components())
    if size <= 1e-12 * (1.0 + ref):
        return CalabiSolve(np.zeros(omega_j.dim), 0.0, True, True)
    s = _solve_exterior(exterior_derivative(combo), combo, 1.0)
    return CalabiSolve(s.coefficients, s.residual, s.rank_deficient, False)


def calabi_form_residual(omega_j: FormValue, omega_i: FormValue, sign: str, phi) -> float:
    """Normalized ``|d Omega - phi ∧ Omega|`` for a given 1-form ``phi``, ``Omega = omega_J ± omega_I``.

    When ``Omega`` is decomposable the Calabi 1-form is only determined
    modulo the annihilator of ``Omega``, so a claimed ``phi`` is checked by
    substitution rather than by comparing with the least-squares solution.
    """
    if sign not in ("plus", "minus"):
        raise ContractError("sign must be 'plus' or 'minus'")
    combo = omega_j + omega_i if sign == "plus" else omega_j - omega_i
    n = combo.dim
    one = FormValue.one_form([jets.constant(float(c), n, 0) for c in phi])
    lhs = exterior_derivative(combo).components()
    rhs = wedge(one, combo.truncate(0)).components()
    return normalized(lhs - rhs, lhs, combo.components())


# ---------------------------------------------------------------------------
# distributions and QCH


@dataclass
class Distribution2:
    """A 2-plane at a point, spanned by ``v1`` and ``v2``."""

    v1: np.ndarray
    v2: np.ndarray

    @classmethod
    def j_closure(cls, v, J: np.ndarray) -> "Distribution2":
        v = np.asarray(v, dtype=float)
        return cls(v, J @ v)

    @classmethod
    def from_structures(cls, J: np.ndarray, I: np.ndarray) -> "Distribution2":
        """The plane where ``I = J``, i.e. the kernel of ``IJ + Id``."""
        _, _, vt = np.linalg.svd(I @ J + np.eye(J.shape[0]))
        basis = vt[-2:].T
        return cls(basis[:, 0], basis[:, 1])

    def basis(self) -> np.ndarray:
        return np.column_stack([self.v1, self.v2])

    def scaled(self, s1: float, s2: float) -> "Distribution2":
        return Distribution2(self.v1 * s1, self.v2 * s2)

    def gram_det(self, g) -> float:
        B = self.basis()
        return float(np.linalg.det(B.T @ g @ B))

    def invariance_residual(self, J: np.ndarray, g) -> float:
        """Normalized size of the part of ``J(D)`` orthogonal to ``D``."""
        B = self.basis()
        G = B.T @ g @ B
        JB = J @ B
        coeff = np.linalg.solve(G, B.T @ g @ JB)
        leftover = JB - B @ coeff
        return normalized(leftover, B) / max(np.sqrt(abs(np.linalg.det(G))), 1e-300) ** 0.5

    def validate(self, J, g, tol=1e-10):
        B = self.basis()
        scale = np.linalg.norm(B.T @ g @ B)
        if not self.gram_det(g) > tol * max(scale, 1.0) ** 2:
            raise ContractError("distribution spanning vectors are linearly dependent")
        if self.invariance_residual(J, g) > 1e-8:
            raise ContractError("distribution is not J-invariant")


def adapted_frame(D: Distribution2, J: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Orthonormal ``(e1, Je1, e3, Je3)`` with ``e1, Je1`` spanning ``D``."""
    ip = lambda a, b: float(a @ g @ b)
    e1 = D.v1 / np.sqrt(ip(D.v1, D.v1))
    e2 = J @ e1
    e2 = e2 / np.sqrt(ip(e2, e2))
    n = g.shape[0]
    for k in range(n):
        e3 = np.eye(n)[k]
        e3 = e3 - ip(e3, e1) * e1 - ip(e3, e2) * e2
        if ip(e3, e3) > 1e-8 * np.trace(g):
            break
    e3 = e3 / np.sqrt(ip(e3, e3))
    e4 = J @ e3
    e4 = e4 - ip(e4, e1) * e1 - ip(e4, e2) * e2
    e4 = e4 / np.sqrt(ip(e4, e4))
    return np.column_stack([e1, e2, e3, e4])


def holomorphic_sectional_curvature(pack: CurvaturePack, J: np.ndarray, X) -> float:
    X = np.asarray(X, dtype=float)
    n2 = float(X @ pack.g @ X)
    if n2 <= 0:
        raise ContractError("holomorphic sectional curvature of a zero vector")
    JX = J @ X
    return pack.R(X, JX, JX, X) / n2 ** 2


def qch_residual(pack: CurvaturePack, J: np.ndarray, D: Distribution2,
                 n_samples: int = 50, seed: int = 0) -> float:
    """Largest spread of ``K(X)`` over unit pairs with equal ``|X_D|``.

    Pairs are built by rotating independently inside ``D`` and ``D^perp``
    with a shared mixing angle, so both members have the same projection
    length by construction.
    """
    D.validate(J, pack.g)
    e1, e2, e3, e4 = adapted_frame(D, J, pack.g).T
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        s = rng.uniform(0.0, np.pi / 2)
        a1, b1, a2, b2 = rng.uniform(0.0, 2 * np.pi, 4)
        X1 = np.cos(s) * (np.cos(a1) * e1 + np.sin(a1) * e2) + np.sin(s) * (np.cos(b1) * e3 + np.sin(b1) * e4)
        X2 = np.cos(s) * (np.cos(a2) * e1 + np.sin(a2) * e2) + np.sin(s) * (np.cos(b2) * e3 + np.sin(b2) * e4)
        k1 = holomorphic_sectional_curvature(pack, J, X1)
        k2 = holomorphic_sectional_curvature(pack, J, X2)
        worst = max(worst, abs(k1 - k2) / (1.0 + max(abs(k1), abs(k2))))
    return worst


def opposite_structure(J: np.ndarray, D: Distribution2, g: np.ndarray) -> np.ndarray:
    """``I = J`` on ``D`` and ``I = -J`` on its orthogonal complement."""
    D.validate(J, g)
    P = adapted_frame(D, J, g)
    sign = np.diag([1.0, 1.0, -1.0, -1.0])
    return P @ sign @ np.linalg.solve(P, J @ P) @ np.linalg.inv(P)


def orientation_residual(omega_i: np.ndarray, omega_j: np.ndarray) -> float:
    """Normalized ``|omega_I∧omega_I + omega_J∧omega_J|``."""
    return normalized(pfaffian(omega_i) + pfaffian(omega_j), pfaffian(omega_j))


def gray2_residual(pack: CurvaturePack, I: np.ndarray, n_frames: int = 20, seed: int = 0) -> float:
    """Largest violation of the second Gray identity on random unit vectors."""
    rng = np.random.default_rng(seed)
    frame = pack.frame if pack.frame is not None else np.linalg.cholesky(np.linalg.inv(pack.g))
    scale = 1.0 + pack.riemann_norm()
    R = pack.R
    worst = 0.0
    for _ in range(n_frames):
        vecs = []
        for _ in range(4):
            c = rng.normal(size=pack.dim)
            vecs.append(frame @ (c / np.linalg.norm(c)))
        X, Y, Z, W = vecs
        lhs = R(X, Y, Z, W) - R(I @ X, I @ Y, Z, W)
        rhs = R(I @ X, Y, I @ Z, W) + R(I @ X, Y, Z, I @ W)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def ricci_form(pack: CurvaturePack, J: np.ndarray) -> np.ndarray:
    """``rho_ij = ric(J d_i, d_j)``."""
    return J.T @ pack.ricci


def form_inner(a: np.ndarray, b: np.ndarray, g_inv: np.ndarray) -> float:
    return 0.5 * float(np.einsum("ij,kl,ik,jl", a, b, g_inv, g_inv))


@dataclass
class RicciFormReport:
    inv_residual: float
    prop_residual: float
    lam: float
    vacuous: bool


def ricci_form_checks(pack: CurvaturePack, J: np.ndarray, I: np.ndarray, omega_i: np.ndarray) -> RicciFormReport:
    rho = ricci_form(pack, J)
    gi = pack.g_inv
    if pack.ricci_norm() < HYPERKAHLER_THRESHOLD:
        return RicciFormReport(0.0, 0.0, 0.0, True)
    rho_norm = np.sqrt(form_inner(rho, rho, gi))
    inv = I.T @ rho @ I - rho
    inv_res = np.sqrt(abs(form_inner(inv, inv, gi))) / (1.0 + rho_norm)
    lam = form_inner(rho, omega_i, gi) / form_inner(omega_i, omega_i, gi)
    rest = rho - lam * omega_i
    prop_res = np.sqrt(abs(form_inner(rest, rest, gi))) / (1.0 + rho_norm)
    return RicciFormReport(float(inv_res), float(prop_res), float(lam), False)


def asd_degeneracy(pack: CurvaturePack) -> tuple[float, bool]:
    """Smallest eigenvalue gap of ``W^-`` relative to its spectral radius.

    Returns ``(residual, vacuous)``; vacuous when ``W^-`` vanishes.
    """
    ev = pack.asd_eigenvalues
    radius = np.max(np.abs(ev))
    if radius < 1e-12 * (1.0 + pack.riemann_norm()):
        return 0.0, True
    gaps = [abs(a - b) for a, b in itertools.combinations(ev, 2)]
    return float(min(gaps) / radius), False


def asd_coordinates(pack: CurvaturePack, omega: np.ndarray) -> np.ndarray:
    """Coordinates of a 2-form in the orthonormal basis used for ``W^-`` and ``W^+``.

    Returns six numbers: three anti-self-dual then three self-dual.
    """
    from .tensors import _two_form_basis

    f = pack.frame
    wf = f.T @ omega @ f
    out = []
    for sign in (-1, 1):
        for b in _two_form_basis(sign):
            out.append(0.5 * np.sum(b * wf))
    return np.array(out)


def weyl_eigenform_residual(pack: CurvaturePack, omega: np.ndarray) -> float:
    """How far ``omega`` (anti-self-dual) is from an eigenvector of ``W^-``."""
    c = asd_coordinates(pack, omega)[:3]
    Wc = pack.asd_operator @ c
    mu = float(c @ Wc / (c @ c))
    return float(np.linalg.norm(Wc - mu * c) / (np.linalg.norm(c) * (1.0 + np.linalg.norm(pack.asd_operator))))


# ---------------------------------------------------------------------------
# Wirtinger layer


def del_delbar(evaluation, f) -> np.ndarray:
    """Mixed Hessian ``H[a, b] = d^2 f / dz_a dzbar_b``.

    ``f`` is a scalar name of the chart or an expression; the evaluation
    must carry order-2 jets. ``H`` flattened row-major gives the
    coefficients on ``dz∧dzbar, dz∧dubar, du∧dzbar, du∧dubar``.
    """
    jet = evaluation.scalar(f) if isinstance(f, str) else evaluation.eval(f)
    h = jet.hessian()
    m = h.shape[0] // 2
    H = np.zeros((m, m), dtype=complex)
    for a in range(m):
        for b in range(m):
            xa, ya, xb, yb = 2 * a, 2 * a + 1, 2 * b, 2 * b + 1
            H[a, b] = 0.25 * (h[xa, xb] + h[ya, yb] + 1j * (h[xa, yb] - h[ya, xb]))
    return H


def hermitian_form(H: np.ndarray) -> FormValue:
    """Complex 2-form ``sum H[a, b] dz_a ∧ dzbar_b`` on the basis ``(dz, dzbar, du, dubar)``."""
    H = np.asarray(H, dtype=complex)
    m = H.shape[0]
    n = 2 * m
    w = np.zeros((n, n), dtype=complex)
    for a in range(m):
        for b in range(m):
            i, j = 2 * a, 2 * b + 1
            w[i, j] += H[a, b]
            w[j, i] -= H[a, b]
    coeffs = {(i, j): jets.constant(complex(w[i, j]), n, 0)
              for i, j in itertools.combinations(range(n), 2) if w[i, j] != 0}
    return FormValue(2, n, coeffs)


def top_coefficient(form: FormValue) -> complex:
    c = form.coeffs.get(tuple(range(form.dim)))
    return 0j if c is None else complex(c.value)


def real_two_form(H: np.ndarray) -> np.ndarray:
    """Real 2-form ``(i/2) sum H[a, b] dz_a ∧ dzbar_b`` in the real coordinates."""
    H = np.asarray(H, dtype=complex)
    m = H.shape[0]
    n = 2 * m
    # coordinate vector k -> (dz_a(d_k)) for each a
    E = np.zeros((n, m), dtype=complex)
    for a in range(m):
        E[2 * a, a] = 1.0
        E[2 * a + 1, a] = 1j
    W = np.einsum("ia,ab,jb->ij", E, H, E.conj())
    W = 0.5j * (W - W.T)
    return W.real
