"""Pointwise Riemannian geometry over jets.

Curvature conventions (``R`` is the lowered Riemann tensor)::

    R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z
    R_ijkl   = g(R(d_i, d_j) d_k, d_l)
    ric_jk   = R^i_{k i j}

so a round sphere has ``R(X, Y, Y, X) > 0`` and positive Ricci and
scalar curvature.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import jets
from .dsl import ChartSpec
from .errors import ContractError, DomainError, SingularEvaluationError

__all__ = [
    "CurvaturePack",
    "FormValue",
    "metric_jets",
    "invert_jet_matrix",
    "jet_matmul",
    "values",
    "metric_derivatives",
    "christoffel",
    "curvature_from_derivatives",
    "curvature_pack",
    "orthonormal_frame",
    "exterior_derivative",
    "wedge",
    "lie_derivative_metric",
    "covariant_derivative_endomorphism",
    "normalized",
    "pfaffian",
]


def normalized(residual, *inputs) -> float:
    """``|residual| / (1 + |inputs|)`` in the Frobenius sense."""
    r = np.linalg.norm(np.ravel(np.asarray(residual)))
    scale = np.sqrt(sum(np.linalg.norm(np.ravel(np.asarray(x))) ** 2 for x in inputs))
    return float(r / (1.0 + scale))


def values(m) -> np.ndarray:
    """Value parts of a (nested) list of jets."""
    return np.array([[x.value for x in row] for row in m])


def pfaffian(w: np.ndarray) -> float:
    """Pfaffian of an antisymmetric 4x4 array (``w∧w = 2 pf dx^0123``)."""
    return w[0, 1] * w[2, 3] - w[0, 2] * w[1, 3] + w[0, 3] * w[1, 2]


# ---------------------------------------------------------------------------
# jet matrices


def metric_jets(chart: ChartSpec, point, order: int = 2, evaluation=None):
    ev = evaluation if evaluation is not None else chart.at(point, order)
    g = ev.metric()
    eig = np.linalg.eigvalsh(values(g))
    if not eig.min() > 0:
        raise DomainError(f"metric is not positive definite at {list(ev.point)} "
                          f"(smallest eigenvalue {eig.min():.3g})")
    return g


def jet_matmul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[sum((a[i][l] * b[l][j] for l in range(1, k)), a[i][0] * b[0][j]) for j in range(m)]
            for i in range(n)]


def invert_jet_matrix(m):
    """Gauss-Jordan inverse with partial pivoting on the value parts."""
    n = len(m)
    a = [list(row) for row in m]
    ref = a[0][0]
    one = jets.constant(1.0, ref.nvars, ref.order)
    zero = jets.constant(0.0, ref.nvars, ref.order)
    inv = [[one if i == j else zero for j in range(n)] for i in range(n)]
    scale = max(abs(x.value) for row in a for x in row) or 1.0
    for col in range(n):
        piv = max(range(col, n), key=lambda r: abs(a[r][col].value))
        if abs(a[piv][col].value) <= 1e-14 * scale:
            raise SingularEvaluationError("jet matrix has a singular value part")
        a[col], a[piv] = a[piv], a[col]
        inv[col], inv[piv] = inv[piv], inv[col]
        p = a[col][col].reciprocal()
        a[col] = [x * p for x in a[col]]
        inv[col] = [x * p for x in inv[col]]
        for r in range(n):
            if r == col:
                continue
            f = a[r][col]
            if f.value == 0 and not np.any(f.coeffs):
                continue
            a[r] = [x - f * y for x, y in zip(a[r], a[col])]
            inv[r] = [x - f * y for x, y in zip(inv[r], inv[col])]
    return inv


def metric_derivatives(gjets):
    """Value, first and second derivative arrays of a jet matrix.

    ``dg[i, j, k] = d_k g_ij`` and ``ddg[i, j, k, l] = d_k d_l g_ij``.
    """
    n = len(gjets)
    ref = gjets[0][0]
    order = ref.order
    g = values(gjets)
    dg = np.zeros((n, n, n))
    ddg = np.zeros((n, n, n, n))
    if order >= 1:
        for i in range(n):
            for j in range(n):
                dg[i, j] = gjets[i][j].gradient()
    if order >= 2:
        for i in range(n):
            for j in range(n):
                ddg[i, j] = gjets[i][j].hessian()
    return g, dg, ddg


def christoffel(gjets, g_inv=None) -> np.ndarray:
    """``gamma[k, i, j] = Γ^k_ij`` at the expansion point."""
    g, dg, _ = metric_derivatives(gjets)
    if g_inv is None:
        g_inv = np.linalg.inv(g)
    elif not isinstance(g_inv, np.ndarray):
        g_inv = values(g_inv)
    first = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg))
    return np.einsum("kl,lij->kij", g_inv, first)


# ---------------------------------------------------------------------------
# curvature


@dataclass
class CurvaturePack:
    point: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    dg: np.ndarray
    gamma: np.ndarray
    riemann_low: np.ndarray
    ricci: np.ndarray
    scalar: float
    weyl_low: np.ndarray | None = None
    orientation: int = 1
    frame: np.ndarray | None = None
    asd_operator: np.ndarray | None = None
    sd_operator: np.ndarray | None = None

    @property
    def dim(self):
        return self.g.shape[0]

    @property
    def asd_eigenvalues(self):
        return None if self.asd_operator is None else np.linalg.eigvalsh(self.asd_operator)

    @property
    def sd_eigenvalues(self):
        return None if self.sd_operator is None else np.linalg.eigvalsh(self.sd_operator)

    def riemann_norm(self) -> float:
        """Invariant norm ``sqrt(R_ijkl R^ijkl)``."""
        gi = self.g_inv
        up = np.einsum("ia,jb,kc,ld,abcd->ijkl", gi, gi, gi, gi, self.riemann_low)
        return float(np.sqrt(abs(np.einsum("ijkl,ijkl", up, self.riemann_low))))

    def ricci_norm(self) -> float:
        up = self.g_inv @ self.ricci @ self.g_inv
        return float(np.sqrt(abs(np.einsum("ij,ij", up, self.ricci))))

    def R(self, x, y, z, w) -> float:
        return float(np.einsum("ijkl,i,j,k,l", self.riemann_low, x, y, z, w))


def kulkarni_nomizu(h, k):
    return (np.einsum("il,jk->ijkl", h, k) + np.einsum("jk,il->ijkl", h, k)
            - np.einsum("ik,jl->ijkl", h, k) - np.einsum("jl,ik->ijkl", h, k))


def orthonormal_frame(g: np.ndarray, orientation: int = 1) -> np.ndarray:
    """Gram-Schmidt of the coordinate vectors in declaration order.

    Returns a matrix whose columns are g-orthonormal. With
    ``orientation = -1`` the last column is negated.
    """
    n = g.shape[0]
    frame = np.zeros((n, n))
    for a in range(n):
        v = np.eye(n)[a]
        for b in range(a):
            v = v - (frame[:, b] @ g @ v) * frame[:, b]
        frame[:, a] = v / np.sqrt(v @ g @ v)
    if orientation < 0:
        frame[:, -1] *= -1
    return frame


_SD_PAIRS = (((0, 1), (2, 3)), ((0, 2), (3, 1)), ((0, 3), (1, 2)))


def _two_form_basis(sign: int) -> np.ndarray:
    basis = np.zeros((3, 4, 4))
    for n, ((a, b), (c, d)) in enumerate(_SD_PAIRS):
        basis[n, a, b], basis[n, b, a] = 1, -1
        basis[n, c, d], basis[n, d, c] = sign, -sign
    return basis / np.sqrt(2)


def _block(wf: np.ndarray, sign: int) -> np.ndarray:
    # positive on the round sphere: -R(e_a, e_b, e_c, e_d) paired with (ab), (cd)
    basis = _two_form_basis(sign)
    op = 0.25 * np.einsum("pab,qcd,abdc->pq", basis, basis, wf)
    return 0.5 * (op + op.T)


def curvature_from_derivatives(g, dg, ddg, orientation: int = 1, point=None) -> CurvaturePack:
    n = g.shape[0]
    gi = np.linalg.inv(g)
    first = 0.5 * (np.einsum("jli->lij", dg) + np.einsum("ilj->lij", dg) - np.einsum("ijl->lij", dg))
    dfirst = 0.5 * (np.einsum("jlim->lijm", ddg) + np.einsum("iljm->lijm", ddg) - np.einsum("ijlm->lijm", ddg))
    gamma = np.einsum("kl,lij->kij", gi, first)
    dgi = -np.einsum("ma,abk,bl->mlk", gi, dg, gi)
    # dgamma[m, j, k, p] = d_p Γ^m_jk
    dgamma = np.einsum("mlp,ljk->mjkp", dgi, first) + np.einsum("ml,ljkp->mjkp", gi, dfirst)
    # Rm[m, k, i, j] = R^m_{kij}
    rm = (np.einsum("mjki->mkij", dgamma) - np.einsum("mikj->mkij", dgamma)
          + np.einsum("mip,pjk->mkij", gamma, gamma) - np.einsum("mjp,pik->mkij", gamma, gamma))
    riem = np.einsum("lm,mkij->ijkl", g, rm)
    ric = np.einsum("mkmj->jk", rm)
    scal = float(np.einsum("jk,jk", gi, ric))
    pack = CurvaturePack(point=None if point is None else np.asarray(point, float), g=g, g_inv=gi, dg=dg,
                         gamma=gamma, riemann_low=riem, ricci=ric, scalar=scal, orientation=orientation)
    if n == 4:
        weyl = riem - 0.5 * kulkarni_nomizu(ric, g) + scal / 12.0 * kulkarni_nomizu(g, g)
        pack.weyl_low = weyl
        frame = orthonormal_frame(g, orientation)
        wf = np.einsum("ijkl,ia,jb,kc,ld->abcd", weyl, frame, frame, frame, frame)
        pack.frame = frame
        pack.asd_operator = _block(wf, -1)
        pack.sd_operator = _block(wf, +1)
    return pack


def chart_orientation(chart: ChartSpec, evaluation) -> int:
    """Sign of the volume form: the named orientation form squared, else coordinate order."""
    if chart.orientation is None or chart.dim != 4:
        return 1
    w = FormValue.from_chart(evaluation, chart.orientation).dense()
    pf = pfaffian(w)
    if pf == 0:
        raise DomainError("orientation form is degenerate")
    return 1 if pf > 0 else -1


def curvature_pack(chart: ChartSpec, point, order: int = 2, evaluation=None) -> CurvaturePack:
    if order < 2:
        raise ContractError("curvature needs order-2 jets")
    ev = evaluation if evaluation is not None else chart.at(point, order)
    gj = metric_jets(chart, point, order, ev)
    g, dg, ddg = metric_derivatives(gj)
    return curvature_from_derivatives(g, dg, ddg, chart_orientation(chart, ev), ev.point)


# ---------------------------------------------------------------------------
# differential forms


@dataclass
class FormValue:
    """A p-form at a point; ``coeffs`` maps increasing index tuples to jets."""

    degree: int
    dim: int
    coeffs: dict

    @classmethod
    def from_chart(cls, evaluation, name: str) -> "FormValue":
        return cls(2, evaluation.chart.dim, dict(evaluation.form(name)))

    @classmethod
    def from_dense(cls, arr, nvars: int, order: int = 0) -> "FormValue":
        """Constant 2-form from an antisymmetric array."""
        arr = np.asarray(arr)
        n = arr.shape[0]
        coeffs = {(i, j): jets.constant(arr[i, j], nvars, order)
                  for i, j in itertools.combinations(range(n), 2) if arr[i, j] != 0}
        return cls(2, n, coeffs)

    @classmethod
    def one_form(cls, components) -> "FormValue":
        return cls(1, len(components), {(i,): c for i, c in enumerate(components)})

    @property
    def order(self):
        return min((c.order for c in self.coeffs.values()), default=0)

    def get(self, idx):
        return self.coeffs.get(tuple(idx))

    def truncate(self, order: int) -> "FormValue":
        return FormValue(self.degree, self.dim, {k: c.truncate(order) for k, c in self.coeffs.items()})

    def components(self) -> np.ndarray:
        """Value parts over all increasing index tuples, in lexicographic order."""
        keys = list(itertools.combinations(range(self.dim), self.degree))
        dtype = complex if any(np.iscomplexobj(c.coeffs) for c in self.coeffs.values()) else float
        return np.array([self.coeffs[k].value if k in self.coeffs else 0.0 for k in keys], dtype=dtype)

    def dense(self) -> np.ndarray:
        """Antisymmetric array of value parts (2-forms only)."""
        if self.degree != 2:
            raise ContractError("dense() is defined for 2-forms")
        dtype = complex if any(np.iscomplexobj(c.coeffs) for c in self.coeffs.values()) else float
        w = np.zeros((self.dim, self.dim), dtype=dtype)
        for (i, j), c in self.coeffs.items():
            w[i, j] = c.value
            w[j, i] = -c.value
        return w

    def _combine(self, other, sign):
        if self.degree != other.degree or self.dim != other.dim:
            raise ContractError("cannot add forms of different degree or dimension")
        order = min(self.order, other.order)
        out = {k: c.truncate(order) for k, c in self.coeffs.items()}
        for k, c in other.coeffs.items():
            c = c.truncate(order)
            out[k] = out[k] + c * sign if k in out else c * sign
        return FormValue(self.degree, self.dim, out)

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, s):
        return FormValue(self.degree, self.dim, {k: c * s for k, c in self.coeffs.items()})

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


def exterior_derivative(f: FormValue) -> FormValue:
    if f.degree + 1 > f.dim:
        return FormValue(f.degree + 1, f.dim, {})
    if f.coeffs and f.order < 1:
        raise ContractError("exterior derivative needs order >= 1 coefficient jets")
    out = {}
    for idx in itertools.combinations(range(f.dim), f.degree + 1):
        acc = None
        for k, var in enumerate(idx):
            rest = idx[:k] + idx[k + 1:]
            c = f.coeffs.get(rest)
            if c is None:
                continue
            term = c.diff(var) * (-1.0 if k % 2 else 1.0)
            acc = term if acc is None else acc + term
        if acc is not None:
            out[idx] = acc
    return FormValue(f.degree + 1, f.dim, out)


def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def wedge(f: FormValue, h: FormValue) -> FormValue:
    if f.dim != h.dim:
        raise ContractError("wedge of forms on different dimensions")
    p, q = f.degree, h.degree
    if p + q > f.dim:
        raise ContractError(f"degree overflow: {p} + {q} > {f.dim}")
    order = min(f.order, h.order)
    out = {}
    for idx in itertools.combinations(range(f.dim), p + q):
        acc = None
        for left in itertools.combinations(idx, p):
            a = f.coeffs.get(left)
            if a is None:
                continue
            right = tuple(i for i in idx if i not in left)
            b = h.coeffs.get(right)
            if b is None:
                continue
            term = a.truncate(order) * b.truncate(order) * float(_perm_sign(left + right))
            acc = term if acc is None else acc + term
        if acc is not None:
            out[idx] = acc
    return FormValue(p + q, f.dim, out)


# ---------------------------------------------------------------------------
# derivatives of tensor fields


def lie_derivative_metric(chart: ChartSpec, X, point, order: int = 2, evaluation=None) -> np.ndarray:
    """``(L_X g)_ij`` at ``point``; ``X`` is a vector-field name or a list of jets."""
    ev = evaluation if evaluation is not None else chart.at(point, order)
    comps = ev.vector(X) if isinstance(X, str) else X
    g, dg, _ = metric_derivatives(ev.metric())
    xv = np.array([c.value for c in comps])
    dx = np.array([c.gradient() for c in comps])  # dx[k, i] = d_i X^k
    return np.einsum("k,ijk->ij", xv, dg) + np.einsum("kj,ki->ij", g, dx) + np.einsum("ik,kj->ij", g, dx)


def covariant_derivative_endomorphism(gamma: np.ndarray, endo) -> np.ndarray:
    """``out[k, i, j] = (nabla_k E)^i_j`` for an endomorphism given as jets."""
    e = values(endo)
    n = e.shape[0]
    de = np.zeros((n, n, n))
    for i in range(n):
        for j in range(n):
            de[:, i, j] = endo[i][j].gradient()
    return de + np.einsum("ikl,lj->kij", gamma, e) - np.einsum("lkj,il->kij", gamma, e)
