"""Built-in charts and the orthotoric/Taub-NUT parameter dictionary.

Every chart is generated as DSL text and parsed, so ``dump-chart`` output
is exactly what the verifier runs. Charts carry:

* ``omega_J`` (Kähler form, also the orientation form) and ``omega_I``
  (Kähler form of the opposite Hermitian structure);
* Killing fields ``X1``, ``X2`` with potentials ``mu1``, ``mu2`` where
  known, so that ``X_i = J grad mu_i``;
* chart-specific extras documented per constructor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import jets
from .dsl import ChartSpec, parse_chart
from .errors import ContractError, DomainError, UnknownChartError

TWO_PI = "6.283185307179586"


def _num(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# orthotoric


@dataclass(frozen=True)
class OrthotoricParams:
    A: float = 0.0
    a: float = 1.0
    b: float = 0.0
    c: float = 1.0
    d: float = 1.0
    cubic: float = 0.0  # coefficient of xi^3 added to F; nonzero only for negative controls

    @property
    def linear(self) -> bool:
        return self.A == 0.0 and self.cubic == 0.0

    def validate(self):
        if self.A == 0.0:
            if not (self.a > 0 and self.c > 0 and self.d * self.a - self.b * self.c > 0):
                raise ContractError("linear orthotoric family needs a > 0, c > 0 and da - bc > 0")
        elif self.A < 0:
            raise ContractError("only A >= 0 has a built-in sampling box")
        else:
            self._roots(self.A, self.a, self.b)
            self._roots(self.A, self.c, self.d)

    @staticmethod
    def _roots(A, p, q):
        disc = p * p - 4 * A * q
        if disc <= 0:
            raise ContractError("quadratic F or G needs two real roots")
        s = math.sqrt(disc)
        return sorted(((-p - s) / (2 * A), (-p + s) / (2 * A)))

    def sample_box(self):
        """``((xi_lo, xi_hi), (eta_lo, eta_hi))`` following the catalog margins."""
        if self.A == 0.0:
            xi0, eta0 = -self.b / self.a, -self.d / self.c
            return (xi0 + 0.1, xi0 + 5.0), (eta0 - 5.0, eta0 - 0.1)
        xi0 = self._roots(self.A, self.a, self.b)[1]
        g1, g2 = self._roots(self.A, self.c, self.d)
        lo = max(g2 - 5.0, g1 + min(0.1, (g2 - g1) / 4))
        return (xi0 + 0.1, xi0 + 5.0), (lo, g2 - min(0.1, (g2 - g1) / 4))


def orthotoric_text(p: OrthotoricParams) -> str:
    (x0, x1), (e0, e1) = p.sample_box()
    return f"""\
chart orthotoric
coords xi eta t z
params A={_num(p.A)} a={_num(p.a)} b={_num(p.b)} c={_num(p.c)} d={_num(p.d)} p3={_num(p.cubic)}
let F = p3*xi^3 + A*xi^2 + a*xi + b
let G = A*eta^2 + c*eta + d
domain xi - eta ; F ; -G
orientation omega_J
sample xi range {_num(x0)}, {_num(x1)}
sample eta range {_num(e0)}, {_num(e1)}
sample t range 0, {TWO_PI}
sample z range 0, {TWO_PI}
metric
  g[xi,xi] = (xi - eta)/F
  g[eta,eta] = -(xi - eta)/G
  g[t,t] = (F - G)/(xi - eta)
  g[t,z] = (eta*F - xi*G)/(xi - eta)
  g[z,z] = (eta^2*F - xi^2*G)/(xi - eta)
# d(xi + eta) ^ dt + d(xi*eta) ^ dz
form omega_J
  w[xi,t] = 1
  w[eta,t] = 1
  w[xi,z] = eta
  w[eta,z] = xi
# dxi ^ (dt + eta dz) - deta ^ (dt + xi dz)
form omega_I
  w[xi,t] = 1
  w[xi,z] = eta
  w[eta,t] = -1
  w[eta,z] = -xi
vector X1 = (0, 0, 1, 0)
vector X2 = (0, 0, 0, 1)
vector D1 = (1, 0, 0, 0)
vector D1perp = (0, 1, 0, 0)
scalar mu1 = xi + eta
scalar mu2 = xi*eta
scalar norm11 = (F - G)/(xi - eta)
scalar norm12 = (eta*F - xi*G)/(xi - eta)
scalar norm22 = (eta^2*F - xi^2*G)/(xi - eta)
scalar area2 = -F*G
end
"""


def orthotoric_chart(p: OrthotoricParams | None = None, **kw) -> ChartSpec:
    p = p or OrthotoricParams(**kw)
    p.validate()
    return parse_chart(orthotoric_text(p))


@dataclass(frozen=True)
class Dictionary:
    k: float
    M: float
    alpha: float
    e: float
    gamma: float

    @property
    def consistency(self) -> float:
        """``2 alpha M (k e + gamma)``, which should equal -1."""
        return 2 * self.alpha * self.M * (self.k * self.e + self.gamma)


def parameter_dictionary(a, b, c, d) -> Dictionary:
    """Taub-NUT constants matching the orthotoric chart ``F = a xi + b, G = c eta + d``."""
    if not (a > 0 and c > 0 and d * a - b * c > 0):
        raise ContractError("parameter dictionary needs a > 0, c > 0 and da - bc > 0")
    delta = d * a - b * c
    return Dictionary(
        k=(a - c) / (a + c),
        M=(c + a) * a * a * c * c / (4 * delta * delta),
        alpha=2 * delta / (a * a * c * c),
        e=c * b / (2 * a) + a * d / (2 * c),
        gamma=(b * c * c - d * a * a) / (2 * a * c),
    )


def _linear_fg(p: OrthotoricParams, xi, eta):
    if not p.linear:
        raise ContractError("volumetric coordinates are defined for the linear family")
    return p.a * xi + p.b, p.c * eta + p.d


@dataclass(frozen=True)
class Volumetric:
    x: float
    y: float
    radius_residual: float  # sqrt(x^2+y^2) against (c/2) xi - (a/2) eta + gamma
    fg_residual: float      # c^2 F - a^2 G against 2ac sqrt(x^2+y^2)


def volumetric_map(p: OrthotoricParams, xi, eta) -> Volumetric:
    F, G = _linear_fg(p, xi, eta)
    if -F * G < 0:
        raise DomainError("volumetric coordinates need -FG >= 0")
    dct = parameter_dictionary(p.a, p.b, p.c, p.d)
    x = math.sqrt(-F * G)
    y = p.c / 2 * xi + p.a / 2 * eta + dct.e
    r = math.hypot(x, y)
    rhs = p.c / 2 * xi - p.a / 2 * eta + dct.gamma
    lhs2 = p.c ** 2 * F - p.a ** 2 * G
    return Volumetric(x, y, abs(r - rhs) / (1 + abs(r)),
                      abs(lhs2 - 2 * p.a * p.c * r) / (1 + abs(lhs2)))


def conformal_factor_residual(p: OrthotoricParams, xi, eta, M_scale: float = 1.0) -> float:
    """Isometry certificate between the orthotoric and Taub-NUT orbit metrics."""
    F, G = _linear_fg(p, xi, eta)
    dct = parameter_dictionary(p.a, p.b, p.c, p.d)
    M = dct.M * M_scale
    vol = volumetric_map(p, xi, eta)
    r = math.hypot(vol.x, vol.y)
    lhs = 4 * (xi - eta) / (p.c ** 2 * F - p.a ** 2 * G)
    rhs = dct.alpha * (1 + 2 * dct.alpha * M * (dct.k * vol.y + r)) / r
    return abs(lhs - rhs) / (1 + abs(lhs))


def cauchy_riemann_residual(p: OrthotoricParams, xi, eta) -> float:
    """``y + i x`` is holomorphic in the isothermal coordinate ``x~ + i y~``.

    ``x~ = (2/a) sqrt F`` and ``y~ = (2/c) sqrt(-G)``; derivatives come from
    order-1 jets in ``(xi, eta)``.
    """
    if not p.linear:
        raise ContractError("isothermal coordinates are defined for the linear family")
    dct = parameter_dictionary(p.a, p.b, p.c, p.d)
    X = jets.seed_variable(xi, 0, 2, 1)
    E = jets.seed_variable(eta, 1, 2, 1)
    F, G = X * p.a + p.b, E * p.c + p.d
    x = jets.sqrt(-(F * G))
    y = X * (p.c / 2) + E * (p.a / 2) + dct.e
    xt = jets.sqrt(F) * (2 / p.a)
    yt = jets.sqrt(-G) * (2 / p.c)
    jac_t = np.array([xt.gradient(), yt.gradient()])   # d(x~, y~)/d(xi, eta)
    jac_xy = np.array([x.gradient(), y.gradient()])    # d(x, y)/d(xi, eta)
    d = jac_xy @ np.linalg.inv(jac_t)                  # d(x, y)/d(x~, y~)
    res = np.array([d[1, 0] - d[0, 1], d[1, 1] + d[0, 0]])
    return float(np.linalg.norm(res) / (1 + np.linalg.norm(d)))


# ---------------------------------------------------------------------------
# generalized Taub-NUT


@dataclass(frozen=True)
class TaubNutParams:
    k: float = 0.0
    M: float = 0.5

    def validate(self):
        if not self.M > 0:
            raise ContractError("Taub-NUT mass M must be positive")
        if not -1 < self.k < 1:
            raise ContractError("k must lie in (-1, 1); k = +-1 is the exceptional chart")


def taubnut_text(p: TaubNutParams) -> str:
    return f"""\
chart taubnut
coords u v th1 th2
params k={_num(p.k)} M={_num(p.M)}
let P = 1 + (1 + k)*u^2
let Q = 1 + (1 - k)*v^2
let D = 1 + (1 + k)*u^2 + (1 - k)*v^2
domain u ; v
orientation omega_J
sample u range 0.1, 3
sample v range 0.1, 3
sample th1 range 0, {TWO_PI}
sample th2 range 0, {TWO_PI}
metric
  g[u,u] = 2*D/M
  g[v,v] = 2*D/M
  g[th1,th1] = 2*v^2*(P^2 + (1 + k)^2*u^2*v^2)/(D*M)
  g[th1,th2] = 2*u^2*v^2*(2 + (1 - k^2)*(u^2 + v^2))/(D*M)
  g[th2,th2] = 2*u^2*(Q^2 + (1 - k)^2*u^2*v^2)/(D*M)
# d(v^2 P / M) ^ dth1 + d(u^2 Q / M) ^ dth2
form omega_J
  w[u,th1] = 2*(1 + k)*u*v^2/M
  w[v,th1] = 2*v*P/M
  w[u,th2] = 2*u*Q/M
  w[v,th2] = 2*(1 - k)*u^2*v/M
form omega_I
  w[u,th1] = -2*(1 + k)*u*v^2/M
  w[v,th1] = 2*v*P/M
  w[u,th2] = -2*u*Q/M
  w[v,th2] = 2*(1 - k)*u^2*v/M
vector X1 = (0, 0, 1, 0)
vector X2 = (0, 0, 0, 1)
scalar mu1 = v^2*P/M
scalar mu2 = u^2*Q/M
end
"""


def taubnut_chart(p: TaubNutParams | None = None, **kw) -> ChartSpec:
    p = p or TaubNutParams(**kw)
    p.validate()
    return parse_chart(taubnut_text(p))


def taubnut_cartesian_metric(k, M, x1, y1, x2, y2) -> dict:
    """The ten Cartesian metric components of the Taub-NUT family.

    Keys are pairs of names from ``x1, y1, x2, y2``. The ``y1 y1`` and
    ``y2 y2`` entries carry the factor 2 on both numerator terms, which is
    the reading consistent with the polar chart.
    """
    u2, v2 = x2 * x2 + y2 * y2, x1 * x1 + y1 * y1
    D = 1 + (1 + k) * u2 + (1 - k) * v2
    P, Q = 1 + (1 + k) * u2, 1 + (1 - k) * v2
    S = (2 + (1 - k * k) * (u2 + v2)) / D
    out = {
        ("x1", "x1"): 2 * P + 2 * (1 - k) * x1 ** 2 + 2 * ((k - 1) * y1 ** 2 * P + y1 ** 2 * (1 + k) ** 2 * u2) / D,
        ("x1", "y1"): 2 * (1 - k) * x1 * y1 - 2 * (1 + k) ** 2 * u2 * x1 * y1 / D + 2 * P * (1 - k) * x1 * y1 / D,
        ("y1", "y1"): 2 * P + 2 * (1 - k) * y1 ** 2 + 2 * (P * (k - 1) * x1 ** 2 + x1 ** 2 * (1 + k) ** 2 * u2) / D,
        ("x1", "x2"): 2 * y1 * y2 * S,
        ("x1", "y2"): -2 * y1 * x2 * S,
        ("x2", "x2"): 2 * Q + 2 * (1 + k) * x2 ** 2 + 2 * (-(k + 1) * y2 ** 2 * Q + y2 ** 2 * (1 - k) ** 2 * v2) / D,
        ("x2", "y2"): 2 * (1 + k) * x2 * y2 - 2 * (1 - k) ** 2 * v2 * x2 * y2 / D + 2 * Q * (1 + k) * x2 * y2 / D,
        ("y2", "y2"): 2 * Q + 2 * (1 + k) * y2 ** 2 + 2 * (Q * (-k - 1) * x2 ** 2 + x2 ** 2 * (1 - k) ** 2 * v2) / D,
        ("y1", "y2"): 2 * x1 * x2 * S,
        ("y1", "x2"): -2 * x1 * y2 * S,
    }
    return {key: val / M for key, val in out.items()}


def cartesian_crosscheck_residual(chart: ChartSpec, point) -> float:
    """Compare the Cartesian components with the polar metric pushed through the coordinate change.

    ``x1 + i y1 = v e^{i th1}`` and ``x2 + i y2 = u e^{i th2}``.
    """
    u, v, t1, t2 = (float(s) for s in point)
    k, M = chart.params["k"], chart.params["M"]
    g = np.array([[float(np.real(e.value)) for e in row] for row in chart.at(point, 0).metric()])
    basis = {
        "x1": np.array([0, math.cos(t1), -math.sin(t1) / v, 0]),
        "y1": np.array([0, math.sin(t1), math.cos(t1) / v, 0]),
        "x2": np.array([math.cos(t2), 0, 0, -math.sin(t2) / u]),
        "y2": np.array([math.sin(t2), 0, 0, math.cos(t2) / u]),
    }
    cart = taubnut_cartesian_metric(k, M, v * math.cos(t1), v * math.sin(t1), u * math.cos(t2), u * math.sin(t2))
    diff = [basis[a] @ g @ basis[b] - val for (a, b), val in cart.items()]
    return float(np.max(np.abs(diff)) / (1 + max(abs(x) for x in cart.values())))


# ---------------------------------------------------------------------------
# exceptional Taub-NUT and half plane


def exceptional_taubnut_text() -> str:
    # 1.4142135623730951 = sqrt 2
    return f"""\
chart exceptional-taubnut
coords u v th1 th2
params s2=1.4142135623730951
let P = 1 + 2*u^2
domain u ; v
orientation omega_J
sample u range 0.1, 3
sample v range 0.1, 3
sample th1 range 0, {TWO_PI}
sample th2 range 0, {TWO_PI}
metric
  g[u,u] = 2*P
  g[v,v] = 2*P
  g[th1,th1] = v^2*(P^2 + 4*u^2*v^2)/P
  g[th1,th2] = 2*u^2*v^2/P
  g[th2,th2] = u^2/P
form omega_J
  w[v,th1] = 2*v*P/s2
  w[u,th1] = 4*u*v^2/s2
  w[u,th2] = 2*u/s2
form omega_I
  w[v,th1] = 2*v*P/s2
  w[u,th1] = -4*u*v^2/s2
  w[u,th2] = -2*u/s2
# column j is the image of the j-th coordinate vector
endo I
  e[th2,u] = -s2*P/u
  e[th2,v] = -2*s2*v
  e[th1,v] = s2/v
  e[u,th2] = u/(s2*P)
  e[u,th1] = s2*u*v^2/P
  e[v,th1] = -s2/2*v
vector X1 = (0, 0, 1, 0)
vector X2 = (0, 0, 0, 1)
scalar mu1 = v^2*P/s2
scalar mu2 = u^2/s2
scalar lnP = ln(P)
end
"""


def exceptional_taubnut_chart() -> ChartSpec:
    return parse_chart(exceptional_taubnut_text())


def half_plane_text() -> str:
    return f"""\
chart half-plane
coords x y th1 th2
let P = 1 + x^2
domain x
orientation omega_J
sample x range 0.1, 5
sample y range -3, 3
sample th1 range 0, {TWO_PI}
sample th2 range 0, {TWO_PI}
metric
  g[x,x] = P
  g[y,y] = P
  g[th1,th1] = x^2/P
  g[th1,th2] = 2*x^2*y/P
  g[th2,th2] = (P^2 + 4*x^2*y^2)/P
form omega_J
  w[x,th1] = x
  w[y,th2] = P
  w[x,th2] = 2*x*y
form omega_I
  w[x,th1] = x
  w[y,th2] = -P
  w[x,th2] = 2*x*y
endo I
  e[th1,x] = P/x
  e[th2,y] = -1
  e[th1,y] = 2*y
  e[x,th2] = -2*x*y/P
  e[y,th2] = 1
  e[x,th1] = -x/P
vector X1 = (0, 0, 1, 0)
vector X2 = (0, 0, 0, 1)
scalar mu1 = x^2/2
scalar mu2 = P*y
scalar lnP = ln(P)
end
"""


def half_plane_chart() -> ChartSpec:
    return parse_chart(half_plane_text())


# ---------------------------------------------------------------------------
# Burns metric


def burns_text(m: float) -> str:
    """Real coordinates ``z = x1 + i y1``, ``u = x2 + i y2``.

    Forms are stored as the real 2-forms ``(i/2) sum H dz_a ∧ dzbar_b`` of
    the complex coefficient matrices; ``rho`` is the closed-form Ricci form
    in the same normalization.
    """
    return f"""\
chart burns
coords x1 y1 x2 y2
params m={_num(m)}
let Z = x1^2 + y1^2
let U = x2^2 + y2^2
let N = Z*(1 + U) + m
let P = 1 + U
let QR = x1*x2 + y1*y2
let QI = x1*y2 - y1*x2
let RJ = Z + m/P^2
let RI = (N*(U - 1) - m*U)/P^2
let C = m/N^2
domain Z ; U
orientation omega_J
sample x1 y1 polar 0.2, 3
sample x2 y2 polar 0.2, 3
metric
  g[x1,x1] = P
  g[y1,y1] = P
  g[x2,x2] = RJ
  g[y2,y2] = RJ
  g[x1,x2] = QR
  g[y1,y2] = QR
  g[x1,y2] = QI
  g[y1,x2] = -QI
form omega_J
  w[x1,y1] = P
  w[x2,y2] = RJ
  w[x1,y2] = QR
  w[y1,x2] = -QR
  w[x1,x2] = -QI
  w[y1,y2] = -QI
form omega_I
  w[x1,y1] = P
  w[x2,y2] = RI
  w[x1,y2] = QR
  w[y1,x2] = -QR
  w[x1,x2] = -QI
  w[y1,y2] = -QI
form rho
  w[x1,y1] = C*P
  w[x2,y2] = C*RI
  w[x1,y2] = C*QR
  w[y1,x2] = -C*QR
  w[x1,x2] = -C*QI
  w[y1,y2] = -C*QI
vector X1 = (-y1, x1, 0, 0)
vector X2 = (0, 0, -y2, x2)
scalar mu1 = N/2
scalar mu2 = (Z*U + m*U/P)/2
scalar Phi = Z*(1 + U) + m*ln(Z*(1 + U))
scalar lnN = ln(N)
end
"""


def burns_chart(m: float = 1.0) -> ChartSpec:
    if not m > 0:
        raise ContractError("Burns parameter m must be positive")
    return parse_chart(burns_text(m))


def burns_display(m: float, z: complex, u: complex):
    """Complex coefficient matrices ``(omega, rho, omega_I)`` of the closed forms.

    ``H[a, b]`` is the coefficient of ``dz_a ∧ dzbar_b`` with ``z_0 = z``, ``z_1 = u``.
    """
    Z, U = abs(z) ** 2, abs(u) ** 2
    N = Z + Z * U + m
    off = u * z.conjugate()
    omega = np.array([[1 + U, off], [off.conjugate(), Z + m / (1 + U) ** 2]])
    omega_i = np.array([[1 + U, off], [off.conjugate(), (N * (U - 1) - m * U) / (1 + U) ** 2]])
    rho = m / N ** 2 * omega_i
    return omega, rho, omega_i


# ---------------------------------------------------------------------------
# reference charts for engine tests


def flat_text() -> str:
    return """\
chart flat
coords x0 x1 x2 x3
orientation omega_J
sample x0 range -1, 1
sample x1 range -1, 1
sample x2 range -1, 1
sample x3 range -1, 1
metric
  g[0,0] = 1
  g[1,1] = 1
  g[2,2] = 1
  g[3,3] = 1
form omega_J
  w[0,1] = 1
  w[2,3] = 1
end
"""


def polar_text() -> str:
    return """\
chart polar-plane
coords r th
domain r
sample r range 0.2, 3
sample th range 0, 6.283185307179586
metric
  g[r,r] = 1
  g[th,th] = r^2
end
"""


def sphere_product_text(r1: float = 1.0, r2: float = 2.0) -> str:
    return f"""\
chart sphere-product
coords a b c d
params r1={_num(r1)} r2={_num(r2)}
domain sin(a) ; sin(c)
orientation omega_J
sample a range 0.3, 2.8
sample b range 0, 6.283185307179586
sample c range 0.3, 2.8
sample d range 0, 6.283185307179586
metric
  g[a,a] = r1^2
  g[b,b] = r1^2*sin(a)^2
  g[c,c] = r2^2
  g[d,d] = r2^2*sin(c)^2
form omega_J
  w[a,b] = r1^2*sin(a)
  w[c,d] = r2^2*sin(c)
end
"""


# ---------------------------------------------------------------------------
# registry

# (1, 1, 3, 2) would give da - bc = -1, outside the admissible family; d = 4 keeps the
# asymmetric b != 0 regime with da - bc = 1.
DEFAULT_ORTHOTORIC = [(1.0, 0.0, 1.0, 1.0), (2.0, 0.0, 1.0, 1.0), (1.0, 1.0, 3.0, 4.0)]
DEFAULT_K = [0.0, 0.5, -0.9]
DEFAULT_M = [0.5, 1.0, 4.0]

SURFACE_CHARTS = ("orthotoric", "taubnut", "exceptional-taubnut", "half-plane", "burns")
REFERENCE_CHARTS = ("flat", "polar-plane", "sphere-product")


def _params(kw, allowed):
    bad = set(kw) - set(allowed)
    if bad:
        raise ContractError(f"unknown parameter(s) {sorted(bad)}; expected some of {list(allowed)}")
    return {k: float(v) for k, v in kw.items()}


def get_chart(name: str, **params) -> ChartSpec:
    """Catalog chart by name with optional parameter overrides."""
    if name == "orthotoric":
        return orthotoric_chart(OrthotoricParams(**_params(params, ("A", "a", "b", "c", "d", "cubic"))))
    if name == "taubnut":
        return taubnut_chart(TaubNutParams(**_params(params, ("k", "M"))))
    if name == "exceptional-taubnut":
        _params(params, ())
        return exceptional_taubnut_chart()
    if name == "half-plane":
        _params(params, ())
        return half_plane_chart()
    if name == "burns":
        return burns_chart(**_params(params, ("m",)))
    if name == "flat":
        _params(params, ())
        return parse_chart(flat_text())
    if name == "polar-plane":
        _params(params, ())
        return parse_chart(polar_text())
    if name == "sphere-product":
        return parse_chart(sphere_product_text(**_params(params, ("r1", "r2"))))
    raise UnknownChartError(name)


def default_parameter_sets(name: str) -> list[dict]:
    """Parameter sets exercised by CI for each catalog chart."""
    if name == "orthotoric":
        return [dict(a=a, b=b, c=c, d=d) for a, b, c, d in DEFAULT_ORTHOTORIC]
    if name == "taubnut":
        return [dict(k=k, M=0.5) for k in DEFAULT_K]
    if name == "burns":
        return [dict(m=m) for m in DEFAULT_M]
    if name in SURFACE_CHARTS or name in REFERENCE_CHARTS:
        return [{}]
    raise UnknownChartError(name)
