"""Independent reference computations shared by the test modules.

The curvature oracle works on plain float metric values only and builds
Christoffel symbols and the Riemann tensor by nested central differences,
so it shares no code path with the jet engine beyond metric evaluation.
"""

import itertools

import numpy as np

POLY = """\
chart poly
coords x y z w
metric
  g[x,x] = 2 + 0.3*x^2 + 0.1*y*z
  g[x,y] = 0.2*x*w - 0.1*z^2
  g[y,y] = 1.5 + 0.2*y^2 + 0.1*x^3
  g[y,w] = 0.15*x*y
  g[z,z] = 1 + 0.25*w^2 + 0.1*x*y
  g[z,w] = 0.05*y^3
  g[w,w] = 1.2 + 0.2*z^2 + 0.1*x*w
end
"""


def metric_fn(chart):
    def g(p):
        ev = chart.at(p, 0, check_domain=False)
        return np.array([[float(x.value) for x in row] for row in ev.metric()])
    return g


def fd_christoffel(gfn, p, h=1e-4):
    n = len(p)
    g = gfn(p)
    gi = np.linalg.inv(g)
    dg = np.zeros((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dg[:, :, k] = (gfn(p + e) - gfn(p - e)) / (2 * h)
    gam = np.zeros((n, n, n))
    for k, i, j in itertools.product(range(n), repeat=3):
        gam[k, i, j] = 0.5 * sum(gi[k, l] * (dg[j, l, i] + dg[i, l, j] - dg[i, j, l]) for l in range(n))
    return gam


def fd_riemann(gfn, p, h=1e-3):
    """``R_ijkl = g(R(d_i, d_j) d_k, d_l)`` from differences of Christoffel symbols."""
    n = len(p)
    gam = fd_christoffel(gfn, p)
    dgam = np.zeros((n, n, n, n))  # dgam[m, a, b, c] = d_m Γ^a_bc
    for m in range(n):
        diffs = []
        for step in (h, h / 2):
            e = np.zeros(n)
            e[m] = step
            diffs.append((fd_christoffel(gfn, p + e) - fd_christoffel(gfn, p - e)) / (2 * step))
        # one Richardson step removes the h^2 term of the outer difference
        dgam[m] = (4 * diffs[1] - diffs[0]) / 3
    up = np.zeros((n, n, n, n))  # up[l, k, i, j] = R^l_{kij}
    for l, k, i, j in itertools.product(range(n), repeat=4):
        up[l, k, i, j] = (dgam[i, l, j, k] - dgam[j, l, i, k]
                          + sum(gam[l, i, s] * gam[s, j, k] - gam[l, j, s] * gam[s, i, k] for s in range(n)))
    g = gfn(p)
    return np.einsum("lm,mkij->ijkl", g, up)
