"""Slow reference implementations used as test oracles.

Everything here is written with plain loops and enumeration so it shares no
code path with the package.
"""

import itertools
import math

import numpy as np


def sq_dists(points):
    pts = [list(map(float, row)) for row in points]
    n = len(pts)
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = sum((a - b) ** 2 for a, b in zip(pts[i], pts[j]))
    return out


def gaussian_kernel(points, sigma):
    d2 = sq_dists(points)
    return np.exp(-d2 / (2.0 * sigma * sigma))


def median_distance(points):
    d2 = sq_dists(points)
    n = len(d2)
    vals = sorted(math.sqrt(d2[i, j]) for i in range(n) for j in range(i + 1, n))
    return vals[(len(vals) - 1) // 2]


def kernel_sums(k):
    """R0..R3 by direct summation over distinct index tuples."""
    k = np.asarray(k, dtype=float)
    n = k.shape[0]
    r0 = r1 = r2 = r3 = 0.0
    for u in range(n):
        for v in range(n):
            if u == v:
                continue
            r0 += k[u, v]
            r1 += k[u, v] ** 2
            for w in range(n):
                if w in (u, v):
                    continue
                r2 += k[u, v] * k[u, w]
                for z in range(n):
                    if z in (u, v, w):
                        continue
                    r3 += k[u, v] * k[w, z]
    return r0, r1, r2, r3


def alpha_beta(k, labels):
    k = np.asarray(k, dtype=float)
    sx = sy = 0.0
    nx = sum(1 for g in labels if g == 0)
    ny = len(labels) - nx
    for u, gu in enumerate(labels):
        for v, gv in enumerate(labels):
            if u == v:
                continue
            if gu == 0 and gv == 0:
                sx += k[u, v]
            if gu == 1 and gv == 1:
                sy += k[u, v]
    return sx / (nx * (nx - 1)), sy / (ny * (ny - 1))


def enumerate_null(k, b1):
    """Population moments of alpha, beta, W and D over all C(B, B1) labellings.

    Returns a dict together with the per-assignment arrays.
    """
    k = np.asarray(k, dtype=float)
    big = k.shape[0]
    b2 = big - b1
    rows = []
    for xs in itertools.combinations(range(big), b1):
        labels = [1] * big
        for u in xs:
            labels[u] = 0
        a, b = alpha_beta(k, labels)
        w = b1 / big * a + b2 / big * b
        d = b1 * (b1 - 1) * a - b2 * (b2 - 1) * b
        rows.append((a, b, w, d))
    arr = np.array(rows)
    a, b, w, d = arr.T
    mom = {
        "e_alpha": a.mean(),
        "e_beta": b.mean(),
        "var_alpha": a.var(),
        "var_beta": b.var(),
        "cov_ab": ((a - a.mean()) * (b - b.mean())).mean(),
        "e_w": w.mean(),
        "var_w": w.var(),
        "e_d": d.mean(),
        "var_d": d.var(),
    }
    return mom, arr


def mmd_u(kxx, kyy, kxy):
    """Unbiased MMD^2 with four explicit loops."""
    m = len(kxx)
    n = len(kyy)
    a = 0.0
    for i in range(m):
        for j in range(m):
            if i != j:
                a += kxx[i][j]
    b = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                b += kyy[i][j]
    c = 0.0
    for i in range(m):
        for j in range(n):
            c += kxy[i][j]
    return a / (m * (m - 1)) + b / (n * (n - 1)) - 2.0 * c / (m * n)


def normal_sf(z):
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def enumerate_null_vectorized(k, b1):
    """Same as :func:`enumerate_null` with the labellings stacked into one array."""
    k = np.array(k, dtype=float)
    np.fill_diagonal(k, 0.0)
    big = k.shape[0]
    b2 = big - b1
    combos = np.array(list(itertools.combinations(range(big), b1)))
    gx = np.zeros((len(combos), big))
    gx[np.arange(len(combos))[:, None], combos] = 1.0
    gy = 1.0 - gx
    a = np.einsum("lu,uv,lv->l", gx, k, gx) / (b1 * (b1 - 1))
    b = np.einsum("lu,uv,lv->l", gy, k, gy) / (b2 * (b2 - 1))
    w = b1 / big * a + b2 / big * b
    d = b1 * (b1 - 1) * a - b2 * (b2 - 1) * b
    return {
        "e_alpha": a.mean(),
        "var_alpha": a.var(),
        "var_beta": b.var(),
        "cov_ab": ((a - a.mean()) * (b - b.mean())).mean(),
        "e_w": w.mean(),
        "var_w": w.var(),
        "e_d": d.mean(),
        "var_d": d.var(),
    }
