"""Compiled inner loop of the outage quadrature.

The numpy formulation materializes a (hop-2 nodes x thresholds x r x r')
array several times per level; fusing the loops avoids those temporaries.
"""

import math

import numba
import numpy as np

_SERIES_CUTOFF = 15.0


@numba.njit(cache=True)
def _i0e(x):
    x = abs(x)
    if x <= _SERIES_CUTOFF:
        y = 0.25 * x * x
        term = 1.0
        total = 1.0
        k = 1
        while k < 80:
            term *= y / (k * k)
            total += term
            if term < 1e-17 * total:
                break
            k += 1
        return total * math.exp(-x)
    inv = 1.0 / x
    coef = 1.0
    power = 1.0
    total = 1.0
    for k in range(22):
        coef *= (2 * k + 1) ** 2 / (8.0 * (k + 1))
        power *= inv
        total += coef * power
    return total / math.sqrt(2.0 * math.pi * x)


@numba.njit(cache=True)
def _rician_pdf(r, nu, s2):
    if r <= 0.0:
        return 0.0
    d = r - nu
    return r / s2 * math.exp(-d * d / (2.0 * s2)) * _i0e(r * nu / s2)


@numba.njit(cache=True)
def _catmull_rom(row, step, n_pts, x):
    if x <= 0.0:
        return 0.0
    pos = x / step
    if pos > n_pts - 1:
        pos = n_pts - 1.0
    i = int(pos)
    if i > n_pts - 2:
        i = n_pts - 2
    u = pos - i
    p0 = row[i]
    p1 = row[i + 1]
    p2 = row[i + 2]
    p3 = row[i + 3]
    return p1 + 0.5 * u * (
        (p2 - p0) + u * ((2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) + u * (3.0 * (p1 - p2) + p3 - p0))
    )


@numba.njit(cache=True)
def level_kernel(r, w, nu2, s2, lo2, hi2, h, gl_x, gl_w, padded, step):
    """out[b, j] = sum_r w[r] int_{lo2[b]}^{min(hi2[b], h[j]/r)} f(r') F_b(h[j] - r r') dr'."""
    n_b = nu2.shape[0]
    n_h = h.shape[0]
    n_pts = padded.shape[1] - 2
    out = np.zeros((n_b, n_h))
    for b in range(n_b):
        row = padded[b]
        for j in range(n_h):
            acc = 0.0
            for q in range(r.shape[0]):
                upper = min(hi2[b], h[j] / r[q])
                half = 0.5 * (upper - lo2[b])
                if half <= 0.0:
                    continue
                inner = 0.0
                for m in range(gl_x.shape[0]):
                    rp = lo2[b] + half * (gl_x[m] + 1.0)
                    dens = _rician_pdf(rp, nu2[b], s2)
                    if dens == 0.0:
                        continue
                    inner += gl_w[m] * dens * _catmull_rom(row, step, n_pts, h[j] - r[q] * rp)
                acc += w[q] * inner * half
            out[b, j] = acc
    return out
